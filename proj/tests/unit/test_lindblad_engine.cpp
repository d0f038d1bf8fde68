// Copyright 2025 The pfermion Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <string>

#include "error.hpp"
#include "lindblad_engine.hpp"
#include "observables.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace pfermion;

namespace {

PseudoFermionMode make_mode(cplx n, cplx lambda, cplx omega, cplx gamma) {
    PseudoFermionMode m;
    m.occupation = n;
    m.coupling = lambda;
    m.coupling_sq = lambda * lambda;
    m.frequency = omega;
    m.damping = gamma;
    return m;
}

PseudoFermionBath single_mode_bath(const PseudoFermionMode& m, const std::string& lead = "L") {
    PseudoFermionBath b;
    b.modes = {m};
    b.lead = lead;
    return b;
}

DenseMatrix level_density(double n) {
    DenseMatrix r = DenseMatrix::Zero(2, 2);
    r(0, 0) = 1.0 - n;
    r(1, 1) = n;
    return r;
}

// Vacuum on every mode.
AugmentedState vacuum(const AugmentedModel& model) {
    Local2 p0 = Local2::Zero();
    p0(0, 0) = 1.0;
    AugmentedState s;
    s.even = model.space().product_state(std::vector<Local2>(std::size_t(model.modes()), p0), kEven);
    return s;
}

std::vector<PseudoFermionBath> complex_baths() {
    return {single_mode_bath(make_mode({0.3, 0.2}, {0.7, 0.3}, {0.4, -0.1}, {1.2, 0.4}), "L"),
            single_mode_bath(make_mode({0.8, -0.15}, {0.5, -0.2}, {-0.6, 0.2}, {0.9, -0.3}), "R")};
}

std::vector<PseudoFermionBath> resonant_pair(double dmu, double beta = 5.0) {
    const LorentzianBathSpec L{1.0, 2.5, dmu / 2, beta}, R{1.0, 2.5, -dmu / 2, beta};
    return {build_bath(L, {MapKind::Resonant, 0}, {}, "L"), build_bath(R, {MapKind::Resonant, 0}, {}, "R")};
}

std::vector<PseudoFermionBath> fitted_pair(double dmu) {
    const LorentzianBathSpec L{1.0, 2.5, dmu / 2, 5.0}, R{1.0, 2.5, -dmu / 2, 5.0};
    FitOptions fo;
    return {build_bath(L, {MapKind::FittedTwo, 1, 1e6}, fit_matsubara_envelope(L, fo).terms, "L"),
            build_bath(R, {MapKind::FittedTwo, 1, 1e6}, fit_matsubara_envelope(R, fo).terms, "R")};
}

}  // namespace

TEST_CASE("level plus mode Hamiltonian: Hermitian with spectrum {0, 0, +-lambda}") {
    const double lambda = 0.8;
    const AugmentedModel m(SystemSpec::single_level(0.0), {single_mode_bath(make_mode(0.5, lambda, 0.0, 1.0))});
    const DenseMatrix h = DenseMatrix(m.hamiltonian().to_sparse());
    CHECK((h - h.adjoint()).norm() < 1e-14);
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es(h);
    const auto ev = es.eigenvalues();
    CHECK(ev[0] == doctest::Approx(-lambda));
    CHECK(std::abs(ev[1]) < 1e-14);
    CHECK(std::abs(ev[2]) < 1e-14);
    CHECK(ev[3] == doctest::Approx(lambda));
}

TEST_CASE("imaginary coupling gives a non-Hermitian Hamiltonian") {
    const AugmentedModel m(SystemSpec::single_level(0.0),
                           {single_mode_bath(make_mode(0.5, cplx(0.0, 0.8), 0.0, 1.0))});
    const DenseMatrix h = DenseMatrix(m.hamiltonian().to_sparse());
    CHECK((h - h.adjoint()).norm() > 0.5);
    CHECK((h - h.transpose()).norm() < 1e-14);
}

TEST_CASE("decoupled mode relaxes from vacuum as n(1 - exp(-2 Gamma t))") {
    const cplx n(0.35, 0.2), gamma(0.7, 0.25);
    const AugmentedModel m(SystemSpec::single_level(0.4), {single_mode_bath(make_mode(n, 0.0, 0.3, gamma))});
    const auto times = testsupport::linspace(0.0, 4.0, 21);
    const auto obs = evolve_observables(m, vacuum(m), times, {m.number(1), m.number(0)});
    for (std::size_t i = 0; i < times.size(); ++i) {
        const cplx expected = n * (1.0 - std::exp(-2.0 * gamma * times[i]));
        CHECK(std::abs(obs[0][i] - expected) < 1e-8);
        CHECK(std::abs(obs[1][i]) < 1e-12);
    }
}

TEST_CASE("generator trace row vanishes and the initial state carries the pf occupations") {
    const AugmentedModel m(SystemSpec::single_level(0.5), complex_baths());
    CHECK(m.trace_row_norm() < 1e-12);
    const AugmentedState s = initial_state(m, level_density(0.25));
    CHECK(std::abs(trace(m, s) - 1.0) < 1e-14);
    CHECK(std::abs(occupation(m, s, "s") - 0.25) < 1e-14);
    for (int j = 1; j < m.modes(); ++j) CHECK(std::abs(expectation(m, s, m.number(j)) - m.mode(j).occupation) < 1e-14);
}

TEST_CASE("zero generator leaves the state unchanged") {
    // zero-coupling mode with vanishing damping is rejected, so use a level with no dynamics in the even block
    const AugmentedModel m(SystemSpec::single_level(0.0), {single_mode_bath(make_mode(0.5, 0.0, 0.0, 1.0))});
    const AugmentedState s = initial_state(m, level_density(0.3));
    const auto traj = evolve(m, s, {0.0, 1.0, 5.0});
    for (const auto& st : traj) CHECK((st.even - s.even).norm() < 1e-12);
}

TEST_CASE("steady state of a level coupled to one physical mode has the mode occupation") {
    const double n = 0.3;
    const AugmentedModel m(SystemSpec::single_level(0.7), {single_mode_bath(make_mode(n, 0.6, 0.2, 0.9))});
    SteadyReport rep;
    const AugmentedState ss = steady_state(m, {}, &rep);
    CHECK(std::abs(occupation(m, ss, "s") - n) < 1e-10);
    CHECK(std::abs(trace(m, ss) - 1.0) < 1e-12);
    CHECK(rep.residual < 1e-9);
    CHECK(rep.gap_estimate > 1e-3);
}

TEST_CASE("zero bias gives zero steady current") {
    const AugmentedModel m(SystemSpec::single_level(1.0), resonant_pair(0.0));
    const AugmentedState ss = steady_state(m);
    CHECK(std::abs(lead_current(m, ss, "L").value) < 1e-10);
    CHECK(std::abs(lead_current(m, ss, "R").value) < 1e-10);
}

TEST_CASE("steady state agrees with long-time propagation") {
    const AugmentedModel m(SystemSpec::single_level(1.0), resonant_pair(3.0));
    const AugmentedState ss = steady_state(m);
    const auto traj = evolve(m, initial_state(m, level_density(0.0)), {0.0, 50.0});
    CHECK(std::abs(occupation(m, ss, "s") - occupation(m, traj.back(), "s")) < 1e-6);
    CHECK(std::abs(lead_current(m, ss, "R").value - lead_current(m, traj.back(), "R").value) < 1e-6);
    for (auto method : {SteadyMethod::Direct, SteadyMethod::Iterative, SteadyMethod::Propagation}) {
        SteadyOptions o;
        o.method = method;
        const AugmentedState alt = steady_state(m, o);
        CHECK(std::abs(occupation(m, alt, "s") - occupation(m, ss, "s")) < 1e-7);
    }
}

TEST_CASE("two-time correlation of a decoupled mode matches the closed form") {
    const cplx n(0.3, 0.1), omega(0.8, -0.2), gamma(0.6, 0.3);
    const AugmentedModel m(SystemSpec::single_level(0.5), {single_mode_bath(make_mode(n, 0.0, omega, gamma))});
    const AugmentedState rho = initial_state(m, level_density(0.4));
    const auto times = testsupport::linspace(0.0, 3.0, 13);
    const OperatorSum c = m.annihilation(1), cd = m.creation(1);
    // Tr[c e^{Lt}(c^dag rho)] via the left action
    const auto g = two_time_correlation(m, rho, c, cd, times);
    CHECK(std::abs(g[0] - (1.0 - n)) < 1e-12);
    for (std::size_t i = 0; i < times.size(); ++i) {
        CHECK(std::abs(g[i] - (1.0 - n) * std::exp(-(cplx(0.0, 1.0) * omega + gamma) * times[i])) < 1e-8);
    }
    // opposite ordering through <c^dag(t) c>
    const auto h = two_time_correlation(m, rho, cd, c, times);
    CHECK(std::abs(h[0] - n) < 1e-12);
    for (std::size_t i = 0; i < times.size(); ++i) {
        CHECK(std::abs(h[i] - n * std::exp((cplx(0.0, 1.0) * omega - gamma) * times[i])) < 1e-8);
    }
}

TEST_CASE("trace is preserved with complex pseudo-fermion parameters") {
    const AugmentedModel m(SystemSpec::anderson(-1.0, 2.0),
                           {[] {
                                auto b = complex_baths()[0];
                                b.spin = "up";
                                return b;
                            }(),
                            [] {
                                auto b = complex_baths()[1];
                                b.spin = "down";
                                return b;
                            }()});
    DenseMatrix rho = DenseMatrix::Zero(4, 4);
    rho.diagonal() << 0.1, 0.2, 0.3, 0.4;
    PropagationReport rep;
    const auto traj = evolve(m, initial_state(m, rho), testsupport::linspace(0.0, 10.0, 11), {}, &rep);
    for (const auto& s : traj) CHECK(std::abs(trace(m, s) - 1.0) < 1e-8);
    CHECK(rep.max_trace_deviation < 1e-8);
}

TEST_CASE("reduced density is a state for physical baths") {
    const AugmentedModel m(SystemSpec::single_level(0.3),
                           {single_mode_bath(make_mode(0.2, 0.7, 0.5, 0.8), "L"),
                            single_mode_bath(make_mode(0.9, 0.4, -0.3, 1.1), "R")});
    DenseMatrix rho0 = level_density(0.6);
    const auto traj = evolve(m, initial_state(m, rho0), testsupport::linspace(0.0, 6.0, 13));
    for (const auto& s : traj) {
        const DenseMatrix r = reduced_system_density(m, s);
        CHECK((r - r.adjoint()).norm() < 1e-10);
        Eigen::SelfAdjointEigenSolver<DenseMatrix> es(r);
        CHECK(es.eigenvalues().minCoeff() > -1e-10);
        CHECK(std::abs(r.trace() - 1.0) < 1e-10);
    }
}

TEST_CASE("reduced density stays Hermitian for a faithful Lorentzian decomposition") {
    const AugmentedModel m(SystemSpec::single_level(1.0), fitted_pair(4.0));
    const auto traj = evolve(m, initial_state(m, level_density(0.0)), testsupport::linspace(0.0, 5.0, 11));
    for (const auto& s : traj) {
        const DenseMatrix r = reduced_system_density(m, s);
        CHECK((r - r.adjoint()).norm() < 1e-6);
    }
}

TEST_CASE("a conserved second system mode gives a degenerate null space") {
    DenseMatrix h = DenseMatrix::Zero(4, 4);
    h(1, 1) = 0.5;
    h(2, 2) = -0.4;
    h(3, 3) = 0.1;
    DenseMatrix c0 = DenseMatrix::Zero(4, 4);
    c0(0, 1) = 1.0;
    c0(2, 3) = 1.0;
    const AugmentedModel m(SystemSpec::explicit_system(h, {{"", c0}}),
                           {single_mode_bath(make_mode(0.4, 0.6, 0.0, 1.0))});
    for (auto method : {SteadyMethod::Direct, SteadyMethod::Iterative}) {
        SteadyOptions o;
        o.method = method;
        try {
            steady_state(m, o);
            FAIL("expected DegenerateNullSpace");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::DegenerateNullSpace);
        }
    }
}

TEST_CASE("Krylov and Dormand-Prince trajectories agree") {
    const AugmentedModel m(SystemSpec::single_level(1.0), fitted_pair(4.0));
    const auto times = testsupport::linspace(0.0, 4.0, 9);
    PropagationOptions kr;
    kr.integrator = Integrator::Krylov;
    const AugmentedState s0 = initial_state(m, level_density(0.0));
    const auto a = evolve_observables(m, s0, times, {m.number(0)});
    const auto b = evolve_observables(m, s0, times, {m.number(0)}, kr);
    for (std::size_t i = 0; i < times.size(); ++i) CHECK(std::abs(a[0][i] - b[0][i]) < 1e-7);
}

TEST_CASE("exhausted step budget raises StepSizeUnderflow") {
    const AugmentedModel m(SystemSpec::single_level(1.0), resonant_pair(2.0));
    PropagationOptions o;
    o.max_steps = 3;
    try {
        evolve(m, initial_state(m, level_density(0.0)), {0.0, 100.0}, o);
        FAIL("expected StepSizeUnderflow");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::StepSizeUnderflow);
    }
}

TEST_CASE("two-time correlation rejects even operators") {
    const AugmentedModel m(SystemSpec::single_level(1.0), resonant_pair(2.0));
    const AugmentedState s = initial_state(m, level_density(0.5));
    try {
        two_time_correlation(m, s, m.number(0), m.creation(0), {0.0, 1.0});
        FAIL("expected ParityViolation");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ParityViolation);
    }
}

TEST_CASE("engine evolution matches the dense column-stacked reference") {
    const SystemSpec sys = SystemSpec::single_level(0.6);
    const auto baths = complex_baths();
    const AugmentedModel m(sys, baths);
    const DenseMatrix rho_s = level_density(0.7);
    const auto times = testsupport::linspace(0.0, 3.0, 7);
    const FockSpaceLayout layout = oracles::dense_layout(sys, baths);
    std::vector<SparseMatrix> dense_obs;
    std::vector<OperatorSum> obs;
    for (int j = 0; j < m.modes(); ++j) {
        dense_obs.push_back(number(j, layout).matrix);
        obs.push_back(m.number(j));
    }
    const auto ref = oracles::dense_evolve(oracles::dense_liouvillian(sys, baths),
                                           oracles::dense_initial_state(sys, baths, rho_s), dense_obs, times);
    const auto got = evolve_observables(m, initial_state(m, rho_s), times, obs);
    for (std::size_t k = 0; k < obs.size(); ++k) {
        for (std::size_t i = 0; i < times.size(); ++i) {
            CAPTURE(k);
            CAPTURE(i);
            CHECK(std::abs(got[k][i] - ref[k][i]) < 1e-8);
        }
    }
}

TEST_CASE("resonant pseudo-fermions at high temperature match a discretized bath") {
    // beta -> 0 suppresses every Matsubara term
    const double beta = 1e-4;
    const auto baths = resonant_pair(2.0, beta);
    const AugmentedModel m(SystemSpec::single_level(1.0), baths);
    const auto times = testsupport::linspace(0.0, 5.0, 26);
    const auto pf = evolve_observables(m, initial_state(m, level_density(0.0)), times, {m.number(0)});
    std::vector<oracles::DiscretizedBath> disc;
    for (const auto& b : baths) disc.push_back(oracles::discretize(b.spec, 600));
    const auto ref = oracles::discretized_bath_dynamics(1.0, disc, 0.0, times);
    double worst = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) worst = std::max(worst, std::abs(pf[0][i] - ref.occupation[i]));
    MESSAGE("max |dn| resonant vs discretized: " << worst);
    CHECK(worst < 1e-3);
}

TEST_CASE("fitted pseudo-fermions track a discretized bath in the transport regime") {
    const auto baths = fitted_pair(4.0);
    const AugmentedModel m(SystemSpec::single_level(1.0), baths);
    const auto times = testsupport::linspace(0.0, 5.0, 26);
    const auto pf = evolve_observables(m, initial_state(m, level_density(0.0)), times, {m.number(0)});
    std::vector<oracles::DiscretizedBath> disc;
    for (const auto& b : baths) disc.push_back(oracles::discretize(b.spec, 600));
    const auto ref = oracles::discretized_bath_dynamics(1.0, disc, 0.0, times);
    double worst = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) worst = std::max(worst, std::abs(pf[0][i] - ref.occupation[i]));
    MESSAGE("max |dn| fitted vs discretized: " << worst);
    CHECK(worst < 2e-3);
}
