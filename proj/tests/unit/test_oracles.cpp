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

#include <cmath>
#include <numbers>

#include "error.hpp"
#include "lindblad_engine.hpp"
#include "observables.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace pfermion;

namespace {

LorentzianBathSpec lead(double mu, double beta = 5.0) { return {1.0, 2.5, mu, beta}; }

oracles::TransmissionModel transport(double dmu, double eps = 1.0) {
    return {eps, {lead(dmu / 2), lead(-dmu / 2)}};
}

std::vector<PseudoFermionBath> fitted_leads(double dmu) {
    FitOptions fo;
    std::vector<PseudoFermionBath> out;
    for (auto [name, mu] : {std::pair{"L", dmu / 2}, std::pair{"R", -dmu / 2}}) {
        const auto s = lead(mu);
        out.push_back(build_bath(s, {MapKind::FittedTwo, 1, 1e6}, fit_matsubara_envelope(s, fo).terms, name));
    }
    return out;
}

DenseMatrix empty_level() {
    DenseMatrix r = DenseMatrix::Zero(2, 2);
    r(0, 0) = 1.0;
    return r;
}

double window_mean(const std::vector<double>& t, const std::vector<double>& y, double a, double b) {
    double s = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] >= a && t[i] <= b) {
            s += y[i];
            ++n;
        }
    }
    return s / n;
}

}  // namespace

TEST_CASE("lead self-energy has Im Sigma = -J") {
    const auto l = lead(0.7);
    for (double w : {-3.0, 0.0, 0.7, 2.2, 9.0}) {
        CHECK(oracles::lead_self_energy(w, l).imag() == doctest::Approx(-lorentzian_spectral_density(w, l)).epsilon(1e-13));
    }
}

TEST_CASE("level spectral function integrates to one") {
    const auto m = transport(3.0);
    double s = 0.0;
    const double h = 1e-3;
    for (double w = -400.0; w < 400.0; w += h) {
        s += h * 0.5 * (oracles::level_spectral_function(w, m) + oracles::level_spectral_function(w + h, m));
    }
    CHECK(s == doctest::Approx(1.0).epsilon(2e-3));
}

TEST_CASE("transmission current: zero bias, conservation and bias antisymmetry") {
    CHECK(oracles::exact_level_current(transport(0.0), 1) == 0.0);
    for (double dmu : {0.5, 2.0, 4.0, 10.0}) {
        const double ir = oracles::exact_level_current(transport(dmu), 1);
        const double il = oracles::exact_level_current(transport(dmu), 0);
        CHECK(ir > 0.0);
        CHECK(il == doctest::Approx(-ir).epsilon(1e-9));
        CHECK(oracles::exact_level_current(transport(-dmu), 1) == doctest::Approx(-ir).epsilon(1e-9));
    }
}

TEST_CASE("transmission current agrees with discretized-bath dynamics") {
    const double dmu = 4.0;
    const auto m = transport(dmu);
    std::vector<oracles::DiscretizedBath> disc{oracles::discretize(m.leads[0], 800), oracles::discretize(m.leads[1], 800)};
    const auto times = testsupport::linspace(20.0, 40.0, 81);
    REQUIRE(times.back() < disc[0].trust_time());
    const auto d = oracles::discretized_bath_dynamics(m.epsilon, disc, 0.0, times);
    const double exact = oracles::exact_level_current(m, 1);
    const double sampled = window_mean(times, d.currents[1], 20.0, 40.0);
    MESSAGE("exact " << exact << " discretized " << sampled);
    CHECK(std::abs(sampled - exact) < 1e-2 * std::abs(exact));
    CHECK(window_mean(times, d.currents[0], 20.0, 40.0) == doctest::Approx(-sampled).epsilon(1e-3));
}

TEST_CASE("discretized bath: equal weights follow the Lorentzian quantiles") {
    const auto l = lead(0.3);
    const auto d = oracles::discretize(l, 10);
    REQUIRE(d.energies.size() == 10);
    CHECK(d.energies[4] < l.mu);
    CHECK(d.energies[5] > l.mu);
    CHECK(d.energies[4] + d.energies[5] == doctest::Approx(2.0 * l.mu));
    double g2 = 0.0;
    for (double g : d.couplings) g2 += g * g;
    CHECK(g2 == doctest::Approx(l.coupling * l.width));
    CHECK(d.trust_time() == doctest::Approx(0.5 * 10 / 2.5));
}

TEST_CASE("discretized bath with zero coupling freezes the level") {
    auto d = oracles::discretize(lead(1.0), 50);
    for (double& g : d.couplings) g = 0.0;
    const auto dyn = oracles::discretized_bath_dynamics(0.4, {d}, 0.37, {0.0, 1.0, 5.0});
    for (double n : dyn.occupation) CHECK(n == doctest::Approx(0.37).epsilon(1e-13));
    for (double i : dyn.currents[0]) CHECK(std::abs(i) < 1e-13);
}

TEST_CASE("discretized current has the analytic short-time slope") {
    const auto l = lead(0.8);
    const auto d = oracles::discretize(l, 200);
    // dI/dt(0) = 2 sum_k g_k^2 (n_0 - n_k)
    const double n0 = 0.25;
    double slope = 0.0;
    for (std::size_t k = 0; k < d.energies.size(); ++k) {
        slope += 2.0 * d.couplings[k] * d.couplings[k] * (n0 - fermi_occupation(d.energies[k], l));
    }
    const double h = 1e-5;
    const auto dyn = oracles::discretized_bath_dynamics(0.6, {d}, n0, {0.0, h});
    CHECK(std::abs(dyn.currents[0][0]) < 1e-14);
    CHECK(dyn.currents[0][1] / h == doctest::Approx(slope).epsilon(1e-4));
}

TEST_CASE("Markovian reference trajectory") {
    CHECK(oracles::markovian_occupation(0.7, 0.3, 0.3, 2.0) == doctest::Approx(0.3));
    CHECK(oracles::markovian_occupation(0.7, 0.3, 1.0, 1e3) == doctest::Approx(0.3));
    CHECK(oracles::markovian_occupation(0.5, 0.0, 1.0, 1.0) == doctest::Approx(std::exp(-1.0)));
}

TEST_CASE("wide resonant bath reproduces Markovian relaxation") {
    const double eps = 1.0, W = 100.0 * eps;
    const LorentzianBathSpec spec{1.0, W, 0.0, 5.0};
    const AugmentedModel m(SystemSpec::single_level(eps), {build_bath(spec, {MapKind::Resonant, 0}, {}, "L")});
    const auto times = testsupport::linspace(0.0, 3.0, 61);
    const auto n = evolve_observables(m, initial_state(m, empty_level()), times, {m.number(0)});
    // resonant correlation is Gamma W/2 e^{-W|t|} for both sigma: Gamma0 = Gamma, n0 = 1/2
    double worst = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        worst = std::max(worst, std::abs(n[0][i].real() - oracles::markovian_occupation(1.0, 0.5, 0.0, times[i])));
    }
    MESSAGE("max |dn| / |n(0) - n0| = " << worst / 0.5);
    CHECK(worst / 0.5 < 0.02);
}

TEST_CASE("fast Matsubara pair is irrelevant; a slow one is not") {
    const auto spec = lead(0.0);
    const auto times = testsupport::linspace(0.0, 5.0, 26);
    const double eps = 1.0;
    // x_80 = 159 pi / 5 ~ 100 eps
    const auto fast = oracles::fast_matsubara_irrelevance_check(spec, 80, eps, 1e-3, times, 1e2);
    MESSAGE("x_80 = " << fast.rate << " deviation " << fast.max_deviation);
    CHECK(fast.rate / eps > 99.0);
    CHECK(fast.passed);
    const auto slow = oracles::fast_matsubara_irrelevance_check(spec, 1, eps, 1e-3, times, 1e2);
    MESSAGE("x_1 = " << slow.rate << " deviation " << slow.max_deviation);
    CHECK_FALSE(slow.passed);
}

TEST_CASE("steady current is conserved and antisymmetric in bias") {
    for (double dmu : {2.0, 7.0}) {
        const AugmentedModel a(SystemSpec::single_level(1.0), fitted_leads(dmu));
        const AugmentedModel b(SystemSpec::single_level(1.0), fitted_leads(-dmu));
        const AugmentedState sa = steady_state(a), sb = steady_state(b);
        const auto la = lead_current(a, sa, "L"), ra = lead_current(a, sa, "R");
        CHECK(std::abs(la.value + ra.value) < 1e-12);
        CHECK(std::abs(ra.imaginary) < 1e-10);
        CHECK(ra.value > 0.0);
        CHECK(lead_current(b, sb, "R").value == doctest::Approx(-ra.value).epsilon(1e-9));
        CHECK(ra.value == doctest::Approx(oracles::exact_level_current(transport(dmu), 1)).epsilon(0.03));
    }
}

TEST_CASE("lead current rejects an unknown lead") {
    const AugmentedModel m(SystemSpec::single_level(1.0), fitted_leads(1.0));
    try {
        lead_current(m, steady_state(m), "X");
        FAIL("expected IndexOutOfRange");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::IndexOutOfRange);
    }
}

TEST_CASE("non-interacting spectral function matches the retarded Green function") {
    const AugmentedModel m(SystemSpec::single_level(1.0), fitted_leads(2.0));
    const AugmentedState ss = steady_state(m);
    std::vector<double> omega;
    for (int i = -200; i <= 200; ++i) omega.push_back(0.05 * i);
    const auto tab = spectral_function(m, ss, m.annihilation(0), omega);
    double worst = 0.0, peak = 0.0;
    for (std::size_t i = 0; i < omega.size(); ++i) {
        const double ref = oracles::level_spectral_function(omega[i], transport(2.0));
        worst = std::max(worst, std::abs(tab.value[i] - ref));
        peak = std::max(peak, ref);
    }
    MESSAGE("max |dA| / max A = " << worst / peak);
    CHECK(worst < 2e-3 * peak);
    CHECK(tab.sum_rule == doctest::Approx(1.0).epsilon(0.01));
    CHECK(tab.reality < 1e-10);
    CHECK(std::abs(tab.particle[0] - 1.0) < 1e-12);
    CHECK(std::abs(tab.hole[0] - 1.0) < 1e-12);
}

TEST_CASE("spectral function reports a truncated time window") {
    const AugmentedModel m(SystemSpec::single_level(1.0), fitted_leads(2.0));
    const AugmentedState ss = steady_state(m);
    SpectrumOptions o;
    o.t_max = 0.5;
    try {
        spectral_function(m, ss, m.annihilation(0), {0.0, 1.0}, o);
        FAIL("expected InsufficientTimeWindow");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InsufficientTimeWindow);
        CHECK(e.achieved() > 1e-2);
    }
    try {
        spectral_function(m, ss, m.number(0), {0.0, 1.0});
        FAIL("expected ParityViolation");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ParityViolation);
    }
}

TEST_CASE("local maxima with prominence") {
    std::vector<double> y;
    for (int i = 0; i <= 400; ++i) {
        const double x = -10.0 + 0.05 * i;
        y.push_back(std::exp(-(x - 5) * (x - 5)) + std::exp(-(x + 5) * (x + 5)) + 0.5 * std::exp(-4 * x * x) +
                    1e-4 * std::sin(40 * x));
    }
    const auto p = local_maxima(y, 0.05);
    REQUIRE(p.size() == 3);
    CHECK(-10.0 + 0.05 * double(p[0]) == doctest::Approx(-5.0).epsilon(0.01));
    CHECK(-10.0 + 0.05 * double(p[1]) == doctest::Approx(0.0));
    CHECK(-10.0 + 0.05 * double(p[2]) == doctest::Approx(5.0).epsilon(0.01));
    CHECK(local_maxima({1.0, 1.0, 1.0}).empty());
    CHECK(local_maxima({0.0, 2.0, 2.0, 0.0}).size() == 1);
}
