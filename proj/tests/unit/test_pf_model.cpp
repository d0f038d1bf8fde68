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
#include <random>

#include "error.hpp"
#include "pf_model.hpp"
#include "test_support.hpp"

using namespace pfermion;
using testsupport::linspace;

namespace {

LorentzianBathSpec reference_bath() { return {1.0, 2.5, 0.0, 5.0}; }

double pair_error(const LorentzianBathSpec& s, int k, double delta) {
    const auto modes = matsubara_modes_two(s, k, delta, 1.0);
    double e = 0.0;
    for (int sigma : {1, -1}) {
        for (double t : linspace(0.0, 10.0, 201)) {
            const cplx pf = pf_mode_correlation(modes[0], sigma, t) + pf_mode_correlation(modes[1], sigma, t);
            e = std::max(e, std::abs(pf - matsubara_correlation_term(sigma, t, k, s)));
        }
    }
    return e;
}

}  // namespace

TEST_CASE("resonant mode") {
    const auto m = resonant_mode(reference_bath());
    CHECK(m.occupation == cplx(0.5));
    CHECK(m.coupling_sq == cplx(2.5));
    CHECK(m.frequency == cplx(0.0));
    CHECK(m.damping == cplx(2.5));
    CHECK(pf_mode_correlation(m, 1, 0.0) == cplx(1.25));
    LorentzianBathSpec s{0.7, 1.9, -0.4, 3.0};
    const auto r = resonant_mode(s);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-6.0, 6.0);
    for (int i = 0; i < 100; ++i) {
        const int sigma = i % 2 ? 1 : -1;
        const double t = u(rng);
        CHECK(std::abs(pf_mode_correlation(r, sigma, t) - resonant_correlation(sigma, t, s)) < 1e-15);
    }
}

TEST_CASE("two-mode map") {
    const auto s = reference_bath();
    const auto modes = matsubara_modes_two(s, 1, 1e6);
    CHECK(modes[0].coupling_sq + modes[1].coupling_sq == cplx(0.0));
    CHECK(modes[0].occupation == cplx(1e6));
    CHECK(modes[0].damping.real() == doctest::Approx(0.5 * (2.5 + std::numbers::pi / 5.0)));
    CHECK_THROWS_AS(matsubara_modes_two(s, 1, 10.0, 100.0), Error);
    try {
        matsubara_modes_two(s, 1, 10.0, 100.0);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::RegulatorTooSmall);
    }
    LorentzianBathSpec collide{1.0, 1.0, 0.0, std::numbers::pi};
    CHECK_THROWS_AS(matsubara_modes_two(collide, 1, 1e6), Error);
}

TEST_CASE("two-mode map error is O(1/Delta)") {
    LorentzianBathSpec s{1.0, 2.5, 0.3, 5.0};
    for (int k : {1, 2, 5}) {
        const double e4 = pair_error(s, k, 1e4), e6 = pair_error(s, k, 1e6), e8 = pair_error(s, k, 1e8);
        CHECK(e4 / e6 == doctest::Approx(100.0).epsilon(0.02));
        CHECK(e6 / e8 == doctest::Approx(100.0).epsilon(0.05));
        for (double d : {1e4, 3e4, 1e5}) {
            const double ratio = pair_error(s, k, 2.0 * d) / pair_error(s, k, d);
            CHECK(ratio >= 0.45);
            CHECK(ratio <= 0.55);
        }
    }
}

TEST_CASE("four-mode map is exact") {
    LorentzianBathSpec s{1.0, 2.5, 0.45, 5.0};
    const auto q = matsubara_modes_four(s, 1);
    std::vector<double> occ;
    for (const auto& m : q) occ.push_back(m.occupation.real());
    std::sort(occ.begin(), occ.end());
    CHECK(occ == std::vector<double>{0.0, 0.0, 1.0, 1.0});
    double worst = 0.0;
    for (int k = 1; k <= 50; ++k) {
        const auto modes = matsubara_modes_four(s, k);
        const double scale = std::abs(matsubara_term(k, s).amplitude);
        for (int sigma : {1, -1}) {
            for (double t : linspace(-10.0, 10.0, 41)) {
                cplx pf = 0.0;
                for (const auto& m : modes) pf += pf_mode_correlation(m, sigma, t);
                worst = std::max(worst, std::abs(pf - matsubara_correlation_term(sigma, t, k, s)) / scale);
            }
        }
    }
    CHECK(worst < 1e-14);
}

TEST_CASE("two-mode at large Delta agrees with four-mode") {
    const auto s = reference_bath();
    BathConstruction two{MapKind::ExactTwo, 5, 1e8};
    BathConstruction four{MapKind::ExactFour, 5};
    const auto a = build_bath(s, two);
    const auto b = build_bath(s, four);
    CHECK(a.modes.size() == 11);
    CHECK(b.modes.size() == 21);
    double e = 0.0;
    for (int sigma : {1, -1}) {
        for (double t : linspace(0.0, 10.0, 201)) {
            e = std::max(e, std::abs(pf_bath_correlation(a, sigma, t) - pf_bath_correlation(b, sigma, t)));
        }
    }
    CHECK(e < 1e-7);
}

TEST_CASE("fit-based maps") {
    const auto s = reference_bath();
    std::vector<FitTerm> exact;
    for (int k = 1; k <= 2; ++k) {
        const auto m = matsubara_term(k, s);
        exact.push_back({m.amplitude, s.width, m.frequency});
    }
    const auto modes = modes_from_fit(s, exact, 1e6);
    REQUIRE(modes.size() == 4);
    for (int k = 1; k <= 2; ++k) {
        const auto ref = matsubara_modes_two(s, k, 1e6);
        for (int r = 0; r < 2; ++r) {
            const auto& m = modes[2 * (k - 1) + r];
            CHECK(std::abs(m.coupling_sq - ref[r].coupling_sq) <= 1e-15 * std::abs(ref[r].coupling_sq));
            CHECK(std::abs(m.frequency - ref[r].frequency) < 1e-15);
            CHECK(m.damping == ref[r].damping);
            CHECK(m.occupation == ref[r].occupation);
        }
    }
    FitOptions o;
    const auto fit = fit_matsubara_envelope(s, o);
    const auto fitted = build_bath(s, {MapKind::FittedTwo, 1, 1e6}, fit.terms, "L");
    CHECK(fitted.modes.size() == 3);
    CHECK(fitted.modes[2].lead == "L");
    const auto fitted4 = build_bath(s, {MapKind::FittedFour, 1}, fit.terms);
    CHECK(fitted4.modes.size() == 5);
    double e = 0.0;
    for (int sigma : {1, -1}) {
        for (double t : linspace(0.0, 10.0, 101)) {
            e = std::max(e, std::abs(pf_bath_correlation(fitted, sigma, t) - pf_bath_correlation(fitted4, sigma, t)));
        }
    }
    CHECK(e < 2.0 * std::abs(fit.terms[0].amplitude) / 1e6);
    CHECK_THROWS_AS(build_bath(s, {MapKind::FittedTwo, 2, 1e6}, fit.terms), Error);
}

TEST_CASE("pf mode correlation conventions") {
    PseudoFermionMode m;
    m.occupation = 0.3;
    m.coupling = cplx(0.0, 1.0);
    m.coupling_sq = -1.0;
    m.frequency = cplx(0.4, 0.2);
    m.damping = cplx(1.1, -0.3);
    CHECK(pf_mode_correlation(m, -1, 0.0) == cplx(-0.7));
    const cplx c0 = pf_mode_correlation(m, 1, 0.0);
    CHECK(c0.real() < 0.0);
    CHECK(c0 == cplx(-0.3));
    for (int sigma : {1, -1}) {
        for (double t : linspace(-5.0, 5.0, 21)) {
            const double bound = std::abs(m.coupling_sq) * std::abs(0.5 * (1.0 - sigma) + double(sigma) * m.occupation) *
                                 std::exp(-m.damping.real() * std::abs(t)) * std::exp(std::abs(m.frequency.imag()) * std::abs(t));
            CHECK(std::abs(pf_mode_correlation(m, sigma, t)) <= bound * (1.0 + 1e-14));
        }
    }
}

TEST_CASE("bath correlation sums and linearity") {
    PseudoFermionBath empty;
    CHECK(pf_bath_correlation(empty, 1, 0.7) == cplx(0.0));
    const auto s = reference_bath();
    const auto a = build_bath(s, {MapKind::ExactFour, 2});
    const auto b = build_bath({0.5, 1.0, 0.2, 2.0}, {MapKind::Resonant, 0});
    const auto ab = concatenate(a, b);
    for (double t : {-0.5, 0.0, 1.3}) {
        CHECK(std::abs(pf_bath_correlation(ab, 1, t) - pf_bath_correlation(a, 1, t) - pf_bath_correlation(b, 1, t)) < 1e-15);
    }
}

TEST_CASE("exact-four bath reproduces the truncated decomposition") {
    const auto s = reference_bath();
    const auto bath = build_bath(s, {MapKind::ExactFour, 200});
    CHECK(bath.modes.size() == 801);
    for (int sigma : {1, -1}) {
        for (double t : {0.0, 0.3, 1.0, 6.0}) {
            CHECK(std::abs(pf_bath_correlation(bath, sigma, t) - correlation_decomposed(sigma, t, s, 200)) < 1e-12);
        }
    }
    const auto report = validate_bath(bath, s, linspace(0.0, 10.0, 41), {1, -1}, 1e-5);
    // truncation of the Matsubara series dominates the deviation
    CHECK(report.max_deviation[0] > 1e-4);
    CHECK(report.max_deviation[0] < 1e-2);
    CHECK(!report.passed);
    MESSAGE("exact-four K=200 max deviation from quadrature: " << report.max_deviation[0]);
}

TEST_CASE("validate_bath: resonant-only bath deviates by the Matsubara part") {
    LorentzianBathSpec s{1.0, 2.5, 0.0, 20.0};
    const auto bath = build_bath(s, {MapKind::Resonant, 0});
    const auto grid = linspace(0.0, 10.0, 41);
    const auto r = validate_bath(bath, s, grid, {1, -1}, 1e-6);
    CHECK(!r.passed);
    double sup = 0.0;
    for (double t : grid) sup = std::max(sup, std::abs(matsubara_envelope(t, s, 0)));
    CHECK(r.max_deviation[0] == doctest::Approx(sup).epsilon(1e-6));
    CHECK(r.max_deviation[1] == doctest::Approx(sup).epsilon(1e-6));
    CHECK_THROWS_AS(validate_bath(bath, s, {}, {1}, 1.0), Error);
}

TEST_CASE("bath descriptor round trip") {
    const auto s = LorentzianBathSpec{1.0, 2.5, 0.37, 5.0};
    FitOptions o;
    o.restarts = 2;
    const auto fit = fit_matsubara_envelope(s, o);
    const auto bath = build_bath(s, {MapKind::FittedTwo, 1, cplx(1e6, 3.0)}, fit.terms, "R", "up");
    const std::string text = serialize_bath(bath);
    const auto back = parse_bath(text);
    CHECK(serialize_bath(back) == text);
    REQUIRE(back.modes.size() == bath.modes.size());
    for (std::size_t i = 0; i < bath.modes.size(); ++i) {
        CHECK(back.modes[i].coupling == bath.modes[i].coupling);
        CHECK(back.modes[i].frequency == bath.modes[i].frequency);
        CHECK(back.modes[i].occupation == bath.modes[i].occupation);
        CHECK(back.modes[i].spin == "up");
    }
    CHECK(back.construction.delta == bath.construction.delta);
    CHECK(back.fit_terms[0].amplitude == bath.fit_terms[0].amplitude);
    CHECK_THROWS_AS(parse_bath("pfermion-bath 1\nmode 1 2\n"), Error);
    CHECK_THROWS_AS(parse_bath("garbage"), Error);
}
