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

#include "bath_correlations.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>

#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <numbers>
#include <sstream>

#include "error.hpp"

namespace pfermion {

namespace {

constexpr double kPi = std::numbers::pi;
const cplx I1(0.0, 1.0);

struct GslHandlerOff {
    GslHandlerOff() { gsl_set_error_handler_off(); }
};
const GslHandlerOff gsl_handler_off;

double sgn(double t) { return t > 0.0 ? 1.0 : (t < 0.0 ? -1.0 : 0.0); }

void require_finite_beta(const LorentzianBathSpec& spec, const char* op) {
    if (spec.zero_temperature()) {
        fail(ErrorCode::InvalidArgument, std::string(op) + ": requires finite inverse temperature");
    }
}

struct Workspace {
    gsl_integration_workspace* w = nullptr;
    gsl_integration_workspace* cycle = nullptr;
    gsl_integration_qawo_table* table = nullptr;
    ~Workspace() {
        if (table) gsl_integration_qawo_table_free(table);
        if (cycle) gsl_integration_workspace_free(cycle);
        if (w) gsl_integration_workspace_free(w);
    }
};

template <class F>
gsl_function make_gsl(F& f) {
    gsl_function g;
    g.function = [](double x, void* p) { return (*static_cast<F*>(p))(x); };
    g.params = &f;
    return g;
}

constexpr std::size_t kLimit = 2000;

// int_0^inf f(u) trig(w u) du
template <class F>
std::pair<double, double> fourier_half_line(F& f, double w, enum gsl_integration_qawo_enum kind,
                                            double abs_tol) {
    Workspace ws;
    ws.w = gsl_integration_workspace_alloc(kLimit);
    ws.cycle = gsl_integration_workspace_alloc(kLimit);
    ws.table = gsl_integration_qawo_table_alloc(w, 1.0, kind, 50);
    gsl_function g = make_gsl(f);
    double result = 0.0, err = 0.0;
    int status = gsl_integration_qawf(&g, 0.0, abs_tol, kLimit, ws.w, ws.cycle, ws.table, &result, &err);
    if (status != GSL_SUCCESS && err > abs_tol) {
        fail(ErrorCode::QuadratureNonconvergence,
             std::string("oscillatory quadrature failed: ") + gsl_strerror(status), err);
    }
    return {result, err};
}

template <class F>
std::pair<double, double> half_line(F& f, double abs_tol) {
    Workspace ws;
    ws.w = gsl_integration_workspace_alloc(kLimit);
    gsl_function g = make_gsl(f);
    double result = 0.0, err = 0.0;
    int status = gsl_integration_qagiu(&g, 0.0, abs_tol, 1e-12, kLimit, ws.w, &result, &err);
    if (status != GSL_SUCCESS && err > abs_tol) {
        fail(ErrorCode::QuadratureNonconvergence,
             std::string("half-line quadrature failed: ") + gsl_strerror(status), err);
    }
    return {result, err};
}

// (e^{-x a} - e^{-W a}) / (x^2 - W^2), a >= 0, stable through x = W.
double pole_free_ratio(double x, double W, double a) {
    const double d = x - W;
    if (std::abs(d) < kPoleGuard * W) {
        return -a * std::exp(-W * a) / (2.0 * W);
    }
    if (std::abs(d) * a > 1.0) return (std::exp(-x * a) - std::exp(-W * a)) / (d * (x + W));
    return std::exp(-W * a) * std::expm1(-d * a) / (d * (x + W));
}

}  // namespace

void LorentzianBathSpec::validate() const {
    if (!(coupling > 0.0) || !std::isfinite(coupling)) {
        fail(ErrorCode::InvalidArgument, "bath coupling must be positive and finite");
    }
    if (!(width > 0.0) || !std::isfinite(width)) {
        fail(ErrorCode::InvalidArgument, "bath width must be positive and finite");
    }
    if (!std::isfinite(mu)) fail(ErrorCode::InvalidArgument, "chemical potential must be finite");
    if (!(beta > 0.0)) fail(ErrorCode::InvalidArgument, "inverse temperature must be positive");
}

double fermi_occupation(double omega, const LorentzianBathSpec& spec) {
    const double d = omega - spec.mu;
    if (spec.zero_temperature()) {
        if (d < 0.0) return 1.0;
        if (d > 0.0) return 0.0;
        return 0.5;
    }
    const double x = spec.beta * d;
    if (x > 0.0) {
        const double e = std::exp(-x);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(x));
}

double lorentzian_spectral_density(double omega, const LorentzianBathSpec& spec) {
    const double d = omega - spec.mu;
    return spec.coupling * spec.width * spec.width / (d * d + spec.width * spec.width);
}

QuadratureResult correlation_quadrature(int sigma, double t, const LorentzianBathSpec& spec,
                                        double abs_tol) {
    spec.validate();
    const double G = spec.coupling, W = spec.width, beta = spec.beta;
    auto J = [G, W](double u) { return G * W * W / (u * u + W * W); };
    const double a = std::abs(t);
    double even = 0.0, odd = 0.0, err = 0.0;
    if (a == 0.0) {
        auto f = [&](double u) { return J(u); };
        auto [r, e] = half_line(f, abs_tol);
        even = r;
        err = e;
    } else {
        auto fc = [&](double u) { return J(u); };
        auto fs = [&](double u) {
            const double th = spec.zero_temperature() ? 1.0 : std::tanh(0.5 * beta * u);
            return J(u) * th;
        };
        auto [rc, ec] = fourier_half_line(fc, a, GSL_INTEG_COSINE, 0.5 * abs_tol);
        auto [rs, es] = fourier_half_line(fs, a, GSL_INTEG_SINE, 0.5 * abs_tol);
        even = rc;
        odd = sgn(t) * rs;
        err = ec + es;
    }
    const cplx phase = std::exp(I1 * (double(sigma) * spec.mu * t));
    return {phase * cplx(even, -odd) / kPi, err / kPi};
}

double matsubara_frequency(int k, double beta) { return (2.0 * k - 1.0) * kPi / beta; }

bool pole_collision(int k, const LorentzianBathSpec& spec) {
    return std::abs(matsubara_frequency(k, spec.beta) - spec.width) < kPoleGuard * spec.width;
}

MatsubaraTerm matsubara_term(int k, const LorentzianBathSpec& spec) {
    spec.validate();
    require_finite_beta(spec, "matsubara_term");
    if (k < 1) fail(ErrorCode::InvalidArgument, "Matsubara index must be positive");
    if (pole_collision(k, spec)) {
        fail(ErrorCode::PoleCollision, "Matsubara frequency x_" + std::to_string(k) +
                                           " coincides with the bath width");
    }
    const double x = matsubara_frequency(k, spec.beta);
    const double W = spec.width;
    MatsubaraTerm m;
    m.index = k;
    m.frequency = x;
    m.amplitude = 2.0 * I1 * spec.coupling * W * W / (spec.beta * (x * x - W * W));
    return m;
}

cplx resonant_correlation(int sigma, double t, const LorentzianBathSpec& spec) {
    const double W = spec.width;
    return 0.5 * spec.coupling * W * std::exp(cplx(-W * std::abs(t), double(sigma) * spec.mu * t));
}

cplx matsubara_correlation_term(int sigma, double t, int k, const LorentzianBathSpec& spec) {
    require_finite_beta(spec, "matsubara_correlation_term");
    if (pole_collision(k, spec) || std::abs(matsubara_frequency(k, spec.beta) - spec.width) * std::abs(t) < 1e-3) {
        // analytic continuation through the removable pole
        return matsubara_correlation_sign_form(sigma, t, k, spec);
    }
    const MatsubaraTerm m = matsubara_term(k, spec);
    const double W = spec.width, x = m.frequency, a = std::abs(t);
    cplx sum = 0.0;
    for (int r : {1, -1}) {
        const double re = -(W + x) * a / 2.0 + r * (W - x) * t / 2.0;
        sum += double(r) * std::exp(cplx(re, double(sigma) * spec.mu * t));
    }
    return m.amplitude * sum;
}

cplx matsubara_correlation_sign_form(int sigma, double t, int k, const LorentzianBathSpec& spec) {
    require_finite_beta(spec, "matsubara_correlation_sign_form");
    const double W = spec.width, x = matsubara_frequency(k, spec.beta);
    const cplx pref = 2.0 * I1 * spec.coupling * W * W / spec.beta;
    return sgn(t) * pref * pole_free_ratio(x, W, std::abs(t)) *
           std::exp(I1 * (double(sigma) * spec.mu * t));
}

cplx correlation_decomposed(int sigma, double t, const LorentzianBathSpec& spec, int K) {
    spec.validate();
    if (K < 0) fail(ErrorCode::InvalidArgument, "truncation K must be non-negative");
    cplx c = resonant_correlation(sigma, t, spec);
    if (spec.zero_temperature()) {
        if (t != 0.0 && K > 0) c += matsubara_zero_T(sigma, t, spec);
        return c;
    }
    for (int k = 1; k <= K; ++k) {
        if (pole_collision(k, spec)) {
            fail(ErrorCode::PoleCollision, "Matsubara frequency x_" + std::to_string(k) +
                                               " coincides with the bath width");
        }
        c += matsubara_correlation_term(sigma, t, k, spec);
    }
    return c;
}

cplx matsubara_zero_T(int sigma, double t, const LorentzianBathSpec& spec) {
    spec.validate();
    if (t == 0.0) fail(ErrorCode::InvalidArgument, "matsubara_zero_T requires t != 0");
    const double W = spec.width, a = std::abs(t);
    auto f = [W, a](double x) { return pole_free_ratio(x, W, a); };
    auto [r, e] = half_line(f, 1e-13);
    (void)e;
    return sgn(t) * (I1 * spec.coupling * W * W / kPi) * r * std::exp(I1 * (double(sigma) * spec.mu * t));
}

cplx matsubara_envelope(double t, const LorentzianBathSpec& spec, int K) {
    spec.validate();
    if (t <= 0.0) {
        if (t == 0.0) return 0.0;
        fail(ErrorCode::InvalidArgument, "envelope is defined for t > 0");
    }
    if (spec.zero_temperature()) return matsubara_zero_T(1, t, spec) * std::exp(-I1 * (spec.mu * t));
    const double W = spec.width, beta = spec.beta;
    const cplx pref = 2.0 * I1 * spec.coupling * W * W / beta;
    if (K > 0) {
        double s = 0.0;
        for (int k = 1; k <= K; ++k) {
            if (pole_collision(k, spec)) {
                fail(ErrorCode::PoleCollision, "Matsubara frequency x_" + std::to_string(k) +
                                                   " coincides with the bath width");
            }
            s += pole_free_ratio(matsubara_frequency(k, beta), W, t);
        }
        return pref * s;
    }
    // sum_k 1/(x_k^2 - W^2) = beta tan(beta W / 2) / (4 W)
    const double c = std::cos(0.5 * beta * W);
    if (std::abs(c) < 1e-12) {
        fail(ErrorCode::PoleCollision, "a Matsubara frequency coincides with the bath width");
    }
    const double total = beta * std::tan(0.5 * beta * W) / (4.0 * W);
    const double h = 2.0 * kPi / beta;
    const long kmax = std::min<long>(200000, std::max<long>(64, long(std::ceil(45.0 / (t * h))) + 1));
    double s = 0.0;
    for (long k = kmax; k >= 1; --k) {
        const double x = (2.0 * k - 1.0) * kPi / beta;
        const double d = x * x - W * W;
        if (std::abs(x - W) < kPoleGuard * W) continue;
        s += std::exp(-x * t) / d;
    }
    // midpoint-rule tail of the remaining exponentials
    const double a = (2.0 * kmax) * kPi / beta;
    if (a * t < 700.0) {
        const double tail = std::exp(-a * t) / a + t * std::expint(-a * t);
        s += tail / h;
    }
    return pref * (s - std::exp(-W * t) * total);
}

cplx correlation_resummed(int sigma, double t, const LorentzianBathSpec& spec) {
    cplx c = resonant_correlation(sigma, t, spec);
    if (t == 0.0) return c;
    return c + sgn(t) * matsubara_envelope(std::abs(t), spec, 0) * std::exp(I1 * (double(sigma) * spec.mu * t));
}

cplx sign_identity_lhs(cplx w, double t) {
    return std::exp(w * (t + std::abs(t))) - std::exp(w * (std::abs(t) - t));
}

cplx sign_identity_rhs(cplx w, double t) { return sgn(t) * (std::exp(2.0 * w * std::abs(t)) - 1.0); }

CorrelationTable tabulate(int sigma, const std::vector<double>& times,
                          const std::function<cplx(int, double)>& f) {
    for (std::size_t i = 1; i < times.size(); ++i) {
        if (!(times[i] > times[i - 1])) fail(ErrorCode::DegenerateGrid, "time grid must be strictly increasing");
    }
    CorrelationTable table;
    table.sigma = sigma;
    table.times = times;
    table.values.reserve(times.size());
    for (double t : times) {
        const cplx v = f(sigma, t);
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
            fail(ErrorCode::InvalidArgument, "non-finite correlation value");
        }
        table.values.push_back(v);
    }
    return table;
}

std::string to_csv(const CorrelationTable& table, const std::string& comment) {
    std::string out;
    if (!comment.empty()) out += "# " + comment + "\n";
    out += "t,re,im\n";
    char buf[128];
    for (std::size_t i = 0; i < table.times.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", table.times[i], table.values[i].real(),
                      table.values[i].imag());
        out += buf;
    }
    return out;
}

}  // namespace pfermion
