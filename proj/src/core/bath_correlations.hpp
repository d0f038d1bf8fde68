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

#pragma once

#include <complex>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace pfermion {

using cplx = std::complex<double>;

inline constexpr double kInfiniteBeta = std::numeric_limits<double>::infinity();

// Reservoir with Lorentzian spectral density J(w) = G W^2 / ((w - mu)^2 + W^2).
struct LorentzianBathSpec {
    double coupling = 1.0;  // G
    double width = 1.0;     // W
    double mu = 0.0;
    double beta = 1.0;      // +inf is the zero-temperature state

    bool zero_temperature() const { return beta == kInfiniteBeta; }
    void validate() const;
};

struct MatsubaraTerm {
    int index = 0;
    double frequency = 0.0;  // x_k
    cplx amplitude;          // M_k
};

struct CorrelationTable {
    std::vector<double> times;
    int sigma = 1;
    std::vector<cplx> values;
};

struct QuadratureResult {
    cplx value;
    double abs_error = 0.0;
};

// Relative guard |x_k - W| < kPoleGuard * W.
inline constexpr double kPoleGuard = 1e-8;

double fermi_occupation(double omega, const LorentzianBathSpec& spec);
double lorentzian_spectral_density(double omega, const LorentzianBathSpec& spec);

QuadratureResult correlation_quadrature(int sigma, double t, const LorentzianBathSpec& spec,
                                        double abs_tol = 1e-10);

double matsubara_frequency(int k, double beta);
MatsubaraTerm matsubara_term(int k, const LorentzianBathSpec& spec);
bool pole_collision(int k, const LorentzianBathSpec& spec);

cplx resonant_correlation(int sigma, double t, const LorentzianBathSpec& spec);
cplx matsubara_correlation_term(int sigma, double t, int k, const LorentzianBathSpec& spec);
// sg(t)(2iGW^2/b)(e^{-x|t|}-e^{-W|t|})e^{i s mu t}/(x^2-W^2)
cplx matsubara_correlation_sign_form(int sigma, double t, int k, const LorentzianBathSpec& spec);
cplx correlation_decomposed(int sigma, double t, const LorentzianBathSpec& spec, int K);
cplx matsubara_zero_T(int sigma, double t, const LorentzianBathSpec& spec);

// Sum of all Matsubara terms times e^{-i s mu t} for t > 0 (sigma independent).
// K > 0 truncates, K <= 0 evaluates the full series in resummed form.
cplx matsubara_envelope(double t, const LorentzianBathSpec& spec, int K = 0);
// Resonant term plus the full Matsubara series.
cplx correlation_resummed(int sigma, double t, const LorentzianBathSpec& spec);

// Both sides of e^{w(t+|t|)} - e^{w(|t|-t)} = sg(t)(e^{2w|t|} - 1).
cplx sign_identity_lhs(cplx w, double t);
cplx sign_identity_rhs(cplx w, double t);

CorrelationTable tabulate(int sigma, const std::vector<double>& times,
                          const std::function<cplx(int, double)>& f);
std::string to_csv(const CorrelationTable& table, const std::string& comment = "");

}  // namespace pfermion
