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

#include <cstdint>
#include <string>
#include <vector>

#include "bath_correlations.hpp"

namespace pfermion {

// One term M (e^{-x t} - e^{-W t}) of the fitted Matsubara envelope.
struct FitTerm {
    cplx amplitude;
    double width = 0.0;  // W_fit
    double rate = 0.0;   // x_fit

    void validate() const;
};

struct FitOptions {
    int terms = 1;
    std::vector<double> grid;  // empty -> default geometric grid
    int restarts = 8;
    std::uint64_t seed = 0;
    int reference_terms = 0;   // <= 0: converged (resummed) envelope
    int max_iterations = 400;
    double tolerance = 1e-14;
    std::vector<FitTerm> initial;  // overrides the leading-term start when non-empty
};

struct FitReport {
    std::vector<FitTerm> terms;
    double residual_l2 = 0.0;
    double residual_sup = 0.0;
    double envelope_sup = 0.0;
    bool converged = false;
    int iterations = 0;
    int best_restart = 0;
    std::vector<double> grid;
};

std::vector<double> geometric_grid(double t_min, double t_max, int points);
std::vector<double> default_fit_grid(const LorentzianBathSpec& spec);

cplx fitted_envelope(const std::vector<FitTerm>& terms, double t);
// sigma-resolved Matsubara part of the correlation built from fitted terms
cplx fitted_matsubara_correlation(const std::vector<FitTerm>& terms, int sigma, double t,
                                  double mu);

FitReport fit_matsubara_envelope(const LorentzianBathSpec& spec, const FitOptions& options);

std::string to_json(const FitReport& report, const LorentzianBathSpec& spec);

}  // namespace pfermion
