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

#include <string>
#include <vector>

#include "lindblad_engine.hpp"

namespace pfermion {

// Positive value: particles flowing into the lead.
struct CurrentSample {
    std::string lead;
    double value = 0.0;
    double imaginary = 0.0;  // residual imaginary part, reported as-is
};

CurrentSample lead_current(const AugmentedModel& model, const AugmentedState& state, const std::string& lead);
// Even-sector functional f with I = -i f.x
Eigen::VectorXcd lead_current_functional(const AugmentedModel& model, const std::string& lead);

cplx occupation(const AugmentedModel& model, const AugmentedState& state, const std::string& label);

struct SpectrumOptions {
    double t_max = 40.0;
    double dt = 0.02;
    double eta = 1e-3;
    double decay_threshold = 1e-2;  // |C(t_max)| / |C(0)| above this is an error
    bool check_reality = true;      // propagate the hole branch independently
    PropagationOptions propagation;
};

struct SpectrumTable {
    std::string spin;
    std::vector<double> omega;
    std::vector<double> value;
    std::vector<double> imaginary;  // Im of the unsymmetrized transform
    std::vector<double> times;
    std::vector<cplx> particle;     // <{s(t), s^dag}>
    std::vector<cplx> hole;         // <{s^dag(t), s}> = C(-t)
    double eta = 0.0;
    double sum_rule = 0.0;          // trapezoid of A over the omega grid
    double tail_ratio = 0.0;
    double reality = 0.0;           // max |imaginary| / max A
};

SpectrumTable spectral_function(const AugmentedModel& model, const AugmentedState& rho, const OperatorSum& s,
                                const std::vector<double>& omega, const SpectrumOptions& options = {},
                                const std::string& spin = "");

// Positions of strict local maxima of a sampled curve.
std::vector<std::size_t> local_maxima(const std::vector<double>& y, double min_prominence = 0.0);

}  // namespace pfermion
