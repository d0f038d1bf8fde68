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

#include <array>
#include <string>
#include <vector>

#include "bath_correlations.hpp"
#include "fit.hpp"

namespace pfermion {

inline constexpr double kDefaultDelta = 1e6;
inline constexpr double kDefaultDeltaMin = 1e2;

// Ancillary damped mode; lambda, Omega, Gamma enter without conjugation.
struct PseudoFermionMode {
    cplx occupation;   // n
    cplx coupling;     // lambda (principal root of coupling_sq)
    cplx coupling_sq;  // lambda^2
    cplx frequency;    // Omega
    cplx damping;      // Gamma_damp
    std::string lead;
    std::string spin;

    void validate() const;
};

enum class MapKind { Resonant, ExactTwo, ExactFour, FittedTwo, FittedFour };

const char* map_kind_name(MapKind kind);
MapKind parse_map_kind(const std::string& name);

struct BathConstruction {
    MapKind kind = MapKind::FittedTwo;
    int terms = 0;  // K for exact maps, K_fit for fitted maps
    cplx delta = kDefaultDelta;
    double delta_min = kDefaultDeltaMin;
};

struct PseudoFermionBath {
    std::vector<PseudoFermionMode> modes;
    LorentzianBathSpec spec;
    BathConstruction construction;
    std::vector<FitTerm> fit_terms;
    std::string lead;
    std::string spin;
};

PseudoFermionMode resonant_mode(const LorentzianBathSpec& spec);
std::array<PseudoFermionMode, 2> matsubara_modes_two(const LorentzianBathSpec& spec, int k, cplx delta,
                                                     double delta_min = kDefaultDeltaMin);
std::array<PseudoFermionMode, 4> matsubara_modes_four(const LorentzianBathSpec& spec, int k);

// Pair reproducing M (e^{-x|t|} - e^{-W|t|}) sg(t) e^{i s mu t}.
std::array<PseudoFermionMode, 2> exponential_pair_two(cplx amplitude, double width, double rate, double mu,
                                                      cplx delta, double delta_min);
std::array<PseudoFermionMode, 4> exponential_pair_four(cplx amplitude, double width, double rate, double mu);

std::vector<PseudoFermionMode> modes_from_fit(const LorentzianBathSpec& spec, const std::vector<FitTerm>& terms,
                                              cplx delta, double delta_min = kDefaultDeltaMin);
std::vector<PseudoFermionMode> modes_from_fit_four(const LorentzianBathSpec& spec,
                                                   const std::vector<FitTerm>& terms);

cplx pf_mode_correlation(const PseudoFermionMode& mode, int sigma, double t);
cplx pf_bath_correlation(const PseudoFermionBath& bath, int sigma, double t);

// Resonant mode plus the construction's Matsubara modes; fit terms are used by fitted maps.
PseudoFermionBath build_bath(const LorentzianBathSpec& spec, const BathConstruction& construction,
                             const std::vector<FitTerm>& fit_terms = {}, const std::string& lead = "",
                             const std::string& spin = "");

PseudoFermionBath concatenate(const PseudoFermionBath& a, const PseudoFermionBath& b);

struct ValidationReport {
    std::vector<int> sigmas;
    std::vector<double> max_deviation;
    std::vector<double> l2_deviation;
    double tolerance = 0.0;
    bool passed = false;
};

ValidationReport validate_bath(const PseudoFermionBath& bath, const LorentzianBathSpec& spec,
                               const std::vector<double>& grid, const std::vector<int>& sigmas, double tolerance);

std::string serialize_bath(const PseudoFermionBath& bath);
PseudoFermionBath parse_bath(const std::string& text);

}  // namespace pfermion
