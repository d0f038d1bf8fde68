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

namespace pfermion::oracles {

// Non-interacting level between Lorentzian leads.
struct TransmissionModel {
    double epsilon = 0.0;
    std::vector<LorentzianBathSpec> leads;
};

// Retarded lead self-energy from the Hilbert transform of J/pi.
cplx lead_self_energy(double omega, const LorentzianBathSpec& lead);
cplx retarded_green(double omega, const TransmissionModel& model);
double level_spectral_function(double omega, const TransmissionModel& model);

// Steady particle current into lead `into` (Landauer, two leads).
double exact_level_current(const TransmissionModel& model, std::size_t into = 1, double tolerance = 1e-10);

struct DiscretizedBath {
    LorentzianBathSpec spec;
    std::vector<double> energies;
    std::vector<double> couplings;

    double bandwidth() const { return spec.width; }
    // Latest time before level-spacing recurrences become visible.
    double trust_time() const { return 0.5 * double(energies.size()) / bandwidth(); }
};

DiscretizedBath discretize(const LorentzianBathSpec& spec, int count);

struct DiscretizedDynamics {
    std::vector<double> times;
    std::vector<double> occupation;
    std::vector<std::vector<double>> currents;  // per lead, positive into the lead
};

// Exact one-body evolution of a level coupled to discretized leads initially in equilibrium.
DiscretizedDynamics discretized_bath_dynamics(double epsilon, const std::vector<DiscretizedBath>& baths,
                                              double initial_occupation, const std::vector<double>& times);

// n(t) = n0 + (n(0) - n0) exp(-2 Gamma0 t)
double markovian_occupation(double gamma0, double n0, double initial, double t);

// Literal column-stacked operators and generator (dense reference, N <= 6).
SparseMatrix dense_hamiltonian(const SystemSpec& system, const std::vector<PseudoFermionBath>& baths);
SparseMatrix dense_liouvillian(const SystemSpec& system, const std::vector<PseudoFermionBath>& baths);
FockSpaceLayout dense_layout(const SystemSpec& system, const std::vector<PseudoFermionBath>& baths);

// Column-stacked initial state rho_S x prod_j [(1-n_j)|0><0| + n_j|1><1|].
DenseMatrix dense_initial_state(const SystemSpec& system, const std::vector<PseudoFermionBath>& baths,
                                const DenseMatrix& rho_system);

// Expectation values Tr[O rho(t)] by dense matrix exponentials.
std::vector<std::vector<cplx>> dense_evolve(const SparseMatrix& liouvillian, const DenseMatrix& rho0,
                                            const std::vector<SparseMatrix>& observables,
                                            const std::vector<double>& times);

struct IrrelevanceReport {
    int term = 0;
    double rate = 0.0;        // x_k
    double max_deviation = 0.0;
    double tolerance = 0.0;
    bool passed = false;
};

// Dense paired runs of a single level with and without the Matsubara pair of term k.
IrrelevanceReport fast_matsubara_irrelevance_check(const LorentzianBathSpec& spec, int term, double epsilon,
                                                   double tolerance, const std::vector<double>& times,
                                                   double delta = 1e3);

}  // namespace pfermion::oracles
