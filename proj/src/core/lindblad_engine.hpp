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

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "operator_space.hpp"
#include "pf_model.hpp"

namespace pfermion {

enum class SystemKind { SingleLevel, Anderson, Explicit };

// System Hamiltonian plus the operators s_nu the leads couple to.
struct SystemSpec {
    SystemKind kind = SystemKind::SingleLevel;
    double epsilon = 0.0;
    double interaction = 0.0;  // U
    int explicit_modes = 0;
    DenseMatrix hamiltonian;   // explicit only, 2^k x 2^k
    // explicit only: key "lead/spin", "lead", "spin" or "" (checked in that order)
    std::map<std::string, DenseMatrix> couplings;

    static SystemSpec single_level(double epsilon);
    static SystemSpec anderson(double epsilon, double interaction);
    static SystemSpec explicit_system(DenseMatrix hamiltonian, std::map<std::string, DenseMatrix> couplings);

    int modes() const;
    std::vector<std::string> labels() const;
    void validate() const;
};

struct EngineOptions {
    int mode_cap = 20;
    bool merge_identical_leads = false;
};

// Assembled augmented model: system modes first, then every pseudo mode in bath order.
class AugmentedModel {
public:
    AugmentedModel(SystemSpec system, std::vector<PseudoFermionBath> baths, EngineOptions options = {});

    const SystemSpec& system() const { return system_; }
    const std::vector<PseudoFermionBath>& baths() const { return baths_; }
    const FockSpaceLayout& layout() const { return layout_; }
    const OperatorSpace& space() const { return space_; }
    int modes() const { return layout_.size(); }
    int system_modes() const { return system_.modes(); }

    // Coupling operator s_nu of bath b on the full mode set.
    const OperatorSum& coupling_operator(std::size_t bath) const { return bath_couplings_[bath]; }
    int first_mode(std::size_t bath) const { return bath_offset_[bath]; }
    const PseudoFermionMode& mode(int index) const;

    OperatorSum hamiltonian() const;
    const std::vector<SuperTerm>& generator_terms() const { return terms_; }
    const SparseMatrix& generator(int sector) const { return sector == kEven ? even_ : odd_; }
    double trace_row_norm() const { return trace_row_norm_; }
    std::vector<std::string> merged_leads() const { return merged_; }

    OperatorSum annihilation(int mode) const { return OperatorSum::annihilation(mode, modes()); }
    OperatorSum creation(int mode) const { return OperatorSum::creation(mode, modes()); }
    OperatorSum number(int mode) const { return OperatorSum::number(mode, modes()); }
    OperatorSum system_operator(const DenseMatrix& m) const { return OperatorSum::from_leading_matrix(m, modes()); }
    OperatorSum coupling_for(const std::string& lead, const std::string& spin) const;

private:
    SystemSpec system_;
    std::vector<PseudoFermionBath> baths_;
    std::vector<std::string> merged_;
    FockSpaceLayout layout_;
    OperatorSpace space_;
    std::vector<OperatorSum> bath_couplings_;
    std::vector<int> bath_offset_;
    std::vector<SuperTerm> terms_;
    SparseMatrix even_, odd_;
    double trace_row_norm_ = 0.0;
};

// Operator-valued state, stored as even and odd sector coefficient vectors.
struct AugmentedState {
    Eigen::VectorXcd even;
    Eigen::VectorXcd odd;
    double time = 0.0;
};

cplx trace(const AugmentedModel& model, const AugmentedState& state);
cplx expectation(const AugmentedModel& model, const AugmentedState& state, const OperatorSum& op);

AugmentedState initial_state(const AugmentedModel& model, const DenseMatrix& rho_system);
DenseMatrix reduced_system_density(const AugmentedModel& model, const AugmentedState& state);

enum class Integrator { DormandPrince, Krylov };

struct PropagationOptions {
    Integrator integrator = Integrator::DormandPrince;
    double rtol = 1e-8;
    double atol = 1e-10;
    double min_step = 1e-12;
    long max_steps = 50000000;
    int krylov_dimension = 30;
};

struct PropagationReport {
    long steps = 0;
    long rejected = 0;
    double max_trace_deviation = 0.0;
};

using SectorObserver = std::function<void(std::size_t index, double t, const Eigen::VectorXcd& x)>;

// Propagate one sector vector through increasing output times (times[0] is the start).
PropagationReport propagate(const SparseMatrix& generator, Eigen::VectorXcd x, const std::vector<double>& times,
                            const SectorObserver& observer, const PropagationOptions& options = {});

std::vector<AugmentedState> evolve(const AugmentedModel& model, const AugmentedState& rho0,
                                   const std::vector<double>& times, const PropagationOptions& options = {},
                                   PropagationReport* report = nullptr);

// Expectation values along a trajectory without storing states.
std::vector<std::vector<cplx>> evolve_observables(const AugmentedModel& model, const AugmentedState& rho0,
                                                  const std::vector<double>& times,
                                                  const std::vector<OperatorSum>& observables,
                                                  const PropagationOptions& options = {},
                                                  PropagationReport* report = nullptr);

enum class SteadyMethod { Auto, Direct, Iterative, Propagation };

struct SteadyOptions {
    SteadyMethod method = SteadyMethod::Auto;
    double residual_tolerance = 1e-9;  // relative to the generator norm
    double gap_tolerance = 1e-8;
    double propagation_time = 200.0;
    int max_iterations = 5000;
    Eigen::Index direct_limit = 2048;  // Auto: sparse LU up to this sector dimension
};

struct SteadyReport {
    std::string method;
    double residual = 0.0;  // ||L rho|| / ||L||
    double generator_norm = 0.0;
    double gap_estimate = 0.0;
    double trace_row_norm = 0.0;
    int iterations = 0;
};

AugmentedState steady_state(const AugmentedModel& model, const SteadyOptions& options = {},
                            SteadyReport* report = nullptr);

// Tr[A e^{Lt}(B rho)] for odd A, B.
std::vector<cplx> two_time_correlation(const AugmentedModel& model, const AugmentedState& rho, const OperatorSum& a,
                                       const OperatorSum& b, const std::vector<double>& times,
                                       const PropagationOptions& options = {});

}  // namespace pfermion
