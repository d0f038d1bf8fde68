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

#include "lindblad_engine.hpp"

#include <unsupported/Eigen/MatrixFunctions>
#include <Eigen/SparseLU>
#include <Eigen/IterativeLinearSolvers>
#include <algorithm>
#include <cmath>

#include "error.hpp"

namespace pfermion {

namespace {

DenseMatrix number_matrix(int mode, int modes) {
    const Eigen::Index dim = Eigen::Index(1) << modes;
    DenseMatrix m = DenseMatrix::Zero(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
        if ((i >> mode) & 1) m(i, i) = 1.0;
    }
    return m;
}

bool same_parameters(const PseudoFermionBath& a, const PseudoFermionBath& b) {
    if (a.spin != b.spin || a.modes.size() != b.modes.size()) return false;
    for (std::size_t i = 0; i < a.modes.size(); ++i) {
        const auto& x = a.modes[i];
        const auto& y = b.modes[i];
        if (x.occupation != y.occupation || x.coupling_sq != y.coupling_sq || x.frequency != y.frequency ||
            x.damping != y.damping) {
            return false;
        }
    }
    return true;
}

std::vector<PseudoFermionBath> merge_identical(std::vector<PseudoFermionBath> baths, std::vector<std::string>& merged) {
    std::vector<PseudoFermionBath> out;
    std::vector<int> count;
    for (auto& b : baths) {
        bool done = false;
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (same_parameters(out[i], b)) {
                out[i].lead += "+" + b.lead;
                ++count[i];
                done = true;
                break;
            }
        }
        if (!done) {
            out.push_back(std::move(b));
            count.push_back(1);
        }
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (count[i] == 1) continue;
        merged.push_back(out[i].lead + (out[i].spin.empty() ? "" : "/" + out[i].spin));
        const double c = double(count[i]);
        for (auto& m : out[i].modes) {
            m.coupling *= std::sqrt(c);
            m.coupling_sq *= c;
            m.lead = out[i].lead;
        }
    }
    return out;
}

double one_norm(const SparseMatrix& m) {
    double best = 0.0;
    for (Eigen::Index k = 0; k < m.outerSize(); ++k) {
        double s = 0.0;
        for (SparseMatrix::InnerIterator it(m, k); it; ++it) s += std::abs(it.value());
        best = std::max(best, s);
    }
    return best;
}

cplx dot(const Eigen::VectorXcd& f, const Eigen::VectorXcd& x) { return (f.transpose() * x)(0); }

}  // namespace

SystemSpec SystemSpec::single_level(double epsilon) {
    SystemSpec s;
    s.kind = SystemKind::SingleLevel;
    s.epsilon = epsilon;
    return s;
}

SystemSpec SystemSpec::anderson(double epsilon, double interaction) {
    SystemSpec s;
    s.kind = SystemKind::Anderson;
    s.epsilon = epsilon;
    s.interaction = interaction;
    return s;
}

SystemSpec SystemSpec::explicit_system(DenseMatrix hamiltonian, std::map<std::string, DenseMatrix> couplings) {
    SystemSpec s;
    s.kind = SystemKind::Explicit;
    s.hamiltonian = std::move(hamiltonian);
    s.couplings = std::move(couplings);
    int k = 0;
    while ((Eigen::Index(1) << k) < s.hamiltonian.rows()) ++k;
    s.explicit_modes = k;
    s.validate();
    return s;
}

int SystemSpec::modes() const {
    switch (kind) {
        case SystemKind::SingleLevel: return 1;
        case SystemKind::Anderson: return 2;
        case SystemKind::Explicit: return explicit_modes;
    }
    return 0;
}

std::vector<std::string> SystemSpec::labels() const {
    switch (kind) {
        case SystemKind::SingleLevel: return {"s"};
        case SystemKind::Anderson: return {"up", "down"};
        case SystemKind::Explicit: break;
    }
    std::vector<std::string> l;
    for (int i = 0; i < explicit_modes; ++i) l.push_back("s" + std::to_string(i));
    return l;
}

void SystemSpec::validate() const {
    if (!std::isfinite(epsilon) || !std::isfinite(interaction)) fail(ErrorCode::InvalidArgument, "system energies must be finite");
    if (kind != SystemKind::Explicit) return;
    const Eigen::Index dim = Eigen::Index(1) << explicit_modes;
    if (explicit_modes < 1 || hamiltonian.rows() != dim || hamiltonian.cols() != dim) {
        fail(ErrorCode::DimensionMismatch, "explicit system Hamiltonian must be 2^k x 2^k with k >= 1");
    }
    if (couplings.empty()) fail(ErrorCode::InvalidArgument, "explicit system needs at least one coupling operator");
    for (const auto& [key, m] : couplings) {
        if (m.rows() != dim || m.cols() != dim) {
            fail(ErrorCode::DimensionMismatch, "coupling operator '" + key + "' has the wrong dimension");
        }
        SparseMatrix sm = m.sparseView();
        if (classify_parity(sm) != Parity::Odd) {
            fail(ErrorCode::ParityViolation, "coupling operator '" + key + "' must be fermion-odd");
        }
    }
}

AugmentedModel::AugmentedModel(SystemSpec system, std::vector<PseudoFermionBath> baths, EngineOptions options)
    : system_(std::move(system)) {
    system_.validate();
    baths_ = options.merge_identical_leads ? merge_identical(std::move(baths), merged_) : std::move(baths);
    std::vector<std::string> labels = system_.labels();
    std::vector<LocalScaling> scaling(labels.size());
    for (const auto& b : baths_) {
        bath_offset_.push_back(int(labels.size()));
        for (std::size_t i = 0; i < b.modes.size(); ++i) {
            b.modes[i].validate();
            std::string tag = b.lead.empty() ? "bath" : b.lead;
            if (!b.spin.empty()) tag += "/" + b.spin;
            labels.push_back(tag + "#" + std::to_string(i));
            scaling.push_back(scaling_for_occupation(b.modes[i].occupation));
        }
    }
    layout_ = FockSpaceLayout(labels, system_.modes(), options.mode_cap);
    space_ = OperatorSpace(scaling);
    for (const auto& b : baths_) bath_couplings_.push_back(coupling_for(b.lead, b.spin));

    const OperatorSum h = hamiltonian();
    for (const auto& t : h.terms()) {
        OperatorSum single(modes());
        single.add(t);
        for (auto& s : space_.left_terms(single, cplx(0.0, -1.0))) terms_.push_back(std::move(s));
        for (auto& s : space_.right_terms(single, cplx(0.0, 1.0))) terms_.push_back(std::move(s));
    }
    for (int j = system_modes(); j < modes(); ++j) {
        const auto& m = mode(j);
        terms_.push_back({m.damping, {{j, OperatorSpace::dissipator_local(m.occupation)}}});
        SuperTerm jump{m.damping, {{j, OperatorSpace::dissipator_string_part(m.occupation)}}};
        for (int k = j + 1; k < modes(); ++k) jump.factors.emplace_back(k, OperatorSpace::parity_sign());
        terms_.push_back(std::move(jump));
    }
    even_ = space_.assemble(terms_, kEven);
    odd_ = space_.assemble(terms_, kOdd);
    double row = 0.0;
    for (Eigen::Index k = 0; k < even_.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator it(even_, k); it; ++it) {
            if (it.row() == 0) {
                row += std::norm(it.value());
                it.valueRef() = 0.0;
            }
        }
    }
    even_.prune(cplx(0.0));
    trace_row_norm_ = std::sqrt(row);
}

const PseudoFermionMode& AugmentedModel::mode(int index) const {
    int j = index - system_modes();
    if (j < 0) fail(ErrorCode::IndexOutOfRange, "mode " + std::to_string(index) + " is a system mode");
    for (const auto& b : baths_) {
        if (j < int(b.modes.size())) return b.modes[j];
        j -= int(b.modes.size());
    }
    fail(ErrorCode::IndexOutOfRange, "mode index " + std::to_string(index) + " out of range");
}

OperatorSum AugmentedModel::coupling_for(const std::string& lead, const std::string& spin) const {
    const int N = layout_.size() > 0 ? modes() : system_.modes();
    switch (system_.kind) {
        case SystemKind::SingleLevel:
            return OperatorSum::annihilation(0, N);
        case SystemKind::Anderson:
            if (spin == "up") return OperatorSum::annihilation(0, N);
            if (spin == "down") return OperatorSum::annihilation(1, N);
            fail(ErrorCode::LayoutMismatch, "Anderson baths need spin 'up' or 'down', got '" + spin + "'");
        case SystemKind::Explicit:
            break;
    }
    for (const std::string& key : {lead + "/" + spin, lead, spin, std::string()}) {
        const auto it = system_.couplings.find(key);
        if (it != system_.couplings.end()) return OperatorSum::from_leading_matrix(it->second, N);
    }
    fail(ErrorCode::LayoutMismatch, "no coupling operator for lead '" + lead + "' spin '" + spin + "'");
}

OperatorSum AugmentedModel::hamiltonian() const {
    const int N = modes();
    OperatorSum h(N);
    switch (system_.kind) {
        case SystemKind::SingleLevel:
            if (system_.epsilon != 0.0) h += OperatorSum::number(0, N) * system_.epsilon;
            break;
        case SystemKind::Anderson: {
            if (system_.epsilon != 0.0) {
                h += OperatorSum::number(0, N) * system_.epsilon;
                h += OperatorSum::number(1, N) * system_.epsilon;
            }
            if (system_.interaction != 0.0) {
                h += OperatorSum::from_leading_matrix(number_matrix(0, 2) * number_matrix(1, 2), N) * system_.interaction;
            }
            break;
        }
        case SystemKind::Explicit:
            h += OperatorSum::from_leading_matrix(system_.hamiltonian, N);
            break;
    }
    for (std::size_t b = 0; b < baths_.size(); ++b) {
        const OperatorSum& s = bath_couplings_[b];
        const OperatorSum sd = s.adjoint();
        for (std::size_t i = 0; i < baths_[b].modes.size(); ++i) {
            const int j = bath_offset_[b] + int(i);
            const auto& m = baths_[b].modes[i];
            if (m.frequency != 0.0) h += OperatorSum::number(j, N) * m.frequency;
            h += (s * OperatorSum::creation(j, N)) * m.coupling;
            h += (OperatorSum::annihilation(j, N) * sd) * m.coupling;
        }
    }
    return h.simplified();
}

cplx trace(const AugmentedModel& model, const AugmentedState& state) {
    return model.space().trace_weight() * state.even[0];
}

cplx expectation(const AugmentedModel& model, const AugmentedState& state, const OperatorSum& op) {
    cplx v = dot(model.space().trace_functional(op, kEven), state.even);
    if (state.odd.size() > 0) v += dot(model.space().trace_functional(op, kOdd), state.odd);
    return v;
}

AugmentedState initial_state(const AugmentedModel& model, const DenseMatrix& rho_system) {
    const int k = model.system_modes();
    const Eigen::Index dim = Eigen::Index(1) << k;
    if (rho_system.rows() != dim || rho_system.cols() != dim) {
        fail(ErrorCode::DimensionMismatch, "system density matrix must be " + std::to_string(dim) + "x" + std::to_string(dim));
    }
    if (std::abs(rho_system.trace() - 1.0) > 1e-12) fail(ErrorCode::InvalidArgument, "system density matrix must have unit trace");
    const OperatorSpace sys{std::vector<LocalScaling>(std::size_t(k))};
    const auto [se, so] = sys.from_dense(rho_system);

    // pf factor: (1-n)|0><0| + n|1><1| = 1/2 I + (1/2 - n) Z
    std::vector<std::pair<std::uint64_t, cplx>> env{{0, 1.0}};
    for (int j = k; j < model.modes(); ++j) {
        const cplx n = model.mode(j).occupation;
        const cplx z = 0.5 - n;
        std::vector<std::pair<std::uint64_t, cplx>> next;
        for (const auto& [g, c] : env) {
            next.emplace_back(g, 0.5 * c);
            if (z != 0.0) next.emplace_back(g | (std::uint64_t(1) << (2 * j)), c * z);
        }
        env.swap(next);
    }
    AugmentedState st;
    const auto d = Eigen::Index(model.space().sector_dimension());
    st.even = Eigen::VectorXcd::Zero(d);
    st.odd = Eigen::VectorXcd::Zero(d);
    for (int sector : {kEven, kOdd}) {
        const Eigen::VectorXcd& v = sector == kEven ? se : so;
        Eigen::VectorXcd& out = sector == kEven ? st.even : st.odd;
        for (Eigen::Index p = 0; p < v.size(); ++p) {
            if (v[p] == 0.0) continue;
            const std::uint64_t gs = sys.decode(std::size_t(p), sector);
            const cplx c0 = v[p] * sys.weight(gs);
            for (const auto& [g, c] : env) {
                const std::uint64_t full = gs | g;
                out[Eigen::Index(model.space().encode(full))] += c0 * c / model.space().weight(full);
            }
        }
    }
    if (st.odd.isZero(0.0)) st.odd.resize(0);
    return st;
}

DenseMatrix reduced_system_density(const AugmentedModel& model, const AugmentedState& state) {
    return model.space().reduced(state.even, state.odd, model.system_modes());
}

namespace {

PropagationReport dormand_prince(const SparseMatrix& L, Eigen::VectorXcd x, const std::vector<double>& times,
                                 const SectorObserver& observer, const PropagationOptions& o) {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;
    (void)c2, (void)c3, (void)c4, (void)c5;
    PropagationReport rep;
    observer(0, times[0], x);
    Eigen::VectorXcd k1 = L * x, k2, k3, k4, k5, k6, k7, y, err;
    double t = times[0];
    double h = 0.0;
    {
        const double d0 = x.cwiseAbs().maxCoeff(), d1 = k1.cwiseAbs().maxCoeff();
        h = (d0 > 1e-5 && d1 > 1e-5) ? 0.01 * d0 / d1 : 1e-6;
    }
    for (std::size_t i = 1; i < times.size(); ++i) {
        const double target = times[i];
        while (t < target) {
            if (rep.steps + rep.rejected > o.max_steps) {
                fail(ErrorCode::StepSizeUnderflow, "step budget exhausted at t=" + std::to_string(t), h);
            }
            bool last = false;
            double step = h;
            if (t + step >= target * (1.0 - 1e-14) || t + step >= target) {
                step = target - t;
                last = true;
            }
            k2 = L * (x + step * (a21 * k1));
            k3 = L * (x + step * (a31 * k1 + a32 * k2));
            k4 = L * (x + step * (a41 * k1 + a42 * k2 + a43 * k3));
            k5 = L * (x + step * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
            k6 = L * (x + step * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
            y = x + step * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
            k7 = L * y;
            err = step * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
            double en = 0.0;
            for (Eigen::Index j = 0; j < x.size(); ++j) {
                const double sc = o.atol + o.rtol * std::max(std::abs(x[j]), std::abs(y[j]));
                en = std::max(en, std::abs(err[j]) / sc);
            }
            if (!std::isfinite(en)) en = 1e10;
            if (en <= 1.0) {
                t = last ? target : t + step;
                x.swap(y);
                k1.swap(k7);
                ++rep.steps;
                const double grow = en > 0.0 ? std::min(5.0, 0.9 * std::pow(en, -0.2)) : 5.0;
                if (!last || step >= h) h = step * grow;
            } else {
                ++rep.rejected;
                h = step * std::max(0.2, 0.9 * std::pow(en, -0.2));
                if (h < o.min_step * std::max(1.0, std::abs(t))) {
                    fail(ErrorCode::StepSizeUnderflow, "step size underflow at t=" + std::to_string(t), h);
                }
            }
        }
        observer(i, target, x);
    }
    return rep;
}

PropagationReport krylov(const SparseMatrix& L, Eigen::VectorXcd x, const std::vector<double>& times,
                         const SectorObserver& observer, const PropagationOptions& o) {
    PropagationReport rep;
    observer(0, times[0], x);
    const Eigen::Index n = x.size();
    const int mmax = int(std::min<Eigen::Index>(o.krylov_dimension, n));
    double tau_guess = 0.0;
    for (std::size_t i = 1; i < times.size(); ++i) {
        double t = times[i - 1];
        const double target = times[i];
        while (t < target) {
            const double beta = x.norm();
            if (beta == 0.0) break;
            DenseMatrix V(n, mmax + 1);
            DenseMatrix H = DenseMatrix::Zero(mmax + 1, mmax + 1);
            V.col(0) = x / beta;
            int m = mmax;
            double hnext = 0.0;
            for (int j = 0; j < mmax; ++j) {
                Eigen::VectorXcd w = L * V.col(j);
                for (int r = 0; r <= j; ++r) {
                    H(r, j) = V.col(r).dot(w);
                    w -= H(r, j) * V.col(r);
                }
                hnext = w.norm();
                if (hnext < 1e-13 * beta) {
                    m = j + 1;
                    hnext = 0.0;
                    break;
                }
                if (j + 1 < mmax) {
                    H(j + 1, j) = hnext;
                    V.col(j + 1) = w / hnext;
                }
            }
            double tau = tau_guess > 0.0 ? std::min(tau_guess, target - t) : target - t;
            DenseMatrix F;
            for (;;) {
                F = (tau * H.topLeftCorner(m, m)).exp();
                const double est = beta * hnext * std::abs(F(m - 1, 0)) * tau;
                if (est <= o.atol + o.rtol * beta || hnext == 0.0) break;
                ++rep.rejected;
                tau *= 0.5;
                if (tau < o.min_step) fail(ErrorCode::StepSizeUnderflow, "Krylov step underflow", tau);
            }
            x = beta * (V.leftCols(m) * F.col(0));
            if (target - t - tau <= 1e-14 * std::max(1.0, target)) {
                t = target;
            } else {
                t += tau;
            }
            tau_guess = 2.0 * tau;
            ++rep.steps;
        }
        observer(i, target, x);
    }
    return rep;
}

}  // namespace

PropagationReport propagate(const SparseMatrix& generator, Eigen::VectorXcd x, const std::vector<double>& times,
                            const SectorObserver& observer, const PropagationOptions& options) {
    if (times.empty()) return {};
    for (std::size_t i = 1; i < times.size(); ++i) {
        if (!(times[i] > times[i - 1])) fail(ErrorCode::InvalidArgument, "output times must be strictly increasing");
    }
    if (x.size() != generator.cols()) fail(ErrorCode::DimensionMismatch, "state does not match the generator");
    if (options.integrator == Integrator::Krylov) return krylov(generator, std::move(x), times, observer, options);
    return dormand_prince(generator, std::move(x), times, observer, options);
}

std::vector<AugmentedState> evolve(const AugmentedModel& model, const AugmentedState& rho0,
                                   const std::vector<double>& times, const PropagationOptions& options,
                                   PropagationReport* report) {
    std::vector<AugmentedState> out(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) out[i].time = times[i];
    PropagationReport rep = propagate(model.generator(kEven), rho0.even, times,
                                      [&](std::size_t i, double, const Eigen::VectorXcd& x) { out[i].even = x; }, options);
    if (rho0.odd.size() > 0) {
        const auto r2 = propagate(model.generator(kOdd), rho0.odd, times,
                                  [&](std::size_t i, double, const Eigen::VectorXcd& x) { out[i].odd = x; }, options);
        rep.steps += r2.steps;
        rep.rejected += r2.rejected;
    }
    for (const auto& s : out) rep.max_trace_deviation = std::max(rep.max_trace_deviation, std::abs(trace(model, s) - 1.0));
    if (report) *report = rep;
    return out;
}

std::vector<std::vector<cplx>> evolve_observables(const AugmentedModel& model, const AugmentedState& rho0,
                                                  const std::vector<double>& times,
                                                  const std::vector<OperatorSum>& observables,
                                                  const PropagationOptions& options, PropagationReport* report) {
    std::vector<std::vector<cplx>> values(observables.size(), std::vector<cplx>(times.size(), 0.0));
    std::vector<double> trace_dev(times.size(), 0.0);
    std::vector<Eigen::VectorXcd> fe, fo;
    for (const auto& op : observables) {
        fe.push_back(model.space().trace_functional(op, kEven));
        if (rho0.odd.size() > 0) fo.push_back(model.space().trace_functional(op, kOdd));
    }
    const double w = model.space().trace_weight();
    PropagationReport rep = propagate(
        model.generator(kEven), rho0.even, times,
        [&](std::size_t i, double, const Eigen::VectorXcd& x) {
            for (std::size_t k = 0; k < fe.size(); ++k) values[k][i] += dot(fe[k], x);
            trace_dev[i] = std::abs(w * x[0] - 1.0);
        },
        options);
    if (rho0.odd.size() > 0) {
        propagate(
            model.generator(kOdd), rho0.odd, times,
            [&](std::size_t i, double, const Eigen::VectorXcd& x) {
                for (std::size_t k = 0; k < fo.size(); ++k) values[k][i] += dot(fo[k], x);
            },
            options);
    }
    rep.max_trace_deviation = *std::max_element(trace_dev.begin(), trace_dev.end());
    if (report) *report = rep;
    return values;
}

namespace {

// Smallest eigenvalue magnitude of an operator given a solver for it.
template <class Solve>
double inverse_iteration(Solve&& solve, Eigen::Index n) {
    Eigen::VectorXcd v = Eigen::VectorXcd::Ones(n).normalized();
    double sigma = 0.0;
    for (int it = 0; it < 8; ++it) {
        Eigen::VectorXcd y = solve(v);
        const double ny = y.norm();
        if (!(ny > 0.0) || !std::isfinite(ny)) return 0.0;
        sigma = 1.0 / ny;
        v = y / ny;
    }
    return sigma;
}

}  // namespace

AugmentedState steady_state(const AugmentedModel& model, const SteadyOptions& options, SteadyReport* report) {
    const SparseMatrix& L = model.generator(kEven);
    const Eigen::Index n = L.rows();
    const double w = model.space().trace_weight();
    SteadyReport rep;
    rep.generator_norm = one_norm(L);
    rep.trace_row_norm = model.trace_row_norm();

    SparseMatrix M = L;
    M.coeffRef(0, 0) = 1.0;  // row 0 of L is zero: bordered with the trace functional
    M.makeCompressed();
    Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(n);
    rhs[0] = 1.0 / w;
    auto residual = [&](const Eigen::VectorXcd& v) {
        return (L * v).norm() / (std::max(rep.generator_norm, 1e-300) * std::max(v.norm(), 1e-300));
    };
    auto check_gap = [&](double sigma) {
        rep.gap_estimate = sigma;
        if (sigma < options.gap_tolerance) {
            if (report) *report = rep;
            fail(ErrorCode::DegenerateNullSpace,
                 "generator null space is degenerate (gap estimate " + std::to_string(sigma) + ")", sigma);
        }
    };

    std::vector<SteadyMethod> plan;
    switch (options.method) {
        case SteadyMethod::Auto:
            if (n <= options.direct_limit) plan = {SteadyMethod::Direct, SteadyMethod::Iterative, SteadyMethod::Propagation};
            else plan = {SteadyMethod::Iterative, SteadyMethod::Propagation};
            break;
        default:
            plan = {options.method};
    }
    Eigen::VectorXcd x;
    rep.residual = std::numeric_limits<double>::infinity();
    auto accept = [&](Eigen::VectorXcd y, const char* name, int iterations) {
        if (!y.allFinite()) return;
        const double r = residual(y);
        if (r < rep.residual) {
            x = std::move(y);
            rep.residual = r;
            rep.method = name;
            rep.iterations = iterations;
        }
    };
    for (SteadyMethod m : plan) {
        if (rep.residual < options.residual_tolerance) break;
        if (m == SteadyMethod::Direct) {
            Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
            lu.compute(M);
            if (lu.info() != Eigen::Success) check_gap(0.0);
            check_gap(inverse_iteration([&](const Eigen::VectorXcd& v) { return Eigen::VectorXcd(lu.solve(v)); }, n));
            accept(lu.solve(rhs), "sparse-lu", 0);
        } else if (m == SteadyMethod::Iterative) {
            Eigen::BiCGSTAB<SparseMatrix, Eigen::IncompleteLUT<cplx>> solver;
            solver.preconditioner().setDroptol(1e-6);
            solver.setMaxIterations(options.max_iterations);
            solver.setTolerance(1e-13);
            solver.compute(M);
            if (solver.info() != Eigen::Success) check_gap(0.0);  // ILUT only fails on an exactly zero row
            Eigen::VectorXcd y = solver.solve(rhs);
            const bool converged = solver.info() == Eigen::Success;
            const int iterations = int(solver.iterations());
            const double error = solver.error();
            check_gap(inverse_iteration([&](const Eigen::VectorXcd& v) { return Eigen::VectorXcd(solver.solve(v)); }, n));
            if (!converged && options.method == SteadyMethod::Iterative) {
                if (report) *report = rep;
                fail(ErrorCode::NoConvergence, "iterative steady-state solve did not converge", error);
            }
            accept(std::move(y), "bicgstab-ilut", iterations);
        } else {
            Eigen::VectorXcd y0 = Eigen::VectorXcd::Zero(n);
            y0[0] = 1.0 / w;
            if (x.size() == n) y0 = x;
            PropagationOptions po;
            po.integrator = Integrator::Krylov;
            Eigen::VectorXcd y = y0;
            propagate(L, y0, {0.0, options.propagation_time},
                      [&](std::size_t, double, const Eigen::VectorXcd& v) { y = v; }, po);
            accept(std::move(y), "propagation", 0);
        }
    }
    if (report) *report = rep;
    if (!(rep.residual < options.residual_tolerance)) {
        fail(ErrorCode::NoConvergence, "steady state residual " + std::to_string(rep.residual) + " above tolerance",
             rep.residual);
    }
    AugmentedState s;
    s.even = x / (w * x[0]);
    s.time = std::numeric_limits<double>::infinity();
    return s;
}

std::vector<cplx> two_time_correlation(const AugmentedModel& model, const AugmentedState& rho, const OperatorSum& a,
                                       const OperatorSum& b, const std::vector<double>& times,
                                       const PropagationOptions& options) {
    if (a.parity() != Parity::Odd || b.parity() != Parity::Odd) {
        fail(ErrorCode::ParityViolation, "two-time correlation needs fermion-odd operators");
    }
    if (rho.odd.size() > 0 && !rho.odd.isZero(0.0)) {
        fail(ErrorCode::ParityViolation, "two-time correlation needs an even reference state");
    }
    const auto& sp = model.space();
    const Eigen::VectorXcd y = sp.apply(sp.left_terms(b), rho.even, kEven, kOdd);
    const Eigen::VectorXcd f = sp.trace_functional(a, kOdd);
    std::vector<cplx> out(times.size());
    std::vector<double> grid = times;
    const bool shifted = grid.empty() || grid[0] != 0.0;
    if (shifted) grid.insert(grid.begin(), 0.0);
    propagate(
        model.generator(kOdd), y, grid,
        [&](std::size_t i, double, const Eigen::VectorXcd& x) {
            if (shifted && i == 0) return;
            out[shifted ? i - 1 : i] = dot(f, x);
        },
        options);
    return out;
}

}  // namespace pfermion
