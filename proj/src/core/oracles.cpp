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

#include "oracles.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "error.hpp"

namespace pfermion::oracles {

cplx lead_self_energy(double omega, const LorentzianBathSpec& lead) {
    return lead.coupling * lead.width / cplx(omega - lead.mu, lead.width);
}

cplx retarded_green(double omega, const TransmissionModel& model) {
    cplx sigma = 0.0;
    for (const auto& l : model.leads) sigma += lead_self_energy(omega, l);
    return 1.0 / (omega - model.epsilon - sigma);
}

double level_spectral_function(double omega, const TransmissionModel& model) {
    return -retarded_green(omega, model).imag() / std::numbers::pi;
}

namespace {

struct CurrentIntegrand {
    const TransmissionModel* model;
    std::size_t into, from;
};

double current_integrand(double w, void* p) {
    const auto* c = static_cast<const CurrentIntegrand*>(p);
    const auto& a = c->model->leads[c->from];
    const auto& b = c->model->leads[c->into];
    const double g = std::norm(retarded_green(w, *c->model));
    const double t = 4.0 * lorentzian_spectral_density(w, a) * lorentzian_spectral_density(w, b) * g;
    return t * (fermi_occupation(w, a) - fermi_occupation(w, b)) / (2.0 * std::numbers::pi);
}

}  // namespace

double exact_level_current(const TransmissionModel& model, std::size_t into, double tolerance) {
    if (model.leads.size() != 2 || into > 1) fail(ErrorCode::InvalidArgument, "transmission current needs exactly two leads");
    for (const auto& l : model.leads) l.validate();
    const auto& a = model.leads[0];
    const auto& b = model.leads[1];
    if (a.mu == b.mu && a.beta == b.beta) return 0.0;
    double lo = std::min(a.mu, b.mu), hi = std::max(a.mu, b.mu);
    const double tail = 60.0 / std::min(a.beta, b.beta);
    if (std::isfinite(tail)) {
        lo -= tail;
        hi += tail;
    }
    std::vector<double> pts{lo};
    for (double x : {a.mu, b.mu, model.epsilon}) {
        if (x > lo && x < hi) pts.push_back(x);
    }
    pts.push_back(hi);
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    CurrentIntegrand data{&model, into, 1 - into};
    gsl_function f{&current_integrand, &data};
    gsl_integration_workspace* ws = gsl_integration_workspace_alloc(2000);
    double result = 0.0, err = 0.0;
    const int status = gsl_integration_qagp(&f, pts.data(), pts.size(), tolerance, 1e-12, 2000, ws, &result, &err);
    gsl_integration_workspace_free(ws);
    if (status != GSL_SUCCESS && err > tolerance) {
        fail(ErrorCode::QuadratureNonconvergence, std::string("transmission integral failed: ") + gsl_strerror(status), err);
    }
    return result;
}

DiscretizedBath discretize(const LorentzianBathSpec& spec, int count) {
    spec.validate();
    if (count < 1) fail(ErrorCode::InvalidArgument, "discretized bath needs at least one mode");
    DiscretizedBath d;
    d.spec = spec;
    const double g = std::sqrt(spec.coupling * spec.width / count);
    for (int k = 0; k < count; ++k) {
        const double u = (k + 0.5) / count;
        d.energies.push_back(spec.mu + spec.width * std::tan(std::numbers::pi * (u - 0.5)));
        d.couplings.push_back(g);
    }
    return d;
}

DiscretizedDynamics discretized_bath_dynamics(double epsilon, const std::vector<DiscretizedBath>& baths,
                                              double initial_occupation, const std::vector<double>& times) {
    Eigen::Index dim = 1;
    for (const auto& b : baths) dim += Eigen::Index(b.energies.size());
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd c0(dim);
    h(0, 0) = epsilon;
    c0[0] = initial_occupation;
    std::vector<std::pair<Eigen::Index, Eigen::Index>> ranges;
    Eigen::Index k = 1;
    for (const auto& b : baths) {
        ranges.emplace_back(k, Eigen::Index(b.energies.size()));
        for (std::size_t i = 0; i < b.energies.size(); ++i, ++k) {
            h(k, k) = b.energies[i];
            h(0, k) = h(k, 0) = b.couplings[i];
            c0[k] = fermi_occupation(b.energies[i], b.spec);
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
    const Eigen::MatrixXd& V = es.eigenvectors();
    const Eigen::VectorXd& lam = es.eigenvalues();
    const Eigen::VectorXd v0 = V.row(0).transpose();

    DiscretizedDynamics out;
    out.times = times;
    out.currents.assign(baths.size(), {});
    for (double t : times) {
        Eigen::VectorXcd e(dim);
        for (Eigen::Index a = 0; a < dim; ++a) e[a] = std::polar(1.0, -lam[a] * t);
        const Eigen::VectorXcd u0 = V * (e.cwiseProduct(v0.cast<cplx>()));  // row 0 of exp(-iht)
        const Eigen::VectorXcd r = u0.conjugate().cwiseProduct(c0.cast<cplx>());
        const Eigen::VectorXcd row = V * ((V.transpose() * r).cwiseProduct(e));  // <c_0^dag c_k>(t)
        out.occupation.push_back(row[0].real());
        for (std::size_t b = 0; b < baths.size(); ++b) {
            double cur = 0.0;
            for (Eigen::Index i = 0; i < ranges[b].second; ++i) {
                cur += -2.0 * h(0, ranges[b].first + i) * row[ranges[b].first + i].imag();
            }
            out.currents[b].push_back(cur);
        }
    }
    return out;
}

double markovian_occupation(double gamma0, double n0, double initial, double t) {
    return n0 + (initial - n0) * std::exp(-2.0 * gamma0 * t);
}

namespace {

SparseMatrix embed_leading(const DenseMatrix& m, int total_modes) {
    int k = 0;
    while ((Eigen::Index(1) << k) < m.rows()) ++k;
    SparseMatrix id{Eigen::Index(1) << (total_modes - k), Eigen::Index(1) << (total_modes - k)};
    id.setIdentity();
    SparseMatrix sm = m.sparseView();
    return Eigen::kroneckerProduct(id, sm).eval();
}

SparseMatrix system_coupling(const SystemSpec& system, const PseudoFermionBath& bath, const FockSpaceLayout& layout) {
    switch (system.kind) {
        case SystemKind::SingleLevel: return annihilation(0, layout).matrix;
        case SystemKind::Anderson:
            if (bath.spin == "up") return annihilation(0, layout).matrix;
            if (bath.spin == "down") return annihilation(1, layout).matrix;
            fail(ErrorCode::LayoutMismatch, "Anderson baths need spin 'up' or 'down'");
        case SystemKind::Explicit: break;
    }
    for (const std::string& key : {bath.lead + "/" + bath.spin, bath.lead, bath.spin, std::string()}) {
        const auto it = system.couplings.find(key);
        if (it != system.couplings.end()) return embed_leading(it->second, layout.size());
    }
    fail(ErrorCode::LayoutMismatch, "no coupling operator for lead '" + bath.lead + "'");
}

}  // namespace

FockSpaceLayout dense_layout(const SystemSpec& system, const std::vector<PseudoFermionBath>& baths) {
    std::vector<std::string> labels = system.labels();
    int i = 0;
    for (const auto& b : baths) {
        for (std::size_t m = 0; m < b.modes.size(); ++m) labels.push_back("pf" + std::to_string(i++));
    }
    return FockSpaceLayout(labels, system.modes(), 6);
}

SparseMatrix dense_hamiltonian(const SystemSpec& system, const std::vector<PseudoFermionBath>& baths) {
    const FockSpaceLayout layout = dense_layout(system, baths);
    const int N = layout.size();
    SparseMatrix h{Eigen::Index(layout.dimension()), Eigen::Index(layout.dimension())};
    switch (system.kind) {
        case SystemKind::SingleLevel:
            h += system.epsilon * number(0, layout).matrix;
            break;
        case SystemKind::Anderson: {
            const SparseMatrix nu = number(0, layout).matrix, nd = number(1, layout).matrix;
            h += system.epsilon * (nu + nd);
            h += system.interaction * SparseMatrix(nu * nd);
            break;
        }
        case SystemKind::Explicit:
            h += embed_leading(system.hamiltonian, N);
            break;
    }
    int j = system.modes();
    for (const auto& b : baths) {
        const SparseMatrix s = system_coupling(system, b, layout);
        const SparseMatrix sd = s.adjoint();
        for (const auto& m : b.modes) {
            const SparseMatrix c = annihilation(j, layout).matrix;
            const SparseMatrix cd = creation(j, layout).matrix;
            h += m.frequency * SparseMatrix(cd * c);
            h += m.coupling * SparseMatrix(s * cd + c * sd);
            ++j;
        }
    }
    return h;
}

SparseMatrix dense_liouvillian(const SystemSpec& system, const std::vector<PseudoFermionBath>& baths) {
    const FockSpaceLayout layout = dense_layout(system, baths);
    const SparseMatrix h = dense_hamiltonian(system, baths);
    const cplx mi(0.0, -1.0);
    SparseMatrix l = mi * (superop_left(h) - superop_right(h));
    int j = system.modes();
    for (const auto& b : baths) {
        for (const auto& m : b.modes) {
            const SparseMatrix c = annihilation(j, layout).matrix;
            const SparseMatrix cd = creation(j, layout).matrix;
            const SparseMatrix ncc = cd * c, nac = c * cd;
            const SparseMatrix d_c = 2.0 * superop_parity_sandwich(c) - superop_left(ncc) - superop_right(ncc);
            const SparseMatrix d_cd = 2.0 * superop_parity_sandwich(cd) - superop_left(nac) - superop_right(nac);
            l += m.damping * ((1.0 - m.occupation) * d_c + m.occupation * d_cd);
            ++j;
        }
    }
    return l;
}

DenseMatrix dense_initial_state(const SystemSpec& system, const std::vector<PseudoFermionBath>& baths,
                                const DenseMatrix& rho_system) {
    DenseMatrix rho = rho_system;
    for (const auto& b : baths) {
        for (const auto& m : b.modes) {
            DenseMatrix f = DenseMatrix::Zero(2, 2);
            f(0, 0) = 1.0 - m.occupation;
            f(1, 1) = m.occupation;
            rho = Eigen::kroneckerProduct(f, rho).eval();
        }
    }
    (void)system;
    return rho;
}

std::vector<std::vector<cplx>> dense_evolve(const SparseMatrix& liouvillian, const DenseMatrix& rho0,
                                            const std::vector<SparseMatrix>& observables,
                                            const std::vector<double>& times) {
    const DenseMatrix L = DenseMatrix(liouvillian);
    Eigen::VectorXcd v = vec(rho0);
    std::vector<std::vector<cplx>> out(observables.size());
    const double norm = L.cwiseAbs().colwise().sum().maxCoeff();
    double t = 0.0, last_dt = -1.0;
    long substeps = 1;
    DenseMatrix P;
    for (double target : times) {
        const double dt = target - t;
        if (dt < 0.0) fail(ErrorCode::InvalidArgument, "dense evolution needs increasing times from 0");
        if (dt > 0.0) {
            if (std::abs(dt - last_dt) > 1e-15 * std::max(1.0, dt)) {
                // keep ||L h|| <= 4 per exponential
                substeps = std::max(1L, long(std::ceil(norm * dt / 4.0)));
                P = (L * (dt / double(substeps))).exp();
                last_dt = dt;
            }
            for (long i = 0; i < substeps; ++i) v = P * v;
        }
        t = target;
        const DenseMatrix rho = unvec(v, rho0.rows());
        for (std::size_t k = 0; k < observables.size(); ++k) {
            out[k].push_back((DenseMatrix(observables[k]) * rho).trace());
        }
    }
    return out;
}

IrrelevanceReport fast_matsubara_irrelevance_check(const LorentzianBathSpec& spec, int term, double epsilon,
                                                   double tolerance, const std::vector<double>& times, double delta) {
    const SystemSpec system = SystemSpec::single_level(epsilon);
    PseudoFermionBath base;
    base.modes.push_back(resonant_mode(spec));
    PseudoFermionBath with = base;
    for (const auto& m : matsubara_modes_two(spec, term, delta, 1.0)) with.modes.push_back(m);
    DenseMatrix rho_s = DenseMatrix::Zero(2, 2);
    rho_s(0, 0) = 1.0;
    auto run = [&](const PseudoFermionBath& b) {
        const std::vector<PseudoFermionBath> baths{b};
        const FockSpaceLayout layout = dense_layout(system, baths);
        return dense_evolve(dense_liouvillian(system, baths), dense_initial_state(system, baths, rho_s),
                            {number(0, layout).matrix}, times)[0];
    };
    const auto a = run(base);
    const auto b = run(with);
    IrrelevanceReport r;
    r.term = term;
    r.rate = matsubara_frequency(term, spec.beta);
    r.tolerance = tolerance;
    for (std::size_t i = 0; i < a.size(); ++i) r.max_deviation = std::max(r.max_deviation, std::abs(a[i] - b[i]));
    r.passed = r.max_deviation < tolerance;
    return r;
}

}  // namespace pfermion::oracles
