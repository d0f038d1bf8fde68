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

#include "fit.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <random>

#include <json.hpp>

#include "error.hpp"

namespace pfermion {

namespace {

const cplx I1(0.0, 1.0);

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

std::vector<FitTerm> unpack(const Vec& p) {
    std::vector<FitTerm> terms(p.size() / 4);
    for (std::size_t j = 0; j < terms.size(); ++j) {
        terms[j].amplitude = cplx(p[4 * j], p[4 * j + 1]);
        terms[j].width = std::exp(p[4 * j + 2]);
        terms[j].rate = std::exp(p[4 * j + 3]);
    }
    return terms;
}

Vec pack(const std::vector<FitTerm>& terms) {
    Vec p(4 * terms.size());
    for (std::size_t j = 0; j < terms.size(); ++j) {
        p[4 * j] = terms[j].amplitude.real();
        p[4 * j + 1] = terms[j].amplitude.imag();
        p[4 * j + 2] = std::log(terms[j].width);
        p[4 * j + 3] = std::log(terms[j].rate);
    }
    return p;
}

struct Problem {
    const std::vector<double>& grid;
    const std::vector<cplx>& target;

    // residuals stacked [re; im]
    Vec residual(const Vec& p) const {
        const auto terms = unpack(p);
        const Eigen::Index n = Eigen::Index(grid.size());
        Vec r(2 * n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const cplx d = fitted_envelope(terms, grid[i]) - target[i];
            r[i] = d.real();
            r[n + i] = d.imag();
        }
        return r;
    }

    Mat jacobian(const Vec& p) const {
        const auto terms = unpack(p);
        const Eigen::Index n = Eigen::Index(grid.size());
        Mat J(2 * n, p.size());
        for (Eigen::Index i = 0; i < n; ++i) {
            const double t = grid[i];
            for (std::size_t j = 0; j < terms.size(); ++j) {
                const auto& f = terms[j];
                const double ex = std::exp(-f.rate * t), ew = std::exp(-f.width * t);
                const cplx cols[4] = {ex - ew, I1 * (ex - ew), f.amplitude * t * f.width * ew,
                                      -f.amplitude * t * f.rate * ex};
                for (int c = 0; c < 4; ++c) {
                    J(i, 4 * j + c) = cols[c].real();
                    J(n + i, 4 * j + c) = cols[c].imag();
                }
            }
        }
        return J;
    }
};

struct LmResult {
    Vec p;
    double cost = std::numeric_limits<double>::infinity();
    bool converged = false;
    int iterations = 0;
};

LmResult levenberg_marquardt(const Problem& prob, Vec p, int max_iter, double tol) {
    LmResult out;
    Vec r = prob.residual(p);
    double cost = 0.5 * r.squaredNorm();
    double lambda = -1.0;
    int it = 0;
    bool converged = false;
    for (; it < max_iter; ++it) {
        const Mat J = prob.jacobian(p);
        const Mat A = J.transpose() * J;
        const Vec g = J.transpose() * r;
        if (lambda < 0.0) lambda = 1e-3 * A.diagonal().maxCoeff();
        if (g.lpNorm<Eigen::Infinity>() < 1e-15) {
            converged = true;
            break;
        }
        bool accepted = false;
        for (int tries = 0; tries < 30; ++tries) {
            Mat B = A;
            for (Eigen::Index d = 0; d < B.rows(); ++d) B(d, d) += lambda * std::max(A(d, d), 1e-12);
            const Vec step = B.ldlt().solve(-g);
            if (!step.allFinite()) {
                lambda *= 4.0;
                continue;
            }
            const Vec trial = p + step;
            if (!trial.allFinite() || trial.cwiseAbs().maxCoeff() > 700.0) {
                lambda *= 4.0;
                continue;
            }
            const Vec rt = prob.residual(trial);
            const double ct = 0.5 * rt.squaredNorm();
            if (std::isfinite(ct) && ct < cost) {
                const double rel = (cost - ct) / std::max(cost, 1e-300);
                const double step_rel = step.norm() / (p.norm() + 1e-12);
                p = trial;
                r = rt;
                cost = ct;
                lambda = std::max(lambda / 3.0, 1e-15);
                accepted = true;
                if (rel < tol || step_rel < 1e-12) converged = true;
                break;
            }
            lambda *= 4.0;
        }
        if (!accepted) {
            // no descent direction left at this damping
            converged = true;
            break;
        }
        if (converged) break;
    }
    out.p = p;
    out.cost = cost;
    out.converged = converged;
    out.iterations = it;
    return out;
}

}  // namespace

void FitTerm::validate() const {
    if (!std::isfinite(amplitude.real()) || !std::isfinite(amplitude.imag()) || !std::isfinite(width) ||
        !std::isfinite(rate)) {
        fail(ErrorCode::InvalidArgument, "fit term has non-finite parameters");
    }
    if (!(width + rate > 0.0)) fail(ErrorCode::InvalidArgument, "fit term must decay (W_fit + x_fit > 0)");
}

std::vector<double> geometric_grid(double t_min, double t_max, int points) {
    if (!(t_min > 0.0) || !(t_max > t_min) || points < 2) {
        fail(ErrorCode::DegenerateGrid, "geometric grid needs 0 < t_min < t_max and at least 2 points");
    }
    std::vector<double> g(points);
    const double r = std::log(t_max / t_min) / (points - 1);
    for (int i = 0; i < points; ++i) g[i] = t_min * std::exp(r * i);
    g.back() = t_max;
    return g;
}

std::vector<double> default_fit_grid(const LorentzianBathSpec& spec) {
    return geometric_grid(1e-3 / spec.coupling, 10.0 / spec.coupling, 400);
}

cplx fitted_envelope(const std::vector<FitTerm>& terms, double t) {
    cplx s = 0.0;
    for (const auto& f : terms) s += f.amplitude * (std::exp(-f.rate * t) - std::exp(-f.width * t));
    return s;
}

cplx fitted_matsubara_correlation(const std::vector<FitTerm>& terms, int sigma, double t, double mu) {
    const double a = std::abs(t);
    const double sg = t > 0.0 ? 1.0 : (t < 0.0 ? -1.0 : 0.0);
    return sg * fitted_envelope(terms, a) * std::exp(I1 * (double(sigma) * mu * t));
}

FitReport fit_matsubara_envelope(const LorentzianBathSpec& spec, const FitOptions& options) {
    spec.validate();
    if (spec.zero_temperature()) fail(ErrorCode::InvalidArgument, "envelope fit requires finite inverse temperature");
    if (options.terms < 1) fail(ErrorCode::InvalidArgument, "fit needs at least one term");
    const std::vector<double> grid = options.grid.empty() ? default_fit_grid(spec) : options.grid;
    if (grid.size() < std::size_t(2 * options.terms) || !(grid.front() > 0.0)) {
        fail(ErrorCode::DegenerateGrid, "fit grid must hold positive times and outnumber the parameters");
    }
    for (std::size_t i = 1; i < grid.size(); ++i) {
        if (!(grid[i] > grid[i - 1])) fail(ErrorCode::DegenerateGrid, "fit grid must be strictly increasing");
    }

    LorentzianBathSpec centred = spec;
    centred.mu = 0.0;
    std::vector<cplx> target(grid.size());
    double peak = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        target[i] = matsubara_envelope(grid[i], centred, options.reference_terms);
        peak = std::max(peak, std::abs(target[i]));
    }

    std::vector<FitTerm> start = options.initial;
    if (start.empty()) {
        for (int j = 1; j <= options.terms; ++j) {
            const double x = matsubara_frequency(j, spec.beta);
            FitTerm f;
            f.rate = x;
            f.width = spec.width;
            if (pole_collision(j, spec)) f.width *= 1.01;
            f.amplitude = 2.0 * I1 * spec.coupling * spec.width * spec.width /
                          (spec.beta * (x * x - f.width * f.width));
            start.push_back(f);
        }
    }
    if (int(start.size()) != options.terms) {
        fail(ErrorCode::InvalidArgument, "initial guess must hold exactly K_fit terms");
    }
    for (const auto& f : start) {
        f.validate();
        if (!(f.width > 0.0) || !(f.rate > 0.0)) fail(ErrorCode::InvalidArgument, "initial W_fit, x_fit must be positive");
    }

    const Problem prob{grid, target};
    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const Vec p0 = pack(start);

    LmResult best;
    int best_index = 0;
    const int restarts = std::max(1, options.restarts);
    for (int s = 0; s < restarts; ++s) {
        Vec p = p0;
        if (s > 0) {
            for (int j = 0; j < options.terms; ++j) {
                const cplx m(p[4 * j], p[4 * j + 1]);
                const cplx scaled = m * std::exp(cplx(0.5 * normal(rng), 0.3 * normal(rng)));
                p[4 * j] = scaled.real();
                p[4 * j + 1] = scaled.imag();
                p[4 * j + 2] += 0.7 * normal(rng);
                p[4 * j + 3] += 0.7 * normal(rng);
            }
        }
        LmResult r = levenberg_marquardt(prob, p, options.max_iterations, options.tolerance);
        if (r.cost < best.cost) {
            best = r;
            best_index = s;
        }
    }

    FitReport report;
    report.terms = unpack(best.p);
    report.converged = best.converged;
    report.iterations = best.iterations;
    report.best_restart = best_index;
    report.envelope_sup = peak;
    report.grid = grid;
    double l2 = 0.0, sup = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double d = std::abs(fitted_envelope(report.terms, grid[i]) - target[i]);
        l2 += d * d;
        sup = std::max(sup, d);
    }
    report.residual_l2 = std::sqrt(l2);
    report.residual_sup = sup;
    return report;
}

std::string to_json(const FitReport& report, const LorentzianBathSpec& spec) {
    nlohmann::ordered_json j;
    j["bath"] = {{"coupling", spec.coupling}, {"width", spec.width}, {"mu", spec.mu}, {"beta", spec.beta}};
    j["residual_l2"] = report.residual_l2;
    j["residual_sup"] = report.residual_sup;
    j["envelope_sup"] = report.envelope_sup;
    j["converged"] = report.converged;
    j["iterations"] = report.iterations;
    j["best_restart"] = report.best_restart;
    j["grid"] = {{"t_min", report.grid.empty() ? 0.0 : report.grid.front()},
                 {"t_max", report.grid.empty() ? 0.0 : report.grid.back()},
                 {"points", report.grid.size()}};
    nlohmann::ordered_json terms = nlohmann::ordered_json::array();
    for (const auto& f : report.terms) {
        terms.push_back({{"amplitude", {f.amplitude.real(), f.amplitude.imag()}},
                         {"width", f.width},
                         {"rate", f.rate}});
    }
    j["terms"] = terms;
    return j.dump(2) + "\n";
}

}  // namespace pfermion
