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

#include "observables.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "error.hpp"

namespace pfermion {

namespace {

cplx dot(const Eigen::VectorXcd& f, const Eigen::VectorXcd& x) { return (f.transpose() * x)(0); }

std::vector<cplx> propagate_functional(const AugmentedModel& model, const Eigen::VectorXcd& y0,
                                       const Eigen::VectorXcd& f, const std::vector<double>& times,
                                       const PropagationOptions& options) {
    std::vector<cplx> out(times.size());
    propagate(model.generator(kOdd), y0, times,
              [&](std::size_t i, double, const Eigen::VectorXcd& x) { out[i] = dot(f, x); }, options);
    return out;
}

}  // namespace

Eigen::VectorXcd lead_current_functional(const AugmentedModel& model, const std::string& lead) {
    const int N = model.modes();
    const auto& sp = model.space();
    Eigen::VectorXcd f = Eigen::VectorXcd::Zero(Eigen::Index(sp.sector_dimension()));
    bool found = false;
    for (std::size_t b = 0; b < model.baths().size(); ++b) {
        const auto& bath = model.baths()[b];
        if (bath.lead != lead) continue;
        found = true;
        const OperatorSum& s = model.coupling_operator(b);
        const OperatorSum sd = s.adjoint();
        for (std::size_t i = 0; i < bath.modes.size(); ++i) {
            const int j = model.first_mode(b) + int(i);
            const OperatorSum op = (s * OperatorSum::creation(j, N) + sd * OperatorSum::annihilation(j, N)) *
                                   bath.modes[i].coupling;
            f += sp.trace_functional(op, kEven);
        }
    }
    if (!found) fail(ErrorCode::IndexOutOfRange, "no bath attached to lead '" + lead + "'");
    return f;
}

CurrentSample lead_current(const AugmentedModel& model, const AugmentedState& state, const std::string& lead) {
    const cplx v = cplx(0.0, -1.0) * dot(lead_current_functional(model, lead), state.even);
    return {lead, v.real(), v.imag()};
}

cplx occupation(const AugmentedModel& model, const AugmentedState& state, const std::string& label) {
    return expectation(model, state, model.number(model.layout().index_of(label)));
}

SpectrumTable spectral_function(const AugmentedModel& model, const AugmentedState& rho, const OperatorSum& s,
                                const std::vector<double>& omega, const SpectrumOptions& o, const std::string& spin) {
    if (s.parity() != Parity::Odd) fail(ErrorCode::ParityViolation, "spectral function needs a fermion-odd operator");
    if (!(o.dt > 0.0) || !(o.t_max > o.dt) || !(o.eta >= 0.0)) {
        fail(ErrorCode::InvalidArgument, "spectral function needs dt > 0, t_max > dt and eta >= 0");
    }
    if (omega.empty()) fail(ErrorCode::DegenerateGrid, "empty frequency grid");
    const auto& sp = model.space();
    const OperatorSum sd = s.adjoint();
    SpectrumTable tab;
    tab.spin = spin;
    tab.eta = o.eta;
    tab.omega = omega;
    const auto steps = std::size_t(std::llround(o.t_max / o.dt));
    for (std::size_t i = 0; i <= steps; ++i) tab.times.push_back(double(i) * o.dt);

    auto sandwich = [&](const OperatorSum& b) {
        std::vector<SuperTerm> t = sp.left_terms(b);
        for (auto& r : sp.right_terms(b)) t.push_back(std::move(r));
        return sp.apply(t, rho.even, kEven, kOdd);
    };
    tab.particle = propagate_functional(model, sandwich(sd), sp.trace_functional(s, kOdd), tab.times, o.propagation);
    if (o.check_reality) {
        tab.hole = propagate_functional(model, sandwich(s), sp.trace_functional(sd, kOdd), tab.times, o.propagation);
    }
    const double c0 = std::abs(tab.particle.front());
    tab.tail_ratio = c0 > 0.0 ? std::abs(tab.particle.back()) / c0 : 0.0;
    if (tab.tail_ratio > o.decay_threshold) {
        fail(ErrorCode::InsufficientTimeWindow,
             "correlation has not decayed by t_max (|C(t_max)|/|C(0)| = " + std::to_string(tab.tail_ratio) + ")",
             tab.tail_ratio);
    }
    std::vector<double> window(tab.times.size());
    for (std::size_t i = 0; i < tab.times.size(); ++i) {
        window[i] = std::exp(-o.eta * tab.times[i]) * ((i == 0 || i + 1 == tab.times.size()) ? 0.5 * o.dt : o.dt);
    }
    double amax = 0.0, imax = 0.0;
    for (double w : omega) {
        cplx fp = 0.0, fh = 0.0;
        for (std::size_t i = 0; i < tab.times.size(); ++i) {
            const cplx ph = std::polar(1.0, w * tab.times[i]);
            fp += window[i] * ph * tab.particle[i];
            if (o.check_reality) fh += window[i] * std::conj(ph) * tab.hole[i];
        }
        tab.value.push_back(fp.real() / std::numbers::pi);
        const double im = o.check_reality ? (fp + fh).imag() / (2.0 * std::numbers::pi) : 0.0;
        tab.imaginary.push_back(im);
        amax = std::max(amax, std::abs(tab.value.back()));
        imax = std::max(imax, std::abs(im));
    }
    tab.reality = amax > 0.0 ? imax / amax : 0.0;
    for (std::size_t i = 1; i < omega.size(); ++i) {
        tab.sum_rule += 0.5 * (omega[i] - omega[i - 1]) * (tab.value[i] + tab.value[i - 1]);
    }
    return tab;
}

std::vector<std::size_t> local_maxima(const std::vector<double>& y, double min_prominence) {
    std::vector<std::size_t> peaks;
    const std::size_t n = y.size();
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (!(y[i] > y[i - 1]) || !(y[i] >= y[i + 1])) continue;
        // skip plateaus to their last point
        std::size_t k = i;
        while (k + 1 < n && y[k + 1] == y[i]) ++k;
        if (k + 1 >= n || !(y[k + 1] < y[i])) continue;
        double left = y[i], right = y[i];
        for (std::size_t a = i; a-- > 0 && y[a] <= y[i];) left = std::min(left, y[a]);
        for (std::size_t b = k + 1; b < n && y[b] <= y[i]; ++b) right = std::min(right, y[b]);
        if (y[i] - std::max(left, right) >= min_prominence) peaks.push_back(i);
    }
    return peaks;
}

}  // namespace pfermion
