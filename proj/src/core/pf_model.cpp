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

#include "pf_model.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "error.hpp"

namespace pfermion {

namespace {

const cplx I1(0.0, 1.0);

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt(cplx v) { return fmt(v.real()) + " " + fmt(v.imag()); }

std::string tag(const std::string& s) { return s.empty() ? "-" : s; }
std::string untag(const std::string& s) { return s == "-" ? "" : s; }

double read_double(std::istringstream& in, const std::string& what) {
    std::string tok;
    if (!(in >> tok)) fail(ErrorCode::Parse, "bath descriptor: missing " + what);
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') fail(ErrorCode::Parse, "bath descriptor: bad number '" + tok + "' for " + what);
    return v;
}

cplx read_cplx(std::istringstream& in, const std::string& what) {
    const double re = read_double(in, what);
    const double im = read_double(in, what);
    return {re, im};
}

PseudoFermionMode make_mode(cplx n, cplx lambda_sq, cplx omega, cplx damping) {
    PseudoFermionMode m;
    m.occupation = n;
    m.coupling_sq = lambda_sq;
    m.coupling = std::sqrt(lambda_sq);
    m.frequency = omega;
    m.damping = damping;
    return m;
}

void check_regulator(cplx delta, double delta_min) {
    if (!(std::abs(delta) >= delta_min)) {
        fail(ErrorCode::RegulatorTooSmall,
             "regulator |Delta| = " + fmt(std::abs(delta)) + " is below the minimum " + fmt(delta_min));
    }
}

}  // namespace

void PseudoFermionMode::validate() const {
    const cplx vals[5] = {occupation, coupling, coupling_sq, frequency, damping};
    for (const cplx& v : vals) {
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
            fail(ErrorCode::InvalidArgument, "pseudo-fermion mode has non-finite parameters");
        }
    }
    if (!(damping.real() > 0.0)) fail(ErrorCode::InvalidArgument, "pseudo-fermion damping must have positive real part");
}

const char* map_kind_name(MapKind kind) {
    switch (kind) {
        case MapKind::Resonant: return "resonant";
        case MapKind::ExactTwo: return "exact-two";
        case MapKind::ExactFour: return "exact-four";
        case MapKind::FittedTwo: return "fitted-two";
        case MapKind::FittedFour: return "fitted-four";
    }
    return "unknown";
}

MapKind parse_map_kind(const std::string& name) {
    for (MapKind k : {MapKind::Resonant, MapKind::ExactTwo, MapKind::ExactFour, MapKind::FittedTwo,
                      MapKind::FittedFour}) {
        if (name == map_kind_name(k)) return k;
    }
    fail(ErrorCode::InvalidArgument, "unknown map kind '" + name +
                                         "' (expected resonant, exact-two, exact-four, fitted-two, fitted-four)");
}

PseudoFermionMode resonant_mode(const LorentzianBathSpec& spec) {
    spec.validate();
    return make_mode(0.5, spec.coupling * spec.width, spec.mu, spec.width);
}

std::array<PseudoFermionMode, 2> exponential_pair_two(cplx amplitude, double width, double rate, double mu,
                                                      cplx delta, double delta_min) {
    check_regulator(delta, delta_min);
    const cplx shift = 0.5 * I1 * (rate - width);
    const double damping = 0.5 * (width + rate);
    return {make_mode(delta, amplitude / delta, mu + shift, damping),
            make_mode(delta, -amplitude / delta, mu - shift, damping)};
}

std::array<PseudoFermionMode, 4> exponential_pair_four(cplx amplitude, double width, double rate, double mu) {
    const cplx shift = 0.5 * I1 * (rate - width);
    const double damping = 0.5 * (width + rate);
    std::array<PseudoFermionMode, 4> out;
    int i = 0;
    for (int r : {1, -1}) {
        for (int s : {1, -1}) {
            out[i++] = make_mode(0.5 * (1.0 + s), double(r) * amplitude, mu + double(r * s) * shift, damping);
        }
    }
    return out;
}

std::array<PseudoFermionMode, 2> matsubara_modes_two(const LorentzianBathSpec& spec, int k, cplx delta,
                                                     double delta_min) {
    const MatsubaraTerm m = matsubara_term(k, spec);
    return exponential_pair_two(m.amplitude, spec.width, m.frequency, spec.mu, delta, delta_min);
}

std::array<PseudoFermionMode, 4> matsubara_modes_four(const LorentzianBathSpec& spec, int k) {
    const MatsubaraTerm m = matsubara_term(k, spec);
    return exponential_pair_four(m.amplitude, spec.width, m.frequency, spec.mu);
}

std::vector<PseudoFermionMode> modes_from_fit(const LorentzianBathSpec& spec, const std::vector<FitTerm>& terms,
                                              cplx delta, double delta_min) {
    std::vector<PseudoFermionMode> out;
    for (const auto& f : terms) {
        f.validate();
        for (const auto& m : exponential_pair_two(f.amplitude, f.width, f.rate, spec.mu, delta, delta_min)) {
            out.push_back(m);
        }
    }
    return out;
}

std::vector<PseudoFermionMode> modes_from_fit_four(const LorentzianBathSpec& spec,
                                                   const std::vector<FitTerm>& terms) {
    std::vector<PseudoFermionMode> out;
    for (const auto& f : terms) {
        f.validate();
        for (const auto& m : exponential_pair_four(f.amplitude, f.width, f.rate, spec.mu)) out.push_back(m);
    }
    return out;
}

cplx pf_mode_correlation(const PseudoFermionMode& mode, int sigma, double t) {
    const cplx weight = 0.5 * (1.0 - sigma) + double(sigma) * mode.occupation;
    return mode.coupling_sq * weight * std::exp(I1 * double(sigma) * mode.frequency * t - mode.damping * std::abs(t));
}

cplx pf_bath_correlation(const PseudoFermionBath& bath, int sigma, double t) {
    cplx s = 0.0;
    for (const auto& m : bath.modes) s += pf_mode_correlation(m, sigma, t);
    return s;
}

PseudoFermionBath build_bath(const LorentzianBathSpec& spec, const BathConstruction& c,
                             const std::vector<FitTerm>& fit_terms, const std::string& lead,
                             const std::string& spin) {
    spec.validate();
    if (c.terms < 0) fail(ErrorCode::InvalidArgument, "construction term count must be non-negative");
    PseudoFermionBath bath;
    bath.spec = spec;
    bath.construction = c;
    bath.lead = lead;
    bath.spin = spin;
    bath.modes.push_back(resonant_mode(spec));
    switch (c.kind) {
        case MapKind::Resonant:
            bath.construction.terms = 0;
            break;
        case MapKind::ExactTwo:
            for (int k = 1; k <= c.terms; ++k) {
                for (const auto& m : matsubara_modes_two(spec, k, c.delta, c.delta_min)) bath.modes.push_back(m);
            }
            break;
        case MapKind::ExactFour:
            for (int k = 1; k <= c.terms; ++k) {
                for (const auto& m : matsubara_modes_four(spec, k)) bath.modes.push_back(m);
            }
            break;
        case MapKind::FittedTwo:
        case MapKind::FittedFour: {
            if (int(fit_terms.size()) != c.terms) {
                fail(ErrorCode::InvalidArgument, "fitted construction expects " + std::to_string(c.terms) +
                                                     " fit terms, got " + std::to_string(fit_terms.size()));
            }
            bath.fit_terms = fit_terms;
            const auto extra = c.kind == MapKind::FittedTwo ? modes_from_fit(spec, fit_terms, c.delta, c.delta_min)
                                                            : modes_from_fit_four(spec, fit_terms);
            bath.modes.insert(bath.modes.end(), extra.begin(), extra.end());
            break;
        }
    }
    for (auto& m : bath.modes) {
        m.lead = lead;
        m.spin = spin;
    }
    return bath;
}

PseudoFermionBath concatenate(const PseudoFermionBath& a, const PseudoFermionBath& b) {
    PseudoFermionBath out = a;
    out.modes.insert(out.modes.end(), b.modes.begin(), b.modes.end());
    out.fit_terms.insert(out.fit_terms.end(), b.fit_terms.begin(), b.fit_terms.end());
    return out;
}

ValidationReport validate_bath(const PseudoFermionBath& bath, const LorentzianBathSpec& spec,
                               const std::vector<double>& grid, const std::vector<int>& sigmas, double tolerance) {
    if (grid.empty()) fail(ErrorCode::DegenerateGrid, "validation grid is empty");
    ValidationReport r;
    r.sigmas = sigmas;
    r.tolerance = tolerance;
    r.passed = true;
    for (int sigma : sigmas) {
        double mx = 0.0, l2 = 0.0;
        for (double t : grid) {
            const double d = std::abs(correlation_quadrature(sigma, t, spec).value - pf_bath_correlation(bath, sigma, t));
            mx = std::max(mx, d);
            l2 += d * d;
        }
        r.max_deviation.push_back(mx);
        r.l2_deviation.push_back(std::sqrt(l2));
        if (!(mx < tolerance)) r.passed = false;
    }
    return r;
}

std::string serialize_bath(const PseudoFermionBath& bath) {
    std::ostringstream o;
    o << "pfermion-bath 1\n";
    o << "lead " << tag(bath.lead) << "\n";
    o << "spin " << tag(bath.spin) << "\n";
    o << "spec " << fmt(bath.spec.coupling) << " " << fmt(bath.spec.width) << " " << fmt(bath.spec.mu) << " "
      << fmt(bath.spec.beta) << "\n";
    o << "construction " << map_kind_name(bath.construction.kind) << " " << bath.construction.terms << " "
      << fmt(bath.construction.delta) << " " << fmt(bath.construction.delta_min) << "\n";
    for (const auto& f : bath.fit_terms) {
        o << "fit " << fmt(f.amplitude) << " " << fmt(f.width) << " " << fmt(f.rate) << "\n";
    }
    for (const auto& m : bath.modes) {
        o << "mode " << fmt(m.occupation) << " " << fmt(m.coupling) << " " << fmt(m.coupling_sq) << " "
          << fmt(m.frequency) << " " << fmt(m.damping) << " " << tag(m.lead) << " " << tag(m.spin) << "\n";
    }
    o << "end\n";
    return o.str();
}

PseudoFermionBath parse_bath(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    PseudoFermionBath bath;
    bool header = false, done = false;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        const std::string where = " (line " + std::to_string(lineno) + ")";
        if (!header) {
            int version = 0;
            if (key != "pfermion-bath" || !(ls >> version) || version != 1) {
                fail(ErrorCode::Parse, "bath descriptor: missing 'pfermion-bath 1' header" + where);
            }
            header = true;
        } else if (key == "lead") {
            std::string v;
            ls >> v;
            bath.lead = untag(v);
        } else if (key == "spin") {
            std::string v;
            ls >> v;
            bath.spin = untag(v);
        } else if (key == "spec") {
            bath.spec.coupling = read_double(ls, "coupling" + where);
            bath.spec.width = read_double(ls, "width" + where);
            bath.spec.mu = read_double(ls, "mu" + where);
            bath.spec.beta = read_double(ls, "beta" + where);
        } else if (key == "construction") {
            std::string kind;
            ls >> kind;
            bath.construction.kind = parse_map_kind(kind);
            if (!(ls >> bath.construction.terms)) fail(ErrorCode::Parse, "bath descriptor: missing term count" + where);
            bath.construction.delta = read_cplx(ls, "delta" + where);
            bath.construction.delta_min = read_double(ls, "delta_min" + where);
        } else if (key == "fit") {
            FitTerm f;
            f.amplitude = read_cplx(ls, "fit amplitude" + where);
            f.width = read_double(ls, "fit width" + where);
            f.rate = read_double(ls, "fit rate" + where);
            bath.fit_terms.push_back(f);
        } else if (key == "mode") {
            PseudoFermionMode m;
            m.occupation = read_cplx(ls, "occupation" + where);
            m.coupling = read_cplx(ls, "coupling" + where);
            m.coupling_sq = read_cplx(ls, "coupling_sq" + where);
            m.frequency = read_cplx(ls, "frequency" + where);
            m.damping = read_cplx(ls, "damping" + where);
            std::string l, s;
            if (!(ls >> l >> s)) fail(ErrorCode::Parse, "bath descriptor: missing mode tags" + where);
            m.lead = untag(l);
            m.spin = untag(s);
            bath.modes.push_back(m);
        } else if (key == "end") {
            done = true;
            break;
        } else {
            fail(ErrorCode::Parse, "bath descriptor: unknown key '" + key + "'" + where);
        }
    }
    if (!header || !done) fail(ErrorCode::Parse, "bath descriptor: truncated input");
    return bath;
}

}  // namespace pfermion
