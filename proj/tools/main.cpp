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

#include <pfermion/pfermion.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <CLI11.hpp>

#include "config.hpp"

namespace fs = std::filesystem;
using pfcli::ConfigError;
using pfcli::json;
using pfcli::Reader;

namespace {

class PfError : public std::runtime_error {
public:
    PfError(pf_status status, const std::string& what) : std::runtime_error(what), status_(status) {}
    pf_status status() const { return status_; }

private:
    pf_status status_;
};

void check(pf_status st, const std::string& what) {
    if (st != PF_OK) throw PfError(st, what + ": " + pf_status_name(st) + ": " + pf_last_error());
}

int exit_code(pf_status st) {
    switch (st) {
        case PF_ERR_INVALID_ARGUMENT:
        case PF_ERR_POLE_COLLISION:
        case PF_ERR_DEGENERATE_GRID:
        case PF_ERR_REGULATOR_TOO_SMALL:
        case PF_ERR_INDEX_OUT_OF_RANGE:
        case PF_ERR_DIMENSION_MISMATCH:
        case PF_ERR_LAYOUT_MISMATCH:
        case PF_ERR_PARITY_VIOLATION:
        case PF_ERR_PARSE:
        case PF_ERR_IO:
            return 2;
        default:
            return 3;
    }
}

struct FitDeleter {
    void operator()(pf_fit* p) const { pf_fit_free(p); }
};
struct BathDeleter {
    void operator()(pf_bath* p) const { pf_bath_free(p); }
};
struct ModelDeleter {
    void operator()(pf_model* p) const { pf_model_free(p); }
};
struct StateDeleter {
    void operator()(pf_state* p) const { pf_state_free(p); }
};
struct SpectrumDeleter {
    void operator()(pf_spectrum* p) const { pf_spectrum_free(p); }
};
using FitPtr = std::shared_ptr<pf_fit>;
using BathPtr = std::unique_ptr<pf_bath, BathDeleter>;
using ModelPtr = std::unique_ptr<pf_model, ModelDeleter>;
using StatePtr = std::unique_ptr<pf_state, StateDeleter>;
using SpectrumPtr = std::unique_ptr<pf_spectrum, SpectrumDeleter>;

template <class F>
std::string fetch_text(F&& call, const std::string& what) {
    std::size_t needed = 0;
    check(call(nullptr, 0, &needed), what);
    std::string buf(needed, '\0');
    check(call(buf.data(), buf.size(), &needed), what);
    buf.resize(needed - 1);
    return buf;
}

std::string fmt(double x) {
    char b[40];
    std::snprintf(b, sizeof b, "%.17g", x);
    return b;
}

std::string file_tag(std::string s) {
    for (char& c : s) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
    }
    return s;
}

json cjson(const double v[2]) { return json::array({v[0], v[1]}); }

// ---- output ----------------------------------------------------------------------------

class Output {
public:
    Output(fs::path dir, std::string prefix) : dir_(std::move(dir)), prefix_(std::move(prefix)) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw ConfigError("/output/directory", "cannot create '" + dir_.string() + "': " + ec.message());
    }

    std::string path(const std::string& name) {
        files_.push_back(prefix_ + name);
        return (dir_ / (prefix_ + name)).string();
    }
    const std::vector<std::string>& files() const { return files_; }

    void write_text(const std::string& name, const std::string& text) {
        const std::string p = path(name);
        std::ofstream f(p, std::ios::binary);
        f << text;
        if (!f) throw PfError(PF_ERR_IO, "cannot write " + p);
    }

    void write_csv(const std::string& name, const std::string& units, const std::vector<std::string>& header,
                   const std::vector<std::vector<double>>& columns) {
        const std::string p = path(name);
        std::ofstream f(p, std::ios::binary);
        f << "# units: " << units << "\n";
        for (std::size_t c = 0; c < header.size(); ++c) f << (c ? "," : "") << header[c];
        f << "\n";
        const std::size_t rows = columns.empty() ? 0 : columns.front().size();
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < columns.size(); ++c) f << (c ? "," : "") << fmt(columns[c][r]);
            f << "\n";
        }
        if (!f) throw PfError(PF_ERR_IO, "cannot write " + p);
    }

private:
    fs::path dir_;
    std::string prefix_;
    std::vector<std::string> files_;
};

// ---- resolved setup --------------------------------------------------------------------

struct Lead {
    std::size_t index = 0;  // position in /leads
    std::string name;
    std::string spin;
    pf_lorentzian spec{};
};

struct Setup {
    json cfg;
    std::string command;
    std::string variant;
    pf_system system{};
    int explicit_modes = 0;
    std::vector<double> h_re, h_im;
    std::vector<std::string> coupling_keys;
    std::vector<std::vector<double>> coupling_re, coupling_im;
    std::vector<Lead> leads;
    pf_construction construction{};
    pf_fit_options fit{};
    std::vector<double> fit_grid;
    pf_engine_options engine{};
    pf_propagation_options propagation{};
    pf_steady_options steady{};

    bool fitted() const { return construction.kind == PF_MAP_FITTED_TWO || construction.kind == PF_MAP_FITTED_FOUR; }
    int system_modes() const { return variant == "anderson" ? 2 : variant == "explicit" ? explicit_modes : 1; }
};

Setup read_setup(const json& cfg, const std::string& command) {
    Setup s;
    s.cfg = cfg;
    s.command = command;
    const Reader r(s.cfg);

    s.variant = r.choice("/system/variant", {"single-level", "anderson", "explicit"});
    s.system.epsilon = r.number("/system/epsilon");
    s.system.interaction = r.number("/system/interaction");
    s.system.kind = s.variant == "anderson" ? PF_SYSTEM_ANDERSON : PF_SYSTEM_SINGLE_LEVEL;
    if (s.variant == "explicit") {
        s.explicit_modes = int(r.integer("/system/modes", 1, 6));
        const long dim = 1L << s.explicit_modes;
        r.matrix("/system/hamiltonian", dim, s.h_re, s.h_im);
        const json& c = r.at("/system/couplings");
        if (!c.is_object() || c.empty()) throw ConfigError("/system/couplings", "expected an object of coupling matrices");
        for (const auto& [key, _] : c.items()) {
            std::vector<double> re, im;
            r.matrix("/system/couplings/" + key, dim, re, im);
            s.coupling_keys.push_back(key);
            s.coupling_re.push_back(std::move(re));
            s.coupling_im.push_back(std::move(im));
        }
    } else {
        for (const char* k : {"/system/modes", "/system/hamiltonian", "/system/couplings"}) {
            if (r.has(k)) throw ConfigError(k, "only used by the explicit variant");
        }
    }

    const json& leads = r.at("/leads");
    std::map<std::string, std::size_t> seen;
    for (std::size_t i = 0; i < leads.size(); ++i) {
        const std::string p = "/leads/" + std::to_string(i);
        Lead l;
        l.index = i;
        l.name = r.string(p + "/name");
        if (l.name.empty() || l.name.find('/') != std::string::npos || l.name.find('+') != std::string::npos) {
            throw ConfigError(p + "/name", "lead names must be non-empty without '/' or '+'");
        }
        if (seen.count(l.name)) throw ConfigError(p + "/name", "duplicate lead name '" + l.name + "'");
        seen[l.name] = i;
        l.spec.coupling = r.non_negative(p + "/coupling");
        l.spec.width = r.positive(p + "/width");
        l.spec.mu = r.number(p + "/mu");
        l.spec.beta = r.inverse_temperature(p + "/beta");
        std::vector<std::string> spins;
        if (r.has(p + "/spin")) {
            spins.push_back(r.string(p + "/spin"));
            if (s.variant == "anderson" && spins[0] != "up" && spins[0] != "down") {
                throw ConfigError(p + "/spin", "Anderson leads take spin 'up', 'down' or null");
            }
        } else if (s.variant == "anderson") {
            spins = {"up", "down"};
        } else {
            spins = {""};
        }
        for (const auto& sp : spins) {
            Lead e = l;
            e.spin = sp;
            s.leads.push_back(e);
        }
    }

    pf_construction_default(&s.construction);
    const std::string map = r.choice("/construction/map", {"resonant", "exact-two", "exact-four", "fitted-two", "fitted-four"});
    check(pf_map_kind_parse(map.c_str(), &s.construction.kind), "map");
    s.construction.terms = int(r.integer("/construction/terms", 0, 100000));
    s.construction.delta_re = r.positive("/construction/delta");
    s.construction.delta_im = r.number("/construction/delta_imag");
    s.construction.delta_min = r.positive("/construction/delta_min");
    if (s.fitted() && s.construction.terms < 1) throw ConfigError("/construction/terms", "fitted maps need at least one term");

    pf_fit_options_default(&s.fit);
    s.fit.terms = std::max(1, s.construction.terms);
    s.fit.restarts = int(r.integer("/construction/fit/restarts", 0, 100000));
    s.fit.seed = std::uint64_t(r.integer("/construction/fit/seed", 0, 9007199254740991L));
    s.fit.reference_terms = int(r.integer("/construction/fit/reference_terms", 0, 100000000));
    s.fit.max_iterations = int(r.integer("/construction/fit/max_iterations", 1, 100000000));
    s.fit.tolerance = r.positive("/construction/fit/tolerance");
    if (r.has("/construction/fit/grid")) {
        s.fit_grid = r.grid("/construction/fit/grid", "t_min", "t_max", true);
        s.fit.grid = s.fit_grid.data();
        s.fit.grid_size = s.fit_grid.size();
    }

    pf_engine_options_default(&s.engine);
    s.engine.mode_cap = int(r.integer("/construction/mode_cap", 1, 30));
    s.engine.merge_identical_leads = r.boolean("/construction/merge_identical_leads") ? 1 : 0;

    pf_propagation_options_default(&s.propagation);
    s.propagation.integrator =
        r.choice("/solver/integrator", {"dopri5", "krylov"}) == "krylov" ? PF_INTEGRATOR_KRYLOV : PF_INTEGRATOR_DOPRI5;
    s.propagation.rtol = r.positive("/solver/rtol");
    s.propagation.atol = r.positive("/solver/atol");
    s.propagation.min_step = r.positive("/solver/min_step");
    s.propagation.max_steps = r.integer("/solver/max_steps", 1, 1L << 50);
    s.propagation.krylov_dimension = int(r.integer("/solver/krylov_dimension", 2, 1000));

    pf_steady_options_default(&s.steady);
    const std::string m = r.choice("/solver/steady/method", {"auto", "direct", "iterative", "propagation"});
    s.steady.method = m == "direct"        ? PF_STEADY_DIRECT
                      : m == "iterative"   ? PF_STEADY_ITERATIVE
                      : m == "propagation" ? PF_STEADY_PROPAGATION
                                           : PF_STEADY_AUTO;
    s.steady.residual_tolerance = r.positive("/solver/steady/residual_tolerance");
    s.steady.gap_tolerance = r.positive("/solver/steady/gap_tolerance");
    s.steady.propagation_time = r.positive("/solver/steady/propagation_time");
    s.steady.max_iterations = int(r.integer("/solver/steady/max_iterations", 1, 100000000));
    s.steady.direct_limit = std::size_t(r.integer("/solver/steady/direct_limit", 1, 1L << 40));
    return s;
}

// ---- bath and model construction --------------------------------------------------------

using FitKey = std::tuple<double, double, double>;

class FitCache {
public:
    explicit FitCache(const Setup& s) : setup_(s) {}

    // The envelope fit is centred on mu, so one fit serves every chemical potential.
    FitPtr get(const pf_lorentzian& spec) {
        const FitKey key{spec.coupling, spec.width, spec.beta};
        auto it = fits_.find(key);
        if (it != fits_.end()) return it->second;
        pf_fit* raw = nullptr;
        check(pf_fit_envelope(&spec, &setup_.fit, &raw), "fit");
        FitPtr p(raw, FitDeleter{});
        fits_[key] = p;
        order_.push_back({spec, p});
        return p;
    }

    json report() const {
        json out = json::array();
        for (const auto& [spec, fit] : order_) {
            const std::string text = fetch_text(
                [&](char* b, std::size_t c, std::size_t* n) { return pf_fit_report_json(fit.get(), &spec, b, c, n); },
                "fit report");
            out.push_back(json::parse(text));
        }
        return out;
    }

private:
    const Setup& setup_;
    std::map<FitKey, FitPtr> fits_;
    std::vector<std::pair<pf_lorentzian, FitPtr>> order_;
};

BathPtr build_bath(const Setup& s, const Lead& l, FitCache& fits) {
    FitPtr fit;
    if (s.fitted() && l.spec.coupling > 0.0) fit = fits.get(l.spec);
    pf_bath* raw = nullptr;
    check(pf_bath_build(&l.spec, &s.construction, fit.get(), l.name.c_str(), l.spin.empty() ? nullptr : l.spin.c_str(), &raw),
          "bath for lead '" + l.name + "'");
    return BathPtr(raw);
}

json bath_json(const pf_bath* bath, const Lead& l) {
    std::size_t n = 0;
    check(pf_bath_mode_count(bath, &n), "bath");
    json modes = json::array();
    for (std::size_t i = 0; i < n; ++i) {
        pf_mode m{};
        check(pf_bath_mode(bath, i, &m), "bath mode");
        modes.push_back({{"occupation", cjson(m.occupation)},
                         {"coupling", cjson(m.coupling)},
                         {"coupling_sq", cjson(m.coupling_sq)},
                         {"frequency", cjson(m.frequency)},
                         {"damping", cjson(m.damping)}});
    }
    return {{"lead", l.name}, {"spin", l.spin}, {"modes", modes}};
}

struct Built {
    std::vector<BathPtr> baths;
    ModelPtr model;
    std::vector<std::string> labels;  // system mode labels
    std::vector<std::string> current_leads;
    json description;
    json bath_report = json::array();
};

Built build_model(const Setup& s, const std::vector<Lead>& leads, FitCache& fits) {
    Built b;
    std::vector<const pf_bath*> raw;
    for (const auto& l : leads) {
        b.baths.push_back(build_bath(s, l, fits));
        raw.push_back(b.baths.back().get());
        b.bath_report.push_back(bath_json(raw.back(), l));
    }
    pf_model* m = nullptr;
    if (s.variant == "explicit") {
        std::vector<const char*> keys;
        std::vector<const double*> re, im;
        for (std::size_t i = 0; i < s.coupling_keys.size(); ++i) {
            keys.push_back(s.coupling_keys[i].c_str());
            re.push_back(s.coupling_re[i].data());
            im.push_back(s.coupling_im[i].data());
        }
        check(pf_model_create_explicit(s.explicit_modes, s.h_re.data(), s.h_im.data(), keys.size(), keys.data(), re.data(),
                                       im.data(), raw.data(), raw.size(), &s.engine, &m),
              "model");
    } else {
        check(pf_model_create(&s.system, raw.data(), raw.size(), &s.engine, &m), "model");
    }
    b.model.reset(m);
    b.description = json::parse(fetch_text(
        [&](char* buf, std::size_t c, std::size_t* n) { return pf_model_describe(m, buf, c, n); }, "model description"));
    for (int i = 0; i < s.system_modes(); ++i) {
        b.labels.push_back(fetch_text(
            [&](char* buf, std::size_t c, std::size_t* n) { return pf_model_system_label(m, i, buf, c, n); }, "label"));
    }
    std::vector<std::string> names;
    for (const auto& l : leads) {
        if (std::find(names.begin(), names.end(), l.name) == names.end()) names.push_back(l.name);
    }
    for (const auto& merged : b.description.at("merged_leads")) {
        std::string name = merged.get<std::string>();
        name = name.substr(0, name.find('/'));
        std::size_t start = 0;
        while (start <= name.size()) {
            const std::size_t plus = std::min(name.find('+', start), name.size());
            const std::string part = name.substr(start, plus - start);
            names.erase(std::remove(names.begin(), names.end(), part), names.end());
            start = plus + 1;
        }
        if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(name);
    }
    b.current_leads = names;
    return b;
}

StatePtr initial_state(const Setup& s, const Built& b) {
    const Reader r(s.cfg);
    pf_state* out = nullptr;
    const int k = s.system_modes();
    const long dim = 1L << k;
    int given = 0;
    for (const char* key : {"/initial/occupations", "/initial/density", "/initial/checkpoint"}) given += r.has(key);
    if (given > 1) throw ConfigError("/initial", "set at most one of occupations, density, checkpoint");
    if (r.has("/initial/checkpoint")) {
        const std::string path = r.string("/initial/checkpoint");
        check(pf_state_load(b.model.get(), path.c_str(), &out), "checkpoint '" + path + "'");
        return StatePtr(out);
    }
    std::vector<double> re(std::size_t(dim * dim), 0.0), im(std::size_t(dim * dim), 0.0);
    if (r.has("/initial/density")) {
        r.matrix("/initial/density", dim, re, im);
    } else {
        std::vector<double> n(std::size_t(k), 0.0);
        if (r.has("/initial/occupations")) {
            const json& occ = r.at("/initial/occupations");
            if (!occ.is_array() || long(occ.size()) != k) {
                throw ConfigError("/initial/occupations", "expected " + std::to_string(k) + " occupations");
            }
            for (int i = 0; i < k; ++i) n[std::size_t(i)] = r.probability("/initial/occupations/" + std::to_string(i));
        }
        for (long f = 0; f < dim; ++f) {
            double p = 1.0;
            for (int i = 0; i < k; ++i) p *= (f >> i) & 1 ? n[std::size_t(i)] : 1.0 - n[std::size_t(i)];
            re[std::size_t(f * dim + f)] = p;
        }
    }
    check(pf_state_initial(b.model.get(), re.data(), im.data(), &out), "initial state");
    return StatePtr(out);
}

json steady_json(const pf_steady_report& rep) {
    return {{"method", rep.method},
            {"residual", rep.residual},
            {"generator_norm", rep.generator_norm},
            {"gap_estimate", rep.gap_estimate},
            {"trace_row_norm", rep.trace_row_norm},
            {"iterations", rep.iterations}};
}

json observables_json(const Built& b, const pf_state* st) {
    json occ = json::object(), cur = json::object();
    for (const auto& l : b.labels) {
        double re = 0.0, im = 0.0;
        check(pf_state_occupation(b.model.get(), st, l.c_str(), &re, &im), "occupation");
        occ[l] = json::array({re, im});
    }
    for (const auto& l : b.current_leads) {
        double v = 0.0, im = 0.0;
        check(pf_state_current(b.model.get(), st, l.c_str(), &v, &im), "current");
        cur[l] = {{"value", v}, {"imaginary", im}};
    }
    double tr = 0.0, ti = 0.0;
    check(pf_state_trace(b.model.get(), st, &tr, &ti), "trace");
    return {{"occupations", occ}, {"currents", cur}, {"trace", json::array({tr, ti})}};
}

std::vector<double> linear(double a, double b, long n) {
    std::vector<double> g(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) g[std::size_t(i)] = n == 1 ? a : a + (b - a) * double(i) / double(n - 1);
    if (n > 1) g.back() = b;
    return g;
}

const char* kTimeUnits = "t in 1/E; energies in E, the energy unit of the config";

// ---- commands ---------------------------------------------------------------------------

struct Run {
    Setup setup;
    Output out;
    json manifest;
};

std::vector<Lead> distinct_leads(const Setup& s) {
    std::vector<Lead> out;
    for (const auto& l : s.leads) {
        if (out.empty() || out.back().index != l.index) out.push_back(l);
    }
    return out;
}

int cmd_decompose(Run& run) {
    const Setup& s = run.setup;
    const Reader r(s.cfg);
    const int terms = r.has("/solver/decompose/terms") ? int(r.integer("/solver/decompose/terms", 0, 100000))
                                                      : s.construction.terms;
    const std::vector<double> t = r.grid("/solver/times", "start", "stop");
    FitCache fits(s);
    json report = json::array();
    for (const Lead& l : distinct_leads(s)) {
        BathPtr bath = build_bath(s, l, fits);
        for (int sigma : {+1, -1}) {
            const std::string tag = file_tag(l.name) + (sigma > 0 ? "_plus" : "_minus");
            std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> series;
            const std::vector<std::pair<std::string, pf_correlation_method>> methods = {
                {"quadrature", PF_CORR_QUADRATURE}, {"resonant", PF_CORR_RESONANT},   {"matsubara", PF_CORR_MATSUBARA},
                {"decomposed", PF_CORR_DECOMPOSED}, {"resummed", PF_CORR_RESUMMED}};
            std::vector<double> abs_err(t.size());
            for (const auto& [name, method] : methods) {
                std::vector<double> re(t.size()), im(t.size());
                const int k = method == PF_CORR_MATSUBARA && terms == 0 ? -1 : terms;
                if (k < 0) {
                    std::fill(re.begin(), re.end(), 0.0);
                    std::fill(im.begin(), im.end(), 0.0);
                } else {
                    check(pf_correlation(&l.spec, sigma, method, k, t.data(), t.size(), re.data(), im.data(),
                                         method == PF_CORR_QUADRATURE ? abs_err.data() : nullptr),
                          name + " correlation");
                }
                series[name] = {re, im};
                run.out.write_csv("correlation_" + tag + "_" + name + ".csv", kTimeUnits, {"t", "re", "im"}, {t, re, im});
            }
            std::vector<double> re(t.size()), im(t.size());
            check(pf_bath_correlation(bath.get(), sigma, t.data(), t.size(), re.data(), im.data()), "bath correlation");
            series["pseudo_fermion"] = {re, im};
            run.out.write_csv("correlation_" + tag + "_pseudo_fermion.csv", kTimeUnits, {"t", "re", "im"}, {t, re, im});

            json dev = json::object();
            const auto& q = series["quadrature"];
            for (const auto& [name, v] : series) {
                if (name == "quadrature" || name == "resonant" || name == "matsubara") continue;
                double d = 0.0;
                for (std::size_t i = 0; i < t.size(); ++i) {
                    d = std::max(d, std::hypot(v.first[i] - q.first[i], v.second[i] - q.second[i]));
                }
                dev[name] = d;
            }
            report.push_back({{"lead", l.name},
                              {"sigma", sigma},
                              {"terms", terms},
                              {"quadrature_abs_error", *std::max_element(abs_err.begin(), abs_err.end())},
                              {"sup_deviation_from_quadrature", dev}});
        }
    }
    run.out.write_text("decompose.json", report.dump(2) + "\n");
    run.manifest["results"] = report;
    run.manifest["fits"] = fits.report();
    return 0;
}

int cmd_fit(Run& run) {
    const Setup& s = run.setup;
    json reports = json::array();
    for (const Lead& l : distinct_leads(s)) {
        pf_fit* raw = nullptr;
        check(pf_fit_envelope(&l.spec, &s.fit, &raw), "fit for lead '" + l.name + "'");
        std::unique_ptr<pf_fit, FitDeleter> fit(raw);
        const json j = json::parse(fetch_text(
            [&](char* b, std::size_t c, std::size_t* n) { return pf_fit_report_json(raw, &l.spec, b, c, n); }, "fit report"));
        run.out.write_text("fit_" + file_tag(l.name) + ".json", j.dump(2) + "\n");
        reports.push_back({{"lead", l.name}, {"report", j}});
    }
    run.manifest["results"] = reports;
    return 0;
}

int cmd_validate(Run& run) {
    const Setup& s = run.setup;
    const Reader r(s.cfg);
    const double tol = r.positive("/solver/validate/tolerance");
    const double tmax = r.positive("/solver/validate/t_max");
    const long n = r.integer("/solver/validate/points", 2, 100000000);
    const std::vector<double> grid = linear(0.0, tmax, n);
    FitCache fits(s);
    json results = json::array();
    bool ok = true;
    for (const Lead& l : distinct_leads(s)) {
        BathPtr bath = build_bath(s, l, fits);
        double plus = 0.0, minus = 0.0;
        int passed = 0;
        check(pf_bath_validate(bath.get(), grid.data(), grid.size(), tol, &plus, &minus, &passed), "validate");
        ok = ok && passed;
        results.push_back({{"lead", l.name},
                           {"map", pf_map_kind_name(s.construction.kind)},
                           {"tolerance", tol},
                           {"max_deviation_plus", plus},
                           {"max_deviation_minus", minus},
                           {"passed", bool(passed)}});
        std::cout << l.name << ": " << (passed ? "PASS" : "FAIL") << " sup|dC+|=" << fmt(plus)
                  << " sup|dC-|=" << fmt(minus) << "\n";
    }
    run.out.write_text("validate.json", results.dump(2) + "\n");
    run.manifest["results"] = results;
    run.manifest["fits"] = fits.report();
    return ok ? 0 : 3;
}

void checkpoint(Run& run, const Built& b, const pf_state* st) {
    if (!Reader(run.setup.cfg).boolean("/output/checkpoint")) return;
    check(pf_state_save(b.model.get(), st, run.out.path("state.txt").c_str()), "checkpoint");
}

int cmd_evolve(Run& run) {
    const Setup& s = run.setup;
    const Reader r(s.cfg);
    const std::vector<double> t = r.grid("/solver/times", "start", "stop");
    FitCache fits(s);
    Built b = build_model(s, s.leads, fits);
    StatePtr init = initial_state(s, b);
    std::vector<const char*> occ, leads;
    for (const auto& l : b.labels) occ.push_back(l.c_str());
    for (const auto& l : b.current_leads) leads.push_back(l.c_str());
    const std::size_t n = t.size();
    std::vector<double> occ_re(n * occ.size()), occ_im(n * occ.size()), cur(n * leads.size()), tr(n), ti(n);
    pf_state* fin = nullptr;
    pf_propagation_report rep{};
    check(pf_evolve(b.model.get(), init.get(), t.data(), n, occ.data(), occ.size(), leads.data(), leads.size(),
                    &s.propagation, occ_re.data(), occ_im.data(), cur.data(), tr.data(), ti.data(), &fin, &rep),
          "evolve");
    StatePtr final_state(fin);

    std::vector<std::string> header{"t"};
    std::vector<std::vector<double>> cols{t};
    double occ_imag = 0.0;
    for (std::size_t k = 0; k < occ.size(); ++k) {
        header.push_back("n_" + b.labels[k]);
        std::vector<double> c(n);
        for (std::size_t i = 0; i < n; ++i) {
            c[i] = occ_re[i * occ.size() + k];
            occ_imag = std::max(occ_imag, std::abs(occ_im[i * occ.size() + k]));
        }
        cols.push_back(c);
    }
    for (std::size_t k = 0; k < leads.size(); ++k) {
        header.push_back("I_" + b.current_leads[k]);
        std::vector<double> c(n);
        for (std::size_t i = 0; i < n; ++i) c[i] = cur[i * leads.size() + k];
        cols.push_back(c);
    }
    header.push_back("trace");
    cols.push_back(tr);
    run.out.write_csv("trajectory.csv", std::string(kTimeUnits) + "; currents in E (particles per unit time)", header,
                      cols);
    checkpoint(run, b, final_state.get());
    run.manifest["baths"] = b.bath_report;
    run.manifest["fits"] = fits.report();
    run.manifest["model"] = b.description;
    run.manifest["results"] = {{"steps", rep.steps},
                               {"rejected", rep.rejected},
                               {"max_trace_deviation", rep.max_trace_deviation},
                               {"max_occupation_imaginary", occ_imag},
                               {"final", observables_json(b, final_state.get())}};
    return 0;
}

int cmd_steady(Run& run) {
    const Setup& s = run.setup;
    FitCache fits(s);
    Built b = build_model(s, s.leads, fits);
    pf_state* raw = nullptr;
    pf_steady_report rep{};
    check(pf_state_steady(b.model.get(), &s.steady, &raw, &rep), "steady state");
    StatePtr st(raw);
    json result = {{"solver", steady_json(rep)}, {"observables", observables_json(b, st.get())}};
    run.out.write_text("steady.json", result.dump(2) + "\n");
    checkpoint(run, b, st.get());
    run.manifest["baths"] = b.bath_report;
    run.manifest["fits"] = fits.report();
    run.manifest["model"] = b.description;
    run.manifest["results"] = result;
    return 0;
}

int cmd_sweep(Run& run) {
    const Setup& s = run.setup;
    const Reader r(s.cfg);
    const json& leads_cfg = r.at("/leads");
    if (leads_cfg.size() != 2) throw ConfigError("/leads", "sweep-current needs exactly two leads");
    const double lo = r.number("/solver/sweep/dmu_min"), hi = r.number("/solver/sweep/dmu_max");
    const long points = r.integer("/solver/sweep/points", 1, 100000000);
    if (points > 1 && !(hi > lo)) throw ConfigError("/solver/sweep/dmu_max", "must exceed dmu_min");
    const double centre = r.number("/solver/sweep/mu_center");
    long threads = r.integer("/solver/sweep/threads", 0, 4096);
    if (threads == 0) threads = std::max(1L, long(std::thread::hardware_concurrency()));
    const bool oracle = r.boolean("/solver/sweep/oracle");
    if (oracle && s.variant != "single-level") throw ConfigError("/solver/sweep/oracle", "the oracle covers the single level only");
    const std::vector<double> dmu = linear(lo, hi, points);
    const std::string name_l = leads_cfg[0].at("name").get<std::string>(), name_r = leads_cfg[1].at("name").get<std::string>();

    FitCache fits(s);
    for (const auto& l : s.leads) {
        if (s.fitted() && l.spec.coupling > 0.0) fits.get(l.spec);
    }

    const std::size_t n = dmu.size();
    std::vector<double> il(n, std::nan("")), ir(n, std::nan(""));
    std::vector<json> solver(n);
    std::vector<std::string> errors(n);
    std::vector<pf_status> codes(n, PF_OK);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                std::vector<Lead> leads = s.leads;
                for (auto& l : leads) l.spec.mu = centre + (l.index == 0 ? 0.5 : -0.5) * dmu[i];
                Built b = build_model(s, leads, fits);
                pf_state* raw = nullptr;
                pf_steady_report rep{};
                check(pf_state_steady(b.model.get(), &s.steady, &raw, &rep), "steady state");
                StatePtr st(raw);
                double v = 0.0, im = 0.0;
                check(pf_state_current(b.model.get(), st.get(), name_l.c_str(), &v, &im), "current");
                il[i] = v;
                check(pf_state_current(b.model.get(), st.get(), name_r.c_str(), &v, &im), "current");
                ir[i] = v;
                solver[i] = steady_json(rep);
            } catch (const PfError& e) {
                codes[i] = e.status();
                errors[i] = e.what();
            } catch (const std::exception& e) {
                codes[i] = PF_ERR_INTERNAL;
                errors[i] = e.what();
            }
        }
    };
    std::vector<std::thread> pool;
    for (long k = 1; k < std::min<long>(threads, long(n)); ++k) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    const std::string units = "dmu in E; currents in E (particles per unit time), positive into the lead";
    run.out.write_csv("sweep.csv", units, {"dmu", "I_L", "I_R"}, {dmu, il, ir});
    json points_json = json::array();
    int code = 0;
    for (std::size_t i = 0; i < n; ++i) {
        json p = {{"dmu", dmu[i]}, {"I_L", il[i]}, {"I_R", ir[i]}};
        if (codes[i] != PF_OK) {
            p["error"] = {{"status", pf_status_name(codes[i])}, {"message", errors[i]}};
            std::cerr << "sweep point " << i << " (dmu=" << fmt(dmu[i]) << ") failed: " << errors[i] << "\n";
            code = std::max(code, exit_code(codes[i]) == 2 ? 2 : 3);
        } else {
            p["solver"] = solver[i];
        }
        points_json.push_back(p);
    }
    if (oracle) {
        std::vector<double> ol(n), orr(n);
        for (std::size_t i = 0; i < n; ++i) {
            pf_lorentzian two[2] = {s.leads[0].spec, s.leads[1].spec};
            two[0].mu = centre + 0.5 * dmu[i];
            two[1].mu = centre - 0.5 * dmu[i];
            check(pf_oracle_level_current(s.system.epsilon, two, 0, &ol[i]), "oracle");
            check(pf_oracle_level_current(s.system.epsilon, two, 1, &orr[i]), "oracle");
        }
        run.out.write_csv("sweep_oracle.csv", units, {"dmu", "I_L", "I_R"}, {dmu, ol, orr});
    }
    run.manifest["fits"] = fits.report();
    run.manifest["results"] = {{"lead_L", name_l}, {"lead_R", name_r}, {"points", points_json}};
    return code;
}

int cmd_spectrum(Run& run) {
    const Setup& s = run.setup;
    const Reader r(s.cfg);
    const std::vector<double> omega = r.grid("/solver/omega", "min", "max");
    pf_spectrum_options o;
    pf_spectrum_options_default(&o);
    o.t_max = r.positive("/solver/spectrum/t_max");
    o.dt = r.positive("/solver/spectrum/dt");
    o.eta = r.non_negative("/solver/spectrum/eta");
    o.decay_threshold = r.positive("/solver/spectrum/decay_threshold");
    o.check_reality = r.boolean("/solver/spectrum/check_reality") ? 1 : 0;
    o.propagation = s.propagation;
    const double prominence = r.non_negative("/solver/spectrum/peak_prominence");

    FitCache fits(s);
    Built b = build_model(s, s.leads, fits);
    std::vector<std::string> labels = b.labels;
    if (r.has("/solver/spectrum/labels")) {
        const json& ls = r.at("/solver/spectrum/labels");
        if (!ls.is_array() || ls.empty()) throw ConfigError("/solver/spectrum/labels", "expected a non-empty array of labels");
        labels.clear();
        for (std::size_t i = 0; i < ls.size(); ++i) {
            const std::string p = "/solver/spectrum/labels/" + std::to_string(i);
            const std::string l = r.string(p);
            if (std::find(b.labels.begin(), b.labels.end(), l) == b.labels.end()) {
                throw ConfigError(p, "'" + l + "' is not a system mode label");
            }
            labels.push_back(l);
        }
    }
    StatePtr st;
    json solver;
    if (r.has("/initial/checkpoint")) {
        st = initial_state(s, b);
    } else {
        pf_state* raw = nullptr;
        pf_steady_report rep{};
        check(pf_state_steady(b.model.get(), &s.steady, &raw, &rep), "steady state");
        st.reset(raw);
        solver = steady_json(rep);
    }

    json results = json::array();
    for (const auto& label : labels) {
        pf_spectrum* raw = nullptr;
        check(pf_spectrum_compute(b.model.get(), st.get(), label.c_str(), omega.data(), omega.size(), &o, &raw),
              "spectrum of '" + label + "'");
        SpectrumPtr sp(raw);
        pf_spectrum_report rep{};
        check(pf_spectrum_report_get(raw, &rep), "spectrum report");
        std::vector<double> a(omega.size()), ai(omega.size());
        check(pf_spectrum_values(raw, a.data(), ai.data()), "spectrum values");
        const std::size_t m = rep.time_points;
        std::vector<double> t(m), pr(m), pi(m), hr(m), hi(m);
        check(pf_spectrum_correlations(raw, t.data(), pr.data(), pi.data(), hr.data(), hi.data()), "spectrum correlations");
        const std::string tag = file_tag(label);
        run.out.write_csv("spectrum_" + tag + ".csv", "omega in E; A in 1/E", {"omega", "A"}, {omega, a});
        run.out.write_csv("spectrum_" + tag + "_correlations.csv",
                          "t in 1/E; dimensionless; C1 = <{s(t), s^dag}>, C2 = <{s^dag(t), s}>",
                          {"t", "C1_re", "C1_im", "C2_re", "C2_im"}, {t, pr, pi, hr, hi});
        std::vector<std::size_t> idx(omega.size());
        std::size_t count = idx.size();
        check(pf_local_maxima(a.data(), a.size(), prominence, idx.data(), &count), "peaks");
        json peaks = json::array();
        for (std::size_t k = 0; k < count; ++k) peaks.push_back({{"omega", omega[idx[k]]}, {"A", a[idx[k]]}});
        double imag = 0.0;
        for (double v : ai) imag = std::max(imag, std::abs(v));
        results.push_back({{"label", label},
                           {"sum_rule", rep.sum_rule},
                           {"tail_ratio", rep.tail_ratio},
                           {"reality", rep.reality},
                           {"eta", rep.eta},
                           {"time_points", rep.time_points},
                           {"max_imaginary", imag},
                           {"peaks", peaks}});
    }
    run.manifest["baths"] = b.bath_report;
    run.manifest["fits"] = fits.report();
    run.manifest["model"] = b.description;
    run.manifest["results"] = {{"steady_state", solver}, {"spectra", results}};
    return 0;
}

struct Flags {
    std::string config;
    std::vector<std::string> sets;
    std::string output, prefix, integrator, map;
    long seed = -1, threads = -1;
};

void add_flags(CLI::App* sub, Flags& f) {
    sub->add_option("-c,--config", f.config, "JSON config file");
    sub->add_option("--set", f.sets, "override a field: /json/pointer=value (repeatable)");
    sub->add_option("--output", f.output, "output directory");
    sub->add_option("--prefix", f.prefix, "output file prefix");
    sub->add_option("--seed", f.seed, "fit seed");
    sub->add_option("--threads", f.threads, "sweep worker threads (0: all cores)");
    sub->add_option("--integrator", f.integrator, "dopri5 or krylov");
    sub->add_option("--map", f.map, "resonant, exact-two, exact-four, fitted-two or fitted-four");
}

json configure(const Flags& f) {
    json user = f.config.empty() ? json::object() : pfcli::load_config_file(f.config);
    json cfg = pfcli::resolve_config(user);
    for (const auto& a : f.sets) pfcli::apply_assignment(cfg, a);
    if (!f.output.empty()) cfg["output"]["directory"] = f.output;
    if (!f.prefix.empty()) cfg["output"]["prefix"] = f.prefix;
    if (f.seed >= 0) cfg["construction"]["fit"]["seed"] = f.seed;
    if (f.threads >= 0) cfg["solver"]["sweep"]["threads"] = f.threads;
    if (!f.integrator.empty()) cfg["solver"]["integrator"] = f.integrator;
    if (!f.map.empty()) cfg["construction"]["map"] = f.map;
    return pfcli::resolve_config(cfg);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Pseudo-fermion open-system engine"};
    app.require_subcommand(1);
    Flags flags;
    using Handler = int (*)(Run&);
    const std::vector<std::tuple<std::string, std::string, Handler>> commands = {
        {"decompose", "bath correlation functions: quadrature, resonant, Matsubara, pseudo-fermion", cmd_decompose},
        {"fit", "Matsubara envelope fit per lead", cmd_fit},
        {"validate", "check pseudo-fermion correlations against quadrature", cmd_validate},
        {"evolve", "time evolution of occupations and currents", cmd_evolve},
        {"steady", "steady state, occupations and currents", cmd_steady},
        {"sweep-current", "steady-state current versus bias", cmd_sweep},
        {"spectrum", "spectral function of the system modes", cmd_spectrum}};
    for (const auto& [name, help, _] : commands) add_flags(app.add_subcommand(name, help), flags);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    std::string command;
    Handler handler = nullptr;
    for (const auto& [name, help, h] : commands) {
        if (app.got_subcommand(name)) {
            command = name;
            handler = h;
        }
    }
    try {
        const json cfg = configure(flags);
        const Reader r(cfg);
        Run run{read_setup(cfg, command), Output(r.string("/output/directory"), r.string("/output/prefix")), json::object()};
        run.manifest["program"] = "pfermion";
        run.manifest["version"] = pf_version();
        run.manifest["command"] = command;
        run.manifest["config"] = cfg;
        const int rc = handler(run);
        run.manifest["outputs"] = run.out.files();
        run.manifest["exit_code"] = rc;
        const std::string path = run.out.path("manifest.json");
        std::ofstream m(path, std::ios::binary);
        m << run.manifest.dump(2) << "\n";
        if (!m) throw PfError(PF_ERR_IO, "cannot write " + path);
        return rc;
    } catch (const ConfigError& e) {
        std::cerr << "config error at " << e.location() << ": " << e.what() << "\n";
        return 2;
    } catch (const PfError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e.status());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
