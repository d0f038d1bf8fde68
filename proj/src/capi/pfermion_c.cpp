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

#include "pfermion/pfermion.h"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bath_correlations.hpp"
#include "error.hpp"
#include "fit.hpp"
#include "lindblad_engine.hpp"
#include "observables.hpp"
#include "oracles.hpp"
#include "pf_model.hpp"

using namespace pfermion;

struct pf_fit {
    FitReport report;
};

struct pf_bath {
    PseudoFermionBath bath;
};

struct pf_model {
    AugmentedModel model;
};

struct pf_state {
    AugmentedState state;
};

struct pf_spectrum {
    SpectrumTable table;
};

namespace {

thread_local std::string t_error;
thread_local double t_value = 0.0;

pf_status set_error(pf_status code, const std::string& what, double value = 0.0) {
    t_error = what;
    t_value = value;
    return code;
}

pf_status to_status(ErrorCode c) {
    return static_cast<pf_status>(static_cast<int>(c));
}

template <class F>
pf_status guard(F&& f) {
    try {
        f();
        t_error.clear();
        t_value = 0.0;
        return PF_OK;
    } catch (const Error& e) {
        return set_error(to_status(e.code()), e.what(), e.achieved());
    } catch (const std::bad_alloc&) {
        return set_error(PF_ERR_OUT_OF_MEMORY, "out of memory");
    } catch (const std::exception& e) {
        return set_error(PF_ERR_INTERNAL, e.what());
    } catch (...) {
        return set_error(PF_ERR_INTERNAL, "unknown failure");
    }
}

void need(const void* p, const char* name) {
    if (!p) fail(ErrorCode::InvalidArgument, std::string(name) + " must not be NULL");
}

LorentzianBathSpec to_spec(const pf_lorentzian* s) {
    need(s, "spec");
    LorentzianBathSpec out{s->coupling, s->width, s->mu, s->beta};
    out.validate();
    return out;
}

std::vector<double> to_vector(const double* p, std::size_t n, const char* name) {
    if (n > 0) need(p, name);
    return std::vector<double>(p, p + n);
}

void check_state(const pf_model* m, const pf_state* s) {
    need(m, "model");
    need(s, "state");
    const auto d = Eigen::Index(m->model.space().sector_dimension());
    if (s->state.even.size() != d || (s->state.odd.size() != 0 && s->state.odd.size() != d)) {
        fail(ErrorCode::DimensionMismatch, "state does not belong to this model");
    }
}

pf_status buffer_guard(const std::string* text, char* buffer, std::size_t capacity, std::size_t* needed) {
    if (needed) *needed = text->size() + 1;
    if (!buffer) {
        if (!needed) return set_error(PF_ERR_INVALID_ARGUMENT, "buffer and needed must not both be NULL");
        return PF_OK;
    }
    if (capacity < text->size() + 1) return set_error(PF_ERR_BUFFER_TOO_SMALL, "buffer too small");
    std::memcpy(buffer, text->c_str(), text->size() + 1);
    return PF_OK;
}

DenseMatrix row_major(const double* re, const double* im, Eigen::Index dim) {
    need(re, "real part");
    DenseMatrix m(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
        for (Eigen::Index j = 0; j < dim; ++j) {
            m(i, j) = cplx(re[i * dim + j], im ? im[i * dim + j] : 0.0);
        }
    }
    return m;
}

PropagationOptions to_propagation(const pf_propagation_options* o) {
    PropagationOptions p;
    if (!o) return p;
    p.integrator = o->integrator == PF_INTEGRATOR_KRYLOV ? Integrator::Krylov : Integrator::DormandPrince;
    p.rtol = o->rtol;
    p.atol = o->atol;
    p.min_step = o->min_step;
    p.max_steps = o->max_steps;
    p.krylov_dimension = o->krylov_dimension;
    if (!(p.rtol > 0.0) || !(p.atol > 0.0) || !(p.min_step > 0.0) || p.max_steps < 1 || p.krylov_dimension < 2) {
        fail(ErrorCode::InvalidArgument, "propagation options need positive tolerances, steps and Krylov dimension");
    }
    return p;
}

std::vector<PseudoFermionBath> collect(const pf_bath* const* baths, std::size_t n) {
    if (n > 0) need(baths, "baths");
    std::vector<PseudoFermionBath> out;
    for (std::size_t i = 0; i < n; ++i) {
        need(baths[i], "bath");
        out.push_back(baths[i]->bath);
    }
    return out;
}

EngineOptions to_engine(const pf_engine_options* o) {
    EngineOptions e;
    if (o) {
        e.mode_cap = o->mode_cap;
        e.merge_identical_leads = o->merge_identical_leads != 0;
    }
    return e;
}

std::string fmt(double v) {
    char b[40];
    std::snprintf(b, sizeof b, "%.17g", v);
    return b;
}

}  // namespace

extern "C" {

const char* pf_version(void) { return "0.1.0"; }

const char* pf_status_name(pf_status status) {
    switch (status) {
        case PF_OK: return "ok";
        case PF_ERR_BUFFER_TOO_SMALL: return "buffer_too_small";
        case PF_ERR_OUT_OF_MEMORY: return "out_of_memory";
        case PF_ERR_INTERNAL: return "internal";
        default: break;
    }
    const int c = static_cast<int>(status);
    if (c >= 1 && c <= 16) return error_code_name(static_cast<ErrorCode>(c));
    return "unknown";
}

const char* pf_last_error(void) { return t_error.c_str(); }

double pf_last_error_value(void) { return t_value; }

pf_status pf_correlation(const pf_lorentzian* spec, int sigma, pf_correlation_method method, int terms,
                         const double* times, size_t count, double* re, double* im, double* abs_error) {
    return guard([&] {
        const LorentzianBathSpec s = to_spec(spec);
        if (sigma != 1 && sigma != -1) fail(ErrorCode::InvalidArgument, "sigma must be +1 or -1");
        if (terms < 0) fail(ErrorCode::InvalidArgument, "number of Matsubara terms must be non-negative");
        const auto t = to_vector(times, count, "times");
        if (count > 0) {
            need(re, "re");
            need(im, "im");
        }
        for (std::size_t i = 0; i < count; ++i) {
            cplx v;
            double err = 0.0;
            switch (method) {
                case PF_CORR_QUADRATURE: {
                    const QuadratureResult q = correlation_quadrature(sigma, t[i], s);
                    v = q.value;
                    err = q.abs_error;
                    break;
                }
                case PF_CORR_DECOMPOSED: v = correlation_decomposed(sigma, t[i], s, terms); break;
                case PF_CORR_RESUMMED: v = correlation_resummed(sigma, t[i], s); break;
                case PF_CORR_RESONANT: v = resonant_correlation(sigma, t[i], s); break;
                case PF_CORR_MATSUBARA:
                    v = terms > 0 ? correlation_decomposed(sigma, t[i], s, terms) - resonant_correlation(sigma, t[i], s)
                                  : correlation_resummed(sigma, t[i], s) - resonant_correlation(sigma, t[i], s);
                    break;
                default: fail(ErrorCode::InvalidArgument, "unknown correlation method");
            }
            re[i] = v.real();
            im[i] = v.imag();
            if (abs_error) abs_error[i] = err;
        }
    });
}

void pf_fit_options_default(pf_fit_options* options) {
    if (!options) return;
    const FitOptions d;
    options->terms = d.terms;
    options->restarts = d.restarts;
    options->seed = d.seed;
    options->reference_terms = d.reference_terms;
    options->max_iterations = d.max_iterations;
    options->tolerance = d.tolerance;
    options->grid = nullptr;
    options->grid_size = 0;
}

pf_status pf_fit_envelope(const pf_lorentzian* spec, const pf_fit_options* options, pf_fit** out) {
    return guard([&] {
        need(out, "out");
        *out = nullptr;
        const LorentzianBathSpec s = to_spec(spec);
        FitOptions o;
        if (options) {
            o.terms = options->terms;
            o.restarts = options->restarts;
            o.seed = options->seed;
            o.reference_terms = options->reference_terms;
            o.max_iterations = options->max_iterations;
            o.tolerance = options->tolerance;
            o.grid = to_vector(options->grid, options->grid_size, "grid");
        }
        *out = new pf_fit{fit_matsubara_envelope(s, o)};
    });
}

pf_status pf_fit_from_terms(const double* amp_re, const double* amp_im, const double* width, const double* rate,
                            size_t count, pf_fit** out) {
    return guard([&] {
        need(out, "out");
        *out = nullptr;
        if (count > 0) {
            need(amp_re, "amp_re");
            need(amp_im, "amp_im");
            need(width, "width");
            need(rate, "rate");
        }
        FitReport r;
        for (std::size_t i = 0; i < count; ++i) {
            FitTerm t{cplx(amp_re[i], amp_im[i]), width[i], rate[i]};
            t.validate();
            r.terms.push_back(t);
        }
        r.converged = true;
        *out = new pf_fit{r};
    });
}

pf_status pf_fit_summary(const pf_fit* fit, double* residual_l2, double* residual_sup, int* converged, size_t* terms) {
    return guard([&] {
        need(fit, "fit");
        if (residual_l2) *residual_l2 = fit->report.residual_l2;
        if (residual_sup) *residual_sup = fit->report.residual_sup;
        if (converged) *converged = fit->report.converged ? 1 : 0;
        if (terms) *terms = fit->report.terms.size();
    });
}

pf_status pf_fit_term(const pf_fit* fit, size_t index, double* amp_re, double* amp_im, double* width, double* rate) {
    return guard([&] {
        need(fit, "fit");
        if (index >= fit->report.terms.size()) fail(ErrorCode::IndexOutOfRange, "fit term index out of range");
        const FitTerm& t = fit->report.terms[index];
        if (amp_re) *amp_re = t.amplitude.real();
        if (amp_im) *amp_im = t.amplitude.imag();
        if (width) *width = t.width;
        if (rate) *rate = t.rate;
    });
}

pf_status pf_fit_report_json(const pf_fit* fit, const pf_lorentzian* spec, char* buffer, size_t capacity,
                             size_t* needed) {
    std::string text;
    const pf_status st = guard([&] {
        need(fit, "fit");
        text = to_json(fit->report, to_spec(spec));
    });
    return st != PF_OK ? st : buffer_guard(&text, buffer, capacity, needed);
}

void pf_fit_free(pf_fit* fit) { delete fit; }

void pf_construction_default(pf_construction* c) {
    if (!c) return;
    const BathConstruction d;
    c->kind = static_cast<pf_map_kind>(static_cast<int>(d.kind));
    c->terms = d.terms;
    c->delta_re = d.delta.real();
    c->delta_im = d.delta.imag();
    c->delta_min = d.delta_min;
}

pf_status pf_map_kind_parse(const char* name, pf_map_kind* out) {
    return guard([&] {
        need(name, "name");
        need(out, "out");
        *out = static_cast<pf_map_kind>(static_cast<int>(parse_map_kind(name)));
    });
}

const char* pf_map_kind_name(pf_map_kind kind) { return map_kind_name(static_cast<MapKind>(static_cast<int>(kind))); }

pf_status pf_bath_build(const pf_lorentzian* spec, const pf_construction* construction, const pf_fit* fit,
                        const char* lead, const char* spin, pf_bath** out) {
    return guard([&] {
        need(out, "out");
        *out = nullptr;
        need(construction, "construction");
        const LorentzianBathSpec s = to_spec(spec);
        if (construction->kind < PF_MAP_RESONANT || construction->kind > PF_MAP_FITTED_FOUR) {
            fail(ErrorCode::InvalidArgument, "unknown map kind");
        }
        BathConstruction c;
        c.kind = static_cast<MapKind>(static_cast<int>(construction->kind));
        c.terms = construction->terms;
        c.delta = cplx(construction->delta_re, construction->delta_im);
        c.delta_min = construction->delta_min;
        const std::vector<FitTerm> terms = fit ? fit->report.terms : std::vector<FitTerm>{};
        *out = new pf_bath{build_bath(s, c, terms, lead ? lead : "", spin ? spin : "")};
    });
}

pf_status pf_bath_mode_count(const pf_bath* bath, size_t* count) {
    return guard([&] {
        need(bath, "bath");
        need(count, "count");
        *count = bath->bath.modes.size();
    });
}

pf_status pf_bath_mode(const pf_bath* bath, size_t index, pf_mode* mode) {
    return guard([&] {
        need(bath, "bath");
        need(mode, "mode");
        if (index >= bath->bath.modes.size()) fail(ErrorCode::IndexOutOfRange, "mode index out of range");
        const auto& m = bath->bath.modes[index];
        auto put = [](double* d, cplx v) {
            d[0] = v.real();
            d[1] = v.imag();
        };
        put(mode->occupation, m.occupation);
        put(mode->coupling, m.coupling);
        put(mode->coupling_sq, m.coupling_sq);
        put(mode->frequency, m.frequency);
        put(mode->damping, m.damping);
    });
}

pf_status pf_bath_correlation(const pf_bath* bath, int sigma, const double* times, size_t count, double* re,
                              double* im) {
    return guard([&] {
        need(bath, "bath");
        if (sigma != 1 && sigma != -1) fail(ErrorCode::InvalidArgument, "sigma must be +1 or -1");
        const auto t = to_vector(times, count, "times");
        if (count > 0) {
            need(re, "re");
            need(im, "im");
        }
        for (std::size_t i = 0; i < count; ++i) {
            const cplx v = pf_bath_correlation(bath->bath, sigma, t[i]);
            re[i] = v.real();
            im[i] = v.imag();
        }
    });
}

pf_status pf_bath_validate(const pf_bath* bath, const double* grid, size_t count, double tolerance, double* max_plus,
                           double* max_minus, int* passed) {
    return guard([&] {
        need(bath, "bath");
        const ValidationReport r =
            validate_bath(bath->bath, bath->bath.spec, to_vector(grid, count, "grid"), {1, -1}, tolerance);
        if (max_plus) *max_plus = r.max_deviation.at(0);
        if (max_minus) *max_minus = r.max_deviation.at(1);
        if (passed) *passed = r.passed ? 1 : 0;
    });
}

pf_status pf_bath_serialize(const pf_bath* bath, char* buffer, size_t capacity, size_t* needed) {
    std::string text;
    const pf_status st = guard([&] {
        need(bath, "bath");
        text = serialize_bath(bath->bath);
    });
    return st != PF_OK ? st : buffer_guard(&text, buffer, capacity, needed);
}

pf_status pf_bath_parse(const char* text, pf_bath** out) {
    return guard([&] {
        need(text, "text");
        need(out, "out");
        *out = nullptr;
        *out = new pf_bath{parse_bath(text)};
    });
}

void pf_bath_free(pf_bath* bath) { delete bath; }

void pf_engine_options_default(pf_engine_options* options) {
    if (!options) return;
    const EngineOptions d;
    options->mode_cap = d.mode_cap;
    options->merge_identical_leads = d.merge_identical_leads ? 1 : 0;
}

pf_status pf_model_create(const pf_system* system, const pf_bath* const* baths, size_t bath_count,
                          const pf_engine_options* options, pf_model** out) {
    return guard([&] {
        need(out, "out");
        *out = nullptr;
        need(system, "system");
        SystemSpec s;
        switch (system->kind) {
            case PF_SYSTEM_SINGLE_LEVEL: s = SystemSpec::single_level(system->epsilon); break;
            case PF_SYSTEM_ANDERSON: s = SystemSpec::anderson(system->epsilon, system->interaction); break;
            default: fail(ErrorCode::InvalidArgument, "unknown system kind");
        }
        *out = new pf_model{AugmentedModel(s, collect(baths, bath_count), to_engine(options))};
    });
}

pf_status pf_model_create_explicit(int modes, const double* h_re, const double* h_im, size_t coupling_count,
                                   const char* const* coupling_keys, const double* const* coupling_re,
                                   const double* const* coupling_im, const pf_bath* const* baths, size_t bath_count,
                                   const pf_engine_options* options, pf_model** out) {
    return guard([&] {
        need(out, "out");
        *out = nullptr;
        if (modes < 1 || modes > 10) fail(ErrorCode::InvalidArgument, "explicit system needs 1..10 modes");
        const Eigen::Index dim = Eigen::Index(1) << modes;
        std::map<std::string, DenseMatrix> couplings;
        if (coupling_count > 0) {
            need(coupling_keys, "coupling_keys");
            need(coupling_re, "coupling_re");
        }
        for (std::size_t i = 0; i < coupling_count; ++i) {
            need(coupling_keys[i], "coupling key");
            couplings[coupling_keys[i]] = row_major(coupling_re[i], coupling_im ? coupling_im[i] : nullptr, dim);
        }
        const SystemSpec s = SystemSpec::explicit_system(row_major(h_re, h_im, dim), couplings);
        *out = new pf_model{AugmentedModel(s, collect(baths, bath_count), to_engine(options))};
    });
}

pf_status pf_model_dimensions(const pf_model* model, int* modes, int* system_modes, size_t* sector_dimension) {
    return guard([&] {
        need(model, "model");
        if (modes) *modes = model->model.modes();
        if (system_modes) *system_modes = model->model.system_modes();
        if (sector_dimension) *sector_dimension = model->model.space().sector_dimension();
    });
}

pf_status pf_model_describe(const pf_model* model, char* buffer, size_t capacity, size_t* needed) {
    std::string text;
    const pf_status st = guard([&] {
        need(model, "model");
        const AugmentedModel& m = model->model;
        nlohmann::ordered_json j;
        j["modes"] = m.modes();
        j["system_modes"] = m.system_modes();
        j["labels"] = m.layout().labels;
        j["sector_dimension"] = m.space().sector_dimension();
        j["nonzeros_even"] = m.generator(kEven).nonZeros();
        j["nonzeros_odd"] = m.generator(kOdd).nonZeros();
        j["trace_row_norm"] = m.trace_row_norm();
        j["merged_leads"] = m.merged_leads();
        nlohmann::ordered_json scaling = nlohmann::ordered_json::array();
        for (const auto& s : m.space().scaling()) scaling.push_back({s.wz, s.wc});
        j["basis_scaling"] = scaling;
        text = j.dump(2);
    });
    return st != PF_OK ? st : buffer_guard(&text, buffer, capacity, needed);
}

pf_status pf_model_system_label(const pf_model* model, int index, char* buffer, size_t capacity, size_t* needed) {
    std::string text;
    const pf_status st = guard([&] {
        need(model, "model");
        if (index < 0 || index >= model->model.system_modes()) fail(ErrorCode::IndexOutOfRange, "system mode index out of range");
        text = model->model.layout().labels[std::size_t(index)];
    });
    return st != PF_OK ? st : buffer_guard(&text, buffer, capacity, needed);
}

void pf_model_free(pf_model* model) { delete model; }

void pf_steady_options_default(pf_steady_options* options) {
    if (!options) return;
    const SteadyOptions d;
    options->method = PF_STEADY_AUTO;
    options->residual_tolerance = d.residual_tolerance;
    options->gap_tolerance = d.gap_tolerance;
    options->propagation_time = d.propagation_time;
    options->max_iterations = d.max_iterations;
    options->direct_limit = std::size_t(d.direct_limit);
}

pf_status pf_state_initial(const pf_model* model, const double* rho_re, const double* rho_im, pf_state** out) {
    return guard([&] {
        need(model, "model");
        need(out, "out");
        *out = nullptr;
        const Eigen::Index dim = Eigen::Index(1) << model->model.system_modes();
        *out = new pf_state{initial_state(model->model, row_major(rho_re, rho_im, dim))};
    });
}

pf_status pf_state_steady(const pf_model* model, const pf_steady_options* options, pf_state** out,
                          pf_steady_report* report) {
    SteadyReport rep;
    const pf_status st = guard([&] {
        need(model, "model");
        need(out, "out");
        *out = nullptr;
        SteadyOptions o;
        if (options) {
            if (options->method < PF_STEADY_AUTO || options->method > PF_STEADY_PROPAGATION) {
                fail(ErrorCode::InvalidArgument, "unknown steady-state method");
            }
            o.method = static_cast<SteadyMethod>(static_cast<int>(options->method));
            o.residual_tolerance = options->residual_tolerance;
            o.gap_tolerance = options->gap_tolerance;
            o.propagation_time = options->propagation_time;
            o.max_iterations = options->max_iterations;
            o.direct_limit = Eigen::Index(options->direct_limit);
        }
        *out = new pf_state{steady_state(model->model, o, &rep)};
    });
    if (report) {
        std::memset(report, 0, sizeof *report);
        std::snprintf(report->method, sizeof report->method, "%s", rep.method.c_str());
        report->residual = rep.residual;
        report->generator_norm = rep.generator_norm;
        report->gap_estimate = rep.gap_estimate;
        report->trace_row_norm = rep.trace_row_norm;
        report->iterations = rep.iterations;
    }
    return st;
}

pf_status pf_state_trace(const pf_model* model, const pf_state* state, double* re, double* im) {
    return guard([&] {
        check_state(model, state);
        const cplx t = trace(model->model, state->state);
        if (re) *re = t.real();
        if (im) *im = t.imag();
    });
}

pf_status pf_state_time(const pf_state* state, double* time) {
    return guard([&] {
        need(state, "state");
        need(time, "time");
        *time = state->state.time;
    });
}

pf_status pf_state_occupation(const pf_model* model, const pf_state* state, const char* label, double* re, double* im) {
    return guard([&] {
        check_state(model, state);
        need(label, "label");
        const cplx n = occupation(model->model, state->state, label);
        if (re) *re = n.real();
        if (im) *im = n.imag();
    });
}

pf_status pf_state_current(const pf_model* model, const pf_state* state, const char* lead, double* value,
                           double* imaginary) {
    return guard([&] {
        check_state(model, state);
        need(lead, "lead");
        const CurrentSample c = lead_current(model->model, state->state, lead);
        if (value) *value = c.value;
        if (imaginary) *imaginary = c.imaginary;
    });
}

pf_status pf_state_reduced(const pf_model* model, const pf_state* state, double* re, double* im) {
    return guard([&] {
        check_state(model, state);
        need(re, "re");
        const DenseMatrix r = reduced_system_density(model->model, state->state);
        for (Eigen::Index i = 0; i < r.rows(); ++i) {
            for (Eigen::Index j = 0; j < r.cols(); ++j) {
                re[i * r.cols() + j] = r(i, j).real();
                if (im) im[i * r.cols() + j] = r(i, j).imag();
            }
        }
    });
}

// Checkpoint container (text, one record per line):
//   pfermion-state 1
//   modes <N> system_modes <k>
//   labels <l_0> ... <l_{N-1}>
//   scaling <wz_0> <wc_0> ... (basis weights per mode)
//   time <t>
//   even <D>   followed by D lines "<re> <im>"
//   odd <D or 0> followed by as many lines
pf_status pf_state_save(const pf_model* model, const pf_state* state, const char* path) {
    return guard([&] {
        check_state(model, state);
        need(path, "path");
        const AugmentedModel& m = model->model;
        std::ofstream f(path);
        if (!f) fail(ErrorCode::Io, std::string("cannot open '") + path + "' for writing");
        f << "pfermion-state 1\n";
        f << "modes " << m.modes() << " system_modes " << m.system_modes() << "\n";
        f << "labels";
        for (const auto& l : m.layout().labels) f << ' ' << l;
        f << "\nscaling";
        for (const auto& s : m.space().scaling()) f << ' ' << fmt(s.wz) << ' ' << fmt(s.wc);
        f << "\ntime " << fmt(state->state.time) << "\n";
        for (const auto* v : {&state->state.even, &state->state.odd}) {
            f << (v == &state->state.even ? "even " : "odd ") << v->size() << "\n";
            for (Eigen::Index i = 0; i < v->size(); ++i) f << fmt((*v)[i].real()) << ' ' << fmt((*v)[i].imag()) << "\n";
        }
        if (!f) fail(ErrorCode::Io, std::string("write to '") + path + "' failed");
    });
}

pf_status pf_state_load(const pf_model* model, const char* path, pf_state** out) {
    return guard([&] {
        need(model, "model");
        need(path, "path");
        need(out, "out");
        *out = nullptr;
        const AugmentedModel& m = model->model;
        std::ifstream f(path);
        if (!f) fail(ErrorCode::Io, std::string("cannot open '") + path + "'");
        auto bad = [&](const std::string& what) { fail(ErrorCode::Parse, std::string(path) + ": " + what); };
        std::string tag, key;
        int version = 0, modes = 0, sys = 0;
        if (!(f >> tag >> version) || tag != "pfermion-state" || version != 1) bad("not a version-1 state checkpoint");
        if (!(f >> key >> modes) || key != "modes" || !(f >> key >> sys) || key != "system_modes") bad("missing mode counts");
        if (modes != m.modes() || sys != m.system_modes()) fail(ErrorCode::LayoutMismatch, std::string(path) + ": mode count differs from the model");
        if (!(f >> key) || key != "labels") bad("missing labels");
        for (const auto& l : m.layout().labels) {
            std::string got;
            if (!(f >> got)) bad("truncated labels");
            if (got != l) fail(ErrorCode::LayoutMismatch, std::string(path) + ": label '" + got + "' where the model has '" + l + "'");
        }
        if (!(f >> key) || key != "scaling") bad("missing scaling");
        for (const auto& s : m.space().scaling()) {
            double wz = 0.0, wc = 0.0;
            if (!(f >> wz >> wc)) bad("truncated scaling");
            if (wz != s.wz || wc != s.wc) fail(ErrorCode::LayoutMismatch, std::string(path) + ": basis weights differ from the model");
        }
        AugmentedState st;
        if (!(f >> key >> st.time) || key != "time") bad("missing time");
        for (const char* name : {"even", "odd"}) {
            long n = -1;
            if (!(f >> key >> n) || key != name || n < 0) bad(std::string("missing ") + name + " block");
            const long d = long(m.space().sector_dimension());
            if (n != d && !(n == 0 && std::string(name) == "odd")) fail(ErrorCode::LayoutMismatch, std::string(path) + ": sector dimension differs");
            Eigen::VectorXcd& v = std::string(name) == "even" ? st.even : st.odd;
            v.resize(n);
            for (long i = 0; i < n; ++i) {
                double a = 0.0, b = 0.0;
                if (!(f >> a >> b)) bad("truncated coefficients");
                v[i] = cplx(a, b);
            }
        }
        *out = new pf_state{std::move(st)};
    });
}

void pf_state_free(pf_state* state) { delete state; }

void pf_propagation_options_default(pf_propagation_options* options) {
    if (!options) return;
    const PropagationOptions d;
    options->integrator = PF_INTEGRATOR_DOPRI5;
    options->rtol = d.rtol;
    options->atol = d.atol;
    options->min_step = d.min_step;
    options->max_steps = d.max_steps;
    options->krylov_dimension = d.krylov_dimension;
}

pf_status pf_evolve(const pf_model* model, const pf_state* initial, const double* times, size_t count,
                    const char* const* occupations, size_t occupation_count, const char* const* leads,
                    size_t lead_count, const pf_propagation_options* options, double* occ_re, double* occ_im,
                    double* currents, double* trace_re, double* trace_im, pf_state** final_state,
                    pf_propagation_report* report) {
    return guard([&] {
        check_state(model, initial);
        if (final_state) *final_state = nullptr;
        const AugmentedModel& m = model->model;
        const auto t = to_vector(times, count, "times");
        if (t.empty()) fail(ErrorCode::DegenerateGrid, "evolution needs at least one time");
        const PropagationOptions po = to_propagation(options);
        const auto& sp = m.space();
        std::vector<Eigen::VectorXcd> fo, fc;
        if (occupation_count > 0) need(occupations, "occupations");
        if (lead_count > 0) need(leads, "leads");
        for (std::size_t k = 0; k < occupation_count; ++k) {
            need(occupations[k], "occupation label");
            fo.push_back(sp.trace_functional(m.number(m.layout().index_of(occupations[k])), kEven));
        }
        for (std::size_t b = 0; b < lead_count; ++b) {
            need(leads[b], "lead");
            fc.push_back(lead_current_functional(m, leads[b]));
        }
        const double w = sp.trace_weight();
        auto dot = [](const Eigen::VectorXcd& f, const Eigen::VectorXcd& x) { return cplx((f.transpose() * x)(0)); };
        Eigen::VectorXcd last_even;
        PropagationReport rep = propagate(
            m.generator(kEven), initial->state.even, t,
            [&](std::size_t i, double, const Eigen::VectorXcd& x) {
                for (std::size_t k = 0; k < fo.size(); ++k) {
                    const cplx v = dot(fo[k], x);
                    if (occ_re) occ_re[i * fo.size() + k] = v.real();
                    if (occ_im) occ_im[i * fo.size() + k] = v.imag();
                }
                for (std::size_t b = 0; b < fc.size(); ++b) {
                    if (currents) currents[i * fc.size() + b] = (cplx(0.0, -1.0) * dot(fc[b], x)).real();
                }
                const cplx tr = w * x[0];
                if (trace_re) trace_re[i] = tr.real();
                if (trace_im) trace_im[i] = tr.imag();
                if (i + 1 == t.size()) last_even = x;
            },
            po);
        if (report) {
            report->steps = rep.steps;
            report->rejected = rep.rejected;
            report->max_trace_deviation = rep.max_trace_deviation;
        }
        if (final_state) {
            AugmentedState s;
            s.even = last_even;
            s.time = t.back();
            if (initial->state.odd.size() > 0) {
                propagate(m.generator(kOdd), initial->state.odd, {t.front(), t.back()},
                          [&](std::size_t i, double, const Eigen::VectorXcd& x) {
                              if (i == 1 || t.front() == t.back()) s.odd = x;
                          },
                          po);
            }
            *final_state = new pf_state{std::move(s)};
        }
    });
}

pf_status pf_two_time(const pf_model* model, const pf_state* state, const char* a_label, int a_dagger,
                      const char* b_label, int b_dagger, const double* times, size_t count,
                      const pf_propagation_options* options, double* re, double* im) {
    return guard([&] {
        check_state(model, state);
        need(a_label, "a_label");
        need(b_label, "b_label");
        const AugmentedModel& m = model->model;
        const int ia = m.layout().index_of(a_label), ib = m.layout().index_of(b_label);
        const OperatorSum a = a_dagger ? m.creation(ia) : m.annihilation(ia);
        const OperatorSum b = b_dagger ? m.creation(ib) : m.annihilation(ib);
        const auto v = two_time_correlation(m, state->state, a, b, to_vector(times, count, "times"), to_propagation(options));
        if (count > 0) {
            need(re, "re");
            need(im, "im");
        }
        for (std::size_t i = 0; i < v.size(); ++i) {
            re[i] = v[i].real();
            im[i] = v[i].imag();
        }
    });
}

void pf_spectrum_options_default(pf_spectrum_options* options) {
    if (!options) return;
    const SpectrumOptions d;
    options->t_max = d.t_max;
    options->dt = d.dt;
    options->eta = d.eta;
    options->decay_threshold = d.decay_threshold;
    options->check_reality = d.check_reality ? 1 : 0;
    pf_propagation_options_default(&options->propagation);
}

pf_status pf_spectrum_compute(const pf_model* model, const pf_state* state, const char* label, const double* omega,
                              size_t count, const pf_spectrum_options* options, pf_spectrum** out) {
    return guard([&] {
        check_state(model, state);
        need(label, "label");
        need(out, "out");
        *out = nullptr;
        const AugmentedModel& m = model->model;
        SpectrumOptions o;
        if (options) {
            o.t_max = options->t_max;
            o.dt = options->dt;
            o.eta = options->eta;
            o.decay_threshold = options->decay_threshold;
            o.check_reality = options->check_reality != 0;
            o.propagation = to_propagation(&options->propagation);
        }
        const int idx = m.layout().index_of(label);
        *out = new pf_spectrum{spectral_function(m, state->state, m.annihilation(idx), to_vector(omega, count, "omega"), o, label)};
    });
}

pf_status pf_spectrum_report_get(const pf_spectrum* spectrum, pf_spectrum_report* report) {
    return guard([&] {
        need(spectrum, "spectrum");
        need(report, "report");
        const SpectrumTable& t = spectrum->table;
        report->sum_rule = t.sum_rule;
        report->tail_ratio = t.tail_ratio;
        report->reality = t.reality;
        report->eta = t.eta;
        report->time_points = t.times.size();
    });
}

pf_status pf_spectrum_values(const pf_spectrum* spectrum, double* value, double* imaginary) {
    return guard([&] {
        need(spectrum, "spectrum");
        const SpectrumTable& t = spectrum->table;
        for (std::size_t i = 0; i < t.omega.size(); ++i) {
            if (value) value[i] = t.value[i];
            if (imaginary) imaginary[i] = t.imaginary[i];
        }
    });
}

pf_status pf_spectrum_correlations(const pf_spectrum* spectrum, double* times, double* particle_re,
                                  double* particle_im, double* hole_re, double* hole_im) {
    return guard([&] {
        need(spectrum, "spectrum");
        const SpectrumTable& t = spectrum->table;
        for (std::size_t i = 0; i < t.times.size(); ++i) {
            if (times) times[i] = t.times[i];
            if (particle_re) particle_re[i] = t.particle[i].real();
            if (particle_im) particle_im[i] = t.particle[i].imag();
            const cplx h = i < t.hole.size() ? t.hole[i] : cplx(0.0);
            if (hole_re) hole_re[i] = h.real();
            if (hole_im) hole_im[i] = h.imag();
        }
    });
}

void pf_spectrum_free(pf_spectrum* spectrum) { delete spectrum; }

pf_status pf_local_maxima(const double* y, size_t n, double min_prominence, size_t* indices, size_t* count) {
    return guard([&] {
        need(count, "count");
        const auto p = local_maxima(to_vector(y, n, "y"), min_prominence);
        if (indices && *count < p.size()) {
            *count = p.size();
            fail(ErrorCode::InvalidArgument, "index buffer too small");
        }
        if (indices) std::copy(p.begin(), p.end(), indices);
        *count = p.size();
    });
}

pf_status pf_oracle_level_current(double epsilon, const pf_lorentzian* leads, size_t into, double* current) {
    return guard([&] {
        need(leads, "leads");
        need(current, "current");
        const oracles::TransmissionModel tm{epsilon, {to_spec(&leads[0]), to_spec(&leads[1])}};
        *current = oracles::exact_level_current(tm, into);
    });
}

pf_status pf_oracle_level_spectral(double epsilon, const pf_lorentzian* leads, size_t lead_count, const double* omega,
                                   size_t count, double* out) {
    return guard([&] {
        if (lead_count > 0) need(leads, "leads");
        oracles::TransmissionModel tm{epsilon, {}};
        for (std::size_t i = 0; i < lead_count; ++i) tm.leads.push_back(to_spec(&leads[i]));
        const auto w = to_vector(omega, count, "omega");
        if (count > 0) need(out, "out");
        for (std::size_t i = 0; i < count; ++i) out[i] = oracles::level_spectral_function(w[i], tm);
    });
}

pf_status pf_oracle_discretized(double epsilon, const pf_lorentzian* leads, size_t lead_count, int modes_per_lead,
                                double initial_occupation, const double* times, size_t count, double* occupation,
                                double* currents) {
    return guard([&] {
        if (lead_count > 0) need(leads, "leads");
        std::vector<oracles::DiscretizedBath> baths;
        for (std::size_t i = 0; i < lead_count; ++i) baths.push_back(oracles::discretize(to_spec(&leads[i]), modes_per_lead));
        const auto d = oracles::discretized_bath_dynamics(epsilon, baths, initial_occupation, to_vector(times, count, "times"));
        for (std::size_t i = 0; i < count; ++i) {
            if (occupation) occupation[i] = d.occupation[i];
            for (std::size_t b = 0; b < lead_count; ++b) {
                if (currents) currents[i * lead_count + b] = d.currents[b][i];
            }
        }
    });
}

pf_status pf_oracle_markovian(double gamma0, double n0, double initial, const double* times, size_t count, double* out) {
    return guard([&] {
        const auto t = to_vector(times, count, "times");
        if (count > 0) need(out, "out");
        for (std::size_t i = 0; i < count; ++i) out[i] = oracles::markovian_occupation(gamma0, n0, initial, t[i]);
    });
}

pf_status pf_oracle_fast_matsubara(const pf_lorentzian* spec, int term, double epsilon, double tolerance,
                                   const double* times, size_t count, double delta, double* rate, double* deviation,
                                   int* passed) {
    return guard([&] {
        const auto r = oracles::fast_matsubara_irrelevance_check(to_spec(spec), term, epsilon, tolerance,
                                                                 to_vector(times, count, "times"), delta);
        if (rate) *rate = r.rate;
        if (deviation) *deviation = r.max_deviation;
        if (passed) *passed = r.passed ? 1 : 0;
    });
}

}  // extern "C"
