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

#ifndef PFERMION_PFERMION_H
#define PFERMION_PFERMION_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define PF_API __declspec(dllexport)
#else
#define PF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. PF_OK is zero; every other value leaves a message in pf_last_error(). */
typedef enum pf_status {
    PF_OK = 0,
    PF_ERR_INVALID_ARGUMENT = 1,
    PF_ERR_POLE_COLLISION = 2,
    PF_ERR_QUADRATURE = 3,
    PF_ERR_OPTIMIZER = 4,
    PF_ERR_DEGENERATE_GRID = 5,
    PF_ERR_REGULATOR_TOO_SMALL = 6,
    PF_ERR_INDEX_OUT_OF_RANGE = 7,
    PF_ERR_DIMENSION_MISMATCH = 8,
    PF_ERR_LAYOUT_MISMATCH = 9,
    PF_ERR_STEP_SIZE_UNDERFLOW = 10,
    PF_ERR_DEGENERATE_NULL_SPACE = 11,
    PF_ERR_NO_CONVERGENCE = 12,
    PF_ERR_PARITY_VIOLATION = 13,
    PF_ERR_INSUFFICIENT_TIME_WINDOW = 14,
    PF_ERR_PARSE = 15,
    PF_ERR_IO = 16,
    PF_ERR_BUFFER_TOO_SMALL = 17,
    PF_ERR_OUT_OF_MEMORY = 18,
    PF_ERR_INTERNAL = 99
} pf_status;

PF_API const char* pf_version(void);
PF_API const char* pf_status_name(pf_status status);
/* Per-thread diagnostics of the last failed call on this thread. */
PF_API const char* pf_last_error(void);
/* Achieved tolerance / residual attached to numerical failures, 0 otherwise. */
PF_API double pf_last_error_value(void);

/* ---- bath correlations ---------------------------------------------------------------- */

/* J(w) = coupling * width^2 / ((w - mu)^2 + width^2); beta = INFINITY is zero temperature. */
typedef struct pf_lorentzian {
    double coupling;
    double width;
    double mu;
    double beta;
} pf_lorentzian;

typedef enum pf_correlation_method {
    PF_CORR_QUADRATURE = 0, /* direct frequency integral */
    PF_CORR_DECOMPOSED = 1, /* resonant + first `terms` Matsubara terms */
    PF_CORR_RESUMMED = 2,   /* resonant + closed-form full Matsubara series */
    PF_CORR_RESONANT = 3,   /* resonant contribution only */
    PF_CORR_MATSUBARA = 4   /* Matsubara contribution only (terms = 0: full series) */
} pf_correlation_method;

/* C^sigma(t) on a time grid. abs_error (nullable) is filled by the quadrature method. */
PF_API pf_status pf_correlation(const pf_lorentzian* spec, int sigma, pf_correlation_method method, int terms,
                                const double* times, size_t count, double* re, double* im, double* abs_error);

/* ---- Matsubara envelope fit ----------------------------------------------------------- */

typedef struct pf_fit pf_fit;

typedef struct pf_fit_options {
    int terms;
    int restarts;
    uint64_t seed;
    int reference_terms; /* <= 0: converged envelope */
    int max_iterations;
    double tolerance;
    const double* grid; /* NULL: default geometric grid */
    size_t grid_size;
} pf_fit_options;

PF_API void pf_fit_options_default(pf_fit_options* options);
PF_API pf_status pf_fit_envelope(const pf_lorentzian* spec, const pf_fit_options* options, pf_fit** out);
/* Build a fit handle from explicit terms amplitude (re, im), width, rate. */
PF_API pf_status pf_fit_from_terms(const double* amp_re, const double* amp_im, const double* width,
                                   const double* rate, size_t count, pf_fit** out);
PF_API pf_status pf_fit_summary(const pf_fit* fit, double* residual_l2, double* residual_sup, int* converged,
                                size_t* terms);
PF_API pf_status pf_fit_term(const pf_fit* fit, size_t index, double* amp_re, double* amp_im, double* width,
                             double* rate);
/* JSON report with residual_l2, residual_sup and terms[]; needed includes the terminator. */
PF_API pf_status pf_fit_report_json(const pf_fit* fit, const pf_lorentzian* spec, char* buffer, size_t capacity,
                                    size_t* needed);
PF_API void pf_fit_free(pf_fit* fit);

/* ---- pseudo-fermion baths ------------------------------------------------------------- */

typedef struct pf_bath pf_bath;

typedef enum pf_map_kind {
    PF_MAP_RESONANT = 0,
    PF_MAP_EXACT_TWO = 1,
    PF_MAP_EXACT_FOUR = 2,
    PF_MAP_FITTED_TWO = 3,
    PF_MAP_FITTED_FOUR = 4
} pf_map_kind;

typedef struct pf_construction {
    pf_map_kind kind;
    int terms; /* K for exact maps, K_fit for fitted maps */
    double delta_re;
    double delta_im;
    double delta_min;
} pf_construction;

PF_API void pf_construction_default(pf_construction* construction);
PF_API pf_status pf_map_kind_parse(const char* name, pf_map_kind* out);
PF_API const char* pf_map_kind_name(pf_map_kind kind);

/* Complex parameters as {re, im}. */
typedef struct pf_mode {
    double occupation[2];
    double coupling[2];
    double coupling_sq[2];
    double frequency[2];
    double damping[2];
} pf_mode;

/* fit may be NULL for resonant and exact maps. lead/spin may be NULL. */
PF_API pf_status pf_bath_build(const pf_lorentzian* spec, const pf_construction* construction, const pf_fit* fit,
                               const char* lead, const char* spin, pf_bath** out);
PF_API pf_status pf_bath_mode_count(const pf_bath* bath, size_t* count);
PF_API pf_status pf_bath_mode(const pf_bath* bath, size_t index, pf_mode* mode);
PF_API pf_status pf_bath_correlation(const pf_bath* bath, int sigma, const double* times, size_t count, double* re,
                                     double* im);
/* Sup-norm deviation from quadrature for sigma = +1 and -1. */
PF_API pf_status pf_bath_validate(const pf_bath* bath, const double* grid, size_t count, double tolerance,
                                  double* max_plus, double* max_minus, int* passed);
PF_API pf_status pf_bath_serialize(const pf_bath* bath, char* buffer, size_t capacity, size_t* needed);
PF_API pf_status pf_bath_parse(const char* text, pf_bath** out);
PF_API void pf_bath_free(pf_bath* bath);

/* ---- augmented model ------------------------------------------------------------------ */

typedef struct pf_model pf_model;

typedef enum pf_system_kind { PF_SYSTEM_SINGLE_LEVEL = 0, PF_SYSTEM_ANDERSON = 1 } pf_system_kind;

typedef struct pf_system {
    pf_system_kind kind;
    double epsilon;
    double interaction;
} pf_system;

typedef struct pf_engine_options {
    int mode_cap;
    int merge_identical_leads;
} pf_engine_options;

PF_API void pf_engine_options_default(pf_engine_options* options);
PF_API pf_status pf_model_create(const pf_system* system, const pf_bath* const* baths, size_t bath_count,
                                 const pf_engine_options* options, pf_model** out);
/* Explicit system on k modes: row-major 2^k x 2^k matrices (imaginary parts nullable).
   coupling_keys follow "lead/spin", "lead", "spin" or "" lookup order. */
PF_API pf_status pf_model_create_explicit(int modes, const double* h_re, const double* h_im, size_t coupling_count,
                                          const char* const* coupling_keys, const double* const* coupling_re,
                                          const double* const* coupling_im, const pf_bath* const* baths,
                                          size_t bath_count, const pf_engine_options* options, pf_model** out);
PF_API pf_status pf_model_dimensions(const pf_model* model, int* modes, int* system_modes, size_t* sector_dimension);
/* JSON description: labels, sector dimension, nonzeros, trace-row norm, merged leads. */
PF_API pf_status pf_model_describe(const pf_model* model, char* buffer, size_t capacity, size_t* needed);
PF_API pf_status pf_model_system_label(const pf_model* model, int index, char* buffer, size_t capacity,
                                       size_t* needed);
PF_API void pf_model_free(pf_model* model);

/* ---- states ---------------------------------------------------------------------------- */

typedef struct pf_state pf_state;

typedef enum pf_steady_method {
    PF_STEADY_AUTO = 0,
    PF_STEADY_DIRECT = 1,
    PF_STEADY_ITERATIVE = 2,
    PF_STEADY_PROPAGATION = 3
} pf_steady_method;

typedef struct pf_steady_options {
    pf_steady_method method;
    double residual_tolerance;
    double gap_tolerance;
    double propagation_time;
    int max_iterations;
    size_t direct_limit;
} pf_steady_options;

typedef struct pf_steady_report {
    char method[32];
    double residual;
    double generator_norm;
    double gap_estimate;
    double trace_row_norm;
    int iterations;
} pf_steady_report;

PF_API void pf_steady_options_default(pf_steady_options* options);
/* System density matrix, row-major 2^k x 2^k; rho_im nullable. */
PF_API pf_status pf_state_initial(const pf_model* model, const double* rho_re, const double* rho_im, pf_state** out);
PF_API pf_status pf_state_steady(const pf_model* model, const pf_steady_options* options, pf_state** out,
                                 pf_steady_report* report);
PF_API pf_status pf_state_trace(const pf_model* model, const pf_state* state, double* re, double* im);
PF_API pf_status pf_state_time(const pf_state* state, double* time);
PF_API pf_status pf_state_occupation(const pf_model* model, const pf_state* state, const char* label, double* re,
                                     double* im);
/* Particle current into the lead; imaginary is the residual imaginary part. */
PF_API pf_status pf_state_current(const pf_model* model, const pf_state* state, const char* lead, double* value,
                                  double* imaginary);
/* Reduced system density, row-major 2^k x 2^k. */
PF_API pf_status pf_state_reduced(const pf_model* model, const pf_state* state, double* re, double* im);
/* Text checkpoint with layout metadata; loading checks the layout against the model. */
PF_API pf_status pf_state_save(const pf_model* model, const pf_state* state, const char* path);
PF_API pf_status pf_state_load(const pf_model* model, const char* path, pf_state** out);
PF_API void pf_state_free(pf_state* state);

/* ---- propagation ----------------------------------------------------------------------- */

typedef enum pf_integrator { PF_INTEGRATOR_DOPRI5 = 0, PF_INTEGRATOR_KRYLOV = 1 } pf_integrator;

typedef struct pf_propagation_options {
    pf_integrator integrator;
    double rtol;
    double atol;
    double min_step;
    long max_steps;
    int krylov_dimension;
} pf_propagation_options;

typedef struct pf_propagation_report {
    long steps;
    long rejected;
    double max_trace_deviation;
} pf_propagation_report;

PF_API void pf_propagation_options_default(pf_propagation_options* options);

/* Occupations and lead currents along increasing times (times[0] is the start).
   Outputs are row-major per time: occ_*[i * occupation_count + k], currents[i * lead_count + b].
   Any output pointer may be NULL; final_state (nullable) receives the state at the last time. */
PF_API pf_status pf_evolve(const pf_model* model, const pf_state* initial, const double* times, size_t count,
                           const char* const* occupations, size_t occupation_count, const char* const* leads,
                           size_t lead_count, const pf_propagation_options* options, double* occ_re, double* occ_im,
                           double* currents, double* trace_re, double* trace_im, pf_state** final_state,
                           pf_propagation_report* report);

/* Tr[A e^{Lt}(B rho)] with A, B single system-mode operators (c or c^dag). */
PF_API pf_status pf_two_time(const pf_model* model, const pf_state* state, const char* a_label, int a_dagger,
                             const char* b_label, int b_dagger, const double* times, size_t count,
                             const pf_propagation_options* options, double* re, double* im);

/* ---- spectral function ----------------------------------------------------------------- */

typedef struct pf_spectrum pf_spectrum;

typedef struct pf_spectrum_options {
    double t_max;
    double dt;
    double eta;
    double decay_threshold;
    int check_reality;
    pf_propagation_options propagation;
} pf_spectrum_options;

typedef struct pf_spectrum_report {
    double sum_rule;
    double tail_ratio;
    double reality;
    double eta;
    size_t time_points;
} pf_spectrum_report;

PF_API void pf_spectrum_options_default(pf_spectrum_options* options);
/* A(w) of the system mode `label` in the given (even) state. */
PF_API pf_status pf_spectrum_compute(const pf_model* model, const pf_state* state, const char* label,
                                     const double* omega, size_t count, const pf_spectrum_options* options,
                                     pf_spectrum** out);
PF_API pf_status pf_spectrum_report_get(const pf_spectrum* spectrum, pf_spectrum_report* report);
PF_API pf_status pf_spectrum_values(const pf_spectrum* spectrum, double* value, double* imaginary);
/* Particle <{s(t), s^dag}> and hole <{s^dag(t), s}> branches on the time grid (hole is zero
   when the reality check is disabled). */
PF_API pf_status pf_spectrum_correlations(const pf_spectrum* spectrum, double* times, double* particle_re,
                                          double* particle_im, double* hole_re, double* hole_im);
PF_API void pf_spectrum_free(pf_spectrum* spectrum);

/* Strict local maxima with at least the given prominence; count in/out. */
PF_API pf_status pf_local_maxima(const double* y, size_t n, double min_prominence, size_t* indices, size_t* count);

/* ---- reference oracles ----------------------------------------------------------------- */

PF_API pf_status pf_oracle_level_current(double epsilon, const pf_lorentzian* leads, size_t into, double* current);
PF_API pf_status pf_oracle_level_spectral(double epsilon, const pf_lorentzian* leads, size_t lead_count,
                                          const double* omega, size_t count, double* out);
/* currents[i * lead_count + b], positive into lead b. */
PF_API pf_status pf_oracle_discretized(double epsilon, const pf_lorentzian* leads, size_t lead_count,
                                       int modes_per_lead, double initial_occupation, const double* times,
                                       size_t count, double* occupation, double* currents);
PF_API pf_status pf_oracle_markovian(double gamma0, double n0, double initial, const double* times, size_t count,
                                     double* out);
PF_API pf_status pf_oracle_fast_matsubara(const pf_lorentzian* spec, int term, double epsilon, double tolerance,
                                          const double* times, size_t count, double delta, double* rate,
                                          double* deviation, int* passed);

#ifdef __cplusplus
}
#endif

#endif
