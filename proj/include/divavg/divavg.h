#ifndef DIVAVG_H
#define DIVAVG_H

/* C interface to the divavg library. All objects are opaque handles; every
   call returns a status code, and on failure divavg_last_error() holds a
   message for the calling thread. Strings returned through char** must be
   released with divavg_string_free. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define DIVAVG_API __declspec(dllexport)
#else
#define DIVAVG_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum divavg_status {
  DIVAVG_OK = 0,
  DIVAVG_ERR_USAGE = 1,      /* precondition violated by the caller */
  DIVAVG_ERR_VALIDATION = 2, /* bad configuration or family parameters */
  DIVAVG_ERR_HORIZON = 3,    /* cutoff search exhausted its horizon */
  DIVAVG_ERR_NUMERICAL = 4,  /* numerical fault, or a failed statistical check */
  DIVAVG_ERR_NON_PSD = 5,    /* correlation window not positive semidefinite */
  DIVAVG_ERR_INTERNAL = 6
} divavg_status;

typedef struct divavg_spectrum divavg_spectrum;
typedef struct divavg_construction divavg_construction;
typedef struct divavg_artifacts divavg_artifacts;

DIVAVG_API const char* divavg_version(void);
DIVAVG_API const char* divavg_last_error(void);
DIVAVG_API void divavg_string_free(char* s);

/* Process exit code for a status: 0, 2 (usage, validation, non-PSD), 3 or 4. */
DIVAVG_API int divavg_exit_code(divavg_status status);

/* Parses a run configuration and returns its canonical JSON text. */
DIVAVG_API divavg_status divavg_config_normalize(const char* config_json, char** canonical);

/* ---- spectra ---- */

/* spectrum_json is a spectrum block, e.g. {"family":"arc","epsilon":0.5}. */
DIVAVG_API divavg_status divavg_spectrum_create(const char* spectrum_json, divavg_spectrum** out);
DIVAVG_API void divavg_spectrum_free(divavg_spectrum* s);

DIVAVG_API divavg_status divavg_spectrum_correlation(const divavg_spectrum* s, int64_t lag, double* r);
DIVAVG_API divavg_status divavg_spectrum_validate_psd(const divavg_spectrum* s, int64_t window, int* ok,
                                                      double* min_pivot);
DIVAVG_API divavg_status divavg_spectrum_wiener_average(const divavg_spectrum* s, int64_t n, double* value);
DIVAVG_API divavg_status divavg_spectrum_rigidity_defect(const divavg_spectrum* s, int64_t q, double* value);
DIVAVG_API divavg_status divavg_spectrum_system_rigidity_defect(const divavg_spectrum* s, int64_t q, double* value);
/* has_horizon is set to 0 for families without one. */
DIVAVG_API divavg_status divavg_spectrum_validity_horizon(const divavg_spectrum* s, int64_t* horizon,
                                                          int* has_horizon);

/* ---- construction ---- */

DIVAVG_API divavg_status divavg_construction_run(const divavg_spectrum* s, int levels, int64_t max_horizon,
                                                 divavg_construction** out);
DIVAVG_API void divavg_construction_free(divavg_construction* c);

DIVAVG_API int divavg_construction_levels(const divavg_construction* c);
/* Copies min(capacity, levels) cutoffs into buffer. */
DIVAVG_API divavg_status divavg_construction_cutoffs(const divavg_construction* c, int64_t* buffer, size_t capacity);
DIVAVG_API int64_t divavg_construction_window(const divavg_construction* c);
DIVAVG_API double divavg_construction_jitter(const divavg_construction* c);
DIVAVG_API divavg_status divavg_construction_reflected_inner(const divavg_construction* c, int64_t i, double* a);
DIVAVG_API divavg_status divavg_construction_cross_inner(const divavg_construction* c, int64_t i, int64_t j,
                                                         double* value);
/* Writes A(1), ..., A(horizon) into buffer (length >= horizon). */
DIVAVG_API divavg_status divavg_construction_running_averages(const divavg_construction* c, int64_t horizon,
                                                              double* buffer);
/* Dense cross-check on the longest cutoff prefix fitting under cap. */
DIVAVG_API divavg_status divavg_construction_oracle_compare(const divavg_construction* c, int64_t cap,
                                                            double* max_delta, double* involution_error);

/* ---- commands ---- */

/* Runs "spectrum", "construct", "verify" or "simulate" on a configuration.
   The return value is the command's status; *out receives the produced files
   whenever the command ran, including runs that end in a reported fault. */
DIVAVG_API divavg_status divavg_command_run(const char* command, const char* config_json, divavg_artifacts** out);
DIVAVG_API void divavg_artifacts_free(divavg_artifacts* a);
/* The process exit code the command asks for. */
DIVAVG_API int divavg_artifacts_exit_code(const divavg_artifacts* a);
DIVAVG_API size_t divavg_artifacts_count(const divavg_artifacts* a);
DIVAVG_API const char* divavg_artifacts_name(const divavg_artifacts* a, size_t index);
DIVAVG_API const char* divavg_artifacts_content(const divavg_artifacts* a, size_t index, size_t* length);
DIVAVG_API const char* divavg_artifacts_summary(const divavg_artifacts* a);
/* Output directory named by the configuration. */
DIVAVG_API const char* divavg_artifacts_output_dir(const divavg_artifacts* a);

#ifdef __cplusplus
}
#endif

#endif
