#ifndef USVSIM_H
#define USVSIM_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define USVSIM_API __declspec(dllexport)
#else
#define USVSIM_API __attribute__((visibility("default")))
#endif

typedef enum usvsim_status {
    USVSIM_OK = 0,
    USVSIM_ERR_NULL = 1,      /* a required pointer argument was NULL */
    USVSIM_ERR_CONFIG = 2,    /* scenario or parameter rejected by validation */
    USVSIM_ERR_IO = 3,        /* file could not be read or written */
    USVSIM_ERR_RUNTIME = 4,   /* numerical failure during a run */
    USVSIM_ERR_RANGE = 5,     /* index out of range */
    USVSIM_ERR_NOT_FOUND = 6, /* unknown builtin name */
    USVSIM_ERR_INTERNAL = 7
} usvsim_status;

typedef struct usvsim_scenario usvsim_scenario;
typedef struct usvsim_run usvsim_run;
typedef struct usvsim_suite usvsim_suite;

typedef struct usvsim_metrics {
    double position_rmse, position_rmsd; /* m */
    double speed_rmse, speed_rmsd;       /* m/s */
    double heading_rmse_deg, heading_rmsd_deg;
    double yaw_rate_rmse, yaw_rate_rmsd; /* rad/s */
    size_t samples;
    double end_time;          /* s */
    double max_station_error; /* m, UNREP only */
    int projection_ok;
} usvsim_metrics;

typedef struct usvsim_gains {
    double k_u_p, k_u_i;
    double k_v_p, k_r_p, k_r_i;
    double riccati_P_speed[4]; /* row-major, extended state (e_uI, u) */
    double riccati_P_yaw[9];   /* row-major, extended state (e_rI, v, r) */
    double lyapunov_P_speed[4];
    double lyapunov_P_yaw[9];
    double lyapunov_residual_speed; /* max-abs of P A_ref + A_ref' P + I */
    double lyapunov_residual_yaw;
} usvsim_gains;

USVSIM_API const char* usvsim_version(void);
USVSIM_API const char* usvsim_status_string(usvsim_status s);
/* Message for the last failing call on this thread; "" if none. */
USVSIM_API const char* usvsim_last_error(void);
/* Frees strings returned through char** out-parameters. */
USVSIM_API void usvsim_string_free(char* s);

USVSIM_API size_t usvsim_builtin_count(void);
USVSIM_API const char* usvsim_builtin_name(size_t i); /* NULL if out of range */

USVSIM_API usvsim_status usvsim_scenario_builtin(const char* name, usvsim_scenario** out);
USVSIM_API usvsim_status usvsim_scenario_load(const char* path, usvsim_scenario** out);
USVSIM_API usvsim_status usvsim_scenario_parse(const char* json_text, usvsim_scenario** out);
USVSIM_API usvsim_status usvsim_scenario_set_controller(usvsim_scenario* s, const char* kind);
USVSIM_API usvsim_status usvsim_scenario_set_seed(usvsim_scenario* s, uint64_t seed);
USVSIM_API usvsim_status usvsim_scenario_set_duration(usvsim_scenario* s, double seconds);
USVSIM_API usvsim_status usvsim_scenario_to_json(const usvsim_scenario* s, char** out);
USVSIM_API void usvsim_scenario_free(usvsim_scenario* s);

USVSIM_API usvsim_status usvsim_run_scenario(const usvsim_scenario* s, usvsim_run** out);
USVSIM_API usvsim_status usvsim_run_outcome(const usvsim_run* r, const char** outcome);
USVSIM_API usvsim_status usvsim_run_metrics(const usvsim_run* r, usvsim_metrics* out);
USVSIM_API usvsim_status usvsim_run_event_count(const usvsim_run* r, size_t* n);
USVSIM_API usvsim_status usvsim_run_event(const usvsim_run* r, size_t i, double* t, const char** name,
                                          const char** detail);
USVSIM_API usvsim_status usvsim_run_has_event(const usvsim_run* r, const char* name, int* found);
USVSIM_API usvsim_status usvsim_run_summary_json(const usvsim_run* r, char** out);
/* run.jsonl, summary.json and CSV tables into dir. */
USVSIM_API usvsim_status usvsim_run_write(const usvsim_run* r, const char* dir);
USVSIM_API void usvsim_run_free(usvsim_run* r);

/* Full comparison suite; out_dir may be NULL to skip writing. */
USVSIM_API usvsim_status usvsim_suite_run(const char* out_dir, usvsim_suite** out);
USVSIM_API usvsim_status usvsim_suite_count(const usvsim_suite* s, size_t* n);
/* improvement_pct is NaN when the scenario has no PID run. */
USVSIM_API usvsim_status usvsim_suite_entry(const usvsim_suite* s, size_t i, const char** scenario,
                                            const char** controller, const char** outcome, usvsim_metrics* metrics,
                                            double* improvement_pct);
USVSIM_API void usvsim_suite_free(usvsim_suite* s);

/* Re-certifies a logged run; writes certify.jsonl beside the log. */
USVSIM_API usvsim_status usvsim_certify_log(const char* run_jsonl, int horizon, double gamma, long* calls,
                                            long* unsafe);

/* LQR-PI gains synthesized for the default vehicle model. */
USVSIM_API usvsim_status usvsim_lqr_gains(usvsim_gains* out);

#ifdef __cplusplus
}
#endif

#endif
