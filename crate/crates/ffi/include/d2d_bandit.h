#ifndef D2D_BANDIT_H
#define D2D_BANDIT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum D2dStatus {
  D2D_STATUS_OK = 0,
  D2D_STATUS_NULL_POINTER = 1,
  D2D_STATUS_INVALID_ARGUMENT = 2,
  D2D_STATUS_CONFIG = 3,
  D2D_STATUS_PARSE = 4,
  D2D_STATUS_IO = 5,
  D2D_STATUS_CONTRACT = 6,
  D2D_STATUS_DOMAIN = 7,
  D2D_STATUS_RUN = 8,
  D2D_STATUS_BUFFER_TOO_SMALL = 9,
  D2D_STATUS_PANIC = 10,
} D2dStatus;

// Time series selectable from a run or an experiment.
typedef enum D2dSeries {
  D2D_SERIES_SUBFRAME = 0,
  D2D_SERIES_REGRET_DEF2 = 1,
  D2D_SERIES_REGRET_DEF3 = 2,
  D2D_SERIES_REGRET_ADVERSARIAL = 3,
  D2D_SERIES_SUM_TPUT_D2D = 4,
  D2D_SERIES_SUM_TPUT_CU = 5,
} D2dSeries;

// Opaque experiment configuration.
typedef struct D2dConfig D2dConfig;

// Opaque result of a Monte Carlo experiment.
typedef struct D2dExperiment D2dExperiment;

// Opaque result of a single run.
typedef struct D2dRun D2dRun;

// Physical-layer constants in linear SI units (W, Hz, bit/s).
typedef struct D2dPhy {
  double p_c;
  double p_max;
  double gamma_tgt;
  double bandwidth;
  double noise_bs;
  double noise_d2d;
  double r_norm;
  double r_prime;
} D2dPhy;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. The pointer
// stays valid until the next failing call on the same thread.
const char *d2d_last_error(void);

// Library version as a static NUL-terminated string.
const char *d2d_version(void);

// New configuration holding the reference-scenario defaults.
struct D2dConfig *d2d_config_default(void);

// Parses and validates a TOML configuration document.
enum D2dStatus d2d_config_from_toml(const char *text, struct D2dConfig **out);

// Loads and validates a TOML configuration file.
enum D2dStatus d2d_config_load(const char *path, struct D2dConfig **out);

void d2d_config_free(struct D2dConfig *cfg);

// Restricts the experiment to a single policy (`mp_ucb1`, `dlf`, ...).
enum D2dStatus d2d_config_set_policy(struct D2dConfig *cfg, const char *policy);

// Sets the horizon and Monte Carlo nesting, then validates the configuration.
enum D2dStatus d2d_config_set_scale(struct D2dConfig *cfg,
                                    uint64_t horizon,
                                    uint64_t mc_topologies,
                                    uint64_t mc_runs_per_topology);

enum D2dStatus d2d_config_set_master_seed(struct D2dConfig *cfg, uint64_t seed);

// Sets the arm-mean oracle sample count (at least 10000).
enum D2dStatus d2d_config_set_oracle_samples(struct D2dConfig *cfg, uint64_t samples);

// Resolved physical-layer constants of a configuration.
enum D2dStatus d2d_config_phy(const struct D2dConfig *cfg, struct D2dPhy *out);

// Physical-layer constants of the reference scenario.
enum D2dStatus d2d_phy_default(struct D2dPhy *out);

// Path loss in dB at `distance_m` meters.
enum D2dStatus d2d_path_loss_db(double distance_m, double *out);

// BS power grant for a D2D pair reusing a CU, in watts.
enum D2dStatus d2d_allocate_power(const struct D2dPhy *phy,
                                  double g_cb,
                                  double g_db,
                                  bool collided,
                                  double *out);

// `mean + sqrt(2 ln(n) / count)`.
enum D2dStatus d2d_ucb1_index(double mean, uint64_t count, uint64_t subframe, double *out);

// `mean - sqrt(2 ln(n) / count)`.
enum D2dStatus d2d_lcb_index(double mean, uint64_t count, uint64_t subframe, double *out);

// Runs one simulation of `policy` on the topology and run seeds given.
enum D2dStatus d2d_run_simulation(const struct D2dConfig *cfg,
                                  const char *policy,
                                  uint64_t topology_seed,
                                  uint64_t run_seed,
                                  struct D2dRun **out);

void d2d_run_free(struct D2dRun *run);

// Number of logged subframes, i.e. the length of every run series.
enum D2dStatus d2d_run_len(const struct D2dRun *run, size_t *out);

enum D2dStatus d2d_run_gain_checksum(const struct D2dRun *run, uint64_t *out);

// Copies a logged series into `buf`, which must hold `d2d_run_len` values.
// Series the policy does not produce fail with `INVALID_ARGUMENT`.
enum D2dStatus d2d_run_series(const struct D2dRun *run,
                              enum D2dSeries series,
                              double *buf,
                              size_t len);

// Per-player collision percentages; `buf` must hold `n_d2d` values.
enum D2dStatus d2d_run_collision_pct(const struct D2dRun *run, double *buf, size_t len);

// Per-player fairness percentages; `buf` must hold `n_d2d` values.
enum D2dStatus d2d_run_fairness_pct(const struct D2dRun *run, double *buf, size_t len);

// Runs the full Monte Carlo experiment on `workers` threads.
enum D2dStatus d2d_experiment_run(const struct D2dConfig *cfg,
                                  size_t workers,
                                  struct D2dExperiment **out);

void d2d_experiment_free(struct D2dExperiment *e);

// Writes the CSV files, the manifest and optionally SVG plots into `dir`.
enum D2dStatus d2d_experiment_write(const struct D2dExperiment *e, const char *dir, bool plots);

// Mean and standard error across runs of a policy's regret at the horizon.
enum D2dStatus d2d_experiment_final_regret(const struct D2dExperiment *e,
                                           const char *policy,
                                           enum D2dSeries series,
                                           double *mean,
                                           double *stderr);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* D2D_BANDIT_H */
