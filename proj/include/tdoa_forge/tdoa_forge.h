#ifndef TDOA_FORGE_H
#define TDOA_FORGE_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  ifdef TDOA_FORGE_BUILDING
#    define TF_API __declspec(dllexport)
#  else
#    define TF_API __declspec(dllimport)
#  endif
#else
#  define TF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. The first four double as CLI exit codes. */
typedef enum tf_status {
  TF_OK = 0,
  TF_ERR_INPUT = 1,          /* unreadable or invalid input file, bad argument */
  TF_ERR_TARGET_NOT_MET = 2, /* optimization finished but missed the target */
  TF_ERR_DIVERGENCE = 3,     /* filter diverged; outputs are still written */
  TF_ERR_DEGENERATE = 4,     /* geometry does not allow the requested quantity */
  TF_ERR_IO = 5,             /* output could not be written */
  TF_ERR_INTERNAL = 6
} tf_status;

/* Message of the last failing call on this thread; never NULL. */
TF_API const char* tf_last_error(void);
TF_API const char* tf_version(void);

typedef struct tf_environment tf_environment;
typedef struct tf_placement tf_placement;
typedef struct tf_targets tf_targets;
typedef struct tf_scenario tf_scenario;

TF_API tf_status tf_environment_load(const char* path, tf_environment** out);
TF_API void tf_environment_free(tf_environment* env);

TF_API tf_status tf_placement_load(const char* path, tf_placement** out);
TF_API tf_status tf_placement_save(const tf_placement* placement, const char* path);
TF_API size_t tf_placement_anchor_count(const tf_placement* placement);
TF_API void tf_placement_free(tf_placement* placement);

TF_API tf_status tf_targets_load(const char* path, tf_targets** out);
TF_API void tf_targets_free(tf_targets* targets);

TF_API tf_status tf_scenario_load(const char* path, tf_scenario** out);
TF_API void tf_scenario_free(tf_scenario* scenario);

/* Profile names: "arena", "staircase", "multiroom". */
TF_API int tf_profile_valid(const char* name);

/* Point queries. Quaternions are scalar first, body to inertial. */
TF_API tf_status tf_tdoa_predict(const tf_placement* placement, int i, int j, const double position[3],
                                 const double quaternion[4], const double lever_arm[3], double* out);
/* Writes sqrt of the MSE lower bound; +inf for unobservable points. */
TF_API tf_status tf_rmse_lower_bound(const tf_environment* env, const tf_placement* placement,
                                     const double point[3], const char* profile, double* out);

typedef enum tf_pairing { TF_PAIRING_RING = 0, TF_PAIRING_DISJOINT = 1 } tf_pairing;

typedef struct tf_optimize_options {
  double rmse_target;  /* m */
  int min_anchors;
  int max_anchors;
  tf_pairing pairing;
  double resolution;   /* m, candidate spacing on the boundary faces */
  uint64_t seed;       /* selects the first spread-initialization candidate */
  int max_sweeps;
  double tol;
  const char* profile;
} tf_optimize_options;

TF_API void tf_optimize_options_init(tf_optimize_options* options);

/* Writes the placement and report files. Returns TF_ERR_TARGET_NOT_MET after
   writing the best attempt when the target is out of reach. */
TF_API tf_status tf_placement_optimize(const tf_environment* env, const tf_targets* targets,
                                       const tf_optimize_options* options, const char* placement_out,
                                       const char* report_out, double* aggregate_rmse, int* anchor_count);

TF_API tf_status tf_heatmap_write(const tf_environment* env, const tf_placement* placement, double height,
                                  double resolution, const char* profile, const char* csv_out);

/* Runs `trials` seeds starting at the scenario seed and writes log.jsonl,
   estimates.jsonl, gating.json, summary.json and errors.csv of the first
   trial plus monte_carlo.json under out_dir. */
TF_API tf_status tf_sim_run(const tf_scenario* scenario, int trials, const char* out_dir);

typedef struct tf_estimate_options {
  const char* profile;
  double lever_arm[3];
  int chi_square_gate;
} tf_estimate_options;

TF_API void tf_estimate_options_init(tf_estimate_options* options);

TF_API tf_status tf_estimate_run(const char* log_path, const tf_placement* placement,
                                 const tf_estimate_options* options, const char* estimates_out,
                                 const char* gating_out);

/* Compares an estimate log with the ground-truth records of a measurement
   log. With a scenario, the CSV of per-sample error and bound is written
   when csv_out is not NULL and the warm-up comes from the scenario. */
TF_API tf_status tf_eval_run(const char* estimates_path, const char* ground_truth_path,
                             const tf_scenario* scenario, const char* summary_out, const char* csv_out);

#ifdef __cplusplus
}
#endif

#endif
