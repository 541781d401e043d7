#ifndef UNIFCONSERV_H
#define UNIFCONSERV_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Result code of every fallible call.
typedef enum UcStatus {
  UC_STATUS_OK = 0,
  UC_STATUS_NULL_POINTER = 1,
  UC_STATUS_INVALID_UTF8 = 2,
  UC_STATUS_INVALID_MODEL = 3,
  UC_STATUS_DIMENSION_MISMATCH = 4,
  UC_STATUS_INVALID_ACTION = 5,
  UC_STATUS_CONFIG = 6,
  UC_STATUS_GENERATION = 7,
  UC_STATUS_META_EPISODE_CAP = 8,
  UC_STATUS_ASSUMPTION = 9,
  UC_STATUS_IO = 10,
  UC_STATUS_JSON = 11,
  UC_STATUS_CSV = 12,
  UC_STATUS_OUT_OF_RANGE = 13,
  UC_STATUS_PANIC = 14,
} UcStatus;

// A tabular MDP.
typedef struct UcMdp UcMdp;

// The log of one agent run.
typedef struct UcRun UcRun;

// One row of a run log.
typedef struct UcEpisodeRecord {
  size_t episode;
  double ret;
  double regret;
  double cum_regret;
  bool violated;
  double max_deficit;
  size_t meta_index;
  size_t meta_episode_n;
  size_t ucb_steps;
} UcEpisodeRecord;

// Totals over a run.
typedef struct UcRunTotals {
  size_t episodes;
  size_t violations;
  double cum_regret;
  double optimal_value;
  size_t meta_completed;
  size_t meta_malformed;
  size_t sandwich_failures;
  double max_zeta;
} UcRunTotals;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread. Valid until the next
// failing call on the same thread; empty if nothing failed yet.
const char *uc_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *uc_version(void);

// Releases a string returned by this library.
//
// # Safety
// `s` must come from this library and not have been freed.
void uc_string_free(char *s);

// Builds an MDP from an environment spec (`{"kind": ...}`) or a tabular
// MDP document.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a valid pointer.
enum UcStatus uc_mdp_from_json(const char *json, struct UcMdp **out);

// Builds the default inventory-control MDP.
//
// # Safety
// `out` must be a valid pointer.
enum UcStatus uc_mdp_inventory_default(struct UcMdp **out);

// # Safety
// `mdp` must come from this library and not have been freed.
void uc_mdp_free(struct UcMdp *mdp);

// # Safety
// `mdp` must be a live handle; the out pointers must be valid.
enum UcStatus uc_mdp_dims(const struct UcMdp *mdp,
                          size_t *num_states,
                          size_t *num_actions,
                          size_t *horizon);

// Serializes the MDP in the tabular JSON format.
//
// # Safety
// `mdp` must be a live handle and `out` a valid pointer.
enum UcStatus uc_mdp_to_json(const struct UcMdp *mdp, char **out);

// Optimal value `V*` at step 0 from the initial state.
//
// # Safety
// `mdp` must be a live handle and `out` a valid pointer.
enum UcStatus uc_mdp_optimal_value(const struct UcMdp *mdp, double *out);

// Worst-case diameter; `INFINITY` when some policy never reaches some
// state.
//
// # Safety
// `mdp` must be a live handle and `out` a valid pointer.
enum UcStatus uc_mdp_worst_case_diameter(const struct UcMdp *mdp, double *out);

// `2 · max V − Q` of the optimal policy.
//
// # Safety
// `mdp` must be a live handle and `out` a valid pointer.
enum UcStatus uc_mdp_eta_min(const struct UcMdp *mdp, double *out);

// Full assumption-check report as JSON.
//
// # Safety
// `mdp` must be a live handle and `out` a valid pointer.
enum UcStatus uc_check_env(const struct UcMdp *mdp,
                           double eta,
                           size_t random_policies,
                           uint64_t seed,
                           char **out);

// Runs one agent for `total_episodes` episodes after a uniform-random
// warm start of `warm_start_episodes`, seeded like an experiment cell.
//
// `agent` is `"unif_conserv_ucbvi"`, `"ucbvi"` or `"baseline_only"`;
// `config_json` is an agent configuration object or null for defaults.
// `eta` overrides the configuration's budget.
//
// # Safety
// `mdp` must be a live handle, the strings NUL-terminated (or null for
// `config_json`) and `out` a valid pointer.
enum UcStatus uc_run_agent(const struct UcMdp *mdp,
                           const char *agent,
                           const char *config_json,
                           double eta,
                           size_t total_episodes,
                           size_t warm_start_episodes,
                           uint64_t seed,
                           struct UcRun **out);

// # Safety
// `run` must come from this library and not have been freed.
void uc_run_free(struct UcRun *run);

// Number of episodes in the log; 0 for a null handle.
//
// # Safety
// `run` must be a live handle or null.
size_t uc_run_len(const struct UcRun *run);

// Copies row `index` (zero-based) into `out`.
//
// # Safety
// `run` must be a live handle and `out` a valid pointer.
enum UcStatus uc_run_record(const struct UcRun *run, size_t index, struct UcEpisodeRecord *out);

// # Safety
// `run` must be a live handle and `out` a valid pointer.
enum UcStatus uc_run_totals(const struct UcRun *run, struct UcRunTotals *out);

// The log as CSV text with the experiment columns.
//
// # Safety
// `run` must be a live handle and `out` a valid pointer.
enum UcStatus uc_run_to_csv(const struct UcRun *run, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* UNIFCONSERV_H */
