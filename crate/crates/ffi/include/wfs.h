#ifndef WFS_H
#define WFS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum WfsStatus {
  WFS_STATUS_OK = 0,
  /**
   * Null pointer, non-UTF-8 string or out-of-range index.
   */
  WFS_STATUS_INVALID_ARGUMENT = 1,
  /**
   * The input parsed but failed a physical validity check.
   */
  WFS_STATUS_INVALID_SCENARIO = 2,
  /**
   * The JSON text could not be parsed.
   */
  WFS_STATUS_JSON = 3,
  /**
   * The witness does not apply to this scenario.
   */
  WFS_STATUS_NOT_APPLICABLE = 4,
  /**
   * The caller's output buffer is too short.
   */
  WFS_STATUS_BUFFER_TOO_SMALL = 5,
  WFS_STATUS_PANIC = 6,
} WfsStatus;

/**
 * Opaque two-party scenario.
 */
typedef struct WfsBipartite WfsBipartite;

/**
 * Opaque single-party scenario.
 */
typedef struct WfsScenario WfsScenario;

typedef struct WfsWitness {
  double value;
  double bound;
  bool violated;
} WfsWitness;

typedef struct WfsChsh {
  double p0;
  double p1;
  double ps;
  /**
   * Largest `P_1` reachable under AoM at this `P_0`.
   */
  double p1_bound;
  bool p1_violated;
  bool ps_violated;
} WfsChsh;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null after a success.
 * The pointer stays valid until the next `wfs_*` call on the same thread.
 */
const char *wfs_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *wfs_version(void);

/**
 * Parses a single-party scenario document. On success `*out` owns a handle
 * to release with [`wfs_scenario_free`].
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a writable pointer.
 */
enum WfsStatus wfs_scenario_from_json(const char *json, struct WfsScenario **out);

/**
 * # Safety
 * `s` must be null or a handle from [`wfs_scenario_from_json`] that was not
 * freed yet.
 */
void wfs_scenario_free(struct WfsScenario *s);

/**
 * Number of non-null outcomes of `Ω`, i.e. `d·n`. Zero for a null handle.
 *
 * # Safety
 * `s` must be null or a live handle.
 */
size_t wfs_scenario_outcome_count(const struct WfsScenario *s);

/**
 * Runs one trial with Friend setting `x` and Wigner operation `w`. Writes
 * `p(a|x', U_w)` at `probs[x'·d + a]` and the null-outcome probability at
 * `*null_out`.
 *
 * # Safety
 * `s` must be a live handle, `probs` must point to `len` writable doubles
 * and `null_out` must be writable.
 */
enum WfsStatus wfs_run_trial(const struct WfsScenario *s,
                             size_t x,
                             size_t w,
                             double *probs,
                             size_t len,
                             double *null_out);

/**
 * Evaluates `T` with Wigner operation `w` against its AoM bound ½.
 *
 * # Safety
 * `s` must be a live handle and `out` writable.
 */
enum WfsStatus wfs_eval_t(const struct WfsScenario *s, size_t w, struct WfsWitness *out);

/**
 * Evaluates `T(q)` for the `q_len` target probabilities at `q` against its
 * AoM bound `max q`.
 *
 * # Safety
 * `s` must be a live handle, `q` must point to `q_len` readable doubles and
 * `out` must be writable.
 */
enum WfsStatus wfs_eval_tq(const struct WfsScenario *s,
                           size_t w,
                           const double *q,
                           size_t q_len,
                           struct WfsWitness *out);

/**
 * Parses a two-party scenario document.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a writable pointer.
 */
enum WfsStatus wfs_bipartite_from_json(const char *json, struct WfsBipartite **out);

/**
 * The NoM strategy reaching `P_0 = ¾` and `P_1 = cos²(π/8)`.
 *
 * # Safety
 * `out` must be a writable pointer.
 */
enum WfsStatus wfs_bipartite_violating_strategy(struct WfsBipartite **out);

/**
 * # Safety
 * `bs` must be null or a live handle.
 */
void wfs_bipartite_free(struct WfsBipartite *bs);

/**
 * Writes the 32 joint probabilities `p(a,b|x,y,U_w)` at index
 * `16w + 8x + 4y + 2a + b`.
 *
 * # Safety
 * `bs` must be a live handle and `out` must point to `len` writable doubles.
 */
enum WfsStatus wfs_bipartite_joint_table(const struct WfsBipartite *bs, double *out, size_t len);

/**
 * Evaluates `P_0`, `P_1` and `P_S` with their AoM bounds.
 *
 * # Safety
 * `bs` must be a live handle and `out` writable.
 */
enum WfsStatus wfs_bipartite_eval(const struct WfsBipartite *bs, struct WfsChsh *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WFS_H */
