#ifndef MPSTREAM_H
#define MPSTREAM_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Result of every fallible call. `MPS_STATUS_OK` is zero.
typedef enum MpsStatus {
  MPS_STATUS_OK = 0,
  MPS_STATUS_NULL_POINTER = 1,
  MPS_STATUS_VALIDATION = 2,
  MPS_STATUS_REGIME = 3,
  MPS_STATUS_DOMAIN = 4,
  MPS_STATUS_NO_ANALYTIC_CGF = 5,
  MPS_STATUS_NUMERIC = 6,
  MPS_STATUS_INFEASIBLE = 7,
  MPS_STATUS_PARSE = 8,
  MPS_STATUS_CONFIG = 9,
  MPS_STATUS_IO = 10,
  MPS_STATUS_INTERNAL = 11,
} MpsStatus;

typedef enum MpsRegime {
  MPS_REGIME_UNDERLOAD = 0,
  MPS_REGIME_CRITICAL = 1,
  MPS_REGIME_OVERLOAD = 2,
} MpsRegime;

// How per-link terms are combined into one starvation bound.
typedef enum MpsVariant {
  // `1 - prod(1 - x_k)`
  MPS_VARIANT_PRODUCT = 0,
  // `min(sum x_k, 1)`
  MPS_VARIANT_UNION = 1,
} MpsVariant;

// Opaque ordered set of links.
typedef struct MpsLinkSet MpsLinkSet;

typedef struct MpsEstimate {
  double p_hat;
  double std_error;
  uint64_t runs;
} MpsEstimate;

typedef struct MpsPrebuffer {
  double b_margin;
  double total_prebuffer;
  double achieved_bound;
  // NaN when no closed form applies.
  double closed_form;
  enum MpsRegime regime;
} MpsPrebuffer;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *mps_version(void);

// Message for the most recent failure on this thread, empty after a
// success. Valid until the next `mps_*` call on the same thread.
const char *mps_last_error_message(void);

struct MpsLinkSet *mps_linkset_new(void);

// Accepts null.
void mps_linkset_free(struct MpsLinkSet *set);

enum MpsStatus mps_linkset_len(const struct MpsLinkSet *set, size_t *out_len);

enum MpsStatus mps_linkset_add_exponential(struct MpsLinkSet *set, double rate);

enum MpsStatus mps_linkset_add_gaussian(struct MpsLinkSet *set, double mean, double variance);

enum MpsStatus mps_linkset_add_csma(struct MpsLinkSet *set,
                                    double success,
                                    double window,
                                    double slot,
                                    uint32_t frames_per_chunk);

enum MpsStatus mps_linkset_add_scheduler(struct MpsLinkSet *set,
                                         double success,
                                         double slot,
                                         uint32_t frames_per_chunk);

enum MpsStatus mps_linkset_add_constant(struct MpsLinkSet *set, double delay);

// Resamples `len` observed delays; the values are copied.
enum MpsStatus mps_linkset_add_trace(struct MpsLinkSet *set, const double *delays, size_t len);

// Two-state link switching OFF→ON at `alpha` and ON→OFF at `beta`, sending
// at `peak` while ON, time-accelerated by `speed`.
enum MpsStatus mps_linkset_add_onoff(struct MpsLinkSet *set,
                                     double alpha,
                                     double beta,
                                     double peak,
                                     double speed);

// Fair rate sharing with `lambda`/`mu` competing-flow dynamics, truncated
// at `states` for simulation.
enum MpsStatus mps_linkset_add_fair_sharing(struct MpsLinkSet *set,
                                            double lambda,
                                            double mu,
                                            size_t states,
                                            double speed);

enum MpsStatus mps_linkset_sum_rate(const struct MpsLinkSet *set, double *out_sum_rate);

enum MpsStatus mps_linkset_regime(const struct MpsLinkSet *set, enum MpsRegime *out_regime);

// Writes the upper-balanced link (1-based) of chunks `1..=n_chunks` into
// `out_links`, which must hold `n_chunks` entries.
enum MpsStatus mps_schedule(const struct MpsLinkSet *set, size_t n_chunks, uint32_t *out_links);

// Monte Carlo starvation probability under the upper-balanced policy.
// `workers == 0` uses every available core; results do not depend on it.
enum MpsStatus mps_estimate_starvation(const struct MpsLinkSet *set,
                                       size_t n_chunks,
                                       double prebuffer,
                                       uint64_t runs,
                                       uint64_t seed,
                                       size_t workers,
                                       struct MpsEstimate *out);

// Chernoff upper bound at margin `b` (underload only unless `optimize`).
enum MpsStatus mps_chernoff_bound(const struct MpsLinkSet *set,
                                  size_t n_chunks,
                                  double b,
                                  enum MpsVariant combine,
                                  bool optimize,
                                  double *out_bound);

// Diffusion approximation; every link must be Markov-modulated.
enum MpsStatus mps_diffusion_bound(const struct MpsLinkSet *set,
                                   size_t n_chunks,
                                   double b,
                                   enum MpsVariant combine,
                                   double *out_bound);

// Smallest margin whose bound is at most `target`. Outside underload
// only Gaussian links are accepted.
enum MpsStatus mps_select_prebuffer(const struct MpsLinkSet *set,
                                    size_t n_chunks,
                                    double target,
                                    enum MpsVariant combine,
                                    struct MpsPrebuffer *out);

// Standard normal upper tail.
double mps_psi(double x);

// Principal branch of Lambert W, defined for `x >= -1/e`.
enum MpsStatus mps_lambert_w0(double x, double *out);

enum MpsStatus mps_asym_var_onoff(double alpha, double beta, double *out);

// Asymptotic variance for fair sharing, `r(n) = 1 / (1 + n)`.
enum MpsStatus mps_asym_var_fair_sharing(double lambda, double mu, double *out);

// Copies the last error into `buf` (NUL-terminated, truncated to fit).
// Returns the full message length excluding the terminator.
size_t mps_copy_last_error(char *buf, size_t cap);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MPSTREAM_H */
