#ifndef LSC_H
#define LSC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LscStatus {
  LSC_STATUS_OK = 0,
  LSC_STATUS_NULL_POINTER = 1,
  LSC_STATUS_INVALID_UTF8 = 2,
  LSC_STATUS_PARSE = 3,
  LSC_STATUS_INVALID_ARGUMENT = 4,
  LSC_STATUS_NUMERIC = 5,
  LSC_STATUS_PANIC = 6,
} LscStatus;

/*
 Certificate tied to the graph it was built for.
 */
typedef struct LscCertificate LscCertificate;

/*
 Graph with observed and latent nodes.
 */
typedef struct LscGraph LscGraph;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread; empty after success.
 Valid until the next `lsc_*` call on the same thread.
 */
const char *lsc_last_error(void);

/*
 Static description of a status code.
 */
const char *lsc_status_str(enum LscStatus status);

/*
 # Safety
 `s` must be null or a string returned by this library.
 */
void lsc_string_free(char *s);

/*
 Parses `{"observed": [...], "latent": [...], "edges": [[tail, head], ...]}`.

 # Safety
 `json` must be a nul-terminated string and `out` a valid pointer.
 */
enum LscStatus lsc_graph_from_json(const char *json, struct LscGraph **out);

/*
 # Safety
 `g` must be null or a handle from this library, freed at most once.
 */
void lsc_graph_free(struct LscGraph *g);

/*
 # Safety
 `g` must be a valid graph handle and `out` a valid pointer.
 */
enum LscStatus lsc_graph_to_json(const struct LscGraph *g, char **out);

/*
 # Safety
 `g` must be a valid graph handle; null out-pointers are skipped.
 */
enum LscStatus lsc_graph_counts(const struct LscGraph *g, size_t *n_observed, size_t *n_latent);

/*
 Canonical graph of `g` as a new handle.

 # Safety
 `g` must be a valid graph handle and `out` a valid pointer.
 */
enum LscStatus lsc_graph_canonicalize(const struct LscGraph *g, struct LscGraph **out);

/*
 Runs the decision procedure with `|H1| + |H2| <= k`, or no bound when
 `k < 0`. Writes whether every node was solved; `cert` (if not null)
 receives the certificate of the solved nodes.

 # Safety
 `g` must be a valid graph handle and `identifiable` a valid pointer.
 */
enum LscStatus lsc_decide(const struct LscGraph *g,
                          int64_t k,
                          bool *identifiable,
                          struct LscCertificate **cert);

/*
 # Safety
 `g` must be a valid graph handle, `json` a nul-terminated string and
 `out` a valid pointer.
 */
enum LscStatus lsc_certificate_from_json(const struct LscGraph *g,
                                         const char *json,
                                         struct LscCertificate **out);

/*
 # Safety
 `c` must be null or a handle from this library, freed at most once.
 */
void lsc_certificate_free(struct LscCertificate *c);

/*
 # Safety
 `c` must be a valid certificate handle and `out` a valid pointer.
 */
enum LscStatus lsc_certificate_to_json(const struct LscCertificate *c, char **out);

/*
 Checks every step, the step order and completeness. `valid` is false
 for a certificate that parses but does not verify; the reason is then
 available from [`lsc_last_error`].

 # Safety
 `c` must be a valid certificate handle and `valid` a valid pointer.
 */
enum LscStatus lsc_certificate_verify(const struct LscCertificate *c, bool *valid);

/*
 Samples parameters from `seed`, recovers the semi-direct effects along
 the certificate from the implied covariance matrix and writes the
 largest absolute errors of the recovered effects and of the recovered
 latent-subgraph covariance. Null out-pointers are skipped.

 # Safety
 `c` must be a valid certificate handle.
 */
enum LscStatus lsc_recover_round_trip(const struct LscCertificate *c,
                                      uint64_t seed,
                                      double *lambda_error,
                                      double *omega_error);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LSC_H */
