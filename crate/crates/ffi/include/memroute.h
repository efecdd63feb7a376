#ifndef MEMROUTE_H
#define MEMROUTE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MrPipeline {
  MR_PIPELINE_BASELINE_FTS = 0,
  MR_PIPELINE_ENRICHED_FTS = 1,
  MR_PIPELINE_EMBEDDINGS = 2,
  MR_PIPELINE_HYBRID = 3,
  MR_PIPELINE_ENRICHED_HYBRID = 4,
} MrPipeline;

typedef enum MrQueryType {
  MR_QUERY_TYPE_KNOWLEDGE_UPDATE = 0,
  MR_QUERY_TYPE_MULTI_SESSION = 1,
  MR_QUERY_TYPE_SINGLE_SESSION_ASSISTANT = 2,
  MR_QUERY_TYPE_SINGLE_SESSION_PREFERENCE = 3,
  MR_QUERY_TYPE_SINGLE_SESSION_USER = 4,
  MR_QUERY_TYPE_TEMPORAL_REASONING = 5,
  MR_QUERY_TYPE_ABSTENTION = 6,
} MrQueryType;

typedef enum MrStatus {
  MR_STATUS_OK = 0,
  MR_STATUS_NULL_ARGUMENT = 1,
  MR_STATUS_INVALID_UTF8 = 2,
  MR_STATUS_INVALID_ARGUMENT = 3,
  MR_STATUS_IO = 4,
  MR_STATUS_CORRUPT = 5,
  MR_STATUS_CONFIG = 6,
  MR_STATUS_NOT_FOUND = 7,
  MR_STATUS_DATA = 8,
  MR_STATUS_INTERNAL = 9,
} MrStatus;

/**
 * Search results; ids stay valid until the handle is freed.
 */
typedef struct MrResults MrResults;

/**
 * A route table.
 */
typedef struct MrRouteTable MrRouteTable;

/**
 * An opened store.
 */
typedef struct MrStore MrStore;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static string.
 */
const char *mr_version(void);

/**
 * Message for the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *mr_last_error_message(void);

/**
 * Opens a store directory, verifying checksums.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum MrStatus mr_store_open(const char *path, struct MrStore **out);

/**
 * Attaches an embeddings sidecar used to embed queries.
 *
 * # Safety
 * `store` must come from [`mr_store_open`]; `sidecar_path` must be a
 * NUL-terminated string.
 */
enum MrStatus mr_store_attach_embeddings(struct MrStore *store, const char *sidecar_path);

/**
 * Number of sessions in the store, or 0 for a null handle.
 *
 * # Safety
 * `store` must be null or come from [`mr_store_open`].
 */
size_t mr_store_session_count(const struct MrStore *store);

/**
 * # Safety
 * `store` must be null or come from [`mr_store_open`], and not be used again.
 */
void mr_store_free(struct MrStore *store);

/**
 * Runs one pipeline and returns at most `k` results.
 *
 * # Safety
 * `store` must come from [`mr_store_open`]; `query` must be a NUL-terminated
 * string; `out` must be writable.
 */
enum MrStatus mr_search(const struct MrStore *store,
                        enum MrPipeline pipeline,
                        const char *query,
                        size_t k,
                        struct MrResults **out);

/**
 * Routes by `query_type` through `table` (the shipped table when null),
 * then searches. The chosen pipeline is written to `out_pipeline` when it
 * is non-null.
 *
 * # Safety
 * As [`mr_search`]; `table` must be null or a live route table handle.
 */
enum MrStatus mr_search_routed(const struct MrStore *store,
                               const struct MrRouteTable *table,
                               enum MrQueryType query_type,
                               const char *query,
                               size_t k,
                               enum MrPipeline *out_pipeline,
                               struct MrResults **out);

/**
 * # Safety
 * `results` must be null or a live results handle.
 */
size_t mr_results_len(const struct MrResults *results);

/**
 * Session id at 0-based `index`, or null when out of range. Owned by the
 * results handle.
 *
 * # Safety
 * `results` must be null or a live results handle.
 */
const char *mr_results_id(const struct MrResults *results, size_t index);

/**
 * Score at 0-based `index`, or NaN when out of range.
 *
 * # Safety
 * `results` must be null or a live results handle.
 */
double mr_results_score(const struct MrResults *results, size_t index);

/**
 * # Safety
 * `results` must be null or a live results handle, and not be used again.
 */
void mr_results_free(struct MrResults *results);

/**
 * The shipped route table.
 *
 * # Safety
 * `out` must be writable.
 */
enum MrStatus mr_route_table_shipped(struct MrRouteTable **out);

/**
 * Loads a route table from a TOML file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum MrStatus mr_route_table_load(const char *path, struct MrRouteTable **out);

/**
 * # Safety
 * `table` must be a live route table handle; `out` must be writable.
 */
enum MrStatus mr_route_table_resolve(const struct MrRouteTable *table,
                                     enum MrQueryType query_type,
                                     enum MrPipeline *out);

/**
 * # Safety
 * `table` must be null or a live route table handle, and not be used again.
 */
void mr_route_table_free(struct MrRouteTable *table);

/**
 * Classifies a query with the shipped rules.
 *
 * # Safety
 * `query` must be a NUL-terminated string; `out` must be writable.
 */
enum MrStatus mr_classify(const char *query, enum MrQueryType *out);

/**
 * All-or-nothing recall at `k` of a ranked id list against a gold set.
 *
 * # Safety
 * `retrieved` and `gold` must point to `n_retrieved` and `n_gold`
 * NUL-terminated strings (either may be null when its count is 0); `out`
 * must be writable.
 */
enum MrStatus mr_recall_all_at_k(const char *const *retrieved,
                                 size_t n_retrieved,
                                 const char *const *gold,
                                 size_t n_gold,
                                 size_t k,
                                 double *out);

/**
 * Binary-relevance NDCG at `k`.
 *
 * # Safety
 * As [`mr_recall_all_at_k`].
 */
enum MrStatus mr_ndcg_at_k(const char *const *retrieved,
                           size_t n_retrieved,
                           const char *const *gold,
                           size_t n_gold,
                           size_t k,
                           double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MEMROUTE_H */
