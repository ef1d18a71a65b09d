/* Hierarchical zero-shot learning: C interface.
 *
 * Every function returns an hzsl_status. On failure the calling thread's
 * last-error message (hzsl_last_error_message) describes the problem.
 * Objects are opaque handles released with the matching *_free function.
 * Strings returned through `char**` outputs are released with
 * hzsl_string_free. */
#ifndef HZSL_HZSL_H
#define HZSL_HZSL_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define HZSL_API __declspec(dllexport)
#else
#define HZSL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum hzsl_status {
  HZSL_OK = 0,
  HZSL_INVALID_ARGUMENT = 1,
  HZSL_IO = 2,
  HZSL_PARSE = 3,
  HZSL_MULTIPLE_PARENTS = 10,
  HZSL_CYCLE_DETECTED = 11,
  HZSL_MULTIPLE_ROOTS = 12,
  HZSL_DISCONNECTED = 13,
  HZSL_UNKNOWN_KEEP_LABEL = 14,
  HZSL_NO_ARBORESCENCE = 15,
  HZSL_LEVEL_BELOW_NODE = 16,
  HZSL_UNKNOWN_LABEL = 17,
  HZSL_MISSING_LABEL = 20,
  HZSL_DIMENSION_MISMATCH = 21,
  HZSL_MALFORMED_HEADER = 22,
  HZSL_ZERO_VECTOR = 23,
  HZSL_LABEL_OUTSIDE_TRAIN_SET = 30,
  HZSL_EMPTY_DATASET = 31,
  HZSL_MISSING_ATTRIBUTE = 32,
  HZSL_DEGENERATE_Z = 33,
  HZSL_NON_FINITE_ENERGY = 40,
  HZSL_EMPTY_LEVEL = 41,
  HZSL_EMPTY_CANDIDATES = 42,
  HZSL_CANDIDATE_ABOVE_LEVEL = 43,
  HZSL_DEGENERATE_TREE = 50,
  HZSL_EMPTY_LIST = 51,
  HZSL_CROSS_FILE_INCONSISTENCY = 60,
  HZSL_CONFIG_INVALID = 61,
  HZSL_EMPTY_SPLIT = 62,
  HZSL_MISSING_PREREQUISITE_CHECKPOINT = 70,
  HZSL_FINGERPRINT_MISMATCH = 71,
  HZSL_NUMERICAL_CHECK_FAILED = 80,
  HZSL_INTERNAL = 99
} hzsl_status;

typedef struct hzsl_hierarchy hzsl_hierarchy;
typedef struct hzsl_dataset hzsl_dataset;
typedef struct hzsl_model hzsl_model;

/* ---- diagnostics ------------------------------------------------------ */

HZSL_API const char* hzsl_version(void);
/* Stable kebab-case name of a status, e.g. "cycle-detected". */
HZSL_API const char* hzsl_status_name(hzsl_status status);
/* Message of the last failure on this thread ("" if none). Valid until the
 * next failing call on the same thread. */
HZSL_API const char* hzsl_last_error_message(void);
HZSL_API void hzsl_string_free(char* s);

/* ---- hierarchy -------------------------------------------------------- */

/* Edge-list file, "child<TAB>parent" per line (optional third column: weight,
 * ignored here). */
HZSL_API hzsl_status hzsl_hierarchy_load(const char* path,
                                         hzsl_hierarchy** out);
/* children[i] is-a parents[i]. */
HZSL_API hzsl_status hzsl_hierarchy_from_edges(const char* const* children,
                                               const char* const* parents,
                                               size_t n_edges,
                                               hzsl_hierarchy** out);
HZSL_API void hzsl_hierarchy_free(hzsl_hierarchy* h);
HZSL_API hzsl_status hzsl_hierarchy_save(const hzsl_hierarchy* h,
                                         const char* path);

/* Node ids are dense, 0..size-1, assigned in sorted label order. */
HZSL_API size_t hzsl_hierarchy_size(const hzsl_hierarchy* h);
HZSL_API int32_t hzsl_hierarchy_root(const hzsl_hierarchy* h);
HZSL_API hzsl_status hzsl_hierarchy_id(const hzsl_hierarchy* h,
                                       const char* label, int32_t* out);
/* The returned pointer lives as long as `h`. */
HZSL_API hzsl_status hzsl_hierarchy_label(const hzsl_hierarchy* h,
                                          int32_t id, const char** out);
HZSL_API hzsl_status hzsl_hierarchy_parent(const hzsl_hierarchy* h,
                                           int32_t id, int32_t* out);
HZSL_API hzsl_status hzsl_hierarchy_depth(const hzsl_hierarchy* h,
                                          int32_t id, int32_t* out);
HZSL_API hzsl_status hzsl_hierarchy_ancestor(const hzsl_hierarchy* h,
                                             int32_t id, int32_t level,
                                             int32_t* out);
HZSL_API hzsl_status hzsl_hierarchy_distance(const hzsl_hierarchy* h,
                                             int32_t a, int32_t b,
                                             int32_t* out);
HZSL_API uint64_t hzsl_hierarchy_fingerprint(const hzsl_hierarchy* h);

/* Prunes `graph_path` to the labels in `keep_path`, extracts the maximum
 * arborescence rooted at `root` and writes it to `out_path`. */
HZSL_API hzsl_status hzsl_build_tree(const char* graph_path,
                                     const char* keep_path, const char* root,
                                     const char* out_path, size_t* n_nodes,
                                     size_t* n_leaves);

/* ---- utilities -------------------------------------------------------- */

typedef enum hzsl_utility {
  HZSL_UTILITY_EXACT = 0,
  HZSL_UTILITY_PATH_LENGTH = 1,
  HZSL_UTILITY_SUBTREE_DEPTH = 2
} hzsl_utility;

HZSL_API hzsl_status hzsl_utility_value(const hzsl_hierarchy* h,
                                        hzsl_utility kind, int32_t predicted,
                                        int32_t truth, double* out);

/* ---- datasets --------------------------------------------------------- */

typedef struct hzsl_synth_config {
  int32_t depth;
  int32_t branching;
  int32_t feature_dim;
  int32_t embed_dim;
  int32_t instances_per_leaf;
  double test_fraction;
  double zeroshot_fraction;
  double novel_fraction;
  double separation;
  double attribute_noise;
  uint64_t seed;
} hzsl_synth_config;

HZSL_API void hzsl_synth_config_default(hzsl_synth_config* cfg);
/* Writes hierarchy.tsv, embeddings.txt, features.tsv, splits.tsv. */
HZSL_API hzsl_status hzsl_synth_write(const hzsl_synth_config* cfg,
                                      const char* out_dir);

/* Loads the four dataset files from `dir`. */
HZSL_API hzsl_status hzsl_dataset_load(const char* dir, hzsl_dataset** out);
HZSL_API void hzsl_dataset_free(hzsl_dataset* ds);
/* Borrowed; lives as long as `ds`. */
HZSL_API const hzsl_hierarchy* hzsl_dataset_hierarchy(const hzsl_dataset* ds);
HZSL_API int32_t hzsl_dataset_feature_dim(const hzsl_dataset* ds);
/* Instance count of a split ("train", "train-classes", ...); 0 if absent. */
HZSL_API size_t hzsl_dataset_split_size(const hzsl_dataset* ds,
                                        const char* split);
/* Attribute table in the embedding text format. */
HZSL_API hzsl_status hzsl_dataset_dump_attributes(const hzsl_dataset* ds,
                                                  char** out);
/* Rows of `embeddings_path` for exactly the nodes of `h`, in the embedding
 * text format. */
HZSL_API hzsl_status hzsl_dump_attributes(const hzsl_hierarchy* h,
                                          const char* embeddings_path,
                                          char** out);

/* ---- training --------------------------------------------------------- */

/* model: "conse-head", "devise" or "crf". config_path may be NULL for the
 * defaults. For "crf", head_ckpt and compat_ckpt are required. The loss
 * trace is written to loss_path when it is not NULL. */
HZSL_API hzsl_status hzsl_train(const hzsl_dataset* ds, const char* model,
                                const char* config_path, const char* head_ckpt,
                                const char* compat_ckpt, uint64_t seed,
                                int seed_given, const char* out_ckpt,
                                const char* loss_path);

/* Default training configuration as JSON. */
HZSL_API hzsl_status hzsl_default_train_config(char** out_json);

/* ---- evaluation ------------------------------------------------------- */

typedef struct hzsl_eval_request {
  const char* task;     /* finegrained-train|finegrained-zeroshot|level-<l>|free */
  const char* split;    /* NULL for the task's default split */
  const char* methods;  /* comma-separated, e.g. "crf-native,lifted:devise" */
  hzsl_utility utility;
  int pathlen_max_depth; /* nonzero: normalize U_PL by max depth */
  int32_t conse_m;
  const char* head_ckpt;   /* each may be NULL */
  const char* compat_ckpt;
  const char* crf_ckpt;
  uint64_t seed;
  int timing;              /* nonzero: record wall-clock seconds */
  const char* report_path; /* may be NULL */
} hzsl_eval_request;

HZSL_API void hzsl_eval_request_default(hzsl_eval_request* req);
/* On success *table holds the human-readable report. */
HZSL_API hzsl_status hzsl_eval(const hzsl_dataset* ds,
                               const hzsl_eval_request* req, char** table);

/* ---- models ----------------------------------------------------------- */

HZSL_API hzsl_status hzsl_model_load(const char* crf_ckpt,
                                     const hzsl_dataset* ds, hzsl_model** out);
HZSL_API void hzsl_model_free(hzsl_model* m);
/* Path probabilities for one feature vector; `out` has hierarchy-size
 * entries indexed by node id. */
HZSL_API hzsl_status hzsl_model_path_distribution(const hzsl_model* m,
                                                  const double* features,
                                                  size_t dim, double* out,
                                                  size_t out_len);
/* Expected-utility maximizing node. */
HZSL_API hzsl_status hzsl_model_predict(const hzsl_model* m,
                                        const double* features, size_t dim,
                                        hzsl_utility utility, int32_t* node,
                                        double* expected_utility);

/* ---- gradient check --------------------------------------------------- */

typedef struct hzsl_gradcheck_result {
  int passed;
  double max_rel_error; /* over all groups except the bias */
  double max_bias_grad;
} hzsl_gradcheck_result;

/* `report` (may be NULL) receives one line per parameter group. */
HZSL_API hzsl_status hzsl_gradcheck(uint64_t seed, int32_t tree_size,
                                    int32_t points, int corrupt,
                                    hzsl_gradcheck_result* result,
                                    char** report);

#ifdef __cplusplus
}
#endif

#endif /* HZSL_HZSL_H */
