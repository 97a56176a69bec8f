/* groupce - hierarchical group-wise ranking for CTR/CVR models.
 *
 * C interface over the training stack: opaque handles, status codes, and
 * heap strings the caller releases with gce_string_free(). Thread safety:
 * handles are not synchronized; share them only with external locking.
 * gce_last_error() is thread-local.
 */
#ifndef GROUPCE_H
#define GROUPCE_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum gce_status {
    GCE_OK = 0,
    GCE_ERR_ARGUMENT = 1,
    GCE_ERR_CONFIG = 2,
    GCE_ERR_DATA = 3,
    GCE_ERR_IO = 4,
    GCE_ERR_SHAPE = 5,
    GCE_ERR_DIVERGED = 6,
    GCE_ERR_METRIC = 7,
    GCE_ERR_DIAGNOSTIC = 8,
    GCE_ERR_INTERNAL = 9
} gce_status;

typedef struct gce_config gce_config;

const char* gce_version(void);

/* Message for the most recent failure on this thread; empty if none. */
const char* gce_last_error(void);

/* Configs are `section.key = value` text files; see the repository README
 * for the key list. The handle must be released with gce_config_free(). */
gce_status gce_config_load(const char* path, gce_config** out_cfg);
gce_status gce_config_from_text(const char* text, gce_config** out_cfg);
gce_status gce_config_set(gce_config* cfg, const char* key, const char* value);
void gce_config_free(gce_config* cfg);

/* Trains under the config, writing run artifacts (config copy, split
 * manifests, metrics history, checkpoint, report) into out_dir. On success
 * *out_summary_json receives the run report. */
gce_status gce_train(const gce_config* cfg, const char* out_dir, char** out_summary_json);

/* Scores a CSV with a checkpoint. rows_manifest_path may be NULL to use all
 * rows. cold_max > 0 enables cold/warm/other cohort sections (thresholds in
 * training-split impressions). */
gce_status gce_evaluate(const char* checkpoint_path, const char* csv_path,
                        const char* rows_manifest_path, int cold_max, int warm_max,
                        char** out_report_json);

/* One train+eval per (K, L) grid cell; writes <out_dir>/heatmap.csv and
 * returns its text. */
gce_status gce_sweep(const gce_config* cfg, const char* out_dir, char** out_heatmap_csv);

/* Writes data.csv, clusters.csv and the config copy for the generator
 * section of cfg. */
gce_status gce_generate_data(const gce_config* cfg, const char* out_dir);

/* Negative-sampling gradient-variance diagnostic for one positive and its
 * in-batch negatives. */
gce_status gce_diagnose_sampling(const char* checkpoint_path, const gce_config* cfg,
                                 char** out_report_json);

void gce_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* GROUPCE_H */
