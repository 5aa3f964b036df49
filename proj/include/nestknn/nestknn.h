#ifndef NESTKNN_H
#define NESTKNN_H

/* C interface to the nested-KNN precipitation phase retrieval library.
 *
 * Every function returns a status code; on failure the per-thread message
 * from nestknn_last_error() describes what went wrong. Objects returned
 * through out-parameters are owned by the caller and released with the
 * matching _free function. Strings returned through char** out-parameters
 * are released with nestknn_string_free.
 */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes; the CLI reuses them as exit codes. */
#define NESTKNN_OK 0
#define NESTKNN_CONFIG_ERROR 2
#define NESTKNN_DATA_ERROR 3
#define NESTKNN_INTERNAL_ERROR 4

typedef struct nestknn_config nestknn_config;
typedef struct nestknn_database nestknn_database;
typedef struct nestknn_params nestknn_params;

/* Message from the most recent failing call on this thread; never NULL. */
const char* nestknn_last_error(void);

const char* nestknn_version(void);

void nestknn_string_free(char* s);

/* ---- configuration ---- */

int nestknn_config_default(nestknn_config** out);
int nestknn_config_load(const char* path, nestknn_config** out);
void nestknn_config_free(nestknn_config* cfg);

/* ---- pipeline steps; all operate on files ---- */

/* Reads matched samples, builds the balanced database, persists it.
 * Summary text (strata counts, exclusions) is optional: pass NULL to skip. */
int nestknn_build_db(const nestknn_config* cfg, const char* samples_path,
                     const char* db_path, char** summary);

int nestknn_database_open(const char* db_path, nestknn_database** out);
void nestknn_database_free(nestknn_database* db);

/* Calibrates stage parameters against a database. Writes the parameter
 * file, a combined ROC report, and one ROC file per (stage, land, k) under
 * roc_dir when roc_dir is non-NULL. */
int nestknn_calibrate(const nestknn_config* cfg, const nestknn_database* db,
                      const char* samples_path, const char* params_path,
                      const char* roc_report_path, const char* roc_dir,
                      char** summary);

int nestknn_params_load(const char* path, nestknn_params** out);
void nestknn_params_free(nestknn_params* params);

/* Runs the cascade over a query sample file. workers <= 0 uses the config
 * thread count; results do not depend on the worker count. */
int nestknn_retrieve(const nestknn_config* cfg, const nestknn_database* db,
                     const nestknn_params* params, const char* query_path,
                     const char* detections_path, int workers,
                     char** summary);

/* Scores detections against truth samples and writes the metrics report. */
int nestknn_evaluate(const nestknn_config* cfg, const char* detections_path,
                     const char* truth_path, const char* report_path,
                     char** summary);

/* Grids detections. mode_occurrence 0 grids phase indices over
 * precipitating detections, 1 grids the 0/1 occurrence flag over all.
 * season is "winter", "summer" or NULL for no filter. Output paths may be
 * NULL to skip that artifact. */
int nestknn_grid(const nestknn_config* cfg, const char* detections_path,
                 int mode_occurrence, const char* season,
                 const char* grid_text_path, const char* grid_binary_path,
                 const char* zonal_path, char** summary);

/* Merges binary partial grids; geometry must match. Either output may be
 * NULL. */
int nestknn_grid_merge(const char* const* inputs, size_t n_inputs,
                       const char* out_binary_path, const char* out_text_path);

/* Generates synthetic build/holdout sample files from a manifest.
 * binary_format 0 writes text, 1 writes the binary columnar format. */
int nestknn_synth(const char* manifest_path, const char* build_path,
                  const char* holdout_path, int binary_format,
                  char** summary);

/* Checksum of any file (the envelope hash for binary artifacts, a plain
 * content hash for text). */
int nestknn_file_checksum(const char* path, uint64_t* out);

#ifdef __cplusplus
}
#endif

#endif /* NESTKNN_H */
