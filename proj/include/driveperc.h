/*
 * driveperc C API: lane detection, model training/evaluation, gradient
 * checking, preprocessing and synthetic data generation behind opaque
 * handles. Every function returns a dp_status; on failure the thread-local
 * message from dp_last_error() describes what went wrong.
 */
#ifndef DRIVEPERC_H
#define DRIVEPERC_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef int32_t dp_status;

enum {
    DP_OK = 0,
    DP_ERR_PARAMETER = 1, /* invalid argument or configuration */
    DP_ERR_DIMENSION = 2, /* shape/size incompatibility */
    DP_ERR_FORMAT = 3,    /* malformed file contents */
    DP_ERR_IO = 4,        /* filesystem failure */
    DP_ERR_DATA = 5,      /* dataset-level problem */
    DP_ERR_PARTIAL = 6,   /* some inputs failed, the rest were processed */
    DP_ERR_UNKNOWN = 7
};

/* Message for the most recent failure on this thread ("" if none). */
const char* dp_last_error(void);

uint32_t dp_abi_version(void);

/* --- configuration ------------------------------------------------- */

typedef struct dp_config dp_config;

dp_status dp_config_create(dp_config** out);
void dp_config_free(dp_config* config);

/* Table-driven training defaults for signs|clone|segment|vehicles. */
dp_status dp_config_apply_task_defaults(dp_config* config, const char* task);
dp_status dp_config_load_file(dp_config* config, const char* path);
/* Dotted keys, e.g. "pipeline.canny_low". Unknown keys are rejected. */
dp_status dp_config_set(dp_config* config, const char* key, const char* value);
dp_status dp_config_get(const dp_config* config, const char* key, char* buffer, size_t size);
/* Full config text. Pass buffer=NULL to query the required size (incl. NUL). */
dp_status dp_config_dump(const dp_config* config, char* buffer, size_t size, size_t* required);

/* --- operations ---------------------------------------------------- */

typedef struct dp_lane_summary {
    int32_t processed;
    int32_t failed;
} dp_lane_summary;

/*
 * Runs the lane pipeline over a .ppm file or a directory of them. Per frame
 * writes <stem>.overlay.ppm and <stem>.lanes.txt, plus the gray/blur/canny/
 * roi/hough intermediates when write_stages is nonzero. Frame failures are
 * reported on stderr and counted; returns DP_ERR_PARTIAL if any frame failed.
 */
dp_status dp_lane_detect(const dp_config* config, const char* input_path, const char* output_dir,
                         int write_stages, int jobs, dp_lane_summary* summary);

typedef void (*dp_epoch_callback)(int32_t epoch, double loss, void* user);

/* Trains the factory model for the task and writes a checkpoint;
 * reproducible from the seed. */
dp_status dp_train(const dp_config* config, const char* task, const char* data_dir,
                   const char* out_checkpoint, uint64_t seed, dp_epoch_callback on_epoch, void* user);

/* format is "text" or "csv". */
dp_status dp_eval(const dp_config* config, const char* task, const char* data_dir,
                  const char* checkpoint, const char* report_path, const char* format);

/*
 * Finite-difference gradient verification of every layer and loss kind,
 * `rounds` random seeds per case (<= 0 means the default of 20). Prints one
 * "gradcheck <case> max_rel_err <v>" line per case to stderr and stores the
 * worst error.
 */
dp_status dp_gradcheck(uint64_t seed, int32_t rounds, double* max_rel_error);

dp_status dp_preprocess(const dp_config* config, const char* log_csv, const char* images_dir,
                        const char* out_dir, int32_t* count);

/* task is signs|vehicles|segmentation|lanes. */
dp_status dp_synth(const char* task, int32_t n, uint64_t seed, const char* out_dir);

/* --- models -------------------------------------------------------- */

typedef struct dp_model dp_model;

dp_status dp_model_load(const char* path, dp_model** out);
void dp_model_free(dp_model* model);

/* Number of doubles one input sample / one output requires. */
dp_status dp_model_input_size(const dp_model* model, size_t* out);
dp_status dp_model_output_size(const dp_model* model, size_t* out);

/* Inference on a single sample laid out channels-first (C,H,W row-major). */
dp_status dp_model_predict(dp_model* model, const double* input, size_t input_len,
                           double* output, size_t output_len);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* DRIVEPERC_H */
