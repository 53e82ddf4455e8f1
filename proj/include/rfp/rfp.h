/* C interface to the layered radiance-field segmentation library.
 *
 * All functions return an rfp_status; on failure rfp_last_error() describes
 * the problem (thread-local, valid until the next call on that thread).
 * Handles are opaque and owned by the caller. JSON arguments may be NULL to
 * take defaults. */
#ifndef RFP_RFP_H
#define RFP_RFP_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define RFP_API __declspec(dllexport)
#else
#define RFP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rfp_status {
  RFP_OK = 0,
  RFP_INVALID_ARGUMENT = 1,
  RFP_IO = 2,
  RFP_FORMAT = 3,
  RFP_NUMERIC = 4,
  RFP_INTERNAL = 5
} rfp_status;

typedef struct rfp_dataset rfp_dataset;
typedef struct rfp_model rfp_model;

RFP_API const char* rfp_last_error(void);
RFP_API const char* rfp_version(void);
/* Caps worker threads; n <= 0 uses every hardware thread. */
RFP_API rfp_status rfp_set_threads(int n);
RFP_API void rfp_free_string(char* s);

/* Fill defaults into a run config or scene spec and validate it; *out
 * receives the complete JSON (release with rfp_free_string). */
RFP_API rfp_status rfp_resolve_run_config(const char* config_json, char** out);
RFP_API rfp_status rfp_resolve_scene_spec(const char* spec_json, char** out);

/* Scene generation from a scene spec JSON document. */
RFP_API rfp_status rfp_dataset_generate(const char* spec_json, rfp_dataset** out);
RFP_API rfp_status rfp_dataset_load(const char* dir, rfp_dataset** out);
RFP_API rfp_status rfp_dataset_save(const rfp_dataset* ds, const char* dir);
RFP_API rfp_status rfp_dataset_view_count(const rfp_dataset* ds, int* train, int* test);
RFP_API void rfp_dataset_free(rfp_dataset* ds);

/* Bootstrap labels for the training views: writes labels/<view>.png and
 * features/<view>.rfpfeat under out_dir. config_json is a run config. */
RFP_API rfp_status rfp_init_seg(const rfp_dataset* ds, const char* config_json, const char* out_dir);

/* Fresh model from a run config; bounds come from the dataset when it has them. */
RFP_API rfp_status rfp_model_create(const char* config_json, const rfp_dataset* ds, rfp_model** out);
RFP_API rfp_status rfp_model_load(const char* path, rfp_model** out);
RFP_API rfp_status rfp_model_save(const rfp_model* model, const char* path);
RFP_API rfp_status rfp_model_num_objects(const rfp_model* model, int* k);
RFP_API void rfp_model_free(rfp_model* model);

/* labels_dir holds <view>.png init labels (may be NULL when the init loss is
 * off); loss_csv may be NULL. */
RFP_API rfp_status rfp_train(rfp_model* model, const rfp_dataset* ds, const char* labels_dir,
                             const char* config_json, const char* loss_csv);

/* Per-view label maps (masks/<view>.png) and renders (images/<view>.png,
 * depth/<view>.rfpimg) for every view; EM refinement follows the config. */
RFP_API rfp_status rfp_segment(const rfp_model* model, const rfp_dataset* ds, const char* config_json,
                               const char* out_dir);
RFP_API rfp_status rfp_render(const rfp_model* model, const rfp_dataset* ds, const char* config_json,
                              const char* out_dir);

/* Applies an edit script and renders every view into out_dir
 * (images/, masks/, alpha/). */
RFP_API rfp_status rfp_edit(const rfp_model* model, const rfp_dataset* ds, const char* edit_json,
                            const char* config_json, const char* out_dir);

/* Compares masks_dir/<view>.png (and renders_dir/<view>.png for test views,
 * may be NULL) against the dataset's ground truth. *metrics_json receives a
 * string to release with rfp_free_string. */
RFP_API rfp_status rfp_evaluate(const rfp_dataset* ds, const char* masks_dir, const char* renders_dir,
                                char** metrics_json);

#ifdef __cplusplus
}
#endif

#endif /* RFP_RFP_H */
