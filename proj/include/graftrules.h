/* C API for the grafted conjunction-rule credit model.
 *
 * All objects are opaque handles created and destroyed by the library.
 * Functions return GR_OK on success; on failure gr_last_error() holds a
 * message for the calling thread. Strings returned through char** are
 * heap-allocated by the library and must be released with gr_string_free.
 */
#ifndef GRAFTRULES_H
#define GRAFTRULES_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
  GR_OK = 0,
  GR_ERR_ARGUMENT = 1, /* bad inputs, mismatched widths, invalid config */
  GR_ERR_RUNTIME = 2,  /* I/O failures, parse errors, incompatible artifacts */
  GR_ERR_INTERNAL = 3
} gr_status;

typedef struct gr_dataset gr_dataset;
typedef struct gr_binarizer gr_binarizer;
typedef struct gr_model gr_model;
typedef struct gr_rulebook gr_rulebook;

const char* gr_last_error(void);
void gr_string_free(char* s);

/* ---- datasets ---- */

/* schema_json: {"label_column": ..., "features":[{"name","kind","category"}]}
 * sample > 0 subsamples that many rows (seeded). */
gr_status gr_dataset_load_csv(const char* csv_path, const char* schema_json,
                              long sample, uint64_t seed, gr_dataset** out);

/* spec_json: {"n_rows","n_binary_features","planted_rules":[[0,2],...],
 *             "label_noise","seed"} */
gr_status gr_dataset_synthesize(const char* spec_json, gr_dataset** out);

gr_status gr_dataset_write_csv(const gr_dataset* ds, const char* path);
gr_status gr_dataset_schema_json(const gr_dataset* ds, char** out);
long gr_dataset_size(const gr_dataset* ds);
void gr_dataset_free(gr_dataset* ds);

/* ---- binarizer ---- */

/* binning_cfg_json: {"max_depth":3,"min_leaf":0} (0 = auto) */
gr_status gr_binarizer_fit(const gr_dataset* ds, const char* binning_cfg_json,
                           gr_binarizer** out);
gr_status gr_binarizer_save(const gr_binarizer* b, const char* path);
gr_status gr_binarizer_load(const char* path, gr_binarizer** out);
int gr_binarizer_width(const gr_binarizer* b);
void gr_binarizer_free(gr_binarizer* b);

/* ---- model ---- */

/* train_cfg_json accepts the TrainConfig fields (learning_rate,
 * hidden_per_subnet, batch_size, pretrain_epochs, joint_epochs, seed, eps,
 * val_fraction); missing fields take defaults. trace_csv (optional) gets
 * the per-epoch "epoch,loss_c,loss_d,acc_d" trace. */
gr_status gr_model_train(const gr_dataset* ds, const gr_binarizer* b,
                         const char* train_cfg_json, char** trace_csv, gr_model** out);
gr_status gr_model_save(const gr_model* m, const char* path);
gr_status gr_model_load(const char* path, gr_model** out);

/* Discrete-model default probability for one dataset row. */
gr_status gr_model_predict(const gr_model* m, const gr_binarizer* b,
                           const gr_dataset* ds, long row, double* prob_out);
void gr_model_free(gr_model* m);

/* ---- evaluation ---- */

/* cv_cfg_json: {"k","seed","binning":{...},"train":{...},
 *               "cart_max_depth","cart_min_leaf"} */
gr_status gr_cross_validate(const gr_dataset* ds, const char* cv_cfg_json,
                            char** table_text, char** csv_out);

/* ---- rules & explanations ---- */

gr_status gr_rulebook_extract(const gr_model* m, const gr_binarizer* b,
                              gr_rulebook** out);
gr_status gr_rulebook_save(const gr_rulebook* rb, const char* path);
gr_status gr_rulebook_load(const char* path, gr_rulebook** out);
gr_status gr_rulebook_text(const gr_rulebook* rb, char** out);
gr_status gr_rulebook_json(const gr_rulebook* rb, char** out);
void gr_rulebook_free(gr_rulebook* rb);

gr_status gr_explain_row(const gr_model* m, const gr_rulebook* rb,
                         const gr_dataset* ds, long row, char** json_out);
/* record_json: {"FeatureName": value, ...} with numbers for continuous
 * features and strings for categorical ones. */
gr_status gr_explain_record(const gr_model* m, const gr_rulebook* rb,
                            const char* record_json, char** json_out);

/* ---- post-hoc audit ---- */

/* audit_cfg_json: {"tau","budget","samples","seed","against":"negative"|
 * "all-active"}. The dataset is the perturbation reference; row selects
 * the audited instance. */
gr_status gr_audit_row(const gr_model* m, const gr_rulebook* rb, const gr_dataset* ds,
                       long row, const char* audit_cfg_json, char** json_out);
gr_status gr_audit_record(const gr_model* m, const gr_rulebook* rb,
                          const gr_dataset* ds, const char* record_json,
                          const char* audit_cfg_json, char** json_out);

#ifdef __cplusplus
}
#endif

#endif /* GRAFTRULES_H */
