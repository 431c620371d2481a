#ifndef ACTSUM_ACTSUM_H
#define ACTSUM_ACTSUM_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define ACTSUM_API __declspec(dllexport)
#else
#define ACTSUM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum actsum_status {
  ACTSUM_OK = 0,
  ACTSUM_E_INVALID_ARGUMENT = 1,
  ACTSUM_E_DOMAIN = 2,
  ACTSUM_E_LOAD = 3,
  ACTSUM_E_IO = 4,
  ACTSUM_E_NUMERIC = 5,
  ACTSUM_E_INTERNAL = 6
} actsum_status;

/* Pass as max_len to use the checkpoint's own limit. */
#define ACTSUM_DEFAULT_MAX_LEN (-1)

typedef struct actsum_corpus actsum_corpus;
typedef struct actsum_model actsum_model;

/* Receives progress lines; may be NULL. */
typedef void (*actsum_log_fn)(const char* line, void* user);

ACTSUM_API const char* actsum_version(void);
ACTSUM_API const char* actsum_status_name(actsum_status status);
/* Message of the last failed call on this thread ("" if none). */
ACTSUM_API const char* actsum_last_error(void);
/* Frees strings returned through char** out parameters. */
ACTSUM_API void actsum_free_string(char* s);

/* Config documents are JSON; see README. NULL or "" selects the desk preset.
 * Writes the fully resolved document. */
ACTSUM_API actsum_status actsum_config_resolve(const char* config_json, char** resolved_json);

/* ---- corpus ---- */
ACTSUM_API actsum_status actsum_corpus_generate(const char* config_json, const char* out_dir, char** info_json);
/* Same corpus as corpus_generate, kept in memory. */
ACTSUM_API actsum_status actsum_corpus_synthesize(const char* config_json, actsum_corpus** out);
ACTSUM_API actsum_status actsum_corpus_open(const char* dir, actsum_corpus** out);
ACTSUM_API void actsum_corpus_close(actsum_corpus* corpus);
ACTSUM_API actsum_status actsum_corpus_stats(const actsum_corpus* corpus, char** stats_json);
/* Removes validation annotations whose plan occurs in train, in place. */
ACTSUM_API actsum_status actsum_corpus_dedup(actsum_corpus* corpus, char** report_json);
ACTSUM_API actsum_status actsum_corpus_write(const actsum_corpus* corpus, const char* dir);
ACTSUM_API actsum_status actsum_corpus_fingerprint(const actsum_corpus* corpus, uint64_t* out);

/* ---- models ---- */
ACTSUM_API actsum_status actsum_model_train(const actsum_corpus* corpus, const char* task, const char* config_json,
                                            actsum_log_fn log, void* user, actsum_model** out);
ACTSUM_API actsum_status actsum_model_load(const char* path, actsum_model** out);
ACTSUM_API actsum_status actsum_model_save(const actsum_model* model, const char* path);
ACTSUM_API void actsum_model_free(actsum_model* model);
ACTSUM_API actsum_status actsum_model_info(const actsum_model* model, char** info_json);
/* Text-input models only. */
ACTSUM_API actsum_status actsum_model_decode_text(const actsum_model* model, const char* input, int beam, int max_len,
                                                  char** output);
/* Decodes every pair of a split ("valid_seen", ...) for the model's task,
 * writes a TSV dump and returns its scores as JSON. */
ACTSUM_API actsum_status actsum_model_decode_split(const actsum_model* model, const actsum_corpus* corpus,
                                                   const char* split, int beam, int max_len, const char* out_tsv,
                                                   char** scores_json);

/* ---- pipeline and matrix ---- */
/* vision may be NULL for gold plans in stage 1. Writes plans.tsv and
 * outputs.tsv under out_dir. */
ACTSUM_API actsum_status actsum_pipeline_run(const actsum_model* vision, const actsum_model* text,
                                             const actsum_corpus* corpus, const char* split, const char* out_dir,
                                             char** scores_json);
/* Writes scores.tsv, scores.txt, errors.tsv and per-row dumps under out_dir. */
ACTSUM_API actsum_status actsum_matrix_run(const actsum_corpus* corpus, const char* config_json, const char* out_dir,
                                           actsum_log_fn log, void* user, char** table_text);

/* ---- evaluation ---- */
/* Scores a dump TSV (generated and reference columns). */
ACTSUM_API actsum_status actsum_score_dump(const char* dump_tsv, char** scores_json);
/* Error taxonomy for a summary dump against the corpus's gold slots. */
ACTSUM_API actsum_status actsum_error_report(const actsum_corpus* corpus, const char* dump_tsv, const char* label,
                                             char** report_text);
/* Strings are tokenized before scoring. out receives recall, precision, f1. */
ACTSUM_API actsum_status actsum_rouge_n(const char* candidate, const char* reference, int n, double out[3]);
ACTSUM_API actsum_status actsum_rouge_l(const char* candidate, const char* reference, double* f1);
ACTSUM_API actsum_status actsum_bleu(const char* const* candidates, const char* const* references, size_t count,
                                     int max_n, double* score);

/* ---- verification ---- */
ACTSUM_API actsum_status actsum_grad_check(const char* model_json, uint64_t seed, double* max_relative_error);
ACTSUM_API actsum_status actsum_count_parameters(const char* model_json, uint64_t* count);

#ifdef __cplusplus
}
#endif

#endif
