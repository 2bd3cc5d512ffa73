/* pivotspeech — speech-to-speech translation through discrete phonetic
 * tokens, as a C shared-library API.
 *
 * All functions return PVS_STATUS_OK (0) on success; on failure they return a
 * nonzero status and pvs_last_error() describes the failure for the calling
 * thread. Strings returned through char** are heap-allocated; release them
 * with pvs_string_free().
 */
#ifndef PIVOTSPEECH_H
#define PIVOTSPEECH_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pvs_status {
    PVS_STATUS_OK = 0,
    PVS_ERR_INVALID_ARG = 1,
    PVS_ERR_IO = 2,
    PVS_ERR_FORMAT = 3,
    PVS_ERR_CONFIG = 4,
    PVS_ERR_SHAPE = 5,
    PVS_ERR_RUNTIME = 6
} pvs_status;

const char* pvs_status_name(pvs_status status);

/* Message for the most recent failure on this thread; never NULL. */
const char* pvs_last_error(void);

void pvs_string_free(char* s);

/* ---- run configuration (opaque) ---- */

typedef struct pvs_config pvs_config;

pvs_status pvs_config_create(pvs_config** out);
pvs_status pvs_config_load(const char* path, pvs_config** out);
pvs_status pvs_config_from_checkpoint(const char* checkpoint_path, pvs_config** out);
pvs_status pvs_config_set(pvs_config* cfg, const char* key, const char* value);
pvs_status pvs_config_get(const pvs_config* cfg, const char* key, char** value_out);
pvs_status pvs_config_write(const pvs_config* cfg, const char* path);
void pvs_config_free(pvs_config* cfg);

/* ---- pipeline stages ---- */

pvs_status pvs_gen_toy(const pvs_config* cfg, const char* out_dir);

pvs_status pvs_extract_features(const pvs_config* cfg, const char* wav_path,
                                const char* mel_path);

pvs_status pvs_train_xlvae(const pvs_config* cfg, const char* corpus_dir,
                           const char* out_checkpoint, const char* metrics_path_or_null);

pvs_status pvs_convert(const char* xlvae_checkpoint, const char* corpus_dir, const char* lang,
                       const char* split, const char* out_tokens);

/* target_tokens_prefix: path prefix of "<prefix><split>.tokens" files from
 * pvs_convert; pass NULL to derive tokens from the xl-vae checkpoint. */
pvs_status pvs_train_translator(const pvs_config* cfg, const char* corpus_dir,
                                const char* xlvae_checkpoint,
                                const char* target_tokens_prefix_or_null,
                                const char* out_checkpoint, const char* metrics_path_or_null);

pvs_status pvs_translate(const char* translator_checkpoint, const char* corpus_dir,
                         const char* split, const char* out_tokens);

pvs_status pvs_invert(const char* xlvae_checkpoint, const char* tokens_path,
                      const char* out_mel_dir);

pvs_status pvs_vocode(const pvs_config* cfg, const char* mel_path, const char* wav_path);

/* Corpus BLEU over line-aligned token files; writes "<out_base>.txt" and
 * "<out_base>.kv" when out_base is non-NULL. */
pvs_status pvs_evaluate_bleu(const char* hyp_path, const char* const* ref_paths, size_t num_refs,
                             const char* out_base_or_null, double* bleu_out);

pvs_status pvs_evaluate_per(const char* hyp_path, const char* ref_path, double* per_out);

/* Full run: corpus (generated if absent) -> xl-vae -> convert -> translator
 * -> beam inference -> inverter -> vocoder -> evaluation, under work_dir. */
pvs_status pvs_end_to_end(const pvs_config* cfg, const char* work_dir, char** report_out);

pvs_status pvs_inspect_checkpoint(const char* path, char** text_out);

/* ---- direct model access (opaque handle) ---- */

typedef struct pvs_xlvae pvs_xlvae;

pvs_status pvs_xlvae_load(const char* checkpoint_path, pvs_xlvae** out);
void pvs_xlvae_free(pvs_xlvae* model);

/* Discretize one WAV file; *tokens_out receives a space-separated IPA token
 * line. */
pvs_status pvs_xlvae_convert_wav(pvs_xlvae* model, const char* wav_path, char** tokens_out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* PIVOTSPEECH_H */
