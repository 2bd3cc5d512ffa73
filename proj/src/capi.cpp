#include "pivotspeech.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include "pipeline.hpp"

using namespace pvs;

namespace {

thread_local std::string g_last_error = "no error";

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out) std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

pvs_status fail(pvs_status code, const std::string& message) {
    g_last_error = message;
    return code;
}

template <typename Fn>
pvs_status guard(Fn&& fn) {
    try {
        fn();
        return PVS_STATUS_OK;
    } catch (const ConfigError& e) {
        return fail(PVS_ERR_CONFIG, e.what());
    } catch (const FormatError& e) {
        return fail(PVS_ERR_FORMAT, e.what());
    } catch (const CheckpointError& e) {
        return fail(PVS_ERR_FORMAT, e.what());
    } catch (const ShapeError& e) {
        return fail(PVS_ERR_SHAPE, e.what());
    } catch (const StageError& e) {
        return fail(PVS_ERR_RUNTIME, e.what());
    } catch (const std::exception& e) {
        return fail(PVS_ERR_RUNTIME, e.what());
    }
}

bool null_arg(const void* p) { return p == nullptr; }

pvs_status check_args(std::initializer_list<const void*> ptrs) {
    for (const void* p : ptrs)
        if (null_arg(p)) return fail(PVS_ERR_INVALID_ARG, "null argument");
    return PVS_STATUS_OK;
}

}  // namespace

struct pvs_config {
    RunConfig cfg;
};

struct pvs_xlvae {
    XlVaeModel<float> model;
};

extern "C" {

const char* pvs_status_name(pvs_status status) {
    switch (status) {
        case PVS_STATUS_OK: return "ok";
        case PVS_ERR_INVALID_ARG: return "invalid argument";
        case PVS_ERR_IO: return "i/o error";
        case PVS_ERR_FORMAT: return "format error";
        case PVS_ERR_CONFIG: return "config error";
        case PVS_ERR_SHAPE: return "shape error";
        case PVS_ERR_RUNTIME: return "runtime error";
    }
    return "unknown";
}

const char* pvs_last_error(void) { return g_last_error.c_str(); }

void pvs_string_free(char* s) { std::free(s); }

pvs_status pvs_config_create(pvs_config** out) {
    if (auto s = check_args({out})) return s;
    return guard([&] { *out = new pvs_config{RunConfig::defaults()}; });
}

pvs_status pvs_config_load(const char* path, pvs_config** out) {
    if (auto s = check_args({path, out})) return s;
    return guard([&] { *out = new pvs_config{RunConfig::load(path)}; });
}

pvs_status pvs_config_from_checkpoint(const char* checkpoint_path, pvs_config** out) {
    if (auto s = check_args({checkpoint_path, out})) return s;
    return guard([&] { *out = new pvs_config{checkpoint_config(checkpoint_path)}; });
}

pvs_status pvs_config_set(pvs_config* cfg, const char* key, const char* value) {
    if (auto s = check_args({cfg, key, value})) return s;
    return guard([&] { cfg->cfg.set(key, value); });
}

pvs_status pvs_config_get(const pvs_config* cfg, const char* key, char** value_out) {
    if (auto s = check_args({cfg, key, value_out})) return s;
    return guard([&] { *value_out = dup_string(cfg->cfg.get_str(key)); });
}

pvs_status pvs_config_write(const pvs_config* cfg, const char* path) {
    if (auto s = check_args({cfg, path})) return s;
    return guard([&] { cfg->cfg.save(path); });
}

void pvs_config_free(pvs_config* cfg) { delete cfg; }

pvs_status pvs_gen_toy(const pvs_config* cfg, const char* out_dir) {
    if (auto s = check_args({cfg, out_dir})) return s;
    return guard([&] { stages::gen_toy(cfg->cfg, out_dir); });
}

pvs_status pvs_extract_features(const pvs_config* cfg, const char* wav_path,
                                const char* mel_path) {
    if (auto s = check_args({cfg, wav_path, mel_path})) return s;
    return guard([&] { stages::extract_features(cfg->cfg, wav_path, mel_path); });
}

pvs_status pvs_train_xlvae(const pvs_config* cfg, const char* corpus_dir,
                           const char* out_checkpoint, const char* metrics_path_or_null) {
    if (auto s = check_args({cfg, corpus_dir, out_checkpoint})) return s;
    return guard([&] {
        stages::train_xlvae_stage(cfg->cfg, corpus_dir, out_checkpoint,
                                  metrics_path_or_null ? metrics_path_or_null : "");
    });
}

pvs_status pvs_convert(const char* xlvae_checkpoint, const char* corpus_dir, const char* lang,
                       const char* split, const char* out_tokens) {
    if (auto s = check_args({xlvae_checkpoint, corpus_dir, lang, split, out_tokens})) return s;
    return guard([&] { stages::convert_stage(xlvae_checkpoint, corpus_dir, lang, split, out_tokens); });
}

pvs_status pvs_train_translator(const pvs_config* cfg, const char* corpus_dir,
                                const char* xlvae_checkpoint,
                                const char* target_tokens_prefix_or_null,
                                const char* out_checkpoint, const char* metrics_path_or_null) {
    if (auto s = check_args({cfg, corpus_dir, out_checkpoint})) return s;
    return guard([&] {
        stages::train_translator_stage(cfg->cfg, corpus_dir,
                                       xlvae_checkpoint ? xlvae_checkpoint : "",
                                       target_tokens_prefix_or_null ? target_tokens_prefix_or_null
                                                                    : "",
                                       out_checkpoint,
                                       metrics_path_or_null ? metrics_path_or_null : "");
    });
}

pvs_status pvs_translate(const char* translator_checkpoint, const char* corpus_dir,
                         const char* split, const char* out_tokens) {
    if (auto s = check_args({translator_checkpoint, corpus_dir, split, out_tokens})) return s;
    return guard([&] { stages::translate_stage(translator_checkpoint, corpus_dir, split, out_tokens); });
}

pvs_status pvs_invert(const char* xlvae_checkpoint, const char* tokens_path,
                      const char* out_mel_dir) {
    if (auto s = check_args({xlvae_checkpoint, tokens_path, out_mel_dir})) return s;
    return guard([&] { stages::invert_stage(xlvae_checkpoint, tokens_path, out_mel_dir); });
}

pvs_status pvs_vocode(const pvs_config* cfg, const char* mel_path, const char* wav_path) {
    if (auto s = check_args({cfg, mel_path, wav_path})) return s;
    return guard([&] { stages::vocode_stage(cfg->cfg, mel_path, wav_path); });
}

pvs_status pvs_evaluate_bleu(const char* hyp_path, const char* const* ref_paths, size_t num_refs,
                             const char* out_base_or_null, double* bleu_out) {
    if (auto s = check_args({hyp_path, ref_paths})) return s;
    if (num_refs == 0) return fail(PVS_ERR_INVALID_ARG, "need at least one reference");
    return guard([&] {
        std::vector<std::string> refs;
        for (size_t i = 0; i < num_refs; ++i) {
            if (!ref_paths[i]) throw ShapeError("null reference path");
            refs.emplace_back(ref_paths[i]);
        }
        EvalReport rep = stages::evaluate_bleu_files(hyp_path, refs,
                                                     out_base_or_null ? out_base_or_null : "");
        if (bleu_out) *bleu_out = rep.bleu;
    });
}

pvs_status pvs_evaluate_per(const char* hyp_path, const char* ref_path, double* per_out) {
    if (auto s = check_args({hyp_path, ref_path})) return s;
    return guard([&] {
        double v = stages::evaluate_per_files(hyp_path, ref_path);
        if (per_out) *per_out = v;
    });
}

pvs_status pvs_end_to_end(const pvs_config* cfg, const char* work_dir, char** report_out) {
    if (auto s = check_args({cfg, work_dir})) return s;
    return guard([&] {
        auto result = stages::end_to_end(cfg->cfg, work_dir);
        if (report_out) *report_out = dup_string(result.report_text);
    });
}

pvs_status pvs_inspect_checkpoint(const char* path, char** text_out) {
    if (auto s = check_args({path, text_out})) return s;
    return guard([&] { *text_out = dup_string(inspect_checkpoint(path)); });
}

pvs_status pvs_xlvae_load(const char* checkpoint_path, pvs_xlvae** out) {
    if (auto s = check_args({checkpoint_path, out})) return s;
    return guard([&] { *out = new pvs_xlvae{load_xlvae_checkpoint(checkpoint_path)}; });
}

void pvs_xlvae_free(pvs_xlvae* model) { delete model; }

pvs_status pvs_xlvae_convert_wav(pvs_xlvae* model, const char* wav_path, char** tokens_out) {
    if (auto s = check_args({model, wav_path, tokens_out})) return s;
    return guard([&] {
        Waveform w = load_wav(wav_path);
        MelSpectrogram mel = mel_spectrogram(w, model->model.signal);
        Graph<float> g;
        int hidden = converter_forward(g, mel.frames, model->model);
        auto tokens = quantize_hidden(g.value(hidden), model->model.embeddings(),
                                      model->model.codebook.blank_index);
        *tokens_out = dup_string(join_ws(tokens_to_symbols(tokens, model->model.codebook)));
    });
}

}  // extern "C"
