// Command-line front end; links only the public C API.

#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pivotspeech.h"

namespace {

struct ConfigHandle {
    pvs_config* cfg = nullptr;
    ~ConfigHandle() { pvs_config_free(cfg); }
};

int die(pvs_status status) {
    std::fprintf(stderr, "error (%s): %s\n", pvs_status_name(status), pvs_last_error());
    return 1;
}

// Resolve a path against PVS_ARTIFACT_ROOT when it is set and the path is
// relative.
std::string resolve(const std::string& path) {
    const char* root = std::getenv("PVS_ARTIFACT_ROOT");
    if (!root || !*root || path.empty() || path.front() == '/') return path;
    return std::string(root) + "/" + path;
}

pvs_status make_config(const std::string& config_path, const std::vector<std::string>& sets,
                       ConfigHandle& out) {
    pvs_status s = config_path.empty() ? pvs_config_create(&out.cfg)
                                       : pvs_config_load(resolve(config_path).c_str(), &out.cfg);
    if (s != PVS_STATUS_OK) return s;
    for (const auto& kv : sets) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) {
            std::fprintf(stderr, "error: --set expects key=value, got '%s'\n", kv.c_str());
            return PVS_ERR_INVALID_ARG;
        }
        s = pvs_config_set(out.cfg, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
        if (s != PVS_STATUS_OK) return s;
    }
    return PVS_STATUS_OK;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"speech-to-speech translation through discrete phonetic tokens"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> sets;
    app.add_option("--config", config_path, "run configuration file")->envname("PVS_CONFIG");
    app.add_option("--set", sets, "override a config key (key=value), repeatable");

    // init-config
    std::string out_path = "pivotspeech.cfg";
    auto* init_cmd = app.add_subcommand("init-config", "write a config file with all defaults");
    init_cmd->add_option("path", out_path, "output file");

    // gen-toy
    std::string corpus_dir;
    auto* gen_cmd = app.add_subcommand("gen-toy", "generate the synthetic bilingual corpus");
    gen_cmd->add_option("--out", corpus_dir, "corpus directory")->required();

    // extract-features
    std::string wav_path, mel_path;
    auto* feat_cmd = app.add_subcommand("extract-features", "wav -> mel feature file");
    feat_cmd->add_option("--wav", wav_path)->required();
    feat_cmd->add_option("--out", mel_path)->required();

    // train-xlvae
    std::string ckpt_path, metrics_path;
    auto* txl_cmd = app.add_subcommand("train-xlvae", "train converter/inverter/codebook");
    txl_cmd->add_option("--corpus", corpus_dir)->required();
    txl_cmd->add_option("--out", ckpt_path)->required();
    txl_cmd->add_option("--metrics", metrics_path);

    // convert
    std::string lang = "tgt", split = "train", tokens_path;
    auto* conv_cmd = app.add_subcommand("convert", "discretize a corpus split to tokens");
    conv_cmd->add_option("--ckpt", ckpt_path)->required();
    conv_cmd->add_option("--corpus", corpus_dir)->required();
    conv_cmd->add_option("--lang", lang);
    conv_cmd->add_option("--split", split);
    conv_cmd->add_option("--out", tokens_path)->required();

    // train-translator
    std::string xlvae_path, tokens_prefix, out_ckpt;
    auto* ttr_cmd = app.add_subcommand("train-translator", "train source speech -> target tokens");
    ttr_cmd->add_option("--corpus", corpus_dir)->required();
    ttr_cmd->add_option("--xlvae", xlvae_path, "xl-vae checkpoint (token source)");
    ttr_cmd->add_option("--tokens-prefix", tokens_prefix,
                        "prefix of <prefix><split>.tokens files from `convert`");
    ttr_cmd->add_option("--out", out_ckpt)->required();
    ttr_cmd->add_option("--metrics", metrics_path);

    // translate
    auto* tr_cmd = app.add_subcommand("translate", "beam-decode a test split to tokens");
    tr_cmd->add_option("--ckpt", ckpt_path)->required();
    tr_cmd->add_option("--corpus", corpus_dir)->required();
    tr_cmd->add_option("--split", split);
    tr_cmd->add_option("--out", tokens_path)->required();

    // invert
    std::string mel_dir;
    auto* inv_cmd = app.add_subcommand("invert", "tokens -> mel feature files");
    inv_cmd->add_option("--ckpt", ckpt_path)->required();
    inv_cmd->add_option("--tokens", tokens_path)->required();
    inv_cmd->add_option("--out-dir", mel_dir)->required();

    // vocode
    auto* voc_cmd = app.add_subcommand("vocode", "mel feature file -> wav");
    voc_cmd->add_option("--mel", mel_path)->required();
    voc_cmd->add_option("--out", wav_path)->required();

    // evaluate
    std::string hyp_path, ref_path, ref_dir, report_base, per_ref;
    auto* ev_cmd = app.add_subcommand("evaluate", "BLEU / PER over token-line files");
    ev_cmd->add_option("--hyp", hyp_path)->required();
    ev_cmd->add_option("--ref", ref_path, "single reference file");
    ev_cmd->add_option("--ref-dir", ref_dir, "directory holding ref0..refN files");
    ev_cmd->add_option("--per-ref", per_ref, "compute PER against this reference file instead");
    ev_cmd->add_option("--report", report_base, "basename for .txt/.kv reports");

    // inspect-checkpoint
    auto* insp_cmd = app.add_subcommand("inspect-checkpoint", "list tensors and config");
    insp_cmd->add_option("path", ckpt_path)->required();

    // end-to-end
    std::string work_dir;
    auto* e2e_cmd = app.add_subcommand("end-to-end", "run the whole pipeline under one directory");
    e2e_cmd->add_option("--work", work_dir)->required();

    CLI11_PARSE(app, argc, argv);

    ConfigHandle cfg;
    pvs_status s = make_config(config_path, sets, cfg);
    if (s != PVS_STATUS_OK) return die(s);

    if (init_cmd->parsed()) {
        s = pvs_config_write(cfg.cfg, resolve(out_path).c_str());
        if (s) return die(s);
        std::printf("wrote %s\n", resolve(out_path).c_str());
        return 0;
    }
    if (gen_cmd->parsed()) {
        s = pvs_gen_toy(cfg.cfg, resolve(corpus_dir).c_str());
        return s ? die(s) : 0;
    }
    if (feat_cmd->parsed()) {
        s = pvs_extract_features(cfg.cfg, resolve(wav_path).c_str(), resolve(mel_path).c_str());
        return s ? die(s) : 0;
    }
    if (txl_cmd->parsed()) {
        s = pvs_train_xlvae(cfg.cfg, resolve(corpus_dir).c_str(), resolve(ckpt_path).c_str(),
                            metrics_path.empty() ? nullptr : resolve(metrics_path).c_str());
        return s ? die(s) : 0;
    }
    if (conv_cmd->parsed()) {
        s = pvs_convert(resolve(ckpt_path).c_str(), resolve(corpus_dir).c_str(), lang.c_str(),
                        split.c_str(), resolve(tokens_path).c_str());
        return s ? die(s) : 0;
    }
    if (ttr_cmd->parsed()) {
        s = pvs_train_translator(cfg.cfg, resolve(corpus_dir).c_str(),
                                 xlvae_path.empty() ? nullptr : resolve(xlvae_path).c_str(),
                                 tokens_prefix.empty() ? nullptr : resolve(tokens_prefix).c_str(),
                                 resolve(out_ckpt).c_str(),
                                 metrics_path.empty() ? nullptr : resolve(metrics_path).c_str());
        return s ? die(s) : 0;
    }
    if (tr_cmd->parsed()) {
        s = pvs_translate(resolve(ckpt_path).c_str(), resolve(corpus_dir).c_str(), split.c_str(),
                          resolve(tokens_path).c_str());
        return s ? die(s) : 0;
    }
    if (inv_cmd->parsed()) {
        s = pvs_invert(resolve(ckpt_path).c_str(), resolve(tokens_path).c_str(),
                       resolve(mel_dir).c_str());
        return s ? die(s) : 0;
    }
    if (voc_cmd->parsed()) {
        s = pvs_vocode(cfg.cfg, resolve(mel_path).c_str(), resolve(wav_path).c_str());
        return s ? die(s) : 0;
    }
    if (ev_cmd->parsed()) {
        if (!per_ref.empty()) {
            double per = 0;
            s = pvs_evaluate_per(resolve(hyp_path).c_str(), resolve(per_ref).c_str(), &per);
            if (s) return die(s);
            std::printf("PER = %.4f\n", per);
            return 0;
        }
        std::vector<std::string> refs;
        if (!ref_path.empty()) refs.push_back(resolve(ref_path));
        if (!ref_dir.empty()) {
            for (int i = 0;; ++i) {
                std::string candidate = resolve(ref_dir) + "/ref" + std::to_string(i);
                FILE* f = std::fopen(candidate.c_str(), "rb");
                if (!f) break;
                std::fclose(f);
                refs.push_back(candidate);
            }
        }
        if (refs.empty()) {
            std::fprintf(stderr, "error: need --ref, --ref-dir or --per-ref\n");
            return 1;
        }
        std::vector<const char*> ref_ptrs;
        for (const auto& r : refs) ref_ptrs.push_back(r.c_str());
        double bleu = 0;
        s = pvs_evaluate_bleu(resolve(hyp_path).c_str(), ref_ptrs.data(), ref_ptrs.size(),
                              report_base.empty() ? nullptr : resolve(report_base).c_str(), &bleu);
        if (s) return die(s);
        std::printf("BLEU = %.2f\n", bleu);
        return 0;
    }
    if (insp_cmd->parsed()) {
        char* text = nullptr;
        s = pvs_inspect_checkpoint(resolve(ckpt_path).c_str(), &text);
        if (s) return die(s);
        std::printf("%s", text);
        pvs_string_free(text);
        return 0;
    }
    if (e2e_cmd->parsed()) {
        char* report = nullptr;
        s = pvs_end_to_end(cfg.cfg, resolve(work_dir).c_str(), &report);
        if (s) return die(s);
        std::printf("%s", report);
        pvs_string_free(report);
        return 0;
    }
    return 1;
}
