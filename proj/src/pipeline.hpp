#pragma once

#include <string>
#include <vector>

#include "evalkit.hpp"
#include "manifest.hpp"
#include "runconfig.hpp"

namespace pvs {

// All stage failures surface as StageError("stage: message").
struct StageError : std::runtime_error {
    StageError(const std::string& stage, const std::string& message)
        : std::runtime_error(stage + ": " + message) {}
};

// Token files: one utterance per line of space-separated IPA symbols. A
// sidecar "<path>.ids" file carries the utterance ids, line-aligned.
void write_token_file(const std::string& path, const std::vector<std::vector<std::string>>& lines,
                      const std::vector<std::string>& ids);
std::vector<std::vector<std::string>> read_token_file(const std::string& path);
std::vector<std::string> read_id_file(const std::string& path);

// Corpus loading: mel features computed from the manifest's audio.
std::vector<Utterance> load_utterances(const std::string& corpus_dir,
                                       const std::vector<ManifestRecord>& records,
                                       const SignalConfig& sig, const Codebook& cb);

// Checkpoint glue. The config blob embeds the label set, so a checkpoint is
// self-contained.
void save_xlvae_checkpoint(const std::string& path, XlVaeModel<float>& model,
                           const RunConfig& cfg);
XlVaeModel<float> load_xlvae_checkpoint(const std::string& path);
void save_translator_checkpoint(const std::string& path, TranslatorModel<float>& model,
                                const RunConfig& cfg);
TranslatorModel<float> load_translator_checkpoint(const std::string& path);
RunConfig checkpoint_config(const std::string& path);

namespace stages {

void gen_toy(const RunConfig& cfg, const std::string& out_dir);
void extract_features(const RunConfig& cfg, const std::string& wav_path,
                      const std::string& mel_path);
void train_xlvae_stage(const RunConfig& cfg, const std::string& corpus_dir,
                       const std::string& out_checkpoint, const std::string& metrics_path);
void convert_stage(const std::string& checkpoint, const std::string& corpus_dir,
                   const std::string& lang, const std::string& split,
                   const std::string& out_tokens);
void train_translator_stage(const RunConfig& cfg, const std::string& corpus_dir,
                            const std::string& xlvae_checkpoint,
                            const std::string& target_tokens_prefix,
                            const std::string& out_checkpoint, const std::string& metrics_path);
void translate_stage(const std::string& translator_checkpoint, const std::string& corpus_dir,
                     const std::string& split, const std::string& out_tokens);
void invert_stage(const std::string& xlvae_checkpoint, const std::string& tokens_path,
                  const std::string& out_mel_dir);
void vocode_stage(const RunConfig& cfg, const std::string& mel_path,
                  const std::string& wav_path);

// Writes "<out_base>.txt" and "<out_base>.kv" when out_base is non-empty.
EvalReport evaluate_bleu_files(const std::string& hyp_path,
                               const std::vector<std::string>& ref_paths,
                               const std::string& out_base);
double evaluate_per_files(const std::string& hyp_path, const std::string& ref_path);

struct EndToEndResult {
    double token_bleu = 0.0;
    double word_bleu = 0.0;
    double written_dev_per = 0.0;
    std::string report_text;
};

EndToEndResult end_to_end(const RunConfig& cfg, const std::string& work_dir);

}  // namespace stages

// Greedy lexicon segmentation: collapse repeated tokens, then choose the word
// sequence whose concatenated phonemes minimize the edit distance to the
// hypothesis (deterministic DP, ties to the earlier word).
std::vector<std::string> decode_words_from_tokens(
    const std::vector<std::string>& token_symbols,
    const std::vector<std::pair<std::string, std::vector<std::string>>>& lexicon);

std::vector<std::pair<std::string, std::vector<std::string>>> load_lexicon_file(
    const std::string& path);

}  // namespace pvs
