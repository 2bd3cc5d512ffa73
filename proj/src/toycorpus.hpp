#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "quantizer.hpp"
#include "signal.hpp"

namespace pvs {

// Synthetic bilingual corpus: a source/target language pair sharing one
// phoneme inventory (word-bijective translation), plus a "written" language
// whose inventory overlaps the target's by a configurable fraction.
struct ToySpec {
    int num_phonemes = 20;
    int words_per_lang = 12;
    int word_min_phonemes = 2;
    int word_max_phonemes = 4;
    int sentence_min_words = 2;
    int sentence_max_words = 5;
    int train_size = 500;
    int dev_size = 50;
    int test_size = 50;
    double unit_ms = 100.0;       // per-phoneme duration
    double crossfade_ms = 10.0;   // linear fade across segment boundaries
    double overlap_fraction = 1.0;
    std::uint64_t seed = 1;
    int sample_rate = 16000;

    void validate() const;
};

using FormantMap = std::map<int, std::pair<double, double>>;  // phoneme id -> (f1, f2)

struct ToyLexicon {
    std::vector<std::vector<int>> words;  // phoneme id sequences
    std::vector<std::string> names;       // transcript tokens
};

struct ToySentence {
    std::vector<int> word_ids;
};

// Fully deterministic function of (spec, codebook): inventories, lexicons,
// the translation bijection, sentences, and the formant assignment.
struct ToyPlan {
    std::vector<int> inventory;          // source/target phoneme ids
    std::vector<int> written_inventory;  // overlap-controlled
    ToyLexicon source_lexicon, target_lexicon, written_lexicon;
    std::vector<int> translation;  // source word w -> target word translation[w]
    std::array<std::vector<ToySentence>, 3> parallel_splits;  // train/dev/test
    std::array<std::vector<ToySentence>, 3> written_splits;
    FormantMap formants;

    std::vector<int> source_phonemes(const ToySentence& s) const;
    std::vector<int> target_phonemes(const ToySentence& s) const;
    std::vector<int> written_phonemes(const ToySentence& s) const;
    std::vector<std::string> source_words(const ToySentence& s) const;
    std::vector<std::string> target_words(const ToySentence& s) const;
};

extern const char* const kSplitNames[3];  // "train", "dev", "test"

ToyPlan make_toy_plan(const ToySpec& spec, const Codebook& cb);

// Two-formant additive tone per phoneme with linear cross-fades; duration is
// exactly |phonemes| * unit_ms.
Waveform synth_utterance(const std::vector<int>& phonemes, const ToySpec& spec,
                         const FormantMap& formants);

// Renders the plan to out_dir: manifest.jsonl, wav/, and per-split phoneme
// and transcript text files.
void write_toy_corpus(const ToyPlan& plan, const ToySpec& spec, const Codebook& cb,
                      const std::string& out_dir);

}  // namespace pvs
