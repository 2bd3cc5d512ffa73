#include "toycorpus.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <set>

#include "manifest.hpp"

namespace pvs {

namespace fs = std::filesystem;

const char* const kSplitNames[3] = {"train", "dev", "test"};

void ToySpec::validate() const {
    require(num_phonemes >= 2, "toy spec: need at least two phonemes");
    require(words_per_lang >= 2, "toy spec: need at least two words");
    require(word_min_phonemes >= 1 && word_max_phonemes >= word_min_phonemes,
            "toy spec: bad word length range");
    require(sentence_min_words >= 1 && sentence_max_words >= sentence_min_words,
            "toy spec: bad sentence length range");
    require(train_size > 0 && dev_size > 0 && test_size > 0, "toy spec: empty split");
    require(unit_ms > 0 && crossfade_ms >= 0 && crossfade_ms < unit_ms,
            "toy spec: bad durations");
    require(overlap_fraction >= 0.0 && overlap_fraction <= 1.0, "toy spec: overlap in [0,1]");
    require(sample_rate > 0, "toy spec: bad sample rate");
}

namespace {

bool has_adjacent_repeat(const std::vector<int>& seq) {
    for (std::size_t i = 1; i < seq.size(); ++i)
        if (seq[i] == seq[i - 1]) return true;
    return false;
}

// Lexicon with guaranteed inventory coverage, no word-internal adjacent
// repeats, and pairwise distinct phoneme sequences.
ToyLexicon make_lexicon(const std::vector<int>& inventory, const std::string& name_prefix,
                        const ToySpec& spec, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> len_dist(spec.word_min_phonemes, spec.word_max_phonemes);
    std::uniform_int_distribution<std::size_t> inv_dist(0, inventory.size() - 1);
    for (int attempt = 0; attempt < 10000; ++attempt) {
        std::vector<int> lengths(spec.words_per_lang);
        int total = 0;
        for (auto& l : lengths) {
            l = len_dist(rng);
            total += l;
        }
        if (total < static_cast<int>(inventory.size())) continue;

        // pool: every inventory phoneme once, the rest random
        std::vector<int> pool = inventory;
        while (static_cast<int>(pool.size()) < total) pool.push_back(inventory[inv_dist(rng)]);
        std::shuffle(pool.begin(), pool.end(), rng);

        ToyLexicon lex;
        std::size_t off = 0;
        bool ok = true;
        std::set<std::vector<int>> seen;
        for (int w = 0; w < spec.words_per_lang; ++w) {
            std::vector<int> word(pool.begin() + off, pool.begin() + off + lengths[w]);
            off += lengths[w];
            if (has_adjacent_repeat(word) || !seen.insert(word).second) {
                ok = false;
                break;
            }
            lex.words.push_back(std::move(word));
        }
        if (!ok) continue;
        for (int w = 0; w < spec.words_per_lang; ++w) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%s%02d", name_prefix.c_str(), w);
            lex.names.push_back(buf);
        }
        return lex;
    }
    throw ShapeError("toy corpus: could not build a valid lexicon");
}

std::vector<int> concat_words(const ToyLexicon& lex, const std::vector<int>& word_ids) {
    std::vector<int> out;
    for (int w : word_ids)
        out.insert(out.end(), lex.words[static_cast<std::size_t>(w)].begin(),
                   lex.words[static_cast<std::size_t>(w)].end());
    return out;
}

using SentenceAccept = std::function<bool(const ToySentence&)>;

// Distinct sentences per split, disjoint across splits, with word coverage
// (every lexicon word at least 5 times in train).
std::array<std::vector<ToySentence>, 3> make_sentences(const ToySpec& spec, int vocab,
                                                       std::mt19937_64& rng,
                                                       const SentenceAccept& accept) {
    std::uniform_int_distribution<int> len_dist(spec.sentence_min_words, spec.sentence_max_words);
    std::uniform_int_distribution<int> word_dist(0, vocab - 1);
    const int sizes[3] = {spec.train_size, spec.dev_size, spec.test_size};

    for (int attempt = 0; attempt < 100; ++attempt) {
        std::set<std::vector<int>> used;
        std::array<std::vector<ToySentence>, 3> splits;
        bool ok = true;
        for (int s = 0; s < 3 && ok; ++s) {
            int guard = 0;
            while (static_cast<int>(splits[s].size()) < sizes[s]) {
                if (++guard > sizes[s] * 1000) {
                    ok = false;
                    break;
                }
                ToySentence sent;
                int len = len_dist(rng);
                for (int i = 0; i < len; ++i) sent.word_ids.push_back(word_dist(rng));
                if (!accept(sent)) continue;
                if (!used.insert(sent.word_ids).second) continue;
                splits[s].push_back(std::move(sent));
            }
        }
        if (!ok) continue;
        // word coverage in train
        std::vector<int> counts(vocab, 0);
        for (const auto& sent : splits[0])
            for (int w : sent.word_ids) ++counts[w];
        if (*std::min_element(counts.begin(), counts.end()) < 5) continue;
        return splits;
    }
    throw ShapeError("toy corpus: could not sample sentence splits");
}

}  // namespace

std::vector<int> ToyPlan::source_phonemes(const ToySentence& s) const {
    return concat_words(source_lexicon, s.word_ids);
}
std::vector<int> ToyPlan::target_phonemes(const ToySentence& s) const {
    std::vector<int> tgt_words;
    for (int w : s.word_ids) tgt_words.push_back(translation[static_cast<std::size_t>(w)]);
    return concat_words(target_lexicon, tgt_words);
}
std::vector<int> ToyPlan::written_phonemes(const ToySentence& s) const {
    return concat_words(written_lexicon, s.word_ids);
}
std::vector<std::string> ToyPlan::source_words(const ToySentence& s) const {
    std::vector<std::string> out;
    for (int w : s.word_ids) out.push_back(source_lexicon.names[static_cast<std::size_t>(w)]);
    return out;
}
std::vector<std::string> ToyPlan::target_words(const ToySentence& s) const {
    std::vector<std::string> out;
    for (int w : s.word_ids)
        out.push_back(target_lexicon.names[static_cast<std::size_t>(translation[w])]);
    return out;
}

ToyPlan make_toy_plan(const ToySpec& spec, const Codebook& cb) {
    spec.validate();
    require(spec.num_phonemes <= cb.phonetic_count(), "toy spec: inventory exceeds codebook");
    ToyPlan plan;

    // base (source/target) inventory
    {
        std::mt19937_64 rng(spec.seed * 7919 + 1);
        std::vector<int> all(cb.phonetic_count());
        std::iota(all.begin(), all.end(), 0);
        std::shuffle(all.begin(), all.end(), rng);
        plan.inventory.assign(all.begin(), all.begin() + spec.num_phonemes);

        // written inventory: overlap with the target inventory, remainder
        // drawn from outside it
        int overlap = static_cast<int>(std::lround(spec.overlap_fraction * spec.num_phonemes));
        overlap = std::clamp(overlap, 0, spec.num_phonemes);
        plan.written_inventory.assign(plan.inventory.begin(), plan.inventory.begin() + overlap);
        std::vector<int> outside(all.begin() + spec.num_phonemes, all.end());
        require(static_cast<int>(outside.size()) >= spec.num_phonemes - overlap,
                "toy spec: codebook too small for the requested overlap");
        std::shuffle(outside.begin(), outside.end(), rng);
        plan.written_inventory.insert(plan.written_inventory.end(), outside.begin(),
                                      outside.begin() + (spec.num_phonemes - overlap));
    }

    {
        std::mt19937_64 rng(spec.seed * 7919 + 2);
        plan.source_lexicon = make_lexicon(plan.inventory, "s", spec, rng);
        plan.target_lexicon = make_lexicon(plan.inventory, "t", spec, rng);
        plan.written_lexicon = make_lexicon(plan.written_inventory, "w", spec, rng);
        plan.translation.resize(spec.words_per_lang);
        std::iota(plan.translation.begin(), plan.translation.end(), 0);
        std::shuffle(plan.translation.begin(), plan.translation.end(), rng);
    }

    {
        std::mt19937_64 rng(spec.seed * 7919 + 3);
        // reject sentences whose concatenation produces an adjacent repeat on
        // either side of the parallel pair
        plan.parallel_splits = make_sentences(spec, spec.words_per_lang, rng,
                                              [&](const ToySentence& s) {
                                                  return !has_adjacent_repeat(plan.source_phonemes(s)) &&
                                                         !has_adjacent_repeat(plan.target_phonemes(s));
                                              });
        plan.written_splits = make_sentences(spec, spec.words_per_lang, rng,
                                             [&](const ToySentence& s) {
                                                 return !has_adjacent_repeat(plan.written_phonemes(s));
                                             });
    }

    // formants: one pair per phoneme id used anywhere in the corpus
    std::set<int> ids(plan.inventory.begin(), plan.inventory.end());
    ids.insert(plan.written_inventory.begin(), plan.written_inventory.end());
    int rank = 0;
    for (int id : ids) {
        double f1 = 280.0 + 60.0 * rank;
        double f2 = 1400.0 + 80.0 * rank;
        plan.formants[id] = {f1, f2};
        ++rank;
    }
    return plan;
}

Waveform synth_utterance(const std::vector<int>& phonemes, const ToySpec& spec,
                         const FormantMap& formants) {
    spec.validate();
    require(!phonemes.empty(), "synth: empty phoneme sequence");
    std::size_t unit = static_cast<std::size_t>(spec.unit_ms * spec.sample_rate / 1000.0 + 0.5);
    std::size_t fade = static_cast<std::size_t>(spec.crossfade_ms / 2.0 * spec.sample_rate / 1000.0 + 0.5);

    Waveform w;
    w.sample_rate = spec.sample_rate;
    w.samples.assign(phonemes.size() * unit, 0.0f);
    for (std::size_t seg = 0; seg < phonemes.size(); ++seg) {
        auto it = formants.find(phonemes[seg]);
        require(it != formants.end(), "synth: unknown phoneme id " + std::to_string(phonemes[seg]));
        double f1 = it->second.first, f2 = it->second.second;
        for (std::size_t i = 0; i < unit; ++i) {
            double t = static_cast<double>(i) / spec.sample_rate;
            double v = 0.5 * std::sin(2.0 * M_PI * f1 * t) + 0.2 * std::sin(2.0 * M_PI * f2 * t);
            double env = 1.0;
            if (i < fade) env = static_cast<double>(i) / static_cast<double>(fade);
            if (unit - 1 - i < fade)
                env = std::min(env, static_cast<double>(unit - 1 - i) / static_cast<double>(fade));
            w.samples[seg * unit + i] = static_cast<float>(0.7 * env * v);
        }
    }
    return w;
}

namespace {

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
    std::ofstream os(path, std::ios::binary);
    require(static_cast<bool>(os), "toy corpus: cannot write " + path);
    for (const auto& l : lines) os << l << "\n";
}

}  // namespace

void write_toy_corpus(const ToyPlan& plan, const ToySpec& spec, const Codebook& cb,
                      const std::string& out_dir) {
    fs::create_directories(fs::path(out_dir) / "wav");
    fs::create_directories(fs::path(out_dir) / "text");

    std::vector<ManifestRecord> records;
    auto render = [&](const std::string& id, const std::vector<int>& phonemes,
                      const std::vector<std::string>& words, const std::string& lang,
                      const std::string& split) {
        Waveform w = synth_utterance(phonemes, spec, plan.formants);
        std::string rel = "wav/" + id + ".wav";
        save_wav((fs::path(out_dir) / rel).string(), w);
        ManifestRecord r;
        r.id = id;
        r.audio = rel;
        r.phonemes = join_ws(tokens_to_symbols(phonemes, cb));
        r.transcript = join_ws(words);
        r.lang = lang;
        r.split = split;
        records.push_back(std::move(r));
    };

    char buf[64];
    for (int s = 0; s < 3; ++s) {
        std::vector<std::string> src_words_lines, tgt_words_lines, tgt_phn_lines, wr_phn_lines;
        for (std::size_t i = 0; i < plan.parallel_splits[s].size(); ++i) {
            const ToySentence& sent = plan.parallel_splits[s][i];
            std::snprintf(buf, sizeof(buf), "src-%s-%04zu", kSplitNames[s], i);
            render(buf, plan.source_phonemes(sent), plan.source_words(sent), "src", kSplitNames[s]);
            std::snprintf(buf, sizeof(buf), "tgt-%s-%04zu", kSplitNames[s], i);
            render(buf, plan.target_phonemes(sent), plan.target_words(sent), "tgt", kSplitNames[s]);
            src_words_lines.push_back(join_ws(plan.source_words(sent)));
            tgt_words_lines.push_back(join_ws(plan.target_words(sent)));
            tgt_phn_lines.push_back(join_ws(tokens_to_symbols(plan.target_phonemes(sent), cb)));
        }
        for (std::size_t i = 0; i < plan.written_splits[s].size(); ++i) {
            const ToySentence& sent = plan.written_splits[s][i];
            std::snprintf(buf, sizeof(buf), "wr-%s-%04zu", kSplitNames[s], i);
            std::vector<std::string> names;
            for (int wd : sent.word_ids) names.push_back(plan.written_lexicon.names[wd]);
            render(buf, plan.written_phonemes(sent), names, "wr", kSplitNames[s]);
            wr_phn_lines.push_back(join_ws(tokens_to_symbols(plan.written_phonemes(sent), cb)));
        }
        std::string sn = kSplitNames[s];
        write_lines((fs::path(out_dir) / "text" / ("src_" + sn + ".words")).string(), src_words_lines);
        write_lines((fs::path(out_dir) / "text" / ("tgt_" + sn + ".words")).string(), tgt_words_lines);
        write_lines((fs::path(out_dir) / "text" / ("tgt_" + sn + ".phn")).string(), tgt_phn_lines);
        write_lines((fs::path(out_dir) / "text" / ("wr_" + sn + ".phn")).string(), wr_phn_lines);
    }

    // lexicons: "<word-name> <sym> <sym> ..." per line; the word <-> phoneme
    // map used when decoding hypothesis tokens back into words
    auto lexicon_lines = [&](const ToyLexicon& lex) {
        std::vector<std::string> lines;
        for (std::size_t w = 0; w < lex.words.size(); ++w)
            lines.push_back(lex.names[w] + " " + join_ws(tokens_to_symbols(lex.words[w], cb)));
        return lines;
    };
    write_lines((fs::path(out_dir) / "text" / "lexicon_src.txt").string(),
                lexicon_lines(plan.source_lexicon));
    write_lines((fs::path(out_dir) / "text" / "lexicon_tgt.txt").string(),
                lexicon_lines(plan.target_lexicon));
    write_lines((fs::path(out_dir) / "text" / "lexicon_wr.txt").string(),
                lexicon_lines(plan.written_lexicon));

    write_manifest((fs::path(out_dir) / "manifest.jsonl").string(), records);
}

}  // namespace pvs
