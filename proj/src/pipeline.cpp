#include "pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace pvs {

namespace fs = std::filesystem;

namespace {

template <typename Fn>
auto stage_guard(const std::string& stage, Fn&& fn) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(stage, e.what());
    }
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
    std::ofstream os(path, std::ios::binary);
    require(static_cast<bool>(os), "cannot write " + path);
    for (const auto& l : lines) os << l << "\n";
    require(static_cast<bool>(os), "write failed " + path);
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    require(static_cast<bool>(is), "cannot open " + path);
    std::vector<std::string> out;
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        out.push_back(line);
    }
    return out;
}

Codebook codebook_from_config(const RunConfig& cfg) {
    if (cfg.has("codebook.labels_inline")) {
        std::vector<std::string> symbols = split_ws(cfg.get_str("codebook.labels_inline"));
        return codebook_from_labels(symbols);
    }
    Codebook cb = load_codebook_labels(cfg.get_str("codebook.labels"));
    require(cb.phonetic_count() == static_cast<int>(cfg.get_int("codebook.size")),
            "label file size does not match codebook.size");
    return cb;
}

RunConfig with_inline_labels(const RunConfig& cfg, const Codebook& cb) {
    RunConfig out = cfg;
    std::vector<std::string> symbols = cb.labels;
    symbols.push_back("<blank>");
    out.set("codebook.labels_inline", join_ws(symbols));
    return out;
}

}  // namespace

void write_token_file(const std::string& path, const std::vector<std::vector<std::string>>& lines,
                      const std::vector<std::string>& ids) {
    require(ids.empty() || ids.size() == lines.size(), "token file: id count mismatch");
    std::vector<std::string> joined;
    joined.reserve(lines.size());
    for (const auto& l : lines) joined.push_back(join_ws(l));
    write_lines(path, joined);
    if (!ids.empty()) write_lines(path + ".ids", ids);
}

std::vector<std::vector<std::string>> read_token_file(const std::string& path) {
    std::vector<std::vector<std::string>> out;
    for (const auto& line : read_lines(path)) out.push_back(split_ws(line));
    return out;
}

std::vector<std::string> read_id_file(const std::string& path) { return read_lines(path); }

std::vector<Utterance> load_utterances(const std::string& corpus_dir,
                                       const std::vector<ManifestRecord>& records,
                                       const SignalConfig& sig, const Codebook& cb) {
    std::vector<Utterance> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        Utterance u;
        u.id = r.id;
        Waveform w = load_wav((fs::path(corpus_dir) / r.audio).string());
        u.mel = mel_spectrogram(w, sig).frames;
        if (!r.phonemes.empty()) u.phonemes = symbols_to_tokens(split_ws(r.phonemes), cb);
        u.transcript_words = split_ws(r.transcript);
        out.push_back(std::move(u));
    }
    return out;
}

void save_xlvae_checkpoint(const std::string& path, XlVaeModel<float>& model,
                           const RunConfig& cfg) {
    model.params.config_text = with_inline_labels(cfg, model.codebook).to_text();
    save_checkpoint(path, model.params);
}

XlVaeModel<float> load_xlvae_checkpoint(const std::string& path) {
    XlVaeModel<float> model;
    load_checkpoint(path, model.params);
    RunConfig cfg = RunConfig::from_text(model.params.config_text);
    model.block = cfg.block_config();
    model.signal = cfg.signal_config();
    model.codebook = codebook_from_config(cfg);
    require(model.params.has("codebook.e"), "checkpoint is not an xl-vae model");
    require(model.embeddings().rows() == static_cast<std::size_t>(model.codebook.total_rows()),
            "checkpoint codebook shape mismatch");
    return model;
}

void save_translator_checkpoint(const std::string& path, TranslatorModel<float>& model,
                                const RunConfig& cfg) {
    Codebook cb = codebook_from_config(cfg);
    model.params.config_text = with_inline_labels(cfg, cb).to_text();
    save_checkpoint(path, model.params);
}

TranslatorModel<float> load_translator_checkpoint(const std::string& path) {
    TranslatorModel<float> model;
    load_checkpoint(path, model.params);
    RunConfig cfg = RunConfig::from_text(model.params.config_text);
    model.block = cfg.block_config();
    model.signal = cfg.signal_config();
    model.vocab_k = static_cast<int>(cfg.get_int("codebook.size"));
    require(model.params.has("dec.embed"), "checkpoint is not a translator model");
    return model;
}

RunConfig checkpoint_config(const std::string& path) {
    ParamStore<float> ps;
    load_checkpoint(path, ps);
    return RunConfig::from_text(ps.config_text);
}

namespace stages {

void gen_toy(const RunConfig& cfg, const std::string& out_dir) {
    stage_guard("gen-toy", [&] {
        cfg.validate();
        Codebook cb = codebook_from_config(cfg);
        ToySpec spec = cfg.toy_spec();
        ToyPlan plan = make_toy_plan(spec, cb);
        write_toy_corpus(plan, spec, cb, out_dir);
    });
}

void extract_features(const RunConfig& cfg, const std::string& wav_path,
                      const std::string& mel_path) {
    stage_guard("extract-features", [&] {
        Waveform w = load_wav(wav_path);
        save_mel(mel_path, mel_spectrogram(w, cfg.signal_config()));
    });
}

void train_xlvae_stage(const RunConfig& cfg, const std::string& corpus_dir,
                       const std::string& out_checkpoint, const std::string& metrics_path) {
    stage_guard("train-xlvae", [&] {
        cfg.validate();
        Codebook cb = codebook_from_config(cfg);
        SignalConfig sig = cfg.signal_config();
        auto records = read_manifest((fs::path(corpus_dir) / "manifest.jsonl").string());
        auto unwritten = load_utterances(corpus_dir, filter_records(records, "tgt", "train"), sig, cb);
        auto written = load_utterances(corpus_dir, filter_records(records, "wr", "train"), sig, cb);
        auto written_dev = load_utterances(corpus_dir, filter_records(records, "wr", "dev"), sig, cb);
        require(!unwritten.empty(), "no target-language training utterances");
        require(!written.empty(), "no written-language training utterances");

        XlVaeModel<float> model = init_xlvae<float>(cfg.block_config(), sig, cb, cfg.seed());
        XlVaeTrainConfig tc = cfg.xlvae_config();
        AdamOptimizer<float> opt = cfg.optimizer<float>(model.block.hidden_size);

        long start_step = 0;
        if (cfg.get_bool("xlvae.resume") && fs::exists(out_checkpoint) &&
            fs::exists(out_checkpoint + ".opt")) {
            load_checkpoint(out_checkpoint, model.params);
            load_adam_state(out_checkpoint + ".opt", model.params, opt);
            start_step = opt.step_count;
        }

        std::ofstream metrics;
        XlVaeTrainHooks hooks;
        if (!metrics_path.empty()) {
            metrics.open(metrics_path, start_step > 0 ? std::ios::app : std::ios::binary);
            require(static_cast<bool>(metrics), "cannot write metrics " + metrics_path);
            hooks.metrics = &metrics;
        }
        hooks.on_checkpoint = [&](long) {
            save_xlvae_checkpoint(out_checkpoint, model, cfg);
            save_adam_state(out_checkpoint + ".opt", model.params, opt);
        };
        train_xlvae(model, unwritten, written, written_dev, tc, hooks, start_step, &opt);
        save_xlvae_checkpoint(out_checkpoint, model, cfg);
        save_adam_state(out_checkpoint + ".opt", model.params, opt);
    });
}

void convert_stage(const std::string& checkpoint, const std::string& corpus_dir,
                   const std::string& lang, const std::string& split,
                   const std::string& out_tokens) {
    stage_guard("convert", [&] {
        XlVaeModel<float> model = load_xlvae_checkpoint(checkpoint);
        auto records = read_manifest((fs::path(corpus_dir) / "manifest.jsonl").string());
        auto subset = filter_records(records, lang, split);
        require(!subset.empty(), "no utterances for lang=" + lang + " split=" + split);
        auto utts = load_utterances(corpus_dir, subset, model.signal, model.codebook);
        auto sequences = convert_corpus(utts, model);
        std::vector<std::vector<std::string>> lines;
        std::vector<std::string> ids;
        for (std::size_t i = 0; i < sequences.size(); ++i) {
            lines.push_back(tokens_to_symbols(sequences[i].tokens, model.codebook));
            ids.push_back(utts[i].id);
        }
        write_token_file(out_tokens, lines, ids);
    });
}

void train_translator_stage(const RunConfig& cfg, const std::string& corpus_dir,
                            const std::string& xlvae_checkpoint,
                            const std::string& target_tokens_prefix,
                            const std::string& out_checkpoint, const std::string& metrics_path) {
    stage_guard("train-translator", [&] {
        cfg.validate();
        Codebook cb = codebook_from_config(cfg);
        SignalConfig sig = cfg.signal_config();
        auto records = read_manifest((fs::path(corpus_dir) / "manifest.jsonl").string());

        // target token corpora: written by the convert stage, or derived here
        // from the xl-vae checkpoint when no prefix is given
        std::map<std::string, std::vector<int>> target_tokens;
        auto gather = [&](const std::string& split) {
            if (!target_tokens_prefix.empty()) {
                std::string base = target_tokens_prefix + split + ".tokens";
                auto lines = read_token_file(base);
                auto ids = read_id_file(base + ".ids");
                require(lines.size() == ids.size(), "token/id line mismatch in " + base);
                for (std::size_t i = 0; i < lines.size(); ++i)
                    target_tokens[ids[i]] = symbols_to_tokens(lines[i], cb);
            } else {
                require(!xlvae_checkpoint.empty(), "need target tokens or an xl-vae checkpoint");
                XlVaeModel<float> model = load_xlvae_checkpoint(xlvae_checkpoint);
                auto utts = load_utterances(corpus_dir, filter_records(records, "tgt", split), sig, cb);
                auto seqs = convert_corpus(utts, model);
                for (std::size_t i = 0; i < utts.size(); ++i)
                    target_tokens[utts[i].id] = seqs[i].tokens;
            }
        };
        gather("train");
        gather("dev");

        auto make_pairs = [&](const std::string& split) {
            std::vector<TranslationPair> pairs;
            auto src = load_utterances(corpus_dir, filter_records(records, "src", split), sig, cb);
            for (auto& s : src) {
                std::string tgt_id = "tgt" + s.id.substr(3);  // src-<split>-NNNN -> tgt-...
                auto it = target_tokens.find(tgt_id);
                require(it != target_tokens.end(), "missing target tokens for " + tgt_id);
                require(!it->second.empty(), "empty target token sequence for " + tgt_id);
                TranslationPair p;
                p.id = s.id;
                p.source_mel = std::move(s.mel);
                p.target_tokens = it->second;
                pairs.push_back(std::move(p));
            }
            return pairs;
        };
        auto train_pairs = make_pairs("train");
        auto dev_pairs = make_pairs("dev");
        require(!train_pairs.empty(), "empty training pairs");

        TranslatorModel<float> model =
            init_translator<float>(cfg.block_config(), sig, cb.phonetic_count(), cfg.seed() + 7);
        TranslatorTrainConfig tc = cfg.translator_config();
        AdamOptimizer<float> opt = cfg.optimizer<float>(model.block.hidden_size);

        long start_step = 0;
        if (cfg.get_bool("translator.resume") && fs::exists(out_checkpoint) &&
            fs::exists(out_checkpoint + ".opt")) {
            load_checkpoint(out_checkpoint, model.params);
            load_adam_state(out_checkpoint + ".opt", model.params, opt);
            start_step = opt.step_count;
        }

        std::ofstream metrics;
        TranslatorTrainHooks hooks;
        if (!metrics_path.empty()) {
            metrics.open(metrics_path, start_step > 0 ? std::ios::app : std::ios::binary);
            require(static_cast<bool>(metrics), "cannot write metrics " + metrics_path);
            hooks.metrics = &metrics;
        }
        hooks.on_checkpoint = [&](long) {
            save_translator_checkpoint(out_checkpoint, model, cfg);
            save_adam_state(out_checkpoint + ".opt", model.params, opt);
        };
        train_translator(model, train_pairs, dev_pairs, tc, hooks, start_step, &opt);
        save_translator_checkpoint(out_checkpoint, model, cfg);
        save_adam_state(out_checkpoint + ".opt", model.params, opt);
    });
}

void translate_stage(const std::string& translator_checkpoint, const std::string& corpus_dir,
                     const std::string& split, const std::string& out_tokens) {
    stage_guard("translate", [&] {
        TranslatorModel<float> model = load_translator_checkpoint(translator_checkpoint);
        RunConfig cfg = RunConfig::from_text(model.params.config_text);
        Codebook cb = codebook_from_config(cfg);
        BeamConfig beam = cfg.beam_config();
        auto records = read_manifest((fs::path(corpus_dir) / "manifest.jsonl").string());
        auto utts = load_utterances(corpus_dir, filter_records(records, "src", split),
                                    model.signal, cb);
        require(!utts.empty(), "no source utterances for split=" + split);
        std::vector<std::vector<std::string>> lines;
        std::vector<std::string> ids;
        for (const auto& u : utts) {
            TokenSequence seq = beam_translate(u.mel, model, beam);
            lines.push_back(tokens_to_symbols(seq.tokens, cb));
            ids.push_back(u.id);
        }
        write_token_file(out_tokens, lines, ids);
    });
}

void invert_stage(const std::string& xlvae_checkpoint, const std::string& tokens_path,
                  const std::string& out_mel_dir) {
    stage_guard("invert", [&] {
        XlVaeModel<float> model = load_xlvae_checkpoint(xlvae_checkpoint);
        auto lines = read_token_file(tokens_path);
        std::vector<std::string> ids;
        if (fs::exists(tokens_path + ".ids")) {
            ids = read_id_file(tokens_path + ".ids");
            require(ids.size() == lines.size(), "token/id line mismatch");
        } else {
            char buf[32];
            for (std::size_t i = 0; i < lines.size(); ++i) {
                std::snprintf(buf, sizeof(buf), "line_%04zu", i);
                ids.push_back(buf);
            }
        }
        fs::create_directories(out_mel_dir);
        for (std::size_t i = 0; i < lines.size(); ++i) {
            std::vector<int> tokens = symbols_to_tokens(lines[i], model.codebook);
            MelSpectrogram mel;
            mel.frame_ms = model.signal.frame_ms;
            mel.hop_ms = model.signal.hop_ms;
            if (tokens.empty()) {
                // no tokens, no frames; emit one floor frame so the file is valid
                mel.frames = Tensor<float>(1, static_cast<std::size_t>(model.signal.num_mels),
                                           static_cast<float>(model.signal.log_floor()));
            } else {
                Graph<float> g;
                int ez = g.gather_rows(g.leaf(model.params.get("codebook.e")), tokens);
                int out = inverter_forward(g, ez, model);
                mel.frames = denormalize_mel(g.value(out), model.signal.log_floor());
            }
            save_mel((fs::path(out_mel_dir) / (ids[i] + ".mel")).string(), mel);
        }
    });
}

void vocode_stage(const RunConfig& cfg, const std::string& mel_path,
                  const std::string& wav_path) {
    stage_guard("vocode", [&] {
        MelSpectrogram mel = load_mel(mel_path);
        save_wav(wav_path, griffin_lim(mel, cfg.signal_config(), cfg.seed()));
    });
}

EvalReport evaluate_bleu_files(const std::string& hyp_path,
                               const std::vector<std::string>& ref_paths,
                               const std::string& out_base) {
    return stage_guard("evaluate", [&] {
        require(!ref_paths.empty(), "need at least one reference file");
        auto hyps = read_token_file(hyp_path);
        std::vector<std::vector<std::vector<std::string>>> refs(hyps.size());
        for (const auto& rp : ref_paths) {
            auto lines = read_token_file(rp);
            require(lines.size() == hyps.size(),
                    "reference line count mismatch: " + rp);
            for (std::size_t i = 0; i < lines.size(); ++i) refs[i].push_back(lines[i]);
        }
        EvalReport rep = bleu(hyps, refs);
        if (!out_base.empty()) {
            write_lines(out_base + ".txt", {rep.to_text()});
            write_lines(out_base + ".kv", {rep.to_kv()});
        }
        return rep;
    });
}

double evaluate_per_files(const std::string& hyp_path, const std::string& ref_path) {
    return stage_guard("evaluate", [&] {
        auto hyps = read_token_file(hyp_path);
        auto refs = read_token_file(ref_path);
        require(hyps.size() == refs.size(), "hyp/ref line count mismatch");
        std::size_t edits = 0, len = 0;
        for (std::size_t i = 0; i < hyps.size(); ++i) {
            require(!refs[i].empty(), "empty reference line " + std::to_string(i + 1));
            edits += levenshtein(hyps[i], refs[i]);
            len += refs[i].size();
        }
        return static_cast<double>(edits) / static_cast<double>(len);
    });
}

EndToEndResult end_to_end(const RunConfig& cfg, const std::string& work_dir) {
    cfg.validate();
    fs::create_directories(work_dir);
    fs::path work(work_dir);
    std::string corpus = (work / "corpus").string();

    if (!fs::exists(fs::path(corpus) / "manifest.jsonl")) gen_toy(cfg, corpus);

    std::string xlvae_ckpt = (work / "xlvae.ckpt").string();
    train_xlvae_stage(cfg, corpus, xlvae_ckpt, (work / "metrics_xlvae.log").string());

    fs::create_directories(work / "tokens");
    for (const char* split : {"train", "dev", "test"})
        convert_stage(xlvae_ckpt, corpus, "tgt", split,
                      (work / "tokens" / ("tgt_" + std::string(split) + ".tokens")).string());

    std::string trans_ckpt = (work / "translator.ckpt").string();
    train_translator_stage(cfg, corpus, xlvae_ckpt, (work / "tokens" / "tgt_").string(),
                           trans_ckpt, (work / "metrics_translator.log").string());

    fs::create_directories(work / "translated");
    std::string hyp_tokens = (work / "translated" / "test.tokens").string();
    translate_stage(trans_ckpt, corpus, "test", hyp_tokens);

    // inference step 2: tokens -> mel -> waveform
    invert_stage(xlvae_ckpt, hyp_tokens, (work / "translated" / "mel").string());
    fs::create_directories(work / "translated" / "wav");
    {
        auto ids = read_id_file(hyp_tokens + ".ids");
        for (const auto& id : ids)
            vocode_stage(cfg, (work / "translated" / "mel" / (id + ".mel")).string(),
                         (work / "translated" / "wav" / (id + ".wav")).string());
    }

    EndToEndResult result;
    // token-level BLEU against the reference token corpus
    EvalReport token_rep = evaluate_bleu_files(
        hyp_tokens, {(work / "tokens" / "tgt_test.tokens").string()},
        (work / "report_token_bleu").string());
    result.token_bleu = token_rep.bleu;

    // word-level BLEU via the lexicon inverse map
    auto lexicon = load_lexicon_file((fs::path(corpus) / "text" / "lexicon_tgt.txt").string());
    auto hyp_lines = read_token_file(hyp_tokens);
    std::vector<std::vector<std::string>> hyp_words;
    for (const auto& line : hyp_lines) hyp_words.push_back(decode_words_from_tokens(line, lexicon));
    std::string hyp_words_path = (work / "translated" / "test.words").string();
    write_token_file(hyp_words_path, hyp_words, read_id_file(hyp_tokens + ".ids"));
    EvalReport word_rep = evaluate_bleu_files(
        hyp_words_path, {(fs::path(corpus) / "text" / "tgt_test.words").string()},
        (work / "report_word_bleu").string());
    result.word_bleu = word_rep.bleu;

    // written-language dev PER, persisted so `evaluate` can recompute it
    {
        XlVaeModel<float> model = load_xlvae_checkpoint(xlvae_ckpt);
        auto records = read_manifest((fs::path(corpus) / "manifest.jsonl").string());
        auto dev = load_utterances(corpus, filter_records(records, "wr", "dev"), model.signal,
                                   model.codebook);
        std::vector<std::vector<std::string>> decoded;
        std::vector<std::string> ids;
        for (const auto& u : dev) {
            Graph<float> g;
            int hidden = converter_forward(g, u.mel, model);
            int logits = g.matmul_nt(hidden, g.leaf(model.params.get("codebook.e")));
            auto hyp = ctc_greedy_decode(g.value(logits), model.codebook.blank_index);
            decoded.push_back(tokens_to_symbols(hyp, model.codebook));
            ids.push_back(u.id);
        }
        std::string dec_path = (work / "tokens" / "wr_dev_greedy.phn").string();
        write_token_file(dec_path, decoded, ids);
        result.written_dev_per =
            evaluate_per_files(dec_path, (fs::path(corpus) / "text" / "wr_dev.phn").string());
    }

    std::ostringstream report;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "token_bleu = %.2f", result.token_bleu);
    report << buf << "\n";
    std::snprintf(buf, sizeof(buf), "word_bleu = %.2f", result.word_bleu);
    report << buf << "\n";
    std::snprintf(buf, sizeof(buf), "written_dev_per = %.4f", result.written_dev_per);
    report << buf << "\n";
    report << "hyp_tokens = translated/test.tokens\n";
    report << "ref_tokens = tokens/tgt_test.tokens\n";
    report << "hyp_words = translated/test.words\n";
    report << "ref_words = corpus/text/tgt_test.words\n";
    result.report_text = report.str();
    write_lines((work / "report.kv").string(), {result.report_text});
    return result;
}

}  // namespace stages

std::vector<std::pair<std::string, std::vector<std::string>>> load_lexicon_file(
    const std::string& path) {
    std::vector<std::pair<std::string, std::vector<std::string>>> out;
    for (const auto& line : read_lines(path)) {
        if (line.empty()) continue;
        auto parts = split_ws(line);
        require(parts.size() >= 2, "lexicon: bad line: " + line);
        out.emplace_back(parts[0], std::vector<std::string>(parts.begin() + 1, parts.end()));
    }
    return out;
}

std::vector<std::string> decode_words_from_tokens(
    const std::vector<std::string>& token_symbols,
    const std::vector<std::pair<std::string, std::vector<std::string>>>& lexicon) {
    require(!lexicon.empty(), "decode_words: empty lexicon");
    // collapse repeated tokens
    std::vector<std::string> collapsed;
    for (const auto& s : token_symbols)
        if (collapsed.empty() || collapsed.back() != s) collapsed.push_back(s);
    if (collapsed.empty()) return {};

    std::size_t n = collapsed.size();
    std::size_t max_word = 0;
    for (const auto& [name, phon] : lexicon) max_word = std::max(max_word, phon.size());
    std::size_t max_span = 2 * max_word + 2;

    const double kInf = 1e18;
    std::vector<double> cost(n + 1, kInf);
    std::vector<int> back_word(n + 1, -1);
    std::vector<std::size_t> back_pos(n + 1, 0);
    cost[0] = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
        std::size_t j0 = i > max_span ? i - max_span : 0;
        for (std::size_t j = j0; j < i; ++j) {
            if (cost[j] >= kInf) continue;
            std::vector<std::string> span(collapsed.begin() + j, collapsed.begin() + i);
            for (std::size_t w = 0; w < lexicon.size(); ++w) {
                double c = cost[j] + static_cast<double>(levenshtein(span, lexicon[w].second));
                if (c < cost[i]) {
                    cost[i] = c;
                    back_word[i] = static_cast<int>(w);
                    back_pos[i] = j;
                }
            }
        }
    }
    std::vector<std::string> words;
    for (std::size_t i = n; i > 0; i = back_pos[i]) {
        require(back_word[i] >= 0, "decode_words: broken backtrace");
        words.push_back(lexicon[static_cast<std::size_t>(back_word[i])].first);
    }
    std::reverse(words.begin(), words.end());
    return words;
}

}  // namespace pvs
