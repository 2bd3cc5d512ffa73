#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "translator.hpp"

using namespace pvs;

namespace {

BlockConfig tiny_block(int hidden = 8, int blocks = 1, int heads = 2, int ffn = 16) {
    BlockConfig b;
    b.hidden_size = hidden;
    b.ffn_size = ffn;
    b.num_blocks = blocks;
    b.num_heads = heads;
    b.conv_filters = hidden;
    b.dropout = 0.0;
    return b;
}

SignalConfig tiny_signal(int mels = 6) {
    SignalConfig s;
    s.num_mels = mels;
    return s;
}

Tensor<float> random_mel(std::size_t l, int mels, std::uint64_t seed) {
    Tensor<float> t(l, static_cast<std::size_t>(mels));
    std::mt19937_64 rng(seed);
    fill_uniform(t, rng, 2.0);
    return t;
}

// Scoring-compatible exhaustive search: every EOS-terminated sequence up to
// max_len - 1 tokens plus every unterminated sequence of exactly max_len
// tokens. Independent of the beam implementation.
template <typename T>
std::vector<int> exhaustive_best(const Tensor<T>& mel, TranslatorModel<T>& model,
                                 std::size_t max_len, double alpha) {
    Graph<T> g;
    Tensor<T> memory = g.value(translator_encode(g, mel, model));

    auto step_log_probs = [&](const std::vector<int>& prefix) {
        Graph<T> g2;
        std::vector<int> input{model.bos()};
        input.insert(input.end(), prefix.begin(), prefix.end());
        int logits = translator_decode(g2, input, g2.input(memory), model);
        const Tensor<T>& v = g2.value(logits);
        std::size_t row = v.rows() - 1;
        std::vector<double> lp(model.vocab_total());
        double mx = -1e300;
        for (int c = 0; c < model.vocab_total(); ++c)
            mx = std::max(mx, static_cast<double>(v.at(row, c)));
        double sum = 0;
        for (int c = 0; c < model.vocab_total(); ++c)
            sum += std::exp(static_cast<double>(v.at(row, c)) - mx);
        for (int c = 0; c < model.vocab_total(); ++c)
            lp[c] = static_cast<double>(v.at(row, c)) - mx - std::log(sum);
        return lp;
    };

    std::vector<int> best_tokens;
    double best_score = -1e300;
    // iterate over all token sequences of length <= max_len
    std::function<void(std::vector<int>&, double)> recurse = [&](std::vector<int>& prefix,
                                                                 double log_prob) {
        auto lp = step_log_probs(prefix);
        double eos_score =
            (log_prob + lp[model.eos()]) / length_penalty_value(prefix.size(), alpha);
        if (eos_score > best_score) {
            best_score = eos_score;
            best_tokens = prefix;
        }
        if (prefix.size() == max_len) return;
        for (int v = 0; v < model.vocab_k; ++v) {
            prefix.push_back(v);
            double np = log_prob + lp[v];
            if (prefix.size() == max_len) {
                double score = np / length_penalty_value(prefix.size(), alpha);
                if (score > best_score) {
                    best_score = score;
                    best_tokens = prefix;
                }
            }
            recurse(prefix, np);
            prefix.pop_back();
        }
    };
    std::vector<int> empty;
    recurse(empty, 0.0);
    return best_tokens;
}

// Highest beam score of the returned hypothesis, reconstructed from the
// termination rule: shorter than max_len means EOS-terminated.
template <typename T>
double returned_score(const Tensor<T>& mel, TranslatorModel<T>& model,
                      const std::vector<int>& tokens, std::size_t max_len, double alpha) {
    Graph<T> g;
    Tensor<T> memory = g.value(translator_encode(g, mel, model));
    double log_prob = 0.0;
    std::vector<int> prefix;
    for (std::size_t i = 0; i <= tokens.size(); ++i) {
        Graph<T> g2;
        std::vector<int> input{model.bos()};
        input.insert(input.end(), prefix.begin(), prefix.end());
        int logits = translator_decode(g2, input, g2.input(memory), model);
        const Tensor<T>& v = g2.value(logits);
        std::size_t row = v.rows() - 1;
        double mx = -1e300;
        for (int c = 0; c < model.vocab_total(); ++c)
            mx = std::max(mx, static_cast<double>(v.at(row, c)));
        double sum = 0;
        for (int c = 0; c < model.vocab_total(); ++c)
            sum += std::exp(static_cast<double>(v.at(row, c)) - mx);
        double logz = mx + std::log(sum);
        if (i < tokens.size()) {
            log_prob += static_cast<double>(v.at(row, tokens[i])) - logz;
            prefix.push_back(tokens[i]);
        } else if (tokens.size() < max_len) {
            log_prob += static_cast<double>(v.at(row, model.eos())) - logz;
        }
    }
    return log_prob / length_penalty_value(tokens.size(), alpha);
}

template <typename T>
TranslatorModel<T> random_output_model(int vocab_k, std::uint64_t seed, int hidden = 8) {
    auto m = init_translator<T>(tiny_block(hidden), tiny_signal(), vocab_k, seed);
    std::mt19937_64 rng(seed + 1);  // break the all-uniform zero init
    fill_uniform(m.params.get("dec.out.w").value, rng, 0.8);
    fill_uniform(m.params.get("dec.out.b").value, rng, 0.2);
    return m;
}

}  // namespace

TEST_CASE("untrained model scores ln(vocab_size) per token") {
    auto model = init_translator<float>(tiny_block(), tiny_signal(), 10, 3);
    Tensor<float> mel = random_mel(16, 6, 1);
    std::vector<int> z{1, 4, 7};
    double nll = translator_nll(model, mel, z);
    CHECK(nll == doctest::Approx(std::log(13.0)).epsilon(1e-6));  // K + BOS/EOS/PAD
}

TEST_CASE("teacher forcing is causal: later target tokens cannot change earlier logits") {
    auto model = random_output_model<float>(6, 7);
    Tensor<float> mel = random_mel(12, 6, 2);
    Graph<float> g1, g2;
    int mem1 = translator_encode(g1, mel, model);
    int logits1 = translator_decode(g1, {model.bos(), 1, 2, 3}, mem1, model);
    int mem2 = translator_encode(g2, mel, model);
    int logits2 = translator_decode(g2, {model.bos(), 1, 2, 5}, mem2, model);
    for (std::size_t r = 0; r < 3; ++r)
        for (int c = 0; c < model.vocab_total(); ++c)
            CHECK(g1.value(logits1).at(r, c) == g2.value(logits2).at(r, c));
}

TEST_CASE("translator nll gradients match finite differences") {
    auto model = init_translator<double>(tiny_block(8, 1, 2), tiny_signal(), 5, 11);
    std::mt19937_64 rng(12);
    fill_uniform(model.params.get("dec.out.w").value, rng, 0.5);
    Tensor<double> mel = random_mel(8, 6, 3).cast<double>();
    std::vector<int> z{0, 3, 1};
    auto build = [&](Graph<double>& g) { return translator_nll_node(g, mel, z, model); };
    auto report = gradient_check<double>(model.params, build, 1e-4);
    INFO(report.to_string());
    CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("nll is non-negative and zero only for certain predictions") {
    auto model = random_output_model<float>(5, 13);
    Tensor<float> mel = random_mel(10, 6, 4);
    CHECK(translator_nll(model, mel, {0, 2}) > 0.0);
}

TEST_CASE("zero training steps leave parameters at initialization") {
    auto a = init_translator<float>(tiny_block(), tiny_signal(), 6, 17);
    auto b = init_translator<float>(tiny_block(), tiny_signal(), 6, 17);
    std::vector<TranslationPair> pairs(1);
    pairs[0].source_mel = random_mel(12, 6, 5);
    pairs[0].target_tokens = {1, 2};
    TranslatorTrainConfig cfg;
    cfg.steps = 0;
    train_translator(b, pairs, {}, cfg);
    for (const auto* p : a.params.all())
        CHECK(p->value.data == b.params.get(p->name).value.data);
}

TEST_CASE("overfit: nll halves within 300 steps on 8 fixed pairs") {
    auto model = init_translator<float>(tiny_block(16, 1, 2, 32), tiny_signal(), 6, 19);
    std::vector<TranslationPair> pairs;
    std::mt19937_64 rng(23);
    for (int i = 0; i < 8; ++i) {
        TranslationPair p;
        p.source_mel = random_mel(12, 6, 600 + i);
        std::uniform_int_distribution<int> tok(0, 5);
        int len = 2 + i % 3;
        for (int j = 0; j < len; ++j) p.target_tokens.push_back(tok(rng));
        pairs.push_back(std::move(p));
    }
    auto mean_nll = [&]() {
        double acc = 0;
        for (auto& p : pairs) {
            Tensor<float> mel = p.source_mel;
            acc += translator_nll(model, mel, p.target_tokens);
        }
        return acc / pairs.size();
    };
    double before = mean_nll();
    TranslatorTrainConfig cfg;
    cfg.steps = 300;
    cfg.batch_frames = 96;
    cfg.warmup_steps = 50;
    train_translator(model, pairs, {}, cfg);
    double after = mean_nll();
    INFO("nll before=", before, " after=", after);
    CHECK(after < 0.5 * before);
}

TEST_CASE("near-deterministic decoder: beam output equals greedy for any beam size") {
    auto model = random_output_model<float>(5, 29);
    // sharpen distributions towards one-hot
    for (auto& v : model.params.get("dec.out.w").value.data) v *= 50.0f;
    for (auto& v : model.params.get("dec.out.b").value.data) v *= 50.0f;
    Tensor<float> mel = random_mel(8, 6, 6);
    BeamConfig greedy;
    greedy.beam_size = 1;
    auto base = beam_translate(mel, model, greedy);
    for (int width : {2, 4, 64}) {
        BeamConfig b;
        b.beam_size = width;
        CHECK(beam_translate(mel, model, b).tokens == base.tokens);
    }
}

TEST_CASE("beam 64 equals exhaustive argmax on a tiny decoder (50 random inputs)") {
    auto model = random_output_model<float>(4, 31);
    BeamConfig beam;
    beam.beam_size = 64;
    beam.length_penalty = 1.0;
    beam.max_len_factor = 3.0;  // encoder length 1 -> max_len 3
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Tensor<float> mel = random_mel(3, 6, 700 + seed);  // ceil(3/4) = 1 encoder frame
        auto got = beam_translate(mel, model, beam);
        auto want = exhaustive_best(mel, model, 3, beam.length_penalty);
        CHECK(got.tokens == want);
    }
}

TEST_CASE("alpha 0 disables the length penalty") {
    CHECK(length_penalty_value(0, 0.0) == 1.0);
    CHECK(length_penalty_value(7, 0.0) == 1.0);
    CHECK(length_penalty_value(7, 1.0) == doctest::Approx(2.0));

    auto model = random_output_model<float>(4, 37);
    BeamConfig beam;
    beam.beam_size = 64;
    beam.length_penalty = 0.0;
    beam.max_len_factor = 3.0;
    Tensor<float> mel = random_mel(3, 6, 8);
    auto got = beam_translate(mel, model, beam);
    auto want = exhaustive_best(mel, model, 3, 0.0);
    CHECK(got.tokens == want);
}

TEST_CASE("widening the beam never lowers the returned score") {
    auto model = random_output_model<float>(4, 41);
    Tensor<float> mel = random_mel(5, 6, 9);  // encoder length 2 -> max_len 4
    BeamConfig beam;
    beam.max_len_factor = 2.0;
    double prev = -1e300;
    for (int width : {1, 2, 4, 8, 64}) {
        beam.beam_size = width;
        auto out = beam_translate(mel, model, beam);
        double score = returned_score(mel, model, out.tokens, 4, beam.length_penalty);
        CHECK(score >= prev - 1e-9);
        prev = score;
    }
}
