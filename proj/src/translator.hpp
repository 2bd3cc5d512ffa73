#pragma once

#include <algorithm>
#include <functional>
#include <ostream>

#include "corpus.hpp"
#include "nn.hpp"
#include "quantizer.hpp"
#include "signal.hpp"
#include "xlvae.hpp"

namespace pvs {

struct BeamConfig {
    int beam_size = 4;
    double length_penalty = 1.0;  // GNMT alpha
    double max_len_factor = 2.0;  // times the encoder output length

    void validate() const {
        require(beam_size >= 1, "beam config: beam_size must be >= 1");
        require(length_penalty >= 0.0, "beam config: length_penalty must be >= 0");
        require(max_len_factor > 0.0, "beam config: max_len_factor must be positive");
    }
};

// GNMT length penalty; |Y| counts phonetic output tokens (EOS excluded).
inline double length_penalty_value(std::size_t length, double alpha) {
    return std::pow((5.0 + static_cast<double>(length)) / 6.0, alpha);
}

// Encoder over source mel (conv downsample + non-causal blocks); decoder over
// target discrete tokens with BOS/EOS/PAD specials beyond the K phonetic ids.
template <typename T>
struct TranslatorModel {
    ParamStore<T> params;
    BlockConfig block;
    SignalConfig signal;
    int vocab_k = 0;  // phonetic token count (shared ids with the codebook)

    int bos() const { return vocab_k; }
    int eos() const { return vocab_k + 1; }
    int pad() const { return vocab_k + 2; }
    int vocab_total() const { return vocab_k + 3; }
};

template <typename T>
TranslatorModel<T> init_translator(const BlockConfig& block, const SignalConfig& signal,
                                   int vocab_k, std::uint64_t seed) {
    block.validate();
    require(vocab_k >= 1, "translator: vocab must be non-empty");
    TranslatorModel<T> m;
    m.block = block;
    m.signal = signal;
    m.vocab_k = vocab_k;
    std::mt19937_64 rng(seed);
    init_conv_stack_params(m.params, "enc.conv", static_cast<std::size_t>(signal.num_mels), block,
                           rng);
    init_transformer_stack_params(m.params, "enc", block, false, rng);
    auto& emb = m.params.create("dec.embed", static_cast<std::size_t>(m.vocab_total()),
                                static_cast<std::size_t>(block.hidden_size));
    fill_uniform(emb.value, rng, 0.1);
    init_transformer_stack_params(m.params, "dec", block, true, rng);
    // zero-init keeps the untrained output distribution exactly uniform
    init_linear_params(m.params, "dec.out", static_cast<std::size_t>(block.hidden_size),
                       static_cast<std::size_t>(m.vocab_total()), rng, /*zero=*/true);
    return m;
}

template <typename T>
int translator_encode(Graph<T>& g, const Tensor<T>& mel, TranslatorModel<T>& m) {
    require(mel.cols() == static_cast<std::size_t>(m.signal.num_mels),
            "translator: mel width mismatch");
    Tensor<T> norm = normalize_mel(mel, m.signal.log_floor());
    Tensor<T> padded = pad_mel_to_multiple(norm, m.block.downsample_factor(), -1.0);
    int h = conv_downsample(g, g.input(std::move(padded)), m.params, "enc.conv", m.block);
    h = add_positional(g, h);
    return transformer_stack(g, h, m.params, "enc", m.block, false);
}

// Returns logits [len(input_tokens), vocab_total]. Embeddings are scaled by
// sqrt(D) so token identity and the positional encoding carry similar weight.
template <typename T>
int translator_decode(Graph<T>& g, const std::vector<int>& input_tokens, int memory,
                      TranslatorModel<T>& m) {
    for (int t : input_tokens)
        require(t >= 0 && t < m.vocab_total(), "translator: token out of vocabulary");
    int x = g.gather_rows(g.leaf(m.params.get("dec.embed")), input_tokens);
    x = g.scale(x, static_cast<T>(std::sqrt(static_cast<double>(m.block.hidden_size))));
    x = add_positional(g, x);
    x = transformer_stack(g, x, m.params, "dec", m.block, true, memory);
    return linear(g, x, m.params, "dec.out");
}

// Teacher-forced mean-per-token negative log-likelihood of z given x,
// including the EOS step.
template <typename T>
int translator_nll_node(Graph<T>& g, const Tensor<T>& mel, const std::vector<int>& z,
                        TranslatorModel<T>& m) {
    require(!z.empty(), "translator_nll: empty target");
    for (int t : z) require(t >= 0 && t < m.vocab_k, "translator_nll: token out of vocabulary");
    int memory = translator_encode(g, mel, m);
    std::vector<int> input{m.bos()};
    input.insert(input.end(), z.begin(), z.end());
    std::vector<int> targets(z.begin(), z.end());
    targets.push_back(m.eos());
    int logits = translator_decode(g, input, memory, m);
    return g.cross_entropy(logits, targets);
}

template <typename T>
double translator_nll(TranslatorModel<T>& m, const Tensor<T>& mel, const std::vector<int>& z) {
    Graph<T> g;
    return static_cast<double>(g.scalar(translator_nll_node(g, mel, z, m)));
}

struct TranslatorTrainConfig {
    long steps = 3000;
    long batch_frames = 2400;
    std::uint64_t seed = 2;
    double lr_factor = 1.0;
    int warmup_steps = 4000;
    long checkpoint_interval = 1000;
    long eval_interval = 250;
};

struct TranslatorTrainHooks {
    std::ostream* metrics = nullptr;
    std::function<void(long step)> on_checkpoint;
};

struct TranslationPair {
    std::string id;
    Tensor<float> source_mel;
    std::vector<int> target_tokens;
};

template <typename T>
void train_translator(TranslatorModel<T>& model, const std::vector<TranslationPair>& train_pairs,
                      const std::vector<TranslationPair>& dev_pairs,
                      const TranslatorTrainConfig& cfg, const TranslatorTrainHooks& hooks = {},
                      long start_step = 0, AdamOptimizer<T>* resume_opt = nullptr) {
    require(!train_pairs.empty(), "train_translator: empty corpus");
    AdamOptimizer<T> local_opt;
    AdamOptimizer<T>* opt = resume_opt ? resume_opt : &local_opt;
    if (!resume_opt) {
        opt->lr_factor = static_cast<T>(cfg.lr_factor);
        opt->warmup_steps = cfg.warmup_steps;
        opt->hidden_size = model.block.hidden_size;
        opt->step_count = start_step;
    }
    IndexStream stream(train_pairs.size(), cfg.seed * 2654435761u + 37);
    for (long step = 0; step < start_step; ++step)
        fill_batch(stream, cfg.batch_frames,
                   [&](std::size_t i) { return train_pairs[i].source_mel.rows(); });

    for (long step = start_step; step < cfg.steps; ++step) {
        auto batch = fill_batch(stream, cfg.batch_frames, [&](std::size_t i) {
            return train_pairs[i].source_mel.rows();
        });
        Graph<T> g(true, cfg.seed * 1000003u + static_cast<std::uint64_t>(step));
        std::vector<int> terms;
        for (auto i : batch) {
            Tensor<T> mel = train_pairs[i].source_mel.template cast<T>();
            terms.push_back(translator_nll_node(g, mel, train_pairs[i].target_tokens, model));
        }
        int loss = g.scale(g.sum_scalars(terms), T(1) / static_cast<T>(terms.size()));
        double loss_val = static_cast<double>(g.scalar(loss));
        model.params.zero_grads();
        g.backward(loss);
        opt->step(model.params);

        bool last = step + 1 == cfg.steps;
        if (hooks.metrics) {
            *hooks.metrics << "step=" << (step + 1) << " nll=" << loss_val;
            if ((step + 1) % std::max<long>(cfg.eval_interval, 1) == 0 || last) {
                double dev_nll = 0.0;
                for (const auto& p : dev_pairs) {
                    Tensor<T> mel = p.source_mel.template cast<T>();
                    dev_nll += translator_nll(model, mel, p.target_tokens);
                }
                if (!dev_pairs.empty()) dev_nll /= static_cast<double>(dev_pairs.size());
                *hooks.metrics << " dev_nll=" << dev_nll;
                hooks.metrics->flush();
            }
            *hooks.metrics << "\n";
        }
        if (hooks.on_checkpoint && cfg.checkpoint_interval > 0 &&
            ((step + 1) % cfg.checkpoint_interval == 0 || last))
            hooks.on_checkpoint(step + 1);
    }
}

namespace beam_detail {

struct Hypothesis {
    std::vector<int> tokens;
    double log_prob = 0.0;
};

inline double hyp_score(const Hypothesis& h, double alpha) {
    return h.log_prob / length_penalty_value(h.tokens.size(), alpha);
}

}  // namespace beam_detail

// Beam search under score = logP / lp(|Y|). One symbol per step from the
// phonetic vocabulary plus EOS; BOS/PAD are never expanded. Hypotheses still
// alive at the length cap are scored without an EOS factor.
template <typename T>
TokenSequence beam_translate(const Tensor<T>& mel, TranslatorModel<T>& model,
                             const BeamConfig& beam) {
    beam.validate();
    using beam_detail::Hypothesis;

    Graph<T> enc_graph;
    int memory_node = translator_encode(enc_graph, mel, model);
    Tensor<T> memory = enc_graph.value(memory_node);
    std::size_t max_len = static_cast<std::size_t>(
        std::ceil(beam.max_len_factor * static_cast<double>(memory.rows())));
    max_len = std::max<std::size_t>(max_len, 1);

    auto last_log_probs = [&](const Hypothesis& h) {
        Graph<T> g;
        int mem = g.input(memory);
        std::vector<int> input{model.bos()};
        input.insert(input.end(), h.tokens.begin(), h.tokens.end());
        int logits = translator_decode(g, input, mem, model);
        const Tensor<T>& v = g.value(logits);
        std::size_t row = v.rows() - 1;
        double mx = -1e300;
        for (int c = 0; c < model.vocab_total(); ++c)
            mx = std::max(mx, static_cast<double>(v.at(row, c)));
        double sum = 0;
        for (int c = 0; c < model.vocab_total(); ++c)
            sum += std::exp(static_cast<double>(v.at(row, c)) - mx);
        double logz = mx + std::log(sum);
        std::vector<double> lp(model.vocab_total());
        for (int c = 0; c < model.vocab_total(); ++c)
            lp[c] = static_cast<double>(v.at(row, c)) - logz;
        return lp;
    };

    std::vector<Hypothesis> live{Hypothesis{}};
    std::vector<Hypothesis> finished;
    for (std::size_t step = 0; step < max_len && !live.empty(); ++step) {
        std::vector<Hypothesis> candidates;
        for (const auto& h : live) {
            auto lp = last_log_probs(h);
            for (int v = 0; v < model.vocab_k; ++v) {
                Hypothesis next = h;
                next.tokens.push_back(v);
                next.log_prob += lp[v];
                candidates.push_back(std::move(next));
            }
            Hypothesis done = h;
            done.log_prob += lp[model.eos()];
            finished.push_back(std::move(done));
        }
        std::stable_sort(candidates.begin(), candidates.end(),
                         [](const Hypothesis& a, const Hypothesis& b) {
                             return a.log_prob > b.log_prob;
                         });
        if (candidates.size() > static_cast<std::size_t>(beam.beam_size))
            candidates.resize(static_cast<std::size_t>(beam.beam_size));
        live = std::move(candidates);
    }
    for (auto& h : live) finished.push_back(std::move(h));

    require(!finished.empty(), "beam_translate: no hypotheses");
    std::size_t best = 0;
    double best_score = beam_detail::hyp_score(finished[0], beam.length_penalty);
    for (std::size_t i = 1; i < finished.size(); ++i) {
        double s = beam_detail::hyp_score(finished[i], beam.length_penalty);
        if (s > best_score) {
            best_score = s;
            best = i;
        }
    }
    TokenSequence seq;
    seq.tokens = finished[best].tokens;
    seq.source_length_frames = mel.rows();
    return seq;
}

}  // namespace pvs
