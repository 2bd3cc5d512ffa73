#pragma once

#include <functional>
#include <type_traits>
#include <optional>
#include <ostream>

#include "corpus.hpp"
#include "ctc.hpp"
#include "evalkit.hpp"
#include "nn.hpp"
#include "quantizer.hpp"
#include "signal.hpp"

namespace pvs {

template <typename T>
struct XlVaeModel {
    ParamStore<T> params;
    Codebook codebook;
    BlockConfig block;
    SignalConfig signal;

    int embed_dim() const { return block.hidden_size; }
    Tensor<T>& embeddings() { return params.get("codebook.e").value; }
    const Tensor<T>& embeddings() const { return params.get("codebook.e").value; }
};

struct XlVaeTrainConfig {
    double lambda = 0.01;
    long steps = 2000;
    long batch_frames = 2400;  // per branch; written and unwritten get equal budgets
    std::uint64_t seed = 1;
    bool straight_through = true;
    long checkpoint_interval = 500;
    long eval_interval = 250;
    double lr_factor = 1.0;
    int warmup_steps = 4000;

    void validate() const {
        require(lambda >= 0.0, "xlvae config: lambda must be >= 0");
        require(steps >= 0, "xlvae config: steps must be >= 0");
        require(batch_frames > 0, "xlvae config: batch_frames must be positive");
    }
};

template <typename T>
XlVaeModel<T> init_xlvae(const BlockConfig& block, const SignalConfig& signal,
                         const Codebook& codebook, std::uint64_t seed) {
    block.validate();
    signal.validate();
    XlVaeModel<T> m;
    m.block = block;
    m.signal = signal;
    m.codebook = codebook;
    std::mt19937_64 rng(seed);
    init_conv_stack_params(m.params, "conv", static_cast<std::size_t>(signal.num_mels), block, rng);
    init_transformer_stack_params(m.params, "enc", block, false, rng);
    auto& e = m.params.create("codebook.e", static_cast<std::size_t>(codebook.total_rows()),
                              static_cast<std::size_t>(block.hidden_size));
    fill_uniform(e.value, rng, 0.1);
    init_transpose_conv_stack_params(m.params, "up", static_cast<std::size_t>(block.hidden_size),
                                     block, rng);
    init_transformer_stack_params(m.params, "inv", block, false, rng);
    // zero-init output projection: the initial reconstruction is silence
    init_linear_params(m.params, "inv.out", static_cast<std::size_t>(block.hidden_size),
                       static_cast<std::size_t>(signal.num_mels), rng, /*zero=*/true);
    return m;
}

// Right-pad the mel to a whole number of downsampling windows with log-floor
// frames. Callers crop reconstructions back to the original length.
template <typename T>
Tensor<T> pad_mel_to_multiple(const Tensor<T>& mel, int factor, double log_floor) {
    std::size_t l = mel.rows();
    std::size_t padded = ((l + factor - 1) / factor) * factor;
    if (padded == l) return mel;
    Tensor<T> out(padded, mel.cols(), static_cast<T>(log_floor));
    for (std::size_t r = 0; r < l; ++r)
        for (std::size_t c = 0; c < mel.cols(); ++c) out.at(r, c) = mel.at(r, c);
    return out;
}

// Models consume and predict log-mels under a fixed affine map taking
// [log_floor, 0] to [-1, 1]; silence sits at -1. Feature files stay raw.
template <typename T>
Tensor<T> normalize_mel(const Tensor<T>& mel, double log_floor) {
    Tensor<T> out = mel;
    T scale = static_cast<T>(-2.0 / log_floor);
    for (auto& v : out.data) v = v * scale + T(1);
    return out;
}

template <typename T>
Tensor<T> denormalize_mel(const Tensor<T>& mel, double log_floor) {
    Tensor<T> out = mel;
    T scale = static_cast<T>(-log_floor / 2.0);
    for (auto& v : out.data) v = (v - T(1)) * scale;
    return out;
}

// Mel [l, num_mels] -> hidden [ceil(l/c), D].
template <typename T>
int converter_forward(Graph<T>& g, const Tensor<T>& mel, XlVaeModel<T>& m) {
    require(mel.cols() == static_cast<std::size_t>(m.signal.num_mels),
            "converter: mel width mismatch");
    require(mel.rows() >= 1, "converter: empty mel");
    Tensor<T> norm = normalize_mel(mel, m.signal.log_floor());
    Tensor<T> padded = pad_mel_to_multiple(norm, m.block.downsample_factor(), -1.0);
    int h = conv_downsample(g, g.input(std::move(padded)), m.params, "conv", m.block);
    h = add_positional(g, h);
    return transformer_stack(g, h, m.params, "enc", m.block, false);
}

// Token embeddings [m, D] -> mel [m*c, num_mels], in normalized mel space.
template <typename T>
int inverter_forward(Graph<T>& g, int e_z, XlVaeModel<T>& m) {
    require(g.value(e_z).cols() == static_cast<std::size_t>(m.embed_dim()),
            "inverter: input width mismatch");
    int h = conv_upsample(g, e_z, m.params, "up", m.block);
    h = add_positional(g, h);
    h = transformer_stack(g, h, m.params, "inv", m.block, false);
    return linear(g, h, m.params, "inv.out");
}

struct XlVaeStepResult {
    double loss_total = 0.0;
    double loss_inv = 0.0;
    double loss_xl = 0.0;
    int skipped_utterances = 0;  // written items whose CTC target is unreachable
};

// One joint objective evaluation: loss_total = loss_inv + lambda * loss_xl.
// The unwritten branch runs converter -> quantize -> embed -> inverter with
// the reconstruction loss; the written branch multiplies converter hiddens
// with the codebook (all rows, blank included) and applies the CTC loss.
// When `opt` is non-null one optimizer update is applied.
template <typename T>
XlVaeStepResult xlvae_step(const std::vector<const Tensor<T>*>& unwritten_mels,
                           const std::vector<std::pair<const Tensor<T>*, const std::vector<int>*>>& written,
                           XlVaeModel<T>& model, const XlVaeTrainConfig& cfg,
                           std::type_identity_t<AdamOptimizer<T>*> opt, std::uint64_t dropout_seed) {
    cfg.validate();
    require(!unwritten_mels.empty(), "xlvae_step: empty unwritten batch");
    Graph<T> g(opt != nullptr, dropout_seed);
    XlVaeStepResult res;

    int blank = model.codebook.blank_index;
    int c = model.block.downsample_factor();

    std::vector<int> inv_terms;
    for (const Tensor<T>* mel : unwritten_mels) {
        int hidden = converter_forward(g, *mel, model);
        std::vector<int> tokens =
            quantize_hidden(g.value(hidden), model.embeddings(), blank);
        int e_leaf = g.leaf(model.params.get("codebook.e"));
        int ez = g.vq_lookup(hidden, e_leaf, tokens, cfg.straight_through);
        int recon = inverter_forward(g, ez, model);
        int cropped = g.crop_rows(recon, mel->rows());
        inv_terms.push_back(g.mse(cropped, normalize_mel(*mel, model.signal.log_floor())));
    }
    int loss_inv = g.scale(g.sum_scalars(inv_terms), T(1) / static_cast<T>(inv_terms.size()));

    std::vector<int> xl_terms;
    for (const auto& [mel, phonemes] : written) {
        std::size_t t_frames = (mel->rows() + c - 1) / c;
        if (t_frames < ctc_detail::min_frames(*phonemes)) {
            ++res.skipped_utterances;
            continue;
        }
        int hidden = converter_forward(g, *mel, model);
        int e_leaf = g.leaf(model.params.get("codebook.e"));
        int logits = g.matmul_nt(hidden, e_leaf);
        xl_terms.push_back(ctc_loss_node(g, logits, *phonemes, blank));
    }
    int loss_xl;
    if (xl_terms.empty()) {
        loss_xl = g.input(Tensor<T>(1, 1));  // nothing usable in the written batch
    } else {
        loss_xl = g.scale(g.sum_scalars(xl_terms), T(1) / static_cast<T>(xl_terms.size()));
    }

    int loss_total = g.add_scaled(loss_inv, loss_xl, static_cast<T>(cfg.lambda));

    res.loss_total = static_cast<double>(g.scalar(loss_total));
    res.loss_inv = static_cast<double>(g.scalar(loss_inv));
    res.loss_xl = static_cast<double>(g.scalar(loss_xl));
    if (opt) {
        model.params.zero_grads();
        g.backward(loss_total);
        opt->step(model.params);
    }
    return res;
}

// Greedy CTC phoneme error rate of the converter on labeled utterances.
template <typename T>
double xlvae_greedy_per(XlVaeModel<T>& model, const std::vector<Utterance>& utts) {
    std::vector<std::vector<int>> hyps, refs;
    for (const auto& u : utts) {
        Graph<T> g;
        Tensor<T> mel = u.mel.template cast<T>();
        int hidden = converter_forward(g, mel, model);
        int logits = g.matmul_nt(hidden, g.leaf(model.params.get("codebook.e")));
        hyps.push_back(ctc_greedy_decode(g.value(logits), model.codebook.blank_index));
        refs.push_back(u.phonemes);
    }
    return corpus_per(hyps, refs);
}

// Mean CTC loss on labeled utterances (validation metric); unreachable
// targets are skipped.
template <typename T>
double xlvae_ctc_loss(XlVaeModel<T>& model, const std::vector<Utterance>& utts) {
    double total = 0.0;
    std::size_t n = 0;
    int c = model.block.downsample_factor();
    for (const auto& u : utts) {
        std::size_t t_frames = (u.mel.rows() + c - 1) / c;
        if (t_frames < ctc_detail::min_frames(u.phonemes)) continue;
        Graph<T> g;
        Tensor<T> mel = u.mel.template cast<T>();
        int hidden = converter_forward(g, mel, model);
        int logits = g.matmul_nt(hidden, g.leaf(model.params.get("codebook.e")));
        total += ctc_loss_value(g.value(logits), u.phonemes, model.codebook.blank_index);
        ++n;
    }
    return n ? total / static_cast<double>(n) : 0.0;
}

struct XlVaeTrainHooks {
    std::ostream* metrics = nullptr;
    std::function<void(long step)> on_checkpoint;
};

// Joint training over an unwritten corpus and a written corpus with strict
// 50/50 frame budgets per step. Smaller corpora are effectively upsampled by
// cycling seeded reshuffles.
template <typename T>
void train_xlvae(XlVaeModel<T>& model, const std::vector<Utterance>& unwritten_train,
                 const std::vector<Utterance>& written_train,
                 const std::vector<Utterance>& written_dev, const XlVaeTrainConfig& cfg,
                 const XlVaeTrainHooks& hooks = {}, long start_step = 0,
                 AdamOptimizer<T>* resume_opt = nullptr) {
    cfg.validate();
    require(!unwritten_train.empty(), "train_xlvae: empty unwritten corpus");
    require(!written_train.empty(), "train_xlvae: empty written corpus");

    AdamOptimizer<T> local_opt;
    AdamOptimizer<T>* opt = resume_opt ? resume_opt : &local_opt;
    if (!resume_opt) {
        opt->lr_factor = static_cast<T>(cfg.lr_factor);
        opt->warmup_steps = cfg.warmup_steps;
        opt->hidden_size = model.block.hidden_size;
        opt->step_count = start_step;
    }

    IndexStream unwritten_stream(unwritten_train.size(), cfg.seed * 2654435761u + 11);
    IndexStream written_stream(written_train.size(), cfg.seed * 2654435761u + 23);
    long budget = cfg.batch_frames / 2;

    // replay the deterministic batch streams up to the resume point
    for (long step = 0; step < start_step; ++step) {
        fill_batch(unwritten_stream, budget,
                   [&](std::size_t i) { return unwritten_train[i].mel.rows(); });
        fill_batch(written_stream, budget,
                   [&](std::size_t i) { return written_train[i].mel.rows(); });
    }

    long skipped_total = 0;
    for (long step = start_step; step < cfg.steps; ++step) {
        auto u_batch = fill_batch(unwritten_stream, budget, [&](std::size_t i) {
            return unwritten_train[i].mel.rows();
        });
        auto w_batch = fill_batch(written_stream, budget, [&](std::size_t i) {
            return written_train[i].mel.rows();
        });
        std::vector<const Tensor<T>*> u_mels;
        std::vector<Tensor<T>> cast_storage;
        cast_storage.reserve(u_batch.size() + w_batch.size());
        for (auto i : u_batch) {
            cast_storage.push_back(unwritten_train[i].mel.template cast<T>());
            u_mels.push_back(&cast_storage.back());
        }
        std::vector<std::pair<const Tensor<T>*, const std::vector<int>*>> w_pairs;
        for (auto i : w_batch) {
            cast_storage.push_back(written_train[i].mel.template cast<T>());
            w_pairs.emplace_back(&cast_storage.back(), &written_train[i].phonemes);
        }
        XlVaeStepResult res = xlvae_step(u_mels, w_pairs, model, cfg, opt,
                                         cfg.seed * 1000003u + static_cast<std::uint64_t>(step));
        skipped_total += res.skipped_utterances;
        if (res.skipped_utterances > 0 && hooks.metrics)
            *hooks.metrics << "step=" << (step + 1)
                           << " warn=skipped_unreachable_ctc_targets count="
                           << res.skipped_utterances << "\n";

        bool last = step + 1 == cfg.steps;
        if (hooks.metrics &&
            ((step + 1) % std::max<long>(cfg.eval_interval, 1) == 0 || last)) {
            double dev_ctc = written_dev.empty() ? 0.0 : xlvae_ctc_loss(model, written_dev);
            double dev_per = written_dev.empty() ? 0.0 : xlvae_greedy_per(model, written_dev);
            *hooks.metrics << "step=" << (step + 1) << " loss_total=" << res.loss_total
                           << " loss_inv=" << res.loss_inv << " loss_xl=" << res.loss_xl
                           << " dev_ctc=" << dev_ctc << " dev_per=" << dev_per << "\n";
            hooks.metrics->flush();
        }
        if (hooks.on_checkpoint && cfg.checkpoint_interval > 0 &&
            ((step + 1) % cfg.checkpoint_interval == 0 || last))
            hooks.on_checkpoint(step + 1);
    }
}

// Algorithm step: discretize a speech corpus with a trained model. Tokens are
// kept as emitted (repeats and all).
template <typename T>
std::vector<TokenSequence> convert_corpus(const std::vector<Utterance>& utts,
                                          XlVaeModel<T>& model) {
    std::vector<TokenSequence> out;
    out.reserve(utts.size());
    for (const auto& u : utts) {
        Graph<T> g;
        Tensor<T> mel = u.mel.template cast<T>();
        int hidden = converter_forward(g, mel, model);
        TokenSequence seq;
        seq.tokens = quantize_hidden(g.value(hidden), model.embeddings(), model.codebook.blank_index);
        seq.source_length_frames = u.mel.rows();
        out.push_back(std::move(seq));
    }
    return out;
}

}  // namespace pvs
