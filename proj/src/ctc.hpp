#pragma once

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "graph.hpp"
#include "tensor.hpp"

namespace pvs {

// Non-blank label index sequence.
struct PhonemeSequence {
    std::vector<int> ids;
    std::string lang;
};

struct CtcError : std::runtime_error {
    explicit CtcError(const std::string& m) : std::runtime_error(m) {}
};

namespace ctc_detail {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double logsumexp2(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

inline double logsumexp3(double a, double b, double c) { return logsumexp2(logsumexp2(a, b), c); }

// Blank-interleaved extended label sequence: [blank, t0, blank, t1, ..., blank].
inline std::vector<int> extend_labels(const std::vector<int>& target, int blank) {
    std::vector<int> ext(2 * target.size() + 1, blank);
    for (std::size_t i = 0; i < target.size(); ++i) ext[2 * i + 1] = target[i];
    return ext;
}

inline std::size_t min_frames(const std::vector<int>& target) {
    std::size_t repeats = 0;
    for (std::size_t i = 1; i < target.size(); ++i)
        if (target[i] == target[i - 1]) ++repeats;
    return target.size() + repeats;
}

// Row-wise log-softmax in double precision.
template <typename T>
std::vector<std::vector<double>> log_softmax(const Tensor<T>& logits) {
    std::size_t m = logits.rows(), n = logits.cols();
    std::vector<std::vector<double>> lp(m, std::vector<double>(n));
    for (std::size_t r = 0; r < m; ++r) {
        double mx = static_cast<double>(logits.at(r, 0));
        for (std::size_t c = 1; c < n; ++c) mx = std::max(mx, static_cast<double>(logits.at(r, c)));
        double sum = 0;
        for (std::size_t c = 0; c < n; ++c) sum += std::exp(static_cast<double>(logits.at(r, c)) - mx);
        double logz = mx + std::log(sum);
        for (std::size_t c = 0; c < n; ++c) lp[r][c] = static_cast<double>(logits.at(r, c)) - logz;
    }
    return lp;
}

struct ForwardResult {
    double loss;                                // -log P(target | logits)
    std::vector<std::vector<double>> alpha;     // [T][S], includes emission at t
    std::vector<std::vector<double>> log_probs; // [T][K+1]
    std::vector<int> ext;
    double log_total;
};

template <typename T>
ForwardResult forward(const Tensor<T>& logits, const std::vector<int>& target, int blank) {
    std::size_t frames = logits.rows();
    std::size_t classes = logits.cols();
    require(frames >= 1, "ctc: empty logits");
    for (int t : target) {
        require(t >= 0 && static_cast<std::size_t>(t) < classes, "ctc: target out of range");
        if (t == blank) throw CtcError("ctc: target contains blank");
    }
    if (frames < min_frames(target))
        throw CtcError("ctc: target unreachable in " + std::to_string(frames) + " frames");

    ForwardResult res;
    res.log_probs = log_softmax(logits);
    res.ext = extend_labels(target, blank);
    std::size_t S = res.ext.size();
    res.alpha.assign(frames, std::vector<double>(S, kNegInf));
    res.alpha[0][0] = res.log_probs[0][res.ext[0]];
    if (S > 1) res.alpha[0][1] = res.log_probs[0][res.ext[1]];
    for (std::size_t t = 1; t < frames; ++t)
        for (std::size_t s = 0; s < S; ++s) {
            double best = res.alpha[t - 1][s];
            if (s >= 1) best = logsumexp2(best, res.alpha[t - 1][s - 1]);
            if (s >= 2 && res.ext[s] != blank && res.ext[s] != res.ext[s - 2])
                best = logsumexp2(best, res.alpha[t - 1][s - 2]);
            if (best == kNegInf) continue;
            res.alpha[t][s] = best + res.log_probs[t][res.ext[s]];
        }
    double total = res.alpha[frames - 1][S - 1];
    if (S > 1) total = logsumexp2(total, res.alpha[frames - 1][S - 2]);
    if (total == kNegInf) throw CtcError("ctc: zero path probability");
    res.log_total = total;
    res.loss = -total;
    return res;
}

// Gradient of -log P w.r.t. the logits, via forward-backward posteriors.
template <typename T>
Tensor<T> logits_gradient(const ForwardResult& fwd, std::size_t classes, int blank) {
    std::size_t frames = fwd.alpha.size();
    std::size_t S = fwd.ext.size();
    std::vector<std::vector<double>> beta(frames, std::vector<double>(S, kNegInf));
    beta[frames - 1][S - 1] = 0.0;
    if (S > 1) beta[frames - 1][S - 2] = 0.0;
    for (std::size_t t = frames - 1; t-- > 0;)
        for (std::size_t s = 0; s < S; ++s) {
            double acc = beta[t + 1][s] + fwd.log_probs[t + 1][fwd.ext[s]];
            if (s + 1 < S)
                acc = logsumexp2(acc, beta[t + 1][s + 1] + fwd.log_probs[t + 1][fwd.ext[s + 1]]);
            if (s + 2 < S && fwd.ext[s + 2] != blank && fwd.ext[s + 2] != fwd.ext[s])
                acc = logsumexp2(acc, beta[t + 1][s + 2] + fwd.log_probs[t + 1][fwd.ext[s + 2]]);
            beta[t][s] = acc;
        }
    Tensor<T> grad(frames, classes);
    for (std::size_t t = 0; t < frames; ++t) {
        std::vector<double> occ(classes, kNegInf);
        for (std::size_t s = 0; s < S; ++s) {
            double gamma = fwd.alpha[t][s] + beta[t][s];
            if (gamma == kNegInf) continue;
            occ[fwd.ext[s]] = logsumexp2(occ[fwd.ext[s]], gamma);
        }
        for (std::size_t k = 0; k < classes; ++k) {
            double posterior = occ[k] == kNegInf ? 0.0 : std::exp(occ[k] - fwd.log_total);
            grad.at(t, k) = static_cast<T>(std::exp(fwd.log_probs[t][k]) - posterior);
        }
    }
    return grad;
}

}  // namespace ctc_detail

// Loss value only (no tape).
template <typename T>
double ctc_loss_value(const Tensor<T>& logits, const std::vector<int>& target, int blank) {
    return ctc_detail::forward(logits, target, blank).loss;
}

// Tape node: scalar CTC loss over one utterance with analytic backward.
template <typename T>
int ctc_loss_node(Graph<T>& g, int logits, const std::vector<int>& target, int blank) {
    auto fwd = ctc_detail::forward(g.value(logits), target, blank);
    std::size_t classes = g.value(logits).cols();
    auto grad = std::make_shared<Tensor<T>>(ctc_detail::logits_gradient<T>(fwd, classes, blank));
    Tensor<T> out(1, 1);
    out.data[0] = static_cast<T>(fwd.loss);
    return g.make(std::move(out), g.needs_grad(logits), [logits, grad](Graph<T>& gr, int self) {
        if (!gr.needs_grad(logits)) return;
        T go = gr.grad(self).data[0];
        Tensor<T>& gl = gr.grad(logits);
        for (std::size_t i = 0; i < gl.data.size(); ++i) gl.data[i] += go * grad->data[i];
    });
}

// Exhaustive path enumeration oracle. Collapse rule: remove consecutive
// repeats, then drop blanks.
template <typename T>
double ctc_brute_force(const Tensor<T>& logits, const std::vector<int>& target, int blank) {
    std::size_t frames = logits.rows();
    std::size_t classes = logits.cols();
    double paths = std::pow(static_cast<double>(classes), static_cast<double>(frames));
    require(paths <= 1e6, "ctc_brute_force: instance too large");
    auto lp = ctc_detail::log_softmax(logits);
    std::vector<std::size_t> path(frames, 0);
    double total = 0.0;
    while (true) {
        std::vector<int> collapsed;
        for (std::size_t t = 0; t < frames; ++t) {
            int c = static_cast<int>(path[t]);
            if (t > 0 && c == static_cast<int>(path[t - 1])) continue;
            if (c == blank) continue;
            collapsed.push_back(c);
        }
        if (collapsed == target) {
            double logp = 0;
            for (std::size_t t = 0; t < frames; ++t) logp += lp[t][path[t]];
            total += std::exp(logp);
        }
        std::size_t i = 0;
        while (i < frames && ++path[i] == classes) path[i++] = 0;
        if (i == frames) break;
    }
    if (total <= 0.0) throw CtcError("ctc_brute_force: zero probability");
    return -std::log(total);
}

// Per-frame argmax, collapse repeats, drop blanks. Ties break to the lowest
// class index.
template <typename T>
std::vector<int> ctc_greedy_decode(const Tensor<T>& logits, int blank) {
    std::vector<int> out;
    int prev = -1;
    for (std::size_t t = 0; t < logits.rows(); ++t) {
        int best = 0;
        for (std::size_t c = 1; c < logits.cols(); ++c)
            if (logits.at(t, c) > logits.at(t, best)) best = static_cast<int>(c);
        if (best != prev && best != blank) out.push_back(best);
        prev = best;
    }
    return out;
}

}  // namespace pvs
