#pragma once

#include <array>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <vector>

#include "tensor.hpp"

namespace pvs {

// Named trainable tensor plus its gradient accumulator and Adam state.
template <typename T>
struct Parameter {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;
    Tensor<T> adam_m;
    Tensor<T> adam_v;

    void ensure_grad() {
        if (grad.data.size() != value.data.size()) {
            grad = value;
            grad.zero();
        }
    }
};

// Reverse-mode tape. Nodes are appended in construction order and walked in
// reverse on backward(). Values live on the tape; gradients of parameter
// leaves are accumulated into Parameter::grad.
template <typename T>
class Graph {
public:
    using BackwardFn = std::function<void(Graph&, int)>;

    struct Node {
        Tensor<T> value;
        Tensor<T> grad;
        BackwardFn backward;
        Parameter<T>* param = nullptr;
        bool needs_grad = false;
    };

    explicit Graph(bool training = false, std::uint64_t dropout_seed = 0)
        : training_(training), rng_(dropout_seed) {}

    bool training() const { return training_; }

    const Tensor<T>& value(int id) const { return nodes_[id].value; }
    Tensor<T>& grad(int id) {
        Node& n = nodes_[id];
        if (n.grad.data.size() != n.value.data.size()) {
            n.grad = n.value;
            n.grad.zero();
        }
        return n.grad;
    }
    bool needs_grad(int id) const { return nodes_[id].needs_grad; }
    T scalar(int id) const { return nodes_[id].value.data.at(0); }

    // Leaf bound to a trainable parameter.
    int leaf(Parameter<T>& p) {
        Node n;
        n.value = p.value;
        n.param = &p;
        n.needs_grad = true;
        nodes_.push_back(std::move(n));
        return static_cast<int>(nodes_.size()) - 1;
    }

    // Untracked constant input.
    int input(Tensor<T> v) {
        Node n;
        n.value = std::move(v);
        nodes_.push_back(std::move(n));
        return static_cast<int>(nodes_.size()) - 1;
    }

    int make(Tensor<T> v, bool needs, BackwardFn fn) {
        Node n;
        n.value = std::move(v);
        n.needs_grad = needs;
        n.backward = needs ? std::move(fn) : BackwardFn();
        nodes_.push_back(std::move(n));
        return static_cast<int>(nodes_.size()) - 1;
    }

    // ---- elementwise / structural ops ----

    int add(int a, int b) {
        const auto& va = value(a);
        const auto& vb = value(b);
        require(va.same_shape(vb), "add: shape mismatch");
        Tensor<T> out = va;
        emap(out) += emap(vb);
        bool needs = needs_grad(a) || needs_grad(b);
        return make(std::move(out), needs, [a, b](Graph& g, int self) {
            const Tensor<T>& go = g.grad(self);
            if (g.needs_grad(a)) emap(g.grad(a)) += emap(go);
            if (g.needs_grad(b)) emap(g.grad(b)) += emap(go);
        });
    }

    // a [m,n] + bias [1,n] broadcast over rows
    int add_rowvec(int a, int bias) {
        const auto& va = value(a);
        const auto& vb = value(bias);
        require(vb.rows() == 1 && vb.cols() == va.cols(), "add_rowvec: bias shape");
        Tensor<T> out = va;
        emap(out).rowwise() += emap(vb).row(0);
        bool needs = needs_grad(a) || needs_grad(bias);
        return make(std::move(out), needs, [a, bias](Graph& g, int self) {
            const Tensor<T>& go = g.grad(self);
            if (g.needs_grad(a)) emap(g.grad(a)) += emap(go);
            if (g.needs_grad(bias)) emap(g.grad(bias)).row(0) += emap(go).colwise().sum();
        });
    }

    int add_const(int a, const Tensor<T>& c) {
        const auto& va = value(a);
        require(va.same_shape(c), "add_const: shape mismatch");
        Tensor<T> out = va;
        emap(out) += emap(c);
        return make(std::move(out), needs_grad(a), [a](Graph& g, int self) {
            if (g.needs_grad(a)) emap(g.grad(a)) += emap(g.grad(self));
        });
    }

    int scale(int a, T s) {
        Tensor<T> out = value(a);
        emap(out) *= s;
        return make(std::move(out), needs_grad(a), [a, s](Graph& g, int self) {
            if (g.needs_grad(a)) emap(g.grad(a)) += s * emap(g.grad(self));
        });
    }

    // scalar: a + s * b
    int add_scaled(int a, int b, T s) {
        require(value(a).numel() == 1 && value(b).numel() == 1, "add_scaled: scalars only");
        Tensor<T> out(1, 1);
        out.data[0] = value(a).data[0] + s * value(b).data[0];
        bool needs = needs_grad(a) || needs_grad(b);
        return make(std::move(out), needs, [a, b, s](Graph& g, int self) {
            T go = g.grad(self).data[0];
            if (g.needs_grad(a)) g.grad(a).data[0] += go;
            if (g.needs_grad(b)) g.grad(b).data[0] += s * go;
        });
    }

    int relu(int a) {
        Tensor<T> out = value(a);
        for (auto& v : out.data) {
            T margin = v < T(0) ? -v : v;
            if (margin < relu_kink_margin_) relu_kink_margin_ = margin;
            v = v > T(0) ? v : T(0);
        }
        return make(std::move(out), needs_grad(a), [a](Graph& g, int self) {
            if (!g.needs_grad(a)) return;
            const Tensor<T>& x = g.value(a);
            const Tensor<T>& go = g.grad(self);
            Tensor<T>& ga = g.grad(a);
            for (std::size_t i = 0; i < x.data.size(); ++i)
                if (x.data[i] > T(0)) ga.data[i] += go.data[i];
        });
    }

    // Inverted dropout; identity when not training or rate == 0.
    int dropout(int a, T rate) {
        if (!training_ || rate <= T(0)) return a;
        const auto& va = value(a);
        auto mask = std::make_shared<std::vector<T>>(va.data.size());
        std::uniform_real_distribution<double> dist(0.0, 1.0);
        T keep = T(1) - rate;
        for (auto& m : *mask) m = dist(rng_) < static_cast<double>(rate) ? T(0) : T(1) / keep;
        Tensor<T> out = va;
        for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= (*mask)[i];
        return make(std::move(out), needs_grad(a), [a, mask](Graph& g, int self) {
            if (!g.needs_grad(a)) return;
            const Tensor<T>& go = g.grad(self);
            Tensor<T>& ga = g.grad(a);
            for (std::size_t i = 0; i < go.data.size(); ++i) ga.data[i] += go.data[i] * (*mask)[i];
        });
    }

    // ---- matrix products ----

    int matmul(int a, int b) {
        const auto& va = value(a);
        const auto& vb = value(b);
        require(va.cols() == vb.rows(), "matmul: inner dim mismatch");
        Tensor<T> out(va.rows(), vb.cols());
        emap(out).noalias() = emap(va) * emap(vb);
        bool needs = needs_grad(a) || needs_grad(b);
        return make(std::move(out), needs, [a, b](Graph& g, int self) {
            const Tensor<T>& go = g.grad(self);
            if (g.needs_grad(a)) emap(g.grad(a)).noalias() += emap(go) * emap(g.value(b)).transpose();
            if (g.needs_grad(b)) emap(g.grad(b)).noalias() += emap(g.value(a)).transpose() * emap(go);
        });
    }

    // C = A * B^T, with A [m,k], B [n,k]
    int matmul_nt(int a, int b) {
        const auto& va = value(a);
        const auto& vb = value(b);
        require(va.cols() == vb.cols(), "matmul_nt: inner dim mismatch");
        Tensor<T> out(va.rows(), vb.rows());
        emap(out).noalias() = emap(va) * emap(vb).transpose();
        bool needs = needs_grad(a) || needs_grad(b);
        return make(std::move(out), needs, [a, b](Graph& g, int self) {
            const Tensor<T>& go = g.grad(self);
            if (g.needs_grad(a)) emap(g.grad(a)).noalias() += emap(go) * emap(g.value(b));
            if (g.needs_grad(b)) emap(g.grad(b)).noalias() += emap(go).transpose() * emap(g.value(a));
        });
    }

    // ---- normalization / activations over rows ----

    int layer_norm(int x, int gain, int bias, T eps = T(1e-5)) {
        const auto& vx = value(x);
        std::size_t m = vx.rows(), n = vx.cols();
        require(value(gain).cols() == n && value(bias).cols() == n, "layer_norm: param shape");
        auto xhat = std::make_shared<Tensor<T>>(m, n);
        auto inv_std = std::make_shared<std::vector<T>>(m);
        Tensor<T> out(m, n);
        for (std::size_t r = 0; r < m; ++r) {
            T mean = 0, var = 0;
            for (std::size_t c = 0; c < n; ++c) mean += vx.at(r, c);
            mean /= static_cast<T>(n);
            for (std::size_t c = 0; c < n; ++c) {
                T d = vx.at(r, c) - mean;
                var += d * d;
            }
            var /= static_cast<T>(n);
            T istd = T(1) / std::sqrt(var + eps);
            (*inv_std)[r] = istd;
            for (std::size_t c = 0; c < n; ++c) {
                T h = (vx.at(r, c) - mean) * istd;
                xhat->at(r, c) = h;
                out.at(r, c) = h * value(gain).at(0, c) + value(bias).at(0, c);
            }
        }
        bool needs = needs_grad(x) || needs_grad(gain) || needs_grad(bias);
        return make(std::move(out), needs, [x, gain, bias, xhat, inv_std](Graph& g, int self) {
            const Tensor<T>& go = g.grad(self);
            std::size_t m = go.rows(), n = go.cols();
            if (g.needs_grad(gain)) {
                Tensor<T>& gg = g.grad(gain);
                for (std::size_t r = 0; r < m; ++r)
                    for (std::size_t c = 0; c < n; ++c) gg.at(0, c) += go.at(r, c) * xhat->at(r, c);
            }
            if (g.needs_grad(bias)) {
                Tensor<T>& gb = g.grad(bias);
                for (std::size_t r = 0; r < m; ++r)
                    for (std::size_t c = 0; c < n; ++c) gb.at(0, c) += go.at(r, c);
            }
            if (g.needs_grad(x)) {
                const Tensor<T>& vgain = g.value(gain);
                Tensor<T>& gx = g.grad(x);
                for (std::size_t r = 0; r < m; ++r) {
                    T istd = (*inv_std)[r];
                    T sum_dh = 0, sum_dh_h = 0;
                    for (std::size_t c = 0; c < n; ++c) {
                        T dh = go.at(r, c) * vgain.at(0, c);
                        sum_dh += dh;
                        sum_dh_h += dh * xhat->at(r, c);
                    }
                    T invn = T(1) / static_cast<T>(n);
                    for (std::size_t c = 0; c < n; ++c) {
                        T dh = go.at(r, c) * vgain.at(0, c);
                        gx.at(r, c) += istd * (dh - invn * sum_dh - xhat->at(r, c) * invn * sum_dh_h);
                    }
                }
            }
        });
    }

    int softmax_rows(int a) {
        const auto& va = value(a);
        std::size_t m = va.rows(), n = va.cols();
        Tensor<T> out(m, n);
        for (std::size_t r = 0; r < m; ++r) {
            T mx = va.at(r, 0);
            for (std::size_t c = 1; c < n; ++c) mx = std::max(mx, va.at(r, c));
            T sum = 0;
            for (std::size_t c = 0; c < n; ++c) {
                T e = std::exp(va.at(r, c) - mx);
                out.at(r, c) = e;
                sum += e;
            }
            for (std::size_t c = 0; c < n; ++c) out.at(r, c) /= sum;
        }
        return make(std::move(out), needs_grad(a), [a](Graph& g, int self) {
            if (!g.needs_grad(a)) return;
            const Tensor<T>& y = g.value(self);
            const Tensor<T>& go = g.grad(self);
            Tensor<T>& ga = g.grad(a);
            std::size_t m = y.rows(), n = y.cols();
            for (std::size_t r = 0; r < m; ++r) {
                T dot = 0;
                for (std::size_t c = 0; c < n; ++c) dot += go.at(r, c) * y.at(r, c);
                for (std::size_t c = 0; c < n; ++c)
                    ga.at(r, c) += y.at(r, c) * (go.at(r, c) - dot);
            }
        });
    }

    // ---- slicing (attention heads) ----

    int slice_cols(int a, std::size_t c0, std::size_t c1) {
        const auto& va = value(a);
        require(c0 < c1 && c1 <= va.cols(), "slice_cols: bad range");
        Tensor<T> out(va.rows(), c1 - c0);
        for (std::size_t r = 0; r < va.rows(); ++r)
            for (std::size_t c = c0; c < c1; ++c) out.at(r, c - c0) = va.at(r, c);
        return make(std::move(out), needs_grad(a), [a, c0, c1](Graph& g, int self) {
            if (!g.needs_grad(a)) return;
            const Tensor<T>& go = g.grad(self);
            Tensor<T>& ga = g.grad(a);
            for (std::size_t r = 0; r < go.rows(); ++r)
                for (std::size_t c = c0; c < c1; ++c) ga.at(r, c) += go.at(r, c - c0);
        });
    }

    int concat_cols(const std::vector<int>& parts) {
        require(!parts.empty(), "concat_cols: empty");
        std::size_t m = value(parts[0]).rows(), n = 0;
        bool needs = false;
        for (int p : parts) {
            require(value(p).rows() == m, "concat_cols: row mismatch");
            n += value(p).cols();
            needs = needs || needs_grad(p);
        }
        Tensor<T> out(m, n);
        std::size_t off = 0;
        for (int p : parts) {
            const auto& vp = value(p);
            for (std::size_t r = 0; r < m; ++r)
                for (std::size_t c = 0; c < vp.cols(); ++c) out.at(r, off + c) = vp.at(r, c);
            off += vp.cols();
        }
        auto parts_copy = std::make_shared<std::vector<int>>(parts);
        return make(std::move(out), needs, [parts_copy](Graph& g, int self) {
            const Tensor<T>& go = g.grad(self);
            std::size_t off = 0;
            for (int p : *parts_copy) {
                std::size_t w = g.value(p).cols();
                if (g.needs_grad(p)) {
                    Tensor<T>& gp = g.grad(p);
                    for (std::size_t r = 0; r < go.rows(); ++r)
                        for (std::size_t c = 0; c < w; ++c) gp.at(r, c) += go.at(r, off + c);
                }
                off += w;
            }
        });
    }

    // ---- lookups ----

    int gather_rows(int table, std::vector<int> idx) {
        const auto& vt = value(table);
        std::size_t d = vt.cols();
        for (int i : idx)
            require(i >= 0 && static_cast<std::size_t>(i) < vt.rows(), "gather_rows: index out of range");
        Tensor<T> out(idx.size(), d);
        for (std::size_t r = 0; r < idx.size(); ++r)
            for (std::size_t c = 0; c < d; ++c) out.at(r, c) = vt.at(idx[r], c);
        auto ids = std::make_shared<std::vector<int>>(std::move(idx));
        return make(std::move(out), needs_grad(table), [table, ids](Graph& g, int self) {
            if (!g.needs_grad(table)) return;
            const Tensor<T>& go = g.grad(self);
            Tensor<T>& gt = g.grad(table);
            for (std::size_t r = 0; r < ids->size(); ++r)
                for (std::size_t c = 0; c < go.cols(); ++c) gt.at((*ids)[r], c) += go.at(r, c);
        });
    }

    // Discrete-token bottleneck: value is the codebook rows for the given
    // tokens. The codebook always receives the scatter-added gradient; the
    // hidden input receives a copy of the upstream gradient only with the
    // straight-through rule on.
    int vq_lookup(int hidden, int codebook, std::vector<int> tokens, bool straight_through) {
        const auto& vc = value(codebook);
        require(value(hidden).rows() == tokens.size(), "vq_lookup: token count mismatch");
        require(value(hidden).cols() == vc.cols(), "vq_lookup: width mismatch");
        Tensor<T> out(tokens.size(), vc.cols());
        for (std::size_t r = 0; r < tokens.size(); ++r)
            for (std::size_t c = 0; c < vc.cols(); ++c) out.at(r, c) = vc.at(tokens[r], c);
        auto ids = std::make_shared<std::vector<int>>(std::move(tokens));
        bool needs = needs_grad(codebook) || (straight_through && needs_grad(hidden));
        return make(std::move(out), needs,
                    [hidden, codebook, ids, straight_through](Graph& g, int self) {
                        const Tensor<T>& go = g.grad(self);
                        if (g.needs_grad(codebook)) {
                            Tensor<T>& gc = g.grad(codebook);
                            for (std::size_t r = 0; r < ids->size(); ++r)
                                for (std::size_t c = 0; c < go.cols(); ++c)
                                    gc.at((*ids)[r], c) += go.at(r, c);
                        }
                        if (straight_through && g.needs_grad(hidden))
                            emap(g.grad(hidden)) += emap(go);
                    });
    }

    // ---- 1-D convolutions over (time x channels) ----
    // conv1d pads to a whole number of strides; output length = ceil(l / stride).
    // Weight layout [kernel * d_in, d_out].
    int conv1d(int x, int w, int b, int kernel, int stride) {
        const auto& vx = value(x);
        const auto& vw = value(w);
        std::size_t l = vx.rows(), d_in = vx.cols();
        require(vw.rows() == static_cast<std::size_t>(kernel) * d_in, "conv1d: weight shape");
        std::size_t d_out = vw.cols();
        std::size_t out_len = (l + stride - 1) / stride;
        int pad_left = (kernel - 1) / 2;
        auto cols = std::make_shared<Tensor<T>>(out_len, static_cast<std::size_t>(kernel) * d_in);
        for (std::size_t t = 0; t < out_len; ++t)
            for (int j = 0; j < kernel; ++j) {
                long src = static_cast<long>(t) * stride + j - pad_left;
                if (src < 0 || src >= static_cast<long>(l)) continue;
                for (std::size_t c = 0; c < d_in; ++c)
                    cols->at(t, static_cast<std::size_t>(j) * d_in + c) = vx.at(src, c);
            }
        Tensor<T> out(out_len, d_out);
        emap(out).noalias() = emap(*cols) * emap(vw);
        emap(out).rowwise() += emap(value(b)).row(0);
        bool needs = needs_grad(x) || needs_grad(w) || needs_grad(b);
        return make(std::move(out), needs,
                    [x, w, b, kernel, stride, pad_left, cols](Graph& g, int self) {
                        const Tensor<T>& go = g.grad(self);
                        if (g.needs_grad(b)) emap(g.grad(b)).row(0) += emap(go).colwise().sum();
                        if (g.needs_grad(w))
                            emap(g.grad(w)).noalias() += emap(*cols).transpose() * emap(go);
                        if (g.needs_grad(x)) {
                            const Tensor<T>& vw2 = g.value(w);
                            Tensor<T> dcols(cols->rows(), cols->cols());
                            emap(dcols).noalias() = emap(go) * emap(vw2).transpose();
                            Tensor<T>& gx = g.grad(x);
                            std::size_t l = gx.rows(), d_in = gx.cols();
                            for (std::size_t t = 0; t < dcols.rows(); ++t)
                                for (int j = 0; j < kernel; ++j) {
                                    long src = static_cast<long>(t) * stride + j - pad_left;
                                    if (src < 0 || src >= static_cast<long>(l)) continue;
                                    for (std::size_t c = 0; c < d_in; ++c)
                                        gx.at(src, c) +=
                                            dcols.at(t, static_cast<std::size_t>(j) * d_in + c);
                                }
                        }
                    });
    }

    // Transposed conv; output length is exactly rows(x) * stride.
    // Weight layout [d_in, kernel * d_out].
    int conv1d_transpose(int x, int w, int b, int kernel, int stride) {
        const auto& vx = value(x);
        const auto& vw = value(w);
        std::size_t m = vx.rows(), d_in = vx.cols();
        require(vw.rows() == d_in && vw.cols() % kernel == 0, "conv1d_transpose: weight shape");
        std::size_t d_out = vw.cols() / kernel;
        std::size_t out_len = m * static_cast<std::size_t>(stride);
        int crop_left = kernel > stride ? (kernel - stride) / 2 : 0;
        auto ycols = std::make_shared<Tensor<T>>(m, vw.cols());
        emap(*ycols).noalias() = emap(vx) * emap(vw);
        Tensor<T> out(out_len, d_out);
        emap(out).rowwise() = emap(value(b)).row(0);
        for (std::size_t t = 0; t < m; ++t)
            for (int j = 0; j < kernel; ++j) {
                long dst = static_cast<long>(t) * stride + j - crop_left;
                if (dst < 0 || dst >= static_cast<long>(out_len)) continue;
                for (std::size_t c = 0; c < d_out; ++c)
                    out.at(dst, c) += ycols->at(t, static_cast<std::size_t>(j) * d_out + c);
            }
        bool needs = needs_grad(x) || needs_grad(w) || needs_grad(b);
        return make(std::move(out), needs,
                    [x, w, b, kernel, stride, crop_left](Graph& g, int self) {
                        const Tensor<T>& go = g.grad(self);
                        if (g.needs_grad(b)) emap(g.grad(b)).row(0) += emap(go).colwise().sum();
                        const Tensor<T>& vx2 = g.value(x);
                        std::size_t m = vx2.rows();
                        std::size_t d_out = go.cols();
                        Tensor<T> dycols(m, static_cast<std::size_t>(kernel) * d_out);
                        for (std::size_t t = 0; t < m; ++t)
                            for (int j = 0; j < kernel; ++j) {
                                long dst = static_cast<long>(t) * stride + j - crop_left;
                                if (dst < 0 || dst >= static_cast<long>(go.rows())) continue;
                                for (std::size_t c = 0; c < d_out; ++c)
                                    dycols.at(t, static_cast<std::size_t>(j) * d_out + c) =
                                        go.at(dst, c);
                            }
                        if (g.needs_grad(w))
                            emap(g.grad(w)).noalias() += emap(vx2).transpose() * emap(dycols);
                        if (g.needs_grad(x))
                            emap(g.grad(x)).noalias() +=
                                emap(dycols) * emap(g.value(w)).transpose();
                    });
    }

    // ---- losses ----

    // Mean over rows of -log softmax(logits)[target].
    int cross_entropy(int logits, std::vector<int> targets) {
        const auto& vl = value(logits);
        std::size_t m = vl.rows(), n = vl.cols();
        require(targets.size() == m, "cross_entropy: target count");
        auto probs = std::make_shared<Tensor<T>>(m, n);
        T loss = 0;
        for (std::size_t r = 0; r < m; ++r) {
            require(targets[r] >= 0 && static_cast<std::size_t>(targets[r]) < n,
                    "cross_entropy: target out of range");
            T mx = vl.at(r, 0);
            for (std::size_t c = 1; c < n; ++c) mx = std::max(mx, vl.at(r, c));
            T sum = 0;
            for (std::size_t c = 0; c < n; ++c) sum += std::exp(vl.at(r, c) - mx);
            T logz = mx + std::log(sum);
            for (std::size_t c = 0; c < n; ++c) probs->at(r, c) = std::exp(vl.at(r, c) - logz);
            loss -= vl.at(r, targets[r]) - logz;
        }
        Tensor<T> out(1, 1);
        out.data[0] = loss / static_cast<T>(m);
        auto tgt = std::make_shared<std::vector<int>>(std::move(targets));
        return make(std::move(out), needs_grad(logits), [logits, probs, tgt](Graph& g, int self) {
            if (!g.needs_grad(logits)) return;
            T go = g.grad(self).data[0];
            Tensor<T>& gl = g.grad(logits);
            std::size_t m = gl.rows(), n = gl.cols();
            T invm = go / static_cast<T>(m);
            for (std::size_t r = 0; r < m; ++r)
                for (std::size_t c = 0; c < n; ++c) {
                    T p = probs->at(r, c);
                    gl.at(r, c) += invm * (p - (static_cast<std::size_t>((*tgt)[r]) == c ? T(1) : T(0)));
                }
        });
    }

    // Mean over all entries of (pred - target)^2.
    int mse(int pred, const Tensor<T>& target) {
        const auto& vp = value(pred);
        require(vp.same_shape(target), "mse: shape mismatch");
        T total = 0;
        for (std::size_t i = 0; i < vp.data.size(); ++i) {
            T d = vp.data[i] - target.data[i];
            total += d * d;
        }
        Tensor<T> out(1, 1);
        std::size_t n = vp.data.size();
        out.data[0] = total / static_cast<T>(n);
        auto tgt = std::make_shared<Tensor<T>>(target);
        return make(std::move(out), needs_grad(pred), [pred, tgt](Graph& g, int self) {
            if (!g.needs_grad(pred)) return;
            T go = g.grad(self).data[0];
            const Tensor<T>& vp = g.value(pred);
            Tensor<T>& gp = g.grad(pred);
            T s = go * T(2) / static_cast<T>(vp.data.size());
            for (std::size_t i = 0; i < vp.data.size(); ++i)
                gp.data[i] += s * (vp.data[i] - tgt->data[i]);
        });
    }

    // Crop to the first `rows` rows.
    int crop_rows(int a, std::size_t rows) {
        const auto& va = value(a);
        require(rows <= va.rows(), "crop_rows: too long");
        Tensor<T> out(rows, va.cols());
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < va.cols(); ++c) out.at(r, c) = va.at(r, c);
        return make(std::move(out), needs_grad(a), [a](Graph& g, int self) {
            if (!g.needs_grad(a)) return;
            const Tensor<T>& go = g.grad(self);
            Tensor<T>& ga = g.grad(a);
            for (std::size_t r = 0; r < go.rows(); ++r)
                for (std::size_t c = 0; c < go.cols(); ++c) ga.at(r, c) += go.at(r, c);
        });
    }

    int sum_scalars(const std::vector<int>& terms) {
        require(!terms.empty(), "sum_scalars: empty");
        T total = 0;
        bool needs = false;
        for (int t : terms) {
            require(value(t).numel() == 1, "sum_scalars: non-scalar");
            total += value(t).data[0];
            needs = needs || needs_grad(t);
        }
        Tensor<T> out(1, 1);
        out.data[0] = total;
        auto ts = std::make_shared<std::vector<int>>(terms);
        return make(std::move(out), needs, [ts](Graph& g, int self) {
            T go = g.grad(self).data[0];
            for (int t : *ts)
                if (g.needs_grad(t)) g.grad(t).data[0] += go;
        });
    }

    // Backward pass from a scalar loss; parameter gradients are accumulated
    // into their Parameter::grad buffers.
    void backward(int loss) {
        require(value(loss).numel() == 1, "backward: loss must be scalar");
        grad(loss).data[0] = T(1);
        for (int i = loss; i >= 0; --i) {
            Node& n = nodes_[i];
            if (!n.needs_grad) continue;
            if (n.grad.data.size() != n.value.data.size()) continue;  // no grad reached this node
            if (n.backward) n.backward(*this, i);
            if (n.param) {
                n.param->ensure_grad();
                emap(n.param->grad) += emap(n.grad);
            }
        }
    }

    std::size_t size() const { return nodes_.size(); }

    // Smallest |x| seen at any ReLU input; finite-difference checks re-seed
    // when a test point sits within the step size of the kink.
    T relu_kink_margin() const { return relu_kink_margin_; }

private:
    std::vector<Node> nodes_;
    bool training_;
    std::mt19937_64 rng_;
    T relu_kink_margin_ = std::numeric_limits<T>::max();
};

}  // namespace pvs
