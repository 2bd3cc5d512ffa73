#pragma once

#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "graph.hpp"
#include "tensor.hpp"

namespace pvs {

struct BlockConfig {
    int hidden_size = 256;
    int ffn_size = 1024;
    int num_blocks = 6;
    int num_heads = 4;
    int conv_kernel = 3;
    int conv_stride = 2;
    int conv_filters = 256;
    int num_conv_layers = 2;
    double dropout = 0.1;

    int downsample_factor() const {
        int c = 1;
        for (int i = 0; i < num_conv_layers; ++i) c *= conv_stride;
        return c;
    }
    void validate() const {
        require(hidden_size > 0 && ffn_size > 0 && num_blocks > 0 && num_heads > 0,
                "block config: sizes must be positive");
        require(hidden_size % num_heads == 0, "block config: hidden_size not divisible by num_heads");
        require(conv_kernel > 0 && conv_stride > 0 && num_conv_layers >= 0,
                "block config: conv geometry");
        require(conv_filters == hidden_size,
                "block config: conv_filters must equal hidden_size");
    }
};

// Insertion-ordered parameter collection; the checkpoint unit.
template <typename T>
class ParamStore {
public:
    std::string config_text;
    std::uint32_t version = 1;

    Parameter<T>& create(const std::string& name, std::size_t rows, std::size_t cols) {
        require(index_.find(name) == index_.end(), "param already exists: " + name);
        auto p = std::make_unique<Parameter<T>>();
        p->name = name;
        p->value = Tensor<T>(rows, cols);
        index_[name] = params_.size();
        params_.push_back(std::move(p));
        return *params_.back();
    }

    bool has(const std::string& name) const { return index_.count(name) != 0; }

    Parameter<T>& get(const std::string& name) {
        auto it = index_.find(name);
        require(it != index_.end(), "missing param: " + name);
        return *params_[it->second];
    }
    const Parameter<T>& get(const std::string& name) const {
        auto it = index_.find(name);
        require(it != index_.end(), "missing param: " + name);
        return *params_[it->second];
    }

    std::vector<Parameter<T>*> all() {
        std::vector<Parameter<T>*> out;
        out.reserve(params_.size());
        for (auto& p : params_) out.push_back(p.get());
        return out;
    }
    std::vector<const Parameter<T>*> all() const {
        std::vector<const Parameter<T>*> out;
        out.reserve(params_.size());
        for (auto& p : params_) out.push_back(p.get());
        return out;
    }

    void zero_grads() {
        for (auto& p : params_) {
            p->ensure_grad();
            p->grad.zero();
        }
    }

    std::size_t count() const { return params_.size(); }

    template <typename U>
    ParamStore<U> cast() const {
        ParamStore<U> out;
        out.config_text = config_text;
        out.version = version;
        for (const auto& p : params_) {
            auto& q = out.create(p->name, p->value.rows(), p->value.cols());
            q.value = p->value.template cast<U>();
        }
        return out;
    }

private:
    std::vector<std::unique_ptr<Parameter<T>>> params_;
    std::map<std::string, std::size_t> index_;
};

// ---- initializers ----

template <typename T>
void init_linear_params(ParamStore<T>& ps, const std::string& prefix, std::size_t d_in,
                        std::size_t d_out, std::mt19937_64& rng, bool zero = false) {
    auto& w = ps.create(prefix + ".w", d_in, d_out);
    if (!zero) fill_xavier(w.value, rng, d_in, d_out);
    ps.create(prefix + ".b", 1, d_out);
}

template <typename T>
void init_layernorm_params(ParamStore<T>& ps, const std::string& prefix, std::size_t n) {
    auto& g = ps.create(prefix + ".g", 1, n);
    std::fill(g.value.data.begin(), g.value.data.end(), T(1));
    ps.create(prefix + ".b", 1, n);
}

template <typename T>
void init_conv_stack_params(ParamStore<T>& ps, const std::string& prefix, std::size_t d_in,
                            const BlockConfig& cfg, std::mt19937_64& rng) {
    std::size_t in = d_in;
    for (int i = 0; i < cfg.num_conv_layers; ++i) {
        std::size_t rows = static_cast<std::size_t>(cfg.conv_kernel) * in;
        auto& w = ps.create(prefix + "." + std::to_string(i) + ".w", rows,
                            static_cast<std::size_t>(cfg.conv_filters));
        fill_xavier(w.value, rng, rows, static_cast<std::size_t>(cfg.conv_filters));
        ps.create(prefix + "." + std::to_string(i) + ".b", 1,
                  static_cast<std::size_t>(cfg.conv_filters));
        in = static_cast<std::size_t>(cfg.conv_filters);
    }
}

template <typename T>
void init_transpose_conv_stack_params(ParamStore<T>& ps, const std::string& prefix,
                                      std::size_t d_in, const BlockConfig& cfg,
                                      std::mt19937_64& rng) {
    std::size_t in = d_in;
    for (int i = 0; i < cfg.num_conv_layers; ++i) {
        std::size_t cols = static_cast<std::size_t>(cfg.conv_kernel) * cfg.conv_filters;
        auto& w = ps.create(prefix + "." + std::to_string(i) + ".w", in, cols);
        fill_xavier(w.value, rng, in, static_cast<std::size_t>(cfg.conv_filters));
        ps.create(prefix + "." + std::to_string(i) + ".b", 1,
                  static_cast<std::size_t>(cfg.conv_filters));
        in = static_cast<std::size_t>(cfg.conv_filters);
    }
}

template <typename T>
void init_attention_params(ParamStore<T>& ps, const std::string& prefix, std::size_t d,
                           std::mt19937_64& rng) {
    for (const char* nm : {"wq", "wk", "wv", "wo"}) {
        auto& w = ps.create(prefix + "." + nm, d, d);
        fill_xavier(w.value, rng, d, d);
    }
    for (const char* nm : {"bq", "bk", "bv", "bo"}) ps.create(prefix + "." + nm, 1, d);
}

template <typename T>
void init_transformer_stack_params(ParamStore<T>& ps, const std::string& prefix,
                                   const BlockConfig& cfg, bool with_cross,
                                   std::mt19937_64& rng) {
    std::size_t d = static_cast<std::size_t>(cfg.hidden_size);
    std::size_t f = static_cast<std::size_t>(cfg.ffn_size);
    for (int b = 0; b < cfg.num_blocks; ++b) {
        std::string bp = prefix + ".b" + std::to_string(b);
        init_attention_params(ps, bp + ".attn", d, rng);
        init_layernorm_params(ps, bp + ".ln1", d);
        if (with_cross) {
            init_attention_params(ps, bp + ".cross", d, rng);
            init_layernorm_params(ps, bp + ".lnc", d);
        }
        init_linear_params(ps, bp + ".ffn.fc1", d, f, rng);
        init_linear_params(ps, bp + ".ffn.fc2", f, d, rng);
        init_layernorm_params(ps, bp + ".ln2", d);
    }
}

// ---- forward builders ----

template <typename T>
int linear(Graph<T>& g, int x, ParamStore<T>& ps, const std::string& prefix) {
    int w = g.leaf(ps.get(prefix + ".w"));
    int b = g.leaf(ps.get(prefix + ".b"));
    return g.add_rowvec(g.matmul(x, w), b);
}

// Output length = ceil(l / stride^num_conv_layers); ReLU after every layer.
template <typename T>
int conv_downsample(Graph<T>& g, int x, ParamStore<T>& ps, const std::string& prefix,
                    const BlockConfig& cfg) {
    int h = x;
    for (int i = 0; i < cfg.num_conv_layers; ++i) {
        int w = g.leaf(ps.get(prefix + "." + std::to_string(i) + ".w"));
        int b = g.leaf(ps.get(prefix + "." + std::to_string(i) + ".b"));
        h = g.relu(g.conv1d(h, w, b, cfg.conv_kernel, cfg.conv_stride));
    }
    return h;
}

// Output length = rows(x) * stride^num_conv_layers, exactly.
template <typename T>
int conv_upsample(Graph<T>& g, int x, ParamStore<T>& ps, const std::string& prefix,
                  const BlockConfig& cfg) {
    int h = x;
    for (int i = 0; i < cfg.num_conv_layers; ++i) {
        int w = g.leaf(ps.get(prefix + "." + std::to_string(i) + ".w"));
        int b = g.leaf(ps.get(prefix + "." + std::to_string(i) + ".b"));
        h = g.relu(g.conv1d_transpose(h, w, b, cfg.conv_kernel, cfg.conv_stride));
    }
    return h;
}

template <typename T>
Tensor<T> sinusoidal_encoding(std::size_t len, std::size_t dim) {
    Tensor<T> pe(len, dim);
    for (std::size_t pos = 0; pos < len; ++pos)
        for (std::size_t i = 0; i < dim; ++i) {
            double angle = static_cast<double>(pos) /
                           std::pow(10000.0, static_cast<double>(2 * (i / 2)) / static_cast<double>(dim));
            pe.at(pos, i) = static_cast<T>(i % 2 == 0 ? std::sin(angle) : std::cos(angle));
        }
    return pe;
}

template <typename T>
int add_positional(Graph<T>& g, int x) {
    const auto& v = g.value(x);
    return g.add_const(x, sinusoidal_encoding<T>(v.rows(), v.cols()));
}

template <typename T>
Tensor<T> causal_mask(std::size_t m) {
    Tensor<T> mask(m, m);
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = r + 1; c < m; ++c) mask.at(r, c) = T(-1e30);
    return mask;
}

template <typename T>
int multi_head_attention(Graph<T>& g, int q_in, int kv_in, ParamStore<T>& ps,
                         const std::string& prefix, const BlockConfig& cfg, bool causal) {
    std::size_t d = static_cast<std::size_t>(cfg.hidden_size);
    std::size_t heads = static_cast<std::size_t>(cfg.num_heads);
    std::size_t dh = d / heads;
    int q = g.add_rowvec(g.matmul(q_in, g.leaf(ps.get(prefix + ".wq"))), g.leaf(ps.get(prefix + ".bq")));
    int k = g.add_rowvec(g.matmul(kv_in, g.leaf(ps.get(prefix + ".wk"))), g.leaf(ps.get(prefix + ".bk")));
    int v = g.add_rowvec(g.matmul(kv_in, g.leaf(ps.get(prefix + ".wv"))), g.leaf(ps.get(prefix + ".bv")));
    T inv_sqrt = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
    std::vector<int> head_outs;
    std::size_t m = g.value(q_in).rows();
    for (std::size_t h = 0; h < heads; ++h) {
        int qh = g.slice_cols(q, h * dh, (h + 1) * dh);
        int kh = g.slice_cols(k, h * dh, (h + 1) * dh);
        int vh = g.slice_cols(v, h * dh, (h + 1) * dh);
        int scores = g.scale(g.matmul_nt(qh, kh), inv_sqrt);
        if (causal) scores = g.add_const(scores, causal_mask<T>(m));
        int attn = g.softmax_rows(scores);
        head_outs.push_back(g.matmul(attn, vh));
    }
    int concat = g.concat_cols(head_outs);
    return g.add_rowvec(g.matmul(concat, g.leaf(ps.get(prefix + ".wo"))), g.leaf(ps.get(prefix + ".bo")));
}

// Post-LN block: x = LN(x + Sublayer(x)). `memory` >= 0 enables a
// cross-attention sublayer between self-attention and the feed-forward.
template <typename T>
int transformer_stack(Graph<T>& g, int x, ParamStore<T>& ps, const std::string& prefix,
                      const BlockConfig& cfg, bool causal, int memory = -1) {
    T rate = static_cast<T>(cfg.dropout);
    for (int b = 0; b < cfg.num_blocks; ++b) {
        std::string bp = prefix + ".b" + std::to_string(b);
        int attn = multi_head_attention(g, x, x, ps, bp + ".attn", cfg, causal);
        x = g.layer_norm(g.add(x, g.dropout(attn, rate)), g.leaf(ps.get(bp + ".ln1.g")),
                         g.leaf(ps.get(bp + ".ln1.b")));
        if (memory >= 0) {
            int cross = multi_head_attention(g, x, memory, ps, bp + ".cross", cfg, false);
            x = g.layer_norm(g.add(x, g.dropout(cross, rate)), g.leaf(ps.get(bp + ".lnc.g")),
                             g.leaf(ps.get(bp + ".lnc.b")));
        }
        int h = g.relu(linear(g, x, ps, bp + ".ffn.fc1"));
        int ffn = linear(g, g.dropout(h, rate), ps, bp + ".ffn.fc2");
        x = g.layer_norm(g.add(x, g.dropout(ffn, rate)), g.leaf(ps.get(bp + ".ln2.g")),
                         g.leaf(ps.get(bp + ".ln2.b")));
    }
    return x;
}

// ---- optimizer ----

// Adam with the inverse-square-root warmup schedule.
template <typename T>
struct AdamOptimizer {
    T beta1 = T(0.9);
    T beta2 = T(0.98);
    T eps = T(1e-9);
    T lr_factor = T(1.0);
    int warmup_steps = 4000;
    int hidden_size = 256;
    long step_count = 0;

    T learning_rate(long step) const {
        double s = static_cast<double>(step);
        double w = static_cast<double>(warmup_steps);
        double scale = std::min(1.0 / std::sqrt(s), s / (w * std::sqrt(w)));
        return static_cast<T>(static_cast<double>(lr_factor) /
                              std::sqrt(static_cast<double>(hidden_size)) * scale);
    }

    void step(ParamStore<T>& ps) {
        ++step_count;
        T lr = learning_rate(step_count);
        T bc1 = T(1) - std::pow(beta1, static_cast<T>(step_count));
        T bc2 = T(1) - std::pow(beta2, static_cast<T>(step_count));
        for (Parameter<T>* p : ps.all()) {
            p->ensure_grad();
            if (p->adam_m.data.size() != p->value.data.size()) {
                p->adam_m = p->value;
                p->adam_m.zero();
                p->adam_v = p->value;
                p->adam_v.zero();
            }
            for (std::size_t i = 0; i < p->value.data.size(); ++i) {
                T gi = p->grad.data[i];
                p->adam_m.data[i] = beta1 * p->adam_m.data[i] + (T(1) - beta1) * gi;
                p->adam_v.data[i] = beta2 * p->adam_v.data[i] + (T(1) - beta2) * gi * gi;
                T mhat = p->adam_m.data[i] / bc1;
                T vhat = p->adam_v.data[i] / bc2;
                p->value.data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
            }
            p->grad.zero();
        }
    }
};

// ---- gradient checking ----

struct GradCheckEntry {
    std::string name;
    double max_rel_err = 0.0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    std::size_t worst_index = 0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> groups;
    double max_rel_err = 0.0;
    bool non_finite = false;

    std::string to_string() const {
        std::ostringstream os;
        for (const auto& e : groups)
            os << e.name << ": max_rel_err=" << e.max_rel_err << " (analytic=" << e.worst_analytic
               << " numeric=" << e.worst_numeric << " at " << e.worst_index << ")\n";
        os << "overall max_rel_err=" << max_rel_err << (non_finite ? " [NON-FINITE]" : "") << "\n";
        return os.str();
    }
};

// Central finite differences against the tape gradients. `build` must be a
// deterministic function of the parameter store (fixed dropout seed, fixed
// inputs). Intended for 64-bit stores.
template <typename T>
GradCheckReport gradient_check(ParamStore<T>& ps,
                               const std::function<int(Graph<T>&)>& build, double step = 1e-4,
                               std::size_t max_entries_per_param = 0) {
    GradCheckReport report;
    ps.zero_grads();
    auto eval = [&](void) -> double {
        Graph<T> g(true, 1234);
        int loss = build(g);
        return static_cast<double>(g.scalar(loss));
    };
    {
        Graph<T> g(true, 1234);
        int loss = build(g);
        if (!std::isfinite(static_cast<double>(g.scalar(loss)))) report.non_finite = true;
        g.backward(loss);
    }
    for (Parameter<T>* p : ps.all()) {
        GradCheckEntry entry;
        entry.name = p->name;
        std::size_t n = p->value.data.size();
        std::size_t stride = 1;
        if (max_entries_per_param > 0 && n > max_entries_per_param)
            stride = n / max_entries_per_param;
        for (std::size_t i = 0; i < n; i += stride) {
            T old = p->value.data[i];
            p->value.data[i] = old + static_cast<T>(step);
            double up = eval();
            p->value.data[i] = old - static_cast<T>(step);
            double down = eval();
            p->value.data[i] = old;
            double numeric = (up - down) / (2.0 * step);
            double analytic = static_cast<double>(p->grad.data[i]);
            if (!std::isfinite(numeric) || !std::isfinite(analytic)) {
                report.non_finite = true;
                continue;
            }
            double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
            double rel = std::abs(numeric - analytic) / denom;
            if (std::abs(numeric) < 1e-7 && std::abs(analytic) < 1e-7) rel = 0.0;
            if (rel > entry.max_rel_err) {
                entry.max_rel_err = rel;
                entry.worst_analytic = analytic;
                entry.worst_numeric = numeric;
                entry.worst_index = i;
            }
        }
        report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
        report.groups.push_back(std::move(entry));
    }
    return report;
}

// ---- checkpoint container ----
// Layout (little-endian): magic "PVCK", u32 version, u64 config bytes,
// u32 tensor count, then per tensor: u32 name bytes, u32 ndim, u64 dims,
// f32 row-major payload.

struct CheckpointError : std::runtime_error {
    explicit CheckpointError(const std::string& m) : std::runtime_error(m) {}
};

namespace detail {
inline void write_bytes(std::ostream& os, const void* p, std::size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}
template <typename U>
void write_pod(std::ostream& os, U v) {
    write_bytes(os, &v, sizeof(U));
}
inline void read_bytes(std::istream& is, void* p, std::size_t n) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!is) throw CheckpointError("checkpoint: truncated file");
}
template <typename U>
U read_pod(std::istream& is) {
    U v;
    read_bytes(is, &v, sizeof(U));
    return v;
}
}  // namespace detail

template <typename T>
void save_checkpoint(const std::string& path, const ParamStore<T>& ps) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw CheckpointError("checkpoint: cannot open for write: " + path);
    detail::write_bytes(os, "PVCK", 4);
    detail::write_pod<std::uint32_t>(os, ps.version);
    detail::write_pod<std::uint64_t>(os, ps.config_text.size());
    detail::write_bytes(os, ps.config_text.data(), ps.config_text.size());
    auto params = ps.all();
    detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(params.size()));
    for (const Parameter<T>* p : params) {
        detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(p->name.size()));
        detail::write_bytes(os, p->name.data(), p->name.size());
        detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(p->value.shape.size()));
        for (auto d : p->value.shape) detail::write_pod<std::uint64_t>(os, d);
        for (T v : p->value.data) detail::write_pod<float>(os, static_cast<float>(v));
    }
    if (!os) throw CheckpointError("checkpoint: write failed: " + path);
}

template <typename T>
void load_checkpoint(const std::string& path, ParamStore<T>& ps) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CheckpointError("checkpoint: cannot open: " + path);
    char magic[4];
    detail::read_bytes(is, magic, 4);
    if (std::memcmp(magic, "PVCK", 4) != 0) throw CheckpointError("checkpoint: bad magic");
    ps.version = detail::read_pod<std::uint32_t>(is);
    if (ps.version != 1) throw CheckpointError("checkpoint: unsupported version");
    auto cfg_len = detail::read_pod<std::uint64_t>(is);
    ps.config_text.resize(cfg_len);
    if (cfg_len) detail::read_bytes(is, ps.config_text.data(), cfg_len);
    auto count = detail::read_pod<std::uint32_t>(is);
    for (std::uint32_t i = 0; i < count; ++i) {
        auto name_len = detail::read_pod<std::uint32_t>(is);
        std::string name(name_len, '\0');
        detail::read_bytes(is, name.data(), name_len);
        auto ndim = detail::read_pod<std::uint32_t>(is);
        std::vector<std::size_t> shape(ndim);
        for (auto& d : shape) d = static_cast<std::size_t>(detail::read_pod<std::uint64_t>(is));
        Tensor<float> payload(shape);
        for (auto& v : payload.data) v = detail::read_pod<float>(is);
        std::size_t rows = payload.rows(), cols = payload.cols();
        auto& p = ps.has(name) ? ps.get(name) : ps.create(name, rows, cols);
        require(p.value.rows() == rows && p.value.cols() == cols,
                "checkpoint: shape mismatch for " + name);
        p.value = payload.template cast<T>();
    }
}

// Optimizer sidecar ("<checkpoint>.opt"): step counter plus first and second
// Adam moments, so an interrupted run continues exactly.
template <typename T>
void save_adam_state(const std::string& path, const ParamStore<T>& ps,
                     const AdamOptimizer<T>& opt) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw CheckpointError("optimizer state: cannot open for write: " + path);
    detail::write_bytes(os, "PVOP", 4);
    detail::write_pod<std::uint32_t>(os, 1);
    detail::write_pod<std::int64_t>(os, opt.step_count);
    auto params = ps.all();
    detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(params.size()));
    for (const Parameter<T>* p : params) {
        detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(p->name.size()));
        detail::write_bytes(os, p->name.data(), p->name.size());
        detail::write_pod<std::uint64_t>(os, p->value.numel());
        bool has_state = p->adam_m.data.size() == p->value.data.size();
        for (std::size_t i = 0; i < p->value.numel(); ++i)
            detail::write_pod<float>(os, has_state ? static_cast<float>(p->adam_m.data[i]) : 0.0f);
        for (std::size_t i = 0; i < p->value.numel(); ++i)
            detail::write_pod<float>(os, has_state ? static_cast<float>(p->adam_v.data[i]) : 0.0f);
    }
    if (!os) throw CheckpointError("optimizer state: write failed: " + path);
}

template <typename T>
void load_adam_state(const std::string& path, ParamStore<T>& ps, AdamOptimizer<T>& opt) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CheckpointError("optimizer state: cannot open: " + path);
    char magic[4];
    detail::read_bytes(is, magic, 4);
    if (std::memcmp(magic, "PVOP", 4) != 0) throw CheckpointError("optimizer state: bad magic");
    if (detail::read_pod<std::uint32_t>(is) != 1)
        throw CheckpointError("optimizer state: unsupported version");
    opt.step_count = detail::read_pod<std::int64_t>(is);
    auto count = detail::read_pod<std::uint32_t>(is);
    for (std::uint32_t i = 0; i < count; ++i) {
        auto name_len = detail::read_pod<std::uint32_t>(is);
        std::string name(name_len, '\0');
        detail::read_bytes(is, name.data(), name_len);
        auto n = detail::read_pod<std::uint64_t>(is);
        auto& p = ps.get(name);
        require(p.value.numel() == n, "optimizer state: size mismatch for " + name);
        p.adam_m = p.value;
        p.adam_v = p.value;
        for (auto& v : p.adam_m.data) v = static_cast<T>(detail::read_pod<float>(is));
        for (auto& v : p.adam_v.data) v = static_cast<T>(detail::read_pod<float>(is));
    }
}

inline std::string inspect_checkpoint(const std::string& path) {
    ParamStore<float> ps;
    load_checkpoint(path, ps);
    std::ostringstream os;
    os << "version: " << ps.version << "\n";
    std::size_t total = 0;
    for (const auto* p : ps.all()) {
        os << p->name << " [";
        for (std::size_t i = 0; i < p->value.shape.size(); ++i)
            os << (i ? ", " : "") << p->value.shape[i];
        os << "]\n";
        total += p->value.numel();
    }
    os << "tensors: " << ps.count() << ", total values: " << total << "\n";
    if (!ps.config_text.empty()) os << "config:\n" << ps.config_text;
    return os.str();
}

}  // namespace pvs
