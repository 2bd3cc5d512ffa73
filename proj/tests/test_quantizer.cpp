#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "nn.hpp"
#include "quantizer.hpp"
#include "testutil.hpp"

using namespace pvs;

namespace {

Tensor<double> random_tensor(std::size_t rows, std::size_t cols, std::uint64_t seed,
                             double scale = 1.0) {
    Tensor<double> t(rows, cols);
    std::mt19937_64 rng(seed);
    fill_uniform(t, rng, scale);
    return t;
}

// Independent argmax loop over every non-blank row.
std::vector<int> brute_force_quantize(const Tensor<double>& hidden, const Tensor<double>& e,
                                      int blank) {
    std::vector<int> out;
    for (std::size_t r = 0; r < hidden.rows(); ++r) {
        double best = -1e300;
        int arg = -1;
        for (int k = 0; k < blank; ++k) {
            double dot = 0;
            for (std::size_t c = 0; c < hidden.cols(); ++c) dot += hidden.at(r, c) * e.at(k, c);
            if (dot > best) {
                best = dot;
                arg = k;
            }
        }
        out.push_back(arg);
    }
    return out;
}

}  // namespace

TEST_CASE("orthonormal codebook: basis vector selects its own row") {
    Tensor<double> e(5, 4);  // 4 basis rows + blank row
    for (int k = 0; k < 4; ++k) e.at(k, k) = 1.0;
    Tensor<double> hidden(1, 4);
    hidden.at(0, 2) = 1.0;
    CHECK(quantize_hidden(hidden, e, 4) == std::vector<int>{2});
}

TEST_CASE("positive scaling of hidden rows leaves tokens unchanged") {
    auto e = random_tensor(12, 6, 100);
    auto hidden = random_tensor(9, 6, 101);
    auto base = quantize_hidden(hidden, e, 11);
    Tensor<double> scaled = hidden;
    for (auto& v : scaled.data) v *= 3.0;
    CHECK(quantize_hidden(scaled, e, 11) == base);
}

TEST_CASE("quantize matches a brute-force loop on random 177x256 codebooks") {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        auto e = random_tensor(178, 256, 200 + seed, 0.1);
        auto hidden = random_tensor(50, 256, 300 + seed);
        CHECK(quantize_hidden(hidden, e, 177) == brute_force_quantize(hidden, e, 177));
    }
}

TEST_CASE("ties break to the lowest row index") {
    Tensor<double> e(4, 2);
    e.at(0, 0) = 1.0;           // rows 0 and 2 tie exactly
    e.at(1, 0) = -1.0;
    e.at(2, 0) = 1.0;
    Tensor<double> hidden(1, 2);
    hidden.at(0, 0) = 2.0;
    CHECK(quantize_hidden(hidden, e, 3) == std::vector<int>{0});
}

TEST_CASE("the blank row is never emitted even when it dominates") {
    Tensor<double> e(3, 2);
    e.at(0, 0) = 0.1;
    e.at(1, 0) = 0.2;
    e.at(2, 0) = 100.0;  // blank row dwarfs everything
    Tensor<double> hidden(4, 2);
    for (std::size_t r = 0; r < 4; ++r) hidden.at(r, 0) = 1.0;
    for (int t : quantize_hidden(hidden, e, 2)) CHECK(t == 1);
}

TEST_CASE("embed returns codebook rows; empty sequence gives empty tensor of width D") {
    auto e = random_tensor(7, 5, 400);
    Tensor<double> out = embed_tokens({3, 0, 3}, e, 6);
    CHECK(out.rows() == 3);
    for (std::size_t c = 0; c < 5; ++c) {
        CHECK(out.at(0, c) == e.at(3, c));
        CHECK(out.at(1, c) == e.at(0, c));
        CHECK(out.at(2, c) == e.at(3, c));
    }
    Tensor<double> empty = embed_tokens({}, e, 6);
    CHECK(empty.rows() == 0);
    CHECK(empty.cols() == 5);
    CHECK_THROWS(embed_tokens({6}, e, 6));   // blank is not a valid embed target
    CHECK_THROWS(embed_tokens({-1}, e, 6));
}

TEST_CASE("codewords are fixed points on an equal-norm codebook") {
    // rows with equal norms: dot-product argmax of a codeword returns itself
    std::size_t K = 6, D = 4;
    Tensor<double> e(K + 1, D);
    std::mt19937_64 rng(55);
    for (std::size_t k = 0; k < K; ++k) {
        double norm = 0;
        for (std::size_t c = 0; c < D; ++c) {
            e.at(k, c) = std::uniform_real_distribution<double>(-1, 1)(rng);
            norm += e.at(k, c) * e.at(k, c);
        }
        norm = std::sqrt(norm);
        for (std::size_t c = 0; c < D; ++c) e.at(k, c) /= norm;
    }
    std::vector<int> all(K);
    for (std::size_t k = 0; k < K; ++k) all[k] = static_cast<int>(k);
    Tensor<double> rows = embed_tokens(all, e, static_cast<int>(K));
    CHECK(quantize_hidden(rows, e, static_cast<int>(K)) == all);

    // idempotence: quantize(embed(quantize(h))) == quantize(h)
    auto hidden = random_tensor(10, D, 77);
    auto z = quantize_hidden(hidden, e, static_cast<int>(K));
    auto z2 = quantize_hidden(embed_tokens(z, e, static_cast<int>(K)), e, static_cast<int>(K));
    CHECK(z2 == z);
}

TEST_CASE("straight-through on: hidden receives the e_z gradient unchanged") {
    ParamStore<double> ps;
    auto& h = ps.create("hidden", 4, 3);
    auto& e = ps.create("e", 6, 3);
    std::mt19937_64 rng(60);
    fill_uniform(h.value, rng, 1.0);
    fill_uniform(e.value, rng, 1.0);
    auto tokens = quantize_hidden(h.value, e.value, 5);
    Tensor<double> target(4, 3);

    ps.zero_grads();
    Graph<double> g;
    int hn = g.leaf(ps.get("hidden"));
    int en = g.leaf(ps.get("e"));
    int ez = g.vq_lookup(hn, en, tokens, true);
    int loss = g.mse(ez, target);
    g.backward(loss);

    // grad(hidden) == grad(e_z), i.e. scatter of e grads by token equals it
    Tensor<double> expected_e(6, 3);
    const Tensor<double>& gh = ps.get("hidden").grad;
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 3; ++c) expected_e.at(tokens[r], c) += gh.at(r, c);
    for (std::size_t i = 0; i < expected_e.data.size(); ++i)
        CHECK(ps.get("e").grad.data[i] == doctest::Approx(expected_e.data[i]).epsilon(1e-12));
}

TEST_CASE("straight-through off: hidden gets no reconstruction gradient") {
    ParamStore<double> ps;
    auto& h = ps.create("hidden", 4, 3);
    auto& e = ps.create("e", 6, 3);
    std::mt19937_64 rng(61);
    fill_uniform(h.value, rng, 1.0);
    fill_uniform(e.value, rng, 1.0);
    auto tokens = quantize_hidden(h.value, e.value, 5);
    Tensor<double> target(4, 3);

    ps.zero_grads();
    Graph<double> g;
    int ez = g.vq_lookup(g.leaf(ps.get("hidden")), g.leaf(ps.get("e")), tokens, false);
    g.backward(g.mse(ez, target));
    for (double v : ps.get("hidden").grad.data) CHECK(v == 0.0);
    double esum = 0;
    for (double v : ps.get("e").grad.data) esum += std::abs(v);
    CHECK(esum > 0.0);
}

TEST_CASE("codebook reconstruction gradient matches finite differences of L_inv") {
    ParamStore<double> ps;
    auto& e = ps.create("e", 6, 3);
    std::mt19937_64 rng(62);
    fill_uniform(e.value, rng, 1.0);
    Tensor<double> hidden = random_tensor(5, 3, 63);
    Tensor<double> target = random_tensor(5, 3, 64);

    // tokens are recomputed inside the closure, so the finite-difference
    // evaluation sees the true piecewise loss; random points stay away from
    // argmax ties
    auto build = [&](Graph<double>& g) {
        auto tokens = quantize_hidden(hidden, ps.get("e").value, 5);
        int ez = g.vq_lookup(g.input(hidden), g.leaf(ps.get("e")), tokens, true);
        return g.mse(ez, target);
    };
    auto report = gradient_check<double>(ps, build, 1e-4);
    INFO(report.to_string());
    CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("label files: one symbol per line with a trailing <blank>") {
    testutil::TempDir tmp("labels");
    testutil::spit(tmp.file("ok.txt"), "a\nb\nc\n<blank>\n");
    Codebook cb = load_codebook_labels(tmp.file("ok.txt"));
    CHECK(cb.phonetic_count() == 3);
    CHECK(cb.blank_index == 3);
    CHECK(cb.labels == std::vector<std::string>{"a", "b", "c"});
    CHECK(tokens_to_symbols({2, 0}, cb) == std::vector<std::string>{"c", "a"});
    CHECK(symbols_to_tokens({"b", "b"}, cb) == std::vector<int>{1, 1});

    testutil::spit(tmp.file("dup.txt"), "a\na\n<blank>\n");
    CHECK_THROWS(load_codebook_labels(tmp.file("dup.txt")));
    testutil::spit(tmp.file("noblank.txt"), "a\nb\n");
    CHECK_THROWS(load_codebook_labels(tmp.file("noblank.txt")));
}
