#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "ctc.hpp"
#include "nn.hpp"

using namespace pvs;

namespace {

Tensor<double> uniform_logits(std::size_t frames, std::size_t classes) {
    return Tensor<double>(frames, classes);  // all zeros -> uniform softmax
}

Tensor<double> random_logits(std::size_t frames, std::size_t classes, std::uint64_t seed) {
    Tensor<double> t(frames, classes);
    std::mt19937_64 rng(seed);
    fill_uniform(t, rng, 2.0);
    return t;
}

}  // namespace

TEST_CASE("T=1 uniform over {blank,a}, target [a] gives ln 2") {
    auto logits = uniform_logits(1, 2);
    double loss = ctc_loss_value(logits, {0}, 1);
    CHECK(loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("T=2 uniform over {blank,a}, target [a]: paths {aa, -a, a-} give -ln 3/4") {
    auto logits = uniform_logits(2, 2);
    double loss = ctc_loss_value(logits, {0}, 1);
    CHECK(loss == doctest::Approx(-std::log(0.75)).epsilon(1e-12));
    CHECK(ctc_brute_force(logits, {0}, 1) == doctest::Approx(loss).epsilon(1e-12));
}

TEST_CASE("unreachable targets raise a distinct error") {
    auto logits = uniform_logits(1, 3);
    CHECK_THROWS_AS(ctc_loss_value(logits, {0, 1}, 2), CtcError);
    // repeated label needs a separating blank
    auto logits3 = uniform_logits(2, 3);
    CHECK_THROWS_AS(ctc_loss_value(logits3, {0, 0}, 2), CtcError);
}

TEST_CASE("one-hot correct logits give loss near zero when T = |target|") {
    Tensor<double> logits(2, 3);
    logits.at(0, 0) = 50.0;
    logits.at(1, 1) = 50.0;
    double loss = ctc_loss_value(logits, {0, 1}, 2);
    CHECK(loss < 1e-9);
}

TEST_CASE("empty target reduces to the all-blank path") {
    auto logits = random_logits(3, 3, 99);
    double expect = 0.0;
    auto lp = ctc_detail::log_softmax(logits);
    for (int t = 0; t < 3; ++t) expect -= lp[t][2];
    CHECK(ctc_loss_value(logits, {}, 2) == doctest::Approx(expect).epsilon(1e-12));
    CHECK(ctc_brute_force(logits, {}, 2) == doctest::Approx(expect).epsilon(1e-10));
}

TEST_CASE("forward recursion equals brute-force enumeration on an exhaustive grid") {
    // T in 1..4, alphabet size 2..3 including blank, |target| in 0..2
    for (std::size_t classes : {2, 3}) {
        int blank = static_cast<int>(classes) - 1;
        std::vector<std::vector<int>> targets{{}};
        for (int a = 0; a < blank; ++a) {
            targets.push_back({a});
            for (int b = 0; b < blank; ++b) targets.push_back({a, b});
        }
        for (std::size_t frames = 1; frames <= 4; ++frames)
            for (const auto& target : targets) {
                if (frames < ctc_detail::min_frames(target)) continue;
                for (std::uint64_t seed = 0; seed < 3; ++seed) {
                    auto logits = random_logits(frames, classes, 1000 + seed * 17 + frames);
                    double fast = ctc_loss_value(logits, target, blank);
                    double slow = ctc_brute_force(logits, target, blank);
                    CHECK(std::abs(fast - slow) < 1e-9);
                }
            }
    }
}

TEST_CASE("ctc loss is non-negative") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto logits = random_logits(5, 4, 300 + seed);
        double loss = ctc_loss_value(logits, {0, 2}, 3);
        CHECK(loss >= -1e-12);
    }
}

TEST_CASE("ctc gradient matches finite differences") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        ParamStore<double> ps;
        auto& p = ps.create("logits", 5, 4);
        std::mt19937_64 rng(700 + seed);
        fill_uniform(p.value, rng, 1.5);
        std::vector<int> target{0, 2, 0};
        auto build = [&](Graph<double>& g) {
            return ctc_loss_node(g, g.leaf(ps.get("logits")), target, 3);
        };
        auto report = gradient_check<double>(ps, build, 1e-4);
        INFO(report.to_string());
        CHECK(report.max_rel_err < 1e-4);
    }
}

TEST_CASE("greedy decode collapses repeats then drops blanks") {
    auto make = [](const std::vector<int>& argmaxes, int classes) {
        Tensor<double> logits(argmaxes.size(), classes);
        for (std::size_t t = 0; t < argmaxes.size(); ++t) logits.at(t, argmaxes[t]) = 5.0;
        return logits;
    };
    int blank = 2;
    CHECK(ctc_greedy_decode(make({0, 0, 2, 1}, 3), blank) == std::vector<int>{0, 1});
    CHECK(ctc_greedy_decode(make({2, 2, 2}, 3), blank) == std::vector<int>{});
    CHECK(ctc_greedy_decode(make({0, 2, 0}, 3), blank) == std::vector<int>{0, 0});
}

TEST_CASE("greedy decode breaks ties toward the lowest index") {
    Tensor<double> logits(1, 3);  // all equal
    CHECK(ctc_greedy_decode(logits, 2) == std::vector<int>{0});
}
