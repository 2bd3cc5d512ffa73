#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>

#include "evalkit.hpp"
#include "quantizer.hpp"

using namespace pvs;

namespace {

std::vector<std::string> toks(const std::string& line) { return split_ws(line); }

}  // namespace

TEST_CASE("identical hypothesis and single reference scores 100") {
    std::vector<std::vector<std::string>> hyp{toks("the quick brown fox jumps"),
                                              toks("over the lazy dog today")};
    std::vector<std::vector<std::vector<std::string>>> refs{{hyp[0]}, {hyp[1]}};
    EvalReport rep = bleu(hyp, refs);
    CHECK(rep.bleu == doctest::Approx(100.0).epsilon(1e-9));
    CHECK(rep.brevity_penalty == 1.0);
}

TEST_CASE("clipped counts: 'the the the the' against 'the cat sat'") {
    // unigram matches clipped to 1 of 4; no higher-order matches -> BLEU 0
    std::vector<std::vector<std::string>> hyp{toks("the the the the")};
    std::vector<std::vector<std::vector<std::string>>> refs{{toks("the cat sat")}};
    EvalReport rep = bleu(hyp, refs);
    CHECK(rep.matches[0] == 1);
    CHECK(rep.totals[0] == 4);
    CHECK(rep.precisions[0] == doctest::Approx(0.25).epsilon(1e-9));
    CHECK(rep.matches[1] == 0);
    CHECK(rep.bleu == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("worked example: half-matching bigrams with brevity penalty") {
    // hyp: "a b c d", ref: "a b c d e".
    // p1 = 4/4, p2 = 3/3, p3 = 2/2, p4 = 1/1, BP = exp(1 - 5/4).
    std::vector<std::vector<std::string>> hyp{toks("a b c d")};
    std::vector<std::vector<std::vector<std::string>>> refs{{toks("a b c d e")}};
    EvalReport rep = bleu(hyp, refs);
    double expect = 100.0 * std::exp(1.0 - 5.0 / 4.0);
    CHECK(rep.bleu == doctest::Approx(expect).epsilon(1e-6));
}

TEST_CASE("multi-reference: matching any one reference exactly scores 100") {
    std::vector<std::vector<std::string>> hyp{toks("w x y z w")};
    std::vector<std::vector<std::vector<std::string>>> refs{
        {toks("completely different words here now"), toks("w x y z w"),
         toks("another unrelated reference line here")}};
    EvalReport rep = bleu(hyp, refs);
    CHECK(rep.bleu == doctest::Approx(100.0).epsilon(1e-9));
}

TEST_CASE("bleu is case insensitive") {
    std::vector<std::vector<std::string>> hyp{toks("The Quick Brown Fox")};
    std::vector<std::vector<std::vector<std::string>>> refs{{toks("the quick brown fox")}};
    CHECK(bleu(hyp, refs).bleu == doctest::Approx(100.0).epsilon(1e-9));
}

TEST_CASE("bleu is invariant under corpus permutation") {
    std::vector<std::vector<std::string>> hyp{toks("a b c d"), toks("e f g h i"),
                                              toks("j k l m n o")};
    std::vector<std::vector<std::vector<std::string>>> refs{
        {toks("a b c d x")}, {toks("e f g h j")}, {toks("j k l m n o p")}};
    double base = bleu(hyp, refs).bleu;
    std::vector<std::size_t> order{2, 0, 1};
    std::vector<std::vector<std::string>> hyp2;
    std::vector<std::vector<std::vector<std::string>>> refs2;
    for (auto i : order) {
        hyp2.push_back(hyp[i]);
        refs2.push_back(refs[i]);
    }
    CHECK(bleu(hyp2, refs2).bleu == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("empty hypothesis corpus scores zero without dividing by zero") {
    std::vector<std::vector<std::string>> hyp{{}};
    std::vector<std::vector<std::vector<std::string>>> refs{{toks("a b c")}};
    EvalReport rep = bleu(hyp, refs);
    CHECK(rep.bleu == 0.0);
}

TEST_CASE("report text and kv forms carry the counts") {
    std::vector<std::vector<std::string>> hyp{toks("a b c d")};
    std::vector<std::vector<std::vector<std::string>>> refs{{toks("a b c d")}};
    EvalReport rep = bleu(hyp, refs);
    CHECK(rep.to_text().find("BLEU = 100.00") != std::string::npos);
    CHECK(rep.to_kv().find("bleu = 100") != std::string::npos);
    CHECK(rep.to_kv().find("match_4 = 1") != std::string::npos);
}

TEST_CASE("per: identical sequences score zero") {
    CHECK(per({1, 2, 3}, {1, 2, 3}) == 0.0);
}

TEST_CASE("per: one substitution in three") {
    // dp table oracle for [a,x,c] vs [a,b,c]: single substitution
    CHECK(per({0, 9, 2}, {0, 1, 2}) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("per: empty hypothesis equals 1.0 (all deletions)") {
    CHECK(per({}, {4, 5, 6, 7}) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS(per({1}, {}));
}

TEST_CASE("levenshtein is symmetric; per normalizes by the reference only") {
    std::vector<int> a{1, 2, 3, 4}, b{1, 3, 4};
    CHECK(levenshtein(a, b) == levenshtein(b, a));
    CHECK(per(a, b) == doctest::Approx(1.0 / 3.0));
    CHECK(per(b, a) == doctest::Approx(1.0 / 4.0));
}

TEST_CASE("corpus per pools edits over pooled reference length") {
    std::vector<std::vector<int>> hyps{{1, 2}, {3}};
    std::vector<std::vector<int>> refs{{1, 2, 3}, {3}};
    CHECK(corpus_per(hyps, refs) == doctest::Approx(1.0 / 4.0).epsilon(1e-12));
}
