#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace pvs {

// Corpus-level BLEU-4 statistics; the arithmetic replicates multi-bleu.perl.
struct EvalReport {
    double bleu = 0.0;  // percentage in [0, 100]
    double brevity_penalty = 1.0;
    std::array<double, 4> precisions{};
    std::array<long, 4> matches{};
    std::array<long, 4> totals{};
    long hyp_length = 0;
    long ref_length = 0;
    std::size_t utterances = 0;

    std::string to_text() const;
    std::string to_kv() const;
};

// hypotheses[i] is a token sequence; references[i] is the non-empty set of
// reference token sequences for sentence i. Case-insensitive (ASCII).
EvalReport bleu(const std::vector<std::vector<std::string>>& hypotheses,
                const std::vector<std::vector<std::vector<std::string>>>& references);

std::size_t levenshtein(const std::vector<int>& a, const std::vector<int>& b);
std::size_t levenshtein(const std::vector<std::string>& a, const std::vector<std::string>& b);

// Levenshtein(hyp, ref) / |ref|; reference must be non-empty.
double per(const std::vector<int>& hyp, const std::vector<int>& ref);

// Corpus PER: total edit distance over total reference length.
double corpus_per(const std::vector<std::vector<int>>& hyps,
                  const std::vector<std::vector<int>>& refs);

}  // namespace pvs
