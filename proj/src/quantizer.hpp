#pragma once

#include <string>
#include <vector>

#include "graph.hpp"
#include "tensor.hpp"

namespace pvs {

// Discrete-token embedding table. Row layout: K phonetic rows labeled with
// IPA symbols, plus one reserved blank row at index K used only as the CTC
// blank logit row. The blank is never a quantization result and never an
// embed target.
struct Codebook {
    std::vector<std::string> labels;  // size K (phonetic only)
    int blank_index = 0;              // == K
    int phonetic_count() const { return blank_index; }
    int total_rows() const { return blank_index + 1; }
};

// Token indices in [0, K) with the originating mel length.
struct TokenSequence {
    std::vector<int> tokens;
    std::size_t source_length_frames = 0;
};

// Labels file: one IPA symbol per line, UTF-8, final line "<blank>".
Codebook load_codebook_labels(const std::string& path);
Codebook codebook_from_labels(const std::vector<std::string>& lines);
std::vector<std::string> split_ws(const std::string& line);
std::string join_ws(const std::vector<std::string>& parts);

// token_i = argmax over non-blank rows of hidden_i . e_row; ties break to the
// lowest row index.
template <typename T>
std::vector<int> quantize_hidden(const Tensor<T>& hidden, const Tensor<T>& embeddings,
                                 int blank_index) {
    require(hidden.cols() == embeddings.cols(), "quantize: width mismatch");
    require(static_cast<std::size_t>(blank_index) < embeddings.rows(), "quantize: bad blank row");
    std::vector<int> tokens(hidden.rows());
    for (std::size_t r = 0; r < hidden.rows(); ++r) {
        int best = -1;
        T best_score = T(0);
        for (int k = 0; k < blank_index; ++k) {
            T dot = T(0);
            for (std::size_t c = 0; c < hidden.cols(); ++c)
                dot += hidden.at(r, c) * embeddings.at(static_cast<std::size_t>(k), c);
            if (best < 0 || dot > best_score) {
                best = k;
                best_score = dot;
            }
        }
        tokens[r] = best;
    }
    return tokens;
}

// Plain lookup (no tape); row i = e[z_i].
template <typename T>
Tensor<T> embed_tokens(const std::vector<int>& tokens, const Tensor<T>& embeddings,
                       int blank_index) {
    Tensor<T> out(tokens.size(), embeddings.cols());
    for (std::size_t r = 0; r < tokens.size(); ++r) {
        require(tokens[r] >= 0 && tokens[r] < blank_index, "embed: token out of range");
        for (std::size_t c = 0; c < embeddings.cols(); ++c)
            out.at(r, c) = embeddings.at(static_cast<std::size_t>(tokens[r]), c);
    }
    return out;
}

std::vector<std::string> tokens_to_symbols(const std::vector<int>& tokens, const Codebook& cb);
std::vector<int> symbols_to_tokens(const std::vector<std::string>& symbols, const Codebook& cb);

}  // namespace pvs
