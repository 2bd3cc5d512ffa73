#pragma once

#include <algorithm>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "tensor.hpp"

namespace pvs {

// One training/eval item: mel features plus optional phoneme labels
// (written-language items) and an optional transcript (toy references).
struct Utterance {
    std::string id;
    Tensor<float> mel;
    std::vector<int> phonemes;  // empty for unwritten speech
    std::vector<std::string> transcript_words;
};

// Deterministic epoch stream: a seeded shuffle per epoch, independent of
// consumer count. Sampling with replacement across epochs is realized by
// cycling reshuffles.
class IndexStream {
public:
    IndexStream(std::size_t n, std::uint64_t seed) : n_(n), rng_(seed) { refill(); }

    std::size_t next() {
        if (pos_ == order_.size()) refill();
        return order_[pos_++];
    }

private:
    void refill() {
        order_.resize(n_);
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        std::shuffle(order_.begin(), order_.end(), rng_);
        pos_ = 0;
    }
    std::size_t n_;
    std::mt19937_64 rng_;
    std::vector<std::size_t> order_;
    std::size_t pos_ = 0;
};

// Pull indices until the frame budget is met (always at least one).
template <typename GetFrames>
std::vector<std::size_t> fill_batch(IndexStream& stream, long budget_frames,
                                    const GetFrames& frames_of) {
    std::vector<std::size_t> batch;
    long frames = 0;
    while (frames < budget_frames || batch.empty()) {
        std::size_t idx = stream.next();
        batch.push_back(idx);
        frames += static_cast<long>(frames_of(idx));
        if (batch.size() > 4096) break;  // guard against zero-length corpora entries
    }
    return batch;
}

}  // namespace pvs
