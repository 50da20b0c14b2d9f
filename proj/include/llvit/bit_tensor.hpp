#pragma once

#include <cstdint>
#include <vector>

#include "llvit/errors.hpp"

namespace llvit {

// Packed binary activations: `rows` rows of `width` bits, 64 bits per word,
// LSB-first within a word.
class BitTensor {
   public:
    BitTensor() = default;
    BitTensor(int64_t rows, int64_t width)
        : rows_(rows), width_(width), wpr_((width + 63) / 64),
          words_(static_cast<size_t>(rows * wpr_), 0) {}

    int64_t rows() const { return rows_; }
    int64_t width() const { return width_; }
    int64_t words_per_row() const { return wpr_; }

    bool get(int64_t r, int64_t i) const {
        return (words_[static_cast<size_t>(r * wpr_ + i / 64)] >> (i % 64)) & 1u;
    }
    void set(int64_t r, int64_t i, bool v) {
        uint64_t& w = words_[static_cast<size_t>(r * wpr_ + i / 64)];
        uint64_t mask = 1ULL << (i % 64);
        w = v ? (w | mask) : (w & ~mask);
    }

    const uint64_t* row(int64_t r) const { return words_.data() + r * wpr_; }
    uint64_t* row(int64_t r) { return words_.data() + r * wpr_; }

    int64_t popcount_row(int64_t r) const {
        int64_t c = 0;
        const uint64_t* w = row(r);
        for (int64_t k = 0; k < wpr_; ++k) c += __builtin_popcountll(w[k]);
        return c;
    }

    bool operator==(const BitTensor& other) const {
        return rows_ == other.rows_ && width_ == other.width_ && words_ == other.words_;
    }

   private:
    int64_t rows_ = 0;
    int64_t width_ = 0;
    int64_t wpr_ = 0;
    std::vector<uint64_t> words_;
};

}  // namespace llvit
