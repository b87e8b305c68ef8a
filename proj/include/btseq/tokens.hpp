#pragma once

#include <string>
#include <vector>

#include "btseq/errors.hpp"

namespace btseq {

// Reserved vocabulary ids. PAD positions are masked out of every loss;
// BOS/EOS wrap decoder targets internally and never appear in corpora.
inline constexpr int kPadId = 0;
inline constexpr int kBosId = 1;
inline constexpr int kEosId = 2;
inline constexpr int kUnkId = 3;
inline constexpr int kNumSpecialTokens = 4;

inline const char* special_token_text(int id) {
    switch (id) {
        case kPadId: return "<pad>";
        case kBosId: return "<bos>";
        case kEosId: return "<eos>";
        case kUnkId: return "<unk>";
        default: return nullptr;
    }
}

using TokenSeq = std::vector<int>;

// One (source, target) training example in token ids.
struct PairedExample {
    TokenSeq source;
    TokenSeq target;
};

// A rectangular batch of token ids, padded to the longest row, with a
// 0/1 mask over real tokens.
struct TokenBatch {
    int rows = 0;
    int cols = 0;
    std::vector<int> ids;      // row-major, rows*cols
    std::vector<double> mask;  // row-major, 1.0 on real tokens

    int id_at(int r, int c) const { return ids[static_cast<std::size_t>(r) * cols + c]; }
    double mask_at(int r, int c) const { return mask[static_cast<std::size_t>(r) * cols + c]; }

    double token_count() const {
        double s = 0.0;
        for (double m : mask) s += m;
        return s;
    }

    static TokenBatch from_rows(const std::vector<TokenSeq>& rows_in) {
        TokenBatch b;
        b.rows = static_cast<int>(rows_in.size());
        b.cols = 0;
        for (const TokenSeq& r : rows_in) {
            if (r.empty()) throw InputError("batch: empty sequence");
            b.cols = std::max(b.cols, static_cast<int>(r.size()));
        }
        b.ids.assign(static_cast<std::size_t>(b.rows) * b.cols, kPadId);
        b.mask.assign(static_cast<std::size_t>(b.rows) * b.cols, 0.0);
        for (int r = 0; r < b.rows; ++r)
            for (std::size_t c = 0; c < rows_in[static_cast<std::size_t>(r)].size(); ++c) {
                b.ids[static_cast<std::size_t>(r) * b.cols + c] = rows_in[static_cast<std::size_t>(r)][c];
                b.mask[static_cast<std::size_t>(r) * b.cols + c] = 1.0;
            }
        return b;
    }
};

}  // namespace btseq
