#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace syswatch {

// Attention admissibility patterns.
//
// Dense admits every (query, key) pair. SlidingWindow admits (i,j) iff
// |i - j| <= window, or i < n_global, or j < n_global: a local band plus a
// prefix of global positions that attend to and are attended by everyone
// (position 0 is CLS, so n_global >= 1 keeps the classification read-out
// connected to the whole window). BlockSparse partitions positions into
// blocks of size `block` and admits block pairs (I,J) iff |I - J| <=
// window_blocks, or I < global_blocks, or J < global_blocks, or J is one of
// `random_blocks` seeded draws for row I (excluding blocks already admitted).
//
// Every pattern admits the diagonal, so softmax rows over valid positions
// are never empty.
struct DensePattern {
    bool operator==(const DensePattern&) const = default;
};

struct SlidingWindowPattern {
    int32_t window = 0;    // one-sided radius; >= context saturates to dense
    int32_t n_global = 0;  // leading global positions
    bool operator==(const SlidingWindowPattern&) const = default;
};

struct BlockSparsePattern {
    int32_t block = 1;          // block size
    int32_t window_blocks = 0;  // block-window radius
    int32_t random_blocks = 0;  // random key blocks per query block row
    int32_t global_blocks = 1;  // leading global blocks
    uint64_t seed = 0;          // random-pattern seed
    bool operator==(const BlockSparsePattern&) const = default;
};

using AttentionPattern = std::variant<DensePattern, SlidingWindowPattern, BlockSparsePattern>;

// "dense" | "sliding:w=..,g=.." | "blocksparse:b=..,wb=..,r=..,gb=..[,seed=..]"
std::string to_string(const AttentionPattern& pattern);
AttentionPattern parse_pattern(std::string_view text);

// Throws InvalidPattern for parameters inconsistent with `context`
// (non-positive block size, block > context, global prefix longer than the
// context, negative counts). A sliding window radius >= context is legal and
// simply saturates to dense.
void validate_pattern(const AttentionPattern& pattern, int32_t context);

// Half-open admitted key-column span.
struct ColumnRange {
    int32_t begin = 0;
    int32_t end = 0;
};

// Per-query-row admitted key columns, stored as sorted disjoint ranges so the
// attention kernel touches O(admitted) entries instead of O(C^2). The range
// form also canonicalizes equivalent patterns: a sliding window covering the
// whole context produces the identical row layout as Dense, which makes the
// sparse/dense equivalence exact rather than approximate.
class AttentionMask {
public:
    static AttentionMask build(const AttentionPattern& pattern, int32_t context);

    int32_t context() const { return context_; }
    std::span<const ColumnRange> row(int32_t i) const {
        return {rows_[static_cast<size_t>(i)].data(), rows_[static_cast<size_t>(i)].size()};
    }

    // Admitted (i,j) pairs with both positions < valid_len.
    size_t admitted_pairs(int32_t valid_len) const;

    // Dense boolean form, row-major C×C: true iff the pattern admits (i,j)
    // and i < valid_len and j < valid_len. Rows at or beyond valid_len are
    // all false; softmax only ever runs on rows below valid_len.
    std::vector<uint8_t> dense(int32_t valid_len) const;

private:
    int32_t context_ = 0;
    std::vector<std::vector<ColumnRange>> rows_;
};

// Convenience wrapper matching the mask contract above.
std::vector<uint8_t> build_mask(const AttentionPattern& pattern, int32_t context,
                                int32_t valid_len);

}  // namespace syswatch
