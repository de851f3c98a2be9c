#include "syswatch/attention.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "syswatch/errors.hpp"
#include "syswatch/rng.hpp"

namespace syswatch {

namespace {

// Merges sorted, possibly touching ranges into a canonical disjoint list.
std::vector<ColumnRange> merge_ranges(std::vector<ColumnRange> ranges) {
    std::sort(ranges.begin(), ranges.end(),
              [](const ColumnRange& a, const ColumnRange& b) { return a.begin < b.begin; });
    std::vector<ColumnRange> merged;
    for (const auto& r : ranges) {
        if (r.begin >= r.end) continue;
        if (!merged.empty() && r.begin <= merged.back().end)
            merged.back().end = std::max(merged.back().end, r.end);
        else
            merged.push_back(r);
    }
    return merged;
}

int64_t parse_int_field(std::string_view text, std::string_view key) {
    int64_t value = 0;
    const auto* end = text.data() + text.size();
    auto [p, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc() || p != end)
        throw InvalidPattern("bad integer for '" + std::string(key) + "': " + std::string(text));
    return value;
}

}  // namespace

std::string to_string(const AttentionPattern& pattern) {
    if (std::holds_alternative<DensePattern>(pattern)) return "dense";
    if (const auto* s = std::get_if<SlidingWindowPattern>(&pattern))
        return "sliding:w=" + std::to_string(s->window) + ",g=" + std::to_string(s->n_global);
    const auto& b = std::get<BlockSparsePattern>(pattern);
    std::string out = "blocksparse:b=" + std::to_string(b.block) +
                      ",wb=" + std::to_string(b.window_blocks) +
                      ",r=" + std::to_string(b.random_blocks) +
                      ",gb=" + std::to_string(b.global_blocks);
    if (b.seed != 0) out += ",seed=" + std::to_string(b.seed);
    return out;
}

AttentionPattern parse_pattern(std::string_view text) {
    if (text == "dense") return DensePattern{};

    const auto colon = text.find(':');
    const std::string_view kind = text.substr(0, colon);
    std::string_view rest = colon == std::string_view::npos ? "" : text.substr(colon + 1);

    std::vector<std::pair<std::string_view, std::string_view>> kv;
    while (!rest.empty()) {
        const auto comma = rest.find(',');
        const auto item = rest.substr(0, comma);
        const auto eq = item.find('=');
        if (eq == std::string_view::npos)
            throw InvalidPattern("expected key=value in pattern: " + std::string(item));
        kv.emplace_back(item.substr(0, eq), item.substr(eq + 1));
        rest = comma == std::string_view::npos ? "" : rest.substr(comma + 1);
    }
    auto take = [&kv](std::string_view key, int64_t fallback, bool* found = nullptr) {
        for (const auto& [k, v] : kv)
            if (k == key) {
                if (found) *found = true;
                return parse_int_field(v, key);
            }
        if (found) *found = false;
        return fallback;
    };

    if (kind == "sliding") {
        bool has_w = false;
        SlidingWindowPattern p;
        p.window = static_cast<int32_t>(take("w", 0, &has_w));
        p.n_global = static_cast<int32_t>(take("g", 1));
        if (!has_w) throw InvalidPattern("sliding pattern requires w=");
        return p;
    }
    if (kind == "blocksparse") {
        bool has_b = false;
        BlockSparsePattern p;
        p.block = static_cast<int32_t>(take("b", 0, &has_b));
        p.window_blocks = static_cast<int32_t>(take("wb", 1));
        p.random_blocks = static_cast<int32_t>(take("r", 0));
        p.global_blocks = static_cast<int32_t>(take("gb", 1));
        p.seed = static_cast<uint64_t>(take("seed", 0));
        if (!has_b) throw InvalidPattern("blocksparse pattern requires b=");
        return p;
    }
    throw InvalidPattern("unknown attention pattern: " + std::string(text));
}

void validate_pattern(const AttentionPattern& pattern, int32_t context) {
    if (context < 1) throw InvalidPattern("context must be positive");
    if (const auto* s = std::get_if<SlidingWindowPattern>(&pattern)) {
        if (s->window < 0) throw InvalidPattern("sliding window radius must be >= 0");
        if (s->n_global < 0 || s->n_global > context)
            throw InvalidPattern("global prefix must lie within the context");
        return;
    }
    if (const auto* b = std::get_if<BlockSparsePattern>(&pattern)) {
        if (b->block < 1) throw InvalidPattern("block size must be >= 1");
        if (b->block > context) throw InvalidPattern("block size exceeds context");
        const int32_t num_blocks = (context + b->block - 1) / b->block;
        if (b->window_blocks < 0) throw InvalidPattern("window_blocks must be >= 0");
        if (b->random_blocks < 0) throw InvalidPattern("random_blocks must be >= 0");
        if (b->global_blocks < 0 || b->global_blocks > num_blocks)
            throw InvalidPattern("global_blocks must lie within the block grid");
        return;
    }
}

AttentionMask AttentionMask::build(const AttentionPattern& pattern, int32_t context) {
    validate_pattern(pattern, context);
    AttentionMask mask;
    mask.context_ = context;
    mask.rows_.resize(static_cast<size_t>(context));

    if (std::holds_alternative<DensePattern>(pattern)) {
        for (auto& row : mask.rows_) row = {{0, context}};
        return mask;
    }

    if (const auto* s = std::get_if<SlidingWindowPattern>(&pattern)) {
        const int32_t g = std::min(s->n_global, context);
        for (int32_t i = 0; i < context; ++i) {
            if (i < g) {
                mask.rows_[static_cast<size_t>(i)] = {{0, context}};
                continue;
            }
            std::vector<ColumnRange> ranges;
            if (g > 0) ranges.push_back({0, g});
            const int32_t lo = s->window >= context ? 0 : std::max(0, i - s->window);
            const int32_t hi =
                s->window >= context ? context : std::min(context, i + s->window + 1);
            ranges.push_back({lo, hi});
            mask.rows_[static_cast<size_t>(i)] = merge_ranges(std::move(ranges));
        }
        return mask;
    }

    const auto& bp = std::get<BlockSparsePattern>(pattern);
    const int32_t nb = (context + bp.block - 1) / bp.block;
    for (int32_t block_row = 0; block_row < nb; ++block_row) {
        std::vector<ColumnRange> ranges;
        if (block_row < bp.global_blocks) {
            ranges = {{0, context}};
        } else {
            std::vector<uint8_t> admitted(static_cast<size_t>(nb), 0);
            for (int32_t j = std::max(0, block_row - bp.window_blocks);
                 j <= std::min(nb - 1, block_row + bp.window_blocks); ++j)
                admitted[static_cast<size_t>(j)] = 1;
            for (int32_t j = 0; j < std::min(bp.global_blocks, nb); ++j)
                admitted[static_cast<size_t>(j)] = 1;

            // Seeded random key blocks, drawn from the not-yet-admitted set.
            // The draw depends only on (pattern, context, block row).
            std::vector<int32_t> candidates;
            for (int32_t j = 0; j < nb; ++j)
                if (!admitted[static_cast<size_t>(j)]) candidates.push_back(j);
            Rng rng(Rng::mix(bp.seed, static_cast<uint64_t>(block_row)));
            const auto draws =
                std::min<size_t>(static_cast<size_t>(bp.random_blocks), candidates.size());
            for (size_t k = 0; k < draws; ++k) {
                const size_t pick =
                    k + static_cast<size_t>(rng.uniform_index(candidates.size() - k));
                std::swap(candidates[k], candidates[pick]);
                admitted[static_cast<size_t>(candidates[k])] = 1;
            }

            for (int32_t j = 0; j < nb; ++j)
                if (admitted[static_cast<size_t>(j)])
                    ranges.push_back({j * bp.block, std::min(context, (j + 1) * bp.block)});
            ranges = merge_ranges(std::move(ranges));
        }
        const int32_t row_begin = block_row * bp.block;
        const int32_t row_end = std::min(context, (block_row + 1) * bp.block);
        for (int32_t i = row_begin; i < row_end; ++i)
            mask.rows_[static_cast<size_t>(i)] = ranges;
    }
    return mask;
}

size_t AttentionMask::admitted_pairs(int32_t valid_len) const {
    size_t count = 0;
    const int32_t n = std::min(valid_len, context_);
    for (int32_t i = 0; i < n; ++i) {
        for (const auto& r : row(i)) {
            if (r.begin >= n) break;
            count += static_cast<size_t>(std::min(r.end, n) - r.begin);
        }
    }
    return count;
}

std::vector<uint8_t> AttentionMask::dense(int32_t valid_len) const {
    const auto c = static_cast<size_t>(context_);
    std::vector<uint8_t> out(c * c, 0);
    const int32_t n = std::min(valid_len, context_);
    for (int32_t i = 0; i < n; ++i) {
        for (const auto& r : row(i)) {
            if (r.begin >= n) break;
            const int32_t end = std::min(r.end, n);
            std::fill(out.begin() + static_cast<size_t>(i) * c + static_cast<size_t>(r.begin),
                      out.begin() + static_cast<size_t>(i) * c + static_cast<size_t>(end), 1);
        }
    }
    return out;
}

std::vector<uint8_t> build_mask(const AttentionPattern& pattern, int32_t context,
                                int32_t valid_len) {
    return AttentionMask::build(pattern, context).dense(valid_len);
}

}  // namespace syswatch
