#include <doctest.h>

#include <sstream>

#include "syswatch/errors.hpp"
#include "syswatch/rng.hpp"
#include "syswatch/tokenizer.hpp"

using namespace syswatch;

namespace {

SyscallSequence seq_of(std::vector<std::string> names) {
    SyscallSequence s;
    s.syscalls = std::move(names);
    return s;
}

}  // namespace

TEST_CASE("vocabulary assigns ids in first-appearance order") {
    const auto vocab = build_vocabulary({seq_of({"read", "write", "read"})});
    CHECK(vocab.size() == 5);
    CHECK(vocab.id_of("<PAD>") == 0);
    CHECK(vocab.id_of("<UNK>") == 1);
    CHECK(vocab.id_of("<CLS>") == 2);
    CHECK(vocab.id_of("read") == 3);
    CHECK(vocab.id_of("write") == 4);
}

TEST_CASE("vocabulary deduplicates across sequences") {
    const auto vocab =
        build_vocabulary({seq_of({"read", "open"}), seq_of({"open", "read", "close"})});
    CHECK(vocab.size() == 6);
    CHECK(vocab.id_of("open") == 4);
    CHECK(vocab.id_of("close") == 5);
}

TEST_CASE("empty corpus is rejected") {
    CHECK_THROWS_AS(build_vocabulary({}), EmptyCorpus);
    CHECK_THROWS_AS(build_vocabulary({seq_of({})}), EmptyCorpus);
}

TEST_CASE("encode maps names to ids with UNK fallback") {
    const auto vocab = build_vocabulary({seq_of({"read", "write"})});
    CHECK(encode(seq_of({"read", "write"}), vocab) == std::vector<int32_t>{3, 4});
    CHECK(encode(seq_of({"read", "mystery"}), vocab) == std::vector<int32_t>{3, 1});
    CHECK(encode(seq_of({}), vocab).empty());
}

TEST_CASE("encode/decode identity for in-vocabulary names") {
    const auto vocab = build_vocabulary({seq_of({"read", "write", "mmap", "poll"})});
    const auto names = std::vector<std::string>{"poll", "read", "mmap", "mmap", "write"};
    const auto ids = encode(seq_of(names), vocab);
    CHECK(decode(ids, vocab) == names);
}

TEST_CASE("vocabulary serialization round-trips exactly") {
    const auto vocab = build_vocabulary({seq_of({"read", "write", "openat", "clone"})});
    std::stringstream ss;
    vocab.save(ss);
    const auto reloaded = Vocabulary::load(ss);
    CHECK(reloaded.size() == vocab.size());
    CHECK(reloaded.hash() == vocab.hash());
    for (int32_t id = 0; id < vocab.size(); ++id)
        CHECK(reloaded.name_of(id) == vocab.name_of(id));
}

TEST_CASE("windowing tiles a sequence exactly") {
    const std::vector<int32_t> ids = {10, 11, 12, 13, 14, 15};
    const auto windows = make_windows(ids, 4, 3, BehaviorClass::Bashlite, "f");
    REQUIRE(windows.size() == 2);
    CHECK(windows[0].ids == std::vector<int32_t>{Vocabulary::kCls, 10, 11, 12});
    CHECK(windows[1].ids == std::vector<int32_t>{Vocabulary::kCls, 13, 14, 15});
    CHECK(windows[0].valid_len == 4);
    CHECK(windows[1].valid_len == 4);
    CHECK(windows[0].label == BehaviorClass::Bashlite);
    CHECK(windows[0].window_index == 0);
    CHECK(windows[1].window_index == 1);
}

TEST_CASE("short sequences are padded") {
    const std::vector<int32_t> ids = {7, 8};
    const auto windows = make_windows(ids, 4, 3, std::nullopt);
    REQUIRE(windows.size() == 1);
    CHECK(windows[0].ids == std::vector<int32_t>{Vocabulary::kCls, 7, 8, Vocabulary::kPad});
    CHECK(windows[0].valid_len == 3);
}

TEST_CASE("23k syscalls at context 4096 yield six windows") {
    std::vector<int32_t> ids(23000, 3);
    const auto windows = make_windows(ids, 4096, 4095, std::nullopt);
    CHECK(windows.size() == 6);  // ceil(23000 / 4095)
    for (size_t i = 0; i + 1 < windows.size(); ++i) CHECK(windows[i].valid_len == 4096);
    CHECK(windows.back().valid_len == 23000 - 5 * 4095 + 1);
}

TEST_CASE("empty id list gives no windows") {
    CHECK(make_windows({}, 4, 3, std::nullopt).empty());
}

TEST_CASE("windowing validates context and stride") {
    const std::vector<int32_t> ids = {3};
    CHECK_THROWS_AS(make_windows(ids, 1, 1, std::nullopt), InvalidConfig);
    CHECK_THROWS_AS(make_windows(ids, 4, 0, std::nullopt), InvalidConfig);
}

TEST_CASE("lossless coverage at stride = context-1") {
    Rng rng(11);
    for (int trial = 0; trial < 40; ++trial) {
        const auto n = 1 + rng.uniform_index(500);
        const int32_t context = 2 + static_cast<int32_t>(rng.uniform_index(17));
        std::vector<int32_t> ids;
        for (uint64_t i = 0; i < n; ++i)
            ids.push_back(static_cast<int32_t>(3 + rng.uniform_index(50)));

        const auto windows = make_windows(ids, context, context - 1, std::nullopt);

        // Window count: ceil(n / stride).
        const auto stride = static_cast<uint64_t>(context - 1);
        CHECK(windows.size() == (n + stride - 1) / stride);

        // Concatenating the non-CLS, non-PAD payloads reconstructs the input.
        std::vector<int32_t> recovered;
        for (const auto& w : windows) {
            CHECK(w.ids[0] == Vocabulary::kCls);
            CHECK(w.valid_len >= 2);
            for (int32_t t = 1; t < w.valid_len; ++t) recovered.push_back(w.ids[t]);
            for (size_t t = static_cast<size_t>(w.valid_len); t < w.ids.size(); ++t)
                CHECK(w.ids[t] == Vocabulary::kPad);
        }
        CHECK(recovered == ids);
    }
}
