#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "syswatch/trace.hpp"

namespace syswatch {

// Closed syscall-name vocabulary: one token per syscall, ids dense in
// [0, size). Ids 0..2 are reserved; real syscalls start at 3 and are numbered
// by first appearance in the corpus so builds are deterministic.
class Vocabulary {
public:
    static constexpr int32_t kPad = 0;
    static constexpr int32_t kUnk = 1;
    static constexpr int32_t kCls = 2;
    static constexpr std::string_view kPadName = "<PAD>";
    static constexpr std::string_view kUnkName = "<UNK>";
    static constexpr std::string_view kClsName = "<CLS>";

    Vocabulary();

    // UNK for names outside the vocabulary.
    int32_t id_of(std::string_view name) const;
    const std::string& name_of(int32_t id) const;
    bool contains(std::string_view name) const;
    int32_t size() const { return static_cast<int32_t>(names_.size()); }

    // Adds a name if unseen; returns its id either way.
    int32_t add(std::string_view name);

    // Text format: `token<TAB>id` lines, reserved tokens first. Round-trips
    // exactly; hash() is FNV-1a64 over this serialized form.
    void save(std::ostream& out) const;
    static Vocabulary load(std::istream& in);
    void save_file(const std::filesystem::path& path) const;
    static Vocabulary load_file(const std::filesystem::path& path);
    uint64_t hash() const;

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, int32_t> ids_;
};

// Builds a vocabulary over a corpus in first-appearance order.
// Throws EmptyCorpus if no sequence contributes a syscall.
Vocabulary build_vocabulary(const std::vector<SyscallSequence>& sequences);

std::vector<int32_t> encode(const SyscallSequence& seq, const Vocabulary& vocab);
std::vector<std::string> decode(std::span<const int32_t> ids, const Vocabulary& vocab);

// Fixed-length model input: ids[0] is CLS, positions >= valid_len are PAD.
struct TokenWindow {
    std::vector<int32_t> ids;
    int32_t valid_len = 0;
    std::optional<BehaviorClass> label;
    std::string source;
    int32_t window_index = 0;

    int32_t context() const { return static_cast<int32_t>(ids.size()); }
};

// Cuts an encoded sequence into windows starting at offsets 0, stride,
// 2*stride, ...: each is [CLS] + up to context-1 ids, PAD-filled. A final
// partial window is emitted when it holds at least one real token. Requires
// context >= 2 and stride >= 1.
std::vector<TokenWindow> make_windows(std::span<const int32_t> ids, int32_t context,
                                      int32_t stride, std::optional<BehaviorClass> label,
                                      std::string_view source = {});

}  // namespace syswatch
