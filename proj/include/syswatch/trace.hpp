#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace syswatch {

inline constexpr int kNumClasses = 5;

// Closed set of device behaviors; ordinal values are stable and used as
// class indices throughout (directories, labels, model outputs).
enum class BehaviorClass : uint8_t {
    Normal = 0,
    Bashlite = 1,
    TheTick = 2,
    Bdvl = 3,
    RansomwarePoC = 4,
};

const std::array<std::string_view, kNumClasses>& behavior_class_names();
std::string_view to_string(BehaviorClass c);
std::optional<BehaviorClass> behavior_class_from_name(std::string_view name);

// One parsed trace line: `timestamp process pid syscall [args...]`.
// Trailing fields (call arguments, return values) are discarded at parse time.
struct RawTraceRecord {
    double timestamp = 0.0;
    std::string process;
    int64_t pid = 0;
    std::string syscall;
};

struct SyscallSequence {
    std::vector<std::string> syscalls;
    std::optional<BehaviorClass> label;
    std::string source;
};

// Malformed-line strictness: Skip counts and drops bad lines, Abort throws
// MalformedLine on the first one.
enum class LineErrorPolicy { Skip, Abort };

struct ParseStats {
    size_t lines = 0;
    size_t parsed = 0;
    size_t malformed = 0;
    size_t blank = 0;
    size_t filtered = 0;
};

// Parses one record. Throws MalformedLine on fewer than four fields,
// a non-numeric/negative timestamp or pid, or a syscall name outside
// [A-Za-z0-9_]+.
RawTraceRecord parse_line(std::string_view line);

// Default filter: idle-loop noise only.
const std::set<std::string>& default_filter_set();

// Removes every member of `filter` from `syscalls`, preserving order.
std::vector<std::string> filter_syscalls(std::vector<std::string> syscalls,
                                         const std::set<std::string>& filter);

// Reads a trace file into an ordered, filtered syscall sequence. Blank lines
// are ignored; malformed lines follow `policy`. Throws IoError if the file
// cannot be read and EmptyAfterFiltering if no syscalls remain.
SyscallSequence load_trace_file(const std::filesystem::path& path,
                                std::optional<BehaviorClass> label,
                                const std::set<std::string>& filter = default_filter_set(),
                                LineErrorPolicy policy = LineErrorPolicy::Skip,
                                ParseStats* stats = nullptr);

struct ManifestEntry {
    std::filesystem::path path;
    BehaviorClass label;
};

// Walks `root`, expecting one subdirectory per behavior class; returns the
// (file, label) manifest sorted lexicographically by path. Throws
// UnknownClassDirectory for a subdirectory that is not a class name.
std::vector<ManifestEntry> scan_dataset(const std::filesystem::path& root);

// Text manifest, one `path<TAB>class` line per entry.
void write_manifest(const std::vector<ManifestEntry>& manifest, std::ostream& out);

}  // namespace syswatch
