#include "syswatch/trace.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>

#include "syswatch/errors.hpp"

namespace syswatch {

namespace {

bool valid_syscall_name(std::string_view name) {
    if (name.empty()) return false;
    return std::all_of(name.begin(), name.end(), [](unsigned char c) {
        return std::isalnum(c) || c == '_';
    });
}

std::vector<std::string_view> split_fields(std::string_view line, size_t max_fields) {
    std::vector<std::string_view> fields;
    size_t pos = 0;
    while (pos < line.size() && fields.size() < max_fields) {
        while (pos < line.size() && std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
        if (pos >= line.size()) break;
        size_t end = pos;
        while (end < line.size() && !std::isspace(static_cast<unsigned char>(line[end]))) ++end;
        fields.push_back(line.substr(pos, end - pos));
        pos = end;
    }
    return fields;
}

bool is_blank(std::string_view line) {
    return std::all_of(line.begin(), line.end(),
                       [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

const std::array<std::string_view, kNumClasses>& behavior_class_names() {
    static const std::array<std::string_view, kNumClasses> names = {
        "Normal", "Bashlite", "TheTick", "Bdvl", "RansomwarePoC"};
    return names;
}

std::string_view to_string(BehaviorClass c) {
    return behavior_class_names()[static_cast<size_t>(c)];
}

std::optional<BehaviorClass> behavior_class_from_name(std::string_view name) {
    const auto& names = behavior_class_names();
    for (size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return static_cast<BehaviorClass>(i);
    return std::nullopt;
}

RawTraceRecord parse_line(std::string_view line) {
    const auto fields = split_fields(line, 4);
    if (fields.size() < 4)
        throw MalformedLine("expected at least 4 fields, got " +
                            std::to_string(fields.size()));

    RawTraceRecord rec;
    const auto ts = fields[0];
    const auto* ts_end = ts.data() + ts.size();
    auto [p0, ec0] = std::from_chars(ts.data(), ts_end, rec.timestamp);
    if (ec0 != std::errc() || p0 != ts_end || rec.timestamp < 0.0 ||
        !std::isfinite(rec.timestamp))
        throw MalformedLine("bad timestamp '" + std::string(ts) + "'");

    rec.process = std::string(fields[1]);

    const auto pid = fields[2];
    const auto* pid_end = pid.data() + pid.size();
    auto [p1, ec1] = std::from_chars(pid.data(), pid_end, rec.pid);
    if (ec1 != std::errc() || p1 != pid_end || rec.pid < 0)
        throw MalformedLine("bad pid '" + std::string(pid) + "'");

    if (!valid_syscall_name(fields[3]))
        throw MalformedLine("bad syscall name '" + std::string(fields[3]) + "'");
    rec.syscall = std::string(fields[3]);
    return rec;
}

const std::set<std::string>& default_filter_set() {
    static const std::set<std::string> filter = {"nanosleep"};
    return filter;
}

std::vector<std::string> filter_syscalls(std::vector<std::string> syscalls,
                                         const std::set<std::string>& filter) {
    if (filter.empty()) return syscalls;
    std::erase_if(syscalls, [&filter](const std::string& s) { return filter.count(s) > 0; });
    return syscalls;
}

SyscallSequence load_trace_file(const std::filesystem::path& path,
                                std::optional<BehaviorClass> label,
                                const std::set<std::string>& filter, LineErrorPolicy policy,
                                ParseStats* stats) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open trace file: " + path.string());

    SyscallSequence seq;
    seq.label = label;
    seq.source = path.string();

    ParseStats local;
    std::string line;
    while (std::getline(in, line)) {
        ++local.lines;
        if (is_blank(line)) {
            ++local.blank;
            continue;
        }
        RawTraceRecord rec;
        try {
            rec = parse_line(line);
        } catch (const MalformedLine& e) {
            ++local.malformed;
            if (policy == LineErrorPolicy::Abort)
                throw MalformedLine(path.string() + ":" + std::to_string(local.lines) + ": " +
                                    e.what());
            continue;
        }
        ++local.parsed;
        if (filter.count(rec.syscall) > 0) {
            ++local.filtered;
            continue;
        }
        seq.syscalls.push_back(std::move(rec.syscall));
    }
    if (in.bad()) throw IoError("read error on trace file: " + path.string());
    if (stats) *stats = local;

    if (seq.syscalls.empty())
        throw EmptyAfterFiltering("no syscalls left after filtering: " + path.string());
    return seq;
}

std::vector<ManifestEntry> scan_dataset(const std::filesystem::path& root) {
    if (!std::filesystem::is_directory(root))
        throw IoError("dataset root is not a directory: " + root.string());

    std::vector<ManifestEntry> manifest;
    for (const auto& entry : std::filesystem::directory_iterator(root)) {
        if (!entry.is_directory()) continue;
        const std::string dir_name = entry.path().filename().string();
        const auto label = behavior_class_from_name(dir_name);
        if (!label)
            throw UnknownClassDirectory("not a behavior class: " + dir_name);
        for (const auto& file : std::filesystem::recursive_directory_iterator(entry.path())) {
            if (file.is_regular_file())
                manifest.push_back({file.path(), *label});
        }
    }
    std::sort(manifest.begin(), manifest.end(),
              [](const ManifestEntry& a, const ManifestEntry& b) {
                  return a.path.string() < b.path.string();
              });
    return manifest;
}

void write_manifest(const std::vector<ManifestEntry>& manifest, std::ostream& out) {
    for (const auto& entry : manifest)
        out << entry.path.string() << '\t' << to_string(entry.label) << '\n';
}

}  // namespace syswatch
