#include <doctest.h>

#include <algorithm>

#include "syswatch/errors.hpp"
#include "syswatch/rng.hpp"
#include "syswatch/trace.hpp"
#include "test_util.hpp"

using namespace syswatch;

TEST_CASE("parse_line extracts the four leading fields") {
    const auto rec = parse_line("12.0031 sshd 812 read fd=3");
    CHECK(rec.timestamp == doctest::Approx(12.0031));
    CHECK(rec.process == "sshd");
    CHECK(rec.pid == 812);
    CHECK(rec.syscall == "read");

    const auto minimal = parse_line("0 init 1 execve");
    CHECK(minimal.timestamp == 0.0);
    CHECK(minimal.process == "init");
    CHECK(minimal.pid == 1);
    CHECK(minimal.syscall == "execve");
}

TEST_CASE("parse_line rejects malformed records") {
    CHECK_THROWS_AS(parse_line("abc proc 5 read"), MalformedLine);
    CHECK_THROWS_AS(parse_line("1.0 proc 5"), MalformedLine);
    CHECK_THROWS_AS(parse_line(""), MalformedLine);
    CHECK_THROWS_AS(parse_line("-1.0 proc 5 read"), MalformedLine);
    CHECK_THROWS_AS(parse_line("1.0 proc -5 read"), MalformedLine);
    CHECK_THROWS_AS(parse_line("1.0 proc 5 re@d"), MalformedLine);
    CHECK_THROWS_AS(parse_line("1.0 proc x5 read"), MalformedLine);
}

namespace {

std::string trace_text(const std::vector<std::string>& names) {
    std::string out;
    double t = 0.0;
    for (const auto& n : names) {
        t += 0.01;
        out += std::to_string(t) + " proc 42 " + n + "\n";
    }
    return out;
}

}  // namespace

TEST_CASE("load_trace_file filters nanosleep and keeps order") {
    TempDir dir("ingest");
    const auto file = dir.path() / "a.trace";
    write_file(file, trace_text({"read", "nanosleep", "write", "nanosleep", "read"}));

    const auto seq = load_trace_file(file, BehaviorClass::Normal);
    CHECK(seq.syscalls == std::vector<std::string>{"read", "write", "read"});
    CHECK(seq.label == BehaviorClass::Normal);
    CHECK(seq.source == file.string());
}

TEST_CASE("load_trace_file fails when everything is filtered") {
    TempDir dir("ingest");
    const auto file = dir.path() / "idle.trace";
    write_file(file, trace_text({"nanosleep", "nanosleep"}));
    CHECK_THROWS_AS(load_trace_file(file, std::nullopt), EmptyAfterFiltering);
}

TEST_CASE("load_trace_file with an empty filter keeps everything") {
    TempDir dir("ingest");
    const auto file = dir.path() / "all.trace";
    const std::vector<std::string> names = {"read",  "write", "open",  "close", "mmap",
                                            "ioctl", "poll",  "fstat", "brk",   "dup"};
    write_file(file, trace_text(names));
    const auto seq = load_trace_file(file, std::nullopt, {});
    CHECK(seq.syscalls == names);
}

TEST_CASE("load_trace_file honors the strictness policy") {
    TempDir dir("ingest");
    const auto file = dir.path() / "noisy.trace";
    write_file(file, "0.1 proc 1 read\ngarbage line here!\n\n0.2 proc 1 write\n");

    ParseStats stats;
    const auto seq =
        load_trace_file(file, std::nullopt, default_filter_set(), LineErrorPolicy::Skip, &stats);
    CHECK(seq.syscalls == std::vector<std::string>{"read", "write"});
    CHECK(stats.malformed == 1);
    CHECK(stats.blank == 1);
    CHECK(stats.parsed == 2);

    CHECK_THROWS_AS(load_trace_file(file, std::nullopt, default_filter_set(),
                                    LineErrorPolicy::Abort),
                    MalformedLine);
}

TEST_CASE("load_trace_file reports missing files") {
    CHECK_THROWS_AS(load_trace_file("/nonexistent/path/x.trace", std::nullopt), IoError);
}

TEST_CASE("scan_dataset builds a sorted labeled manifest") {
    TempDir dir("scan");
    write_file(dir.path() / "Normal" / "a.trace", "0.1 p 1 read\n");
    write_file(dir.path() / "Bdvl" / "b.trace", "0.1 p 1 write\n");

    const auto manifest = scan_dataset(dir.path());
    REQUIRE(manifest.size() == 2);
    CHECK(manifest[0].label == BehaviorClass::Bdvl);
    CHECK(manifest[0].path.filename() == "b.trace");
    CHECK(manifest[1].label == BehaviorClass::Normal);
    CHECK(manifest[1].path.filename() == "a.trace");
}

TEST_CASE("scan_dataset of an empty root is empty") {
    TempDir dir("scan_empty");
    CHECK(scan_dataset(dir.path()).empty());
}

TEST_CASE("scan_dataset rejects unknown class directories") {
    TempDir dir("scan_bad");
    write_file(dir.path() / "Trojan" / "x.trace", "0.1 p 1 read\n");
    CHECK_THROWS_AS(scan_dataset(dir.path()), UnknownClassDirectory);
}

TEST_CASE("filtering is order-preserving, complete and idempotent") {
    Rng rng(7);
    const std::vector<std::string> pool = {"read",  "write",     "open", "close",
                                           "mmap",  "nanosleep", "poll", "futex",
                                           "ioctl", "epoll_wait"};
    const std::set<std::string> filter = {"nanosleep", "futex"};

    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::string> raw;
        const auto len = rng.uniform_index(200);
        for (uint64_t i = 0; i < len; ++i)
            raw.push_back(pool[rng.uniform_index(pool.size())]);

        const auto filtered = filter_syscalls(raw, filter);

        // Completeness: no filtered name survives.
        for (const auto& name : filtered) CHECK(filter.count(name) == 0);

        // Order preservation: filtered is exactly raw minus the filter set.
        std::vector<std::string> expected;
        for (const auto& name : raw)
            if (filter.count(name) == 0) expected.push_back(name);
        CHECK(filtered == expected);

        // Idempotence.
        CHECK(filter_syscalls(filtered, filter) == filtered);
    }
}

TEST_CASE("behavior class names round-trip") {
    for (const auto name : behavior_class_names()) {
        const auto cls = behavior_class_from_name(name);
        REQUIRE(cls.has_value());
        CHECK(to_string(*cls) == name);
    }
    CHECK(!behavior_class_from_name("Trojan").has_value());
    CHECK(static_cast<int>(BehaviorClass::Normal) == 0);
    CHECK(static_cast<int>(BehaviorClass::RansomwarePoC) == 4);
}
