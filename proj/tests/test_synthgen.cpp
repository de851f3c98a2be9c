#include <doctest.h>

#include <cmath>
#include <sstream>

#include "syswatch/errors.hpp"
#include "syswatch/synthgen.hpp"
#include "syswatch/trace.hpp"
#include "test_util.hpp"

using namespace syswatch;

namespace {

struct ParsedTrace {
    std::vector<std::string> names;  // every record, nanosleep included
    std::vector<double> timestamps;
};

ParsedTrace parse_trace(const std::string& text) {
    ParsedTrace out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const auto rec = parse_line(line);
        out.names.push_back(rec.syscall);
        out.timestamps.push_back(rec.timestamp);
    }
    return out;
}

// Chain-only spec over a small vocabulary: ring transitions, markers pushed
// far beyond the stream length so they never fire.
GeneratorSpec ring_spec(size_t v) {
    GeneratorSpec spec;
    for (size_t i = 0; i < v; ++i) spec.vocabulary.push_back("sc_" + std::to_string(i));
    spec.nanosleep_rate = 0.0;
    spec.rate = 2000.0;
    spec.seed = 5;
    for (size_t c = 0; c < kNumClasses; ++c) {
        auto& profile = spec.classes[c];
        profile.transition.assign(v * v, 0.0);
        for (size_t row = 0; row < v; ++row) {
            profile.transition[row * v + (row + 1) % v] = 0.40;
            profile.transition[row * v + (row + 2) % v] = 0.30;
            profile.transition[row * v + (row + 4) % v] = 0.30;
        }
        profile.marker = {"sc_0", "sc_1", 1e9};
        profile.process_name = "proc";
    }
    spec.validate();
    return spec;
}

}  // namespace

TEST_CASE("record count equals duration times rate") {
    auto spec = default_generator_spec();
    spec.nanosleep_rate = 0.0;
    const auto text = generate_file(spec, BehaviorClass::Normal, 10.0, 42);
    const auto parsed = parse_trace(text);
    CHECK(parsed.names.size() == 20000);

    // The file cadence of roughly 23k syscalls comes from a 2.3k/s rate.
    spec.rate = 2300.0;
    const auto big = generate_file(spec, BehaviorClass::Bdvl, 10.0, 42);
    CHECK(parse_trace(big).names.size() == 23000);
}

TEST_CASE("nanosleep insertions ride on top of the base records") {
    auto spec = default_generator_spec();
    spec.nanosleep_rate = 0.1;
    const auto parsed = parse_trace(generate_file(spec, BehaviorClass::TheTick, 10.0, 7));
    size_t idle = 0;
    for (const auto& n : parsed.names) idle += n == "nanosleep" ? 1 : 0;
    CHECK(parsed.names.size() - idle == 20000);
    const double fraction = static_cast<double>(idle) / 20000.0;
    CHECK(std::abs(fraction - 0.1) <= 0.01);  // within 10% relative
}

TEST_CASE("generation is deterministic in the seed") {
    const auto spec = default_generator_spec();
    const auto a = generate_file(spec, BehaviorClass::Bashlite, 2.0, 99);
    const auto b = generate_file(spec, BehaviorClass::Bashlite, 2.0, 99);
    CHECK(a == b);
    const auto c = generate_file(spec, BehaviorClass::Bashlite, 2.0, 100);
    CHECK(a != c);
}

TEST_CASE("timestamps increase strictly and records parse") {
    const auto spec = default_generator_spec();
    const auto parsed = parse_trace(generate_file(spec, BehaviorClass::RansomwarePoC, 1.0, 3));
    for (size_t i = 1; i < parsed.timestamps.size(); ++i)
        CHECK(parsed.timestamps[i] > parsed.timestamps[i - 1]);
}

TEST_CASE("non-stochastic matrices are rejected") {
    auto spec = default_generator_spec();
    spec.classes[2].transition[5] += 0.25;
    CHECK_THROWS_AS(spec.validate(), InvalidSpec);

    auto negative = default_generator_spec();
    negative.classes[0].transition[0] = -0.1;
    CHECK_THROWS_AS(negative.validate(), InvalidSpec);

    CHECK_THROWS_AS(generate_file(default_generator_spec(), BehaviorClass::Normal, 0.0, 1),
                    InvalidSpec);
}

TEST_CASE("generator spec JSON round-trips") {
    const auto spec = default_generator_spec(0.3, 450.0, 0.05, 1500.0, 17);
    const auto j = to_json(spec);
    const auto back = generator_spec_from_json(j);
    CHECK(back.vocabulary == spec.vocabulary);
    CHECK(back.rate == spec.rate);
    CHECK(back.seed == spec.seed);
    CHECK(back.nanosleep_rate == spec.nanosleep_rate);
    for (size_t c = 0; c < kNumClasses; ++c) {
        CHECK(back.classes[c].transition == spec.classes[c].transition);
        CHECK(back.classes[c].marker.first == spec.classes[c].marker.first);
        CHECK(back.classes[c].marker.mean_gap == spec.classes[c].marker.mean_gap);
    }
}

TEST_CASE("generate_dataset writes the scan_dataset layout") {
    TempDir dir("synth");
    const auto spec = default_generator_spec();
    const auto manifest = generate_dataset(spec, dir.path(), 3, 0.05);
    CHECK(manifest.size() == 15);

    std::array<int, kNumClasses> per_class{};
    for (const auto& entry : manifest) ++per_class[static_cast<size_t>(entry.label)];
    for (const auto count : per_class) CHECK(count == 3);

    // Distinct seeds produce distinct traces, identical layout.
    TempDir dir2("synth2");
    auto spec2 = spec;
    spec2.seed = spec.seed + 1;
    const auto manifest2 = generate_dataset(spec2, dir2.path(), 3, 0.05);
    CHECK(manifest2.size() == manifest.size());
    std::ifstream f1(manifest[0].path), f2(manifest2[0].path);
    const std::string c1((std::istreambuf_iterator<char>(f1)), {});
    const std::string c2((std::istreambuf_iterator<char>(f2)), {});
    CHECK(c1 != c2);
}

TEST_CASE("empirical transition frequencies converge to the spec matrix") {
    const size_t v = 12;
    const auto spec = ring_spec(v);
    const auto parsed = parse_trace(generate_file(spec, BehaviorClass::Normal, 50.0, 1234));
    REQUIRE(parsed.names.size() == 100000);

    std::vector<size_t> ids;
    ids.reserve(parsed.names.size());
    for (const auto& n : parsed.names) {
        const auto pos = std::find(spec.vocabulary.begin(), spec.vocabulary.end(), n);
        REQUIRE(pos != spec.vocabulary.end());
        ids.push_back(static_cast<size_t>(pos - spec.vocabulary.begin()));
    }

    std::vector<double> counts(v * v, 0.0);
    std::vector<double> visits(v, 0.0);
    for (size_t i = 1; i < ids.size(); ++i) {
        counts[ids[i - 1] * v + ids[i]] += 1.0;
        visits[ids[i - 1]] += 1.0;
    }
    const auto& expected = spec.classes[0].transition;
    for (size_t row = 0; row < v; ++row) {
        REQUIRE(visits[row] > 0);
        double tv = 0.0;
        for (size_t col = 0; col < v; ++col)
            tv += std::abs(counts[row * v + col] / visits[row] - expected[row * v + col]);
        CHECK(tv / 2.0 <= 0.02);
    }
}

TEST_CASE("marker pairs separate long windows from short ones") {
    // local_signal 0 so only markers distinguish classes; gap G = 600.
    const double gap = 600.0;
    auto spec = default_generator_spec(0.0, gap);
    spec.nanosleep_rate = 0.0;
    const auto cls = BehaviorClass::Bdvl;
    const auto& marker = spec.classes[static_cast<size_t>(cls)].marker;
    const auto parsed = parse_trace(generate_file(spec, cls, 50.0, 2024));
    const auto n = static_cast<int64_t>(parsed.names.size());

    // Pair up each first-marker with the following second-marker.
    std::vector<std::pair<int64_t, int64_t>> pairs;
    int64_t pending_first = -1;
    for (int64_t i = 0; i < n; ++i) {
        if (parsed.names[static_cast<size_t>(i)] == marker.first)
            pending_first = i;
        else if (parsed.names[static_cast<size_t>(i)] == marker.second && pending_first >= 0) {
            pairs.emplace_back(pending_first, i);
            pending_first = -1;
        }
    }
    REQUIRE(pairs.size() > 50);

    // Mean realized gap tracks the configured one.
    double mean_gap = 0;
    for (const auto& [a, b] : pairs) mean_gap += static_cast<double>(b - a);
    mean_gap /= static_cast<double>(pairs.size());
    CHECK(mean_gap == doctest::Approx(gap).epsilon(0.1));

    // Fraction of window offsets containing a complete pair, by interval
    // union: window [s, s+C) holds pair (a,b) iff s <= a and b < s+C.
    const auto containment = [&](int64_t window) {
        const int64_t offsets = n - window + 1;
        std::vector<std::pair<int64_t, int64_t>> intervals;
        for (const auto& [a, b] : pairs) {
            const int64_t lo = std::max<int64_t>(0, b - window + 1);
            if (lo > a) continue;
            intervals.emplace_back(lo, std::min(a, offsets - 1));
        }
        std::sort(intervals.begin(), intervals.end());
        int64_t covered = 0, cursor = 0;
        for (const auto& [lo, hi] : intervals) {
            const int64_t from = std::max(lo, cursor);
            if (hi >= from) {
                covered += hi - from + 1;
                cursor = hi + 1;
            }
        }
        return static_cast<double>(covered) / static_cast<double>(offsets);
    };

    CHECK(containment(static_cast<int64_t>(2 * gap)) > 0.9);
    CHECK(containment(static_cast<int64_t>(gap / 2)) < 0.1);
}
