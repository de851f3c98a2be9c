#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "syswatch/trace.hpp"

namespace syswatch {

// Deterministic synthetic trace generator. Each class emits a first-order
// Markov stream over the shared vocabulary plus a recurring long-range
// marker pair: the first marker name, then the second one a mean `mean_gap`
// tokens later. Window classifiers that cannot span the gap never see both
// halves of a pair, which is what makes context size matter on this data.
struct MarkerSpec {
    std::string first;
    std::string second;
    double mean_gap = 600.0;
};

struct ClassProfile {
    std::vector<double> transition;  // V x V row-major, rows sum to 1
    MarkerSpec marker;
    std::string process_name;
};

struct GeneratorSpec {
    std::vector<std::string> vocabulary;  // syscall names, nanosleep included
    std::array<ClassProfile, kNumClasses> classes;
    double nanosleep_rate = 0.1;  // expected idle insertions per emitted record
    double rate = 2000.0;         // syscalls per second
    uint64_t seed = 1;

    size_t vocab_size() const { return vocabulary.size(); }

    // Throws InvalidSpec: non-stochastic transition rows, markers outside the
    // vocabulary, non-positive rate.
    void validate() const;
};

nlohmann::json to_json(const GeneratorSpec& spec);
GeneratorSpec generator_spec_from_json(const nlohmann::json& j);

// Built-in five-class template: 43 background syscalls + 5 rare marker names
// + nanosleep. `local_signal` in [0,1] interpolates each class's transition
// matrix between a shared background chain (0: classes differ only through
// their marker pairs) and class-specific heavy syscalls (1: strong local
// statistics).
GeneratorSpec default_generator_spec(double local_signal = 1.0, double marker_gap = 600.0,
                                     double nanosleep_rate = 0.1, double rate = 2000.0,
                                     uint64_t seed = 1);

// One trace file body: round(duration*rate) records in the
// `timestamp process pid syscall` line format with strictly increasing
// timestamps, plus nanosleep insertions on top. Fully determined by
// (spec, cls, duration, file_seed).
std::string generate_file(const GeneratorSpec& spec, BehaviorClass cls,
                          double duration_seconds, uint64_t file_seed);

// Writes the scan_dataset layout (one subdirectory per class); file seeds
// derive from (spec.seed, class, file index). Returns the sorted manifest.
std::vector<ManifestEntry> generate_dataset(const GeneratorSpec& spec,
                                            const std::filesystem::path& out_root,
                                            int files_per_class, double duration_seconds);

}  // namespace syswatch
