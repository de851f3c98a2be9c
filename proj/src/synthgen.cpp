#include "syswatch/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "syswatch/errors.hpp"
#include "syswatch/rng.hpp"

namespace syswatch {

namespace {

// 43 common background syscalls; the model only ever sees names.
const std::vector<std::string>& background_names() {
    static const std::vector<std::string> names = {
        "read",       "write",      "openat",     "close",      "fstat",
        "lseek",      "mmap",       "mprotect",   "munmap",     "brk",
        "ioctl",      "pread64",    "pwrite64",   "readv",      "writev",
        "poll",       "select",     "sched_yield", "dup",       "getpid",
        "socket",     "connect",    "accept",     "sendto",     "recvfrom",
        "bind",       "listen",     "clone",      "execve",     "wait4",
        "kill",       "uname",      "fcntl",      "getdents64", "getcwd",
        "chdir",      "rename",     "unlink",     "chmod",      "clock_gettime",
        "futex",      "epoll_wait", "getrandom"};
    return names;
}

// Rare names reserved for the long-range class fingerprints.
const std::vector<std::string>& marker_names() {
    static const std::vector<std::string> names = {"kexec_load", "pivot_root", "acct",
                                                   "quotactl", "swapon"};
    return names;
}

// Per-class heavy syscalls (indices into background_names) giving each class
// a local statistical flavor when local_signal > 0.
const std::array<std::vector<size_t>, kNumClasses>& class_heavy_sets() {
    static const std::array<std::vector<size_t>, kNumClasses> sets = {{
        {0, 1, 15, 39, 16, 19},   // Normal: read/write/poll/clock_gettime/select/getpid
        {20, 21, 23, 24, 27, 30}, // Bashlite: socket/connect/sendto/recvfrom/clone/kill
        {28, 27, 29, 22, 18, 32}, // TheTick: execve/clone/wait4/accept/dup/fcntl
        {2, 33, 37, 38, 35, 34},  // Bdvl: openat/getdents64/unlink/chmod/chdir/getcwd
        {2, 36, 11, 12, 42, 3},   // RansomwarePoC: openat/rename/pread64/pwrite64/getrandom/close
    }};
    return sets;
}

int64_t sample_gap(Rng& rng, double mean_gap) {
    return std::max<int64_t>(1, std::llround(rng.uniform(0.85, 1.15) * mean_gap));
}

int64_t sample_pair_delay(Rng& rng, double mean_gap) {
    return std::max<int64_t>(1, std::llround(rng.uniform(0.02, 0.08) * mean_gap));
}

}  // namespace

void GeneratorSpec::validate() const {
    const size_t v = vocabulary.size();
    if (v < 2) throw InvalidSpec("vocabulary needs at least two syscalls");
    if (!(rate > 0.0)) throw InvalidSpec("emission rate must be positive");
    if (!(nanosleep_rate >= 0.0 && nanosleep_rate <= 1.0))
        throw InvalidSpec("nanosleep rate must be in [0,1]");
    for (size_t c = 0; c < kNumClasses; ++c) {
        const auto& profile = classes[c];
        if (profile.transition.size() != v * v)
            throw InvalidSpec("transition matrix must be " + std::to_string(v) + "x" +
                              std::to_string(v));
        for (size_t row = 0; row < v; ++row) {
            double sum = 0.0;
            for (size_t col = 0; col < v; ++col) {
                const double p = profile.transition[row * v + col];
                if (p < 0.0) throw InvalidSpec("negative transition probability");
                sum += p;
            }
            if (std::abs(sum - 1.0) > 1e-9)
                throw InvalidSpec("non-stochastic transition row " + std::to_string(row) +
                                  " for class " +
                                  std::string(to_string(static_cast<BehaviorClass>(c))));
        }
        auto in_vocab = [this](const std::string& name) {
            return std::find(vocabulary.begin(), vocabulary.end(), name) != vocabulary.end();
        };
        if (!in_vocab(profile.marker.first) || !in_vocab(profile.marker.second))
            throw InvalidSpec("marker syscalls must be in the vocabulary");
        if (!(profile.marker.mean_gap > 0.0))
            throw InvalidSpec("marker mean gap must be positive");
        if (profile.process_name.empty()) throw InvalidSpec("process name must be non-empty");
    }
}

GeneratorSpec default_generator_spec(double local_signal, double marker_gap,
                                     double nanosleep_rate, double rate, uint64_t seed) {
    if (!(local_signal >= 0.0 && local_signal <= 1.0))
        throw InvalidSpec("local_signal must be in [0,1]");

    GeneratorSpec spec;
    const auto& background = background_names();
    const auto& markers = marker_names();
    spec.vocabulary = background;
    spec.vocabulary.insert(spec.vocabulary.end(), markers.begin(), markers.end());
    spec.vocabulary.emplace_back("nanosleep");
    spec.nanosleep_rate = nanosleep_rate;
    spec.rate = rate;
    spec.seed = seed;

    const size_t v = spec.vocabulary.size();
    const size_t nb = background.size();

    // Shared background chain: a circulant walk over the background names,
    // so the stationary distribution is uniform on them.
    const std::array<std::pair<size_t, double>, 4> ring = {
        {{1, 0.40}, {2, 0.25}, {3, 0.20}, {5, 0.15}}};

    const std::array<std::string_view, kNumClasses> procs = {
        "rtlsdr_scan", "bashlite", "thetick", "bdvl", "ransom_poc"};

    for (size_t c = 0; c < kNumClasses; ++c) {
        auto& profile = spec.classes[c];
        profile.transition.assign(v * v, 0.0);
        const auto& heavy = class_heavy_sets()[c];
        for (size_t row = 0; row < v; ++row) {
            // Non-background rows (markers, nanosleep) anchor at background 0;
            // the chain never visits them, but every row stays stochastic.
            const size_t anchor = row < nb ? row : 0;
            double* out = profile.transition.data() + row * v;
            for (const auto& [offset, p] : ring)
                out[(anchor + offset) % nb] += (1.0 - local_signal) * p;
            for (const auto target : heavy)
                out[target] += local_signal / static_cast<double>(heavy.size());
        }
        profile.marker.first = markers[c];
        profile.marker.second = markers[(c + 1) % kNumClasses];
        profile.marker.mean_gap = marker_gap;
        profile.process_name = std::string(procs[c]);
    }
    spec.validate();
    return spec;
}

nlohmann::json to_json(const GeneratorSpec& spec) {
    nlohmann::json classes = nlohmann::json::array();
    const size_t v = spec.vocabulary.size();
    for (size_t c = 0; c < kNumClasses; ++c) {
        const auto& profile = spec.classes[c];
        nlohmann::json rows = nlohmann::json::array();
        for (size_t row = 0; row < v; ++row)
            rows.push_back(std::vector<double>(
                profile.transition.begin() + static_cast<int64_t>(row * v),
                profile.transition.begin() + static_cast<int64_t>((row + 1) * v)));
        classes.push_back({{"class", std::string(to_string(static_cast<BehaviorClass>(c)))},
                           {"transition", rows},
                           {"marker",
                            {{"first", profile.marker.first},
                             {"second", profile.marker.second},
                             {"mean_gap", profile.marker.mean_gap}}},
                           {"process_name", profile.process_name}});
    }
    return nlohmann::json{{"vocabulary", spec.vocabulary},
                          {"classes", classes},
                          {"nanosleep_rate", spec.nanosleep_rate},
                          {"rate", spec.rate},
                          {"seed", spec.seed}};
}

GeneratorSpec generator_spec_from_json(const nlohmann::json& j) {
    GeneratorSpec spec;
    try {
        spec.vocabulary = j.at("vocabulary").get<std::vector<std::string>>();
        spec.nanosleep_rate = j.at("nanosleep_rate").get<double>();
        spec.rate = j.at("rate").get<double>();
        spec.seed = j.at("seed").get<uint64_t>();
        const auto& classes = j.at("classes");
        if (classes.size() != kNumClasses)
            throw InvalidSpec("expected " + std::to_string(kNumClasses) + " classes");
        for (size_t c = 0; c < kNumClasses; ++c) {
            const auto& jc = classes[c];
            auto& profile = spec.classes[c];
            for (const auto& row : jc.at("transition")) {
                const auto values = row.get<std::vector<double>>();
                profile.transition.insert(profile.transition.end(), values.begin(),
                                          values.end());
            }
            profile.marker.first = jc.at("marker").at("first").get<std::string>();
            profile.marker.second = jc.at("marker").at("second").get<std::string>();
            profile.marker.mean_gap = jc.at("marker").at("mean_gap").get<double>();
            profile.process_name = jc.at("process_name").get<std::string>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw InvalidSpec(std::string("bad generator config: ") + e.what());
    }
    spec.validate();
    return spec;
}

std::string generate_file(const GeneratorSpec& spec, BehaviorClass cls,
                          double duration_seconds, uint64_t file_seed) {
    spec.validate();
    if (!(duration_seconds > 0.0)) throw InvalidSpec("duration must be positive");

    const auto& profile = spec.classes[static_cast<size_t>(cls)];
    const size_t v = spec.vocabulary.size();
    const auto count = static_cast<int64_t>(std::llround(duration_seconds * spec.rate));

    // Row CDFs for the Markov sampling.
    std::vector<double> cdf(v * v);
    for (size_t row = 0; row < v; ++row) {
        double cum = 0.0;
        for (size_t col = 0; col < v; ++col) {
            cum += profile.transition[row * v + col];
            cdf[row * v + col] = cum;
        }
        cdf[row * v + v - 1] = 1.0;  // guard against rounding
    }

    Rng rng(file_seed);
    const int64_t pid = 400 + static_cast<int64_t>(rng.uniform_index(5000));
    size_t state = static_cast<size_t>(rng.uniform_index(v));

    const double mean_gap = profile.marker.mean_gap;
    int64_t next_first = sample_pair_delay(rng, mean_gap);
    int64_t next_second = -1;

    const double base_dt = 1.0 / spec.rate;
    double t = 0.0;
    std::string out;
    out.reserve(static_cast<size_t>(count) * 40);
    char line[192];

    auto emit = [&](const std::string& name) {
        const int len = std::snprintf(line, sizeof(line), "%.6f %s %lld %s\n", t,
                                      profile.process_name.c_str(),
                                      static_cast<long long>(pid), name.c_str());
        out.append(line, static_cast<size_t>(len));
    };

    for (int64_t i = 0; i < count; ++i) {
        t += base_dt * rng.uniform(0.5, 1.5);
        if (i == next_second) {
            emit(profile.marker.second);
            next_first = i + sample_pair_delay(rng, mean_gap);
            next_second = -1;
        } else if (i == next_first) {
            emit(profile.marker.first);
            next_second = i + sample_gap(rng, mean_gap);
            next_first = -1;
        } else {
            const double u = rng.uniform();
            const double* row = cdf.data() + state * v;
            state = static_cast<size_t>(std::lower_bound(row, row + v, u) - row);
            if (state >= v) state = v - 1;
            emit(spec.vocabulary[state]);
        }
        if (rng.uniform() < spec.nanosleep_rate) {
            t += base_dt * rng.uniform(0.1, 0.5);
            emit("nanosleep");
        }
    }
    return out;
}

std::vector<ManifestEntry> generate_dataset(const GeneratorSpec& spec,
                                            const std::filesystem::path& out_root,
                                            int files_per_class, double duration_seconds) {
    spec.validate();
    if (files_per_class < 1) throw InvalidSpec("files_per_class must be >= 1");

    std::error_code ec;
    std::filesystem::create_directories(out_root, ec);
    if (ec) throw IoError("cannot create " + out_root.string() + ": " + ec.message());

    for (size_t c = 0; c < kNumClasses; ++c) {
        const auto cls = static_cast<BehaviorClass>(c);
        const auto dir = out_root / std::string(to_string(cls));
        std::filesystem::create_directories(dir, ec);
        if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
        for (int f = 0; f < files_per_class; ++f) {
            const uint64_t file_seed =
                Rng::mix(Rng::mix(spec.seed, static_cast<uint64_t>(c)),
                         static_cast<uint64_t>(f));
            char name[32];
            std::snprintf(name, sizeof(name), "trace_%04d.log", f);
            std::ofstream out(dir / name, std::ios::binary);
            if (!out) throw IoError("cannot write " + (dir / name).string());
            out << generate_file(spec, cls, duration_seconds, file_seed);
            if (!out) throw IoError("write error on " + (dir / name).string());
        }
    }
    return scan_dataset(out_root);
}

}  // namespace syswatch
