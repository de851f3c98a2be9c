#pragma once

#include <cstdint>
#include <filesystem>

#include "syswatch/model.hpp"

namespace syswatch {

// Versioned binary container: magic, format version, serialized ModelConfig,
// vocabulary hash, then raw little-endian float32 tensors in declaration
// order. The loader rejects bad magic/version, config inconsistencies and a
// vocabulary-hash mismatch.
inline constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const ClassifierModel& model,
                     uint64_t vocab_hash);

struct LoadedCheckpoint {
    ModelConfig config;
    nn::NetParams<float> params;
    uint64_t vocab_hash = 0;

    ClassifierModel make_model() && {
        return ClassifierModel(config, std::move(params));
    }
};

// Throws CheckpointError on a malformed file. If expected_vocab_hash is
// non-zero, a stored hash differing from it raises VocabMismatch.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path,
                                 uint64_t expected_vocab_hash = 0);

}  // namespace syswatch
