#include "syswatch/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "syswatch/errors.hpp"

namespace syswatch {

namespace {

constexpr char kMagic[4] = {'S', 'W', 'C', 'P'};

template <typename T>
void write_pod(std::ostream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw CheckpointError("truncated checkpoint");
    return value;
}

void write_pattern(std::ostream& out, const AttentionPattern& pattern) {
    if (std::holds_alternative<DensePattern>(pattern)) {
        write_pod<uint8_t>(out, 0);
    } else if (const auto* s = std::get_if<SlidingWindowPattern>(&pattern)) {
        write_pod<uint8_t>(out, 1);
        write_pod<int32_t>(out, s->window);
        write_pod<int32_t>(out, s->n_global);
    } else {
        const auto& b = std::get<BlockSparsePattern>(pattern);
        write_pod<uint8_t>(out, 2);
        write_pod<int32_t>(out, b.block);
        write_pod<int32_t>(out, b.window_blocks);
        write_pod<int32_t>(out, b.random_blocks);
        write_pod<int32_t>(out, b.global_blocks);
        write_pod<uint64_t>(out, b.seed);
    }
}

AttentionPattern read_pattern(std::istream& in) {
    const auto tag = read_pod<uint8_t>(in);
    switch (tag) {
        case 0:
            return DensePattern{};
        case 1: {
            SlidingWindowPattern s;
            s.window = read_pod<int32_t>(in);
            s.n_global = read_pod<int32_t>(in);
            return s;
        }
        case 2: {
            BlockSparsePattern b;
            b.block = read_pod<int32_t>(in);
            b.window_blocks = read_pod<int32_t>(in);
            b.random_blocks = read_pod<int32_t>(in);
            b.global_blocks = read_pod<int32_t>(in);
            b.seed = read_pod<uint64_t>(in);
            return b;
        }
        default:
            throw CheckpointError("unknown attention pattern tag");
    }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ClassifierModel& model,
                     uint64_t vocab_hash) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint: " + path.string());

    out.write(kMagic, sizeof(kMagic));
    write_pod<uint32_t>(out, kCheckpointVersion);

    const auto& cfg = model.config();
    write_pod<int32_t>(out, cfg.context);
    write_pod<int32_t>(out, cfg.vocab_size);
    write_pod<int32_t>(out, cfg.embed_dim);
    write_pod<int32_t>(out, cfg.num_layers);
    write_pod<int32_t>(out, cfg.num_heads);
    write_pod<int32_t>(out, cfg.num_classes);
    write_pod<int32_t>(out, cfg.ffn_dim);
    write_pattern(out, cfg.pattern);
    write_pod<float>(out, cfg.dropout);
    write_pod<uint64_t>(out, cfg.init_seed);
    write_pod<uint64_t>(out, vocab_hash);

    const auto tensors = model.params().tensors();
    write_pod<uint32_t>(out, static_cast<uint32_t>(tensors.size()));
    for (const auto& t : tensors) {
        write_pod<uint32_t>(out, static_cast<uint32_t>(t.name.size()));
        out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
        write_pod<uint64_t>(out, static_cast<uint64_t>(t.size));
        out.write(reinterpret_cast<const char*>(t.data),
                  static_cast<std::streamsize>(sizeof(float)) * t.size);
    }
    if (!out) throw IoError("write error on checkpoint: " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path,
                                 uint64_t expected_vocab_hash) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read checkpoint: " + path.string());

    char magic[4];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw CheckpointError("bad checkpoint magic: " + path.string());
    const auto version = read_pod<uint32_t>(in);
    if (version != kCheckpointVersion)
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version));

    LoadedCheckpoint loaded;
    auto& cfg = loaded.config;
    cfg.context = read_pod<int32_t>(in);
    cfg.vocab_size = read_pod<int32_t>(in);
    cfg.embed_dim = read_pod<int32_t>(in);
    cfg.num_layers = read_pod<int32_t>(in);
    cfg.num_heads = read_pod<int32_t>(in);
    cfg.num_classes = read_pod<int32_t>(in);
    cfg.ffn_dim = read_pod<int32_t>(in);
    cfg.pattern = read_pattern(in);
    cfg.dropout = read_pod<float>(in);
    cfg.init_seed = read_pod<uint64_t>(in);
    try {
        cfg.validate();
    } catch (const Error& e) {
        throw CheckpointError(std::string("invalid stored config: ") + e.what());
    }

    loaded.vocab_hash = read_pod<uint64_t>(in);
    if (expected_vocab_hash != 0 && loaded.vocab_hash != expected_vocab_hash)
        throw VocabMismatch("checkpoint was trained with a different vocabulary");

    loaded.params = nn::NetParams<float>::sized(cfg);
    auto tensors = loaded.params.tensors();
    const auto count = read_pod<uint32_t>(in);
    if (count != tensors.size())
        throw CheckpointError("tensor count mismatch in " + path.string());
    for (auto& t : tensors) {
        const auto name_len = read_pod<uint32_t>(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const auto numel = read_pod<uint64_t>(in);
        if (!in || name != t.name || numel != static_cast<uint64_t>(t.size))
            throw CheckpointError("tensor layout mismatch at '" + name + "'");
        in.read(reinterpret_cast<char*>(t.data),
                static_cast<std::streamsize>(sizeof(float)) * t.size);
        if (!in) throw CheckpointError("truncated tensor data at '" + name + "'");
    }
    return loaded;
}

}  // namespace syswatch
