#include "syswatch/tokenizer.hpp"

#include <fstream>
#include <sstream>

#include "syswatch/errors.hpp"

namespace syswatch {

Vocabulary::Vocabulary() {
    names_ = {std::string(kPadName), std::string(kUnkName), std::string(kClsName)};
    for (size_t i = 0; i < names_.size(); ++i)
        ids_.emplace(names_[i], static_cast<int32_t>(i));
}

int32_t Vocabulary::id_of(std::string_view name) const {
    auto it = ids_.find(std::string(name));
    return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::name_of(int32_t id) const {
    if (id < 0 || id >= size())
        throw LabelOutOfRange("token id out of range: " + std::to_string(id));
    return names_[static_cast<size_t>(id)];
}

bool Vocabulary::contains(std::string_view name) const {
    return ids_.count(std::string(name)) > 0;
}

int32_t Vocabulary::add(std::string_view name) {
    auto it = ids_.find(std::string(name));
    if (it != ids_.end()) return it->second;
    const auto id = static_cast<int32_t>(names_.size());
    names_.emplace_back(name);
    ids_.emplace(names_.back(), id);
    return id;
}

void Vocabulary::save(std::ostream& out) const {
    for (size_t i = 0; i < names_.size(); ++i)
        out << names_[i] << '\t' << i << '\n';
}

Vocabulary Vocabulary::load(std::istream& in) {
    Vocabulary vocab;
    std::string line;
    int32_t expected = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw IoError("vocabulary line missing tab: " + line);
        const std::string name = line.substr(0, tab);
        const int32_t id = static_cast<int32_t>(std::stol(line.substr(tab + 1)));
        if (id != expected)
            throw IoError("vocabulary ids not dense at " + line);
        if (expected >= 3) {
            if (vocab.add(name) != id)
                throw IoError("duplicate vocabulary entry: " + name);
        } else {
            // Reserved rows must match the builtin names.
            if (vocab.names_[static_cast<size_t>(id)] != name)
                throw IoError("unexpected reserved token: " + name);
        }
        ++expected;
    }
    return vocab;
}

void Vocabulary::save_file(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write vocabulary: " + path.string());
    save(out);
}

Vocabulary Vocabulary::load_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read vocabulary: " + path.string());
    return load(in);
}

uint64_t Vocabulary::hash() const {
    std::ostringstream os;
    save(os);
    const std::string bytes = os.str();
    uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a 64
    for (const char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

Vocabulary build_vocabulary(const std::vector<SyscallSequence>& sequences) {
    Vocabulary vocab;
    bool any = false;
    for (const auto& seq : sequences) {
        for (const auto& name : seq.syscalls) {
            vocab.add(name);
            any = true;
        }
    }
    if (!any) throw EmptyCorpus("no syscalls in corpus");
    return vocab;
}

std::vector<int32_t> encode(const SyscallSequence& seq, const Vocabulary& vocab) {
    std::vector<int32_t> ids;
    ids.reserve(seq.syscalls.size());
    for (const auto& name : seq.syscalls) ids.push_back(vocab.id_of(name));
    return ids;
}

std::vector<std::string> decode(std::span<const int32_t> ids, const Vocabulary& vocab) {
    std::vector<std::string> names;
    names.reserve(ids.size());
    for (const auto id : ids) names.push_back(vocab.name_of(id));
    return names;
}

std::vector<TokenWindow> make_windows(std::span<const int32_t> ids, int32_t context,
                                      int32_t stride, std::optional<BehaviorClass> label,
                                      std::string_view source) {
    if (context < 2) throw InvalidConfig("context must be >= 2");
    if (stride < 1) throw InvalidConfig("stride must be >= 1");

    std::vector<TokenWindow> windows;
    const auto n = static_cast<int64_t>(ids.size());
    const int32_t payload = context - 1;
    int32_t index = 0;
    for (int64_t offset = 0; offset < n; offset += stride) {
        TokenWindow w;
        w.ids.assign(static_cast<size_t>(context), Vocabulary::kPad);
        w.ids[0] = Vocabulary::kCls;
        const auto take = static_cast<int32_t>(std::min<int64_t>(payload, n - offset));
        for (int32_t t = 0; t < take; ++t)
            w.ids[static_cast<size_t>(t) + 1] = ids[static_cast<size_t>(offset + t)];
        w.valid_len = take + 1;
        w.label = label;
        w.source = std::string(source);
        w.window_index = index++;
        windows.push_back(std::move(w));
    }
    return windows;
}

}  // namespace syswatch
