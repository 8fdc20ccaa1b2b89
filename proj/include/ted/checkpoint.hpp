#pragma once

// Checkpoint file: a text manifest (format version, config echo, vocab
// digest, parameter table with byte offsets) followed by the raw parameter
// arrays as little-endian IEEE-754 doubles in manifest order. The vocab
// itself lives next to the checkpoint in a ".vocab" manifest; loading
// verifies its digest against the one recorded here.

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ted/common.hpp"
#include "ted/featurizer.hpp"
#include "ted/policy.hpp"

namespace ted {

constexpr int kCheckpointFormatVersion = 1;
constexpr const char* kManifestEnd = "end_manifest";

inline std::string checkpoint_vocab_path(const std::string& checkpoint_path) {
    return checkpoint_path + ".vocab";
}

namespace detail {

inline void append_le_double(std::string& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
}

inline double read_le_double(const unsigned char* p) {
    std::uint64_t bits = 0;
    for (int b = 7; b >= 0; --b) bits = (bits << 8) | p[b];
    return std::bit_cast<double>(bits);
}

}  // namespace detail

inline std::string checkpoint_to_bytes(const TedModel& model) {
    std::ostringstream manifest;
    manifest << "ted_checkpoint " << kCheckpointFormatVersion << "\n";
    for (const auto& [key, value] : model.config.to_kv())
        manifest << "config " << key << " " << value << "\n";
    manifest << "vocab_digest " << model.vocab.digest() << "\n";
    manifest << "params " << model.params().size() << "\n";
    std::size_t offset = 0;
    for (const auto& [name, tensor] : model.params()) {
        manifest << "param " << name << " " << tensor.rank();
        for (std::size_t d : tensor.shape()) manifest << " " << d;
        manifest << " " << offset << " " << tensor.numel() << "\n";
        offset += tensor.numel() * sizeof(double);
    }
    manifest << kManifestEnd << "\n";

    std::string out = manifest.str();
    out.reserve(out.size() + offset);
    for (const auto& [name, tensor] : model.params())
        for (std::size_t i = 0; i < tensor.numel(); ++i) detail::append_le_double(out, tensor[i]);
    return out;
}

inline void save_checkpoint(const TedModel& model, const std::string& path) {
    {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw DataError("cannot open '" + path + "' for writing");
        const std::string bytes = checkpoint_to_bytes(model);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw DataError("failed writing checkpoint to '" + path + "'");
    }
    save_vocab(model.vocab, checkpoint_vocab_path(path));
}

inline TedModel checkpoint_from_bytes(const std::string& bytes, const FeatureVocab& vocab) {
    const std::string end_tag = std::string(kManifestEnd) + "\n";
    const auto end_pos = bytes.find(end_tag);
    if (end_pos == std::string::npos)
        throw DataError("checkpoint: manifest terminator not found");
    const std::size_t data_start = end_pos + end_tag.size();

    std::istringstream manifest(bytes.substr(0, end_pos));
    std::string line;
    if (!std::getline(manifest, line)) throw DataError("checkpoint: empty manifest");
    {
        std::istringstream h(line);
        std::string tag;
        int version = 0;
        h >> tag >> version;
        if (tag != "ted_checkpoint" || version != kCheckpointFormatVersion)
            throw DataError("checkpoint: unsupported header '" + line + "'");
    }

    TedConfig config;
    std::string vocab_digest;
    struct ParamEntry {
        std::string name;
        std::vector<std::size_t> shape;
        std::size_t offset = 0;
        std::size_t count = 0;
    };
    std::vector<ParamEntry> entries;
    std::size_t declared_params = 0;

    while (std::getline(manifest, line)) {
        std::istringstream h(line);
        std::string tag;
        h >> tag;
        if (tag == "config") {
            std::string key, value;
            h >> key >> value;
            config.set_field(key, value);
        } else if (tag == "vocab_digest") {
            h >> vocab_digest;
        } else if (tag == "params") {
            h >> declared_params;
        } else if (tag == "param") {
            ParamEntry e;
            std::size_t rank = 0;
            h >> e.name >> rank;
            if (rank < 1 || rank > 3) throw DataError("checkpoint: bad rank for " + e.name);
            e.shape.resize(rank);
            for (auto& d : e.shape) h >> d;
            h >> e.offset >> e.count;
            if (!h) throw DataError("checkpoint: malformed param line '" + line + "'");
            entries.push_back(std::move(e));
        } else if (!tag.empty()) {
            throw DataError("checkpoint: unknown manifest line '" + line + "'");
        }
    }
    if (entries.size() != declared_params)
        throw DataError("checkpoint: parameter count mismatch in manifest");
    if (vocab_digest != vocab.digest())
        throw DataError("checkpoint: vocab digest mismatch (expected " + vocab_digest + ", got " +
                        vocab.digest() + ")");

    TedModel model = TedModel::init(config, vocab);
    if (entries.size() != model.params().size())
        throw DataError("checkpoint: config implies a different parameter set");

    const auto* data = reinterpret_cast<const unsigned char*>(bytes.data()) + data_start;
    const std::size_t data_size = bytes.size() - data_start;
    for (const ParamEntry& e : entries) {
        Tensor& target = model.param(e.name);
        if (target.shape() != e.shape)
            throw DataError("checkpoint: shape mismatch for parameter '" + e.name + "'");
        if (e.count != target.numel() || e.offset + e.count * sizeof(double) > data_size)
            throw DataError("checkpoint: data range for '" + e.name + "' out of bounds");
        for (std::size_t i = 0; i < e.count; ++i)
            target[i] = detail::read_le_double(data + e.offset + i * sizeof(double));
        if (!target.all_finite())
            throw DataError("checkpoint: parameter '" + e.name + "' has non-finite values");
    }
    return model;
}

inline TedModel load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    const FeatureVocab vocab = load_vocab(checkpoint_vocab_path(path));
    return checkpoint_from_bytes(buf.str(), vocab);
}

}  // namespace ted
