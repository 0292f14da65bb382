#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "mtil/grad/registry.hpp"

namespace mtil::grad {

// Checkpoint layout: one text header line "mtil-ckpt <version> <count>\n",
// then per parameter: u32 name length, name bytes, u32 rank, u64 dims,
// raw little-endian f32 data. Values are stored as f32 regardless of the
// in-memory scalar type; the f32 round trip is bit-exact.

inline constexpr int kCheckpointVersion = 1;

namespace detail {

template <typename T>
void write_pod(std::ofstream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw IoError("checkpoint: truncated file");
    return v;
}

}  // namespace detail

struct CheckpointEntry {
    Shape shape;
    std::vector<float> values;
};

template <typename S>
void save_checkpoint(const std::string& path,
                     const std::map<std::string, std::pair<Shape, std::vector<S>>>& tensors) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("checkpoint: cannot open for write: " + path);
    os << "mtil-ckpt " << kCheckpointVersion << " " << tensors.size() << "\n";
    for (const auto& [name, sv] : tensors) {
        const auto& [shape, values] = sv;
        detail::write_pod<uint32_t>(os, static_cast<uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        detail::write_pod<uint32_t>(os, static_cast<uint32_t>(shape.size()));
        for (int64_t d : shape) detail::write_pod<uint64_t>(os, static_cast<uint64_t>(d));
        for (S v : values) detail::write_pod<float>(os, static_cast<float>(v));
    }
    if (!os) throw IoError("checkpoint: write failed: " + path);
}

template <typename S>
void save_checkpoint(const std::string& path, const ParamRegistry<S>& params) {
    std::map<std::string, std::pair<Shape, std::vector<S>>> tensors;
    for (const auto& [name, e] : params)
        tensors.emplace(name, std::make_pair(e.tensor.shape(), e.tensor.data()));
    save_checkpoint(path, tensors);
}

inline std::map<std::string, CheckpointEntry> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("checkpoint: cannot open: " + path);
    std::string magic;
    int version = 0;
    size_t count = 0;
    is >> magic >> version >> count;
    if (magic != "mtil-ckpt" || version != kCheckpointVersion)
        throw IoError("checkpoint: bad header in " + path);
    is.get();  // consume '\n'

    std::map<std::string, CheckpointEntry> out;
    for (size_t i = 0; i < count; ++i) {
        const uint32_t name_len = detail::read_pod<uint32_t>(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        const uint32_t rank = detail::read_pod<uint32_t>(is);
        CheckpointEntry e;
        e.shape.resize(rank);
        for (uint32_t r = 0; r < rank; ++r)
            e.shape[r] = static_cast<int64_t>(detail::read_pod<uint64_t>(is));
        e.values.resize(static_cast<size_t>(shape_numel(e.shape)));
        is.read(reinterpret_cast<char*>(e.values.data()),
                static_cast<std::streamsize>(e.values.size() * sizeof(float)));
        if (!is) throw IoError("checkpoint: truncated tensor data in " + path);
        out.emplace(std::move(name), std::move(e));
    }
    return out;
}

// Loads values into an existing registry; every registry entry must be
// present with a matching shape.
template <typename S>
void load_checkpoint_into(const std::string& path, ParamRegistry<S>& params) {
    auto entries = load_checkpoint(path);
    for (auto& [name, e] : params) {
        auto it = entries.find(name);
        if (it == entries.end()) throw DataError("checkpoint: missing parameter " + name);
        if (it->second.shape != e.tensor.shape())
            throw DataError("checkpoint: shape mismatch for " + name);
        auto& dst = e.tensor.data();
        for (size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<S>(it->second.values[i]);
    }
}

}  // namespace mtil::grad
