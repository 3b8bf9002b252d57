#include "uda/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "uda/common.hpp"

namespace uda::nn {

namespace {

constexpr char kMagic[8] = {'U', 'D', 'A', 'C', 'K', 'P', 'T', '\0'};

template <typename T>
void write_pod(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const std::string& path) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw DataError("truncated checkpoint: " + path);
    return v;
}

void write_string(std::ostream& out, const std::string& s) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in, const std::string& path) {
    auto n = read_pod<std::uint32_t>(in, path);
    std::string s(n, '\0');
    in.read(s.data(), n);
    if (!in) throw DataError("truncated checkpoint: " + path);
    return s;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open checkpoint for writing: " + path);

    out.write(kMagic, sizeof(kMagic));
    write_pod<std::uint32_t>(out, Checkpoint::kFormatVersion);
    write_pod<std::uint64_t>(out, ckpt.config_hash);
    write_pod<std::uint64_t>(out, ckpt.iteration);
    write_string(out, ckpt.rng_state);
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
    for (const auto& [name, values] : ckpt.tensors) {
        write_string(out, name);
        write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(values.size()));
        out.write(reinterpret_cast<const char*>(values.data()),
                  static_cast<std::streamsize>(values.size() * sizeof(double)));
    }
    if (!out) throw DataError("short write on checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);

    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw DataError("not a checkpoint file: " + path);

    auto version = read_pod<std::uint32_t>(in, path);
    if (version != Checkpoint::kFormatVersion)
        throw DataError("unsupported checkpoint format version " + std::to_string(version) + ": " + path);

    Checkpoint ckpt;
    ckpt.config_hash = read_pod<std::uint64_t>(in, path);
    ckpt.iteration = read_pod<std::uint64_t>(in, path);
    ckpt.rng_state = read_string(in, path);
    auto count = read_pod<std::uint32_t>(in, path);
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name = read_string(in, path);
        auto n = read_pod<std::uint64_t>(in, path);
        std::vector<double> values(n);
        in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(n * sizeof(double)));
        if (!in) throw DataError("truncated checkpoint: " + path);
        ckpt.tensors.emplace(std::move(name), std::move(values));
    }
    return ckpt;
}

}  // namespace uda::nn
