#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace uda::nn {

// Versioned binary snapshot: named double tensors (network parameters,
// optimizer state, feature bank) plus the training RNG state and iteration.
struct Checkpoint {
    static constexpr std::uint32_t kFormatVersion = 1;

    std::uint64_t config_hash = 0;
    std::uint64_t iteration = 0;
    std::map<std::string, std::vector<double>> tensors;
    std::string rng_state;  // serialized mt19937_64, empty when not applicable
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);

// Throws DataError on malformed files. Config-hash validation is the
// caller's job (it owns the --force decision).
Checkpoint load_checkpoint(const std::string& path);

}  // namespace uda::nn
