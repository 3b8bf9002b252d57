#pragma once

#include <cstdint>
#include <string>

#include "uda/data.hpp"
#include "uda/nn/discriminator.hpp"
#include "uda/nn/generator.hpp"
#include "uda/trainer.hpp"

namespace uda::cfg {

// Whole-run configuration: dataset generation, model, loss weights, training.
// Everything is settable from one JSON file; CLI flags and UDA_ALIGN_SEED
// override on top.
struct RunConfig {
    data::DatasetSpec dataset;
    int n_source = 400;
    int n_target = 400;

    nn::GeneratorConfig model;
    std::vector<int> disc_channels{64, 128, 256, 512, 1};
    double disc_leaky_slope = 0.2;

    train::TrainConfig train;

    static RunConfig from_json_text(const std::string& text);
    static RunConfig from_file(const std::string& path);
    std::string to_json_text() const;

    // Derives dependent fields (class counts, foreground ids, init seeds) and
    // validates everything.
    void finalize();

    nn::GeneratorConfig generator_config() const;
    nn::DiscriminatorConfig discriminator_config() const;

    // Hash of the canonical serialization; checkpoints embed it.
    std::uint64_t config_hash() const;
};

void apply_env_seed_override(RunConfig& config);

// One line per documented config key, for --help.
std::string config_keys_help();

}  // namespace uda::cfg
