#include "uda/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "uda/common.hpp"

using nlohmann::json;

namespace uda::cfg {

namespace {

template <typename T>
void read_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }

    RunConfig c;
    if (j.contains("dataset")) {
        const auto& d = j["dataset"];
        read_if(d, "height", c.dataset.height);
        read_if(d, "width", c.dataset.width);
        read_if(d, "num_classes", c.dataset.num_classes);
        read_if(d, "foreground_class_ids", c.dataset.foreground_class_ids);
        read_if(d, "seed", c.dataset.seed);
        read_if(d, "base_noise", c.dataset.base_noise);
        read_if(d, "n_source", c.n_source);
        read_if(d, "n_target", c.n_target);
        if (d.contains("shift")) {
            const auto& s = d["shift"];
            read_if(s, "gain", c.dataset.shift.gain);
            read_if(s, "bias", c.dataset.shift.bias);
            read_if(s, "extra_noise", c.dataset.shift.extra_noise);
            read_if(s, "size_scale", c.dataset.shift.size_scale);
        }
    }
    if (j.contains("model")) {
        const auto& m = j["model"];
        read_if(m, "encoder_channels", c.model.encoder_channels);
        read_if(m, "encoder_strides", c.model.encoder_strides);
        read_if(m, "feature_channels", c.model.feature_channels);
        read_if(m, "discriminator_channels", c.disc_channels);
        read_if(m, "discriminator_leaky_slope", c.disc_leaky_slope);
    }
    if (j.contains("weights")) {
        const auto& w = j["weights"];
        read_if(w, "lambda_seg", c.train.weights.lambda_seg);
        read_if(w, "lambda_d", c.train.weights.lambda_d);
        read_if(w, "lambda_adv", c.train.weights.lambda_adv);
        read_if(w, "lambda_isia", c.train.weights.lambda_isia);
        read_if(w, "lambda_aim", c.train.weights.lambda_aim);
        read_if(w, "beta", c.train.weights.beta);
    }
    if (j.contains("train")) {
        const auto& t = j["train"];
        read_if(t, "init_iters", c.train.init_iters);
        read_if(t, "total_iters", c.train.total_iters);
        read_if(t, "gen_lr", c.train.gen_lr);
        read_if(t, "gen_momentum", c.train.gen_momentum);
        read_if(t, "gen_poly_power", c.train.gen_poly_power);
        read_if(t, "gen_weight_decay", c.train.gen_weight_decay);
        read_if(t, "disc_lr", c.train.disc_lr);
        read_if(t, "disc_beta1", c.train.disc_beta1);
        read_if(t, "disc_beta2", c.train.disc_beta2);
        read_if(t, "disc_weight_decay", c.train.disc_weight_decay);
        read_if(t, "batch_size", c.train.batch_size);
        read_if(t, "tau", c.train.tau);
        read_if(t, "seed", c.train.seed);
        read_if(t, "log_interval", c.train.log_interval);
        read_if(t, "connectivity", c.train.connectivity);
        read_if(t, "min_instance_px", c.train.min_instance_px);
        read_if(t, "bank_capacity", c.train.bank_capacity);
        read_if(t, "aim_warmup_iters", c.train.aim_warmup_iters);
        read_if(t, "max_eta", c.train.max_eta);
        read_if(t, "use_ima", c.train.use_ima);
        if (t.contains("gen_adv_form")) {
            std::string form = t["gen_adv_form"].get<std::string>();
            if (form == "saturating") {
                c.train.gen_adv_form = losses::GenAdvForm::saturating;
            } else if (form == "non_saturating") {
                c.train.gen_adv_form = losses::GenAdvForm::non_saturating;
            } else {
                throw ConfigError("train.gen_adv_form must be 'saturating' or 'non_saturating'");
            }
        }
        read_if(t, "check_isolation", c.train.check_isolation);
    }
    return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json_text(buf.str());
}

std::string RunConfig::to_json_text() const {
    json j;
    j["dataset"] = {
        {"height", dataset.height},
        {"width", dataset.width},
        {"num_classes", dataset.num_classes},
        {"foreground_class_ids", dataset.foreground_class_ids},
        {"seed", dataset.seed},
        {"base_noise", dataset.base_noise},
        {"n_source", n_source},
        {"n_target", n_target},
        {"shift", {{"gain", dataset.shift.gain},
                   {"bias", dataset.shift.bias},
                   {"extra_noise", dataset.shift.extra_noise},
                   {"size_scale", dataset.shift.size_scale}}},
    };
    j["model"] = {
        {"encoder_channels", model.encoder_channels},
        {"encoder_strides", model.encoder_strides},
        {"feature_channels", model.feature_channels},
        {"discriminator_channels", disc_channels},
        {"discriminator_leaky_slope", disc_leaky_slope},
    };
    j["weights"] = {
        {"lambda_seg", train.weights.lambda_seg}, {"lambda_d", train.weights.lambda_d},
        {"lambda_adv", train.weights.lambda_adv}, {"lambda_isia", train.weights.lambda_isia},
        {"lambda_aim", train.weights.lambda_aim}, {"beta", train.weights.beta},
    };
    j["train"] = {
        {"init_iters", train.init_iters},
        {"total_iters", train.total_iters},
        {"gen_lr", train.gen_lr},
        {"gen_momentum", train.gen_momentum},
        {"gen_poly_power", train.gen_poly_power},
        {"gen_weight_decay", train.gen_weight_decay},
        {"disc_lr", train.disc_lr},
        {"disc_beta1", train.disc_beta1},
        {"disc_beta2", train.disc_beta2},
        {"disc_weight_decay", train.disc_weight_decay},
        {"batch_size", train.batch_size},
        {"tau", train.tau},
        {"seed", train.seed},
        {"log_interval", train.log_interval},
        {"connectivity", train.connectivity},
        {"min_instance_px", train.min_instance_px},
        {"bank_capacity", train.bank_capacity},
        {"aim_warmup_iters", train.aim_warmup_iters},
        {"max_eta", train.max_eta},
        {"use_ima", train.use_ima},
        {"gen_adv_form", train.gen_adv_form == losses::GenAdvForm::saturating ? "saturating" : "non_saturating"},
        {"check_isolation", train.check_isolation},
    };
    return j.dump(2);
}

void RunConfig::finalize() {
    dataset.validate();
    model.in_channels = 3;
    model.num_classes = dataset.num_classes;
    model.init_seed = train.seed * 0x9e3779b97f4a7c15ull + 1;
    model.validate();
    train.foreground_ids = dataset.foreground_class_ids;
    train.validate();
    discriminator_config().validate();
    if (n_source < 1 || n_target < 1) throw ConfigError("dataset.n_source/n_target must be >= 1");
}

nn::GeneratorConfig RunConfig::generator_config() const {
    nn::GeneratorConfig g = model;
    g.in_channels = 3;
    g.num_classes = dataset.num_classes;
    g.init_seed = train.seed * 0x9e3779b97f4a7c15ull + 1;
    return g;
}

nn::DiscriminatorConfig RunConfig::discriminator_config() const {
    nn::DiscriminatorConfig d;
    d.in_channels = dataset.num_classes;
    d.channels = disc_channels;
    d.leaky_slope = disc_leaky_slope;
    d.init_seed = train.seed * 0x9e3779b97f4a7c15ull + 2;
    return d;
}

std::uint64_t RunConfig::config_hash() const { return fnv1a(to_json_text()); }

void apply_env_seed_override(RunConfig& config) {
    const char* env = std::getenv("UDA_ALIGN_SEED");
    if (!env || !*env) return;
    char* end = nullptr;
    unsigned long long v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0') throw ConfigError("UDA_ALIGN_SEED must be an unsigned integer");
    config.dataset.seed = v;
    config.train.seed = v;
}

std::string config_keys_help() {
    return
        "Config file keys (JSON):\n"
        "  dataset.height, dataset.width       raster size (default 64x64)\n"
        "  dataset.num_classes                 class count incl. background (default 4)\n"
        "  dataset.foreground_class_ids        instance-matched classes (default [1,2,3])\n"
        "  dataset.seed                        generation seed (default 7)\n"
        "  dataset.base_noise                  texture noise amplitude (default 0.03)\n"
        "  dataset.n_source, dataset.n_target  sample counts (default 400/400)\n"
        "  dataset.shift.gain, .bias           per-channel affine color shift of the target\n"
        "  dataset.shift.extra_noise           extra target noise amplitude\n"
        "  dataset.shift.size_scale            fractional target shape-size change\n"
        "  model.encoder_channels              conv widths (default [8,16,16,16])\n"
        "  model.encoder_strides               conv strides, 1 or 2 (default [2,2,1,1])\n"
        "  model.feature_channels              semantic feature width (default 64)\n"
        "  model.discriminator_channels        conv widths ending in 1 (default [64,128,256,512,1])\n"
        "  model.discriminator_leaky_slope     negative slope (default 0.2)\n"
        "  weights.lambda_seg (1), weights.lambda_d (1), weights.lambda_adv (0.001),\n"
        "  weights.lambda_isia (0.001), weights.lambda_aim (0.001), weights.beta (1.0)\n"
        "  train.init_iters (2000), train.total_iters (6000)\n"
        "  train.gen_lr (2.5e-4), train.gen_momentum (0.9), train.gen_poly_power (0.9),\n"
        "  train.gen_weight_decay (5e-4)\n"
        "  train.disc_lr (5e-5), train.disc_beta1 (0.9), train.disc_beta2 (0.99),\n"
        "  train.disc_weight_decay (5e-4)\n"
        "  train.batch_size (1), train.tau (0.9), train.seed (1), train.log_interval (50)\n"
        "  train.connectivity (4), train.min_instance_px (4), train.bank_capacity (10)\n"
        "  train.aim_warmup_iters (-1 = 10% of stage), train.max_eta (10), train.use_ima (true)\n"
        "  train.gen_adv_form ('saturating' or 'non_saturating'), train.check_isolation (false)\n"
        "Environment: UDA_ALIGN_SEED overrides dataset.seed and train.seed.\n";
}

}  // namespace uda::cfg
