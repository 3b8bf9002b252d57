#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "uda/common.hpp"
#include "uda/config.hpp"
#include "uda/pipeline.hpp"

namespace {

struct SeedOverride {
    bool set = false;
    std::uint64_t value = 0;
};

uda::cfg::RunConfig load_config(const std::string& path, const SeedOverride& seed) {
    auto config = uda::cfg::RunConfig::from_file(path);
    if (seed.set) {
        config.dataset.seed = seed.value;
        config.train.seed = seed.value;
    }
    uda::cfg::apply_env_seed_override(config);
    config.finalize();
    return config;
}

int run_gen_data(const std::string& config_path, const std::string& out_dir, const SeedOverride& seed) {
    auto config = load_config(config_path, seed);
    uda::pipeline::generate_and_save(config, out_dir);
    std::printf("wrote %d source + %d target samples to %s\n", config.n_source, config.n_target,
                out_dir.c_str());
    return 0;
}

int run_train(const std::string& config_path, const std::string& data_dir, const std::string& out_dir,
              const std::string& stage, const std::string& resume, bool force, const SeedOverride& seed) {
    auto config = load_config(config_path, seed);
    auto result = uda::pipeline::run_training(config, data_dir, out_dir, stage, resume, force);
    if (!result.step1_checkpoint.empty())
        std::printf("stage 1 checkpoint: %s\n", result.step1_checkpoint.c_str());
    if (result.pseudo_coverage >= 0.0)
        std::printf("pseudo-label coverage: %.4f\n", result.pseudo_coverage);
    if (!result.step2_checkpoint.empty())
        std::printf("stage 2 checkpoint: %s\n", result.step2_checkpoint.c_str());
    return 0;
}

int run_eval(const std::string& config_path, const std::string& ckpt, const std::string& data_dir,
             const std::string& out_dir, bool per_class, const std::string& nam_arg,
             const std::string& domain_arg, bool force, const SeedOverride& seed) {
    auto config = load_config(config_path, seed);
    auto domain = domain_arg == "source" ? uda::nn::Domain::source : uda::nn::Domain::target;

    auto outcome = uda::pipeline::evaluate_checkpoint(config, ckpt, data_dir, domain, force);
    std::printf("mIoU: %.4f%%\n", outcome.miou_pct());

    double so = 0.0, to = 0.0;
    bool have_nam = false;
    if (!nam_arg.empty()) {
        if (std::sscanf(nam_arg.c_str(), "%lf,%lf", &so, &to) != 2)
            throw uda::UsageError("--nam expects 'SO,TO' (two comma-separated mIoU percentages)");
        have_nam = true;
        std::printf("NAM: %.1f%%\n", uda::eval::nam(so, outcome.miou_pct(), to));
    }
    uda::pipeline::write_eval_report(out_dir, outcome, per_class, have_nam ? &so : nullptr,
                                     have_nam ? &to : nullptr);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"uda-align: domain-adaptive segmentation workbench (generate, train, evaluate)"};
    app.require_subcommand(1);
    app.footer(uda::cfg::config_keys_help());

    std::string config_path, data_dir, out_dir, resume, stage = "all";
    std::string ckpt, nam_arg, domain_arg = "target";
    bool force = false, per_class = false;
    SeedOverride seed;
    std::uint64_t seed_value = 0;

    auto add_seed = [&](CLI::App* cmd) {
        cmd->add_option("--seed", seed_value, "override dataset and training seeds")
            ->each([&](const std::string& s) {
                seed.set = true;
                seed.value = std::stoull(s);
            });
    };

    auto* gen = app.add_subcommand("gen-data", "generate the paired synthetic benchmark");
    gen->add_option("--config", config_path, "JSON config file")->required();
    gen->add_option("--out", out_dir, "output dataset directory")->required();
    add_seed(gen);

    auto* train = app.add_subcommand("train", "run the two-stage adaptation loop");
    train->add_option("--config", config_path, "JSON config file")->required();
    train->add_option("--data", data_dir, "dataset directory from gen-data")->required();
    train->add_option("--out", out_dir, "run directory (checkpoints/, pseudo_labels/, metrics.jsonl)")
        ->required();
    train->add_option("--stage", stage, "1, 2 or all")->default_val("all");
    train->add_option("--resume", resume, "checkpoint to resume from");
    train->add_flag("--force", force, "ignore checkpoint config-hash mismatch");
    add_seed(train);

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a labeled directory");
    eval_cmd->add_option("--config", config_path, "JSON config file")->required();
    eval_cmd->add_option("--ckpt", ckpt, "checkpoint file")->required();
    eval_cmd->add_option("--data", data_dir, "directory holding images/ and labels/")->required();
    eval_cmd->add_option("--out", out_dir, "report directory (report.txt, report.json)")->required();
    eval_cmd->add_flag("--per-class", per_class, "include per-class IoU columns");
    eval_cmd->add_option("--nam", nam_arg, "source-only,target-only mIoU baselines, e.g. 46.8,78.4");
    eval_cmd->add_option("--domain", domain_arg, "decoder branch: source or target")->default_val("target");
    eval_cmd->add_flag("--force", force, "ignore checkpoint config-hash mismatch");
    add_seed(eval_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) return run_gen_data(config_path, out_dir, seed);
        if (train->parsed()) return run_train(config_path, data_dir, out_dir, stage, resume, force, seed);
        if (eval_cmd->parsed())
            return run_eval(config_path, ckpt, data_dir, out_dir, per_class, nam_arg, domain_arg, force,
                            seed);
    } catch (const uda::NumericError& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        if (!e.diagnostic_path.empty()) std::fprintf(stderr, "diagnostics: %s\n", e.diagnostic_path.c_str());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 2;
}
