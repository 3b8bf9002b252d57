#include "uda/pipeline.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "uda/image_io.hpp"
#include "uda/style.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace uda::pipeline {

void generate_and_save(const cfg::RunConfig& config, const std::string& out_dir) {
    auto datasets = data::generate_pair_datasets(config.dataset, config.n_source, config.n_target);
    data::save_pair_datasets(out_dir, config.dataset, datasets);
}

LoadedData load_training_data(const cfg::RunConfig& config, const std::string& data_dir) {
    LoadedData out;
    auto id_map = data::identity_id_map(config.dataset.num_classes);
    out.source = data::load_labeled((fs::path(data_dir) / "source" / "images").string(),
                                    (fs::path(data_dir) / "source" / "labels").string(), id_map,
                                    config.dataset.num_classes);
    out.target = data::load_images((fs::path(data_dir) / "target" / "images").string());
    return out;
}

std::vector<data::LabeledSample> prepare_source(const cfg::RunConfig& config, const LoadedData& data) {
    if (!config.train.use_ima) return data.source;
    auto source_stats = style::fit_statistics(data.source);
    auto target_stats = style::fit_statistics(data.target);
    return style::transfer_all(data.source, source_stats, target_stats);
}

namespace {

train::Trainer make_trainer(const cfg::RunConfig& config, const std::string& out_dir) {
    auto tcfg = config.train;
    tcfg.foreground_ids = config.dataset.foreground_class_ids;
    if (tcfg.diagnostics_dir.empty() && !out_dir.empty()) tcfg.diagnostics_dir = out_dir;
    return train::Trainer(config.generator_config(), config.discriminator_config(), tcfg,
                          config.config_hash());
}

void save_pseudo_labels(const std::string& dir, const std::vector<data::UnlabeledSample>& target,
                        const train::PseudoLabelSet& pseudo) {
    std::vector<std::string> ids;
    for (const auto& s : target) ids.push_back(s.id);
    data::save_labels(dir, ids, pseudo.labels);
}

}  // namespace

TrainResult run_training(const cfg::RunConfig& config, const std::string& data_dir,
                         const std::string& out_dir, const std::string& stage,
                         const std::string& resume_path, bool force) {
    if (stage != "1" && stage != "2" && stage != "all")
        throw UsageError("--stage must be 1, 2 or all (got '" + stage + "')");

    LoadedData raw = load_training_data(config, data_dir);
    auto source = prepare_source(config, raw);

    fs::create_directories(fs::path(out_dir) / "checkpoints");
    std::ofstream metrics(fs::path(out_dir) / "metrics.jsonl", std::ios::app);
    if (!metrics) throw DataError("cannot open metrics log under " + out_dir);

    train::Trainer trainer = make_trainer(config, out_dir);
    trainer.set_metrics_sink(
        [&metrics](const train::MetricsRow& row) { metrics << train::metrics_row_to_json(row) << "\n"; });

    TrainResult result;
    const std::string step1_path = (fs::path(out_dir) / "checkpoints" / "M_step1.ckpt").string();
    const std::string step2_path = (fs::path(out_dir) / "checkpoints" / "M_step2.ckpt").string();

    if (stage == "1" || stage == "all") {
        if (!resume_path.empty()) trainer.from_checkpoint(nn::load_checkpoint(resume_path), force);
        trainer.train_stage1(source, raw.target);
        nn::save_checkpoint(step1_path, trainer.to_checkpoint());
        result.step1_checkpoint = step1_path;
    }

    if (stage == "2" || stage == "all") {
        if (stage == "2") {
            std::string from = resume_path.empty() ? step1_path : resume_path;
            if (!fs::exists(from))
                throw ConfigError("stage 2 needs a stage-1 checkpoint; pass --resume or run --stage 1 first");
            trainer.from_checkpoint(nn::load_checkpoint(from), force);
        }
        auto pseudo = trainer.generate_pseudo_labels(raw.target, config.train.tau);
        save_pseudo_labels((fs::path(out_dir) / "pseudo_labels").string(), raw.target, pseudo);
        result.pseudo_coverage = pseudo.overall_coverage;

        trainer.train_stage2(source, raw.target, pseudo);
        nn::save_checkpoint(step2_path, trainer.to_checkpoint());
        result.step2_checkpoint = step2_path;
    }

    result.isolation_violations = trainer.isolation_violations();
    return result;
}

EvalOutcome evaluate_checkpoint(const cfg::RunConfig& config, const std::string& ckpt_path,
                                const std::string& data_dir, nn::Domain domain, bool force) {
    auto id_map = data::identity_id_map(config.dataset.num_classes);
    auto samples = data::load_labeled((fs::path(data_dir) / "images").string(),
                                      (fs::path(data_dir) / "labels").string(), id_map,
                                      config.dataset.num_classes);

    train::Trainer trainer = make_trainer(config, "");
    trainer.from_checkpoint(nn::load_checkpoint(ckpt_path), force);

    eval::ConfusionMatrix cm(config.dataset.num_classes);
    for (const auto& s : samples)
        eval::accumulate_confusion(cm, trainer.predict(s.image, domain), s.label);

    EvalOutcome out;
    out.iou = eval::iou_per_class(cm);
    out.num_samples = static_cast<int>(samples.size());
    return out;
}

void write_eval_report(const std::string& out_dir, const EvalOutcome& outcome, bool per_class,
                       const double* nam_so, const double* nam_to) {
    fs::create_directories(out_dir);

    json j;
    j["miou_pct"] = outcome.miou_pct();
    j["num_samples"] = outcome.num_samples;
    if (per_class) {
        json classes = json::array();
        for (std::size_t k = 0; k < outcome.iou.per_class.size(); ++k) {
            json row = {{"class", k}, {"valid", static_cast<bool>(outcome.iou.valid[k])}};
            if (outcome.iou.valid[k]) row["iou_pct"] = outcome.iou.per_class[k] * 100.0;
            classes.push_back(row);
        }
        j["per_class"] = classes;
        j["excluded_classes"] = outcome.iou.excluded;
    }

    char line[128];
    std::string text;
    std::snprintf(line, sizeof(line), "mIoU: %.4f%% over %d samples\n", outcome.miou_pct(),
                  outcome.num_samples);
    text += line;
    if (per_class) {
        for (std::size_t k = 0; k < outcome.iou.per_class.size(); ++k) {
            if (outcome.iou.valid[k])
                std::snprintf(line, sizeof(line), "class %zu IoU: %.4f%%\n", k,
                              outcome.iou.per_class[k] * 100.0);
            else
                std::snprintf(line, sizeof(line), "class %zu IoU: excluded (zero union)\n", k);
            text += line;
        }
    }
    if (nam_so && nam_to) {
        double nam_value = eval::nam(*nam_so, outcome.miou_pct(), *nam_to);
        j["nam_pct"] = nam_value;
        j["nam_so"] = *nam_so;
        j["nam_to"] = *nam_to;
        std::snprintf(line, sizeof(line), "NAM: %.1f%% (SO=%.4f, TO=%.4f)\n", nam_value, *nam_so,
                      *nam_to);
        text += line;
    }

    std::ofstream jf(fs::path(out_dir) / "report.json");
    jf << j.dump(2) << "\n";
    std::ofstream tf(fs::path(out_dir) / "report.txt");
    tf << text;
}

}  // namespace uda::pipeline
