#pragma once

#include <string>
#include <vector>

#include "uda/config.hpp"
#include "uda/eval.hpp"
#include "uda/trainer.hpp"

namespace uda::pipeline {

// Generates the paired benchmark and writes the module-`data` layout plus
// manifest.json under out_dir.
void generate_and_save(const cfg::RunConfig& config, const std::string& out_dir);

struct LoadedData {
    std::vector<data::LabeledSample> source;
    std::vector<data::UnlabeledSample> target;
};

// Expects <data_dir>/source/{images,labels} and <data_dir>/target/images.
// Target labels on disk are never read here.
LoadedData load_training_data(const cfg::RunConfig& config, const std::string& data_dir);

// Style transfer toward target statistics when train.use_ima is set,
// otherwise a pass-through copy.
std::vector<data::LabeledSample> prepare_source(const cfg::RunConfig& config, const LoadedData& data);

struct TrainResult {
    std::string step1_checkpoint;  // empty if the stage did not run
    std::string step2_checkpoint;
    double pseudo_coverage = -1.0;
    std::uint64_t isolation_violations = 0;
};

// stage is "1", "2" or "all". Outputs land under out_dir: checkpoints/,
// pseudo_labels/, metrics.jsonl.
TrainResult run_training(const cfg::RunConfig& config, const std::string& data_dir,
                         const std::string& out_dir, const std::string& stage,
                         const std::string& resume_path, bool force);

struct EvalOutcome {
    eval::IouReport iou;
    int num_samples = 0;
    double miou_pct() const { return iou.miou * 100.0; }
};

// Evaluates a checkpoint on <data_dir>/{images,labels} through the chosen
// decoder branch.
EvalOutcome evaluate_checkpoint(const cfg::RunConfig& config, const std::string& ckpt_path,
                                const std::string& data_dir, nn::Domain domain, bool force);

// Writes report.txt / report.json under out_dir; NAM baselines optional.
void write_eval_report(const std::string& out_dir, const EvalOutcome& outcome, bool per_class,
                       const double* nam_so, const double* nam_to);

}  // namespace uda::pipeline
