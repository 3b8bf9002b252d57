#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "uda/data.hpp"
#include "uda/instances.hpp"
#include "uda/losses.hpp"
#include "uda/nn/checkpoint.hpp"
#include "uda/nn/discriminator.hpp"
#include "uda/nn/generator.hpp"
#include "uda/optim.hpp"

namespace uda::train {

struct TrainConfig {
    std::uint64_t init_iters = 2000;
    std::uint64_t total_iters = 6000;

    losses::LossWeights weights;

    double gen_lr = 2.5e-4;
    double gen_momentum = 0.9;
    double gen_poly_power = 0.9;
    double gen_weight_decay = 5e-4;

    double disc_lr = 5e-5;
    double disc_beta1 = 0.9;
    double disc_beta2 = 0.99;
    double disc_weight_decay = 5e-4;

    int batch_size = 1;
    double tau = 0.9;  // pseudo-label confidence threshold
    std::uint64_t seed = 1;
    std::uint64_t log_interval = 50;

    std::vector<int> foreground_ids{1, 2, 3};
    int connectivity = 4;
    int min_instance_px = 4;
    int bank_capacity = 10;
    std::int64_t aim_warmup_iters = -1;  // -1 -> 10% of the stage length
    // Applied cap on the per-class matching weights. The raw eta ratio blows
    // up when class distances cluster near convergence (its denominator is
    // their spread), so the step that consumes it clamps.
    double max_eta = 10.0;

    bool use_ima = true;  // style transfer, applied by the pipeline before training
    losses::GenAdvForm gen_adv_form = losses::GenAdvForm::saturating;

    bool check_isolation = false;    // hash-compare parameters around each sub-step
    std::string diagnostics_dir;     // where a non-finite-loss dump lands

    void validate() const;
    std::uint64_t effective_warmup(std::uint64_t stage_len) const;
};

struct PseudoLabelSet {
    std::vector<data::LabelMap> labels;  // index-aligned with the target set
    std::vector<double> coverage;
    double overall_coverage = 0.0;
};

struct MetricsRow {
    std::uint64_t iter = 0;
    double seg_s = 0.0, seg_t = 0.0, adv = 0.0, disc = 0.0, isia = 0.0, aim = 0.0;
    double total = 0.0;
    double lr_g = 0.0;
    std::map<int, double> eta;
};

std::string metrics_row_to_json(const MetricsRow& row);
MetricsRow metrics_row_from_json(const std::string& line);

// Owns the networks, optimizers, feature bank and the training RNG. Stage 1
// covers iterations [0, init_iters); stage 2 continues to total_iters with
// the extra pseudo-label segmentation term and pseudo-label target masks.
class Trainer {
public:
    Trainer(const nn::GeneratorConfig& gen_cfg, const nn::DiscriminatorConfig& disc_cfg,
            const TrainConfig& cfg, std::uint64_t config_hash);

    void set_metrics_sink(std::function<void(const MetricsRow&)> sink) { sink_ = std::move(sink); }

    void train_stage1(const std::vector<data::LabeledSample>& source,
                      const std::vector<data::UnlabeledSample>& target);
    void train_stage2(const std::vector<data::LabeledSample>& source,
                      const std::vector<data::UnlabeledSample>& target, const PseudoLabelSet& pseudo);

    // Pseudo-labels come from the source branch: it is the only decoder with
    // direct label supervision after stage 1, and style transfer has already
    // pulled its training inputs toward target appearance.
    PseudoLabelSet generate_pseudo_labels(const std::vector<data::UnlabeledSample>& target, double tau,
                                          nn::Domain branch = nn::Domain::source) const;

    // Inference helpers on the frozen current parameters.
    Tensor predict_prob(const Tensor& image, nn::Domain domain) const;
    data::LabelMap predict(const Tensor& image, nn::Domain domain) const;

    nn::Checkpoint to_checkpoint() const;
    void from_checkpoint(const nn::Checkpoint& ckpt, bool force = false);

    std::uint64_t iteration() const { return iter_; }
    std::uint64_t generator_param_hash() const;
    std::uint64_t discriminator_param_hash() const;
    std::uint64_t isolation_violations() const { return isolation_violations_; }
    const TrainConfig& config() const { return cfg_; }
    nn::Generator& generator() { return gen_; }

private:
    void run_stage(int stage, const std::vector<data::LabeledSample>& source,
                   const std::vector<data::UnlabeledSample>& target, const PseudoLabelSet* pseudo,
                   std::uint64_t until_iter);
    void abort_non_finite(const losses::LossComponents& parts, std::uint64_t iter) const;

    TrainConfig cfg_;
    std::uint64_t config_hash_;
    nn::Generator gen_;
    nn::Discriminator disc_;
    optim::SgdMomentum gen_opt_;
    optim::Adam disc_opt_;
    instances::FeatureBank bank_;
    Rng rng_;
    std::uint64_t iter_ = 0;
    std::uint64_t isolation_violations_ = 0;
    std::function<void(const MetricsRow&)> sink_;
};

}  // namespace uda::train
