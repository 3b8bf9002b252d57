#pragma once

#include <vector>

#include "uda/data.hpp"
#include "uda/tensor.hpp"

namespace uda::losses {

struct LossWeights {
    double lambda_seg = 1.0;
    double lambda_d = 1.0;
    double lambda_adv = 0.001;
    double lambda_isia = 0.001;
    double lambda_aim = 0.001;
    double beta = 1.0;

    void validate() const;
};

// ---- segmentation cross-entropy ----

struct SegLossResult {
    double loss = 0.0;
    Tensor grad_logits;     // fused softmax+CE gradient
    bool all_ignored = false;
};

// Mean over non-ignored pixels of -log p[label]. Ignored pixels contribute
// nothing; when every pixel is ignored the result is 0 with a warning flag.
SegLossResult seg_cross_entropy(const Tensor& prob, const data::LabelMap& label);

// ---- adversarial pair ----

enum class GenAdvForm {
    saturating,      // minimize -log(1 - D(target)): push target scores toward "source"
    non_saturating,  // minimize -log(D(target))
};

struct AdvLossResult {
    double loss = 0.0;
    Tensor grad_scores;
};

AdvLossResult adv_generator_loss(const Tensor& target_scores, GenAdvForm form = GenAdvForm::saturating);

struct DiscLossResult {
    double loss = 0.0;
    Tensor grad_target;
    Tensor grad_source;
};

// Train D toward D(target)=1 and D(source)=0:
// mean(-log D_t) + mean(-log(1 - D_s)).
DiscLossResult adv_discriminator_loss(const Tensor& target_scores, const Tensor& source_scores);

// ---- class signatures and ISIA ----

// Per-class summary vectors c_i in R^{N_c}: masked mean of the probability
// vector over pixels labelled i. Classes with no pixels are absent.
struct ClassSignatures {
    int num_classes = 0;
    std::vector<std::vector<double>> c;  // c[i] meaningful iff count[i] > 0
    std::vector<int> count;

    bool present(int i) const { return count[i] > 0; }
};

ClassSignatures extract_class_signatures(const Tensor& prob, const data::LabelMap& mask);

// Chain rule from signature gradients back to the probability map; the mask is
// treated as constant.
Tensor scatter_signature_grad(const ClassSignatures& sigs, const data::LabelMap& mask,
                              const std::vector<std::vector<double>>& grad_c);

constexpr double kNormGuard = 1e-12;

// 0.5 + 0.5 * cos(c_i, c_j), in [0,1]. Degenerate norms return 0.5 with zero
// gradient.
double cosine_similarity_norm(const std::vector<double>& ci, const std::vector<double>& cj);

struct IsiaResult {
    double loss = 0.0;
    bool no_copresent = false;
    std::vector<std::vector<double>> grad_sig_s;
    std::vector<std::vector<double>> grad_sig_t;
};

// L1 pull between same-class signatures (classes present in both domains)
// plus beta-weighted cosine push across every ordered pair of distinct
// classes whose operands exist.
IsiaResult isia_loss(const ClassSignatures& sig_s, const ClassSignatures& sig_t, double beta);

// ---- combined objectives ----

struct LossComponents {
    double seg_source = 0.0;
    double seg_target = 0.0;
    double adv = 0.0;
    double disc = 0.0;
    double isia = 0.0;
    double aim = 0.0;
};

double total_loss_init(const LossComponents& parts, const LossWeights& w);
// total_loss_full differs from total_loss_init by exactly lambda_seg * seg_target.
double total_loss_full(const LossComponents& parts, const LossWeights& w);

}  // namespace uda::losses
