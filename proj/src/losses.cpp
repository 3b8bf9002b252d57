#include "uda/losses.hpp"

#include <cmath>

#include "uda/common.hpp"

namespace uda::losses {

void LossWeights::validate() const {
    auto check = [](double v, const char* name) {
        if (v < 0.0 || !std::isfinite(v)) throw ConfigError(std::string("weights.") + name + " must be >= 0");
    };
    check(lambda_seg, "lambda_seg");
    check(lambda_d, "lambda_d");
    check(lambda_adv, "lambda_adv");
    check(lambda_isia, "lambda_isia");
    check(lambda_aim, "lambda_aim");
    check(beta, "beta");
}

SegLossResult seg_cross_entropy(const Tensor& prob, const data::LabelMap& label) {
    if (prob.h != label.h || prob.w != label.w)
        throw UsageError("seg_cross_entropy: probability/label shape mismatch");

    const int plane = prob.plane();
    int valid = 0;
    for (std::size_t i = 0; i < label.size(); ++i)
        if (label.grid[i] != label.ignore_index) ++valid;

    SegLossResult res;
    res.grad_logits = Tensor(prob.c, prob.h, prob.w);
    if (valid == 0) {
        res.all_ignored = true;
        return res;
    }

    const double inv_m = 1.0 / valid;
    double loss = 0.0;
    for (int i = 0; i < plane; ++i) {
        int y = label.grid[i];
        if (y == label.ignore_index) continue;
        loss -= std::log(prob.data[static_cast<std::size_t>(y) * plane + i]);
        for (int c = 0; c < prob.c; ++c) {
            std::size_t idx = static_cast<std::size_t>(c) * plane + i;
            res.grad_logits.data[idx] = (prob.data[idx] - (c == y ? 1.0 : 0.0)) * inv_m;
        }
    }
    res.loss = loss * inv_m;
    return res;
}

AdvLossResult adv_generator_loss(const Tensor& scores, GenAdvForm form) {
    AdvLossResult res;
    res.grad_scores = Tensor(scores.c, scores.h, scores.w);
    const double inv_m = 1.0 / static_cast<double>(scores.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        double d = scores.data[i];
        if (form == GenAdvForm::saturating) {
            loss -= std::log(1.0 - d);
            res.grad_scores.data[i] = inv_m / (1.0 - d);
        } else {
            loss -= std::log(d);
            res.grad_scores.data[i] = -inv_m / d;
        }
    }
    res.loss = loss * inv_m;
    return res;
}

DiscLossResult adv_discriminator_loss(const Tensor& target_scores, const Tensor& source_scores) {
    DiscLossResult res;
    res.grad_target = Tensor(target_scores.c, target_scores.h, target_scores.w);
    res.grad_source = Tensor(source_scores.c, source_scores.h, source_scores.w);

    const double inv_t = 1.0 / static_cast<double>(target_scores.size());
    double loss_t = 0.0;
    for (std::size_t i = 0; i < target_scores.size(); ++i) {
        double d = target_scores.data[i];
        loss_t -= std::log(d);
        res.grad_target.data[i] = -inv_t / d;
    }

    const double inv_s = 1.0 / static_cast<double>(source_scores.size());
    double loss_s = 0.0;
    for (std::size_t i = 0; i < source_scores.size(); ++i) {
        double d = source_scores.data[i];
        loss_s -= std::log(1.0 - d);
        res.grad_source.data[i] = inv_s / (1.0 - d);
    }

    res.loss = loss_t * inv_t + loss_s * inv_s;
    return res;
}

ClassSignatures extract_class_signatures(const Tensor& prob, const data::LabelMap& mask) {
    if (prob.h != mask.h || prob.w != mask.w)
        throw UsageError("extract_class_signatures: probability/mask shape mismatch");

    const int nc = prob.c;
    const int plane = prob.plane();
    ClassSignatures sigs;
    sigs.num_classes = nc;
    sigs.c.assign(nc, std::vector<double>(nc, 0.0));
    sigs.count.assign(nc, 0);

    for (int i = 0; i < plane; ++i) {
        int m = mask.grid[i];
        if (m == mask.ignore_index || m < 0 || m >= nc) continue;
        ++sigs.count[m];
        for (int c = 0; c < nc; ++c)
            sigs.c[m][c] += prob.data[static_cast<std::size_t>(c) * plane + i];
    }
    for (int k = 0; k < nc; ++k)
        if (sigs.count[k] > 0)
            for (double& v : sigs.c[k]) v /= sigs.count[k];
    return sigs;
}

Tensor scatter_signature_grad(const ClassSignatures& sigs, const data::LabelMap& mask,
                              const std::vector<std::vector<double>>& grad_c) {
    Tensor grad(sigs.num_classes, mask.h, mask.w);
    const int plane = mask.h * mask.w;
    for (int i = 0; i < plane; ++i) {
        int m = mask.grid[i];
        if (m == mask.ignore_index || m < 0 || m >= sigs.num_classes) continue;
        if (sigs.count[m] == 0 || grad_c[m].empty()) continue;
        const double inv = 1.0 / sigs.count[m];
        for (int c = 0; c < sigs.num_classes; ++c)
            grad.data[static_cast<std::size_t>(c) * plane + i] = grad_c[m][c] * inv;
    }
    return grad;
}

namespace {

double l2_norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

// D_sim value plus gradients wrt both operands; zero gradients on the guard.
double d_sim_with_grad(const std::vector<double>& a, const std::vector<double>& b,
                       std::vector<double>* ga, std::vector<double>* gb) {
    double na = l2_norm(a), nb = l2_norm(b);
    if (na < kNormGuard || nb < kNormGuard) return 0.5;

    double dot = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
    double cosine = dot / (na * nb);

    if (ga && gb) {
        // d/da [0.5 * dot/(|a||b|)] = 0.5 * (b/(|a||b|) - cosine * a/|a|^2)
        for (std::size_t i = 0; i < a.size(); ++i) {
            (*ga)[i] += 0.5 * (b[i] / (na * nb) - cosine * a[i] / (na * na));
            (*gb)[i] += 0.5 * (a[i] / (na * nb) - cosine * b[i] / (nb * nb));
        }
    }
    return 0.5 + 0.5 * cosine;
}

}  // namespace

double cosine_similarity_norm(const std::vector<double>& ci, const std::vector<double>& cj) {
    return d_sim_with_grad(ci, cj, nullptr, nullptr);
}

IsiaResult isia_loss(const ClassSignatures& sig_s, const ClassSignatures& sig_t, double beta) {
    if (sig_s.num_classes != sig_t.num_classes)
        throw UsageError("isia_loss: class-count mismatch between signatures");
    const int nc = sig_s.num_classes;

    IsiaResult res;
    res.grad_sig_s.assign(nc, std::vector<double>(nc, 0.0));
    res.grad_sig_t.assign(nc, std::vector<double>(nc, 0.0));

    bool any_copresent = false;
    for (int i = 0; i < nc; ++i)
        if (sig_s.present(i) && sig_t.present(i)) any_copresent = true;
    if (!any_copresent) {
        res.no_copresent = true;
        return res;
    }

    for (int i = 0; i < nc; ++i) {
        if (!sig_s.present(i) || !sig_t.present(i)) continue;
        for (int d = 0; d < nc; ++d) {
            double diff = sig_s.c[i][d] - sig_t.c[i][d];
            res.loss += std::fabs(diff);
            double sgn = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
            res.grad_sig_s[i][d] += sgn;
            res.grad_sig_t[i][d] -= sgn;
        }
    }

    if (beta != 0.0) {
        for (int i = 0; i < nc; ++i) {
            if (!sig_s.present(i)) continue;
            for (int k = 0; k < nc; ++k) {
                if (k == i || !sig_t.present(k)) continue;
                std::vector<double> ga(nc, 0.0), gb(nc, 0.0);
                res.loss += beta * d_sim_with_grad(sig_s.c[i], sig_t.c[k], &ga, &gb);
                for (int d = 0; d < nc; ++d) {
                    res.grad_sig_s[i][d] += beta * ga[d];
                    res.grad_sig_t[k][d] += beta * gb[d];
                }
            }
        }
    }

    return res;
}

double total_loss_init(const LossComponents& parts, const LossWeights& w) {
    return w.lambda_seg * parts.seg_source + w.lambda_adv * parts.adv + w.lambda_isia * parts.isia +
           w.lambda_aim * parts.aim + w.lambda_d * parts.disc;
}

double total_loss_full(const LossComponents& parts, const LossWeights& w) {
    return total_loss_init(parts, w) + w.lambda_seg * parts.seg_target;
}

}  // namespace uda::losses
