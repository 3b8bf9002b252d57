#include "uda/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "uda/eval.hpp"

using nlohmann::json;

namespace uda::train {

void TrainConfig::validate() const {
    if (init_iters > total_iters)
        throw ConfigError("train.init_iters must be <= train.total_iters");
    if (tau <= 0.0 || tau > 1.0) throw ConfigError("train.tau must be in (0,1]");
    if (batch_size != 1) throw ConfigError("train.batch_size: only 1 is supported");
    if (log_interval == 0) throw ConfigError("train.log_interval must be >= 1");
    if (connectivity != 4 && connectivity != 8) throw ConfigError("train.connectivity must be 4 or 8");
    if (min_instance_px < 0) throw ConfigError("train.min_instance_px must be >= 0");
    if (bank_capacity < 1) throw ConfigError("train.bank_capacity must be >= 1");
    if (max_eta <= 0.0) throw ConfigError("train.max_eta must be > 0");
    weights.validate();
}

std::uint64_t TrainConfig::effective_warmup(std::uint64_t stage_len) const {
    if (aim_warmup_iters >= 0) return static_cast<std::uint64_t>(aim_warmup_iters);
    return stage_len / 10;
}

std::string metrics_row_to_json(const MetricsRow& row) {
    json j;
    j["iter"] = row.iter;
    j["L_seg_S"] = row.seg_s;
    j["L_seg_T"] = row.seg_t;
    j["L_adv"] = row.adv;
    j["L_D"] = row.disc;
    j["L_ISIA"] = row.isia;
    j["L_AIM"] = row.aim;
    j["total"] = row.total;
    j["lr_G"] = row.lr_g;
    json eta = json::object();
    for (const auto& [k, v] : row.eta) eta[std::to_string(k)] = v;
    j["eta"] = eta;
    return j.dump();
}

MetricsRow metrics_row_from_json(const std::string& line) {
    json j = json::parse(line);
    MetricsRow row;
    row.iter = j["iter"].get<std::uint64_t>();
    row.seg_s = j["L_seg_S"].get<double>();
    row.seg_t = j["L_seg_T"].get<double>();
    row.adv = j["L_adv"].get<double>();
    row.disc = j["L_D"].get<double>();
    row.isia = j["L_ISIA"].get<double>();
    row.aim = j["L_AIM"].get<double>();
    row.total = j["total"].get<double>();
    row.lr_g = j["lr_G"].get<double>();
    for (const auto& [k, v] : j["eta"].items()) row.eta[std::stoi(k)] = v.get<double>();
    return row;
}

namespace {

void add_scaled(Tensor& dst, const Tensor& src, double scale) {
    if (dst.empty()) dst = Tensor(src.c, src.h, src.w);
    for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += scale * src.data[i];
}

std::vector<std::vector<double>> scale_grads(const std::vector<std::vector<double>>& g, double s) {
    auto out = g;
    for (auto& row : out)
        for (auto& v : row) v *= s;
    return out;
}

std::uint64_t params_hash(std::vector<nn::NamedParam>& params) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (auto& p : params) h = hash_doubles(*p.value, fnv1a(p.name, h));
    return h;
}

}  // namespace

Trainer::Trainer(const nn::GeneratorConfig& gen_cfg, const nn::DiscriminatorConfig& disc_cfg,
                 const TrainConfig& cfg, std::uint64_t config_hash)
    : cfg_(cfg), config_hash_(config_hash), gen_(gen_cfg), disc_(disc_cfg),
      gen_opt_(cfg.gen_lr, cfg.gen_momentum, cfg.gen_weight_decay, cfg.gen_poly_power, cfg.total_iters),
      disc_opt_(cfg.disc_lr, cfg.disc_beta1, cfg.disc_beta2, cfg.disc_weight_decay),
      bank_(cfg.bank_capacity), rng_(cfg.seed) {
    cfg_.validate();
}

void Trainer::abort_non_finite(const losses::LossComponents& parts, std::uint64_t iter) const {
    std::string path;
    if (!cfg_.diagnostics_dir.empty()) {
        std::filesystem::create_directories(cfg_.diagnostics_dir);
        path = (std::filesystem::path(cfg_.diagnostics_dir) / "diagnostics.json").string();
        json dump = {{"iter", iter},       {"L_seg_S", parts.seg_source}, {"L_seg_T", parts.seg_target},
                     {"L_adv", parts.adv}, {"L_D", parts.disc},           {"L_ISIA", parts.isia},
                     {"L_AIM", parts.aim}};
        std::ofstream out(path);
        out << dump.dump(2) << "\n";
    }
    std::ostringstream msg;
    msg << "non-finite loss at iteration " << iter << " (seg_S=" << parts.seg_source
        << " seg_T=" << parts.seg_target << " adv=" << parts.adv << " D=" << parts.disc
        << " ISIA=" << parts.isia << " AIM=" << parts.aim << ")";
    throw NumericError(msg.str(), path);
}

void Trainer::run_stage(int stage, const std::vector<data::LabeledSample>& source,
                        const std::vector<data::UnlabeledSample>& target, const PseudoLabelSet* pseudo,
                        std::uint64_t until_iter) {
    if (source.empty() || target.empty()) throw ConfigError("train: datasets must be nonempty");

    const auto& w = cfg_.weights;
    const bool need_disc = w.lambda_adv > 0.0 || w.lambda_d > 0.0;
    const bool need_sigs = w.lambda_isia > 0.0 || w.lambda_aim > 0.0;

    const std::uint64_t stage_start = stage == 1 ? 0 : cfg_.init_iters;
    const std::uint64_t stage_len = until_iter > stage_start ? until_iter - stage_start : 0;
    const std::uint64_t warmup = cfg_.effective_warmup(stage_len);

    auto gen_params = gen_.params();
    auto disc_params = disc_.params();

    while (iter_ < until_iter) {
        const std::size_t si = rng_() % source.size();
        const std::size_t ti = rng_() % target.size();
        const auto& src = source[si];
        const auto& tgt = target[ti];

        const bool need_target_forward = need_disc || need_sigs || stage == 2;
        const bool aim_active = w.lambda_aim > 0.0 && (iter_ - stage_start) >= warmup;

        // ---- forward passes ----
        nn::GenTape tape_s, tape_t;
        nn::GenOutput out_s = gen_.forward(src.image, nn::Domain::source, tape_s);
        nn::GenOutput out_t;
        if (need_target_forward) out_t = gen_.forward(tgt.image, nn::Domain::target, tape_t);

        // Target-side mask: live argmax in stage 1, fixed pseudo-labels in stage 2.
        data::LabelMap tmask;
        if (need_sigs || stage == 2)
            tmask = stage == 1 ? eval::argmax_map(out_t.prob) : pseudo->labels[ti];

        // ---- loss components ----
        losses::LossComponents parts;

        auto seg_s = losses::seg_cross_entropy(out_s.prob, src.label);
        parts.seg_source = seg_s.loss;

        losses::SegLossResult seg_t;
        if (stage == 2) {
            seg_t = losses::seg_cross_entropy(out_t.prob, tmask);
            parts.seg_target = seg_t.loss;
        }

        losses::AdvLossResult adv;
        nn::DiscTape tape_dt;
        Tensor grad_prob_t_adv;
        if (w.lambda_adv > 0.0) {
            disc_.forward(out_t.prob, tape_dt);
            adv = losses::adv_generator_loss(tape_dt.score, cfg_.gen_adv_form);
            parts.adv = adv.loss;
            grad_prob_t_adv = disc_.backward(tape_dt, adv.grad_scores, /*accumulate_params=*/false);
        }

        losses::ClassSignatures sig_s, sig_t;
        if (need_sigs) {
            sig_s = losses::extract_class_signatures(out_s.prob, src.label);
            sig_t = losses::extract_class_signatures(out_t.prob, tmask);
        }

        losses::IsiaResult isia;
        if (w.lambda_isia > 0.0) {
            isia = losses::isia_loss(sig_s, sig_t, w.beta);
            parts.isia = isia.loss;
        }

        instances::AimResult aim;
        if (w.lambda_aim > 0.0) {
            instances::update_bank(bank_, src.label, out_s.feat, cfg_.foreground_ids, cfg_.connectivity,
                                   cfg_.min_instance_px);
            if (aim_active) {
                auto aw = instances::compute_adaptation_weights(sig_s, sig_t, cfg_.foreground_ids);
                for (auto& [k, eta] : aw.eta) eta = std::min(eta, cfg_.max_eta);
                aim = instances::aim_loss(tmask, out_t.feat, bank_, aw, cfg_.foreground_ids,
                                          cfg_.connectivity, cfg_.min_instance_px);
                parts.aim = aim.loss;
            }
        }

        nn::DiscTape tape_ds;
        losses::DiscLossResult disc_loss;
        if (need_disc) {
            if (!tape_dt.valid) disc_.forward(out_t.prob, tape_dt);
            disc_.forward(out_s.prob, tape_ds);
            disc_loss = losses::adv_discriminator_loss(tape_dt.score, tape_ds.score);
            parts.disc = disc_loss.loss;
        }

        if (!(std::isfinite(parts.seg_source) && std::isfinite(parts.seg_target) &&
              std::isfinite(parts.adv) && std::isfinite(parts.disc) && std::isfinite(parts.isia) &&
              std::isfinite(parts.aim)))
            abort_non_finite(parts, iter_);

        // ---- generator step (discriminator frozen) ----
        std::uint64_t disc_hash_before =
            cfg_.check_isolation && need_disc ? params_hash(disc_params) : 0;

        gen_.zero_grad();

        Tensor grad_logits_s, grad_prob_s;
        if (w.lambda_seg > 0.0 && !seg_s.all_ignored)
            add_scaled(grad_logits_s, seg_s.grad_logits, w.lambda_seg);
        if (w.lambda_isia > 0.0 && !isia.no_copresent)
            grad_prob_s = losses::scatter_signature_grad(sig_s, src.label,
                                                         scale_grads(isia.grad_sig_s, w.lambda_isia));
        gen_.backward(tape_s, Tensor(), grad_prob_s, grad_logits_s);

        Tensor grad_logits_t, grad_prob_t, grad_feat_t;
        if (stage == 2 && w.lambda_seg > 0.0 && !seg_t.all_ignored)
            add_scaled(grad_logits_t, seg_t.grad_logits, w.lambda_seg);
        if (w.lambda_adv > 0.0) add_scaled(grad_prob_t, grad_prob_t_adv, w.lambda_adv);
        if (w.lambda_isia > 0.0 && !isia.no_copresent)
            add_scaled(grad_prob_t,
                       losses::scatter_signature_grad(sig_t, tmask, isia.grad_sig_t), w.lambda_isia);
        if (aim_active && !aim.nothing_matched) add_scaled(grad_feat_t, aim.grad_feat, w.lambda_aim);
        if (need_target_forward && (!grad_logits_t.empty() || !grad_prob_t.empty() || !grad_feat_t.empty()))
            gen_.backward(tape_t, grad_feat_t, grad_prob_t, grad_logits_t);

        gen_opt_.step(gen_params, iter_);

        if (cfg_.check_isolation && need_disc && params_hash(disc_params) != disc_hash_before)
            ++isolation_violations_;

        // ---- discriminator step (generator frozen) ----
        if (w.lambda_d > 0.0) {
            std::uint64_t gen_hash_before = cfg_.check_isolation ? params_hash(gen_params) : 0;

            disc_.zero_grad();
            Tensor gt, gs;
            add_scaled(gt, disc_loss.grad_target, w.lambda_d);
            add_scaled(gs, disc_loss.grad_source, w.lambda_d);
            disc_.backward(tape_dt, gt, /*accumulate_params=*/true);
            disc_.backward(tape_ds, gs, /*accumulate_params=*/true);
            disc_opt_.step(disc_params);

            if (cfg_.check_isolation && params_hash(gen_params) != gen_hash_before)
                ++isolation_violations_;
        }

        if (sink_ && iter_ % cfg_.log_interval == 0) {
            MetricsRow row;
            row.iter = iter_;
            row.seg_s = parts.seg_source;
            row.seg_t = parts.seg_target;
            row.adv = parts.adv;
            row.disc = parts.disc;
            row.isia = parts.isia;
            row.aim = parts.aim;
            row.total = stage == 1 ? losses::total_loss_init(parts, w) : losses::total_loss_full(parts, w);
            row.lr_g = gen_opt_.lr_at(iter_);
            row.eta = aim.eta_used;
            sink_(row);
        }

        ++iter_;
    }
}

void Trainer::train_stage1(const std::vector<data::LabeledSample>& source,
                           const std::vector<data::UnlabeledSample>& target) {
    run_stage(1, source, target, nullptr, cfg_.init_iters);
}

void Trainer::train_stage2(const std::vector<data::LabeledSample>& source,
                           const std::vector<data::UnlabeledSample>& target,
                           const PseudoLabelSet& pseudo) {
    if (pseudo.labels.size() != target.size())
        throw ConfigError("train_stage2: pseudo-label set not aligned with target set");
    bool any = false;
    for (const auto& lm : pseudo.labels) {
        for (auto v : lm.grid) {
            if (v != lm.ignore_index) {
                any = true;
                break;
            }
        }
        if (any) break;
    }
    if (!any)
        throw ConfigError(
            "train_stage2: pseudo-labels cover zero pixels; lower train.tau to admit more pixels");
    run_stage(2, source, target, &pseudo, cfg_.total_iters);
}

PseudoLabelSet Trainer::generate_pseudo_labels(const std::vector<data::UnlabeledSample>& target,
                                               double tau, nn::Domain branch) const {
    if (tau > 1.0) throw ConfigError("tau must be in (0,1]");
    if (tau <= 0.0) tau = 1e-9;

    const int nc = gen_.config().num_classes;
    PseudoLabelSet set;
    std::uint64_t kept = 0, total = 0;
    for (const auto& sample : target) {
        nn::GenTape tape;
        nn::GenOutput out = gen_.forward(sample.image, branch, tape);
        data::LabelMap lm(out.prob.h, out.prob.w, nc, data::kIgnoreIndex);
        const int plane = out.prob.plane();
        std::uint64_t sample_kept = 0;
        for (int i = 0; i < plane; ++i) {
            int best = 0;
            double best_v = out.prob.data[i];
            for (int c = 1; c < nc; ++c) {
                double v = out.prob.data[static_cast<std::size_t>(c) * plane + i];
                if (v > best_v) {
                    best_v = v;
                    best = c;
                }
            }
            if (best_v >= tau) {
                lm.grid[i] = static_cast<std::uint16_t>(best);
                ++sample_kept;
            }
        }
        set.coverage.push_back(static_cast<double>(sample_kept) / plane);
        kept += sample_kept;
        total += static_cast<std::uint64_t>(plane);
        set.labels.push_back(std::move(lm));
    }
    set.overall_coverage = total == 0 ? 0.0 : static_cast<double>(kept) / static_cast<double>(total);
    return set;
}

Tensor Trainer::predict_prob(const Tensor& image, nn::Domain domain) const {
    nn::GenTape tape;
    return gen_.forward(image, domain, tape).prob;
}

data::LabelMap Trainer::predict(const Tensor& image, nn::Domain domain) const {
    data::LabelMap lm = eval::argmax_map(predict_prob(image, domain));
    lm.num_classes = gen_.config().num_classes;
    return lm;
}

nn::Checkpoint Trainer::to_checkpoint() const {
    nn::Checkpoint ckpt;
    ckpt.config_hash = config_hash_;
    ckpt.iteration = iter_;

    auto& self = const_cast<Trainer&>(*this);
    auto gp = self.gen_.params();
    auto dp = self.disc_.params();
    for (auto& p : gp) ckpt.tensors["G/" + p.name] = *p.value;
    for (auto& p : dp) ckpt.tensors["D/" + p.name] = *p.value;
    for (auto& [k, v] : gen_opt_.serialize(gp)) ckpt.tensors[k] = v;
    for (auto& [k, v] : disc_opt_.serialize(dp)) ckpt.tensors[k] = v;
    for (auto& [k, v] : bank_.serialize()) ckpt.tensors[k] = v;

    std::ostringstream rng_state;
    rng_state << rng_;
    ckpt.rng_state = rng_state.str();
    return ckpt;
}

void Trainer::from_checkpoint(const nn::Checkpoint& ckpt, bool force) {
    if (ckpt.config_hash != config_hash_ && !force)
        throw ConfigError("checkpoint config hash mismatch (expected " + std::to_string(config_hash_) +
                          ", found " + std::to_string(ckpt.config_hash) + "); pass --force to override");

    auto gp = gen_.params();
    auto dp = disc_.params();
    auto load_into = [&](std::vector<nn::NamedParam>& params, const std::string& prefix) {
        for (auto& p : params) {
            auto it = ckpt.tensors.find(prefix + p.name);
            if (it == ckpt.tensors.end()) throw DataError("checkpoint missing tensor " + prefix + p.name);
            if (it->second.size() != p.value->size())
                throw DataError("checkpoint tensor size mismatch for " + prefix + p.name);
            *p.value = it->second;
        }
    };
    load_into(gp, "G/");
    load_into(dp, "D/");
    gen_opt_.deserialize(gp, ckpt.tensors);
    disc_opt_.deserialize(dp, ckpt.tensors);
    bank_ = instances::FeatureBank::deserialize(cfg_.bank_capacity, ckpt.tensors);
    iter_ = ckpt.iteration;
    if (!ckpt.rng_state.empty()) {
        std::istringstream in(ckpt.rng_state);
        in >> rng_;
    }
}

std::uint64_t Trainer::generator_param_hash() const {
    auto params = const_cast<Trainer&>(*this).gen_.params();
    return params_hash(params);
}

std::uint64_t Trainer::discriminator_param_hash() const {
    auto params = const_cast<Trainer&>(*this).disc_.params();
    return params_hash(params);
}

}  // namespace uda::train
