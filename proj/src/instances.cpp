#include "uda/instances.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "uda/common.hpp"

namespace uda::instances {

std::vector<InstanceMask> extract_instances(const data::LabelMap& label, int class_id, int connectivity) {
    if (connectivity != 4 && connectivity != 8)
        throw ConfigError("connectivity must be 4 or 8 (got " + std::to_string(connectivity) + ")");

    const int h = label.h, w = label.w;
    std::vector<char> visited(static_cast<std::size_t>(h) * w, 0);
    std::vector<InstanceMask> out;
    std::vector<int> stack;

    for (int start = 0; start < h * w; ++start) {
        if (visited[start] || label.grid[start] != class_id) continue;

        InstanceMask inst;
        inst.h = h;
        inst.w = w;
        stack.clear();
        stack.push_back(start);
        visited[start] = 1;
        while (!stack.empty()) {
            int p = stack.back();
            stack.pop_back();
            inst.pixels.push_back(p);
            int y = p / w, x = p % w;
            auto visit = [&](int ny, int nx) {
                if (ny < 0 || ny >= h || nx < 0 || nx >= w) return;
                int q = ny * w + nx;
                if (!visited[q] && label.grid[q] == class_id) {
                    visited[q] = 1;
                    stack.push_back(q);
                }
            };
            visit(y - 1, x);
            visit(y + 1, x);
            visit(y, x - 1);
            visit(y, x + 1);
            if (connectivity == 8) {
                visit(y - 1, x - 1);
                visit(y - 1, x + 1);
                visit(y + 1, x - 1);
                visit(y + 1, x + 1);
            }
        }
        std::sort(inst.pixels.begin(), inst.pixels.end());
        out.push_back(std::move(inst));
    }
    return out;
}

std::vector<double> pool_instance_feature(const InstanceMask& mask, const Tensor& feat, double eps) {
    if (mask.h != feat.h || mask.w != feat.w)
        throw UsageError("pool_instance_feature: mask/feature shape mismatch");
    std::vector<double> pooled(feat.c, 0.0);
    const double denom = std::max(eps, static_cast<double>(mask.area()));
    for (int c = 0; c < feat.c; ++c) {
        const double* plane = feat.channel(c);
        double s = 0.0;
        for (int p : mask.pixels) s += plane[p];
        pooled[c] = s / denom;
    }
    return pooled;
}

AdaptationWeights compute_adaptation_weights(const losses::ClassSignatures& sig_s,
                                             const losses::ClassSignatures& sig_t,
                                             const std::vector<int>& foreground_ids) {
    AdaptationWeights w;

    std::map<int, double> dist;
    for (int k : foreground_ids) {
        if (k < 0 || k >= sig_s.num_classes) continue;
        if (!sig_s.present(k) || !sig_t.present(k)) continue;
        double d = 0.0;
        for (int c = 0; c < sig_s.num_classes; ++c) d += std::fabs(sig_s.c[k][c] - sig_t.c[k][c]);
        dist[k] = d;
    }
    if (dist.empty()) {
        w.degenerate = true;
        return w;
    }

    double dmin = std::numeric_limits<double>::infinity(), dmax = -dmin;
    for (const auto& [k, d] : dist) {
        dmin = std::min(dmin, d);
        dmax = std::max(dmax, d);
    }
    double range = dmax - dmin;
    if (range < 1e-12) {
        w.degenerate = true;
        for (const auto& [k, d] : dist) {
            w.zeta[k] = 1.0;
            w.eta[k] = 1.0;
        }
        return w;
    }

    for (const auto& [k, d] : dist) w.zeta[k] = d / range;

    double spread = 0.0;
    for (const auto& [i, zi] : w.zeta)
        for (const auto& [j, zj] : w.zeta) spread = std::max(spread, std::fabs(zi - zj));
    if (spread < 1e-12) {
        w.degenerate = true;
        for (const auto& [k, z] : w.zeta) w.eta[k] = 1.0;
        return w;
    }
    for (const auto& [k, z] : w.zeta) w.eta[k] = z / spread;
    return w;
}

void FeatureBank::push(int class_id, std::vector<double> feature) {
    auto& q = queues_[class_id];
    q.push_back(std::move(feature));
    while (static_cast<int>(q.size()) > capacity_) q.pop_front();
}

const std::deque<std::vector<double>>& FeatureBank::entries(int class_id) const {
    static const std::deque<std::vector<double>> kEmpty;
    auto it = queues_.find(class_id);
    return it == queues_.end() ? kEmpty : it->second;
}

bool FeatureBank::empty() const {
    for (const auto& [k, q] : queues_)
        if (!q.empty()) return false;
    return true;
}

std::map<std::string, std::vector<double>> FeatureBank::serialize() const {
    std::map<std::string, std::vector<double>> blobs;
    for (const auto& [k, q] : queues_) {
        int j = 0;
        for (const auto& feat : q) {
            char key[64];
            std::snprintf(key, sizeof(key), "bank/class%03d/slot%03d", k, j++);
            blobs[key] = feat;
        }
    }
    return blobs;
}

FeatureBank FeatureBank::deserialize(int capacity, const std::map<std::string, std::vector<double>>& blobs) {
    FeatureBank bank(capacity);
    // std::map iteration gives class-then-slot order, preserving FIFO age.
    for (const auto& [key, feat] : blobs) {
        int cls = 0, slot = 0;
        if (std::sscanf(key.c_str(), "bank/class%d/slot%d", &cls, &slot) == 2) bank.push(cls, feat);
    }
    return bank;
}

void update_bank(FeatureBank& bank, const data::LabelMap& source_label, const Tensor& source_feat,
                 const std::vector<int>& foreground_ids, int connectivity, int min_instance_px,
                 double eps) {
    for (int k : foreground_ids) {
        for (const auto& inst : extract_instances(source_label, k, connectivity)) {
            if (static_cast<int>(inst.area()) < min_instance_px) continue;
            bank.push(k, pool_instance_feature(inst, source_feat, eps));
        }
    }
}

AimResult aim_loss(const data::LabelMap& target_label, const Tensor& target_feat,
                   const FeatureBank& bank, const AdaptationWeights& weights,
                   const std::vector<int>& foreground_ids, int connectivity, int min_instance_px,
                   double eps) {
    AimResult res;
    res.grad_feat = Tensor(target_feat.c, target_feat.h, target_feat.w);

    bool matched_any = false;
    for (int k : foreground_ids) {
        const auto& entries = bank.entries(k);
        if (entries.empty()) continue;

        std::vector<InstanceMask> insts;
        for (auto& inst : extract_instances(target_label, k, connectivity))
            if (static_cast<int>(inst.area()) >= min_instance_px) insts.push_back(std::move(inst));
        if (insts.empty()) continue;

        matched_any = true;
        const double eta = weights.eta_or_default(k);
        res.eta_used[k] = eta;
        const double scale = eta / static_cast<double>(insts.size());

        for (const auto& inst : insts) {
            std::vector<double> pooled = pool_instance_feature(inst, target_feat, eps);

            int best = 0;
            double best_dist = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < entries.size(); ++j) {
                double d = 0.0;
                for (int c = 0; c < target_feat.c; ++c) d += std::fabs(pooled[c] - entries[j][c]);
                if (d < best_dist) {  // ties keep the lowest index
                    best_dist = d;
                    best = static_cast<int>(j);
                }
            }
            res.loss += scale * best_dist;

            const double inv_area = 1.0 / std::max(eps, static_cast<double>(inst.area()));
            for (int c = 0; c < target_feat.c; ++c) {
                double diff = pooled[c] - entries[best][c];
                double sgn = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
                double g = scale * sgn * inv_area;
                if (g == 0.0) continue;
                double* plane = res.grad_feat.channel(c);
                for (int p : inst.pixels) plane[p] += g;
            }
        }
    }
    res.nothing_matched = !matched_any;
    return res;
}

}  // namespace uda::instances
