#pragma once

#include <deque>
#include <map>
#include <vector>

#include "uda/data.hpp"
#include "uda/losses.hpp"
#include "uda/tensor.hpp"

namespace uda::instances {

// One maximal connected region of a single class.
struct InstanceMask {
    int h = 0, w = 0;
    std::vector<int> pixels;  // flat row-major indices, ascending

    int seed_pixel() const { return pixels.empty() ? -1 : pixels.front(); }
    std::size_t area() const { return pixels.size(); }
};

// Partition of all class-k pixels into maximal connected components, ordered
// by row-major seed pixel. Connectivity is 4 or 8.
std::vector<InstanceMask> extract_instances(const data::LabelMap& label, int class_id, int connectivity);

constexpr double kPoolEps = 1e-5;

// Masked mean: sum of features over mask pixels divided by max(eps, area).
std::vector<double> pool_instance_feature(const InstanceMask& mask, const Tensor& feat,
                                          double eps = kPoolEps);

struct AdaptationWeights {
    std::map<int, double> zeta;
    std::map<int, double> eta;
    bool degenerate = false;  // all class distances coincided -> uniform eta

    double eta_or_default(int class_id, double fallback = 1.0) const {
        auto it = eta.find(class_id);
        return it == eta.end() ? fallback : it->second;
    }
};

// Per-class adaptation complexity from signature distances:
//   zeta_k = d_k / (max_i d_i - min_i d_i),  eta_k = zeta_k / max_{i,j}|zeta_i - zeta_j|
// over foreground classes present in both signatures. Degenerate denominators
// collapse to uniform weights of 1.
AdaptationWeights compute_adaptation_weights(const losses::ClassSignatures& sig_s,
                                             const losses::ClassSignatures& sig_t,
                                             const std::vector<int>& foreground_ids);

// FIFO queues of pooled source instance features, one per foreground class.
class FeatureBank {
public:
    explicit FeatureBank(int capacity = 10) : capacity_(capacity) {}

    void push(int class_id, std::vector<double> feature);
    const std::deque<std::vector<double>>& entries(int class_id) const;
    bool empty(int class_id) const { return entries(class_id).empty(); }
    bool empty() const;
    int capacity() const { return capacity_; }

    std::map<std::string, std::vector<double>> serialize() const;
    static FeatureBank deserialize(int capacity, const std::map<std::string, std::vector<double>>& blobs);

private:
    int capacity_;
    std::map<int, std::deque<std::vector<double>>> queues_;
};

// Pools every source instance per foreground class into the bank.
void update_bank(FeatureBank& bank, const data::LabelMap& source_label, const Tensor& source_feat,
                 const std::vector<int>& foreground_ids, int connectivity, int min_instance_px,
                 double eps = kPoolEps);

struct AimResult {
    double loss = 0.0;
    Tensor grad_feat;            // wrt target features, argmin branch only
    bool nothing_matched = false;
    std::map<int, double> eta_used;
};

// Cross-domain instance matching: each target instance feature is matched to
// its nearest bank entry in L1, weighted eta_k / (instance count of class k).
AimResult aim_loss(const data::LabelMap& target_label, const Tensor& target_feat,
                   const FeatureBank& bank, const AdaptationWeights& weights,
                   const std::vector<int>& foreground_ids, int connectivity, int min_instance_px,
                   double eps = kPoolEps);

}  // namespace uda::instances
