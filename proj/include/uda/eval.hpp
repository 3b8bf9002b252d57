#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "uda/data.hpp"
#include "uda/tensor.hpp"

namespace uda::eval {

// counts[truth][pred], ignore_index pixels excluded. Mergeable by addition.
struct ConfusionMatrix {
    int num_classes = 0;
    std::vector<std::uint64_t> counts;

    explicit ConfusionMatrix(int nc = 0)
        : num_classes(nc), counts(static_cast<std::size_t>(nc) * nc, 0) {}

    std::uint64_t& at(int truth, int pred) { return counts[static_cast<std::size_t>(truth) * num_classes + pred]; }
    std::uint64_t at(int truth, int pred) const { return counts[static_cast<std::size_t>(truth) * num_classes + pred]; }
    std::uint64_t total() const;
    void merge(const ConfusionMatrix& other);
};

data::LabelMap argmax_map(const Tensor& prob, int ignore_index = data::kIgnoreIndex);

void accumulate_confusion(ConfusionMatrix& cm, const data::LabelMap& prediction,
                          const data::LabelMap& truth);
ConfusionMatrix confusion(const data::LabelMap& prediction, const data::LabelMap& truth,
                          int num_classes);

struct IouReport {
    std::vector<double> per_class;      // meaningful where valid
    std::vector<bool> valid;            // false for zero-union classes
    double miou = 0.0;                  // mean over valid classes
    int excluded = 0;
};

IouReport iou_per_class(const ConfusionMatrix& cm);

// Fraction of the source-only -> target-only gap closed by adaptation, in %.
double nam(double iou_source_only, double iou_adapted, double iou_target_only);

struct AblationRow {
    std::string label;
    bool ima = false, gfa = false, isia = false, aim = false;
    double miou = 0.0;
    std::vector<double> per_class;  // optional
};

struct AblationReport {
    std::vector<AblationRow> rows;
    std::vector<std::string> class_names;  // used when per-class columns requested

    std::string to_text(bool per_class = false) const;
    std::string to_json(bool per_class = false) const;
    static AblationReport from_json(const std::string& json_text);
};

}  // namespace uda::eval
