#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "uda/tensor.hpp"

namespace uda::data {

constexpr int kIgnoreIndex = 255;

// Integer class-id raster. Values are class ids < num_classes or ignore_index.
struct LabelMap {
    int h = 0, w = 0;
    int num_classes = 0;
    int ignore_index = kIgnoreIndex;
    std::vector<std::uint16_t> grid;

    LabelMap() = default;
    LabelMap(int h_, int w_, int num_classes_, int fill = 0, int ignore = kIgnoreIndex)
        : h(h_), w(w_), num_classes(num_classes_), ignore_index(ignore),
          grid(static_cast<std::size_t>(h_) * w_, static_cast<std::uint16_t>(fill)) {}

    int at(int y, int x) const { return grid[static_cast<std::size_t>(y) * w + x]; }
    void set(int y, int x, int v) { grid[static_cast<std::size_t>(y) * w + x] = static_cast<std::uint16_t>(v); }
    std::size_t size() const { return grid.size(); }
};

struct LabeledSample {
    Tensor image;  // (3,H,W) in [0,1]
    LabelMap label;
    std::string id;
};

// Trainer-facing target sample: carries no label member at all, the firewall
// is the type itself.
struct UnlabeledSample {
    Tensor image;
    std::string id;
};

struct DomainShift {
    // target = gain * source_color + bias, per channel, applied at paint time
    std::vector<double> gain{1.0, 1.0, 1.0};
    std::vector<double> bias{0.0, 0.0, 0.0};
    double extra_noise = 0.0;   // additive texture-noise amplitude on top of the base amount
    double size_scale = 0.0;    // fractional shape-size change, e.g. 0.25 -> +25%
};

struct DatasetSpec {
    int height = 64;
    int width = 64;
    int num_classes = 4;                       // background 0 + shape classes
    std::vector<int> foreground_class_ids{1, 2, 3};
    std::uint64_t seed = 7;
    double base_noise = 0.03;
    DomainShift shift;

    void validate() const;  // throws ConfigError naming the offending field
};

struct PairDatasets {
    std::vector<LabeledSample> source;
    std::vector<UnlabeledSample> target;
    // Held out for evaluation only; index-aligned with `target`.
    std::vector<LabelMap> target_labels;
};

PairDatasets generate_pair_datasets(const DatasetSpec& spec, int n_source, int n_target);

// id_map remaps raw label-file values to training ids; values absent from the
// map become ignore_index.
using IdMap = std::map<int, int>;

std::vector<LabeledSample> load_labeled(const std::string& images_dir, const std::string& labels_dir,
                                        const IdMap& id_map, int num_classes,
                                        int ignore_index = kIgnoreIndex);
std::vector<UnlabeledSample> load_images(const std::string& images_dir);

void save_labeled(const std::string& root, const std::vector<LabeledSample>& samples);
void save_images(const std::string& dir, const std::vector<UnlabeledSample>& samples);
void save_labels(const std::string& dir, const std::vector<std::string>& ids,
                 const std::vector<LabelMap>& labels);

// Writes <out_root>/{source/{images,labels}, target/{images,labels}} plus
// manifest.json echoing the spec and per-sample ids. Target labels are the
// held-out evaluation rasters; the train path never reads them.
void save_pair_datasets(const std::string& out_root, const DatasetSpec& spec, const PairDatasets& data);

IdMap identity_id_map(int num_classes);

}  // namespace uda::data
