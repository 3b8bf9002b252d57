#pragma once

#include <vector>

#include "uda/data.hpp"
#include "uda/tensor.hpp"

namespace uda::style {

// Per-channel first and second moments of an image set.
struct ChannelStats {
    std::vector<double> mean;  // size 3
    std::vector<double> stddev;
};

constexpr double kStdFloor = 1e-6;

ChannelStats fit_statistics(const std::vector<const Tensor*>& images);
ChannelStats fit_statistics(const std::vector<data::UnlabeledSample>& samples);
ChannelStats fit_statistics(const std::vector<data::LabeledSample>& samples);

// x -> (x - mu_src)/sd_src * sd_tgt + mu_tgt, clipped to [0,1]. Labels are not
// touched; callers keep the pairing.
Tensor transfer(const Tensor& image, const ChannelStats& source, const ChannelStats& target);

std::vector<data::LabeledSample> transfer_all(const std::vector<data::LabeledSample>& samples,
                                              const ChannelStats& source, const ChannelStats& target);

}  // namespace uda::style
