#include "uda/style.hpp"

#include <cmath>

#include "uda/common.hpp"

namespace uda::style {

ChannelStats fit_statistics(const std::vector<const Tensor*>& images) {
    if (images.empty()) throw ConfigError("style statistics need at least one image");

    ChannelStats stats;
    stats.mean.assign(3, 0.0);
    stats.stddev.assign(3, 0.0);

    for (int c = 0; c < 3; ++c) {
        double sum = 0.0, sum_sq = 0.0;
        std::size_t n = 0;
        for (const Tensor* img : images) {
            const double* plane = img->channel(c);
            int count = img->plane();
            for (int i = 0; i < count; ++i) {
                sum += plane[i];
                sum_sq += plane[i] * plane[i];
            }
            n += static_cast<std::size_t>(count);
        }
        double mean = sum / static_cast<double>(n);
        double var = sum_sq / static_cast<double>(n) - mean * mean;
        if (var < 0.0) var = 0.0;  // rounding
        double sd = std::sqrt(var);
        stats.mean[c] = mean;
        stats.stddev[c] = sd < kStdFloor ? kStdFloor : sd;
        if (!std::isfinite(stats.mean[c]) || !std::isfinite(stats.stddev[c]))
            throw NumericError("non-finite channel statistics");
    }
    return stats;
}

ChannelStats fit_statistics(const std::vector<data::UnlabeledSample>& samples) {
    std::vector<const Tensor*> ptrs;
    for (const auto& s : samples) ptrs.push_back(&s.image);
    return fit_statistics(ptrs);
}

ChannelStats fit_statistics(const std::vector<data::LabeledSample>& samples) {
    std::vector<const Tensor*> ptrs;
    for (const auto& s : samples) ptrs.push_back(&s.image);
    return fit_statistics(ptrs);
}

Tensor transfer(const Tensor& image, const ChannelStats& source, const ChannelStats& target) {
    Tensor out(image.c, image.h, image.w);
    for (int c = 0; c < 3; ++c) {
        double mu_s = source.mean[c], sd_s = source.stddev[c];
        double mu_t = target.mean[c], sd_t = target.stddev[c];
        const double* in = image.channel(c);
        double* o = out.channel(c);
        for (int i = 0; i < image.plane(); ++i) {
            double v = (in[i] - mu_s) / sd_s * sd_t + mu_t;
            o[i] = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
        }
    }
    return out;
}

std::vector<data::LabeledSample> transfer_all(const std::vector<data::LabeledSample>& samples,
                                              const ChannelStats& source, const ChannelStats& target) {
    std::vector<data::LabeledSample> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back({transfer(s.image, source, target), s.label, s.id});
    return out;
}

}  // namespace uda::style
