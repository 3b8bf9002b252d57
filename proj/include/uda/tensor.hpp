#pragma once

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <vector>

namespace uda {

// Dense channel-major (C,H,W) raster of doubles. Channels first so that a
// single channel plane is contiguous, which the conv kernels rely on.
struct Tensor {
    int c = 0, h = 0, w = 0;
    std::vector<double> data;

    Tensor() = default;
    Tensor(int c_, int h_, int w_, double fill = 0.0)
        : c(c_), h(h_), w(w_), data(static_cast<std::size_t>(c_) * h_ * w_, fill) {}

    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }
    int plane() const { return h * w; }

    double& at(int ci, int yi, int xi) {
        assert(ci >= 0 && ci < c && yi >= 0 && yi < h && xi >= 0 && xi < w);
        return data[(static_cast<std::size_t>(ci) * h + yi) * w + xi];
    }
    double at(int ci, int yi, int xi) const {
        assert(ci >= 0 && ci < c && yi >= 0 && yi < h && xi >= 0 && xi < w);
        return data[(static_cast<std::size_t>(ci) * h + yi) * w + xi];
    }

    double* channel(int ci) { return data.data() + static_cast<std::size_t>(ci) * h * w; }
    const double* channel(int ci) const { return data.data() + static_cast<std::size_t>(ci) * h * w; }

    bool same_shape(const Tensor& o) const { return c == o.c && h == o.h && w == o.w; }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }
};

}  // namespace uda
