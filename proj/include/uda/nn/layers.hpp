#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uda/common.hpp"
#include "uda/tensor.hpp"

namespace uda::nn {

// Parameter bundle exposed to optimizers and the checkpoint writer.
struct NamedParam {
    std::string name;
    std::vector<double>* value;
    std::vector<double>* grad;
};

struct ConvParams {
    int in_ch = 0, out_ch = 0, ksize = 3, stride = 1, pad = 1;
    std::vector<double> w, b;    // w laid out [out][in][ky][kx]
    std::vector<double> gw, gb;

    ConvParams() = default;
    ConvParams(int in_c, int out_c, int k, int s, int p);

    void init_he(Rng& rng);
    void zero_grad();
    void collect(const std::string& prefix, std::vector<NamedParam>& out);
    int out_extent(int in_extent) const { return (in_extent + 2 * pad - ksize) / stride + 1; }
};

Tensor conv_forward(const ConvParams& params, const Tensor& x);
// Returns grad wrt input; accumulates parameter grads when `accumulate`.
Tensor conv_backward(ConvParams& params, const Tensor& x, const Tensor& gy, bool accumulate = true);

Tensor relu_forward(const Tensor& x);
Tensor relu_backward(const Tensor& pre, const Tensor& gy);

Tensor leaky_relu_forward(const Tensor& x, double slope);
Tensor leaky_relu_backward(const Tensor& pre, const Tensor& gy, double slope);

Tensor sigmoid_forward(const Tensor& x);
Tensor sigmoid_backward(const Tensor& y, const Tensor& gy);  // y is the forward output

// Softmax across channels, independently per pixel.
Tensor softmax_channels_forward(const Tensor& z);
Tensor softmax_channels_backward(const Tensor& p, const Tensor& gp);  // grad wrt logits

// Integer-factor nearest-neighbour upsample, cropped to (out_h, out_w).
Tensor upsample_nearest_forward(const Tensor& x, int factor, int out_h, int out_w);
Tensor upsample_nearest_backward(const Tensor& gy, int factor, int in_h, int in_w);

}  // namespace uda::nn
