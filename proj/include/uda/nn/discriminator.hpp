#pragma once

#include <cstdint>
#include <vector>

#include "uda/nn/layers.hpp"
#include "uda/tensor.hpp"

namespace uda::nn {

struct DiscriminatorConfig {
    int in_channels = 4;  // class count of the probability map
    std::vector<int> channels{64, 128, 256, 512, 1};
    double leaky_slope = 0.2;
    std::uint64_t init_seed = 2;

    void validate() const;
};

struct DiscTape {
    bool valid = false;
    Tensor input;
    std::vector<Tensor> pre;   // conv outputs before activation, one per layer
    std::vector<Tensor> act;   // leaky-relu outputs (last layer excluded)
    Tensor score;              // sigmoid output
};

// Fully-convolutional domain classifier over softmax output maps: 4x4
// stride-2 convolutions with leaky activations between them, sigmoid on top.
class Discriminator {
public:
    explicit Discriminator(const DiscriminatorConfig& config);

    Tensor forward(const Tensor& prob_map, DiscTape& tape) const;

    // Returns grad wrt the input probability map. Parameter gradients are only
    // touched when accumulate_params is set, so the generator step can pass
    // gradients through a frozen discriminator.
    Tensor backward(const DiscTape& tape, const Tensor& grad_score, bool accumulate_params);

    std::vector<NamedParam> params();
    void zero_grad();
    const DiscriminatorConfig& config() const { return config_; }

private:
    DiscriminatorConfig config_;
    std::vector<ConvParams> convs_;
};

}  // namespace uda::nn
