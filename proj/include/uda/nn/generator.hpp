#pragma once

#include <cstdint>
#include <vector>

#include "uda/nn/layers.hpp"
#include "uda/tensor.hpp"

namespace uda::nn {

enum class Domain { source, target };

// Leaky activations keep every unit trainable; a from-scratch decoder that
// first meets full-strength gradients mid-schedule dies with plain ReLU.
constexpr double kGeneratorLeakySlope = 0.1;

struct GeneratorConfig {
    int in_channels = 3;
    int num_classes = 4;
    std::vector<int> encoder_channels{8, 16, 16, 16};
    std::vector<int> encoder_strides{2, 2, 1, 1};
    int feature_channels = 64;  // semantic feature width
    std::uint64_t init_seed = 1;

    int downscale() const {
        int f = 1;
        for (int s : encoder_strides) f *= s;
        return f;
    }
    void validate() const;
};

// Forward record for one generator pass; backward consumes it. Keeping the
// caches outside the network lets source- and target-domain passes coexist.
struct GenTape {
    bool valid = false;
    Domain domain = Domain::source;
    Tensor input;
    std::vector<Tensor> enc_pre;   // conv outputs before activation
    std::vector<Tensor> enc_act;   // activations, enc_act.back() feeds the decoder
    Tensor dec_pre;                // decoder body conv output pre-activation
    Tensor feat_small;             // activated features at encoder resolution
    Tensor logits_small;
    Tensor prob;                   // softmax output at input resolution
};

struct GenOutput {
    Tensor feat;  // (feature_channels, H, W)
    Tensor prob;  // (num_classes, H, W), rows sum to 1
};

// Shared encoder with one decoder head per domain. Each decoder emits the
// semantic feature map and the class-probability map, both upsampled back to
// the input resolution.
class Generator {
public:
    explicit Generator(const GeneratorConfig& config);

    GenOutput forward(const Tensor& image, Domain domain, GenTape& tape) const;

    // Any of the gradient tensors may be empty. grad_prob is routed through
    // the softmax; grad_logits bypasses it (for fused cross-entropy).
    void backward(const GenTape& tape, const Tensor& grad_feat, const Tensor& grad_prob,
                  const Tensor& grad_logits);

    std::vector<NamedParam> params();
    void zero_grad();
    const GeneratorConfig& config() const { return config_; }

private:
    struct Decoder {
        ConvParams body;  // encoder width -> feature_channels
        ConvParams head;  // 1x1, feature_channels -> num_classes
    };

    Decoder& decoder(Domain d) { return d == Domain::source ? dec_source_ : dec_target_; }
    const Decoder& decoder(Domain d) const { return d == Domain::source ? dec_source_ : dec_target_; }

    GeneratorConfig config_;
    std::vector<ConvParams> encoder_;
    Decoder dec_source_;
    Decoder dec_target_;
};

}  // namespace uda::nn
