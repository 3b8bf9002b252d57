#include "uda/nn/discriminator.hpp"

namespace uda::nn {

void DiscriminatorConfig::validate() const {
    if (channels.empty()) throw ConfigError("discriminator.channels must not be empty");
    if (channels.back() != 1) throw ConfigError("discriminator.channels must end in 1 (score map)");
    if (in_channels < 1) throw ConfigError("discriminator.in_channels must be >= 1");
    if (leaky_slope < 0.0 || leaky_slope >= 1.0)
        throw ConfigError("discriminator.leaky_slope must be in [0,1)");
}

Discriminator::Discriminator(const DiscriminatorConfig& config) : config_(config) {
    config_.validate();
    Rng rng(config_.init_seed);
    int in_c = config_.in_channels;
    for (int out_c : config_.channels) {
        ConvParams conv(in_c, out_c, 4, 2, 1);
        conv.init_he(rng);
        convs_.push_back(std::move(conv));
        in_c = out_c;
    }
}

Tensor Discriminator::forward(const Tensor& prob_map, DiscTape& tape) const {
    tape = DiscTape{};
    tape.input = prob_map;

    const Tensor* cur = &prob_map;
    for (std::size_t i = 0; i < convs_.size(); ++i) {
        tape.pre.push_back(conv_forward(convs_[i], *cur));
        if (i + 1 < convs_.size()) {
            tape.act.push_back(leaky_relu_forward(tape.pre.back(), config_.leaky_slope));
            cur = &tape.act.back();
        }
    }
    tape.score = sigmoid_forward(tape.pre.back());
    tape.valid = true;
    return tape.score;
}

Tensor Discriminator::backward(const DiscTape& tape, const Tensor& grad_score, bool accumulate_params) {
    if (!tape.valid) throw UsageError("discriminator backward called without a recorded forward pass");

    Tensor g = sigmoid_backward(tape.score, grad_score);
    for (int i = static_cast<int>(convs_.size()) - 1; i >= 0; --i) {
        const Tensor& input = i == 0 ? tape.input : tape.act[i - 1];
        g = conv_backward(convs_[i], input, g, accumulate_params);
        if (i > 0) g = leaky_relu_backward(tape.pre[i - 1], g, config_.leaky_slope);
    }
    return g;
}

std::vector<NamedParam> Discriminator::params() {
    std::vector<NamedParam> out;
    for (std::size_t i = 0; i < convs_.size(); ++i) convs_[i].collect("disc.conv" + std::to_string(i), out);
    return out;
}

void Discriminator::zero_grad() {
    for (auto& conv : convs_) conv.zero_grad();
}

}  // namespace uda::nn
