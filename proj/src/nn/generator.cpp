#include "uda/nn/generator.hpp"

namespace uda::nn {

void GeneratorConfig::validate() const {
    if (encoder_channels.empty()) throw ConfigError("model.encoder_channels must not be empty");
    if (encoder_strides.size() != encoder_channels.size())
        throw ConfigError("model.encoder_strides must match encoder_channels in length");
    for (int s : encoder_strides)
        if (s != 1 && s != 2) throw ConfigError("model.encoder_strides entries must be 1 or 2");
    if (num_classes < 2) throw ConfigError("model.num_classes must be >= 2");
    if (feature_channels < 1) throw ConfigError("model.feature_channels must be >= 1");
    if (in_channels < 1) throw ConfigError("model.in_channels must be >= 1");
}

Generator::Generator(const GeneratorConfig& config) : config_(config) {
    config_.validate();
    Rng rng(config_.init_seed);

    int in_c = config_.in_channels;
    for (std::size_t i = 0; i < config_.encoder_channels.size(); ++i) {
        ConvParams conv(in_c, config_.encoder_channels[i], 3, config_.encoder_strides[i], 1);
        conv.init_he(rng);
        encoder_.push_back(std::move(conv));
        in_c = config_.encoder_channels[i];
    }

    dec_source_.body = ConvParams(in_c, config_.feature_channels, 3, 1, 1);
    dec_source_.body.init_he(rng);
    dec_source_.head = ConvParams(config_.feature_channels, config_.num_classes, 1, 1, 0);
    dec_source_.head.init_he(rng);
    // Both decoders start from the same weights; only their training signals
    // differ afterwards.
    dec_target_ = dec_source_;
}

GenOutput Generator::forward(const Tensor& image, Domain domain, GenTape& tape) const {
    if (image.c != config_.in_channels) throw ConfigError("generator input channel mismatch");

    tape = GenTape{};
    tape.domain = domain;
    tape.input = image;
    tape.enc_pre.reserve(encoder_.size());
    tape.enc_act.reserve(encoder_.size());

    const Tensor* cur = &image;
    for (const auto& conv : encoder_) {
        tape.enc_pre.push_back(conv_forward(conv, *cur));
        tape.enc_act.push_back(leaky_relu_forward(tape.enc_pre.back(), kGeneratorLeakySlope));
        cur = &tape.enc_act.back();
    }

    const Decoder& dec = decoder(domain);
    tape.dec_pre = conv_forward(dec.body, *cur);
    tape.feat_small = leaky_relu_forward(tape.dec_pre, kGeneratorLeakySlope);
    tape.logits_small = conv_forward(dec.head, tape.feat_small);

    const int factor = config_.downscale();
    GenOutput out;
    out.feat = upsample_nearest_forward(tape.feat_small, factor, image.h, image.w);
    Tensor logits = upsample_nearest_forward(tape.logits_small, factor, image.h, image.w);
    out.prob = softmax_channels_forward(logits);
    tape.prob = out.prob;
    tape.valid = true;
    return out;
}

void Generator::backward(const GenTape& tape, const Tensor& grad_feat, const Tensor& grad_prob,
                         const Tensor& grad_logits) {
    if (!tape.valid) throw UsageError("generator backward called without a recorded forward pass");

    const int factor = config_.downscale();
    Decoder& dec = decoder(tape.domain);

    // Route probability/logit gradients down to the small logits.
    Tensor gz_full;
    if (!grad_prob.empty()) gz_full = softmax_channels_backward(tape.prob, grad_prob);
    if (!grad_logits.empty()) {
        if (gz_full.empty()) {
            gz_full = grad_logits;
        } else {
            for (std::size_t i = 0; i < gz_full.data.size(); ++i) gz_full.data[i] += grad_logits.data[i];
        }
    }

    Tensor gfeat_small(tape.feat_small.c, tape.feat_small.h, tape.feat_small.w);
    if (!gz_full.empty()) {
        Tensor gz_small = upsample_nearest_backward(gz_full, factor, tape.logits_small.h, tape.logits_small.w);
        gfeat_small = conv_backward(dec.head, tape.feat_small, gz_small);
    }
    if (!grad_feat.empty()) {
        Tensor gf = upsample_nearest_backward(grad_feat, factor, tape.feat_small.h, tape.feat_small.w);
        for (std::size_t i = 0; i < gfeat_small.data.size(); ++i) gfeat_small.data[i] += gf.data[i];
    }

    Tensor gpre = leaky_relu_backward(tape.dec_pre, gfeat_small, kGeneratorLeakySlope);
    Tensor g = conv_backward(dec.body, tape.enc_act.back(), gpre);

    for (int i = static_cast<int>(encoder_.size()) - 1; i >= 0; --i) {
        Tensor gz = leaky_relu_backward(tape.enc_pre[i], g, kGeneratorLeakySlope);
        const Tensor& input = i == 0 ? tape.input : tape.enc_act[i - 1];
        g = conv_backward(encoder_[i], input, gz);
    }
}

std::vector<NamedParam> Generator::params() {
    std::vector<NamedParam> out;
    for (std::size_t i = 0; i < encoder_.size(); ++i)
        encoder_[i].collect("encoder.conv" + std::to_string(i), out);
    dec_source_.body.collect("decoder_source.body", out);
    dec_source_.head.collect("decoder_source.head", out);
    dec_target_.body.collect("decoder_target.body", out);
    dec_target_.head.collect("decoder_target.head", out);
    return out;
}

void Generator::zero_grad() {
    for (auto& conv : encoder_) conv.zero_grad();
    dec_source_.body.zero_grad();
    dec_source_.head.zero_grad();
    dec_target_.body.zero_grad();
    dec_target_.head.zero_grad();
}

}  // namespace uda::nn
