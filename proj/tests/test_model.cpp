#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "oracles.hpp"
#include "uda/nn/checkpoint.hpp"
#include "uda/nn/discriminator.hpp"
#include "uda/nn/generator.hpp"

using namespace uda;
using namespace uda::nn;

namespace {

GeneratorConfig tiny_gen_config(std::uint64_t seed = 1) {
    GeneratorConfig cfg;
    cfg.in_channels = 3;
    cfg.num_classes = 3;
    cfg.encoder_channels = {4, 6};
    cfg.encoder_strides = {2, 1};
    cfg.feature_channels = 5;
    cfg.init_seed = seed;
    return cfg;
}

DiscriminatorConfig tiny_disc_config(std::uint64_t seed = 2) {
    DiscriminatorConfig cfg;
    cfg.in_channels = 3;
    cfg.channels = {4, 6, 1};
    cfg.init_seed = seed;
    return cfg;
}

double min_abs(const Tensor& t) {
    double m = std::numeric_limits<double>::infinity();
    for (double v : t.data) m = std::min(m, std::fabs(v));
    return m;
}

// Smallest |pre-activation| across the tape; finite differences are invalid
// within h of a rectifier kink, so draws that land there get resampled.
double gen_kink_margin(const GenTape& tape) {
    double m = min_abs(tape.dec_pre);
    for (const auto& t : tape.enc_pre) m = std::min(m, min_abs(t));
    return m;
}

double disc_kink_margin(const DiscTape& tape) {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < tape.pre.size(); ++i) m = std::min(m, min_abs(tape.pre[i]));
    return m;
}

}  // namespace

TEST_CASE("softmax of all-zero logits is uniform and normalized") {
    GeneratorConfig cfg = tiny_gen_config();
    Generator gen(cfg);
    for (auto& p : gen.params())
        std::fill(p.value->begin(), p.value->end(), 0.0);

    Tensor img(3, 8, 8, 0.3);
    GenTape tape;
    auto out = gen.forward(img, Domain::source, tape);
    for (double v : out.prob.data) CHECK(v == doctest::Approx(1.0 / 3));
}

TEST_CASE("probability rows sum to one and outputs align with the input") {
    Rng rng(5);
    Generator gen(tiny_gen_config());
    Tensor img = oracle::random_tensor(rng, 3, 8, 8, 0.0, 1.0);
    GenTape tape;
    auto out = gen.forward(img, Domain::target, tape);
    CHECK(out.prob.h == 8);
    CHECK(out.prob.w == 8);
    CHECK(out.feat.h == 8);
    CHECK(out.feat.c == 5);
    const int plane = out.prob.plane();
    for (int i = 0; i < plane; ++i) {
        double s = 0.0;
        for (int c = 0; c < 3; ++c) s += out.prob.data[static_cast<std::size_t>(c) * plane + i];
        CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("forward is bit-stable across repeated calls") {
    Rng rng(6);
    Generator gen(tiny_gen_config());
    Tensor img = oracle::random_tensor(rng, 3, 8, 8, 0.0, 1.0);
    GenTape t1, t2;
    auto a = gen.forward(img, Domain::source, t1);
    auto b = gen.forward(img, Domain::source, t2);
    CHECK(a.prob.data == b.prob.data);
    CHECK(a.feat.data == b.feat.data);
}

TEST_CASE("decoders are domain-isolated behind the shared encoder") {
    Rng rng(8);
    Generator gen(tiny_gen_config());
    Tensor img = oracle::random_tensor(rng, 3, 8, 8, 0.0, 1.0);
    GenTape tape;
    auto before = gen.forward(img, Domain::source, tape);

    // poke every target-decoder weight
    for (auto& p : gen.params()) {
        if (p.name.find("decoder_target") != std::string::npos)
            for (auto& v : *p.value) v += 0.37;
    }
    auto after = gen.forward(img, Domain::source, tape);
    CHECK(before.prob.data == after.prob.data);
    CHECK(before.feat.data == after.feat.data);

    // and the reverse direction
    auto t_before = gen.forward(img, Domain::target, tape);
    for (auto& p : gen.params()) {
        if (p.name.find("decoder_source") != std::string::npos)
            for (auto& v : *p.value) v += 0.19;
    }
    auto t_after = gen.forward(img, Domain::target, tape);
    CHECK(t_before.prob.data == t_after.prob.data);
}

TEST_CASE("backward before forward is a usage error") {
    Generator gen(tiny_gen_config());
    GenTape tape;
    CHECK_THROWS_AS(gen.backward(tape, Tensor(), Tensor(), Tensor()), UsageError);

    Discriminator disc(tiny_disc_config());
    DiscTape dtape;
    CHECK_THROWS_AS(disc.backward(dtape, Tensor(), true), UsageError);
}

TEST_CASE("zero upstream gradient produces zero parameter gradients") {
    Rng rng(9);
    Generator gen(tiny_gen_config());
    Tensor img = oracle::random_tensor(rng, 3, 8, 8, 0.0, 1.0);
    GenTape tape;
    gen.forward(img, Domain::source, tape);
    gen.zero_grad();
    Tensor zero_feat(5, 8, 8), zero_prob(3, 8, 8);
    gen.backward(tape, zero_feat, zero_prob, Tensor());
    for (auto& p : gen.params())
        for (double g : *p.grad) CHECK(g == 0.0);
}

TEST_CASE("discriminator with zero final-layer weights scores 0.5 everywhere") {
    Discriminator disc(tiny_disc_config());
    for (auto& p : disc.params()) {
        if (p.name.find("conv2") != std::string::npos)
            std::fill(p.value->begin(), p.value->end(), 0.0);
    }
    Rng rng(10);
    Tensor prob = oracle::random_tensor(rng, 3, 16, 16, 0.0, 1.0);
    DiscTape tape;
    Tensor score = disc.forward(prob, tape);
    for (double v : score.data) CHECK(v == doctest::Approx(0.5));
}

TEST_CASE("discriminator halves the spatial extent per layer") {
    Discriminator disc5(DiscriminatorConfig{4, {8, 8, 8, 8, 1}, 0.2, 3});
    Rng rng(11);
    Tensor prob = oracle::random_tensor(rng, 4, 64, 64, 0.0, 1.0);
    DiscTape tape;
    Tensor score = disc5.forward(prob, tape);
    CHECK(score.h == 2);  // 64 -> 32 -> 16 -> 8 -> 4 -> 2
    CHECK(score.w == 2);
    for (double v : score.data) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("raising the final bias raises every score") {
    Discriminator disc(tiny_disc_config());
    Rng rng(12);
    Tensor prob = oracle::random_tensor(rng, 3, 16, 16, 0.0, 1.0);
    DiscTape tape;
    Tensor before = disc.forward(prob, tape);
    for (auto& p : disc.params()) {
        if (p.name == "disc.conv2.b")
            for (auto& v : *p.value) v += 5.0;
    }
    Tensor after = disc.forward(prob, tape);
    for (std::size_t i = 0; i < before.data.size(); ++i) CHECK(after.data[i] > before.data[i]);
}

TEST_CASE("conv gradients match central finite differences") {
    Rng rng(100);
    for (auto [k, s] : {std::pair{3, 1}, std::pair{3, 2}, std::pair{4, 2}}) {
        for (int trial = 0; trial < 5; ++trial) {
            ConvParams conv(3, 4, k, s, 1);
            conv.init_he(rng);
            Tensor x = oracle::random_tensor(rng, 3, 8, 8);
            Tensor coeff = oracle::random_tensor(rng, 4, conv.out_extent(8), conv.out_extent(8));

            auto loss = [&]() { return oracle::weighted_sum(coeff, conv_forward(conv, x)); };
            conv.zero_grad();
            Tensor gx = conv_backward(conv, x, coeff);

            oracle::GradCheckStats stats;
            oracle::check_gradient_block(loss, conv.w, conv.gw, stats);
            oracle::check_gradient_block(loss, conv.b, conv.gb, stats);
            oracle::check_gradient_block(loss, x.data, gx.data, stats);
            CHECK(stats.failed == 0);
        }
    }
}

TEST_CASE("activation and resampling layers match finite differences") {
    Rng rng(101);

    SUBCASE("relu") {
        Tensor x = oracle::random_tensor(rng, 2, 5, 5);
        for (auto& v : x.data) v += (v >= 0 ? 0.1 : -0.1);  // keep clear of the kink
        Tensor coeff = oracle::random_tensor(rng, 2, 5, 5);
        auto loss = [&]() { return oracle::weighted_sum(coeff, relu_forward(x)); };
        Tensor g = relu_backward(x, coeff);
        oracle::GradCheckStats stats;
        oracle::check_gradient_block(loss, x.data, g.data, stats);
        CHECK(stats.failed == 0);
    }
    SUBCASE("leaky relu") {
        Tensor x = oracle::random_tensor(rng, 2, 5, 5);
        for (auto& v : x.data) v += (v >= 0 ? 0.1 : -0.1);
        Tensor coeff = oracle::random_tensor(rng, 2, 5, 5);
        auto loss = [&]() { return oracle::weighted_sum(coeff, leaky_relu_forward(x, 0.2)); };
        Tensor g = leaky_relu_backward(x, coeff, 0.2);
        oracle::GradCheckStats stats;
        oracle::check_gradient_block(loss, x.data, g.data, stats);
        CHECK(stats.failed == 0);
    }
    SUBCASE("sigmoid") {
        Tensor x = oracle::random_tensor(rng, 2, 5, 5, -2.0, 2.0);
        Tensor coeff = oracle::random_tensor(rng, 2, 5, 5);
        auto loss = [&]() { return oracle::weighted_sum(coeff, sigmoid_forward(x)); };
        Tensor y = sigmoid_forward(x);
        Tensor g = sigmoid_backward(y, coeff);
        oracle::GradCheckStats stats;
        oracle::check_gradient_block(loss, x.data, g.data, stats);
        CHECK(stats.failed == 0);
    }
    SUBCASE("softmax") {
        Tensor z = oracle::random_tensor(rng, 4, 5, 5, -2.0, 2.0);
        Tensor coeff = oracle::random_tensor(rng, 4, 5, 5);
        auto loss = [&]() { return oracle::weighted_sum(coeff, softmax_channels_forward(z)); };
        Tensor p = softmax_channels_forward(z);
        Tensor g = softmax_channels_backward(p, coeff);
        oracle::GradCheckStats stats;
        oracle::check_gradient_block(loss, z.data, g.data, stats);
        CHECK(stats.failed == 0);
    }
    SUBCASE("nearest upsample") {
        Tensor x = oracle::random_tensor(rng, 2, 3, 3);
        Tensor coeff = oracle::random_tensor(rng, 2, 6, 6);
        auto loss = [&]() { return oracle::weighted_sum(coeff, upsample_nearest_forward(x, 2, 6, 6)); };
        Tensor g = upsample_nearest_backward(coeff, 2, 3, 3);
        oracle::GradCheckStats stats;
        oracle::check_gradient_block(loss, x.data, g.data, stats);
        CHECK(stats.failed == 0);
    }
}

TEST_CASE("whole-generator gradients match finite differences") {
    for (int trial = 0; trial < 3; ++trial) {
        Rng rng(200 + trial);
        Domain domain = trial % 2 == 0 ? Domain::source : Domain::target;

        Generator gen(tiny_gen_config(300 + trial));
        Tensor img, coeff_f, coeff_p;
        GenTape tape;
        for (int attempt = 0;; ++attempt) {
            REQUIRE(attempt < 50);
            img = oracle::random_tensor(rng, 3, 8, 8, 0.0, 1.0);
            gen.forward(img, domain, tape);
            if (gen_kink_margin(tape) > 1e-3) break;
        }
        coeff_f = oracle::random_tensor(rng, 5, 8, 8);
        coeff_p = oracle::random_tensor(rng, 3, 8, 8);

        auto loss = [&]() {
            GenTape t;
            auto out = gen.forward(img, domain, t);
            return oracle::weighted_sum(coeff_f, out.feat) + oracle::weighted_sum(coeff_p, out.prob);
        };

        gen.zero_grad();
        gen.forward(img, domain, tape);
        gen.backward(tape, coeff_f, coeff_p, Tensor());

        oracle::GradCheckStats stats;
        for (auto& p : gen.params()) oracle::check_gradient_block(loss, *p.value, *p.grad, stats);
        CHECK(stats.failed == 0);
        CHECK(stats.checked > 500);
    }
}

TEST_CASE("whole-discriminator gradients match finite differences") {
    for (int trial = 0; trial < 3; ++trial) {
        Rng rng(400 + trial);
        Discriminator disc(tiny_disc_config(500 + trial));

        Tensor prob;
        DiscTape tape;
        for (int attempt = 0;; ++attempt) {
            REQUIRE(attempt < 50);
            prob = oracle::random_tensor(rng, 3, 16, 16, 0.0, 1.0);
            disc.forward(prob, tape);
            if (disc_kink_margin(tape) > 1e-3) break;
        }
        Tensor coeff = oracle::random_tensor(rng, 1, tape.score.h, tape.score.w);

        auto loss = [&]() {
            DiscTape t;
            return oracle::weighted_sum(coeff, disc.forward(prob, t));
        };

        disc.zero_grad();
        disc.forward(prob, tape);
        Tensor ginput = disc.backward(tape, coeff, /*accumulate_params=*/true);

        oracle::GradCheckStats stats;
        for (auto& p : disc.params()) oracle::check_gradient_block(loss, *p.value, *p.grad, stats);
        oracle::check_gradient_block(loss, prob.data, ginput.data, stats);
        CHECK(stats.failed == 0);
    }
}

TEST_CASE("frozen backward leaves discriminator parameter gradients untouched") {
    Rng rng(600);
    Discriminator disc(tiny_disc_config());
    Tensor prob = oracle::random_tensor(rng, 3, 16, 16, 0.0, 1.0);
    DiscTape tape;
    disc.forward(prob, tape);
    disc.zero_grad();
    Tensor coeff = oracle::random_tensor(rng, 1, tape.score.h, tape.score.w);
    disc.backward(tape, coeff, /*accumulate_params=*/false);
    for (auto& p : disc.params())
        for (double g : *p.grad) CHECK(g == 0.0);
}

TEST_CASE("checkpoints round-trip parameters and reject hash mismatches") {
    namespace fs = std::filesystem;
    Generator gen(tiny_gen_config(77));
    Checkpoint ckpt;
    ckpt.config_hash = 1234;
    ckpt.iteration = 42;
    ckpt.rng_state = "state blob";
    for (auto& p : gen.params()) ckpt.tensors["G/" + p.name] = *p.value;

    fs::path path = fs::temp_directory_path() / "uda_test" / "ckpt.bin";
    fs::create_directories(path.parent_path());
    save_checkpoint(path.string(), ckpt);
    Checkpoint loaded = load_checkpoint(path.string());
    CHECK(loaded.config_hash == 1234);
    CHECK(loaded.iteration == 42);
    CHECK(loaded.rng_state == "state blob");
    CHECK(loaded.tensors == ckpt.tensors);

    CHECK_THROWS_AS(load_checkpoint("/nonexistent/nothing.ckpt"), DataError);
}
