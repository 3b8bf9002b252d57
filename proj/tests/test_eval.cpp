#include <doctest.h>

#include <cmath>
#include <sstream>

#include "oracles.hpp"
#include "uda/eval.hpp"

using namespace uda;
using namespace uda::eval;

namespace {

data::LabelMap labels_of(const std::vector<int>& vals, int h, int w, int nc) {
    data::LabelMap lm(h, w, nc);
    for (std::size_t i = 0; i < vals.size(); ++i) lm.grid[i] = static_cast<std::uint16_t>(vals[i]);
    return lm;
}

}  // namespace

TEST_CASE("perfect predictions give a diagonal confusion matrix") {
    Rng rng(60);
    data::LabelMap truth(8, 8, 3);
    for (auto& v : truth.grid) v = static_cast<std::uint16_t>(uniform_int(rng, 0, 2));
    auto cm = confusion(truth, truth, 3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            if (i != j) CHECK(cm.at(i, j) == 0);
    CHECK(cm.total() == 64);
    CHECK(iou_per_class(cm).miou == doctest::Approx(1.0));
}

TEST_CASE("fully ignored truth yields the zero matrix") {
    data::LabelMap truth(4, 4, 3, data::kIgnoreIndex);
    data::LabelMap pred(4, 4, 3, 1);
    auto cm = confusion(pred, truth, 3);
    CHECK(cm.total() == 0);
}

TEST_CASE("confusion accumulation matches the double loop on random pairs") {
    Rng rng(61);
    for (int trial = 0; trial < 20; ++trial) {
        data::LabelMap truth(8, 8, 4), pred(8, 8, 4);
        for (auto& v : truth.grid)
            v = uniform_unit(rng) < 0.1 ? data::kIgnoreIndex
                                        : static_cast<std::uint16_t>(uniform_int(rng, 0, 3));
        for (auto& v : pred.grid) v = static_cast<std::uint16_t>(uniform_int(rng, 0, 3));
        auto cm = confusion(pred, truth, 4);

        std::vector<std::uint64_t> expect(16, 0);
        for (int i = 0; i < 64; ++i) {
            if (truth.grid[i] == data::kIgnoreIndex) continue;
            ++expect[truth.grid[i] * 4 + pred.grid[i]];
        }
        CHECK(cm.counts == expect);

        // row sums cover every evaluated pixel
        std::uint64_t evaluated = 0;
        for (auto v : truth.grid) evaluated += v != data::kIgnoreIndex;
        CHECK(cm.total() == evaluated);
    }
}

TEST_CASE("IoU formula anchors") {
    ConfusionMatrix cm(2);
    cm.at(1, 1) = 8;  // TP for class 1
    cm.at(0, 1) = 2;  // FP
    cm.at(0, 0) = 5;
    auto rep = iou_per_class(cm);
    CHECK(rep.per_class[1] == doctest::Approx(0.8));

    ConfusionMatrix zero(3);
    zero.at(0, 0) = 4;
    auto rep2 = iou_per_class(zero);
    CHECK(rep2.valid[0]);
    CHECK_FALSE(rep2.valid[1]);
    CHECK_FALSE(rep2.valid[2]);
    CHECK(rep2.excluded == 2);
    CHECK(rep2.miou == doctest::Approx(1.0));  // mean over valid classes only
}

TEST_CASE("per-class IoU matches the formula oracle on random matrices") {
    Rng rng(62);
    for (int trial = 0; trial < 20; ++trial) {
        ConfusionMatrix cm(4);
        for (auto& v : cm.counts) v = static_cast<std::uint64_t>(uniform_int(rng, 0, 30));
        auto rep = iou_per_class(cm);
        for (int k = 0; k < 4; ++k) {
            double tp = static_cast<double>(cm.at(k, k));
            double fp = 0, fn = 0;
            for (int j = 0; j < 4; ++j) {
                if (j == k) continue;
                fp += static_cast<double>(cm.at(j, k));
                fn += static_cast<double>(cm.at(k, j));
            }
            if (tp + fp + fn == 0) {
                CHECK_FALSE(rep.valid[k]);
            } else {
                CHECK(rep.per_class[k] == doctest::Approx(tp / (tp + fp + fn)).epsilon(1e-12));
                CHECK(rep.per_class[k] >= 0.0);
                CHECK(rep.per_class[k] <= 1.0);
            }
        }
    }
}

TEST_CASE("mIoU is invariant under class permutation") {
    Rng rng(63);
    ConfusionMatrix cm(3);
    for (auto& v : cm.counts) v = static_cast<std::uint64_t>(uniform_int(rng, 1, 20));
    auto base = iou_per_class(cm).miou;

    // swap classes 0 and 2 in both axes
    ConfusionMatrix perm(3);
    auto p = [](int k) { return k == 0 ? 2 : (k == 2 ? 0 : 1); };
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) perm.at(p(i), p(j)) = cm.at(i, j);
    CHECK(iou_per_class(perm).miou == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("NAM reproduces the published anchor and boundary cases") {
    CHECK(nam(46.8, 66.3, 78.4) == doctest::Approx(61.7).epsilon(0.001));
    CHECK(std::fabs(nam(46.8, 66.3, 78.4) - 61.7) < 0.05);
    CHECK(nam(40.0, 40.0, 70.0) == doctest::Approx(0.0));
    CHECK(nam(40.0, 70.0, 70.0) == doctest::Approx(100.0));
    CHECK_THROWS_AS(nam(50.0, 60.0, 50.0), ConfigError);
}

TEST_CASE("NAM is invariant under affine rescaling of its inputs") {
    Rng rng(64);
    for (int trial = 0; trial < 100; ++trial) {
        double so = uniform_range(rng, 10, 50);
        double to = so + uniform_range(rng, 5, 40);
        double ada = uniform_range(rng, so, to);
        double a = uniform_range(rng, 0.2, 3.0);
        double b = uniform_range(rng, -10, 10);
        CHECK(nam(a * so + b, a * ada + b, a * to + b) ==
              doctest::Approx(nam(so, ada, to)).epsilon(1e-9));
    }
}

TEST_CASE("ablation reports render and round-trip") {
    AblationReport rep;
    rep.class_names = {"bg", "rect", "disk", "bar"};
    rep.rows.push_back({"Source only", false, false, false, false, 41.25, {0.9, 0.3, 0.2, 0.25}});
    rep.rows.push_back({"+IMA", true, false, false, false, 52.5, {0.92, 0.4, 0.35, 0.4}});
    rep.rows.push_back({"+all", true, true, true, true, 63.125, {0.95, 0.55, 0.5, 0.55}});

    SUBCASE("single row renders") {
        AblationReport one;
        one.rows.push_back({"Source only", false, false, false, false, 10.0, {}});
        auto text = one.to_text();
        CHECK(text.find("Source only") != std::string::npos);
        CHECK(text.find("10.0") != std::string::npos);
    }

    SUBCASE("checkmark pattern follows the flags") {
        auto text = rep.to_text();
        CHECK(text.find("Source only") != std::string::npos);
        // +IMA row has exactly one checkmark
        std::istringstream in(text);
        std::string line;
        std::getline(in, line);  // header
        std::getline(in, line);  // Source only
        CHECK(line.find('x') == std::string::npos);
        std::getline(in, line);  // +IMA
        CHECK(std::count(line.begin(), line.end(), 'x') == 1);
        std::getline(in, line);  // +all
        CHECK(std::count(line.begin(), line.end(), 'x') == 4);
    }

    SUBCASE("JSON round-trip is exact") {
        auto parsed = AblationReport::from_json(rep.to_json(true));
        REQUIRE(parsed.rows.size() == rep.rows.size());
        for (std::size_t i = 0; i < rep.rows.size(); ++i) {
            CHECK(parsed.rows[i].label == rep.rows[i].label);
            CHECK(parsed.rows[i].ima == rep.rows[i].ima);
            CHECK(parsed.rows[i].gfa == rep.rows[i].gfa);
            CHECK(parsed.rows[i].isia == rep.rows[i].isia);
            CHECK(parsed.rows[i].aim == rep.rows[i].aim);
            CHECK(parsed.rows[i].miou == rep.rows[i].miou);  // bitwise through JSON
            CHECK(parsed.rows[i].per_class == rep.rows[i].per_class);
        }
    }
}

TEST_CASE("argmax maps pick the strongest channel") {
    Tensor p(3, 1, 2);
    // pixel 0: class 2 wins; pixel 1: class 0 wins
    p.data = {0.2, 0.6, 0.1, 0.1, 0.7, 0.3};
    auto lm = argmax_map(p);
    CHECK(lm.at(0, 0) == 2);
    CHECK(lm.at(0, 1) == 0);
}
