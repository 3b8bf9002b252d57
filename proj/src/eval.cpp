#include "uda/eval.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "uda/common.hpp"

using nlohmann::json;

namespace uda::eval {

std::uint64_t ConfusionMatrix::total() const {
    std::uint64_t t = 0;
    for (auto v : counts) t += v;
    return t;
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
    if (other.num_classes != num_classes) throw UsageError("confusion merge: class-count mismatch");
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
}

data::LabelMap argmax_map(const Tensor& prob, int ignore_index) {
    data::LabelMap out(prob.h, prob.w, prob.c, 0, ignore_index);
    const int plane = prob.plane();
    for (int i = 0; i < plane; ++i) {
        int best = 0;
        double best_v = prob.data[i];
        for (int c = 1; c < prob.c; ++c) {
            double v = prob.data[static_cast<std::size_t>(c) * plane + i];
            if (v > best_v) {
                best_v = v;
                best = c;
            }
        }
        out.grid[i] = static_cast<std::uint16_t>(best);
    }
    return out;
}

void accumulate_confusion(ConfusionMatrix& cm, const data::LabelMap& prediction,
                          const data::LabelMap& truth) {
    if (prediction.h != truth.h || prediction.w != truth.w)
        throw UsageError("confusion: prediction/truth shape mismatch");
    for (std::size_t i = 0; i < truth.size(); ++i) {
        int t = truth.grid[i];
        if (t == truth.ignore_index) continue;
        int p = prediction.grid[i];
        if (t < 0 || t >= cm.num_classes || p < 0 || p >= cm.num_classes)
            throw DataError("confusion: class id outside matrix range");
        ++cm.at(t, p);
    }
}

ConfusionMatrix confusion(const data::LabelMap& prediction, const data::LabelMap& truth,
                          int num_classes) {
    ConfusionMatrix cm(num_classes);
    accumulate_confusion(cm, prediction, truth);
    return cm;
}

IouReport iou_per_class(const ConfusionMatrix& cm) {
    const int nc = cm.num_classes;
    IouReport rep;
    rep.per_class.assign(nc, 0.0);
    rep.valid.assign(nc, false);

    double sum = 0.0;
    int used = 0;
    for (int k = 0; k < nc; ++k) {
        std::uint64_t tp = cm.at(k, k);
        std::uint64_t fp = 0, fn = 0;
        for (int j = 0; j < nc; ++j) {
            if (j == k) continue;
            fp += cm.at(j, k);
            fn += cm.at(k, j);
        }
        std::uint64_t uni = tp + fp + fn;
        if (uni == 0) {
            ++rep.excluded;
            continue;
        }
        rep.per_class[k] = static_cast<double>(tp) / static_cast<double>(uni);
        rep.valid[k] = true;
        sum += rep.per_class[k];
        ++used;
    }
    rep.miou = used > 0 ? sum / used : 0.0;
    return rep;
}

double nam(double iou_source_only, double iou_adapted, double iou_target_only) {
    double gap = iou_target_only - iou_source_only;
    if (std::fabs(gap) < 1e-12)
        throw ConfigError("NAM undefined: target-only equals source-only mIoU");
    return (iou_adapted - iou_source_only) / gap * 100.0;
}

namespace {

std::string fmt_pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", v);
    return buf;
}

}  // namespace

std::string AblationReport::to_text(bool per_class) const {
    std::size_t label_w = 6;
    for (const auto& r : rows) label_w = std::max(label_w, r.label.size());

    std::ostringstream out;
    out << std::string(label_w, ' ') << "  IMA GFA ISIA AIM  mIoU(%)";
    if (per_class)
        for (const auto& name : class_names) out << "  " << name;
    out << "\n";

    for (const auto& r : rows) {
        out << r.label << std::string(label_w - r.label.size(), ' ') << "   " << (r.ima ? "x" : " ")
            << "   " << (r.gfa ? "x" : " ") << "   " << (r.isia ? "x" : " ") << "    "
            << (r.aim ? "x" : " ") << "   " << fmt_pct(r.miou);
        if (per_class)
            for (double v : r.per_class) out << "  " << fmt_pct(v);
        out << "\n";
    }
    return out.str();
}

std::string AblationReport::to_json(bool per_class) const {
    json j;
    j["class_names"] = class_names;
    j["rows"] = json::array();
    for (const auto& r : rows) {
        json row = {{"label", r.label}, {"ima", r.ima},   {"gfa", r.gfa},
                    {"isia", r.isia},   {"aim", r.aim},   {"miou", r.miou}};
        if (per_class) row["per_class"] = r.per_class;
        j["rows"].push_back(row);
    }
    return j.dump(2);
}

AblationReport AblationReport::from_json(const std::string& json_text) {
    json j = json::parse(json_text);
    AblationReport rep;
    if (j.contains("class_names")) rep.class_names = j["class_names"].get<std::vector<std::string>>();
    for (const auto& row : j["rows"]) {
        AblationRow r;
        r.label = row["label"].get<std::string>();
        r.ima = row["ima"].get<bool>();
        r.gfa = row["gfa"].get<bool>();
        r.isia = row["isia"].get<bool>();
        r.aim = row["aim"].get<bool>();
        r.miou = row["miou"].get<double>();
        if (row.contains("per_class")) r.per_class = row["per_class"].get<std::vector<double>>();
        rep.rows.push_back(std::move(r));
    }
    return rep;
}

}  // namespace uda::eval
