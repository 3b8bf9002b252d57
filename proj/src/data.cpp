#include "uda/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "uda/common.hpp"
#include "uda/image_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace uda::data {

void DatasetSpec::validate() const {
    if (height < 8) throw ConfigError("dataset.height must be >= 8 (got " + std::to_string(height) + ")");
    if (width < 8) throw ConfigError("dataset.width must be >= 8 (got " + std::to_string(width) + ")");
    if (num_classes < 2 || num_classes > 254)
        throw ConfigError("dataset.num_classes must be in [2,254] (got " + std::to_string(num_classes) + ")");
    for (int k : foreground_class_ids) {
        if (k < 0 || k >= num_classes)
            throw ConfigError("dataset.foreground_class_ids entry " + std::to_string(k) +
                              " outside [0," + std::to_string(num_classes - 1) + "]");
    }
    if (shift.gain.size() != 3 || shift.bias.size() != 3)
        throw ConfigError("dataset.shift.gain/bias must each hold 3 channel values");
    if (base_noise < 0.0) throw ConfigError("dataset.base_noise must be >= 0");
    if (shift.extra_noise < 0.0) throw ConfigError("dataset.shift.extra_noise must be >= 0");
    if (shift.size_scale <= -1.0) throw ConfigError("dataset.shift.size_scale must be > -1");
}

namespace {

struct Rgb {
    double r, g, b;
};

Rgb class_color(int k) {
    // Fixed palette for the first shape classes, golden-angle hues beyond.
    static const Rgb palette[] = {
        {0.76, 0.24, 0.20},  // class 1
        {0.18, 0.68, 0.30},  // class 2
        {0.22, 0.34, 0.82},  // class 3
    };
    if (k >= 1 && k <= 3) return palette[k - 1];
    double hue = std::fmod(0.137 + (k - 4) * 0.381966, 1.0) * 6.0;
    int sector = static_cast<int>(hue);
    double f = hue - sector;
    double v = 0.8, s = 0.7;
    double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
    switch (sector % 6) {
        case 0: return {v, t, p};
        case 1: return {q, v, p};
        case 2: return {p, v, t};
        case 3: return {p, q, v};
        case 4: return {t, p, v};
        default: return {v, p, q};
    }
}

struct Canvas {
    Tensor image;
    LabelMap label;
};

void paint_pixel(Canvas& cv, int y, int x, const Rgb& col, int cls) {
    if (y < 0 || y >= cv.image.h || x < 0 || x >= cv.image.w) return;
    cv.image.at(0, y, x) = col.r;
    cv.image.at(1, y, x) = col.g;
    cv.image.at(2, y, x) = col.b;
    cv.label.set(y, x, cls);
}

// One sample of the shared shape-layout process. `shifted` applies the
// spec's domain shift (color affine, extra noise, size scaling).
Canvas render_sample(const DatasetSpec& spec, Rng& rng, bool shifted) {
    const int H = spec.height, W = spec.width;
    Canvas cv{Tensor(3, H, W), LabelMap(H, W, spec.num_classes, 0)};

    double px_scale = std::min(H, W) / 64.0;
    double size_mult = px_scale * (shifted ? 1.0 + spec.shift.size_scale : 1.0);

    Rgb bg{0.45 + uniform_range(rng, -0.05, 0.05), 0.45 + uniform_range(rng, -0.05, 0.05),
           0.48 + uniform_range(rng, -0.05, 0.05)};
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) paint_pixel(cv, y, x, bg, 0);

    int n_shapes = uniform_int(rng, 3, 6);
    for (int s = 0; s < n_shapes; ++s) {
        int cls = uniform_int(rng, 1, spec.num_classes - 1);
        Rgb base = class_color(cls);
        Rgb col{base.r + uniform_range(rng, -0.06, 0.06), base.g + uniform_range(rng, -0.06, 0.06),
                base.b + uniform_range(rng, -0.06, 0.06)};
        int cy = uniform_int(rng, 0, H - 1);
        int cx = uniform_int(rng, 0, W - 1);

        int kind = (cls - 1) % 3;
        if (kind == 0) {  // rectangle
            int hy = std::max(1, static_cast<int>(std::lround(uniform_range(rng, 4, 10) * size_mult)));
            int hx = std::max(1, static_cast<int>(std::lround(uniform_range(rng, 4, 10) * size_mult)));
            for (int y = cy - hy; y <= cy + hy; ++y)
                for (int x = cx - hx; x <= cx + hx; ++x) paint_pixel(cv, y, x, col, cls);
        } else if (kind == 1) {  // disk
            int r = std::max(1, static_cast<int>(std::lround(uniform_range(rng, 4, 10) * size_mult)));
            for (int y = cy - r; y <= cy + r; ++y)
                for (int x = cx - r; x <= cx + r; ++x)
                    if ((y - cy) * (y - cy) + (x - cx) * (x - cx) <= r * r) paint_pixel(cv, y, x, col, cls);
        } else {  // bar
            int hl = std::max(2, static_cast<int>(std::lround(uniform_range(rng, 8, 18) * size_mult)));
            int ht = std::max(1, static_cast<int>(std::lround(uniform_range(rng, 1, 3) * size_mult)));
            bool horizontal = (rng() & 1) != 0;
            int hy = horizontal ? ht : hl;
            int hx = horizontal ? hl : ht;
            for (int y = cy - hy; y <= cy + hy; ++y)
                for (int x = cx - hx; x <= cx + hx; ++x) paint_pixel(cv, y, x, col, cls);
        }
    }

    double noise = spec.base_noise + (shifted ? spec.shift.extra_noise : 0.0);
    for (int c = 0; c < 3; ++c) {
        double gain = shifted ? spec.shift.gain[c] : 1.0;
        double bias = shifted ? spec.shift.bias[c] : 0.0;
        double* plane = cv.image.channel(c);
        for (int i = 0; i < H * W; ++i) {
            double v = gain * plane[i] + bias;
            if (noise > 0.0) v += uniform_range(rng, -noise, noise);
            v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
            // snap to the 8-bit grid so disk round-trips are byte-identical
            plane[i] = std::lround(v * 255.0) / 255.0;
        }
    }
    return cv;
}

std::string sample_id(const char* prefix, int i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s_%05d", prefix, i);
    return buf;
}

}  // namespace

PairDatasets generate_pair_datasets(const DatasetSpec& spec, int n_source, int n_target) {
    spec.validate();
    if (n_source < 1 || n_target < 1) throw ConfigError("sample counts must be >= 1");

    PairDatasets out;
    Rng src_rng(spec.seed);
    for (int i = 0; i < n_source; ++i) {
        Canvas cv = render_sample(spec, src_rng, false);
        out.source.push_back({std::move(cv.image), std::move(cv.label), sample_id("src", i)});
    }
    Rng tgt_rng(spec.seed ^ 0x9e3779b97f4a7c15ull);
    for (int i = 0; i < n_target; ++i) {
        Canvas cv = render_sample(spec, tgt_rng, true);
        out.target.push_back({std::move(cv.image), sample_id("tgt", i)});
        out.target_labels.push_back(std::move(cv.label));
    }
    return out;
}

namespace {

std::vector<fs::path> sorted_pngs(const std::string& dir) {
    if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    return files;
}

LabelMap raster_to_label(const io::GrayRaster& raw, const IdMap& id_map, int num_classes, int ignore_index) {
    LabelMap lm(raw.h, raw.w, num_classes, 0, ignore_index);
    for (std::size_t i = 0; i < raw.pixels.size(); ++i) {
        auto it = id_map.find(raw.pixels[i]);
        int v = (it == id_map.end()) ? ignore_index : it->second;
        if (v != ignore_index && (v < 0 || v >= num_classes))
            throw ConfigError("id_map maps raw id " + std::to_string(raw.pixels[i]) + " to " +
                              std::to_string(v) + ", outside [0," + std::to_string(num_classes - 1) + "]");
        lm.grid[i] = static_cast<std::uint16_t>(v);
    }
    return lm;
}

}  // namespace

std::vector<LabeledSample> load_labeled(const std::string& images_dir, const std::string& labels_dir,
                                        const IdMap& id_map, int num_classes, int ignore_index) {
    auto images = sorted_pngs(images_dir);
    if (!fs::is_directory(labels_dir)) throw DataError("labels directory missing: " + labels_dir);

    std::vector<std::string> unmatched;
    std::vector<LabeledSample> out;
    for (const auto& img_path : images) {
        std::string stem = img_path.stem().string();
        fs::path lbl_path = fs::path(labels_dir) / (stem + ".png");
        if (!fs::exists(lbl_path)) {
            unmatched.push_back(stem);
            continue;
        }
        Tensor img = io::read_image_png(img_path.string());
        io::GrayRaster raw = io::read_gray_png(lbl_path.string());
        if (raw.h != img.h || raw.w != img.w)
            throw DataError("image/label shape mismatch for stem '" + stem + "': image " +
                            std::to_string(img.h) + "x" + std::to_string(img.w) + " vs label " +
                            std::to_string(raw.h) + "x" + std::to_string(raw.w));
        out.push_back({std::move(img), raster_to_label(raw, id_map, num_classes, ignore_index), stem});
    }
    if (!unmatched.empty()) {
        std::ostringstream msg;
        msg << "missing label for " << unmatched.size() << " image stem(s):";
        for (const auto& s : unmatched) msg << " " << s;
        throw DataError(msg.str());
    }
    if (out.empty()) throw DataError("no .png images found in " + images_dir);
    return out;
}

std::vector<UnlabeledSample> load_images(const std::string& images_dir) {
    auto images = sorted_pngs(images_dir);
    std::vector<UnlabeledSample> out;
    for (const auto& img_path : images)
        out.push_back({io::read_image_png(img_path.string()), img_path.stem().string()});
    if (out.empty()) throw DataError("no .png images found in " + images_dir);
    return out;
}

void save_labeled(const std::string& root, const std::vector<LabeledSample>& samples) {
    fs::create_directories(fs::path(root) / "images");
    fs::create_directories(fs::path(root) / "labels");
    for (const auto& s : samples) {
        io::write_image_png((fs::path(root) / "images" / (s.id + ".png")).string(), s.image);
        io::GrayRaster raw{s.label.h, s.label.w, {}};
        raw.pixels.resize(s.label.size());
        for (std::size_t i = 0; i < s.label.size(); ++i)
            raw.pixels[i] = static_cast<std::uint8_t>(s.label.grid[i]);
        io::write_gray_png((fs::path(root) / "labels" / (s.id + ".png")).string(), raw);
    }
}

void save_images(const std::string& dir, const std::vector<UnlabeledSample>& samples) {
    fs::create_directories(dir);
    for (const auto& s : samples) io::write_image_png((fs::path(dir) / (s.id + ".png")).string(), s.image);
}

void save_labels(const std::string& dir, const std::vector<std::string>& ids,
                 const std::vector<LabelMap>& labels) {
    if (ids.size() != labels.size()) throw UsageError("save_labels: ids/labels size mismatch");
    fs::create_directories(dir);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto& lm = labels[i];
        io::GrayRaster raw{lm.h, lm.w, {}};
        raw.pixels.resize(lm.size());
        for (std::size_t j = 0; j < lm.size(); ++j) raw.pixels[j] = static_cast<std::uint8_t>(lm.grid[j]);
        io::write_gray_png((fs::path(dir) / (ids[i] + ".png")).string(), raw);
    }
}

void save_pair_datasets(const std::string& out_root, const DatasetSpec& spec, const PairDatasets& data) {
    fs::create_directories(out_root);
    save_labeled((fs::path(out_root) / "source").string(), data.source);
    save_images((fs::path(out_root) / "target" / "images").string(), data.target);

    std::vector<std::string> tgt_ids;
    for (const auto& s : data.target) tgt_ids.push_back(s.id);
    save_labels((fs::path(out_root) / "target" / "labels").string(), tgt_ids, data.target_labels);

    json manifest;
    manifest["spec"] = {
        {"height", spec.height},
        {"width", spec.width},
        {"num_classes", spec.num_classes},
        {"foreground_class_ids", spec.foreground_class_ids},
        {"seed", spec.seed},
        {"base_noise", spec.base_noise},
        {"shift", {{"gain", spec.shift.gain},
                   {"bias", spec.shift.bias},
                   {"extra_noise", spec.shift.extra_noise},
                   {"size_scale", spec.shift.size_scale}}},
    };
    std::vector<std::string> src_ids;
    for (const auto& s : data.source) src_ids.push_back(s.id);
    manifest["source_ids"] = src_ids;
    manifest["target_ids"] = tgt_ids;

    std::ofstream out(fs::path(out_root) / "manifest.json");
    if (!out) throw DataError("cannot write manifest under " + out_root);
    out << manifest.dump(2) << "\n";
}

IdMap identity_id_map(int num_classes) {
    IdMap m;
    for (int i = 0; i < num_classes; ++i) m[i] = i;
    return m;
}

}  // namespace uda::data
