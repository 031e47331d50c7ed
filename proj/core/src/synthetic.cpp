#include <algorithm>
#include <cmath>
#include <cstdio>

#include "usps/dataio.hpp"
#include "usps/png_io.hpp"
#include "usps/rng.hpp"
#include "usps/util.hpp"

namespace usps {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Rgb {
    float r, g, b;
};

Rgb hsv_to_rgb(double h, double s, double v) {
    h = h - std::floor(h);
    const double hh = h * 6.0;
    const int i = static_cast<int>(hh) % 6;
    const double f = hh - std::floor(hh);
    const double p = v * (1.0 - s);
    const double q = v * (1.0 - s * f);
    const double t = v * (1.0 - s * (1.0 - f));
    double r, g, b;
    switch (i) {
        case 0: r = v; g = t; b = p; break;
        case 1: r = q; g = v; b = p; break;
        case 2: r = p; g = v; b = t; break;
        case 3: r = p; g = q; b = v; break;
        case 4: r = t; g = p; b = v; break;
        default: r = v; g = p; b = q; break;
    }
    return {static_cast<float>(r), static_cast<float>(g), static_cast<float>(b)};
}

/// Low-frequency value noise: random grid, bilinear interpolation.
struct ValueNoise {
    int cells;
    std::vector<double> grid;  // (cells+1)^2

    ValueNoise(int cells, DetRng& rng) : cells(cells), grid(static_cast<size_t>(cells + 1) * (cells + 1)) {
        for (auto& g : grid) g = rng.uniform01() * 2.0 - 1.0;
    }

    double at(double u, double v) const {  // u,v in [0,1]
        const double x = std::clamp(u, 0.0, 1.0) * cells;
        const double y = std::clamp(v, 0.0, 1.0) * cells;
        const int x0 = std::min(static_cast<int>(x), cells - 1);
        const int y0 = std::min(static_cast<int>(y), cells - 1);
        const double fx = x - x0, fy = y - y0;
        auto g = [&](int yy, int xx) { return grid[static_cast<size_t>(yy) * (cells + 1) + xx]; };
        const double top = g(y0, x0) + (g(y0, x0 + 1) - g(y0, x0)) * fx;
        const double bot = g(y0 + 1, x0) + (g(y0 + 1, x0 + 1) - g(y0 + 1, x0)) * fx;
        return top + (bot - top) * fy;
    }
};

enum class ShapeKind { ellipse, rectangle, blob };

struct Shape {
    ShapeKind kind;
    double cx, cy;        // center, pixels
    double rx, ry;        // half extents, pixels
    double angle;         // rotation
    double wob_a1, wob_p1, wob_a2, wob_p2;  // blob boundary wobble
    Rgb color;

    /// Coverage in [0,1]; >= 0.5 counts as interior for the GT mask.
    double coverage(double px, double py) const {
        const double dx = px - cx, dy = py - cy;
        const double ca = std::cos(angle), sa = std::sin(angle);
        const double qx = ca * dx + sa * dy;
        const double qy = -sa * dx + ca * dy;
        const double edge = 1.2;  // soft-edge width, pixels
        double d;  // signed distance to boundary, >0 inside
        switch (kind) {
            case ShapeKind::ellipse: {
                const double rho = std::sqrt((qx / rx) * (qx / rx) + (qy / ry) * (qy / ry));
                d = (1.0 - rho) * std::min(rx, ry);
                break;
            }
            case ShapeKind::rectangle: {
                const double ex = rx - std::abs(qx);
                const double ey = ry - std::abs(qy);
                d = std::min(ex, ey);
                break;
            }
            case ShapeKind::blob: {
                const double theta = std::atan2(qy / ry, qx / rx);
                const double wob = 1.0 + wob_a1 * std::sin(2.0 * theta + wob_p1) +
                                   wob_a2 * std::sin(3.0 * theta + wob_p2);
                const double rho = std::sqrt((qx / rx) * (qx / rx) + (qy / ry) * (qy / ry));
                d = (wob - rho) * std::min(rx, ry);
                break;
            }
            default: d = -1.0;
        }
        return std::clamp(d / edge + 0.5, 0.0, 1.0);
    }
};

Shape random_shape(DetRng& rng, int size, bool foreground, double bg_hue) {
    Shape s;
    const int kind = rng.uniform_int(0, 2);
    s.kind = kind == 0 ? ShapeKind::ellipse : (kind == 1 ? ShapeKind::rectangle : ShapeKind::blob);
    s.rx = rng.uniform(0.09, 0.22) * size;
    s.ry = rng.uniform(0.09, 0.22) * size;
    s.angle = rng.uniform(0.0, kPi);
    s.wob_a1 = rng.uniform(0.08, 0.2);
    s.wob_p1 = rng.uniform(0.0, 2.0 * kPi);
    s.wob_a2 = rng.uniform(0.05, 0.15);
    s.wob_p2 = rng.uniform(0.0, 2.0 * kPi);
    if (foreground) {
        const double margin = std::max(s.rx, s.ry) * 0.8;
        s.cx = rng.uniform(margin, size - margin);
        s.cy = rng.uniform(margin, size - margin);
        // warm, saturated palette, separated from the cool backgrounds
        s.color = hsv_to_rgb(rng.uniform(0.86, 1.14), rng.uniform(0.65, 0.95), rng.uniform(0.55, 0.9));
    } else {
        // background-colored distractor crossing the image border
        const int edge = rng.uniform_int(0, 3);
        const double along = rng.uniform(0.15, 0.85) * size;
        const double in = rng.uniform(0.0, 0.5) * std::max(s.rx, s.ry);
        switch (edge) {
            case 0: s.cx = along; s.cy = -in + s.ry * 0.2; break;
            case 1: s.cx = along; s.cy = size + in - s.ry * 0.2; break;
            case 2: s.cx = -in + s.rx * 0.2; s.cy = along; break;
            default: s.cx = size + in - s.rx * 0.2; s.cy = along; break;
        }
        s.color = hsv_to_rgb(bg_hue + rng.uniform(-0.06, 0.06), rng.uniform(0.25, 0.45),
                             rng.uniform(0.35, 0.75));
    }
    return s;
}

SampleRecord make_sample(const SyntheticConfig& cfg, int index) {
    DetRng rng(mix_seed(cfg.seed, static_cast<uint64_t>(index), 0xDA7AULL));
    const int size = cfg.image_size;

    SampleRecord rec;
    char idbuf[32];
    std::snprintf(idbuf, sizeof(idbuf), "synth_%04d", index);
    rec.id = idbuf;
    rec.image = Image(size, size);
    BinaryMask gt(size, size);

    const double bg_hue = rng.uniform(0.3, 0.7);  // cool palette
    const double bg_sat = rng.uniform(0.12, 0.32);
    const double bg_val = rng.uniform(0.4, 0.65);
    ValueNoise coarse(rng.uniform_int(3, 6), rng);
    ValueNoise fine(rng.uniform_int(10, 14), rng);

    std::vector<Shape> shapes;
    const bool has_distractor = rng.bernoulli(cfg.distractor_probability);
    if (has_distractor) shapes.push_back(random_shape(rng, size, false, bg_hue));
    const int n_fg = rng.uniform_int(cfg.shapes_min, cfg.shapes_max);
    const size_t fg_begin = shapes.size();
    for (int k = 0; k < n_fg; ++k) shapes.push_back(random_shape(rng, size, true, bg_hue));

    const double tex = cfg.texture_noise_scale;
    auto r = rec.image.plane(0);
    auto g = rec.image.plane(1);
    auto b = rec.image.plane(2);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const size_t i = static_cast<size_t>(y) * size + x;
            const double u = (x + 0.5) / size, v = (y + 0.5) / size;
            const double val = std::clamp(
                bg_val + tex * (0.14 * coarse.at(u, v) + 0.06 * fine.at(u, v)), 0.05, 0.95);
            const double hue = bg_hue + tex * 0.05 * coarse.at(v, u);
            Rgb px = hsv_to_rgb(hue, bg_sat, val);
            double fg_cov = 0.0;
            for (size_t s = 0; s < shapes.size(); ++s) {
                const double cov = shapes[s].coverage(x + 0.5, y + 0.5);
                if (cov <= 0.0) continue;
                const auto& col = shapes[s].color;
                px.r = static_cast<float>(px.r * (1.0 - cov) + col.r * cov);
                px.g = static_cast<float>(px.g * (1.0 - cov) + col.g * cov);
                px.b = static_cast<float>(px.b * (1.0 - cov) + col.b * cov);
                if (s >= fg_begin) fg_cov = std::max(fg_cov, cov);
            }
            // grain over everything
            const double grain = tex * 0.04 * (rng.uniform01() * 2.0 - 1.0);
            r[i] = clamp01(static_cast<float>(px.r + grain));
            g[i] = clamp01(static_cast<float>(px.g + grain));
            b[i] = clamp01(static_cast<float>(px.b + grain));
            gt.values[i] = fg_cov >= 0.5 ? 1 : 0;
        }
    }

    // quantize to 8-bit so in-memory samples equal their PNG round-trip
    for (auto& v : rec.image.data)
        v = static_cast<float>(std::lround(clamp01(v) * 255.f)) / 255.f;

    rec.gt = std::move(gt);
    return rec;
}

}  // namespace

Dataset generate_synthetic_in_memory(const SyntheticConfig& cfg) {
    if (cfg.n_images < 0) throw InvalidArgumentError("generate_synthetic: n_images < 0");
    if (cfg.n_images > 0 && cfg.image_size < 16)
        throw InvalidArgumentError("generate_synthetic: image_size must be >= 16");
    Dataset ds;
    const int n_train = static_cast<int>(std::lround(cfg.n_images * cfg.train_fraction));
    for (int i = 0; i < cfg.n_images; ++i) {
        SampleRecord rec = make_sample(cfg, i);
        rec.split = i < n_train ? Split::train : Split::test;
        ds.samples.push_back(std::move(rec));
    }
    return ds;
}

Dataset generate_synthetic(const SyntheticConfig& cfg, const std::filesystem::path& root) {
    Dataset ds = generate_synthetic_in_memory(cfg);
    if (ds.empty()) return ds;
    std::filesystem::create_directories(root / "images");
    std::filesystem::create_directories(root / "masks");
    DatasetManifest manifest;
    manifest.seed = cfg.seed;
    for (const auto& rec : ds.samples) {
        const std::string img_rel = "images/" + rec.id + ".png";
        const std::string mask_rel = "masks/" + rec.id + ".png";
        write_image_png(rec.image, root / img_rel);
        write_mask_png(*rec.gt, root / mask_rel);
        manifest.entries.push_back({rec.id, img_rel, mask_rel, rec.split});
    }
    manifest.save(root / "manifest.json");
    return ds;
}

}  // namespace usps
