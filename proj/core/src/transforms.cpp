#include "usps/transforms.hpp"

#include <algorithm>
#include <cmath>

namespace usps {

void resize_bilinear_plane(std::span<const float> src, int sw, int sh,
                           std::span<float> dst, int dw, int dh) {
    const double sx = static_cast<double>(sw) / dw;
    const double sy = static_cast<double>(sh) / dh;
    for (int y = 0; y < dh; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        fy = std::clamp(fy, 0.0, static_cast<double>(sh - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, sh - 1);
        const float wy = static_cast<float>(fy - y0);
        for (int x = 0; x < dw; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            fx = std::clamp(fx, 0.0, static_cast<double>(sw - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, sw - 1);
            const float wx = static_cast<float>(fx - x0);
            const float v00 = src[static_cast<size_t>(y0) * sw + x0];
            const float v01 = src[static_cast<size_t>(y0) * sw + x1];
            const float v10 = src[static_cast<size_t>(y1) * sw + x0];
            const float v11 = src[static_cast<size_t>(y1) * sw + x1];
            const float top = v00 + (v01 - v00) * wx;
            const float bot = v10 + (v11 - v10) * wx;
            dst[static_cast<size_t>(y) * dw + x] = top + (bot - top) * wy;
        }
    }
}

Image resize_bilinear(const Image& image, int target_w, int target_h) {
    if (target_w <= 0 || target_h <= 0)
        throw InvalidArgumentError("resize_bilinear: target dimensions must be positive");
    Image out(target_w, target_h);
    for (int c = 0; c < Image::channels; ++c)
        resize_bilinear_plane(image.plane(c), image.width, image.height,
                              out.plane(c), target_w, target_h);
    return out;
}

SaliencyMap normalize_minmax(const SaliencyMap& map) {
    if (map.values.empty()) throw InvalidArgumentError("normalize_minmax: empty map");
    float lo = map.values[0], hi = map.values[0];
    for (float v : map.values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    SaliencyMap out(map.width, map.height);
    out.source = map.source;
    out.source_name = map.source_name;
    if (hi <= lo) {
        out.degenerate = true;  // all zeros by convention
        return out;
    }
    const float inv = 1.f / (hi - lo);
    for (size_t i = 0; i < map.values.size(); ++i)
        out.values[i] = (map.values[i] - lo) * inv;
    return out;
}

float pseudo_label_gamma(const SaliencyMap& map) {
    if (map.values.empty()) return 0.f;
    double s = 0.0;
    for (float v : map.values) s += v;
    return 1.5f * static_cast<float>(s / static_cast<double>(map.values.size()));
}

BinaryMask binarize_with_gamma(const SaliencyMap& map, float gamma) {
    BinaryMask mask(map.width, map.height);
    for (size_t i = 0; i < map.values.size(); ++i)
        mask.values[i] = map.values[i] > gamma ? 1 : 0;
    return mask;
}

BinaryMask binarize_pseudo_label(const SaliencyMap& map) {
    return binarize_with_gamma(map, pseudo_label_gamma(map));
}

BinaryMask threshold_mask(const SaliencyMap& map, float threshold) {
    return binarize_with_gamma(map, threshold);
}

}  // namespace usps
