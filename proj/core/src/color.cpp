#include "usps/color.hpp"

#include <cmath>

namespace usps {

namespace {

inline float srgb_linearize(float c) {
    return c <= 0.04045f ? c / 12.92f : std::pow((c + 0.055f) / 1.055f, 2.4f);
}

inline float lab_f(float t) {
    constexpr float kDelta3 = 0.008856452f;  // (6/29)^3
    constexpr float kSlope = 7.787037f;      // (29/6)^2 / 3
    return t > kDelta3 ? std::cbrt(t) : kSlope * t + 4.f / 29.f;
}

}  // namespace

std::array<float, 3> srgb_to_lab(float r, float g, float b) {
    const float rl = srgb_linearize(r);
    const float gl = srgb_linearize(g);
    const float bl = srgb_linearize(b);
    // sRGB -> XYZ (D65)
    const float X = 0.4124564f * rl + 0.3575761f * gl + 0.1804375f * bl;
    const float Y = 0.2126729f * rl + 0.7151522f * gl + 0.0721750f * bl;
    const float Z = 0.0193339f * rl + 0.1191920f * gl + 0.9503041f * bl;
    const float fx = lab_f(X / 0.95047f);
    const float fy = lab_f(Y);
    const float fz = lab_f(Z / 1.08883f);
    return {116.f * fy - 16.f, 500.f * (fx - fy), 200.f * (fy - fz)};
}

LabImage image_to_lab(const Image& image) {
    LabImage lab;
    lab.width = image.width;
    lab.height = image.height;
    const size_t n = image.pixel_count();
    lab.L.resize(n);
    lab.a.resize(n);
    lab.b.resize(n);
    const auto r = image.plane(0);
    const auto g = image.plane(1);
    const auto b = image.plane(2);
    for (size_t i = 0; i < n; ++i) {
        const auto v = srgb_to_lab(r[i], g[i], b[i]);
        lab.L[i] = v[0];
        lab.a[i] = v[1];
        lab.b[i] = v[2];
    }
    return lab;
}

}  // namespace usps
