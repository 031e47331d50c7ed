#ifndef USPS_COLOR_HPP
#define USPS_COLOR_HPP

#include <array>
#include <vector>

#include "usps/types.hpp"

namespace usps {

/// sRGB in [0,1] -> CIE Lab, D65 white point. L in [0,100], a/b roughly
/// [-128,127]. Used by the handcrafted detectors for color distances.
std::array<float, 3> srgb_to_lab(float r, float g, float b);

/// Per-pixel Lab planes for a whole image (L, a, b vectors of w*h).
struct LabImage {
    int width = 0;
    int height = 0;
    std::vector<float> L, a, b;
};

LabImage image_to_lab(const Image& image);

}  // namespace usps

#endif
