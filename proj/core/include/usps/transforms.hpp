#ifndef USPS_TRANSFORMS_HPP
#define USPS_TRANSFORMS_HPP

#include <span>

#include "usps/types.hpp"

namespace usps {

/// Bilinear resize with half-pixel-center alignment; border samples are
/// clamped, so outputs are convex combinations of inputs.
Image resize_bilinear(const Image& image, int target_w, int target_h);

/// Single-plane variant shared by the image path and the network upsampler.
void resize_bilinear_plane(std::span<const float> src, int sw, int sh,
                           std::span<float> dst, int dw, int dh);

/// (v - min) / (max - min); constant maps become all zeros with the
/// degenerate flag set.
SaliencyMap normalize_minmax(const SaliencyMap& map);

/// Threshold for pseudo-label discretization: 1.5x the map's mean value.
float pseudo_label_gamma(const SaliencyMap& map);

/// mask(p) = 1 iff map(p) > gamma (strict; ties go to background).
BinaryMask binarize_with_gamma(const SaliencyMap& map, float gamma);

/// Discretize a handcrafted map at gamma = 1.5 * mean(map).
BinaryMask binarize_pseudo_label(const SaliencyMap& map);

/// Threshold a (near-binary) map at a fixed value, strict inequality.
BinaryMask threshold_mask(const SaliencyMap& map, float threshold);

}  // namespace usps

#endif
