#ifndef USPS_SUPERPIXELS_HPP
#define USPS_SUPERPIXELS_HPP

#include <vector>

#include "usps/color.hpp"
#include "usps/types.hpp"

namespace usps {

struct SuperpixelRegion {
    float lab_l = 0, lab_a = 0, lab_b = 0;
    float pos_x = 0, pos_y = 0;  // mean position, normalized to [0,1]
    int pixel_count = 0;
    bool touches_border = false;
};

/// SLIC-style segmentation result. Every pixel carries a region index in
/// [0,K'); regions are spatially connected.
struct SuperpixelSegmentation {
    int width = 0;
    int height = 0;
    std::vector<int> label_map;
    std::vector<SuperpixelRegion> regions;

    int region_count() const { return static_cast<int>(regions.size()); }
    int label(int y, int x) const { return label_map[static_cast<size_t>(y) * width + x]; }
};

/// k-means over (Lab, xy) on a grid seed, followed by connectivity
/// enforcement (fragments merge into neighbors, so the final count is <= K).
/// Deterministic for fixed inputs. Requires 4 <= K <= width*height/16.
SuperpixelSegmentation segment_superpixels(const Image& image, int K, double compactness = 10.0);

/// Default region count used by the handcrafted detectors:
/// clamp(round(w*h/1000), 16, 400).
int default_superpixel_count(int width, int height);

/// Sorted adjacency lists over 4-connected region boundaries.
std::vector<std::vector<int>> region_adjacency(const SuperpixelSegmentation& seg);

/// Euclidean distance between mean Lab colors of two regions.
float region_color_distance(const SuperpixelRegion& a, const SuperpixelRegion& b);

}  // namespace usps

#endif
