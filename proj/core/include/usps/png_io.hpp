#ifndef USPS_PNG_IO_HPP
#define USPS_PNG_IO_HPP

#include <filesystem>

#include "usps/types.hpp"

namespace usps {

// Thin libpng wrappers. Writes are deterministic (fixed compression
// settings), which the run-manifest content hashes rely on.

Image read_image_png(const std::filesystem::path& p);
void write_image_png(const Image& image, const std::filesystem::path& p);

/// 16-bit grayscale, code = round(v * 65535), decoded as v = code / 65535.
SaliencyMap read_map_png16(const std::filesystem::path& p);
void write_map_png16(const SaliencyMap& map, const std::filesystem::path& p);

/// 8-bit grayscale; values > 127 decode to 1 (i.e. binarized at 0.5).
BinaryMask read_mask_png(const std::filesystem::path& p);
void write_mask_png(const BinaryMask& mask, const std::filesystem::path& p);

/// 8-bit grayscale export of a continuous map (visualization only).
void write_map_png8(const SaliencyMap& map, const std::filesystem::path& p);

}  // namespace usps

#endif
