#ifndef USPS_DATAIO_HPP
#define USPS_DATAIO_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "usps/types.hpp"

namespace usps {

/// One dataset entry; paths are relative to the manifest root.
struct ManifestEntry {
    std::string id;
    std::string image_path;
    std::optional<std::string> mask_path;
    Split split = Split::train;
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;
    uint64_t seed = 0;

    static DatasetManifest parse(const std::string& json_text);
    std::string to_json() const;
    static DatasetManifest load(const std::filesystem::path& manifest_file);
    void save(const std::filesystem::path& manifest_file) const;
};

/// Loads images (and masks, binarized at 0.5 when stored as grayscale) in
/// manifest order. Missing files raise LoadError naming the path; a mask
/// whose dimensions disagree with its image raises ValidationError naming
/// the sample id.
Dataset load_dataset(const std::filesystem::path& root, const DatasetManifest& manifest);

/// Convenience: read <root>/manifest.json then load.
Dataset load_dataset(const std::filesystem::path& root);

struct SyntheticConfig {
    int n_images = 250;
    int image_size = 64;
    int shapes_min = 1;
    int shapes_max = 3;
    double distractor_probability = 0.3;
    double texture_noise_scale = 0.5;
    uint64_t seed = 7;
    double train_fraction = 0.8;  // remainder is the test split
};

/// Deterministic synthetic dataset: colored shapes over a textured
/// background, GT = union of shape interiors. Writes images/, masks/ and
/// manifest.json under root and returns the loaded dataset. Byte-identical
/// across runs for a fixed config.
Dataset generate_synthetic(const SyntheticConfig& config, const std::filesystem::path& root);

/// In-memory variant used by tests (no files written).
Dataset generate_synthetic_in_memory(const SyntheticConfig& config);

/// Resizes every image (bilinear) and mask (bilinear then threshold 0.5) to
/// size x size. Used by the full profile to match the reference geometry.
void resize_dataset(Dataset& ds, int size);

/// 16-bit PNG persistence for saliency/MVA maps (round-trip error <= 1/65535).
void save_map(const SaliencyMap& map, const std::filesystem::path& path);
SaliencyMap load_map(const std::filesystem::path& path);

void save_mask(const BinaryMask& mask, const std::filesystem::path& path);
BinaryMask load_mask(const std::filesystem::path& path);

}  // namespace usps

#endif
