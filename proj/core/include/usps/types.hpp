#ifndef USPS_TYPES_HPP
#define USPS_TYPES_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "usps/errors.hpp"

namespace usps {

/// RGB image with float pixels in [0,1], stored planar (channel-major):
/// value(c,y,x) = data[(c*height + y)*width + x].
struct Image {
    int width = 0;
    int height = 0;
    static constexpr int channels = 3;
    std::vector<float> data;

    Image() = default;
    Image(int w, int h) : width(w), height(h), data(static_cast<size_t>(w) * h * channels, 0.f) {}

    float& at(int c, int y, int x) { return data[(static_cast<size_t>(c) * height + y) * width + x]; }
    float at(int c, int y, int x) const { return data[(static_cast<size_t>(c) * height + y) * width + x]; }

    std::span<float> plane(int c) { return {data.data() + static_cast<size_t>(c) * height * width, static_cast<size_t>(height) * width}; }
    std::span<const float> plane(int c) const { return {data.data() + static_cast<size_t>(c) * height * width, static_cast<size_t>(height) * width}; }

    size_t pixel_count() const { return static_cast<size_t>(width) * height; }
};

enum class MapSource : uint8_t { handcrafted, network, mva, crf };

/// Continuous per-pixel saliency in [0,1]. Dimensions always match the image
/// the map was computed from. `degenerate` marks maps that collapsed to a
/// constant (and were zeroed by normalize_minmax).
struct SaliencyMap {
    int width = 0;
    int height = 0;
    std::vector<float> values;
    MapSource source = MapSource::network;
    std::string source_name;  // method name when source == handcrafted
    bool degenerate = false;

    SaliencyMap() = default;
    SaliencyMap(int w, int h, float fill = 0.f)
        : width(w), height(h), values(static_cast<size_t>(w) * h, fill) {}

    float& at(int y, int x) { return values[static_cast<size_t>(y) * width + x]; }
    float at(int y, int x) const { return values[static_cast<size_t>(y) * width + x]; }
    size_t size() const { return values.size(); }
};

/// Discrete per-pixel labels, values exactly 0 or 1.
struct BinaryMask {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> values;

    BinaryMask() = default;
    BinaryMask(int w, int h, uint8_t fill = 0)
        : width(w), height(h), values(static_cast<size_t>(w) * h, fill) {}

    uint8_t& at(int y, int x) { return values[static_cast<size_t>(y) * width + x]; }
    uint8_t at(int y, int x) const { return values[static_cast<size_t>(y) * width + x]; }
    size_t size() const { return values.size(); }
    size_t foreground_count() const {
        size_t n = 0;
        for (uint8_t v : values) n += v;
        return n;
    }
};

enum class Split : uint8_t { train, val, test };

std::string split_name(Split s);
Split split_from_name(const std::string& name);

struct SampleRecord {
    std::string id;
    Image image;
    std::optional<BinaryMask> gt;
    Split split = Split::train;
    std::map<std::string, BinaryMask> pseudo;  // method name -> pseudo-label
};

/// Ordered sample collection. `split` is set when the dataset is a
/// single-split view; loaders return the full manifest-ordered set.
struct Dataset {
    std::vector<SampleRecord> samples;
    std::optional<Split> split;

    bool empty() const { return samples.empty(); }
    size_t size() const { return samples.size(); }
    const SampleRecord* find(const std::string& id) const {
        for (const auto& s : samples)
            if (s.id == id) return &s;
        return nullptr;
    }
};

/// View of one split, preserving order. Images are copied (samples are small
/// at desk scale).
Dataset select_split(const Dataset& ds, Split split);

void validate_dimensions_match(const SaliencyMap& map, const BinaryMask& mask, const char* where);

}  // namespace usps

#endif
