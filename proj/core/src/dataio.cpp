#include "usps/dataio.hpp"
#include "usps/transforms.hpp"

#include <nlohmann/json.hpp>

#include "usps/png_io.hpp"
#include "usps/util.hpp"

namespace usps {

using nlohmann::json;

DatasetManifest DatasetManifest::parse(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw LoadError(std::string("manifest parse error: ") + e.what());
    }
    DatasetManifest m;
    m.seed = j.value("seed", 0ULL);
    if (j.contains("entries")) {
        for (const auto& e : j.at("entries")) {
            ManifestEntry entry;
            entry.id = e.at("id").get<std::string>();
            entry.image_path = e.at("image").get<std::string>();
            if (e.contains("mask") && !e.at("mask").is_null())
                entry.mask_path = e.at("mask").get<std::string>();
            entry.split = split_from_name(e.value("split", "train"));
            m.entries.push_back(std::move(entry));
        }
    }
    // ids must be unique
    for (size_t i = 0; i < m.entries.size(); ++i)
        for (size_t k = i + 1; k < m.entries.size(); ++k)
            if (m.entries[i].id == m.entries[k].id)
                throw ValidationError("duplicate manifest id: " + m.entries[i].id);
    return m;
}

std::string DatasetManifest::to_json() const {
    json j;
    j["seed"] = seed;
    j["entries"] = json::array();
    for (const auto& e : entries) {
        json je;
        je["id"] = e.id;
        je["image"] = e.image_path;
        if (e.mask_path) je["mask"] = *e.mask_path;
        je["split"] = split_name(e.split);
        j["entries"].push_back(je);
    }
    return j.dump(2) + "\n";
}

DatasetManifest DatasetManifest::load(const std::filesystem::path& manifest_file) {
    if (!std::filesystem::exists(manifest_file))
        throw LoadError("manifest not found: " + manifest_file.string());
    return parse(read_text_file(manifest_file));
}

void DatasetManifest::save(const std::filesystem::path& manifest_file) const {
    write_text_file(manifest_file, to_json());
}

Dataset load_dataset(const std::filesystem::path& root, const DatasetManifest& manifest) {
    if (!std::filesystem::exists(root)) throw LoadError("dataset root not found: " + root.string());
    Dataset ds;
    for (const auto& e : manifest.entries) {
        SampleRecord rec;
        rec.id = e.id;
        rec.split = e.split;
        const auto image_path = root / e.image_path;
        if (!std::filesystem::exists(image_path))
            throw LoadError("missing image file: " + image_path.string());
        rec.image = read_image_png(image_path);
        if (e.mask_path) {
            const auto mask_path = root / *e.mask_path;
            if (!std::filesystem::exists(mask_path))
                throw LoadError("missing mask file: " + mask_path.string());
            BinaryMask mask = read_mask_png(mask_path);
            if (mask.width != rec.image.width || mask.height != rec.image.height)
                throw ValidationError("mask/image dimension mismatch for sample '" + e.id + "'");
            rec.gt = std::move(mask);
        }
        ds.samples.push_back(std::move(rec));
    }
    return ds;
}

Dataset load_dataset(const std::filesystem::path& root) {
    return load_dataset(root, DatasetManifest::load(root / "manifest.json"));
}

void resize_dataset(Dataset& ds, int size) {
    if (size <= 0) throw InvalidArgumentError("resize_dataset: size must be positive");
    for (auto& s : ds.samples) {
        if (s.image.width == size && s.image.height == size) continue;
        if (s.gt) {
            SaliencyMap m(s.gt->width, s.gt->height);
            for (size_t i = 0; i < m.size(); ++i) m.values[i] = s.gt->values[i] ? 1.f : 0.f;
            SaliencyMap r(size, size);
            resize_bilinear_plane(m.values, m.width, m.height, r.values, size, size);
            s.gt = threshold_mask(r, 0.5f);
        }
        s.image = resize_bilinear(s.image, size, size);
    }
}

void save_map(const SaliencyMap& map, const std::filesystem::path& path) {
    write_map_png16(map, path);
}

SaliencyMap load_map(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw LoadError("missing map file: " + path.string());
    return read_map_png16(path);
}

void save_mask(const BinaryMask& mask, const std::filesystem::path& path) {
    write_mask_png(mask, path);
}

BinaryMask load_mask(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw LoadError("missing mask file: " + path.string());
    return read_mask_png(path);
}

}  // namespace usps
