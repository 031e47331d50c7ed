#ifndef USPS_LAYOUT_HPP
#define USPS_LAYOUT_HPP

#include <filesystem>
#include <string>

namespace usps {

/// Canonical artifact paths under a run's output directory.
struct ArtifactLayout {
    std::filesystem::path out_dir;

    std::filesystem::path dataset_dir() const { return out_dir / "dataset"; }
    std::filesystem::path artifacts_dir() const { return out_dir / "artifacts"; }
    std::filesystem::path method_dir(const std::string& method) const {
        return artifacts_dir() / method;
    }
    std::filesystem::path raw_dir(const std::string& method) const {
        return method_dir(method) / "raw";
    }
    std::filesystem::path raw_map(const std::string& method, const std::string& id) const {
        return raw_dir(method) / "maps" / (id + ".png");
    }
    std::filesystem::path raw_label(const std::string& method, const std::string& id) const {
        return raw_dir(method) / "labels" / (id + ".png");
    }
    std::filesystem::path mva_dir(const std::string& method, int iteration) const {
        return method_dir(method) / "mva" / ("iter" + std::to_string(iteration));
    }
    std::filesystem::path mva_map(const std::string& method, int iteration, const std::string& id) const {
        return mva_dir(method, iteration) / "maps" / (id + ".png");
    }
    std::filesystem::path mva_label(const std::string& method, int iteration, const std::string& id) const {
        return mva_dir(method, iteration) / "labels" / (id + ".png");
    }
    std::filesystem::path checkpoint(const std::string& stage, const std::string& name) const {
        return artifacts_dir() / stage / "checkpoints" / (name + ".ckpt");
    }
    std::filesystem::path eval_dir() const { return out_dir / "eval"; }
    std::filesystem::path logs_dir() const { return out_dir / "logs"; }
    std::filesystem::path run_manifest() const { return out_dir / "run_manifest.json"; }
};

}  // namespace usps

#endif
