#ifndef USPS_CONFIG_HPP
#define USPS_CONFIG_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "usps/dataio.hpp"
#include "usps/evalsuite.hpp"
#include "usps/handcrafted.hpp"
#include "usps/pipeline.hpp"

namespace usps {

enum class Profile : uint8_t { desk, full };

/// Parsed and validated run configuration. Every field has a default except
/// the full profile's data root. Unknown keys or sections are rejected.
struct RunConfig {
    Profile profile = Profile::desk;
    std::filesystem::path out_dir = "runs/out";
    uint64_t seed = 7;

    // [data]
    std::filesystem::path data_root;  // default: <out_dir>/dataset
    bool synthetic = true;
    SyntheticConfig synth;
    int resize_to = 0;  // full profile default 432; 0 keeps native size

    // [methods]
    std::vector<MethodDescriptor> methods = default_methods();
    bool gamma_dataset_wide = false;

    // [crf],[mva],[optim],[plan]
    StagePlan plan;
    OptimConfig optim;

    // [eval]
    EvalOptions eval;
    int worst_k = 8;

    std::filesystem::path resolved_data_root() const {
        return data_root.empty() ? out_dir / "dataset" : data_root;
    }
};

/// Parses TOML text; throws ConfigError (with line info where available).
RunConfig parse_run_config(const std::string& toml_text);
RunConfig load_run_config(const std::filesystem::path& path);

/// Default desk-profile config document (the committed example).
std::string default_config_toml();

}  // namespace usps

#endif
