#ifndef USPS_PIPELINE_HPP
#define USPS_PIPELINE_HPP

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "usps/crf.hpp"
#include "usps/handcrafted.hpp"
#include "usps/layout.hpp"
#include "usps/log.hpp"
#include "usps/model.hpp"
#include "usps/mva.hpp"

namespace usps {

/// Stage schedule and refinement mechanics for the three-stage curriculum.
struct StagePlan {
    int stage_a_epochs = 25;
    int self_sup_max_iters = 2;
    double stability_threshold = 0.01;
    int fusion_epochs = 200;
    CrfParams crf;
    bool crf_enabled = true;         // "No CRF" ablation switch
    bool crf_at_inference = false;   // CRF stays a training-time mechanism by default
    double mva_alpha = 0.7;
    MvaInit mva_init = MvaInit::first_crf;
    bool mva_reset_per_iteration = true;
    float snapshot_threshold = 0.5f;
    bool snapshot_gamma_rule = false;  // gamma = 1.5*mean alternative
    NetConfig net;
    double fusion_lr_scale = 1.0;  // fusion trains at the undoubled base rate
};

/// Collects every persisted artifact (with content hash), stage timings and
/// the seeds that produced them. Stage commands re-load and extend the same
/// file; artifacts are keyed by path, so re-runs replace rather than append.
class RunManifest {
public:
    void set_config_echo(const std::string& toml_text) { config_echo_ = toml_text; }
    void set_seed(uint64_t seed) { seed_ = seed; }
    void record_artifact(const std::filesystem::path& path);
    void record_timing(const std::string& stage, double seconds);
    void record_note(const std::string& key, const std::string& value);

    /// Hash over all artifact content hashes, in path order; timings excluded.
    uint64_t content_hash() const;
    std::string to_json() const;
    void save(const std::filesystem::path& path) const;
    static RunManifest load_or_empty(const std::filesystem::path& path);

private:
    struct ArtifactEntry {
        std::string hash;
        uint64_t bytes = 0;
    };
    std::string config_echo_;
    uint64_t seed_ = 0;
    std::map<std::string, ArtifactEntry> artifacts_;  // keyed by path
    std::map<std::string, double> timings_;
    std::map<std::string, std::string> notes_;
};

/// base_lr * multiplier^iteration (iteration 0 = the inter-image-consistency
/// stage, each self-supervision iteration doubles the rate by default).
double lr_for_iteration(double base_lr, int iteration, double multiplier = 2.0);

struct RefineResult {
    std::vector<std::map<std::string, BinaryMask>> snapshots;  // [0] = stage A, then per iteration
    std::map<std::string, BinaryMask> refined;                 // last snapshot
    int training_runs = 0;
    bool stopped_early = false;
    std::vector<double> stability_deltas;
    std::vector<std::vector<double>> epoch_losses;  // per run
};

/// Stage A + iterative self-supervision for one method, in isolation.
/// Trains only on the given labels; never reads another method's artifacts.
RefineResult refine_method(const std::string& method_name,
                           const std::map<std::string, BinaryMask>& method_labels,
                           const Dataset& train_data, const StagePlan& plan,
                           const OptimConfig& optim, uint64_t run_seed,
                           const ArtifactLayout* layout = nullptr, RunManifest* manifest = nullptr,
                           RunLog* log = nullptr);

/// Final stage: fresh network trained on all refined label sets at once with
/// the mean per-method loss.
std::unique_ptr<SaliencyNet> fuse_and_train(
    const std::vector<std::pair<std::string, const std::map<std::string, BinaryMask>*>>& refined_sets,
    const Dataset& train_data, const StagePlan& plan, const OptimConfig& optim, uint64_t run_seed,
    const std::string& stage_name = "fusion", const ArtifactLayout* layout = nullptr,
    RunManifest* manifest = nullptr, RunLog* log = nullptr);

/// Inference entry point; applies CRF only when the plan enables it at
/// inference.
SaliencyMap predict(SaliencyNet& params, const Image& image, const StagePlan& plan);
SaliencyMap predict(SaliencyNet& params, const Image& image);

struct PipelineState {
    std::map<std::string, std::map<std::string, BinaryMask>> raw_labels;
    std::map<std::string, std::map<std::string, SaliencyMap>> raw_maps;
    std::map<std::string, RefineResult> refined;  // per method
    std::shared_ptr<SaliencyNet> final_net;
    RunManifest manifest;
    std::vector<MethodRunFailure> method_failures;
};

/// handcrafted -> per-method refinement -> fusion, with all intermediates
/// persisted under out_dir and a run manifest written at the end.
PipelineState run_full_pipeline(const Dataset& dataset, const std::vector<MethodDescriptor>& methods,
                                const StagePlan& plan, const OptimConfig& optim, uint64_t seed,
                                const std::filesystem::path& out_dir, RunLog* log = nullptr);

// Disk reconstruction for stage-granular commands: directories of
// <id>.png files written by earlier stages.
std::map<std::string, BinaryMask> load_label_dir(const std::filesystem::path& dir);
std::map<std::string, SaliencyMap> load_map_dir(const std::filesystem::path& dir);

/// Highest mva/iter<k> index present for a method, or -1 when none.
int last_iteration_on_disk(const ArtifactLayout& layout, const std::string& method);

}  // namespace usps

#endif
