#ifndef USPS_EVALSUITE_HPP
#define USPS_EVALSUITE_HPP

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "usps/pipeline.hpp"
#include "usps/types.hpp"

namespace usps {

/// One benchmark row; percentages match the usual table convention (x100).
struct MetricsRow {
    std::string name;
    std::string dataset;
    double f_score = 0.0;
    double mae = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    int n_runs = 1;
    std::optional<double> f_std;
    std::optional<double> mae_std;
};

struct MetricsReport {
    std::vector<MetricsRow> rows;
    std::vector<std::string> footnotes;
};

struct EvalOptions {
    double beta_sq = 0.3;
    double epsilon = 1e-7;
    bool pooled = false;        // pool totals instead of per-image averaging
    double max_threshold = 0.98;
};

/// MAE = mean over images of mean |pred - gt|. F/precision/recall are
/// computed per image after binarizing at the adaptive threshold
/// tau = min(2*mean(pred), max_threshold), then averaged.
MetricsRow evaluate(const std::map<std::string, SaliencyMap>& preds,
                    const std::map<std::string, BinaryMask>& gts, const EvalOptions& opts = {},
                    const std::string& name = "model", const std::string& dataset = "dataset");

struct EvalDetail {
    MetricsRow row;
    std::vector<std::pair<std::string, double>> per_image_mae;  // id-sorted
};

EvalDetail evaluate_detailed(const std::map<std::string, SaliencyMap>& preds,
                             const std::map<std::string, BinaryMask>& gts,
                             const EvalOptions& opts = {}, const std::string& name = "model",
                             const std::string& dataset = "dataset");

/// Label-quality metrics per pipeline stage (0 = handcrafted, 1 = stage A,
/// then one per self-supervision iteration).
std::vector<MetricsRow> label_quality_curve(
    const std::vector<std::pair<std::string, std::map<std::string, SaliencyMap>>>& stages,
    const std::map<std::string, BinaryMask>& gts, const EvalOptions& opts = {},
    const std::string& dataset = "train");

SaliencyMap mask_to_saliency(const BinaryMask& mask);

/// GT-informed per-pixel best choice across label sets: if any set matches
/// the GT value at a pixel, the output takes it; otherwise the majority
/// value, ties to background.
std::map<std::string, BinaryMask> oracle_label_fusion(
    const std::vector<const std::map<std::string, BinaryMask>*>& label_sets,
    const std::map<std::string, BinaryMask>& gts);

struct AblationPlan {
    bool direct_fusion = false;
    std::vector<std::string> single_methods;  // each trains on that method's final refined set
    bool no_self_supervision = false;
    bool no_crf = false;
    bool oracle_gt_training = false;
    bool oracle_label_fusion = false;

    bool any() const {
        return direct_fusion || !single_methods.empty() || no_self_supervision || no_crf ||
               oracle_gt_training || oracle_label_fusion;
    }
};

struct AblationOutcome {
    MetricsReport report;  // default-pipeline row first, then one per flag
    std::map<std::string, EvalDetail> details;
    std::map<std::string, std::shared_ptr<SaliencyNet>> models;
    std::map<std::string, std::map<std::string, SaliencyMap>> predictions;  // variant -> id -> map
};

/// Runs the flagged variants with the pipeline's seeds, evaluating each on
/// the test split. Oracle rows require ground truth.
AblationOutcome run_ablations(const AblationPlan& plan, const Dataset& dataset,
                              const PipelineState& state, const StagePlan& splan,
                              const OptimConfig& optim, uint64_t seed,
                              const std::vector<MethodDescriptor>& methods,
                              const EvalOptions& eval_opts = {},
                              const std::string& dataset_label = "synthetic/test",
                              RunLog* log = nullptr);

/// Test-split predictions of one model.
std::map<std::string, SaliencyMap> predict_split(SaliencyNet& net, const Dataset& split,
                                                 const StagePlan& plan);

}  // namespace usps

#endif
