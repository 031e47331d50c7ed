#include "usps/evalsuite.hpp"

#include <algorithm>
#include <cmath>

#include "usps/objective.hpp"
#include "usps/util.hpp"

namespace usps {

namespace {

void require_matching_ids(const std::map<std::string, SaliencyMap>& preds,
                          const std::map<std::string, BinaryMask>& gts, const char* where) {
    if (preds.size() != gts.size())
        throw InvalidArgumentError(std::string(where) + ": id sets differ in size");
    auto pit = preds.begin();
    auto git = gts.begin();
    for (; pit != preds.end(); ++pit, ++git)
        if (pit->first != git->first)
            throw InvalidArgumentError(std::string(where) + ": id mismatch ('" + pit->first +
                                       "' vs '" + git->first + "')");
}

struct PerImage {
    double mae;
    double precision;
    double recall;
    double f;
    double tp, fp, fn;
};

PerImage eval_one(const SaliencyMap& pred, const BinaryMask& gt, const EvalOptions& opts) {
    validate_dimensions_match(pred, gt, "evaluate");
    const size_t n = pred.size();
    double abs_err = 0.0, mean_pred = 0.0;
    for (size_t i = 0; i < n; ++i) {
        abs_err += std::abs(static_cast<double>(pred.values[i]) - gt.values[i]);
        mean_pred += pred.values[i];
    }
    mean_pred /= static_cast<double>(n);
    const double tau = std::min(2.0 * mean_pred, opts.max_threshold);

    double tp = 0, fp = 0, fn = 0;
    for (size_t i = 0; i < n; ++i) {
        const bool p = pred.values[i] > tau;
        const bool t = gt.values[i] != 0;
        if (p && t) tp += 1;
        else if (p) fp += 1;
        else if (t) fn += 1;
    }
    PerImage out;
    out.mae = abs_err / static_cast<double>(n);
    out.tp = tp;
    out.fp = fp;
    out.fn = fn;
    const double eps = opts.epsilon;
    out.precision = (tp + eps) / (tp + fp + eps);
    out.recall = (tp + eps) / (tp + fn + eps);
    out.f = (1.0 + opts.beta_sq) * out.precision * out.recall /
            (opts.beta_sq * out.precision + out.recall);
    return out;
}

}  // namespace

EvalDetail evaluate_detailed(const std::map<std::string, SaliencyMap>& preds,
                             const std::map<std::string, BinaryMask>& gts, const EvalOptions& opts,
                             const std::string& name, const std::string& dataset) {
    require_matching_ids(preds, gts, "evaluate");
    if (preds.empty()) throw InvalidArgumentError("evaluate: empty id set");

    EvalDetail detail;
    double sum_mae = 0, sum_p = 0, sum_r = 0, sum_f = 0;
    double pool_tp = 0, pool_fp = 0, pool_fn = 0;
    for (const auto& [id, pred] : preds) {
        const PerImage pi = eval_one(pred, gts.at(id), opts);
        sum_mae += pi.mae;
        sum_p += pi.precision;
        sum_r += pi.recall;
        sum_f += pi.f;
        pool_tp += pi.tp;
        pool_fp += pi.fp;
        pool_fn += pi.fn;
        detail.per_image_mae.emplace_back(id, pi.mae);
    }
    const double n = static_cast<double>(preds.size());
    MetricsRow row;
    row.name = name;
    row.dataset = dataset;
    row.mae = 100.0 * sum_mae / n;
    if (!opts.pooled) {
        row.precision = 100.0 * sum_p / n;
        row.recall = 100.0 * sum_r / n;
        row.f_score = 100.0 * sum_f / n;
    } else {
        const double eps = opts.epsilon;
        const double P = (pool_tp + eps) / (pool_tp + pool_fp + eps);
        const double R = (pool_tp + eps) / (pool_tp + pool_fn + eps);
        row.precision = 100.0 * P;
        row.recall = 100.0 * R;
        row.f_score = 100.0 * (1.0 + opts.beta_sq) * P * R / (opts.beta_sq * P + R);
    }
    detail.row = row;
    return detail;
}

MetricsRow evaluate(const std::map<std::string, SaliencyMap>& preds,
                    const std::map<std::string, BinaryMask>& gts, const EvalOptions& opts,
                    const std::string& name, const std::string& dataset) {
    return evaluate_detailed(preds, gts, opts, name, dataset).row;
}

SaliencyMap mask_to_saliency(const BinaryMask& mask) {
    SaliencyMap map(mask.width, mask.height);
    for (size_t i = 0; i < mask.size(); ++i) map.values[i] = mask.values[i] ? 1.f : 0.f;
    return map;
}

std::vector<MetricsRow> label_quality_curve(
    const std::vector<std::pair<std::string, std::map<std::string, SaliencyMap>>>& stages,
    const std::map<std::string, BinaryMask>& gts, const EvalOptions& opts,
    const std::string& dataset) {
    std::vector<MetricsRow> rows;
    for (const auto& [name, preds] : stages) rows.push_back(evaluate(preds, gts, opts, name, dataset));
    return rows;
}

std::map<std::string, BinaryMask> oracle_label_fusion(
    const std::vector<const std::map<std::string, BinaryMask>*>& label_sets,
    const std::map<std::string, BinaryMask>& gts) {
    if (label_sets.empty()) throw InvalidArgumentError("oracle_label_fusion: no label sets");
    for (const auto* set : label_sets) {
        if (set->size() != gts.size())
            throw InvalidArgumentError("oracle_label_fusion: id sets differ in size");
        auto sit = set->begin();
        auto git = gts.begin();
        for (; sit != set->end(); ++sit, ++git)
            if (sit->first != git->first)
                throw InvalidArgumentError("oracle_label_fusion: id mismatch ('" + sit->first + "')");
    }
    std::map<std::string, BinaryMask> out;
    for (const auto& [id, gt] : gts) {
        BinaryMask fused(gt.width, gt.height);
        for (size_t i = 0; i < gt.size(); ++i) {
            int ones = 0;
            bool match = false;
            for (const auto* set : label_sets) {
                const uint8_t v = set->at(id).values[i];
                ones += v;
                if (v == gt.values[i]) match = true;
            }
            if (match) {
                fused.values[i] = gt.values[i];
            } else {
                const int zeros = static_cast<int>(label_sets.size()) - ones;
                fused.values[i] = ones > zeros ? 1 : 0;  // ties to background
            }
        }
        out.emplace(id, std::move(fused));
    }
    return out;
}

std::map<std::string, SaliencyMap> predict_split(SaliencyNet& net, const Dataset& split,
                                                 const StagePlan& plan) {
    std::map<std::string, SaliencyMap> preds;
    for (const auto& s : split.samples) preds.emplace(s.id, predict(net, s.image, plan));
    return preds;
}

namespace {

std::map<std::string, BinaryMask> gts_of(const Dataset& split, const char* where) {
    std::map<std::string, BinaryMask> gts;
    for (const auto& s : split.samples) {
        if (!s.gt) throw InvalidArgumentError(std::string(where) + ": sample '" + s.id + "' has no GT");
        gts.emplace(s.id, *s.gt);
    }
    return gts;
}

}  // namespace

AblationOutcome run_ablations(const AblationPlan& plan, const Dataset& dataset,
                              const PipelineState& state, const StagePlan& splan,
                              const OptimConfig& optim, uint64_t seed,
                              const std::vector<MethodDescriptor>& methods,
                              const EvalOptions& eval_opts, const std::string& dataset_label,
                              RunLog* log) {
    if (!plan.any()) throw InvalidArgumentError("run_ablations: no ablation flag set");
    const Dataset train = select_split(dataset, Split::train);
    const Dataset test = select_split(dataset, Split::test);
    if (test.empty()) throw InvalidArgumentError("run_ablations: test split is empty");
    const auto test_gts = gts_of(test, "run_ablations");

    AblationOutcome out;
    auto eval_model = [&](const std::string& name, SaliencyNet& net) {
        auto preds = predict_split(net, test, splan);
        EvalDetail detail = evaluate_detailed(preds, test_gts, eval_opts, name, dataset_label);
        out.report.rows.push_back(detail.row);
        out.details.emplace(name, std::move(detail));
        out.predictions.emplace(name, std::move(preds));
    };

    if (!state.final_net) throw InvalidArgumentError("run_ablations: pipeline has no final model");
    eval_model("pipeline", *state.final_net);

    auto train_on_sets =
        [&](const std::string& name,
            const std::vector<std::pair<std::string, const std::map<std::string, BinaryMask>*>>& sets) {
            if (log) log->progress("ablation '" + name + "': training");
            auto net = fuse_and_train(sets, train, splan, optim, seed, "fusion", nullptr, nullptr, log);
            std::shared_ptr<SaliencyNet> shared = std::move(net);
            out.models.emplace(name, shared);
            eval_model(name, *shared);
        };

    if (plan.direct_fusion) {
        std::vector<std::pair<std::string, const std::map<std::string, BinaryMask>*>> sets;
        for (const auto& m : methods) sets.emplace_back(m.name, &state.raw_labels.at(m.name));
        train_on_sets("direct_fusion", sets);
    }
    for (const auto& mname : plan.single_methods) {
        if (!state.refined.count(mname))
            throw InvalidArgumentError("run_ablations: no refined labels for method '" + mname + "'");
        train_on_sets("single_method:" + mname, {{mname, &state.refined.at(mname).refined}});
    }
    if (plan.no_self_supervision) {
        // fusion on the stage-A snapshots (no self-supervision iterations)
        std::vector<std::pair<std::string, const std::map<std::string, BinaryMask>*>> sets;
        for (const auto& m : methods) {
            const auto& snaps = state.refined.at(m.name).snapshots;
            sets.emplace_back(m.name, &snaps.front());
        }
        train_on_sets("no_self_supervision", sets);
    }
    if (plan.no_crf) {
        if (log) log->progress("ablation 'no_crf': re-running refinement without CRF");
        StagePlan nc = splan;
        nc.crf_enabled = false;
        std::map<std::string, RefineResult> refined_nc;
        for (const auto& m : methods)
            refined_nc[m.name] =
                refine_method(m.name, state.raw_labels.at(m.name), train, nc, optim, seed);
        std::vector<std::pair<std::string, const std::map<std::string, BinaryMask>*>> sets;
        for (const auto& m : methods) sets.emplace_back(m.name, &refined_nc.at(m.name).refined);
        if (log) log->progress("ablation 'no_crf': training fusion");
        auto net = fuse_and_train(sets, train, nc, optim, seed, "fusion", nullptr, nullptr, log);
        std::shared_ptr<SaliencyNet> shared = std::move(net);
        out.models.emplace("no_crf", shared);
        eval_model("no_crf", *shared);
    }
    if (plan.oracle_gt_training) {
        const auto train_gts = gts_of(train, "run_ablations(oracle_gt)");
        std::vector<std::pair<std::string, const std::map<std::string, BinaryMask>*>> sets;
        sets.emplace_back("gt", &train_gts);
        train_on_sets("oracle_gt_training", sets);
    }
    if (plan.oracle_label_fusion) {
        const auto train_gts = gts_of(train, "run_ablations(oracle_fusion)");
        std::vector<const std::map<std::string, BinaryMask>*> sets;
        for (const auto& m : methods) sets.push_back(&state.refined.at(m.name).refined);
        const auto fused = usps::oracle_label_fusion(sets, train_gts);
        std::vector<std::pair<std::string, const std::map<std::string, BinaryMask>*>> tset;
        tset.emplace_back("oracle_fused", &fused);
        if (log) log->progress("ablation 'oracle_label_fusion': training");
        auto net = fuse_and_train(tset, train, splan, optim, seed, "fusion", nullptr, nullptr, log);
        std::shared_ptr<SaliencyNet> shared = std::move(net);
        out.models.emplace("oracle_label_fusion", shared);
        eval_model("oracle_label_fusion", *shared);
    }
    return out;
}

}  // namespace usps
