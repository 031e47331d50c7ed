#include "usps/objective.hpp"

namespace usps {

ContingencyTotals soft_contingency(const SaliencyMap& pred, const BinaryMask& target) {
    validate_dimensions_match(pred, target, "soft_contingency");
    ContingencyTotals t;
    const size_t n = pred.size();
    for (size_t i = 0; i < n; ++i) {  // fixed pixel order for determinism
        const double p = pred.values[i];
        if (target.values[i]) {
            t.tp += p;
            t.fn += 1.0 - p;
        } else {
            t.fp += p;
        }
    }
    return t;
}

double f_beta(const ContingencyTotals& t, const LossConfig& cfg) {
    const double eps = cfg.epsilon;
    const double precision = (t.tp + eps) / (t.tp + t.fp + eps);
    const double recall = (t.tp + eps) / (t.tp + t.fn + eps);
    return (1.0 + cfg.beta_sq) * precision * recall / (cfg.beta_sq * precision + recall);
}

double image_level_loss(const SaliencyMap& pred, const BinaryMask& target, const LossConfig& cfg) {
    return 1.0 - f_beta(soft_contingency(pred, target), cfg);
}

namespace {

// With a = tp + eps, F simplifies to N/D with N = (1+b2) a and
// D = (1+b2) tp + b2 fn + fp + (1+b2) eps, so
//   dF/dtp = (1+b2)(D - N)/D^2,  dF/dfp = -N/D^2,  dF/dfn = -b2 N/D^2.
// Chain rule with dtp/dp = t, dfp/dp = 1-t, dfn/dp = -t gives dL/dp = -dF/dp.
struct FGrad {
    double loss;
    double g_fg;  // dL/dp at pixels with t=1
    double g_bg;  // dL/dp at pixels with t=0
};

FGrad f_grad(const ContingencyTotals& t, const LossConfig& cfg) {
    const double b2 = cfg.beta_sq, eps = cfg.epsilon;
    const double N = (1.0 + b2) * (t.tp + eps);
    const double D = (1.0 + b2) * t.tp + b2 * t.fn + t.fp + (1.0 + b2) * eps;
    const double D2 = D * D;
    const double dF_dtp = (1.0 + b2) * (D - N) / D2;
    const double dF_dfp = -N / D2;
    const double dF_dfn = -b2 * N / D2;
    FGrad out;
    out.loss = 1.0 - N / D;
    out.g_fg = -(dF_dtp - dF_dfn);
    out.g_bg = -dF_dfp;
    return out;
}

}  // namespace

double loss_gradient_accumulate(const SaliencyMap& pred, const BinaryMask& target,
                                const LossConfig& cfg, double scale, std::span<float> grad) {
    const auto totals = soft_contingency(pred, target);
    const auto fg = f_grad(totals, cfg);
    const float g1 = static_cast<float>(scale * fg.g_fg);
    const float g0 = static_cast<float>(scale * fg.g_bg);
    const size_t n = pred.size();
    for (size_t i = 0; i < n; ++i) grad[i] += target.values[i] ? g1 : g0;
    return fg.loss;
}

std::vector<float> loss_gradient(const SaliencyMap& pred, const BinaryMask& target,
                                 const LossConfig& cfg) {
    std::vector<float> grad(pred.size(), 0.f);
    loss_gradient_accumulate(pred, target, cfg, 1.0, grad);
    return grad;
}

double fusion_loss(const SaliencyMap& pred, const std::vector<const BinaryMask*>& targets,
                   const LossConfig& cfg) {
    if (targets.empty()) throw InvalidArgumentError("fusion_loss: no targets");
    double sum = 0.0;
    for (const auto* t : targets) sum += image_level_loss(pred, *t, cfg);
    return sum / static_cast<double>(targets.size());
}

double fusion_loss_gradient_accumulate(const SaliencyMap& pred,
                                       const std::vector<const BinaryMask*>& targets,
                                       const LossConfig& cfg, double scale, std::span<float> grad) {
    if (targets.empty()) throw InvalidArgumentError("fusion_loss: no targets");
    const double w = scale / static_cast<double>(targets.size());
    double sum = 0.0;
    for (const auto* t : targets) sum += loss_gradient_accumulate(pred, *t, cfg, w, grad);
    return sum / static_cast<double>(targets.size());
}

}  // namespace usps
