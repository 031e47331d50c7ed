#ifndef USPS_OBJECTIVE_HPP
#define USPS_OBJECTIVE_HPP

#include <span>
#include <vector>

#include "usps/types.hpp"

namespace usps {

/// Continuous contingency totals of a soft prediction against a discrete
/// target: tp = sum p*t, fp = sum p*(1-t), fn = sum (1-p)*t.
struct ContingencyTotals {
    double tp = 0.0;
    double fp = 0.0;
    double fn = 0.0;
};

struct LossConfig {
    double beta_sq = 0.3;
    double epsilon = 1e-7;
};

ContingencyTotals soft_contingency(const SaliencyMap& pred, const BinaryMask& target);

/// F_beta = (1+b^2) P R / (b^2 P + R) with P = (tp+eps)/(tp+fp+eps) and
/// R = (tp+eps)/(tp+fn+eps). Smooth everywhere; empty target with empty
/// prediction scores 1 (agreement on "nothing salient").
double f_beta(const ContingencyTotals& totals, const LossConfig& cfg);

/// Image-level loss L = 1 - F_beta(soft_contingency(pred, target)).
double image_level_loss(const SaliencyMap& pred, const BinaryMask& target, const LossConfig& cfg);

/// Analytic dL/dp per pixel, accumulated into `grad` (+=). `grad` must have
/// pred.size() elements. Returns the loss value.
double loss_gradient_accumulate(const SaliencyMap& pred, const BinaryMask& target,
                                const LossConfig& cfg, double scale, std::span<float> grad);

/// dL/dp as a fresh per-pixel map.
std::vector<float> loss_gradient(const SaliencyMap& pred, const BinaryMask& target,
                                 const LossConfig& cfg);

/// Fusion loss: arithmetic mean of per-target image-level losses.
double fusion_loss(const SaliencyMap& pred, const std::vector<const BinaryMask*>& targets,
                   const LossConfig& cfg);

/// Mean of per-target gradients, accumulated into `grad` (+= scale * dL/dp).
/// Returns the fusion loss value.
double fusion_loss_gradient_accumulate(const SaliencyMap& pred,
                                       const std::vector<const BinaryMask*>& targets,
                                       const LossConfig& cfg, double scale, std::span<float> grad);

}  // namespace usps

#endif
