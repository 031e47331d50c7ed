#ifndef USPS_HANDCRAFTED_HPP
#define USPS_HANDCRAFTED_HPP

#include <Eigen/Core>

#include <map>
#include <string>
#include <vector>

#include "usps/layout.hpp"
#include "usps/superpixels.hpp"
#include "usps/types.hpp"

namespace usps {

// Classical saliency detectors. Each is a deterministic pure function of the
// image, built on the shared superpixel substrate, and preserves one of the
// priors the refinement pipeline feeds on: boundary connectivity (rbd),
// absorbing-chain reachability (mc), border reconstruction error (dsr_like),
// global contrast + center bias (contrast_center).

struct RbdParams {
    int superpixel_k = 0;  // 0 = default_superpixel_count
    double compactness = 10.0;
    double sigma_clr = 10.0;   // Lab units, geodesic spread
    double sigma_b = 1.0;      // boundary-connectivity falloff
    double sigma_spatial = 0.25;  // normalized coordinates
};

struct McParams {
    int superpixel_k = 0;
    double compactness = 10.0;
    double sigma = 10.0;  // Lab units, transition falloff
};

struct DsrParams {
    int superpixel_k = 0;
    double compactness = 10.0;
    double ridge_scale = 0.01;  // lambda = ridge_scale * tr(D^T D)/atoms
};

struct ContrastCenterParams {
    int superpixel_k = 0;
    double compactness = 10.0;
    double center_sigma = 0.33;  // normalized coordinates
};

SaliencyMap rbd_saliency(const Image& image, const RbdParams& params = {});
SaliencyMap mc_saliency(const Image& image, const McParams& params = {});
SaliencyMap dsr_like_saliency(const Image& image, const DsrParams& params = {});
SaliencyMap contrast_center_saliency(const Image& image, const ContrastCenterParams& params = {});

/// Expected absorption times of the transient states of an absorbing chain:
/// t = (I - Q)^-1 * 1. Throws SolverError if the system is singular.
Eigen::VectorXd absorption_times(const Eigen::MatrixXd& Q);

/// Ridge-regularized reconstruction of `f` on dictionary columns `D`;
/// returns the residual norm |D w - f| with w = (D^T D + lambda I)^-1 D^T f.
double ridge_reconstruct_residual(const Eigen::MatrixXd& D, const Eigen::VectorXd& f, double lambda);

struct MethodDescriptor {
    std::string name;  // rbd | mc | dsr_like | contrast_center
    std::map<std::string, double> params;
};

std::vector<MethodDescriptor> default_methods();

/// Dispatch one descriptor on one image. Unknown method names or parameter
/// keys raise InvalidArgumentError.
SaliencyMap apply_method(const MethodDescriptor& method, const Image& image);

struct MethodRunFailure {
    std::string method;
    std::string sample_id;
    std::string message;
};

struct MethodRunResult {
    // method -> id -> artifact
    std::map<std::string, std::map<std::string, SaliencyMap>> maps;
    std::map<std::string, std::map<std::string, BinaryMask>> labels;
    std::vector<MethodRunFailure> failures;
};

/// Runs every method over every sample, persisting each saliency map and its
/// discretized pseudo-label under artifacts/<method>/raw/. Per-sample
/// failures are recorded and exclude the sample from that method's label set
/// only. With dataset_wide_gamma the discretization threshold is
/// 1.5x the method's mean saliency over the whole dataset instead of per
/// image.
MethodRunResult run_methods(const Dataset& dataset, const std::vector<MethodDescriptor>& methods,
                            const ArtifactLayout& layout, bool persist = true,
                            bool dataset_wide_gamma = false);

}  // namespace usps

#endif
