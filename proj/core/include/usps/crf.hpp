#ifndef USPS_CRF_HPP
#define USPS_CRF_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "usps/types.hpp"

namespace usps {

/// Dense binary-label CRF, mean-field inference.
///
/// Unaries come from the input map (clamped at `unary_clamp`); the pairwise
/// Potts term combines a bilateral kernel exp(-|pos|^2/2a^2 - |rgb|^2/2b^2)
/// weighted `w_bilateral` and a spatial kernel exp(-|pos|^2/2g^2) weighted
/// `w_gaussian`. Kernels are per-pixel normalized, updates are synchronous,
/// and marginals are renormalized every iteration.
struct CrfParams {
    int iterations = 5;
    double w_bilateral = 4.0;
    double w_gaussian = 3.0;
    double theta_alpha = 30.0;  // pixels at reference_size; scaled by image size
    double theta_beta = 0.1;    // RGB units
    double theta_gamma = 3.0;   // pixels, unscaled
    double unary_clamp = 1e-6;

    enum class Mode : uint8_t {
        exact,       // full O(N^2) double-precision message passing
        windowed,    // tail-truncated window, radius window_sigma_mult * sigma
        subsampled,  // windowed + strided neighbor lattice (full-scale runs)
    };
    Mode mode = Mode::windowed;
    double window_sigma_mult = 4.0;
    int subsample_stride = 2;
    double reference_size = 432.0;  // theta_alpha is quoted at this image size

    double theta_alpha_scaled(int width, int height) const {
        const double dim = static_cast<double>(width > height ? width : height);
        return theta_alpha * dim / reference_size;
    }

    void validate() const;
};

CrfParams::Mode crf_mode_from_name(const std::string& name);
std::string crf_mode_name(CrfParams::Mode mode);

/// Reusable engine; caches window geometry between calls of equal size and
/// reuses kernel-weight scratch across mean-field iterations.
class DenseCrf {
public:
    explicit DenseCrf(const CrfParams& params);

    /// Returns the salient-label marginal. iterations == 0 returns the
    /// clamped unary marginal.
    SaliencyMap refine(const Image& image, const SaliencyMap& map);

    const CrfParams& params() const { return params_; }

private:
    struct Offset {
        int dy, dx;
        float ws;  // spatial kernel weight
    };

    void ensure_geometry(int w, int h);
    void run_windowed(const Image& image, const std::vector<float>& unary_fg,
                      std::vector<float>& q);
    void run_exact(const Image& image, const std::vector<float>& unary_fg, std::vector<float>& q);

    CrfParams params_;
    int geom_w_ = -1, geom_h_ = -1;
    std::vector<Offset> bilateral_offsets_;
    std::vector<Offset> gaussian_offsets_;
    std::vector<double> den_gaussian_;  // constant per geometry

    // per-call scratch, reused across calls
    std::vector<float> wstore_;
    std::vector<double> den_bilateral_, num_bilateral_, num_gaussian_;
    std::vector<float> q_next_, d2_scratch_, wc_scratch_;
};

/// One-shot convenience wrapper.
SaliencyMap dense_crf_refine(const Image& image, const SaliencyMap& map, const CrfParams& params);

}  // namespace usps

#endif
