#include "usps/crf.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

#include "usps/util.hpp"

namespace usps {

using Eigen::Map;
using ArrF = Eigen::Array<float, Eigen::Dynamic, 1>;
using ArrD = Eigen::Array<double, Eigen::Dynamic, 1>;

void CrfParams::validate() const {
    if (iterations < 0) throw InvalidArgumentError("crf: iterations must be >= 0");
    if (w_bilateral < 0 || w_gaussian < 0) throw InvalidArgumentError("crf: kernel weights must be >= 0");
    if (theta_alpha <= 0 || theta_beta <= 0 || theta_gamma <= 0)
        throw InvalidArgumentError("crf: kernel widths must be positive");
    if (unary_clamp <= 0) throw InvalidArgumentError("crf: unary_clamp must be positive");
    if (subsample_stride < 1) throw InvalidArgumentError("crf: subsample_stride must be >= 1");
}

CrfParams::Mode crf_mode_from_name(const std::string& name) {
    if (name == "exact") return CrfParams::Mode::exact;
    if (name == "windowed") return CrfParams::Mode::windowed;
    if (name == "subsampled") return CrfParams::Mode::subsampled;
    throw InvalidArgumentError("crf: unknown mode '" + name + "'");
}

std::string crf_mode_name(CrfParams::Mode mode) {
    switch (mode) {
        case CrfParams::Mode::exact: return "exact";
        case CrfParams::Mode::windowed: return "windowed";
        case CrfParams::Mode::subsampled: return "subsampled";
    }
    return "windowed";
}

DenseCrf::DenseCrf(const CrfParams& params) : params_(params) { params_.validate(); }

// Offsets are the half plane (dy > 0, or dy == 0 and dx > 0) within the
// window radius; every pass applies each one symmetrically.
void DenseCrf::ensure_geometry(int w, int h) {
    if (geom_w_ == w && geom_h_ == h) return;
    geom_w_ = w;
    geom_h_ = h;
    bilateral_offsets_.clear();
    gaussian_offsets_.clear();

    const double ta = params_.theta_alpha_scaled(w, h);
    const double tg = params_.theta_gamma;
    const int max_r = std::max(w, h) - 1;
    const int stride = params_.mode == CrfParams::Mode::subsampled ? params_.subsample_stride : 1;

    auto build = [&](double sigma, bool strided, std::vector<Offset>& out) {
        const int r = std::min(static_cast<int>(std::ceil(params_.window_sigma_mult * sigma)), max_r);
        const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
        for (int dy = 0; dy <= r; ++dy) {
            for (int dx = (dy == 0 ? 1 : -r); dx <= r; ++dx) {
                const int d2 = dy * dy + dx * dx;
                if (d2 > r * r) continue;
                if (strided && (dy % stride != 0 || ((dx % stride) + stride) % stride != 0)) continue;
                out.push_back({dy, dx, static_cast<float>(std::exp(-d2 * inv2s2))});
            }
        }
    };
    build(ta, stride > 1, bilateral_offsets_);
    build(tg, false, gaussian_offsets_);  // cheap enough unstrided

    // smoothness-kernel normalizer is image-independent
    den_gaussian_.assign(static_cast<size_t>(w) * h, 0.0);
    for (const auto& off : gaussian_offsets_) {
        const int joff = off.dy * w + off.dx;
        const int y0 = std::max(0, -off.dy), y1 = h - std::max(0, off.dy);
        const int x0 = std::max(0, -off.dx), x1 = w - std::max(0, off.dx);
        for (int y = y0; y < y1; ++y) {
            const size_t i0 = static_cast<size_t>(y) * w + x0;
            const int len = x1 - x0;
            Map<ArrD>(den_gaussian_.data() + i0, len) += static_cast<double>(off.ws);
            Map<ArrD>(den_gaussian_.data() + i0 + joff, len) += static_cast<double>(off.ws);
        }
    }
}

namespace {

inline void clamped_unary(const SaliencyMap& map, double clamp_at, std::vector<float>& out) {
    out.resize(map.size());
    for (size_t i = 0; i < map.size(); ++i) {
        const double s = map.values[i];
        const double a = std::max(s, clamp_at);
        const double b = std::max(1.0 - s, clamp_at);
        out[i] = static_cast<float>(a / (a + b));
    }
}

}  // namespace

void DenseCrf::run_windowed(const Image& image, const std::vector<float>& unary_fg,
                            std::vector<float>& q) {
    const int w = geom_w_, h = geom_h_;
    const size_t n = static_cast<size_t>(w) * h;
    const float inv2tb2 = static_cast<float>(1.0 / (2.0 * params_.theta_beta * params_.theta_beta));
    const double w1 = params_.w_bilateral, w2 = params_.w_gaussian;
    const double wsum = w1 + w2;

    num_bilateral_.assign(n, 0.0);
    den_bilateral_.assign(n, 0.0);
    num_gaussian_.assign(n, 0.0);
    q_next_.resize(n);

    const auto* red = image.plane(0).data();
    const auto* grn = image.plane(1).data();
    const auto* blu = image.plane(2).data();

    const bool use_bilateral = w1 > 0.0;
    const bool use_gaussian = w2 > 0.0;

    size_t store_needed = 0;
    if (use_bilateral) {
        for (const auto& off : bilateral_offsets_) {
            const int rows = h - std::abs(off.dy);
            const int cols = w - std::abs(off.dx);
            if (rows > 0 && cols > 0) store_needed += static_cast<size_t>(rows) * cols;
        }
        wstore_.resize(store_needed);
    }

    for (int it = 0; it < params_.iterations; ++it) {
        if (use_bilateral) {
            std::fill(num_bilateral_.begin(), num_bilateral_.end(), 0.0);
            size_t cursor = 0;
            for (const auto& off : bilateral_offsets_) {
                const int joff = off.dy * w + off.dx;
                const int y0 = std::max(0, -off.dy), y1 = h - std::max(0, off.dy);
                const int x0 = std::max(0, -off.dx), x1 = w - std::max(0, off.dx);
                const int len = x1 - x0;
                if (len <= 0) continue;
                for (int y = y0; y < y1; ++y) {
                    const size_t i0 = static_cast<size_t>(y) * w + x0;
                    const size_t j0 = i0 + joff;
                    float* wc = wstore_.data() + cursor;
                    if (it == 0) {
                        // build kernel weights once; replayed on later iterations
                        if (static_cast<size_t>(len) > d2_scratch_.size()) {
                            d2_scratch_.resize(len);
                        }
                        Map<ArrF> d2(d2_scratch_.data(), len);
                        d2 = (Map<const ArrF>(red + i0, len) - Map<const ArrF>(red + j0, len)).square() +
                             (Map<const ArrF>(grn + i0, len) - Map<const ArrF>(grn + j0, len)).square() +
                             (Map<const ArrF>(blu + i0, len) - Map<const ArrF>(blu + j0, len)).square();
                        Map<ArrF>(wc, len) = off.ws * (-inv2tb2 * d2).exp();
                        Map<ArrD>(den_bilateral_.data() + i0, len) += Map<const ArrF>(wc, len).cast<double>();
                        Map<ArrD>(den_bilateral_.data() + j0, len) += Map<const ArrF>(wc, len).cast<double>();
                    }
                    Map<ArrD>(num_bilateral_.data() + i0, len) +=
                        (Map<const ArrF>(wc, len) * Map<const ArrF>(q.data() + j0, len)).cast<double>();
                    Map<ArrD>(num_bilateral_.data() + j0, len) +=
                        (Map<const ArrF>(wc, len) * Map<const ArrF>(q.data() + i0, len)).cast<double>();
                    cursor += static_cast<size_t>(len);
                }
            }
        }
        if (use_gaussian) {
            std::fill(num_gaussian_.begin(), num_gaussian_.end(), 0.0);
            for (const auto& off : gaussian_offsets_) {
                const int joff = off.dy * w + off.dx;
                const int y0 = std::max(0, -off.dy), y1 = h - std::max(0, off.dy);
                const int x0 = std::max(0, -off.dx), x1 = w - std::max(0, off.dx);
                const int len = x1 - x0;
                if (len <= 0) continue;
                for (int y = y0; y < y1; ++y) {
                    const size_t i0 = static_cast<size_t>(y) * w + x0;
                    const size_t j0 = i0 + joff;
                    Map<ArrD>(num_gaussian_.data() + i0, len) +=
                        (off.ws * Map<const ArrF>(q.data() + j0, len)).cast<double>();
                    Map<ArrD>(num_gaussian_.data() + j0, len) +=
                        (off.ws * Map<const ArrF>(q.data() + i0, len)).cast<double>();
                }
            }
        }
        for (size_t i = 0; i < n; ++i) {
            const double qi = q[i];
            const double r1 = use_bilateral && den_bilateral_[i] > 0.0
                                  ? num_bilateral_[i] / den_bilateral_[i]
                                  : qi;
            const double r2 = use_gaussian && den_gaussian_[i] > 0.0
                                  ? num_gaussian_[i] / den_gaussian_[i]
                                  : qi;
            const double msg_fg = w1 * r1 + w2 * r2;
            const double msg_bg = wsum - msg_fg;
            const double a = unary_fg[i];
            const double qf = a * std::exp(-msg_bg);
            const double qb = (1.0 - a) * std::exp(-msg_fg);
            q_next_[i] = static_cast<float>(qf / (qf + qb));
        }
        std::swap(q, q_next_);
    }
}

void DenseCrf::run_exact(const Image& image, const std::vector<float>& unary_fg,
                         std::vector<float>& q) {
    // Reference path: full O(N^2) pairs, double precision, no windowing.
    const int w = geom_w_, h = geom_h_;
    const size_t n = static_cast<size_t>(w) * h;
    const double ta = params_.theta_alpha_scaled(w, h);
    const double inv2ta2 = 1.0 / (2.0 * ta * ta);
    const double inv2tb2 = 1.0 / (2.0 * params_.theta_beta * params_.theta_beta);
    const double inv2tg2 = 1.0 / (2.0 * params_.theta_gamma * params_.theta_gamma);
    const double w1 = params_.w_bilateral, w2 = params_.w_gaussian;
    const double wsum = w1 + w2;

    const auto* red = image.plane(0).data();
    const auto* grn = image.plane(1).data();
    const auto* blu = image.plane(2).data();

    std::vector<double> num1(n), den1(n), num2(n), den2(n);
    std::vector<float> qn(n);
    for (int it = 0; it < params_.iterations; ++it) {
        std::fill(num1.begin(), num1.end(), 0.0);
        std::fill(den1.begin(), den1.end(), 0.0);
        std::fill(num2.begin(), num2.end(), 0.0);
        std::fill(den2.begin(), den2.end(), 0.0);
        for (size_t i = 0; i < n; ++i) {
            const int yi = static_cast<int>(i) / w, xi = static_cast<int>(i) % w;
            for (size_t j = i + 1; j < n; ++j) {
                const int yj = static_cast<int>(j) / w, xj = static_cast<int>(j) % w;
                const double ds = static_cast<double>((yi - yj) * (yi - yj) + (xi - xj) * (xi - xj));
                const double dr = static_cast<double>(red[i]) - red[j];
                const double dg = static_cast<double>(grn[i]) - grn[j];
                const double db = static_cast<double>(blu[i]) - blu[j];
                const double dc = dr * dr + dg * dg + db * db;
                const double k1 = std::exp(-ds * inv2ta2 - dc * inv2tb2);
                const double k2 = std::exp(-ds * inv2tg2);
                num1[i] += k1 * q[j];
                num1[j] += k1 * q[i];
                den1[i] += k1;
                den1[j] += k1;
                num2[i] += k2 * q[j];
                num2[j] += k2 * q[i];
                den2[i] += k2;
                den2[j] += k2;
            }
        }
        for (size_t i = 0; i < n; ++i) {
            const double qi = q[i];
            const double r1 = den1[i] > 0.0 ? num1[i] / den1[i] : qi;
            const double r2 = den2[i] > 0.0 ? num2[i] / den2[i] : qi;
            const double msg_fg = w1 * r1 + w2 * r2;
            const double msg_bg = wsum - msg_fg;
            const double a = unary_fg[i];
            const double qf = a * std::exp(-msg_bg);
            const double qb = (1.0 - a) * std::exp(-msg_fg);
            qn[i] = static_cast<float>(qf / (qf + qb));
        }
        std::swap(q, qn);
    }
}

SaliencyMap DenseCrf::refine(const Image& image, const SaliencyMap& map) {
    if (image.width != map.width || image.height != map.height)
        throw InvalidArgumentError("dense_crf_refine: image/map dimension mismatch");
    ensure_geometry(image.width, image.height);

    std::vector<float> q;
    clamped_unary(map, params_.unary_clamp, q);

    if (params_.iterations > 0) {
        std::vector<float> unary = q;  // init marginal doubles as the unary term
        if (params_.mode == CrfParams::Mode::exact)
            run_exact(image, unary, q);
        else
            run_windowed(image, unary, q);
    }

    SaliencyMap out(map.width, map.height);
    out.source = MapSource::crf;
    out.values = std::move(q);
    return out;
}

SaliencyMap dense_crf_refine(const Image& image, const SaliencyMap& map, const CrfParams& params) {
    DenseCrf crf(params);
    return crf.refine(image, map);
}

}  // namespace usps
