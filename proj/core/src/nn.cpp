#include "usps/nn.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstring>

#include "usps/errors.hpp"

namespace usps::nn {

using MatRM = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using CMapRM = Eigen::Map<const MatRM>;

Conv2d::Conv2d(std::string name, int in_c, int out_c, int ksize, int stride, int dilation)
    : in_c(in_c), out_c(out_c), ksize(ksize), stride(stride), dilation(dilation),
      pad(dilation * (ksize - 1) / 2) {
    weight_.name = name + ".weight";
    weight_.value.assign(static_cast<size_t>(out_c) * in_c * ksize * ksize, 0.f);
    weight_.grad.assign(weight_.value.size(), 0.f);
    bias_.name = name + ".bias";
    bias_.value.assign(static_cast<size_t>(out_c), 0.f);
    bias_.grad.assign(bias_.value.size(), 0.f);
}

void Conv2d::init(DetRng& rng) {
    const double bound = std::sqrt(1.0 / (static_cast<double>(in_c) * ksize * ksize));
    for (auto& w : weight_.value) w = static_cast<float>(rng.uniform(-bound, bound));
    std::fill(bias_.value.begin(), bias_.value.end(), 0.f);
}

void Conv2d::shape(int ci, int hi, int wi, int& co, int& ho, int& wo) const {
    if (ci != in_c) throw InvalidArgumentError("conv: channel mismatch");
    co = out_c;
    ho = (hi + 2 * pad - dilation * (ksize - 1) - 1) / stride + 1;
    wo = (wi + 2 * pad - dilation * (ksize - 1) - 1) / stride + 1;
}

void Conv2d::im2col(const Tensor& x, int oh, int ow, std::vector<float>& col) const {
    const int krows = in_c * ksize * ksize;
    col.assign(static_cast<size_t>(krows) * oh * ow, 0.f);
    for (int ci = 0; ci < in_c; ++ci) {
        const float* src = x.plane(ci);
        for (int ky = 0; ky < ksize; ++ky) {
            for (int kx = 0; kx < ksize; ++kx) {
                float* dst = col.data() +
                             (static_cast<size_t>(ci) * ksize * ksize + ky * ksize + kx) * oh * ow;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * stride - pad + ky * dilation;
                    float* drow = dst + static_cast<size_t>(oy) * ow;
                    if (iy < 0 || iy >= x.h) continue;  // stays zero
                    const float* srow = src + static_cast<size_t>(iy) * x.w;
                    if (stride == 1) {
                        const int ix0 = -pad + kx * dilation;
                        const int o0 = std::max(0, -ix0);
                        const int o1 = std::min(ow, x.w - ix0);
                        if (o1 > o0) std::memcpy(drow + o0, srow + ix0 + o0, sizeof(float) * (o1 - o0));
                    } else {
                        for (int ox = 0; ox < ow; ++ox) {
                            const int ix = ox * stride - pad + kx * dilation;
                            if (ix >= 0 && ix < x.w) drow[ox] = srow[ix];
                        }
                    }
                }
            }
        }
    }
}

void Conv2d::col2im_add(const std::vector<float>& col, int oh, int ow, Tensor& dx) const {
    for (int ci = 0; ci < in_c; ++ci) {
        float* dst = dx.plane(ci);
        for (int ky = 0; ky < ksize; ++ky) {
            for (int kx = 0; kx < ksize; ++kx) {
                const float* src = col.data() +
                                   (static_cast<size_t>(ci) * ksize * ksize + ky * ksize + kx) * oh * ow;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * stride - pad + ky * dilation;
                    if (iy < 0 || iy >= dx.h) continue;
                    const float* srow = src + static_cast<size_t>(oy) * ow;
                    float* drow = dst + static_cast<size_t>(iy) * dx.w;
                    if (stride == 1) {
                        const int ix0 = -pad + kx * dilation;
                        const int o0 = std::max(0, -ix0);
                        const int o1 = std::min(ow, dx.w - ix0);
                        for (int ox = o0; ox < o1; ++ox) drow[ix0 + ox] += srow[ox];
                    } else {
                        for (int ox = 0; ox < ow; ++ox) {
                            const int ix = ox * stride - pad + kx * dilation;
                            if (ix >= 0 && ix < dx.w) drow[ix] += srow[ox];
                        }
                    }
                }
            }
        }
    }
}

void Conv2d::forward(const Batch& in, Batch& out, bool /*train*/) {
    out.resize(in.size());
    const int krows = in_c * ksize * ksize;
    for (size_t s = 0; s < in.size(); ++s) {
        int co, ho, wo;
        shape(in[s].c, in[s].h, in[s].w, co, ho, wo);
        out[s] = Tensor(co, ho, wo);
        im2col(in[s], ho, wo, col_);
        const int npix = ho * wo;
        CMapRM W(weight_.value.data(), out_c, krows);
        CMapRM C(col_.data(), krows, npix);
        MapRM O(out[s].v.data(), out_c, npix);
        O.noalias() = W * C;
        for (int c = 0; c < out_c; ++c) O.row(c).array() += bias_.value[static_cast<size_t>(c)];
    }
}

void Conv2d::backward(const Batch& in, const Batch& out, const Batch& dout, Batch& din) {
    const int krows = in_c * ksize * ksize;
    for (size_t s = 0; s < in.size(); ++s) {
        const int ho = out[s].h, wo = out[s].w;
        const int npix = ho * wo;
        im2col(in[s], ho, wo, col_);
        CMapRM dY(dout[s].v.data(), out_c, npix);
        CMapRM C(col_.data(), krows, npix);
        MapRM dW(weight_.grad.data(), out_c, krows);
        dW.noalias() += dY * C.transpose();
        for (int c = 0; c < out_c; ++c) bias_.grad[static_cast<size_t>(c)] += dY.row(c).sum();

        dcol_.assign(static_cast<size_t>(krows) * npix, 0.f);
        CMapRM W(weight_.value.data(), out_c, krows);
        MapRM dC(dcol_.data(), krows, npix);
        dC.noalias() = W.transpose() * dY;
        din[s].zero();
        col2im_add(dcol_, ho, wo, din[s]);
    }
}

BatchNorm2d::BatchNorm2d(std::string name, int channels, double momentum, double eps)
    : channels(channels), momentum_(momentum), eps_(eps) {
    gamma_.name = name + ".gamma";
    gamma_.value.assign(static_cast<size_t>(channels), 1.f);
    gamma_.grad.assign(static_cast<size_t>(channels), 0.f);
    beta_.name = name + ".beta";
    beta_.value.assign(static_cast<size_t>(channels), 0.f);
    beta_.grad.assign(static_cast<size_t>(channels), 0.f);
    running_mean_.assign(static_cast<size_t>(channels), 0.f);
    running_var_.assign(static_cast<size_t>(channels), 1.f);
}

void BatchNorm2d::shape(int ci, int hi, int wi, int& co, int& ho, int& wo) const {
    if (ci != channels) throw InvalidArgumentError("bn: channel mismatch");
    co = ci;
    ho = hi;
    wo = wi;
}

void BatchNorm2d::forward(const Batch& in, Batch& out, bool train) {
    out.resize(in.size());
    const size_t plane = in.empty() ? 0 : static_cast<size_t>(in[0].h) * in[0].w;
    batch_mean_.assign(static_cast<size_t>(channels), 0.0);
    batch_invstd_.assign(static_cast<size_t>(channels), 0.0);
    for (size_t s = 0; s < in.size(); ++s) out[s] = Tensor(in[s].c, in[s].h, in[s].w);

    for (int c = 0; c < channels; ++c) {
        double mean, invstd;
        if (train) {
            double sum = 0.0, sq = 0.0;
            for (const auto& t : in) {
                const float* p = t.plane(c);
                for (size_t i = 0; i < plane; ++i) {
                    sum += p[i];
                    sq += static_cast<double>(p[i]) * p[i];
                }
            }
            const double n = static_cast<double>(in.size() * plane);
            mean = sum / n;
            const double var = std::max(0.0, sq / n - mean * mean);
            invstd = 1.0 / std::sqrt(var + eps_);
            running_mean_[c] = static_cast<float>((1.0 - momentum_) * running_mean_[c] + momentum_ * mean);
            running_var_[c] = static_cast<float>((1.0 - momentum_) * running_var_[c] + momentum_ * var);
        } else {
            mean = running_mean_[c];
            invstd = 1.0 / std::sqrt(static_cast<double>(running_var_[c]) + eps_);
        }
        batch_mean_[c] = mean;
        batch_invstd_[c] = invstd;
        const float fm = static_cast<float>(mean);
        const float fs = static_cast<float>(invstd) * gamma_.value[static_cast<size_t>(c)];
        const float fb = beta_.value[static_cast<size_t>(c)];
        for (size_t s = 0; s < in.size(); ++s) {
            const float* p = in[s].plane(c);
            float* q = out[s].plane(c);
            for (size_t i = 0; i < plane; ++i) q[i] = (p[i] - fm) * fs + fb;
        }
    }
}

void BatchNorm2d::backward(const Batch& in, const Batch& /*out*/, const Batch& dout, Batch& din) {
    const size_t plane = in.empty() ? 0 : static_cast<size_t>(in[0].h) * in[0].w;
    const double n = static_cast<double>(in.size() * plane);
    for (int c = 0; c < channels; ++c) {
        const double mean = batch_mean_[c];
        const double invstd = batch_invstd_[c];
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (size_t s = 0; s < in.size(); ++s) {
            const float* x = in[s].plane(c);
            const float* dy = dout[s].plane(c);
            for (size_t i = 0; i < plane; ++i) {
                const double xhat = (x[i] - mean) * invstd;
                sum_dy += dy[i];
                sum_dy_xhat += dy[i] * xhat;
            }
        }
        gamma_.grad[static_cast<size_t>(c)] += static_cast<float>(sum_dy_xhat);
        beta_.grad[static_cast<size_t>(c)] += static_cast<float>(sum_dy);
        const double g = gamma_.value[static_cast<size_t>(c)];
        const double k = g * invstd / n;
        for (size_t s = 0; s < in.size(); ++s) {
            const float* x = in[s].plane(c);
            const float* dy = dout[s].plane(c);
            float* dx = din[s].plane(c);
            for (size_t i = 0; i < plane; ++i) {
                const double xhat = (x[i] - mean) * invstd;
                dx[i] = static_cast<float>(k * (n * dy[i] - sum_dy - xhat * sum_dy_xhat));
            }
        }
    }
}

void ReLU::shape(int ci, int hi, int wi, int& co, int& ho, int& wo) const {
    co = ci;
    ho = hi;
    wo = wi;
}

void ReLU::forward(const Batch& in, Batch& out, bool /*train*/) {
    out.resize(in.size());
    for (size_t s = 0; s < in.size(); ++s) {
        out[s] = Tensor(in[s].c, in[s].h, in[s].w);
        for (size_t i = 0; i < in[s].size(); ++i) out[s].v[i] = in[s].v[i] > 0.f ? in[s].v[i] : 0.f;
    }
}

void ReLU::backward(const Batch& /*in*/, const Batch& out, const Batch& dout, Batch& din) {
    for (size_t s = 0; s < out.size(); ++s)
        for (size_t i = 0; i < out[s].size(); ++i)
            din[s].v[i] = out[s].v[i] > 0.f ? dout[s].v[i] : 0.f;
}

void Upsample2x::shape(int ci, int hi, int wi, int& co, int& ho, int& wo) const {
    co = ci;
    ho = hi * 2;
    wo = wi * 2;
}

namespace {

// Half-pixel-center taps: output 2i = 0.25*in[i-1] + 0.75*in[i],
// output 2i+1 = 0.75*in[i] + 0.25*in[i+1], clamped at the edges.
inline void up2x_taps(int o, int n_in, int& i0, int& i1, float& w0, float& w1) {
    const int i = o / 2;
    if ((o & 1) == 0) {
        i0 = i > 0 ? i - 1 : 0;
        i1 = i;
        w0 = i > 0 ? 0.25f : 0.f;
        w1 = i > 0 ? 0.75f : 1.f;
    } else {
        i0 = i;
        i1 = i + 1 < n_in ? i + 1 : i;
        w0 = i + 1 < n_in ? 0.75f : 1.f;
        w1 = i + 1 < n_in ? 0.25f : 0.f;
    }
}

}  // namespace

void Upsample2x::forward(const Batch& in, Batch& out, bool /*train*/) {
    out.resize(in.size());
    for (size_t s = 0; s < in.size(); ++s) {
        const Tensor& x = in[s];
        Tensor& y = out[s];
        y = Tensor(x.c, x.h * 2, x.w * 2);
        for (int c = 0; c < x.c; ++c) {
            const float* sp = x.plane(c);
            float* dp = y.plane(c);
            for (int oy = 0; oy < y.h; ++oy) {
                int y0, y1;
                float wy0, wy1;
                up2x_taps(oy, x.h, y0, y1, wy0, wy1);
                const float* r0 = sp + static_cast<size_t>(y0) * x.w;
                const float* r1 = sp + static_cast<size_t>(y1) * x.w;
                float* drow = dp + static_cast<size_t>(oy) * y.w;
                for (int ox = 0; ox < y.w; ++ox) {
                    int x0, x1;
                    float wx0, wx1;
                    up2x_taps(ox, x.w, x0, x1, wx0, wx1);
                    drow[ox] = wy0 * (wx0 * r0[x0] + wx1 * r0[x1]) + wy1 * (wx0 * r1[x0] + wx1 * r1[x1]);
                }
            }
        }
    }
}

void Upsample2x::backward(const Batch& in, const Batch& /*out*/, const Batch& dout, Batch& din) {
    for (size_t s = 0; s < in.size(); ++s) {
        const Tensor& x = in[s];
        din[s].zero();
        for (int c = 0; c < x.c; ++c) {
            const float* gp = dout[s].plane(c);
            float* dp = din[s].plane(c);
            const int oh = x.h * 2, ow = x.w * 2;
            for (int oy = 0; oy < oh; ++oy) {
                int y0, y1;
                float wy0, wy1;
                up2x_taps(oy, x.h, y0, y1, wy0, wy1);
                const float* grow = gp + static_cast<size_t>(oy) * ow;
                float* d0 = dp + static_cast<size_t>(y0) * x.w;
                float* d1 = dp + static_cast<size_t>(y1) * x.w;
                for (int ox = 0; ox < ow; ++ox) {
                    int x0, x1;
                    float wx0, wx1;
                    up2x_taps(ox, x.w, x0, x1, wx0, wx1);
                    const float g = grow[ox];
                    d0[x0] += wy0 * wx0 * g;
                    d0[x1] += wy0 * wx1 * g;
                    d1[x0] += wy1 * wx0 * g;
                    d1[x1] += wy1 * wx1 * g;
                }
            }
        }
    }
}

void Sigmoid::shape(int ci, int hi, int wi, int& co, int& ho, int& wo) const {
    co = ci;
    ho = hi;
    wo = wi;
}

void Sigmoid::forward(const Batch& in, Batch& out, bool /*train*/) {
    out.resize(in.size());
    for (size_t s = 0; s < in.size(); ++s) {
        out[s] = Tensor(in[s].c, in[s].h, in[s].w);
        for (size_t i = 0; i < in[s].size(); ++i) {
            float z = in[s].v[i];
            z = z > 15.f ? 15.f : (z < -15.f ? -15.f : z);  // keep output inside (0,1)
            out[s].v[i] = 1.f / (1.f + std::exp(-z));
        }
    }
}

void Sigmoid::backward(const Batch& /*in*/, const Batch& out, const Batch& dout, Batch& din) {
    for (size_t s = 0; s < out.size(); ++s)
        for (size_t i = 0; i < out[s].size(); ++i) {
            const float p = out[s].v[i];
            din[s].v[i] = dout[s].v[i] * p * (1.f - p);
        }
}

Adam::Adam(std::vector<Param*> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    for (auto* p : params_) {
        m_.emplace_back(p->value.size(), 0.f);
        v_.emplace_back(p->value.size(), 0.f);
    }
}

void Adam::zero_grad() {
    for (auto* p : params_) p->zero_grad();
}

void Adam::step() {
    t_ += 1;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (size_t k = 0; k < params_.size(); ++k) {
        auto& val = params_[k]->value;
        auto& grad = params_[k]->grad;
        auto& m = m_[k];
        auto& v = v_[k];
        for (size_t i = 0; i < val.size(); ++i) {
            const double g = grad[i];
            m[i] = static_cast<float>(cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g);
            v[i] = static_cast<float>(cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g);
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            val[i] = static_cast<float>(val[i] - cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps));
        }
    }
}

}  // namespace usps::nn
