#ifndef USPS_NN_HPP
#define USPS_NN_HPP

#include <memory>
#include <string>
#include <vector>

#include "usps/rng.hpp"

namespace usps::nn {

/// CHW float tensor.
struct Tensor {
    int c = 0, h = 0, w = 0;
    std::vector<float> v;

    Tensor() = default;
    Tensor(int c, int h, int w) : c(c), h(h), w(w), v(static_cast<size_t>(c) * h * w, 0.f) {}
    size_t size() const { return v.size(); }
    float* plane(int ci) { return v.data() + static_cast<size_t>(ci) * h * w; }
    const float* plane(int ci) const { return v.data() + static_cast<size_t>(ci) * h * w; }
    void zero() { std::fill(v.begin(), v.end(), 0.f); }
};

using Batch = std::vector<Tensor>;

/// A learnable tensor with its gradient accumulator.
struct Param {
    std::string name;
    std::vector<float> value;
    std::vector<float> grad;

    void zero_grad() { std::fill(grad.begin(), grad.end(), 0.f); }
};

class Layer {
public:
    virtual ~Layer() = default;
    virtual void forward(const Batch& in, Batch& out, bool train) = 0;
    /// din must be pre-sized like `in`; layer adds nothing to params here,
    /// gradients accumulate into Param::grad.
    virtual void backward(const Batch& in, const Batch& out, const Batch& dout, Batch& din) = 0;
    virtual void shape(int ci, int hi, int wi, int& co, int& ho, int& wo) const = 0;
    virtual std::vector<Param*> params() { return {}; }
    /// Non-learnable state that belongs in checkpoints (BN running stats).
    virtual std::vector<std::vector<float>*> state() { return {}; }
    virtual const char* kind() const = 0;
};

class Conv2d : public Layer {
public:
    Conv2d(std::string name, int in_c, int out_c, int ksize, int stride, int dilation);
    void init(DetRng& rng);
    void forward(const Batch& in, Batch& out, bool train) override;
    void backward(const Batch& in, const Batch& out, const Batch& dout, Batch& din) override;
    void shape(int ci, int hi, int wi, int& co, int& ho, int& wo) const override;
    std::vector<Param*> params() override { return {&weight_, &bias_}; }
    const char* kind() const override { return "conv"; }

    int in_c, out_c, ksize, stride, dilation, pad;

private:
    void im2col(const Tensor& x, int oh, int ow, std::vector<float>& col) const;
    void col2im_add(const std::vector<float>& col, int oh, int ow, Tensor& dx) const;

    Param weight_;  // [out_c][in_c*k*k], row-major
    Param bias_;    // [out_c]
    std::vector<float> col_, dcol_;  // scratch
};

class BatchNorm2d : public Layer {
public:
    BatchNorm2d(std::string name, int channels, double momentum = 0.1, double eps = 1e-5);
    void forward(const Batch& in, Batch& out, bool train) override;
    void backward(const Batch& in, const Batch& out, const Batch& dout, Batch& din) override;
    void shape(int ci, int hi, int wi, int& co, int& ho, int& wo) const override;
    std::vector<Param*> params() override { return {&gamma_, &beta_}; }
    std::vector<std::vector<float>*> state() override { return {&running_mean_, &running_var_}; }
    const char* kind() const override { return "bn"; }

    int channels;

private:
    double momentum_, eps_;
    Param gamma_, beta_;
    std::vector<float> running_mean_, running_var_;
    std::vector<double> batch_mean_, batch_invstd_;  // cached for backward
};

class ReLU : public Layer {
public:
    void forward(const Batch& in, Batch& out, bool train) override;
    void backward(const Batch& in, const Batch& out, const Batch& dout, Batch& din) override;
    void shape(int ci, int hi, int wi, int& co, int& ho, int& wo) const override;
    const char* kind() const override { return "relu"; }
};

/// x2 bilinear upsampling, half-pixel centers.
class Upsample2x : public Layer {
public:
    void forward(const Batch& in, Batch& out, bool train) override;
    void backward(const Batch& in, const Batch& out, const Batch& dout, Batch& din) override;
    void shape(int ci, int hi, int wi, int& co, int& ho, int& wo) const override;
    const char* kind() const override { return "up2x"; }
};

/// Logistic output with logit clamping so marginals stay strictly inside
/// (0,1) in float.
class Sigmoid : public Layer {
public:
    void forward(const Batch& in, Batch& out, bool train) override;
    void backward(const Batch& in, const Batch& out, const Batch& dout, Batch& din) override;
    void shape(int ci, int hi, int wi, int& co, int& ho, int& wo) const override;
    const char* kind() const override { return "sigmoid"; }
};

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
public:
    Adam(std::vector<Param*> params, AdamConfig cfg);
    void step();
    void zero_grad();

    int64_t t() const { return t_; }
    void set_lr(double lr) { cfg_.lr = lr; }
    double lr() const { return cfg_.lr; }

    // checkpoint access
    std::vector<std::vector<float>>& moments_m() { return m_; }
    std::vector<std::vector<float>>& moments_v() { return v_; }
    void set_t(int64_t t) { t_ = t; }

private:
    std::vector<Param*> params_;
    AdamConfig cfg_;
    std::vector<std::vector<float>> m_, v_;
    int64_t t_ = 0;
};

}  // namespace usps::nn

#endif
