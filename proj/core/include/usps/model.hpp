#ifndef USPS_MODEL_HPP
#define USPS_MODEL_HPP

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "usps/nn.hpp"
#include "usps/objective.hpp"
#include "usps/types.hpp"

namespace usps {

/// Seeded fully-convolutional stand-in for a pretrained backbone:
/// stem -> strided encoder stages -> dilated blocks -> upsampling decoder
/// -> 1x1 head at half resolution -> x2 upsample -> logistic.
struct NetConfig {
    int base_width = 16;
    int encoder_depth = 3;
    int dilated_blocks = 2;  // dilation 2
    uint64_t seed = 0;
    int input_size = 64;

    void validate() const;
};

/// Adaptive-moment optimizer settings plus the training batch geometry.
struct OptimConfig {
    double first_moment_decay = 0.9;
    double second_moment_decay = 0.999;
    double base_lr = 1e-4;  // desk profile; the full profile uses 1e-6
    int batch_size = 20;
    double lr_multiplier = 2.0;  // applied once per self-supervision iteration
};

/// Network parameters bound to their config (theta). Owns the layer stack.
class SaliencyNet {
public:
    explicit SaliencyNet(const NetConfig& config);

    const NetConfig& config() const { return config_; }

    /// Inference on one image (eval mode, running BN statistics).
    SaliencyMap predict(const Image& image);

    /// Inference with edge-replication padding to the stride multiple.
    SaliencyMap predict_padded(const Image& image);

    size_t parameter_count() const;
    std::vector<nn::Param*> parameters();
    std::vector<std::vector<float>*> state_tensors();

    /// Checksum over parameter bytes (regression/determinism checks).
    uint64_t parameter_hash() const;

    // training internals (used by train_epochs)
    void forward(const nn::Batch& input, bool train);
    const nn::Batch& output() const { return acts_.back(); }
    void backward(const nn::Batch& grad_output);
    int stride_multiple() const { return 1 << config_.encoder_depth; }

private:
    NetConfig config_;
    std::vector<std::unique_ptr<nn::Layer>> layers_;
    std::vector<nn::Batch> acts_;  // acts_[0] = input, acts_[i+1] = layer i output
    std::vector<nn::Batch> grads_;
};

using NetParams = SaliencyNet;

/// Deterministic seeded initialization (scaled-uniform fan-in).
std::unique_ptr<SaliencyNet> init_network(const NetConfig& config);

/// Inference entry point matching the pipeline contract.
SaliencyMap forward(SaliencyNet& params, const Image& image);

using ForwardHook = std::function<void(const std::string& id, const SaliencyMap& pred)>;

struct TrainResult {
    std::vector<double> epoch_mean_loss;
};

/// Trains on the given per-sample targets (one or more masks per sample; the
/// loss is the mean per-target F-beta complement). Reshuffles each epoch from
/// (data_seed, epoch); invokes on_forward once per sample per epoch with the
/// training-pass prediction. Aborts with TrainingError on non-finite loss.
TrainResult train_epochs(SaliencyNet& net, nn::Adam& optimizer, const Dataset& train_data,
                         const std::map<std::string, std::vector<const BinaryMask*>>& targets,
                         int epochs, int batch_size, uint64_t data_seed,
                         const ForwardHook& on_forward = {}, const LossConfig& loss_cfg = {},
                         int first_epoch_index = 0);

/// Single-target convenience overload.
TrainResult train_epochs(SaliencyNet& net, nn::Adam& optimizer, const Dataset& train_data,
                         const std::map<std::string, BinaryMask>& targets, int epochs,
                         int batch_size, uint64_t data_seed, const ForwardHook& on_forward = {},
                         const LossConfig& loss_cfg = {}, int first_epoch_index = 0);

nn::Adam make_optimizer(SaliencyNet& net, const OptimConfig& optim, double lr);

/// Self-describing checkpoint: config, seeds, epoch, parameters, BN running
/// stats and optimizer moments. Restoring reproduces training bit-for-bit.
struct Checkpoint {
    NetConfig config;
    uint64_t data_seed = 0;
    int next_epoch = 0;
    int64_t adam_step = 0;
    double lr = 0.0;

    static void save(const std::filesystem::path& path, SaliencyNet& net, nn::Adam& optimizer,
                     uint64_t data_seed, int next_epoch);
    /// Rebuilds the network and optimizer from the file.
    static Checkpoint load(const std::filesystem::path& path, std::unique_ptr<SaliencyNet>& net,
                           std::unique_ptr<nn::Adam>& optimizer, const OptimConfig& optim);
};

}  // namespace usps

#endif
