#include "usps/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "usps/util.hpp"

namespace usps {

using nn::Batch;
using nn::Tensor;

void NetConfig::validate() const {
    if (base_width < 4) throw InvalidArgumentError("net: base_width must be >= 4");
    if (encoder_depth < 1) throw InvalidArgumentError("net: encoder_depth must be >= 1");
    if (dilated_blocks < 0) throw InvalidArgumentError("net: dilated_blocks must be >= 0");
    if (input_size < 8) throw InvalidArgumentError("net: input_size must be >= 8");
}

SaliencyNet::SaliencyNet(const NetConfig& config) : config_(config) {
    config_.validate();
    DetRng rng(mix_seed(config_.seed, 0x5EEDULL));

    const int bw = config_.base_width;
    auto width_at = [&](int stage) { return std::min(bw << stage, bw * 4); };

    auto conv_bn_relu = [&](const std::string& name, int in_c, int out_c, int stride, int dilation) {
        auto conv = std::make_unique<nn::Conv2d>(name, in_c, out_c, 3, stride, dilation);
        conv->init(rng);
        layers_.push_back(std::move(conv));
        layers_.push_back(std::make_unique<nn::BatchNorm2d>(name, out_c));
        layers_.push_back(std::make_unique<nn::ReLU>());
    };

    conv_bn_relu("stem", 3, bw, 1, 1);
    int cur = bw;
    for (int i = 1; i <= config_.encoder_depth; ++i) {
        const int next = width_at(i);
        conv_bn_relu("enc" + std::to_string(i), cur, next, 2, 1);
        cur = next;
    }
    for (int j = 1; j <= config_.dilated_blocks; ++j)
        conv_bn_relu("dil" + std::to_string(j), cur, cur, 1, 2);
    // decoder up to half resolution, then a 1x1 head and a final x2 upsample
    for (int i = config_.encoder_depth - 1; i >= 1; --i) {
        const int next = width_at(i - 1);
        layers_.push_back(std::make_unique<nn::Upsample2x>());
        conv_bn_relu("dec" + std::to_string(i), cur, next, 1, 1);
        cur = next;
    }
    {
        auto head = std::make_unique<nn::Conv2d>("head", cur, 1, 1, 1, 1);
        head->init(rng);
        layers_.push_back(std::move(head));
    }
    layers_.push_back(std::make_unique<nn::Upsample2x>());
    layers_.push_back(std::make_unique<nn::Sigmoid>());

    acts_.resize(layers_.size() + 1);
    grads_.resize(layers_.size() + 1);
}

std::vector<nn::Param*> SaliencyNet::parameters() {
    std::vector<nn::Param*> out;
    for (auto& l : layers_)
        for (auto* p : l->params()) out.push_back(p);
    return out;
}

std::vector<std::vector<float>*> SaliencyNet::state_tensors() {
    std::vector<std::vector<float>*> out;
    for (auto& l : layers_)
        for (auto* s : l->state()) out.push_back(s);
    return out;
}

size_t SaliencyNet::parameter_count() const {
    size_t n = 0;
    for (const auto& l : layers_)
        for (auto* p : const_cast<nn::Layer&>(*l).params()) n += p->value.size();
    return n;
}

uint64_t SaliencyNet::parameter_hash() const {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& l : layers_)
        for (auto* p : const_cast<nn::Layer&>(*l).params())
            h = fnv1a64(p->value.data(), p->value.size() * sizeof(float), h);
    return h;
}

void SaliencyNet::forward(const Batch& input, bool train) {
    acts_[0] = input;
    for (size_t i = 0; i < layers_.size(); ++i) layers_[i]->forward(acts_[i], acts_[i + 1], train);
}

void SaliencyNet::backward(const Batch& grad_output) {
    grads_[layers_.size()] = grad_output;
    for (size_t i = layers_.size(); i-- > 0;) {
        grads_[i].resize(acts_[i].size());
        for (size_t s = 0; s < acts_[i].size(); ++s)
            grads_[i][s] = Tensor(acts_[i][s].c, acts_[i][s].h, acts_[i][s].w);
        layers_[i]->backward(acts_[i], acts_[i + 1], grads_[i + 1], grads_[i]);
    }
}

namespace {

Tensor image_to_tensor(const Image& image) {
    Tensor t(3, image.height, image.width);
    std::copy(image.data.begin(), image.data.end(), t.v.begin());
    return t;
}

SaliencyMap tensor_to_map(const Tensor& t) {
    SaliencyMap map(t.w, t.h);
    map.source = MapSource::network;
    std::copy(t.v.begin(), t.v.end(), map.values.begin());
    return map;
}

}  // namespace

SaliencyMap SaliencyNet::predict(const Image& image) {
    const int m = stride_multiple();
    if (image.width % m != 0 || image.height % m != 0)
        throw InvalidArgumentError("forward: image dims must be divisible by " + std::to_string(m));
    Batch in(1);
    in[0] = image_to_tensor(image);
    forward(in, /*train=*/false);
    return tensor_to_map(output()[0]);
}

SaliencyMap SaliencyNet::predict_padded(const Image& image) {
    const int m = stride_multiple();
    const int pw = (image.width + m - 1) / m * m;
    const int ph = (image.height + m - 1) / m * m;
    if (pw == image.width && ph == image.height) return predict(image);
    Image padded(pw, ph);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < ph; ++y)
            for (int x = 0; x < pw; ++x)
                padded.at(c, y, x) = image.at(c, std::min(y, image.height - 1), std::min(x, image.width - 1));
    SaliencyMap full = predict(padded);
    SaliencyMap out(image.width, image.height);
    out.source = full.source;
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x) out.at(y, x) = full.at(y, x);
    return out;
}

std::unique_ptr<SaliencyNet> init_network(const NetConfig& config) {
    return std::make_unique<SaliencyNet>(config);
}

SaliencyMap forward(SaliencyNet& params, const Image& image) { return params.predict(image); }

nn::Adam make_optimizer(SaliencyNet& net, const OptimConfig& optim, double lr) {
    nn::AdamConfig cfg;
    cfg.lr = lr;
    cfg.beta1 = optim.first_moment_decay;
    cfg.beta2 = optim.second_moment_decay;
    return nn::Adam(net.parameters(), cfg);
}

TrainResult train_epochs(SaliencyNet& net, nn::Adam& optimizer, const Dataset& train_data,
                         const std::map<std::string, std::vector<const BinaryMask*>>& targets,
                         int epochs, int batch_size, uint64_t data_seed,
                         const ForwardHook& on_forward, const LossConfig& loss_cfg,
                         int first_epoch_index) {
    if (epochs < 0) throw InvalidArgumentError("train_epochs: epochs must be >= 0");
    if (batch_size < 1) throw InvalidArgumentError("train_epochs: batch_size must be >= 1");
    TrainResult result;
    if (epochs == 0) return result;
    const size_t n = train_data.size();
    if (n == 0) throw InvalidArgumentError("train_epochs: empty dataset");
    if (static_cast<size_t>(batch_size) > n)
        throw InvalidArgumentError("train_epochs: batch_size exceeds dataset size");
    for (const auto& s : train_data.samples) {
        auto it = targets.find(s.id);
        if (it == targets.end() || it->second.empty())
            throw InvalidArgumentError("train_epochs: no target for sample '" + s.id + "'");
        for (const auto* t : it->second)
            if (t->width != s.image.width || t->height != s.image.height)
                throw InvalidArgumentError("train_epochs: target dims mismatch for '" + s.id + "'");
    }

    std::vector<size_t> order(n);
    for (int e = 0; e < epochs; ++e) {
        const int epoch_index = first_epoch_index + e;
        for (size_t i = 0; i < n; ++i) order[i] = i;
        DetRng shuffle_rng(mix_seed(data_seed, static_cast<uint64_t>(epoch_index), 0xE60CULL));
        shuffle_rng.shuffle(order);

        double epoch_loss = 0.0;
        size_t seen = 0;
        int batch_index = 0;
        for (size_t pos = 0; pos < n; pos += static_cast<size_t>(batch_size), ++batch_index) {
            const size_t bend = std::min(n, pos + static_cast<size_t>(batch_size));
            const size_t bs = bend - pos;
            Batch input(bs);
            for (size_t b = 0; b < bs; ++b)
                input[b] = image_to_tensor(train_data.samples[order[pos + b]].image);
            net.forward(input, /*train=*/true);

            Batch grad(bs);
            double batch_loss = 0.0;
            for (size_t b = 0; b < bs; ++b) {
                const auto& sample = train_data.samples[order[pos + b]];
                const Tensor& out = net.output()[b];
                SaliencyMap pred = tensor_to_map(out);
                grad[b] = Tensor(1, out.h, out.w);
                const double loss = fusion_loss_gradient_accumulate(
                    pred, targets.at(sample.id), loss_cfg, 1.0 / static_cast<double>(bs),
                    std::span<float>(grad[b].v.data(), grad[b].v.size()));
                if (!std::isfinite(loss)) {
                    std::ostringstream msg;
                    msg << "train_epochs: non-finite loss at epoch " << epoch_index << " batch "
                        << batch_index << " sample '" << sample.id << "' (loss=" << loss << ")";
                    throw TrainingError(msg.str(), epoch_index, batch_index);
                }
                batch_loss += loss;
                if (on_forward) on_forward(sample.id, pred);
            }
            optimizer.zero_grad();
            net.backward(grad);
            optimizer.step();
            epoch_loss += batch_loss;
            seen += bs;
        }
        result.epoch_mean_loss.push_back(epoch_loss / static_cast<double>(seen));
    }
    return result;
}

TrainResult train_epochs(SaliencyNet& net, nn::Adam& optimizer, const Dataset& train_data,
                         const std::map<std::string, BinaryMask>& targets, int epochs,
                         int batch_size, uint64_t data_seed, const ForwardHook& on_forward,
                         const LossConfig& loss_cfg, int first_epoch_index) {
    std::map<std::string, std::vector<const BinaryMask*>> multi;
    for (const auto& [id, mask] : targets) multi[id].push_back(&mask);
    return train_epochs(net, optimizer, train_data, multi, epochs, batch_size, data_seed,
                        on_forward, loss_cfg, first_epoch_index);
}

// ---- checkpoints ----------------------------------------------------------

namespace {
constexpr char kMagic[] = "USPSCKPT1\n";
}

void Checkpoint::save(const std::filesystem::path& path, SaliencyNet& net, nn::Adam& optimizer,
                      uint64_t data_seed, int next_epoch) {
    nlohmann::json header;
    const auto& cfg = net.config();
    header["config"] = {{"base_width", cfg.base_width},
                        {"encoder_depth", cfg.encoder_depth},
                        {"dilated_blocks", cfg.dilated_blocks},
                        {"seed", cfg.seed},
                        {"input_size", cfg.input_size}};
    header["data_seed"] = data_seed;
    header["next_epoch"] = next_epoch;
    header["adam_step"] = optimizer.t();
    header["lr"] = optimizer.lr();

    std::vector<std::pair<std::string, const std::vector<float>*>> blobs;
    for (auto* p : net.parameters()) blobs.emplace_back("param:" + p->name, &p->value);
    int sidx = 0;
    for (auto* s : net.state_tensors()) blobs.emplace_back("state:" + std::to_string(sidx++), s);
    int midx = 0;
    for (auto& m : optimizer.moments_m()) blobs.emplace_back("adam_m:" + std::to_string(midx++), &m);
    int vidx = 0;
    for (auto& v : optimizer.moments_v()) blobs.emplace_back("adam_v:" + std::to_string(vidx++), &v);

    header["tensors"] = nlohmann::json::array();
    for (const auto& [name, vec] : blobs)
        header["tensors"].push_back({{"name", name}, {"size", vec->size()}});

    const std::string htext = header.dump();
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write checkpoint: " + path.string());
    f.write(kMagic, sizeof(kMagic) - 1);
    const uint64_t hlen = htext.size();
    f.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    f.write(htext.data(), static_cast<std::streamsize>(htext.size()));
    for (const auto& [name, vec] : blobs)
        f.write(reinterpret_cast<const char*>(vec->data()),
                static_cast<std::streamsize>(vec->size() * sizeof(float)));
    if (!f) throw IoError("checkpoint write failed: " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path, std::unique_ptr<SaliencyNet>& net,
                            std::unique_ptr<nn::Adam>& optimizer, const OptimConfig& optim) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw LoadError("cannot open checkpoint: " + path.string());
    char magic[sizeof(kMagic) - 1];
    f.read(magic, sizeof(magic));
    if (!f || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
        throw LoadError("not a checkpoint file: " + path.string());
    uint64_t hlen = 0;
    f.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string htext(hlen, '\0');
    f.read(htext.data(), static_cast<std::streamsize>(hlen));
    nlohmann::json header = nlohmann::json::parse(htext);

    Checkpoint ck;
    ck.config.base_width = header["config"]["base_width"].get<int>();
    ck.config.encoder_depth = header["config"]["encoder_depth"].get<int>();
    ck.config.dilated_blocks = header["config"]["dilated_blocks"].get<int>();
    ck.config.seed = header["config"]["seed"].get<uint64_t>();
    ck.config.input_size = header["config"]["input_size"].get<int>();
    ck.data_seed = header["data_seed"].get<uint64_t>();
    ck.next_epoch = header["next_epoch"].get<int>();
    ck.adam_step = header["adam_step"].get<int64_t>();
    ck.lr = header["lr"].get<double>();

    net = std::make_unique<SaliencyNet>(ck.config);
    optimizer = std::make_unique<nn::Adam>(make_optimizer(*net, optim, ck.lr));
    optimizer->set_t(ck.adam_step);

    std::vector<std::vector<float>*> slots;
    for (auto* p : net->parameters()) slots.push_back(&p->value);
    for (auto* s : net->state_tensors()) slots.push_back(s);
    for (auto& m : optimizer->moments_m()) slots.push_back(&m);
    for (auto& v : optimizer->moments_v()) slots.push_back(&v);

    const auto& tensors = header["tensors"];
    if (tensors.size() != slots.size())
        throw LoadError("checkpoint tensor count mismatch: " + path.string());
    for (size_t i = 0; i < slots.size(); ++i) {
        const size_t size = tensors[i]["size"].get<size_t>();
        if (size != slots[i]->size())
            throw LoadError("checkpoint tensor size mismatch at index " + std::to_string(i));
        f.read(reinterpret_cast<char*>(slots[i]->data()),
               static_cast<std::streamsize>(size * sizeof(float)));
    }
    if (!f) throw LoadError("truncated checkpoint: " + path.string());
    return ck;
}

}  // namespace usps
