#include "usps/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>

#include "usps/dataio.hpp"
#include "usps/transforms.hpp"
#include "usps/util.hpp"

namespace usps {

void RunManifest::record_artifact(const std::filesystem::path& path) {
    ArtifactEntry e;
    e.hash = hex64(hash_file(path));
    e.bytes = static_cast<uint64_t>(std::filesystem::file_size(path));
    artifacts_.insert_or_assign(path.generic_string(), std::move(e));
}

void RunManifest::record_timing(const std::string& stage, double seconds) {
    timings_.insert_or_assign(stage, seconds);
}

void RunManifest::record_note(const std::string& key, const std::string& value) {
    notes_.insert_or_assign(key, value);
}

uint64_t RunManifest::content_hash() const {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& [path, a] : artifacts_) {
        h = fnv1a64(path.data(), path.size(), h);
        h = fnv1a64(a.hash.data(), a.hash.size(), h);
    }
    return h;
}

std::string RunManifest::to_json() const {
    nlohmann::json j;
    j["seed"] = seed_;
    j["config_echo"] = config_echo_;
    j["content_hash"] = hex64(content_hash());
    j["artifacts"] = nlohmann::json::array();
    for (const auto& [path, a] : artifacts_)
        j["artifacts"].push_back({{"path", path}, {"hash", a.hash}, {"bytes", a.bytes}});
    j["timings_seconds"] = nlohmann::json::object();
    for (const auto& [k, v] : timings_) j["timings_seconds"][k] = v;
    j["notes"] = nlohmann::json::object();
    for (const auto& [k, v] : notes_) j["notes"][k] = v;
    return j.dump(2) + "\n";
}

void RunManifest::save(const std::filesystem::path& path) const {
    write_text_file(path, to_json());
}

RunManifest RunManifest::load_or_empty(const std::filesystem::path& path) {
    RunManifest m;
    if (!std::filesystem::exists(path)) return m;
    const nlohmann::json j = nlohmann::json::parse(read_text_file(path));
    m.seed_ = j.value("seed", 0ULL);
    m.config_echo_ = j.value("config_echo", "");
    if (j.contains("artifacts"))
        for (const auto& a : j["artifacts"])
            m.artifacts_.insert_or_assign(
                a.at("path").get<std::string>(),
                ArtifactEntry{a.at("hash").get<std::string>(), a.value("bytes", 0ULL)});
    if (j.contains("timings_seconds"))
        for (const auto& [k, v] : j["timings_seconds"].items()) m.timings_[k] = v.get<double>();
    if (j.contains("notes"))
        for (const auto& [k, v] : j["notes"].items()) m.notes_[k] = v.get<std::string>();
    return m;
}

double lr_for_iteration(double base_lr, int iteration, double multiplier) {
    if (iteration < 0) throw InvalidArgumentError("lr_for_iteration: iteration must be >= 0");
    return base_lr * std::pow(multiplier, static_cast<double>(iteration));
}

namespace {

std::map<std::string, BinaryMask> snapshot_with_plan(const MvaState& mva, const StagePlan& plan) {
    if (!plan.snapshot_gamma_rule) return snapshot_labels(mva, plan.snapshot_threshold);
    std::map<std::string, BinaryMask> out;
    for (const auto& [id, entry] : mva.entries) out.emplace(id, binarize_pseudo_label(entry.map));
    return out;
}

void persist_snapshot(const std::string& method, int iteration, const MvaState& mva,
                      const std::map<std::string, BinaryMask>& labels, const ArtifactLayout* layout,
                      RunManifest* manifest) {
    if (!layout) return;
    for (const auto& [id, entry] : mva.entries) {
        const auto map_path = layout->mva_map(method, iteration, id);
        save_map(entry.map, map_path);
        if (manifest) manifest->record_artifact(map_path);
    }
    for (const auto& [id, mask] : labels) {
        const auto label_path = layout->mva_label(method, iteration, id);
        save_mask(mask, label_path);
        if (manifest) manifest->record_artifact(label_path);
    }
}

SaliencyMap mask_to_map(const BinaryMask& mask) {
    SaliencyMap map(mask.width, mask.height);
    for (size_t i = 0; i < mask.size(); ++i) map.values[i] = mask.values[i] ? 1.f : 0.f;
    return map;
}

}  // namespace

RefineResult refine_method(const std::string& method_name,
                           const std::map<std::string, BinaryMask>& method_labels,
                           const Dataset& train_data, const StagePlan& plan,
                           const OptimConfig& optim, uint64_t run_seed,
                           const ArtifactLayout* layout, RunManifest* manifest, RunLog* log) {
    if (method_labels.empty())
        throw InvalidArgumentError("refine_method: empty label coverage for '" + method_name + "'");

    // train only on samples this method labeled (failures exclude a sample
    // from this method's set only)
    Dataset covered;
    covered.split = train_data.split;
    for (const auto& s : train_data.samples)
        if (method_labels.count(s.id)) covered.samples.push_back(s);
    std::map<std::string, const Image*> images;
    for (const auto& s : covered.samples) images.emplace(s.id, &s.image);
    if (covered.empty())
        throw InvalidArgumentError("refine_method: labels cover no training sample for '" +
                                   method_name + "'");

    const uint64_t method_key = fnv1a64(method_name);
    const int batch = std::min<int>(optim.batch_size, static_cast<int>(covered.size()));

    DenseCrf crf(plan.crf);
    MvaState mva;
    mva.alpha = plan.mva_alpha;

    RefineResult result;
    const std::map<std::string, BinaryMask>* targets = &method_labels;

    MvaState prev_mva;
    for (int iteration = 0; iteration <= plan.self_sup_max_iters; ++iteration) {
        if (iteration > 0) {
            prev_mva = mva;
            if (plan.mva_reset_per_iteration) mva.clear();
        }
        if (mva.empty() && plan.mva_init == MvaInit::stage_input)
            for (const auto& [id, mask] : *targets) seed_mva(mva, id, mask_to_map(mask));

        NetConfig net_cfg = plan.net;
        net_cfg.seed = mix_seed(run_seed, method_key, static_cast<uint64_t>(iteration));
        const uint64_t data_seed = mix_seed(net_cfg.seed, 0xDA7A5EEDULL);
        auto net = init_network(net_cfg);
        const double lr = lr_for_iteration(optim.base_lr, iteration, optim.lr_multiplier);
        nn::Adam adam = make_optimizer(*net, optim, lr);

        ForwardHook hook = [&](const std::string& id, const SaliencyMap& pred) {
            if (plan.crf_enabled) {
                update_mva(mva, id, crf.refine(*images.at(id), pred));
            } else {
                update_mva(mva, id, pred);
            }
        };

        if (log)
            log->progress("refine[" + method_name + "] iteration " + std::to_string(iteration) +
                          " (lr " + std::to_string(lr) + ", " + std::to_string(plan.stage_a_epochs) +
                          " epochs)");
        TrainResult tr = train_epochs(*net, adam, covered, *targets, plan.stage_a_epochs, batch,
                                      data_seed, hook);
        result.epoch_losses.push_back(tr.epoch_mean_loss);
        result.training_runs += 1;

        result.snapshots.push_back(snapshot_with_plan(mva, plan));
        persist_snapshot(method_name, iteration, mva, result.snapshots.back(), layout, manifest);
        if (layout) {
            const auto ckpt = layout->checkpoint(method_name, "iter" + std::to_string(iteration));
            Checkpoint::save(ckpt, *net, adam, data_seed, plan.stage_a_epochs);
            if (manifest) manifest->record_artifact(ckpt);
        }
        targets = &result.snapshots.back();

        if (iteration > 0) {
            const double delta = stability_delta(prev_mva, mva);
            result.stability_deltas.push_back(delta);
            if (log)
                log->event("stability_delta", {{"method", method_name},
                                               {"iteration", std::to_string(iteration)},
                                               {"delta", std::to_string(delta)}});
            if (delta < plan.stability_threshold && iteration < plan.self_sup_max_iters) {
                result.stopped_early = true;
                break;
            }
        }
    }
    result.refined = result.snapshots.back();
    return result;
}

std::unique_ptr<SaliencyNet> fuse_and_train(
    const std::vector<std::pair<std::string, const std::map<std::string, BinaryMask>*>>& refined_sets,
    const Dataset& train_data, const StagePlan& plan, const OptimConfig& optim, uint64_t run_seed,
    const std::string& stage_name, const ArtifactLayout* layout, RunManifest* manifest, RunLog* log) {
    if (refined_sets.empty()) throw InvalidArgumentError("fuse_and_train: no refined label sets");

    // common id coverage across all sets
    Dataset covered;
    covered.split = train_data.split;
    for (const auto& s : train_data.samples) {
        bool all = true;
        for (const auto& [name, set] : refined_sets)
            if (!set->count(s.id)) all = false;
        if (all) covered.samples.push_back(s);
    }
    if (covered.empty())
        throw InvalidArgumentError("fuse_and_train: no sample is covered by every refined set");

    std::map<std::string, std::vector<const BinaryMask*>> targets;
    for (const auto& s : covered.samples)
        for (const auto& [name, set] : refined_sets) targets[s.id].push_back(&set->at(s.id));

    NetConfig net_cfg = plan.net;
    net_cfg.seed = mix_seed(run_seed, fnv1a64(stage_name), 0xF05EULL);
    const uint64_t data_seed = mix_seed(net_cfg.seed, 0xDA7A5EEDULL);
    auto net = init_network(net_cfg);
    nn::Adam adam = make_optimizer(*net, optim, optim.base_lr * plan.fusion_lr_scale);

    const int batch = std::min<int>(optim.batch_size, static_cast<int>(covered.size()));
    if (log)
        log->progress("fuse_and_train[" + stage_name + "]: " + std::to_string(refined_sets.size()) +
                      " label sets, " + std::to_string(plan.fusion_epochs) + " epochs");
    train_epochs(*net, adam, covered, targets, plan.fusion_epochs, batch, data_seed);

    if (layout) {
        const auto ckpt = layout->checkpoint(stage_name, "final");
        Checkpoint::save(ckpt, *net, adam, data_seed, plan.fusion_epochs);
        if (manifest) manifest->record_artifact(ckpt);
    }
    return net;
}

SaliencyMap predict(SaliencyNet& params, const Image& image, const StagePlan& plan) {
    SaliencyMap map = params.predict_padded(image);
    if (plan.crf_at_inference) {
        DenseCrf crf(plan.crf);
        map = crf.refine(image, map);
    }
    return map;
}

SaliencyMap predict(SaliencyNet& params, const Image& image) { return params.predict_padded(image); }

PipelineState run_full_pipeline(const Dataset& dataset, const std::vector<MethodDescriptor>& methods,
                                const StagePlan& plan, const OptimConfig& optim, uint64_t seed,
                                const std::filesystem::path& out_dir, RunLog* log) {
    const Dataset train = select_split(dataset, Split::train);
    if (train.empty()) throw InvalidArgumentError("run_full_pipeline: train split is empty");

    ArtifactLayout layout{out_dir};
    PipelineState state;
    state.manifest.set_seed(seed);

    Timer total;
    {
        Timer t;
        if (log) log->progress("handcrafted: " + std::to_string(methods.size()) + " methods over " +
                               std::to_string(train.size()) + " samples");
        MethodRunResult mr = run_methods(train, methods, layout, /*persist=*/true);
        for (const auto& method : methods) {
            for (const auto& [id, _] : mr.maps[method.name])
                state.manifest.record_artifact(layout.raw_map(method.name, id));
            for (const auto& [id, _] : mr.labels[method.name])
                state.manifest.record_artifact(layout.raw_label(method.name, id));
        }
        state.raw_maps = std::move(mr.maps);
        state.raw_labels = std::move(mr.labels);
        state.method_failures = std::move(mr.failures);
        state.manifest.record_timing("handcrafted", t.seconds());
    }

    for (const auto& method : methods) {
        Timer t;
        state.refined[method.name] =
            refine_method(method.name, state.raw_labels[method.name], train, plan, optim, seed,
                          &layout, &state.manifest, log);
        state.manifest.record_timing("refine:" + method.name, t.seconds());
    }

    {
        Timer t;
        std::vector<std::pair<std::string, const std::map<std::string, BinaryMask>*>> sets;
        for (const auto& method : methods)
            sets.emplace_back(method.name, &state.refined[method.name].refined);
        state.final_net = fuse_and_train(sets, train, plan, optim, seed, "fusion", &layout,
                                         &state.manifest, log);
        state.manifest.record_timing("fusion", t.seconds());
    }

    state.manifest.record_timing("total", total.seconds());
    state.manifest.save(layout.run_manifest());
    return state;
}

std::map<std::string, BinaryMask> load_label_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::exists(dir)) throw MissingArtifactError("missing artifacts: " + dir.string());
    std::map<std::string, BinaryMask> out;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.path().extension() != ".png") continue;
        out.emplace(entry.path().stem().string(), load_mask(entry.path()));
    }
    if (out.empty()) throw MissingArtifactError("no label files under " + dir.string());
    return out;
}

std::map<std::string, SaliencyMap> load_map_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::exists(dir)) throw MissingArtifactError("missing artifacts: " + dir.string());
    std::map<std::string, SaliencyMap> out;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.path().extension() != ".png") continue;
        out.emplace(entry.path().stem().string(), load_map(entry.path()));
    }
    if (out.empty()) throw MissingArtifactError("no map files under " + dir.string());
    return out;
}

int last_iteration_on_disk(const ArtifactLayout& layout, const std::string& method) {
    int last = -1;
    for (int k = 0; k < 64; ++k) {
        if (std::filesystem::exists(layout.mva_dir(method, k) / "labels"))
            last = k;
        else
            break;
    }
    return last;
}

}  // namespace usps
