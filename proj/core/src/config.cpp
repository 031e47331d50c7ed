#include "usps/config.hpp"

#include <set>

#include "usps/toml.hpp"
#include "usps/util.hpp"

namespace usps {

namespace {

class SectionReader {
public:
    SectionReader(const toml::Table* table, std::string name)
        : table_(table), name_(std::move(name)) {}

    bool has(const std::string& key) const { return table_ && table_->count(key) > 0; }

    double number(const std::string& key, double dflt) {
        mark(key);
        return has(key) ? table_->at(key).as_float() : dflt;
    }
    int64_t integer(const std::string& key, int64_t dflt) {
        mark(key);
        return has(key) ? table_->at(key).as_int() : dflt;
    }
    bool boolean(const std::string& key, bool dflt) {
        mark(key);
        return has(key) ? table_->at(key).as_bool() : dflt;
    }
    std::string text(const std::string& key, const std::string& dflt) {
        mark(key);
        return has(key) ? table_->at(key).as_string() : dflt;
    }
    std::vector<std::string> strings(const std::string& key, std::vector<std::string> dflt) {
        mark(key);
        if (!has(key)) return dflt;
        std::vector<std::string> out;
        for (const auto& v : table_->at(key).as_array()) out.push_back(v.as_string());
        return out;
    }

    void finish() const {
        if (!table_) return;
        for (const auto& [key, value] : *table_)
            if (!seen_.count(key))
                throw ConfigError("line " + std::to_string(value.line) + ": unknown key '" + key +
                                  "' in [" + name_ + "]");
    }

private:
    void mark(const std::string& key) { seen_.insert(key); }
    const toml::Table* table_;
    std::string name_;
    std::set<std::string> seen_;
};

const toml::Table* find_table(const toml::Document& doc, const std::string& name) {
    auto it = doc.tables.find(name);
    return it == doc.tables.end() ? nullptr : &it->second;
}

}  // namespace

RunConfig parse_run_config(const std::string& toml_text) {
    const toml::Document doc = toml::parse(toml_text);

    static const std::set<std::string> known_sections = {"data", "methods", "crf", "mva",
                                                         "optim", "plan", "eval"};
    for (const auto& name : doc.table_order)
        if (!known_sections.count(name)) throw ConfigError("unknown config section [" + name + "]");

    RunConfig cfg;
    SectionReader root(&doc.root, "root");
    const std::string profile = root.text("profile", "desk");
    if (profile == "desk") cfg.profile = Profile::desk;
    else if (profile == "full") cfg.profile = Profile::full;
    else throw ConfigError("profile must be \"desk\" or \"full\", got \"" + profile + "\"");
    cfg.out_dir = root.text("out_dir", "runs/out");
    cfg.seed = static_cast<uint64_t>(root.integer("seed", 7));
    root.finish();

    const bool full = cfg.profile == Profile::full;

    SectionReader data(find_table(doc, "data"), "data");
    cfg.data_root = data.text("root", "");
    cfg.synthetic = data.boolean("synthetic", !full);
    cfg.synth.n_images = static_cast<int>(data.integer("n_images", 250));
    cfg.synth.image_size = static_cast<int>(data.integer("image_size", 64));
    cfg.synth.shapes_min = static_cast<int>(data.integer("shapes_min", 1));
    cfg.synth.shapes_max = static_cast<int>(data.integer("shapes_max", 3));
    cfg.synth.distractor_probability = data.number("distractor_probability", 0.3);
    cfg.synth.texture_noise_scale = data.number("texture_noise_scale", 0.5);
    cfg.synth.train_fraction = data.number("train_fraction", 0.8);
    cfg.synth.seed = cfg.seed;
    cfg.resize_to = static_cast<int>(data.integer("resize_to", full ? 432 : 0));
    data.finish();
    if (full && cfg.data_root.empty())
        throw ConfigError("the full profile requires [data].root (a dataset directory)");

    SectionReader methods(find_table(doc, "methods"), "methods");
    {
        const auto names = methods.strings("names", {"rbd", "mc", "dsr_like", "contrast_center"});
        if (names.empty()) throw ConfigError("[methods].names must not be empty");
        const double k = methods.number("superpixel_k", 0);
        const double compactness = methods.number("compactness", 10.0);
        cfg.methods.clear();
        for (const auto& n : names) {
            MethodDescriptor d{n, {}};
            if (k > 0) d.params["superpixel_k"] = k;
            if (compactness != 10.0) d.params["compactness"] = compactness;
            cfg.methods.push_back(std::move(d));
        }
        cfg.gamma_dataset_wide = methods.boolean("gamma_dataset_wide", false);
    }
    methods.finish();

    SectionReader crf(find_table(doc, "crf"), "crf");
    cfg.plan.crf_enabled = crf.boolean("enabled", true);
    cfg.plan.crf.iterations = static_cast<int>(crf.integer("iterations", 5));
    cfg.plan.crf.w_bilateral = crf.number("w_bilateral", 4.0);
    cfg.plan.crf.w_gaussian = crf.number("w_gaussian", 3.0);
    cfg.plan.crf.theta_alpha = crf.number("theta_alpha", 30.0);
    cfg.plan.crf.theta_beta = crf.number("theta_beta", 0.1);
    cfg.plan.crf.theta_gamma = crf.number("theta_gamma", 3.0);
    cfg.plan.crf.unary_clamp = crf.number("unary_clamp", 1e-6);
    cfg.plan.crf.mode = crf_mode_from_name(crf.text("mode", full ? "subsampled" : "windowed"));
    cfg.plan.crf.window_sigma_mult = crf.number("window_sigma_mult", 4.0);
    cfg.plan.crf.subsample_stride = static_cast<int>(crf.integer("subsample_stride", 2));
    cfg.plan.crf.reference_size = crf.number("reference_size", 432.0);
    cfg.plan.crf_at_inference = crf.boolean("apply_at_inference", false);
    crf.finish();
    cfg.plan.crf.validate();

    SectionReader mva(find_table(doc, "mva"), "mva");
    cfg.plan.mva_alpha = mva.number("alpha", 0.7);
    if (cfg.plan.mva_alpha < 0.0 || cfg.plan.mva_alpha >= 1.0)
        throw ConfigError("[mva].alpha must be in [0,1)");
    {
        const std::string init = mva.text("init", "first_crf");
        if (init == "first_crf") cfg.plan.mva_init = MvaInit::first_crf;
        else if (init == "stage_input") cfg.plan.mva_init = MvaInit::stage_input;
        else throw ConfigError("[mva].init must be \"first_crf\" or \"stage_input\"");
    }
    cfg.plan.mva_reset_per_iteration = mva.boolean("reset_per_iteration", true);
    cfg.plan.snapshot_threshold = static_cast<float>(mva.number("snapshot_threshold", 0.5));
    cfg.plan.snapshot_gamma_rule = mva.boolean("snapshot_gamma_rule", false);
    mva.finish();

    SectionReader optim(find_table(doc, "optim"), "optim");
    cfg.optim.first_moment_decay = optim.number("first_moment_decay", 0.9);
    cfg.optim.second_moment_decay = optim.number("second_moment_decay", 0.999);
    cfg.optim.base_lr = optim.number("base_lr", full ? 1e-6 : 1e-4);
    cfg.optim.batch_size = static_cast<int>(optim.integer("batch_size", 20));
    cfg.optim.lr_multiplier = optim.number("lr_multiplier", 2.0);
    optim.finish();
    if (cfg.optim.base_lr <= 0) throw ConfigError("[optim].base_lr must be positive");
    if (cfg.optim.first_moment_decay < 0 || cfg.optim.first_moment_decay >= 1 ||
        cfg.optim.second_moment_decay < 0 || cfg.optim.second_moment_decay >= 1)
        throw ConfigError("[optim] moment decays must lie in [0,1)");
    if (cfg.optim.batch_size < 1) throw ConfigError("[optim].batch_size must be >= 1");

    SectionReader plan(find_table(doc, "plan"), "plan");
    cfg.plan.stage_a_epochs = static_cast<int>(plan.integer("stage_a_epochs", 25));
    cfg.plan.self_sup_max_iters = static_cast<int>(plan.integer("self_sup_max_iters", 2));
    cfg.plan.stability_threshold = plan.number("stability_threshold", 0.01);
    cfg.plan.fusion_epochs = static_cast<int>(plan.integer("fusion_epochs", 200));
    cfg.plan.fusion_lr_scale = plan.number("fusion_lr_scale", 1.0);
    cfg.plan.net.base_width = static_cast<int>(plan.integer("net_base_width", 16));
    cfg.plan.net.encoder_depth = static_cast<int>(plan.integer("net_encoder_depth", 3));
    cfg.plan.net.dilated_blocks = static_cast<int>(plan.integer("net_dilated_blocks", 2));
    cfg.plan.net.input_size = cfg.synthetic ? cfg.synth.image_size
                                            : (cfg.resize_to > 0 ? cfg.resize_to : 64);
    plan.finish();
    if (cfg.plan.stage_a_epochs < 0 || cfg.plan.fusion_epochs < 0)
        throw ConfigError("[plan] epochs must be >= 0");
    if (cfg.plan.self_sup_max_iters < 0)
        throw ConfigError("[plan].self_sup_max_iters must be >= 0");
    cfg.plan.net.validate();

    SectionReader eval(find_table(doc, "eval"), "eval");
    cfg.eval.beta_sq = eval.number("beta_sq", 0.3);
    cfg.eval.epsilon = eval.number("epsilon", 1e-7);
    cfg.eval.pooled = eval.boolean("pooled_f", false);
    cfg.worst_k = static_cast<int>(eval.integer("worst_k", 8));
    eval.finish();

    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
    return parse_run_config(read_text_file(path));
}

std::string default_config_toml() {
    return R"(# Desk-scale run configuration.
profile = "desk"
out_dir = "runs/desk"
seed = 7

[data]
synthetic = true
n_images = 250
image_size = 64
shapes_min = 1
shapes_max = 3
distractor_probability = 0.3
texture_noise_scale = 0.5
train_fraction = 0.8

[methods]
names = ["rbd", "mc", "dsr_like", "contrast_center"]

[crf]
enabled = true
iterations = 5
w_bilateral = 4.0
w_gaussian = 3.0
theta_alpha = 30.0
theta_beta = 0.1
theta_gamma = 3.0
mode = "windowed"

[mva]
alpha = 0.7

[optim]
base_lr = 1e-4
batch_size = 20

[plan]
stage_a_epochs = 25
self_sup_max_iters = 2
fusion_epochs = 200

[eval]
beta_sq = 0.3
worst_k = 8
)";
}

}  // namespace usps
