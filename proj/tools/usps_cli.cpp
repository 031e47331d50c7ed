// usps: unsupervised saliency via pseudo-label self-training.
// Stage-granular commands share one artifact layout so ablations and reports
// can reuse cached intermediates. Exit codes: 0 ok, 1 runtime, 2 config,
// 3 missing upstream artifact.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>

#include "usps/config.hpp"
#include "usps/dataio.hpp"
#include "usps/evalsuite.hpp"
#include "usps/png_io.hpp"
#include "usps/report.hpp"
#include "usps/util.hpp"

namespace {

using namespace usps;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;
constexpr int kExitMissing = 3;

struct Ctx {
    RunConfig cfg;
    ArtifactLayout layout;
    std::string config_echo;
    std::unique_ptr<RunLog> log;
};

Ctx make_context(const std::string& config_path, const std::string& out_override,
                 const std::string& profile_override) {
    Ctx ctx;
    std::string text = read_text_file(config_path);
    ctx.cfg = parse_run_config(text);
    ctx.config_echo = std::move(text);
    if (!profile_override.empty()) {
        if (profile_override == "desk") ctx.cfg.profile = Profile::desk;
        else if (profile_override == "full") ctx.cfg.profile = Profile::full;
        else throw ConfigError("--profile must be desk or full");
        if (ctx.cfg.profile == Profile::full && ctx.cfg.data_root.empty())
            throw ConfigError("the full profile requires [data].root (a dataset directory)");
    }
    if (const char* env = std::getenv("USPS_ARTIFACTS"); env && *env) ctx.cfg.out_dir = env;
    if (!out_override.empty()) ctx.cfg.out_dir = out_override;
    ctx.layout.out_dir = ctx.cfg.out_dir;
    ctx.log = std::make_unique<RunLog>(ctx.layout.logs_dir() / "events.jsonl");
    return ctx;
}

Dataset load_run_dataset(const Ctx& ctx) {
    const auto root = ctx.cfg.resolved_data_root();
    Dataset ds = load_dataset(root);
    if (ctx.cfg.resize_to > 0) resize_dataset(ds, ctx.cfg.resize_to);
    return ds;
}

void with_manifest(Ctx& ctx, const std::string& stage,
                   const std::function<void(RunManifest&)>& body) {
    RunManifest manifest = RunManifest::load_or_empty(ctx.layout.run_manifest());
    manifest.set_seed(ctx.cfg.seed);
    manifest.set_config_echo(ctx.config_echo);
    Timer t;
    body(manifest);
    manifest.record_timing(stage, t.seconds());
    manifest.save(ctx.layout.run_manifest());
}

// ---- stage bodies ---------------------------------------------------------

void do_generate(Ctx& ctx) {
    with_manifest(ctx, "generate", [&](RunManifest& manifest) {
        const auto root = ctx.cfg.resolved_data_root();
        if (!ctx.cfg.synthetic) {
            // user-supplied data; just validate the layout
            load_dataset(root);
            ctx.log->progress("dataset at " + root.string() + " validated (synthetic=false)");
            return;
        }
        ctx.log->event("generate_start", {{"root", root.string()}});
        Dataset ds = generate_synthetic(ctx.cfg.synth, root);
        for (const auto& s : ds.samples) {
            manifest.record_artifact(root / ("images/" + s.id + ".png"));
            manifest.record_artifact(root / ("masks/" + s.id + ".png"));
        }
        if (!ds.empty()) manifest.record_artifact(root / "manifest.json");
        ctx.log->progress("generated " + std::to_string(ds.size()) + " synthetic samples");
    });
}

void do_handcrafted(Ctx& ctx) {
    with_manifest(ctx, "handcrafted", [&](RunManifest& manifest) {
        const Dataset ds = load_run_dataset(ctx);
        const Dataset train = select_split(ds, Split::train);
        ctx.log->progress("handcrafted: " + std::to_string(ctx.cfg.methods.size()) +
                          " methods over " + std::to_string(train.size()) + " train samples");
        MethodRunResult mr = run_methods(train, ctx.cfg.methods, ctx.layout, /*persist=*/true,
                                         ctx.cfg.gamma_dataset_wide);
        for (const auto& m : ctx.cfg.methods) {
            for (const auto& [id, _] : mr.maps[m.name])
                manifest.record_artifact(ctx.layout.raw_map(m.name, id));
            for (const auto& [id, _] : mr.labels[m.name])
                manifest.record_artifact(ctx.layout.raw_label(m.name, id));
        }
        for (const auto& f : mr.failures)
            ctx.log->event("method_failure",
                           {{"method", f.method}, {"sample", f.sample_id}, {"error", f.message}});
    });
}

void do_refine(Ctx& ctx, const std::string& method_arg, int iters_override, bool no_crf) {
    const Dataset ds = load_run_dataset(ctx);
    const Dataset train = select_split(ds, Split::train);
    StagePlan plan = ctx.cfg.plan;
    if (iters_override >= 0) plan.self_sup_max_iters = iters_override;
    if (no_crf) plan.crf_enabled = false;

    std::vector<std::string> names;
    if (method_arg == "all")
        for (const auto& m : ctx.cfg.methods) names.push_back(m.name);
    else
        names.push_back(method_arg);

    for (const auto& name : names) {
        const auto raw_labels_dir = ctx.layout.raw_dir(name) / "labels";
        if (!std::filesystem::exists(raw_labels_dir))
            throw MissingArtifactError("missing handcrafted artifacts under " +
                                       ctx.layout.raw_dir(name).string() +
                                       " (run the handcrafted stage first)");
        const auto labels = load_label_dir(raw_labels_dir);
        with_manifest(ctx, "refine:" + name, [&](RunManifest& manifest) {
            refine_method(name, labels, train, plan, ctx.cfg.optim, ctx.cfg.seed, &ctx.layout,
                          &manifest, ctx.log.get());
        });
    }
}

void do_fuse(Ctx& ctx) {
    const Dataset ds = load_run_dataset(ctx);
    const Dataset train = select_split(ds, Split::train);
    std::vector<std::map<std::string, BinaryMask>> storage;
    storage.reserve(ctx.cfg.methods.size());
    std::vector<std::pair<std::string, const std::map<std::string, BinaryMask>*>> sets;
    for (const auto& m : ctx.cfg.methods) {
        const int last = last_iteration_on_disk(ctx.layout, m.name);
        if (last < 0)
            throw MissingArtifactError("missing refined labels under " +
                                       ctx.layout.mva_dir(m.name, 0).string() +
                                       " (run the refine stage first)");
        storage.push_back(load_label_dir(ctx.layout.mva_dir(m.name, last) / "labels"));
        sets.emplace_back(m.name, &storage.back());
    }
    with_manifest(ctx, "fusion", [&](RunManifest& manifest) {
        fuse_and_train(sets, train, ctx.cfg.plan, ctx.cfg.optim, ctx.cfg.seed, "fusion",
                       &ctx.layout, &manifest, ctx.log.get());
    });
}

std::unique_ptr<SaliencyNet> load_final_net(const Ctx& ctx) {
    const auto ckpt = ctx.layout.checkpoint("fusion", "final");
    if (!std::filesystem::exists(ckpt))
        throw MissingArtifactError("missing final checkpoint " + ckpt.string() +
                                   " (run the fuse stage first)");
    std::unique_ptr<SaliencyNet> net;
    std::unique_ptr<nn::Adam> adam;
    Checkpoint::load(ckpt, net, adam, ctx.cfg.optim);
    return net;
}

void save_predictions(const Ctx& ctx, const std::string& model,
                      const std::map<std::string, SaliencyMap>& preds, RunManifest* manifest) {
    for (const auto& [id, map] : preds) {
        const auto path = ctx.layout.eval_dir() / "preds" / model / (id + ".png");
        save_map(map, path);
        if (manifest) manifest->record_artifact(path);
    }
}

void merge_per_image(const Ctx& ctx, const std::string& model, const EvalDetail& detail) {
    const auto path = ctx.layout.eval_dir() / "per_image.json";
    nlohmann::json j;
    if (std::filesystem::exists(path)) j = nlohmann::json::parse(read_text_file(path));
    nlohmann::json entry = nlohmann::json::object();
    for (const auto& [id, mae] : detail.per_image_mae) entry[id] = mae;
    j[model] = entry;
    write_text_file(path, j.dump(2) + "\n");
}

/// Merge rows into eval/metrics.json, replacing rows with the same name.
void merge_metrics_rows(const Ctx& ctx, const std::vector<MetricsRow>& rows) {
    const auto path = ctx.layout.eval_dir() / "metrics.json";
    nlohmann::json j;
    if (std::filesystem::exists(path)) j = nlohmann::json::parse(read_text_file(path));
    if (!j.contains("rows")) j["rows"] = nlohmann::json::array();
    for (const auto& r : rows) {
        nlohmann::json row = {{"name", r.name},     {"dataset", r.dataset},
                              {"f_score", r.f_score}, {"mae", r.mae},
                              {"precision", r.precision}, {"recall", r.recall},
                              {"n_runs", r.n_runs}};
        bool replaced = false;
        for (auto& existing : j["rows"])
            if (existing["name"] == r.name) {
                existing = row;
                replaced = true;
            }
        if (!replaced) j["rows"].push_back(row);
    }
    write_text_file(path, j.dump(2) + "\n");
}

void merge_metrics_curves(const Ctx& ctx, const std::vector<CurveSeries>& curves) {
    const auto path = ctx.layout.eval_dir() / "metrics.json";
    nlohmann::json j;
    if (std::filesystem::exists(path)) j = nlohmann::json::parse(read_text_file(path));
    j["curves"] = nlohmann::json::array();
    for (const auto& c : curves) {
        nlohmann::json jc;
        jc["method"] = c.method;
        jc["stages"] = nlohmann::json::array();
        for (const auto& r : c.stages)
            jc["stages"].push_back({{"name", r.name},
                                    {"f_score", r.f_score},
                                    {"mae", r.mae},
                                    {"precision", r.precision},
                                    {"recall", r.recall}});
        j["curves"].push_back(jc);
    }
    write_text_file(path, j.dump(2) + "\n");
}

std::map<std::string, BinaryMask> gts_of_split(const Dataset& split, const char* what) {
    std::map<std::string, BinaryMask> gts;
    for (const auto& s : split.samples) {
        if (!s.gt)
            throw MissingArtifactError(std::string("ground-truth mask missing for sample '") + s.id +
                                       "' (required for " + what + ")");
        gts.emplace(s.id, *s.gt);
    }
    return gts;
}

void do_evaluate(Ctx& ctx) {
    const Dataset ds = load_run_dataset(ctx);
    const Dataset train = select_split(ds, Split::train);
    const Dataset test = select_split(ds, Split::test);
    auto net = load_final_net(ctx);

    with_manifest(ctx, "evaluate", [&](RunManifest& manifest) {
        const auto test_gts = gts_of_split(test, "evaluation");
        auto preds = predict_split(*net, test, ctx.cfg.plan);
        EvalDetail detail =
            evaluate_detailed(preds, test_gts, ctx.cfg.eval, "pipeline", "synthetic/test");
        save_predictions(ctx, "pipeline", preds, &manifest);
        merge_per_image(ctx, "pipeline", detail);
        merge_metrics_rows(ctx, {detail.row});

        // label-quality curves on the train split from persisted artifacts
        const auto train_gts = gts_of_split(train, "label-quality curves");
        std::vector<CurveSeries> curves;
        for (const auto& m : ctx.cfg.methods) {
            CurveSeries series;
            series.method = m.name;
            std::vector<std::pair<std::string, std::map<std::string, SaliencyMap>>> stages;
            auto add_stage = [&](const std::string& name,
                                 const std::map<std::string, BinaryMask>& labels) {
                std::map<std::string, SaliencyMap> maps;
                for (const auto& [id, mask] : labels)
                    if (train_gts.count(id)) maps.emplace(id, mask_to_saliency(mask));
                stages.emplace_back(name, std::move(maps));
            };
            add_stage("handcrafted", load_label_dir(ctx.layout.raw_dir(m.name) / "labels"));
            const int last = last_iteration_on_disk(ctx.layout, m.name);
            for (int k = 0; k <= last; ++k)
                add_stage(k == 0 ? "stage_a" : "iter" + std::to_string(k),
                          load_label_dir(ctx.layout.mva_dir(m.name, k) / "labels"));
            series.stages = label_quality_curve(stages, train_gts, ctx.cfg.eval, "synthetic/train");
            curves.push_back(std::move(series));
        }
        merge_metrics_curves(ctx, curves);
        manifest.record_artifact(ctx.layout.eval_dir() / "metrics.json");
        ctx.log->progress("pipeline: F=" + std::to_string(detail.row.f_score) +
                          "% MAE=" + std::to_string(detail.row.mae) + "%");
    });
}

PipelineState reload_pipeline_state(const Ctx& ctx, const Dataset& train) {
    PipelineState state;
    for (const auto& m : ctx.cfg.methods) {
        state.raw_labels[m.name] = load_label_dir(ctx.layout.raw_dir(m.name) / "labels");
        RefineResult rr;
        const int last = last_iteration_on_disk(ctx.layout, m.name);
        if (last < 0)
            throw MissingArtifactError("missing refined labels under " +
                                       ctx.layout.mva_dir(m.name, 0).string());
        for (int k = 0; k <= last; ++k)
            rr.snapshots.push_back(load_label_dir(ctx.layout.mva_dir(m.name, k) / "labels"));
        rr.refined = rr.snapshots.back();
        rr.training_runs = last + 1;
        state.refined[m.name] = std::move(rr);
    }
    state.final_net = load_final_net(ctx);
    (void)train;
    return state;
}

void do_ablate(Ctx& ctx, const AblationPlan& plan) {
    if (!plan.any()) throw ConfigError("ablate: no ablation flag given");
    const Dataset ds = load_run_dataset(ctx);
    const Dataset train = select_split(ds, Split::train);
    const Dataset test = select_split(ds, Split::test);
    if ((plan.oracle_gt_training || plan.oracle_label_fusion)) {
        gts_of_split(train, "--oracle");  // exit 3 when GT is absent
    }
    PipelineState state = reload_pipeline_state(ctx, train);

    with_manifest(ctx, "ablate", [&](RunManifest& manifest) {
        AblationOutcome outcome = run_ablations(plan, ds, state, ctx.cfg.plan, ctx.cfg.optim,
                                                ctx.cfg.seed, ctx.cfg.methods, ctx.cfg.eval,
                                                "synthetic/test", ctx.log.get());
        merge_metrics_rows(ctx, outcome.report.rows);
        for (const auto& [name, detail] : outcome.details) {
            merge_per_image(ctx, name, detail);
            save_predictions(ctx, name, outcome.predictions.at(name), &manifest);
        }
        manifest.record_artifact(ctx.layout.eval_dir() / "metrics.json");
        for (const auto& row : outcome.report.rows)
            ctx.log->progress(row.name + ": F=" + std::to_string(row.f_score) +
                              "% MAE=" + std::to_string(row.mae) + "%");
    });
}

void do_report(Ctx& ctx) {
    const auto metrics_path = ctx.layout.eval_dir() / "metrics.json";
    if (!std::filesystem::exists(metrics_path))
        throw MissingArtifactError("missing " + metrics_path.string() +
                                   " (run the evaluate stage first)");
    const nlohmann::json j = nlohmann::json::parse(read_text_file(metrics_path));

    MetricsReport report;
    for (const auto& r : j.value("rows", nlohmann::json::array())) {
        MetricsRow row;
        row.name = r.at("name").get<std::string>();
        row.dataset = r.at("dataset").get<std::string>();
        row.f_score = r.at("f_score").get<double>();
        row.mae = r.at("mae").get<double>();
        row.precision = r.at("precision").get<double>();
        row.recall = r.at("recall").get<double>();
        row.n_runs = r.value("n_runs", 1);
        report.rows.push_back(row);
    }
    report.footnotes.push_back(
        "Desk-scale synthetic fixture. Full-scale reference on MSRA-B for this pipeline family: "
        "F = 90.31, MAE = 3.96 (needs the benchmark datasets and a pretrained backbone; "
        "not reproducible at desk scale).");

    std::vector<CurveSeries> curves;
    for (const auto& c : j.value("curves", nlohmann::json::array())) {
        CurveSeries series;
        series.method = c.at("method").get<std::string>();
        for (const auto& s : c.at("stages")) {
            MetricsRow row;
            row.name = s.at("name").get<std::string>();
            row.f_score = s.at("f_score").get<double>();
            row.mae = s.at("mae").get<double>();
            row.precision = s.at("precision").get<double>();
            row.recall = s.at("recall").get<double>();
            series.stages.push_back(row);
        }
        curves.push_back(std::move(series));
    }

    std::optional<ScatterData> scatter;
    const auto per_image_path = ctx.layout.eval_dir() / "per_image.json";
    if (std::filesystem::exists(per_image_path)) {
        const nlohmann::json pi = nlohmann::json::parse(read_text_file(per_image_path));
        if (pi.contains("pipeline") && pi.contains("oracle_gt_training")) {
            ScatterData sd;
            sd.x_name = "pipeline";
            sd.y_name = "oracle_gt_training";
            for (const auto& [id, mae] : pi["pipeline"].items())
                if (pi["oracle_gt_training"].contains(id))
                    sd.points.emplace_back(id, mae.get<double>() * 100.0,
                                           pi["oracle_gt_training"][id].get<double>() * 100.0);
            if (!sd.points.empty()) scatter = std::move(sd);
        }
    }

    std::vector<FailureCase> failures;
    const auto preds_dir = ctx.layout.eval_dir() / "preds" / "pipeline";
    if (std::filesystem::exists(preds_dir) && std::filesystem::exists(per_image_path)) {
        const nlohmann::json pi = nlohmann::json::parse(read_text_file(per_image_path));
        if (pi.contains("pipeline")) {
            const Dataset ds = load_run_dataset(ctx);
            const Dataset test = select_split(ds, Split::test);
            for (const auto& s : test.samples) {
                if (!s.gt || !pi["pipeline"].contains(s.id)) continue;
                const auto pred_path = preds_dir / (s.id + ".png");
                if (!std::filesystem::exists(pred_path)) continue;
                FailureCase fc;
                fc.id = s.id;
                fc.mae = pi["pipeline"][s.id].get<double>();
                fc.image = s.image;
                fc.gt = *s.gt;
                fc.pred = load_map(pred_path);
                failures.push_back(std::move(fc));
            }
        }
    }

    with_manifest(ctx, "report", [&](RunManifest& manifest) {
        ReportFiles files =
            emit_report(report, curves, scatter, std::move(failures), ctx.layout.eval_dir(),
                        ctx.cfg.worst_k);
        for (const auto& f : files.written) manifest.record_artifact(f);
        ctx.log->progress("report written to " + (ctx.layout.eval_dir() / "report.md").string());
    });
}

void do_run_all(Ctx& ctx) {
    struct Stage {
        const char* name;
        std::function<void()> fn;
    };
    const std::vector<Stage> stages = {
        {"generate", [&] { do_generate(ctx); }},
        {"handcrafted", [&] { do_handcrafted(ctx); }},
        {"refine", [&] { do_refine(ctx, "all", -1, false); }},
        {"fuse", [&] { do_fuse(ctx); }},
        {"evaluate", [&] { do_evaluate(ctx); }},
        {"report", [&] { do_report(ctx); }},
    };
    for (const auto& stage : stages) {
        ctx.log->progress(std::string("=== stage: ") + stage.name);
        try {
            stage.fn();
        } catch (...) {
            write_text_file(ctx.cfg.out_dir / "FAILED",
                            std::string("failed at stage: ") + stage.name + "\n");
            std::cerr << "run-all failed at stage: " << stage.name << std::endl;
            throw;
        }
    }
    std::error_code ec;
    std::filesystem::remove(ctx.cfg.out_dir / "FAILED", ec);
}

int dispatch(const std::string& cmd, Ctx& ctx, const std::string& method_arg, int iters_override,
             bool no_crf, const AblationPlan& aplan) {
    if (cmd == "generate") do_generate(ctx);
    else if (cmd == "handcrafted") do_handcrafted(ctx);
    else if (cmd == "refine") do_refine(ctx, method_arg, iters_override, no_crf);
    else if (cmd == "fuse") do_fuse(ctx);
    else if (cmd == "evaluate") do_evaluate(ctx);
    else if (cmd == "ablate") do_ablate(ctx, aplan);
    else if (cmd == "report") do_report(ctx);
    else if (cmd == "run-all") do_run_all(ctx);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"unsupervised saliency: pseudo-label refinement and fusion pipeline"};
    app.require_subcommand(1);

    std::string config_path, out_override, profile_override;
    std::string method_arg = "all";
    int iters_override = -1;
    bool no_crf = false;
    AblationPlan aplan;
    bool oracle_both = false, ablate_all = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "TOML run configuration")->required();
        sub->add_option("--out", out_override, "override the output directory");
        sub->add_option("--profile", profile_override, "override the profile (desk|full)");
    };

    add_common(app.add_subcommand("generate", "generate or validate the dataset"));
    add_common(app.add_subcommand("handcrafted", "run the classical saliency methods"));
    auto* refine = app.add_subcommand("refine", "refine one method's pseudo-labels");
    add_common(refine);
    refine->add_option("--method", method_arg, "method name or 'all'");
    refine->add_option("--iters", iters_override, "override self-supervision iterations");
    refine->add_flag("--no-crf", no_crf, "disable the CRF in the MVA path");
    add_common(app.add_subcommand("fuse", "train the fusion network on refined labels"));
    add_common(app.add_subcommand("evaluate", "evaluate the final model and label quality"));
    auto* ablate = app.add_subcommand("ablate", "run ablation variants");
    add_common(ablate);
    ablate->add_flag("--direct-fusion", aplan.direct_fusion, "fuse the raw handcrafted labels");
    ablate->add_option("--single-method", aplan.single_methods,
                       "train on a single refined method (repeatable)");
    ablate->add_flag("--no-self-supervision", aplan.no_self_supervision,
                     "fuse the stage-A labels only");
    ablate->add_flag("--no-crf", aplan.no_crf, "full pipeline without the CRF");
    ablate->add_flag("--oracle-gt", aplan.oracle_gt_training, "train on ground truth");
    ablate->add_flag("--oracle-fusion", aplan.oracle_label_fusion,
                     "train on GT-informed pixel-wise best labels");
    ablate->add_flag("--oracle", oracle_both, "both oracle variants");
    ablate->add_flag("--all", ablate_all, "every ablation variant");
    add_common(app.add_subcommand("report", "emit report.md, plots and failure gallery"));
    add_common(app.add_subcommand("run-all", "run every stage in sequence"));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? kExitOk : kExitConfig;
    }

    const std::string cmd = app.get_subcommands().front()->get_name();
    try {
        Ctx ctx = make_context(config_path, out_override, profile_override);
        if (oracle_both) {
            aplan.oracle_gt_training = true;
            aplan.oracle_label_fusion = true;
        }
        if (ablate_all) {
            aplan.direct_fusion = true;
            aplan.no_self_supervision = true;
            aplan.oracle_gt_training = true;
            aplan.oracle_label_fusion = true;
            aplan.single_methods.clear();
            for (const auto& m : ctx.cfg.methods) aplan.single_methods.push_back(m.name);
        }
        return dispatch(cmd, ctx, method_arg, iters_override, no_crf, aplan);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << std::endl;
        return kExitConfig;
    } catch (const MissingArtifactError& e) {
        std::cerr << "missing artifact: " << e.what() << std::endl;
        return kExitMissing;
    } catch (const std::exception& e) {
        // runtime failure: drop a diagnostics bundle and point at it
        try {
            std::filesystem::path bundle = "usps_failure.json";
            if (const char* env = std::getenv("USPS_ARTIFACTS"); env && *env)
                bundle = std::filesystem::path(env) / "logs" / "failure.json";
            else if (!out_override.empty())
                bundle = std::filesystem::path(out_override) / "logs" / "failure.json";
            nlohmann::json j;
            j["command"] = cmd;
            j["error"] = e.what();
            write_text_file(bundle, j.dump(2) + "\n");
            std::cerr << "runtime error: " << e.what() << "\ndiagnostics: " << bundle.string()
                      << std::endl;
        } catch (...) {
            std::cerr << "runtime error: " << e.what() << std::endl;
        }
        return kExitRuntime;
    }
}
