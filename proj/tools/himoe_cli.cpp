#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "himoe/config.hpp"
#include "himoe/dataset.hpp"
#include "himoe/experiments.hpp"
#include "himoe/format.hpp"
#include "himoe/model.hpp"
#include "himoe/train.hpp"

namespace {

using namespace himoe;

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("-c,--config", args.config_path, "flat key=value config file");
    cmd->add_option("-s,--set", args.overrides, "override: key=value (repeatable)")->take_all();
}

RunConfig load_config(const CommonArgs& args) { return RunConfig::load(args.config_path, args.overrides); }

void write_file(const std::string& path, const std::string& text) {
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path);
    out << text;
}

DatasetBundle load_bundle(const RunConfig& cfg) {
    if (cfg.dataset_path.empty()) throw ConfigError("dataset.path is required");
    return read_dataset(cfg.dataset_path);
}

std::string out_path(const RunConfig& cfg, const std::string& name) {
    return (std::filesystem::path(cfg.output_dir) / name).string();
}

int cmd_synth(const CommonArgs& args) {
    const RunConfig cfg = load_config(args);
    if (cfg.dataset_path.empty()) throw ConfigError("dataset.path is required (target directory)");
    const DatasetBundle bundle = generate(cfg.synth, cfg.seed);
    write_dataset(bundle, cfg.dataset_path);
    std::cout << "wrote dataset to " << cfg.dataset_path << " (train=" << bundle.train.rows
              << " val=" << bundle.val.rows << " test=" << bundle.test.rows
              << " rows, cells=" << bundle.total_cells() << ")\n";
    return 0;
}

int cmd_train(const CommonArgs& args) {
    const RunConfig cfg = load_config(args);
    const DatasetBundle bundle = load_bundle(cfg);

    const ModelConfig model_cfg = model_config_for(cfg, bundle.manifest);
    auto model = make_model(cfg.model, model_cfg, derive_seed(cfg.seed, "model_init"));
    TrainSettings settings = TrainSettings::from(cfg);
    settings.verbose = true;

    const TrainResult result = train_model(*model, bundle, settings);
    std::cout << "best val ccc " << format_g9(result.best_val_ccc) << " at epoch " << result.best_epoch
              << (result.early_stopped ? " (early stop)" : "") << "\n";

    const MetricsReport val = evaluate_split(*model, bundle.val, "val", settings).report;
    const MetricsReport test = evaluate_split(*model, bundle.test, "test", settings).report;
    write_file(out_path(cfg, "metrics.csv"), metrics_csv({val, test}));
    write_file(out_path(cfg, "run_manifest.json"), cfg.run_manifest_json());
    save_checkpoint(model->named_params(), out_path(cfg, "checkpoint"));
    std::cout << "wrote metrics.csv, run_manifest.json, checkpoint.{bin,idx} to " << cfg.output_dir << "\n";
    return 0;
}

int cmd_eval(const CommonArgs& args) {
    const RunConfig cfg = load_config(args);
    const DatasetBundle bundle = load_bundle(cfg);
    const ModelConfig model_cfg = model_config_for(cfg, bundle.manifest);
    auto model = make_model(cfg.model, model_cfg, derive_seed(cfg.seed, "model_init"));
    load_checkpoint(model->named_params(), out_path(cfg, "checkpoint"));
    const TrainSettings settings = TrainSettings::from(cfg);
    const MetricsReport val = evaluate_split(*model, bundle.val, "val", settings).report;
    const MetricsReport test = evaluate_split(*model, bundle.test, "test", settings).report;
    write_file(out_path(cfg, "metrics.csv"), metrics_csv({val, test}));
    std::cout << metrics_csv({val, test});
    return 0;
}

int cmd_sweep_missing(const CommonArgs& args) {
    const RunConfig cfg = load_config(args);
    const DatasetBundle bundle = load_bundle(cfg);
    const SweepMissingResult result = sweep_missing(cfg, bundle);
    write_file(out_path(cfg, "degradation_curve.csv"), result.csv);
    write_file(out_path(cfg, "run_manifest.json"), cfg.run_manifest_json());
    std::cout << result.csv;
    return 0;
}

int cmd_sweep_experts(const CommonArgs& args) {
    const RunConfig cfg = load_config(args);
    const DatasetBundle bundle = load_bundle(cfg);
    const SweepExpertsResult result = sweep_experts(cfg, bundle);
    write_file(out_path(cfg, "expert_sweep.csv"), result.csv);
    write_file(out_path(cfg, "run_manifest.json"), cfg.run_manifest_json());
    std::cout << result.csv;
    return 0;
}

int cmd_ablate(const CommonArgs& args) {
    const RunConfig cfg = load_config(args);
    const DatasetBundle bundle = load_bundle(cfg);
    const AblationResult result = run_ablations(cfg, bundle);
    write_file(out_path(cfg, "ablation.csv"), result.csv);
    write_file(out_path(cfg, "run_manifest.json"), cfg.run_manifest_json());
    std::cout << result.csv;
    return 0;
}

int cmd_report_routing(const CommonArgs& args) {
    const RunConfig cfg = load_config(args);
    const DatasetBundle bundle = load_bundle(cfg);
    const ModelConfig model_cfg = model_config_for(cfg, bundle.manifest);
    auto model = make_model("full", model_cfg, derive_seed(cfg.seed, "model_init"));
    load_checkpoint(model->named_params(), out_path(cfg, "checkpoint"));
    const std::string csv = report_routing_csv(*model, bundle.test, cfg.missing_rate, cfg.seed);
    write_file(out_path(cfg, "routing_weights.csv"), csv);
    std::cout << csv;
    return 0;
}

int cmd_gradcheck(const CommonArgs& args) {
    (void)args;
    const GradcheckReport report = gradcheck_all();
    std::cout << report.text();
    if (!report.pass(1e-4)) {
        std::cerr << "gradcheck FAILED: worst " << format_g9(report.worst) << " at " << report.worst_name
                  << "\n";
        return 1;
    }
    std::cout << "gradcheck passed (tolerance 1e-4)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hierarchical mixture-of-experts lab for continuous emotion regression"};
    app.require_subcommand(1);

    CommonArgs args;
    int rc = 0;
    const struct {
        const char* name;
        const char* help;
        int (*fn)(const CommonArgs&);
    } commands[] = {
        {"synth", "generate a synthetic dataset", cmd_synth},
        {"train", "train one model and write metrics + checkpoint", cmd_train},
        {"eval", "evaluate a checkpoint", cmd_eval},
        {"sweep-missing", "missing-rate sweep over models and seeds", cmd_sweep_missing},
        {"sweep-experts", "emotion expert count sweep", cmd_sweep_experts},
        {"ablate", "component ablations", cmd_ablate},
        {"report-routing", "routing weight report per presence pattern", cmd_report_routing},
        {"gradcheck", "finite-difference check of every op and the composite loss", cmd_gradcheck},
    };
    for (const auto& c : commands) {
        CLI::App* sub = app.add_subcommand(c.name, c.help);
        add_common(sub, args);
        sub->callback([&rc, &args, fn = c.fn] { rc = fn(args); });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return rc;
}
