// strsparse: learnable-sparsity training and budget accounting tools.
//
// Subcommands: train, budget, sparse-regression, sweep, export-budget,
// import-budget, inspect-checkpoint. Every run is a pure function of
// (config, seed); run directories are timestamp+hash named so reruns never
// overwrite. Exit codes: 0 ok, 1 training diverged, 2 config/IO error.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "strsparse/checkpoint.hpp"
#include "strsparse/experiments.hpp"
#include "strsparse/runconfig.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace strs;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitTrainingFailure = 1;
constexpr int kExitConfigError = 2;

std::string timestamp_utc() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", &tm);
    return buf;
}

fs::path make_run_dir(const RunConfig& cfg, const std::string& label) {
    const fs::path root = cfg.resolved_output_dir();
    fs::create_directories(root);
    const std::string base =
        label + "-" + timestamp_utc() + "-" + cfg.content_hash().substr(0, 8);
    fs::path dir = root / base;
    for (int suffix = 2; fs::exists(dir); ++suffix)
        dir = root / (base + "-" + std::to_string(suffix));
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
}

json budget_summary_json(const BudgetReport& rep) {
    json j;
    j["total_params"] = rep.total_params;
    j["total_nonzeros"] = rep.total_nonzeros;
    j["total_flops"] = rep.total_flops;
    j["total_sparse_flops"] = rep.total_sparse_flops;
    j["overall_sparsity_pct"] = rep.overall_sparsity_pct;
    j["backbone_params"] = rep.backbone_params;
    j["backbone_flops"] = rep.backbone_flops;
    j["backbone_sparsity_pct"] = rep.backbone_sparsity_pct;
    return j;
}

std::vector<LayerSpec> resolve_arch(const std::string& arch) {
    if (arch == "resnet50") return arch_resnet50();
    if (arch == "mobilenetv1") return arch_mobilenetv1();
    if (arch.rfind("file:", 0) == 0) return load_arch_file(arch.substr(5));
    throw std::runtime_error("unknown architecture '" + arch +
                             "' (expected resnet50, mobilenetv1 or file:<spec.csv>)");
}

RunConfig load_config(const std::string& config_path, const std::vector<std::string>& sets) {
    RunConfig cfg = config_path.empty() ? RunConfig{} : RunConfig::from_file(config_path);
    for (const std::string& kv : sets) cfg.apply_override(kv);
    cfg.validate();
    return cfg;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& sets) {
    const RunConfig cfg = load_config(config_path, sets);
    const fs::path dir = make_run_dir(cfg, cfg.experiment);
    write_file(dir / "config.cfg", cfg.to_string());

    json summary;
    summary["experiment"] = cfg.experiment;
    summary["seed"] = cfg.seed;
    summary["config_hash"] = cfg.content_hash();

    if (cfg.experiment == "lowrank-rnn") {
        const LowRankRnnResult res = lowrank_rnn_run(cfg.rnn_setup(), cfg.train_config());
        write_file(dir / "report.csv", res.report.to_csv());
        std::string ranks = "epoch,rank_w,rank_u\n";
        for (std::size_t e = 0; e < res.rank_trajectory.size(); ++e)
            ranks += std::to_string(e) + "," + std::to_string(res.rank_trajectory[e].first) +
                     "," + std::to_string(res.rank_trajectory[e].second) + "\n";
        write_file(dir / "ranks.csv", ranks);
        summary["accuracy"] = res.accuracy;
        summary["baseline_accuracy"] = res.baseline_accuracy;
        summary["rank_w"] = res.rank_w;
        summary["rank_u"] = res.rank_u;
        summary["full_rank_w"] = res.full_rank_w;
        summary["full_rank_u"] = res.full_rank_u;
        write_file(dir / "summary.json", summary.dump(2) + "\n");
        std::cout << "run dir: " << dir.string() << "\n";
        std::cout << "final accuracy " << res.accuracy << " (baseline "
                  << res.baseline_accuracy << "), ranks (" << res.rank_w << "," << res.rank_u
                  << ") of (" << res.full_rank_w << "," << res.full_rank_u << ")\n";
        return kExitOk;
    }

    ClassificationResult res =
        classification_run(cfg.classification_setup(), cfg.train_config());
    write_file(dir / "report.csv", res.report.to_csv());
    write_file(dir / "budget.csv", budget_to_csv(res.budget));
    save_checkpoint(res.problem.model, (dir / "checkpoint.json").string());
    summary["final_loss"] = res.report.final_loss;
    summary["train_accuracy"] = res.report.final_accuracy;
    summary["test_accuracy"] = res.test_accuracy;
    summary["overall_sparsity_pct"] = res.budget.overall_sparsity_pct;
    summary["budget"] = budget_summary_json(res.budget);
    write_file(dir / "summary.json", summary.dump(2) + "\n");
    std::cout << "run dir: " << dir.string() << "\n";
    std::cout << "final accuracy " << res.test_accuracy << ", overall sparsity "
              << res.budget.overall_sparsity_pct << "%\n";
    return kExitOk;
}

int cmd_budget(const std::string& arch, const std::string& sparsity_csv,
               const std::string& export_path) {
    const std::vector<LayerSpec> specs = resolve_arch(arch);
    std::vector<double> pcts(specs.size(), 0.0);
    if (!sparsity_csv.empty()) pcts = import_budget(sparsity_csv, specs);
    const BudgetReport rep = report(specs, pcts);
    std::cout << rep.to_table();
    if (!export_path.empty()) {
        export_budget(rep, export_path);
        std::cout << "budget written to " << export_path << "\n";
    }
    return kExitOk;
}

int cmd_sparse_regression(std::int64_t d, std::int64_t n, std::int64_t r, int seeds, int jobs,
                          double lambda, bool auto_lambda, double target_f1,
                          const std::string& out_dir, const std::vector<std::string>& sets) {
    RunConfig cfg;
    cfg.experiment = "mlp-blobs";  // placeholder selector; only TrainConfig knobs matter here
    cfg.lambda = lambda;
    cfg.epochs = 400;
    cfg.warmup_epochs = 20;
    cfg.batch_size = 1024;  // full batch for typical n
    cfg.base_lr = 0.25;
    cfg.s_init = -8.0;
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    for (const std::string& kv : sets) cfg.apply_override(kv);

    TrainConfig base = cfg.train_config();
    if (auto_lambda) {
        const LambdaSweepResult sweep = auto_lambda_for_f1(d, n, r, target_f1, base, 8);
        base.lambda = sweep.lambda;
        std::cout << "auto lambda: " << sweep.lambda << " (best F1 "
                  << sweep.achieved_sparsity_pct << ", " << sweep.trials << " trials)\n";
    }

    auto one = [&](int i) {
        TrainConfig c = base;
        c.seed = cfg.seed + static_cast<std::uint64_t>(i);
        return sparse_regression_run(d, n, r, c);
    };
    const auto results = run_over_seeds<SparseRegressionResult>(seeds, jobs, one);

    double f1_sum = 0;
    int recovered = 0, oracle_ok = 0;
    json per_seed = json::array();
    for (const auto& res : results) {
        f1_sum += res.f1;
        recovered += res.f1 >= 0.9 ? 1 : 0;
        oracle_ok += res.oracle_ok ? 1 : 0;
        json j;
        j["seed"] = res.seed_used;
        j["f1"] = res.f1;
        j["precision"] = res.precision;
        j["recall"] = res.recall;
        j["nnz"] = res.final_nnz;
        j["oracle_ok"] = res.oracle_ok;
        per_seed.push_back(std::move(j));
    }
    json summary;
    summary["d"] = d;
    summary["n"] = n;
    summary["r"] = r;
    summary["seeds"] = seeds;
    summary["lambda"] = base.lambda;
    summary["mean_f1"] = f1_sum / static_cast<double>(seeds);
    summary["seeds_with_f1_ge_0.9"] = recovered;
    summary["oracle_ok_count"] = oracle_ok;
    summary["per_seed"] = std::move(per_seed);

    const fs::path dir = make_run_dir(cfg, "sparse-regression");
    write_file(dir / "config.cfg", cfg.to_string());
    write_file(dir / "summary.json", summary.dump(2) + "\n");
    std::cout << summary.dump(2) << "\n";
    std::cout << "run dir: " << dir.string() << "\n";
    return kExitOk;
}

int cmd_sweep(double target, double tolerance, int max_trials,
              const std::string& config_path, const std::vector<std::string>& sets) {
    const RunConfig cfg = load_config(config_path, sets);
    const LambdaSweepResult res = lambda_sweep(target, tolerance, cfg.classification_setup(),
                                               cfg.train_config(), max_trials);
    json summary;
    summary["target_sparsity_pct"] = target;
    summary["tolerance_pct"] = tolerance;
    summary["lambda"] = res.lambda;
    summary["achieved_sparsity_pct"] = res.achieved_sparsity_pct;
    summary["converged"] = res.converged;
    summary["trials"] = res.trials;
    json hist = json::array();
    for (const auto& [l, s] : res.history) hist.push_back({{"lambda", l}, {"sparsity", s}});
    summary["history"] = std::move(hist);

    const fs::path dir = make_run_dir(cfg, "sweep");
    write_file(dir / "config.cfg", cfg.to_string());
    write_file(dir / "summary.json", summary.dump(2) + "\n");
    std::cout << "chosen lambda: " << res.lambda << " (sparsity "
              << res.achieved_sparsity_pct << "%, converged: "
              << (res.converged ? "true" : "false") << ", trials " << res.trials << ")\n";
    std::cout << summary.dump(2) << "\n";
    std::cout << "run dir: " << dir.string() << "\n";
    return kExitOk;
}

int cmd_export_budget(const std::string& checkpoint, const std::string& arch,
                      const std::string& out_path) {
    std::ifstream in(checkpoint, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + checkpoint);
    json root;
    in >> root;
    if (!root.contains("layers"))
        throw std::runtime_error(checkpoint + ": not a checkpoint file");

    std::vector<LayerSpec> specs;
    std::vector<double> pcts;
    if (!arch.empty()) {
        specs = resolve_arch(arch);
        for (const LayerSpec& spec : specs) {
            if (spec.kind == LayerSpec::Kind::kAvgPool) {
                pcts.push_back(0.0);
                continue;
            }
            if (!root["layers"].contains(spec.name))
                throw std::runtime_error(checkpoint + ": missing layer '" + spec.name + "'");
            const auto& entry = root["layers"][spec.name];
            StrParam p;
            p.s = tensor_from_json(entry["s"]);
            p.fn.kind = threshold_kind_from_string(entry["fn"].get<std::string>());
            p.fn.k = entry["k"].get<double>();
            p.granularity = granularity_from_string(entry["granularity"].get<std::string>());
            pcts.push_back(100.0 * sparsity(str_forward(tensor_from_json(entry["weight"]), p)));
        }
    } else {
        // no architecture given: conv FLOPs are reported per output position
        for (const auto& [name, entry] : root["layers"].items()) {
            const Tensor w = tensor_from_json(entry["weight"]);
            StrParam p;
            p.s = tensor_from_json(entry["s"]);
            p.fn.kind = threshold_kind_from_string(entry["fn"].get<std::string>());
            p.fn.k = entry["k"].get<double>();
            p.granularity = granularity_from_string(entry["granularity"].get<std::string>());
            LayerSpec spec;
            spec.name = name;
            const std::string kind = entry.value("kind", std::string("fc"));
            if (kind == "fc" || w.rank() == 2) {
                spec.kind = LayerSpec::Kind::kFc;
                spec.in_channels = w.dim(1);
                spec.out_channels = w.dim(0);
            } else {
                spec.kind = kind == "depthwise-conv" ? LayerSpec::Kind::kDepthwiseConv
                                                     : LayerSpec::Kind::kConv;
                spec.out_channels = w.dim(0);
                spec.in_channels = w.dim(1);
                spec.kernel_h = w.dim(2);
                spec.kernel_w = w.dim(3);
            }
            specs.push_back(std::move(spec));
            pcts.push_back(100.0 * sparsity(str_forward(w, p)));
        }
    }
    export_budget(report(specs, pcts), out_path);
    std::cout << "budget written to " << out_path << "\n";
    return kExitOk;
}

int cmd_import_budget(const std::string& csv_path, const std::string& arch) {
    const std::vector<LayerSpec> specs = resolve_arch(arch);
    const std::vector<double> pcts = import_budget(csv_path, specs);
    const BudgetReport rep = report(specs, pcts);
    std::cout << rep.to_table();
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Learnable-sparsity training (soft-threshold reparameterization), "
                 "budget accounting and transfer tools"};
    app.require_subcommand(1);

    // train
    auto* train_cmd = app.add_subcommand("train", "Run a training experiment from a config");
    std::string train_config;
    std::vector<std::string> train_sets;
    train_cmd->add_option("--config", train_config, "Config file (key = value lines)")
        ->capture_default_str();
    train_cmd->add_option("--set", train_sets, "Override config keys (key=value, repeatable)");

    // budget
    auto* budget_cmd =
        app.add_subcommand("budget", "Params/FLOPs accounting for a known architecture");
    std::string budget_arch;
    std::string budget_sparsity_csv, budget_export;
    budget_cmd->add_option("arch", budget_arch, "resnet50 | mobilenetv1 | file:<spec.csv>")
        ->required();
    budget_cmd
        ->add_option("--sparsity-csv", budget_sparsity_csv,
                     "Budget CSV supplying per-layer sparsity percentages")
        ->capture_default_str();
    budget_cmd->add_option("--export", budget_export, "Write the report as a budget CSV")
        ->capture_default_str();

    // sparse-regression
    auto* sr_cmd = app.add_subcommand("sparse-regression",
                                      "Support recovery on y = Xw* with a learnable threshold");
    std::int64_t sr_d = 300, sr_n = 100, sr_r = 5;
    int sr_seeds = 10, sr_jobs = 1;
    double sr_lambda = 0.04, sr_target_f1 = 0.9;
    bool sr_auto = false;
    std::string sr_out;
    std::vector<std::string> sr_sets;
    sr_cmd->add_option("-d,--dim", sr_d, "Ambient dimension")->capture_default_str();
    sr_cmd->add_option("-n,--samples", sr_n, "Number of observations")->capture_default_str();
    sr_cmd->add_option("-r,--support", sr_r, "True support size")->capture_default_str();
    sr_cmd->add_option("--seeds", sr_seeds, "Number of independent seeds")->capture_default_str();
    sr_cmd->add_option("--jobs", sr_jobs, "Worker threads for seed fan-out")
        ->capture_default_str();
    sr_cmd->add_option("--lambda", sr_lambda, "Weight decay")->capture_default_str();
    sr_cmd->add_flag("--auto-lambda", sr_auto, "Search lambda for the target F1");
    sr_cmd->add_option("--target-f1", sr_target_f1, "Target F1 for --auto-lambda")
        ->capture_default_str();
    sr_cmd->add_option("--out", sr_out, "Output root directory")->capture_default_str();
    sr_cmd->add_option("--set", sr_sets, "Override config keys (key=value, repeatable)");

    // sweep
    auto* sweep_cmd =
        app.add_subcommand("sweep", "Bisect lambda to hit a target overall sparsity");
    double sweep_target = 90.0, sweep_tol = 1.5;
    int sweep_trials = 8;
    std::string sweep_config;
    std::vector<std::string> sweep_sets;
    sweep_cmd->add_option("--target", sweep_target, "Target overall sparsity (%)")
        ->capture_default_str();
    sweep_cmd->add_option("--tolerance", sweep_tol, "Acceptable deviation (%)")
        ->capture_default_str();
    sweep_cmd->add_option("--max-trials", sweep_trials, "Proxy-run budget")
        ->capture_default_str();
    sweep_cmd->add_option("--config", sweep_config, "Config file")->capture_default_str();
    sweep_cmd->add_option("--set", sweep_sets, "Override config keys (key=value, repeatable)");

    // export-budget
    auto* exb_cmd =
        app.add_subcommand("export-budget", "Budget CSV from a checkpoint's measured sparsity");
    std::string exb_ckpt, exb_arch, exb_out;
    exb_cmd->add_option("--checkpoint", exb_ckpt, "Checkpoint JSON")->required();
    exb_cmd->add_option("--arch", exb_arch, "Architecture for FLOPs geometry (optional)")
        ->capture_default_str();
    exb_cmd->add_option("--out", exb_out, "Output CSV path")->required();

    // import-budget
    auto* imb_cmd =
        app.add_subcommand("import-budget", "Validate a budget CSV against an architecture");
    std::string imb_csv, imb_arch;
    imb_cmd->add_option("--csv", imb_csv, "Budget CSV")->required();
    imb_cmd->add_option("--arch", imb_arch, "resnet50 | mobilenetv1 | file:<spec.csv>")
        ->required();

    // inspect-checkpoint
    auto* ins_cmd = app.add_subcommand("inspect-checkpoint", "Per-layer checkpoint summary");
    std::string ins_path;
    ins_cmd->add_option("checkpoint", ins_path, "Checkpoint JSON")->required();

    try {
        app.parse(argc, argv);
        if (*train_cmd) return cmd_train(train_config, train_sets);
        if (*budget_cmd) return cmd_budget(budget_arch, budget_sparsity_csv, budget_export);
        if (*sr_cmd)
            return cmd_sparse_regression(sr_d, sr_n, sr_r, sr_seeds, sr_jobs, sr_lambda,
                                         sr_auto, sr_target_f1, sr_out, sr_sets);
        if (*sweep_cmd)
            return cmd_sweep(sweep_target, sweep_tol, sweep_trials, sweep_config, sweep_sets);
        if (*exb_cmd) return cmd_export_budget(exb_ckpt, exb_arch, exb_out);
        if (*imb_cmd) return cmd_import_budget(imb_csv, imb_arch);
        if (*ins_cmd) {
            std::cout << checkpoint_summary(ins_path);
            return kExitOk;
        }
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfigError;
    } catch (const TrainingDiverged& e) {
        std::cerr << "training failed: " << e.what() << "\n";
        return kExitTrainingFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfigError;
    }
    return kExitConfigError;
}
