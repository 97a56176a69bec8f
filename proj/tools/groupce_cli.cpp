// groupce command line: train / eval / sweep / gen-data / diagnose-sampling.
// Links only the C API.

#include <cstdio>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "groupce.h"

namespace {

struct ConfigHandle {
    gce_config* cfg = nullptr;
    ~ConfigHandle() { gce_config_free(cfg); }
};

struct OwnedString {
    char* s = nullptr;
    ~OwnedString() { gce_string_free(s); }
};

int report_failure(const char* what, gce_status status) {
    std::fprintf(stderr, "groupce %s failed (status %d): %s\n", what, static_cast<int>(status),
                 gce_last_error());
    return 1;
}

int load_config(const std::string& path, long long seed_override, bool seed_given,
                ConfigHandle& handle) {
    gce_status status = gce_config_load(path.c_str(), &handle.cfg);
    if (status != GCE_OK) return report_failure("config", status);
    if (seed_given) {
        status = gce_config_set(handle.cfg, "train.seed", std::to_string(seed_override).c_str());
        if (status != GCE_OK) return report_failure("config", status);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"groupce - hierarchical group-wise ranking for CTR/CVR models"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "run";
    long long seed_override = 0;
    bool seed_given = false;

    auto add_common = [&](CLI::App* cmd, bool needs_config) {
        auto* opt = cmd->add_option("--config", config_path, "run config file");
        if (needs_config) opt->required();
        cmd->add_option("--seed", seed_override, "override train.seed")
            ->each([&](const std::string&) { seed_given = true; });
        cmd->add_option("--out", out_dir, "output directory");
    };

    auto* train_cmd = app.add_subcommand("train", "train a model and write run artifacts");
    add_common(train_cmd, true);

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a CSV dataset");
    std::string checkpoint_path, data_path, rows_manifest, report_path;
    long long cold_max = 20, warm_max = 50;
    bool no_cohorts = false;
    eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    eval_cmd->add_option("--data", data_path, "dataset CSV")->required();
    eval_cmd->add_option("--rows", rows_manifest, "row-index manifest restricting the rows");
    eval_cmd->add_option("--cold", cold_max, "cold cohort: train impressions <= this");
    eval_cmd->add_option("--warm", warm_max, "warm cohort: train impressions in (cold, warm]");
    eval_cmd->add_flag("--no-cohorts", no_cohorts, "skip cohort sections");
    eval_cmd->add_option("--report", report_path, "also write the JSON report to this file");

    auto* sweep_cmd = app.add_subcommand("sweep", "train across the K x L grid, emit heatmap.csv");
    add_common(sweep_cmd, true);

    auto* gen_cmd = app.add_subcommand("gen-data", "generate a synthetic dataset");
    add_common(gen_cmd, true);

    auto* diag_cmd =
        app.add_subcommand("diagnose-sampling", "gradient-variance negative sampling diagnostic");
    add_common(diag_cmd, true);
    std::string diag_checkpoint;
    diag_cmd->add_option("--checkpoint", diag_checkpoint, "checkpoint file")->required();

    CLI11_PARSE(app, argc, argv);

    if (train_cmd->parsed()) {
        ConfigHandle cfg;
        if (int rc = load_config(config_path, seed_override, seed_given, cfg)) return rc;
        OwnedString summary;
        const gce_status status = gce_train(cfg.cfg, out_dir.c_str(), &summary.s);
        if (status != GCE_OK) return report_failure("train", status);
        std::printf("%s\n", summary.s);
        return 0;
    }

    if (eval_cmd->parsed()) {
        OwnedString report;
        const gce_status status = gce_evaluate(
            checkpoint_path.c_str(), data_path.c_str(),
            rows_manifest.empty() ? nullptr : rows_manifest.c_str(),
            no_cohorts ? 0 : static_cast<int>(cold_max), static_cast<int>(warm_max), &report.s);
        if (status != GCE_OK) return report_failure("eval", status);
        std::printf("%s\n", report.s);
        if (!report_path.empty()) {
            FILE* f = std::fopen(report_path.c_str(), "wb");
            if (!f) {
                std::fprintf(stderr, "groupce eval: cannot write %s\n", report_path.c_str());
                return 1;
            }
            std::fprintf(f, "%s\n", report.s);
            std::fclose(f);
        }
        return 0;
    }

    if (sweep_cmd->parsed()) {
        ConfigHandle cfg;
        if (int rc = load_config(config_path, seed_override, seed_given, cfg)) return rc;
        OwnedString csv;
        const gce_status status = gce_sweep(cfg.cfg, out_dir.c_str(), &csv.s);
        if (status != GCE_OK) return report_failure("sweep", status);
        std::printf("%s", csv.s);
        return 0;
    }

    if (gen_cmd->parsed()) {
        ConfigHandle cfg;
        if (int rc = load_config(config_path, seed_override, seed_given, cfg)) return rc;
        const gce_status status = gce_generate_data(cfg.cfg, out_dir.c_str());
        if (status != GCE_OK) return report_failure("gen-data", status);
        std::printf("wrote data.csv, clusters.csv, config.txt under %s\n", out_dir.c_str());
        return 0;
    }

    if (diag_cmd->parsed()) {
        ConfigHandle cfg;
        if (int rc = load_config(config_path, seed_override, seed_given, cfg)) return rc;
        OwnedString report;
        const gce_status status =
            gce_diagnose_sampling(diag_checkpoint.c_str(), cfg.cfg, &report.s);
        if (status != GCE_OK) return report_failure("diagnose-sampling", status);
        std::printf("%s\n", report.s);
        return 0;
    }

    return 1;
}
