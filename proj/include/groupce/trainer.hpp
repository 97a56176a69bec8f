#pragma once

#include <cstdint>
#include <limits>
#include <string>

#include "groupce/checkpoint.hpp"
#include "groupce/config.hpp"
#include "groupce/metrics.hpp"

namespace groupce {

// Validation/test metrics of one evaluation pass. Ranking metrics are NaN
// when undefined (single-class input), serialized as null.
struct EvalSummary {
    double logloss = std::numeric_limits<double>::quiet_NaN();
    double auc = std::numeric_limits<double>::quiet_NaN();
    double gauc = std::numeric_limits<double>::quiet_NaN();
    int64_t users_excluded = 0;
    int64_t records = 0;
};

// Expiration-check accounting after warmup (first 10% of steps). A slot is a
// (level, code) pair; checks happen each step before replacement runs.
struct CodebookHealthStats {
    int64_t checks = 0;
    int64_t below_events = 0;
    int64_t max_consecutive_below = 0;
    int64_t slots_with_consecutive_below = 0;
};

struct TrainOutcome {
    std::string run_dir;
    std::string checkpoint_path;
    int64_t steps_run = 0;
    int64_t best_step = -1;
    EvalSummary best_valid;
    EvalSummary train_metrics;  // of the selected checkpoint
    EvalSummary valid_metrics;
    EvalSummary test_metrics;
    CodebookHealthStats codebook_health;
    int64_t flagged_split_users = 0;
    std::string summary_json;
};

// One full training run: dataset (loaded or synthesized), stratified split,
// seeded init, the per-step loop (forward both paths, group, loss, backward,
// optimizer step, EMA update, expiration), periodic validation with early
// stopping on GAUC, and run-directory artifacts.
TrainOutcome run_training(const RunConfig& cfg, const std::string& out_dir);

// Scores a CSV with a checkpoint. rows_manifest (optional) restricts to the
// listed row indices. cold_max > 0 turns on cohort sections using the
// checkpoint's stored training impression counts.
MetricsReport evaluate_checkpoint(const std::string& checkpoint_path, const std::string& csv_path,
                                  const std::string& rows_manifest, int64_t cold_max,
                                  int64_t warm_max);

// Full train+eval per (K, L) cell; writes <out_dir>/heatmap.csv with header
// K,L,logloss,auc,gauc and returns its text. Per-cell failures are recorded
// in sweep_errors.txt and the sweep continues.
std::string run_sweep(const RunConfig& cfg, const std::string& out_dir);

// Writes data.csv, clusters.csv and a config copy for the generator config.
void run_gen_data(const RunConfig& cfg, const std::string& out_dir);

// Gradient-variance diagnostic for one positive and its in-batch negatives;
// returns a JSON report with Tr(V) under uniform, ∝norm, ∝norm² and the
// grid-search optimum.
std::string run_diagnose(const std::string& checkpoint_path, const RunConfig& cfg);

}  // namespace groupce
