#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "groupce/data.hpp"
#include "groupce/model.hpp"
#include "groupce/optim.hpp"

namespace groupce {

struct RvqConfig {
    int64_t codebook_size = 8;  // K
    int64_t levels = 2;         // L
    double decay = 0.99;
    double expire_threshold = 1.0;
    double smoothing_eps = 1e-5;

    void validate() const;
};

enum class Objective {
    Logloss,
    LoglossPairwise,
    LoglossSoftmaxCE,
    LoglossListCE,
    GroupCE,
};

Objective objective_from_string(const std::string& s);
const char* objective_to_string(Objective o);

struct LossConfig {
    Objective objective = Objective::GroupCE;
    double lambda = 1.0;
    double listce_eps = 1e-12;
    bool disable_hierarchical = false;  // ablation switch
};

struct TrainConfig {
    int64_t batch_size = 256;
    int64_t max_steps = 1200;
    int64_t eval_every = 1000;
    int64_t early_stop_patience = 10;  // in eval intervals
    uint64_t seed = 17;
    int64_t group_dump_every = 0;  // 0 disables the per-step group-size dump

    void validate() const;
};

// Whole-run configuration; parsed from line-oriented `section.key = value`
// text. Unknown keys are errors.
struct RunConfig {
    std::string data_csv;  // empty -> synthetic dataset from gen
    GenConfig gen;
    SplitSpec split;
    TowerConfig tower;
    OptimizerConfig opt;
    RvqConfig rvq;
    LossConfig loss;
    TrainConfig train;
    std::vector<int64_t> sweep_codebook_sizes = {4, 8, 16, 32};
    std::vector<int64_t> sweep_levels = {1, 2, 3, 4};
    int64_t diag_max_negatives = 4;
    double diag_grid_step = 0.0;  // 0 -> auto

    void validate() const;
};

RunConfig parse_config_text(const std::string& text, const std::string& origin);
RunConfig parse_config_file(const std::string& path);
void apply_config_override(RunConfig& cfg, const std::string& key, const std::string& value);
std::string serialize_config(const RunConfig& cfg);

}  // namespace groupce
