#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "groupce/checkpoint.hpp"
#include "groupce/config.hpp"
#include "groupce/error.hpp"
#include "groupce/rng.hpp"
#include "groupce/trainer.hpp"

using namespace groupce;
namespace fs = std::filesystem;

namespace {

std::string scratch_dir(const std::string& name) {
    const fs::path dir = fs::path("trainer_test_runs") / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir.string();
}

std::string file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

RunConfig tiny_config() {
    RunConfig cfg;
    cfg.gen.users = 30;
    cfg.gen.items = 16;
    cfg.gen.clusters = 3;
    cfg.gen.impressions_per_user = 20;
    cfg.gen.seed = 4;
    cfg.split.seed = 2;
    cfg.tower.hidden_sizes = {8, 8};
    cfg.tower.embedding_dim = 6;
    cfg.rvq.codebook_size = 3;
    cfg.rvq.levels = 2;
    cfg.train.batch_size = 64;
    cfg.train.max_steps = 30;
    cfg.train.eval_every = 10;
    cfg.train.seed = 21;
    return cfg;
}

}  // namespace

TEST_CASE("config text round-trips and rejects unknown keys") {
    const RunConfig cfg = tiny_config();
    const std::string text = serialize_config(cfg);
    const RunConfig parsed = parse_config_text(text, "roundtrip");
    CHECK(serialize_config(parsed) == text);

    CHECK_THROWS_AS(parse_config_text("no_such.key = 1\n", "bad"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("train.eval_every = 0\n", "bad"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("rvq.levels = 9\n", "bad"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("split.train_frac = 0.9\n", "bad"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("loss.objective = nonsense\n", "bad"), ConfigError);
    // comments and blank lines are fine
    const RunConfig commented =
        parse_config_text("# comment\n\ntrain.seed = 9\n", "ok");
    CHECK(commented.train.seed == 9);
}

TEST_CASE("checkpoints round-trip tensors, vocabularies and quantizer state") {
    Checkpoint ck;
    ck.config = tiny_config();
    ck.user_schema = {{"user_id", 3}};
    ck.item_schema = {{"item_id", 2}};
    ck.user_vocab = {{"u0", "u1", "u2"}};
    ck.item_vocab = {{"i0", "i1"}};
    Rng rng(5);
    DenseMatrix& w = ck.params.create("w", 4, 3);
    for (double& v : w.data) v = rng.uniform(-1.0, 1.0);
    ck.params.at("w").adam_m.at(0, 0) = 0.5;
    ck.params.set_step_count(17);
    ck.rvq.initialized = true;
    ck.rvq.decay = 0.97;
    Codebook cb;
    cb.level = 1;
    cb.vectors = DenseMatrix::from_rows({{1.0, 2.0}, {3.0, 4.0}});
    cb.ema_count = {1.5, 2.5};
    ck.rvq.codebooks.push_back(cb);
    ck.train_impressions = {{"u0", 4}, {"u1", 9}};

    const std::string dir = scratch_dir("checkpoint_roundtrip");
    const std::string path = dir + "/ck.bin";
    save_checkpoint(path, ck);
    const Checkpoint loaded = load_checkpoint(path);

    CHECK(serialize_config(loaded.config) == serialize_config(ck.config));
    CHECK(loaded.user_vocab == ck.user_vocab);
    CHECK(loaded.item_vocab == ck.item_vocab);
    CHECK(max_abs_diff(loaded.params.at("w").value, ck.params.at("w").value) == 0.0);
    CHECK(loaded.params.at("w").adam_m.at(0, 0) == 0.5);
    CHECK(loaded.params.step_count() == 17);
    CHECK(loaded.rvq.decay == 0.97);
    CHECK(loaded.rvq.codebooks[0].ema_count == cb.ema_count);
    CHECK(loaded.train_impressions.at("u1") == 9);

    CHECK_THROWS_AS(load_checkpoint(dir + "/missing.bin"), IoError);
}

TEST_CASE("max_steps = 0 emits an initialized checkpoint and baseline metrics") {
    RunConfig cfg = tiny_config();
    cfg.train.max_steps = 0;
    const std::string dir = scratch_dir("zero_steps");
    const TrainOutcome outcome = run_training(cfg, dir);
    CHECK(outcome.steps_run == 0);
    CHECK(outcome.best_step == 0);
    CHECK(fs::exists(outcome.checkpoint_path));
    CHECK(fs::exists(fs::path(dir) / "history.jsonl"));
    // exactly the baseline record
    const std::string history = file_bytes(dir + "/history.jsonl");
    CHECK(std::count(history.begin(), history.end(), '\n') == 1);
    const Checkpoint ck = load_checkpoint(outcome.checkpoint_path);
    CHECK(ck.params.step_count() == 0);
    CHECK_FALSE(ck.rvq.initialized);
}

TEST_CASE("equal config and seed reproduce the metrics history byte for byte") {
    const RunConfig cfg = tiny_config();
    const std::string dir_a = scratch_dir("determinism_a");
    const std::string dir_b = scratch_dir("determinism_b");
    run_training(cfg, dir_a);
    run_training(cfg, dir_b);
    CHECK(file_bytes(dir_a + "/history.jsonl") == file_bytes(dir_b + "/history.jsonl"));

    RunConfig other = cfg;
    other.train.seed = cfg.train.seed + 1;
    const std::string dir_c = scratch_dir("determinism_c");
    run_training(other, dir_c);
    CHECK(file_bytes(dir_a + "/history.jsonl") != file_bytes(dir_c + "/history.jsonl"));
}

TEST_CASE("history records decompose the total loss per the stated identity") {
    const RunConfig cfg = tiny_config();
    const std::string dir = scratch_dir("breakdown");
    run_training(cfg, dir);
    std::ifstream in(dir + "/history.jsonl");
    std::string line;
    int64_t checked = 0;
    while (std::getline(in, line)) {
        const auto j = nlohmann::json::parse(line);
        const auto& train = j["train"];
        if (train["total"].get<double>() == 0.0) continue;  // baseline record
        const double lambda = train["lambda"].get<double>();
        const double expected = train["primary_logloss"].get<double>() +
                                lambda * (train["aux_logloss"].get<double>() +
                                          train["baseline_rank"].get<double>()) +
                                train["hierarchical"].get<double>();
        CHECK(std::fabs(train["total"].get<double>() - expected) < 1e-12);
        ++checked;
    }
    CHECK(checked >= 3);
}

TEST_CASE("the selected checkpoint never has worse validation GAUC than any eval") {
    const RunConfig cfg = tiny_config();
    const std::string dir = scratch_dir("early_stop");
    const TrainOutcome outcome = run_training(cfg, dir);
    std::ifstream in(dir + "/history.jsonl");
    std::string line;
    double best_seen = -1.0;
    while (std::getline(in, line)) {
        const auto j = nlohmann::json::parse(line);
        if (j["valid"]["gauc"].is_number())
            best_seen = std::max(best_seen, j["valid"]["gauc"].get<double>());
    }
    REQUIRE(best_seen >= 0.0);
    CHECK(outcome.best_valid.gauc == doctest::Approx(best_seen).epsilon(1e-15));
}

TEST_CASE("evaluating the checkpoint on the train manifest reproduces the reported metrics") {
    const RunConfig cfg = tiny_config();
    const std::string dir = scratch_dir("eval_consistency");
    const TrainOutcome outcome = run_training(cfg, dir);
    const MetricsReport report = evaluate_checkpoint(outcome.checkpoint_path, dir + "/data.csv",
                                                     dir + "/split_train.txt", 0, 0);
    CHECK(report.logloss == doctest::Approx(outcome.train_metrics.logloss).epsilon(1e-15));
    CHECK(report.auc == doctest::Approx(outcome.train_metrics.auc).epsilon(1e-15));
    CHECK(report.gauc == doctest::Approx(outcome.train_metrics.gauc).epsilon(1e-15));
    CHECK(report.rows_with_unseen_values == 0);
}

TEST_CASE("cohort thresholds produce cold and warm sections without crashes on empty cohorts") {
    const RunConfig cfg = tiny_config();
    const std::string dir = scratch_dir("cohorts");
    const TrainOutcome outcome = run_training(cfg, dir);
    const MetricsReport report = evaluate_checkpoint(outcome.checkpoint_path, dir + "/data.csv",
                                                     dir + "/split_test.txt", 20, 50);
    REQUIRE(report.per_cohort.count("cold"));
    REQUIRE(report.per_cohort.count("warm"));
    REQUIRE(report.per_cohort.count("other"));
    // tiny users all have ~14 train impressions -> everyone is cold
    CHECK(report.per_cohort.at("cold").records > 0);
    CHECK(report.per_cohort.at("other").records == 0);
    CHECK_FALSE(report.per_cohort.at("other").logloss.has_value());  // marker, not a crash
    const std::string json = report.to_json();
    CHECK(json.find("\"cold\"") != std::string::npos);
    CHECK(json.find("\"warm\"") != std::string::npos);
}

TEST_CASE("schema mismatch between checkpoint and dataset is reported") {
    const RunConfig cfg = tiny_config();
    const std::string dir = scratch_dir("schema_mismatch");
    const TrainOutcome outcome = run_training(cfg, dir);
    const std::string other_csv = dir + "/other.csv";
    {
        std::ofstream out(other_csv);
        out << "user_id,item_id,label,u_extra\nu0,i0,1,x\nu0,i1,0,y\n";
    }
    CHECK_THROWS_AS(evaluate_checkpoint(outcome.checkpoint_path, other_csv, "", 0, 0), DataError);
}

TEST_CASE("a one-cell sweep equals the standalone run of that configuration") {
    RunConfig cfg = tiny_config();
    cfg.sweep_codebook_sizes = {3};
    cfg.sweep_levels = {2};
    const std::string sweep_dir = scratch_dir("sweep_one");
    const std::string csv = run_sweep(cfg, sweep_dir);

    const std::string solo_dir = scratch_dir("sweep_solo");
    const TrainOutcome solo = run_training(cfg, solo_dir);

    std::istringstream lines(csv);
    std::string header, row;
    std::getline(lines, header);
    CHECK(header == "K,L,logloss,auc,gauc");
    REQUIRE(std::getline(lines, row));
    std::istringstream cells(row);
    std::string cell;
    std::vector<std::string> parts;
    while (std::getline(cells, cell, ',')) parts.push_back(cell);
    REQUIRE(parts.size() == 5);
    CHECK(parts[0] == "3");
    CHECK(parts[1] == "2");
    CHECK(std::stod(parts[2]) == doctest::Approx(solo.test_metrics.logloss).epsilon(1e-12));
    CHECK(std::stod(parts[3]) == doctest::Approx(solo.test_metrics.auc).epsilon(1e-12));
    CHECK(std::stod(parts[4]) == doctest::Approx(solo.test_metrics.gauc).epsilon(1e-12));
    CHECK(fs::exists(fs::path(sweep_dir) / "heatmap.csv"));
}

TEST_CASE("gen-data is byte-identical per seed and differs across seeds") {
    RunConfig cfg = tiny_config();
    const std::string dir_a = scratch_dir("gen_a");
    const std::string dir_b = scratch_dir("gen_b");
    run_gen_data(cfg, dir_a);
    run_gen_data(cfg, dir_b);
    CHECK(file_bytes(dir_a + "/data.csv") == file_bytes(dir_b + "/data.csv"));
    CHECK(file_bytes(dir_a + "/clusters.csv") == file_bytes(dir_b + "/clusters.csv"));

    cfg.gen.seed += 1;
    const std::string dir_c = scratch_dir("gen_c");
    run_gen_data(cfg, dir_c);
    CHECK(file_bytes(dir_a + "/data.csv") != file_bytes(dir_c + "/data.csv"));
    // same schema either way
    CHECK(file_bytes(dir_a + "/data.csv").substr(0, 22) ==
          file_bytes(dir_c + "/data.csv").substr(0, 22));
}

TEST_CASE("the sampling diagnostic reports the four-distribution comparison") {
    RunConfig cfg = tiny_config();
    cfg.diag_max_negatives = 3;
    const std::string dir = scratch_dir("diagnose");
    const TrainOutcome outcome = run_training(cfg, dir);
    cfg.data_csv = dir + "/data.csv";
    const std::string report_text = run_diagnose(outcome.checkpoint_path, cfg);
    const auto report = nlohmann::json::parse(report_text);
    REQUIRE(report["comparison"].size() == 4);
    CHECK(report["comparison"][0]["distribution"] == "uniform");
    CHECK(report["comparison"][1]["distribution"] == "prop_norm");
    CHECK(report["comparison"][2]["distribution"] == "prop_norm_sq");
    CHECK(report["comparison"][3]["distribution"] == "grid_opt");
    CHECK(report["num_negatives"].get<int>() == 3);
    for (const auto& row : report["comparison"])
        CHECK(std::isfinite(row["trace_variance"].get<double>()));
}

TEST_CASE("group-size dumps appear when requested") {
    RunConfig cfg = tiny_config();
    cfg.train.max_steps = 4;
    cfg.train.group_dump_every = 2;
    const std::string dir = scratch_dir("group_dump");
    run_training(cfg, dir);
    CHECK(fs::exists(fs::path(dir) / "groups_step2.txt"));
    CHECK(fs::exists(fs::path(dir) / "groups_step4.txt"));
}

TEST_CASE("flat objectives train without quantizer state") {
    for (const char* objective : {"logloss", "logloss+pairwise", "logloss+softmaxce",
                                  "logloss+listce"}) {
        RunConfig cfg = tiny_config();
        cfg.loss.objective = objective_from_string(objective);
        cfg.train.max_steps = 6;
        const std::string dir = scratch_dir(std::string("flat_") + objective);
        const TrainOutcome outcome = run_training(cfg, dir);
        CHECK(outcome.steps_run == 6);
        const Checkpoint ck = load_checkpoint(outcome.checkpoint_path);
        CHECK_FALSE(ck.rvq.initialized);
    }
}

TEST_CASE("groupce checkpoints carry the quantizer state") {
    const RunConfig cfg = tiny_config();
    const std::string dir = scratch_dir("rvq_state");
    const TrainOutcome outcome = run_training(cfg, dir);
    const Checkpoint ck = load_checkpoint(outcome.checkpoint_path);
    REQUIRE(ck.rvq.initialized);
    CHECK(ck.rvq.levels() == 2);
    CHECK(ck.rvq.codebooks[0].num_codes() == 3);
    CHECK(ck.rvq.dim() == 6);
}
