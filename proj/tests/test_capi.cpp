#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "groupce.h"

namespace fs = std::filesystem;

namespace {

const char* kTinyConfig =
    "gen.users = 20\n"
    "gen.items = 10\n"
    "gen.clusters = 2\n"
    "gen.impressions_per_user = 12\n"
    "gen.seed = 3\n"
    "model.hidden_sizes = 8,8\n"
    "model.embedding_dim = 4\n"
    "rvq.codebook_size = 2\n"
    "rvq.levels = 1\n"
    "train.batch_size = 32\n"
    "train.max_steps = 6\n"
    "train.eval_every = 3\n"
    "train.seed = 5\n";

std::string scratch_dir(const std::string& name) {
    const fs::path dir = fs::path("capi_test_runs") / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir.string();
}

}  // namespace

TEST_CASE("version and last_error are always valid strings") {
    CHECK(gce_version() != nullptr);
    CHECK(gce_last_error() != nullptr);
}

TEST_CASE("config lifecycle: parse, override, reject unknown keys") {
    gce_config* cfg = nullptr;
    REQUIRE(gce_config_from_text(kTinyConfig, &cfg) == GCE_OK);
    REQUIRE(cfg != nullptr);

    CHECK(gce_config_set(cfg, "train.seed", "11") == GCE_OK);
    CHECK(gce_config_set(cfg, "definitely.not.a.key", "1") == GCE_ERR_CONFIG);
    CHECK(std::strlen(gce_last_error()) > 0);
    CHECK(gce_config_set(cfg, "train.eval_every", "0") == GCE_ERR_CONFIG);

    gce_config_free(cfg);
}

TEST_CASE("loading a missing config file reports an io error") {
    gce_config* cfg = nullptr;
    CHECK(gce_config_load("/no/such/config.txt", &cfg) == GCE_ERR_IO);
    CHECK(cfg == nullptr);
    CHECK(std::strlen(gce_last_error()) > 0);
}

TEST_CASE("null arguments are rejected") {
    CHECK(gce_config_load(nullptr, nullptr) == GCE_ERR_ARGUMENT);
    CHECK(gce_train(nullptr, "x", nullptr) == GCE_ERR_ARGUMENT);
    CHECK(gce_evaluate(nullptr, nullptr, nullptr, 0, 0, nullptr) == GCE_ERR_ARGUMENT);
}

TEST_CASE("train, evaluate and diagnose through the shared library surface") {
    gce_config* cfg = nullptr;
    REQUIRE(gce_config_from_text(kTinyConfig, &cfg) == GCE_OK);

    const std::string run_dir = scratch_dir("train");
    char* summary = nullptr;
    REQUIRE(gce_train(cfg, run_dir.c_str(), &summary) == GCE_OK);
    REQUIRE(summary != nullptr);
    const std::string summary_text(summary);
    gce_string_free(summary);
    CHECK(summary_text.find("\"best_step\"") != std::string::npos);
    CHECK(summary_text.find("\"checkpoint\"") != std::string::npos);

    const std::string checkpoint = run_dir + "/checkpoint.bin";
    const std::string data_csv = run_dir + "/data.csv";
    char* report = nullptr;
    REQUIRE(gce_evaluate(checkpoint.c_str(), data_csv.c_str(), nullptr, 20, 50, &report) ==
            GCE_OK);
    REQUIRE(report != nullptr);
    const std::string report_text(report);
    gce_string_free(report);
    CHECK(report_text.find("\"gauc\"") != std::string::npos);
    CHECK(report_text.find("\"per_cohort\"") != std::string::npos);

    // diagnosis over the generated dataset
    REQUIRE(gce_config_set(cfg, "data.csv", data_csv.c_str()) == GCE_OK);
    char* diag = nullptr;
    REQUIRE(gce_diagnose_sampling(checkpoint.c_str(), cfg, &diag) == GCE_OK);
    REQUIRE(diag != nullptr);
    const std::string diag_text(diag);
    gce_string_free(diag);
    CHECK(diag_text.find("grid_opt") != std::string::npos);

    gce_config_free(cfg);
}

TEST_CASE("gen-data and sweep through the shared library surface") {
    gce_config* cfg = nullptr;
    REQUIRE(gce_config_from_text(kTinyConfig, &cfg) == GCE_OK);
    REQUIRE(gce_config_set(cfg, "sweep.codebook_sizes", "2") == GCE_OK);
    REQUIRE(gce_config_set(cfg, "sweep.levels", "1") == GCE_OK);
    REQUIRE(gce_config_set(cfg, "train.max_steps", "3") == GCE_OK);

    const std::string gen_dir = scratch_dir("gen");
    REQUIRE(gce_generate_data(cfg, gen_dir.c_str()) == GCE_OK);
    CHECK(fs::exists(fs::path(gen_dir) / "data.csv"));
    CHECK(fs::exists(fs::path(gen_dir) / "clusters.csv"));

    const std::string sweep_dir = scratch_dir("sweep");
    char* heatmap = nullptr;
    REQUIRE(gce_sweep(cfg, sweep_dir.c_str(), &heatmap) == GCE_OK);
    REQUIRE(heatmap != nullptr);
    const std::string heatmap_text(heatmap);
    gce_string_free(heatmap);
    CHECK(heatmap_text.rfind("K,L,logloss,auc,gauc\n", 0) == 0);
    CHECK(fs::exists(fs::path(sweep_dir) / "heatmap.csv"));

    gce_config_free(cfg);
}

TEST_CASE("evaluating a missing checkpoint fails with a message") {
    char* report = nullptr;
    const gce_status status = gce_evaluate("/no/such/ck.bin", "/no/such/data.csv", nullptr, 0, 0,
                                           &report);
    CHECK(status == GCE_ERR_IO);
    CHECK(report == nullptr);
    CHECK(std::strlen(gce_last_error()) > 0);
}
