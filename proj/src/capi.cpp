#include "groupce.h"

#include <cstring>
#include <string>

#include "groupce/config.hpp"
#include "groupce/error.hpp"
#include "groupce/trainer.hpp"

using namespace groupce;

struct gce_config {
    RunConfig cfg;
};

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
    char* out = new char[s.size() + 1];
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

gce_status fail(gce_status code, const std::string& message) {
    g_last_error = message;
    return code;
}

// Maps the C++ error taxonomy onto status codes at the boundary.
template <class Fn>
gce_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return GCE_OK;
    } catch (const ConfigError& e) {
        return fail(GCE_ERR_CONFIG, e.what());
    } catch (const DataError& e) {
        return fail(GCE_ERR_DATA, e.what());
    } catch (const IoError& e) {
        return fail(GCE_ERR_IO, e.what());
    } catch (const ShapeError& e) {
        return fail(GCE_ERR_SHAPE, e.what());
    } catch (const DivergenceError& e) {
        return fail(GCE_ERR_DIVERGED, e.what());
    } catch (const MetricError& e) {
        return fail(GCE_ERR_METRIC, e.what());
    } catch (const DiagnosticError& e) {
        return fail(GCE_ERR_DIAGNOSTIC, e.what());
    } catch (const std::exception& e) {
        return fail(GCE_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(GCE_ERR_INTERNAL, "unknown error");
    }
}

}  // namespace

extern "C" {

const char* gce_version(void) { return "0.1.0"; }

const char* gce_last_error(void) { return g_last_error.c_str(); }

gce_status gce_config_load(const char* path, gce_config** out_cfg) {
    if (!path || !out_cfg) return fail(GCE_ERR_ARGUMENT, "null argument");
    *out_cfg = nullptr;
    return guarded([&] { *out_cfg = new gce_config{parse_config_file(path)}; });
}

gce_status gce_config_from_text(const char* text, gce_config** out_cfg) {
    if (!text || !out_cfg) return fail(GCE_ERR_ARGUMENT, "null argument");
    *out_cfg = nullptr;
    return guarded([&] { *out_cfg = new gce_config{parse_config_text(text, "<text>")}; });
}

gce_status gce_config_set(gce_config* cfg, const char* key, const char* value) {
    if (!cfg || !key || !value) return fail(GCE_ERR_ARGUMENT, "null argument");
    return guarded([&] {
        apply_config_override(cfg->cfg, key, value);
        cfg->cfg.validate();
    });
}

void gce_config_free(gce_config* cfg) { delete cfg; }

gce_status gce_train(const gce_config* cfg, const char* out_dir, char** out_summary_json) {
    if (!cfg || !out_dir) return fail(GCE_ERR_ARGUMENT, "null argument");
    return guarded([&] {
        const TrainOutcome outcome = run_training(cfg->cfg, out_dir);
        if (out_summary_json) *out_summary_json = dup_string(outcome.summary_json);
    });
}

gce_status gce_evaluate(const char* checkpoint_path, const char* csv_path,
                        const char* rows_manifest_path, int cold_max, int warm_max,
                        char** out_report_json) {
    if (!checkpoint_path || !csv_path) return fail(GCE_ERR_ARGUMENT, "null argument");
    return guarded([&] {
        const MetricsReport report =
            evaluate_checkpoint(checkpoint_path, csv_path,
                                rows_manifest_path ? rows_manifest_path : "", cold_max, warm_max);
        if (out_report_json) *out_report_json = dup_string(report.to_json());
    });
}

gce_status gce_sweep(const gce_config* cfg, const char* out_dir, char** out_heatmap_csv) {
    if (!cfg || !out_dir) return fail(GCE_ERR_ARGUMENT, "null argument");
    return guarded([&] {
        const std::string csv = run_sweep(cfg->cfg, out_dir);
        if (out_heatmap_csv) *out_heatmap_csv = dup_string(csv);
    });
}

gce_status gce_generate_data(const gce_config* cfg, const char* out_dir) {
    if (!cfg || !out_dir) return fail(GCE_ERR_ARGUMENT, "null argument");
    return guarded([&] { run_gen_data(cfg->cfg, out_dir); });
}

gce_status gce_diagnose_sampling(const char* checkpoint_path, const gce_config* cfg,
                                 char** out_report_json) {
    if (!checkpoint_path || !cfg) return fail(GCE_ERR_ARGUMENT, "null argument");
    return guarded([&] {
        const std::string report = run_diagnose(checkpoint_path, cfg->cfg);
        if (out_report_json) *out_report_json = dup_string(report);
    });
}

void gce_string_free(char* s) { delete[] s; }

}  // extern "C"
