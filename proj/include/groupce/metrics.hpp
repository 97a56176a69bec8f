#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace groupce {

struct EvalRecord {
    std::string user;
    double score = 0.0;
    int label = 0;
};

// Mann–Whitney AUC with ties counted as half wins, computed by sort-and-rank.
// Throws MetricError when only one class is present.
double auc(const std::vector<EvalRecord>& records);

// Per-user AUC aggregated with impression-count weights. Users whose records
// are single-class are excluded (and counted); throws MetricError if every
// user is excluded.
std::pair<double, int64_t> gauc(const std::vector<EvalRecord>& records);

enum class Cohort { Cold, Warm, Other };

// Users are labeled by their training-set impression count: count ≤ cold_max
// is cold, (cold_max, warm_max] is warm, the rest other. Users absent from
// the count map have zero impressions and land in cold.
std::map<std::string, Cohort> stratify_cohorts(const std::map<std::string, int64_t>& train_counts,
                                               int64_t cold_max = 20, int64_t warm_max = 50);

const char* cohort_name(Cohort c);

struct CohortMetrics {
    int64_t records = 0;
    std::optional<double> logloss;
    std::optional<double> auc;
    std::optional<double> gauc;
    int64_t users_excluded_from_gauc = 0;
};

struct MetricsReport {
    double logloss = 0.0;
    double auc = 0.0;
    double gauc = 0.0;
    int64_t users_excluded_from_gauc = 0;
    int64_t records = 0;
    int64_t rows_with_unseen_values = 0;  // eval rows whose raw values missed the vocabulary
    std::map<std::string, CohortMetrics> per_cohort;  // empty unless cohorting was requested

    std::string to_json() const;
};

// Overall metrics over scored records; scores are probabilities for the
// logloss column and any monotone score for the ranking columns.
MetricsReport compute_report(const std::vector<EvalRecord>& records);

}  // namespace groupce
