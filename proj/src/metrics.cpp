#include "groupce/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "groupce/error.hpp"
#include "groupce/losses.hpp"

namespace groupce {

double auc(const std::vector<EvalRecord>& records) {
    int64_t positives = 0;
    int64_t negatives = 0;
    for (const auto& r : records) {
        if (!std::isfinite(r.score)) throw MetricError("auc: non-finite score");
        r.label ? ++positives : ++negatives;
    }
    if (positives == 0 || negatives == 0)
        throw MetricError("auc undefined: input contains a single class");

    std::vector<int64_t> order(records.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int64_t>(i);
    std::sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
        return records[static_cast<size_t>(a)].score < records[static_cast<size_t>(b)].score;
    });

    // average ranks over tie runs, 1-based
    double pos_rank_sum = 0.0;
    size_t i = 0;
    while (i < order.size()) {
        size_t j = i;
        while (j + 1 < order.size() &&
               records[static_cast<size_t>(order[j + 1])].score ==
                   records[static_cast<size_t>(order[i])].score)
            ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j + 1);
        for (size_t k = i; k <= j; ++k)
            if (records[static_cast<size_t>(order[k])].label) pos_rank_sum += avg_rank;
        i = j + 1;
    }
    const double p = static_cast<double>(positives);
    const double n = static_cast<double>(negatives);
    return (pos_rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

std::pair<double, int64_t> gauc(const std::vector<EvalRecord>& records) {
    if (records.empty()) throw MetricError("gauc: empty input");
    std::map<std::string, std::vector<EvalRecord>> by_user;
    for (const auto& r : records) by_user[r.user].push_back(r);

    double weighted = 0.0;
    double weight_total = 0.0;
    int64_t excluded = 0;
    for (const auto& [user, recs] : by_user) {
        bool has_pos = false;
        bool has_neg = false;
        for (const auto& r : recs) (r.label ? has_pos : has_neg) = true;
        if (!has_pos || !has_neg) {
            ++excluded;
            continue;
        }
        const double w = static_cast<double>(recs.size());
        weighted += w * auc(recs);
        weight_total += w;
    }
    if (weight_total <= 0.0)
        throw MetricError("gauc undefined: every user was single-class");
    return {weighted / weight_total, excluded};
}

std::map<std::string, Cohort> stratify_cohorts(const std::map<std::string, int64_t>& train_counts,
                                               int64_t cold_max, int64_t warm_max) {
    std::map<std::string, Cohort> out;
    for (const auto& [user, count] : train_counts) {
        if (count < 0) throw DataError("stratify_cohorts: negative impression count");
        if (count <= cold_max)
            out[user] = Cohort::Cold;
        else if (count <= warm_max)
            out[user] = Cohort::Warm;
        else
            out[user] = Cohort::Other;
    }
    return out;
}

const char* cohort_name(Cohort c) {
    switch (c) {
        case Cohort::Cold: return "cold";
        case Cohort::Warm: return "warm";
        default: return "other";
    }
}

MetricsReport compute_report(const std::vector<EvalRecord>& records) {
    MetricsReport report;
    report.records = static_cast<int64_t>(records.size());
    std::vector<double> preds(records.size());
    std::vector<double> labels(records.size());
    for (size_t i = 0; i < records.size(); ++i) {
        preds[i] = records[i].score;
        labels[i] = static_cast<double>(records[i].label);
    }
    report.logloss = logloss(preds, labels);
    report.auc = auc(records);
    auto [g, excluded] = gauc(records);
    report.gauc = g;
    report.users_excluded_from_gauc = excluded;
    return report;
}

std::string MetricsReport::to_json() const {
    nlohmann::json j;
    j["records"] = records;
    j["logloss"] = logloss;
    j["auc"] = auc;
    j["gauc"] = gauc;
    j["users_excluded_from_gauc"] = users_excluded_from_gauc;
    j["rows_with_unseen_values"] = rows_with_unseen_values;
    if (!per_cohort.empty()) {
        nlohmann::json cohorts;
        for (const auto& [name, m] : per_cohort) {
            nlohmann::json c;
            c["records"] = m.records;
            c["logloss"] = m.logloss ? nlohmann::json(*m.logloss) : nlohmann::json(nullptr);
            c["auc"] = m.auc ? nlohmann::json(*m.auc) : nlohmann::json(nullptr);
            c["gauc"] = m.gauc ? nlohmann::json(*m.gauc) : nlohmann::json(nullptr);
            c["users_excluded_from_gauc"] = m.users_excluded_from_gauc;
            cohorts[name] = c;
        }
        j["per_cohort"] = cohorts;
    }
    return j.dump(2);
}

}  // namespace groupce
