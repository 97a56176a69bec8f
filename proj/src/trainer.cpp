#include "groupce/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "groupce/error.hpp"
#include "groupce/grouping.hpp"
#include "groupce/losses.hpp"
#include "groupce/model.hpp"
#include "groupce/rng.hpp"
#include "groupce/rvq.hpp"

namespace fs = std::filesystem;

namespace groupce {

namespace {

constexpr int64_t kEvalChunk = 1024;

nlohmann::json eval_to_json(const EvalSummary& e) {
    nlohmann::json j;
    j["logloss"] = std::isfinite(e.logloss) ? nlohmann::json(e.logloss) : nlohmann::json(nullptr);
    j["auc"] = std::isfinite(e.auc) ? nlohmann::json(e.auc) : nlohmann::json(nullptr);
    j["gauc"] = std::isfinite(e.gauc) ? nlohmann::json(e.gauc) : nlohmann::json(nullptr);
    j["users_excluded_from_gauc"] = e.users_excluded;
    j["records"] = e.records;
    return j;
}

// Forward pass over a fixed index set, original path only.
EvalSummary evaluate_indices(const Model& model, const ParamStore& params,
                             const InteractionDataset& ds, const std::vector<int64_t>& indices) {
    std::vector<EvalRecord> records;
    records.reserve(indices.size());
    std::vector<double> preds, labels;
    preds.reserve(indices.size());
    labels.reserve(indices.size());
    for (int64_t begin = 0; begin < static_cast<int64_t>(indices.size()); begin += kEvalChunk) {
        const int64_t end = std::min(begin + kEvalChunk, static_cast<int64_t>(indices.size()));
        const Batch batch = make_batch(ds, indices, begin, end);
        const ForwardTrace trace = model.forward(batch, params);
        for (int64_t r = 0; r < batch.size(); ++r) {
            const double p = sigmoid_stable(trace.s.data[static_cast<size_t>(r)]);
            records.push_back({ds.user_raw(batch.user_keys[static_cast<size_t>(r)]), p,
                               static_cast<int>(batch.labels[static_cast<size_t>(r)])});
            preds.push_back(p);
            labels.push_back(batch.labels[static_cast<size_t>(r)]);
        }
    }
    EvalSummary out;
    out.records = static_cast<int64_t>(records.size());
    if (records.empty()) return out;
    out.logloss = logloss(preds, labels);
    try {
        out.auc = auc(records);
    } catch (const MetricError&) {
    }
    try {
        auto [g, excluded] = gauc(records);
        out.gauc = g;
        out.users_excluded = excluded;
    } catch (const MetricError&) {
    }
    return out;
}

GroupPartition whole_batch_partition(int64_t n) {
    GroupPartition part;
    part.level = 1;
    part.prefix_of_group.push_back({0});
    part.groups.emplace_back();
    for (int64_t i = 0; i < n; ++i) part.groups.back().push_back(static_cast<int>(i));
    return part;
}

struct StepLosses {
    LossBreakdown breakdown;
    std::vector<double> d_s;
    std::vector<double> d_s_q;
    std::vector<double> d_log_sigma;
};

// Loss value and logit-space gradients for one batch under the configured
// objective. For groupce the hierarchical term consumes the original-path
// logits; the quantized path only carries the auxiliary calibration loss.
StepLosses compute_losses(const RunConfig& cfg, const ForwardTrace& trace,
                          const std::vector<double>& labels,
                          const std::vector<GroupPartition>& partitions,
                          const std::vector<double>& log_sigma) {
    StepLosses out;
    const std::vector<double> s = trace.logits();
    const size_t n = s.size();
    out.d_s.assign(n, 0.0);
    out.breakdown.lambda = cfg.loss.lambda;

    std::vector<double> probs(n);
    for (size_t i = 0; i < n; ++i) probs[i] = sigmoid_stable(s[i]);
    out.breakdown.primary_logloss = logloss(probs, labels);
    logloss_grad_wrt_logits(s, labels, 1.0, out.d_s);

    switch (cfg.loss.objective) {
        case Objective::Logloss:
            break;
        case Objective::LoglossPairwise:
            out.breakdown.baseline_rank = pairwise_logistic(s, labels);
            pairwise_logistic_grad(s, labels, cfg.loss.lambda, out.d_s);
            break;
        case Objective::LoglossSoftmaxCE:
            out.breakdown.baseline_rank = softmax_ce(s, labels);
            softmax_ce_grad(s, labels, cfg.loss.lambda, out.d_s);
            break;
        case Objective::LoglossListCE: {
            const GroupPartition part = whole_batch_partition(static_cast<int64_t>(n));
            out.breakdown.baseline_rank = listce_level(s, labels, part, cfg.loss.listce_eps);
            listce_level_grad(s, labels, part, cfg.loss.listce_eps, cfg.loss.lambda, out.d_s);
            break;
        }
        case Objective::GroupCE: {
            const std::vector<double> s_q = trace.logits_q();
            std::vector<double> probs_q(n);
            for (size_t i = 0; i < n; ++i) probs_q[i] = sigmoid_stable(s_q[i]);
            out.breakdown.aux_logloss = logloss(probs_q, labels);
            out.d_s_q.assign(n, 0.0);
            logloss_grad_wrt_logits(s_q, labels, cfg.loss.lambda, out.d_s_q);

            if (!cfg.loss.disable_hierarchical) {
                for (const auto& part : partitions)
                    out.breakdown.per_level_listce.push_back(
                        listce_level(s, labels, part, cfg.loss.listce_eps));
                out.breakdown.hierarchical =
                    hierarchical_loss(out.breakdown.per_level_listce, log_sigma);
                for (size_t l = 0; l < partitions.size(); ++l)
                    listce_level_grad(s, labels, partitions[l], cfg.loss.listce_eps,
                                      hierarchical_level_weight(log_sigma[l]), out.d_s);
                out.d_log_sigma =
                    hierarchical_grad_log_sigma(out.breakdown.per_level_listce, log_sigma);
            }
            break;
        }
    }

    out.breakdown.total =
        out.breakdown.primary_logloss +
        cfg.loss.lambda * (out.breakdown.aux_logloss + out.breakdown.baseline_rank) +
        out.breakdown.hierarchical;
    return out;
}

nlohmann::json breakdown_to_json(const LossBreakdown& b) {
    nlohmann::json j;
    j["primary_logloss"] = b.primary_logloss;
    j["aux_logloss"] = b.aux_logloss;
    j["per_level_listce"] = b.per_level_listce;
    j["hierarchical"] = b.hierarchical;
    j["baseline_rank"] = b.baseline_rank;
    j["lambda"] = b.lambda;
    j["total"] = b.total;
    return j;
}

// Running means of breakdown components between evaluation records.
struct BreakdownAccumulator {
    LossBreakdown sum;
    int64_t count = 0;

    void add(const LossBreakdown& b) {
        if (count == 0) sum.per_level_listce.assign(b.per_level_listce.size(), 0.0);
        sum.primary_logloss += b.primary_logloss;
        sum.aux_logloss += b.aux_logloss;
        sum.hierarchical += b.hierarchical;
        sum.baseline_rank += b.baseline_rank;
        sum.total += b.total;
        sum.lambda = b.lambda;
        for (size_t l = 0; l < b.per_level_listce.size() && l < sum.per_level_listce.size(); ++l)
            sum.per_level_listce[l] += b.per_level_listce[l];
        ++count;
    }

    LossBreakdown mean() const {
        LossBreakdown m = sum;
        if (count == 0) return m;
        const double inv = 1.0 / static_cast<double>(count);
        m.primary_logloss *= inv;
        m.aux_logloss *= inv;
        m.hierarchical *= inv;
        m.baseline_rank *= inv;
        m.total *= inv;
        for (double& v : m.per_level_listce) v *= inv;
        return m;
    }

    void reset() {
        sum = LossBreakdown();
        count = 0;
    }
};

// Tracks per-slot streaks of "smoothed count strictly below threshold" at
// expiration-check time, counting only checks after the warmup boundary.
class CodebookHealthTracker {
public:
    explicit CodebookHealthTracker(int64_t warmup_steps) : warmup_steps_(warmup_steps) {}

    void observe(const RvqState& rvq, int64_t step, CodebookHealthStats& stats) {
        if (!rvq.initialized || step <= warmup_steps_) return;
        if (streaks_.empty())
            for (const auto& cb : rvq.codebooks)
                streaks_.emplace_back(static_cast<size_t>(cb.num_codes()), 0);
        ++stats.checks;
        for (size_t l = 0; l < rvq.codebooks.size(); ++l) {
            const std::vector<double> smoothed = smoothed_counts(rvq.codebooks[l]);
            for (size_t k = 0; k < smoothed.size(); ++k) {
                if (smoothed[k] < rvq.expire_threshold) {
                    ++stats.below_events;
                    int64_t& streak = streaks_[l][k];
                    ++streak;
                    if (streak == 2) ++stats.slots_with_consecutive_below;
                    stats.max_consecutive_below = std::max(stats.max_consecutive_below, streak);
                } else {
                    streaks_[l][k] = 0;
                }
            }
        }
    }

private:
    int64_t warmup_steps_;
    std::vector<std::vector<int64_t>> streaks_;
};

std::vector<double> log_sigma_values(const ParamStore& params) {
    if (!params.has(Model::kLogSigmaParam)) return {};
    const DenseMatrix& m = params.at(Model::kLogSigmaParam).value;
    return {m.data.begin(), m.data.end()};
}

nlohmann::json health_to_json(const CodebookHealthStats& h) {
    nlohmann::json j;
    j["checks"] = h.checks;
    j["below_events"] = h.below_events;
    j["max_consecutive_below"] = h.max_consecutive_below;
    j["slots_with_consecutive_below"] = h.slots_with_consecutive_below;
    return j;
}

Checkpoint assemble_checkpoint(const RunConfig& cfg, const InteractionDataset& ds,
                               const ParamStore& params, const RvqState& rvq,
                               const std::vector<int64_t>& train_indices) {
    Checkpoint ck;
    ck.config = cfg;
    ck.user_schema = ds.user_schema;
    ck.item_schema = ds.item_schema;
    ck.user_vocab = ds.user_vocab;
    ck.item_vocab = ds.item_vocab;
    ck.params = params;
    ck.rvq = rvq;
    for (int64_t idx : train_indices)
        ck.train_impressions[ds.user_raw(ds.user_key(ds.rows[static_cast<size_t>(idx)]))] += 1;
    return ck;
}

}  // namespace

TrainOutcome run_training(const RunConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    fs::create_directories(out_dir);
    const auto artifact = [&](const std::string& name) {
        return (fs::path(out_dir) / name).string();
    };

    InteractionDataset ds;
    if (cfg.data_csv.empty()) {
        ds = synthesize(cfg.gen);
        std::ofstream csv(artifact("data.csv"), std::ios::binary);
        csv << ds.to_csv();
        std::ofstream clusters(artifact("clusters.csv"), std::ios::binary);
        clusters << "user_id,cluster\n";
        for (const auto& [user, cluster] : ds.ground_truth_cluster)
            clusters << ds.user_raw(user) << ',' << cluster << '\n';
    } else {
        ds = load_csv(cfg.data_csv);
    }

    {
        std::ofstream config_copy(artifact("config.txt"), std::ios::binary);
        config_copy << serialize_config(cfg);
    }

    const SplitResult split = stratified_split(ds, cfg.split);
    write_index_manifest(artifact("split_train.txt"), split.train);
    write_index_manifest(artifact("split_valid.txt"), split.valid);
    write_index_manifest(artifact("split_test.txt"), split.test);
    if (!split.flagged_users.empty()) {
        std::vector<std::string> lines;
        for (int64_t user : split.flagged_users) lines.push_back(ds.user_raw(user));
        write_lines(artifact("flagged_users.txt"), lines);
    }

    const bool grouped = cfg.loss.objective == Objective::GroupCE;
    Model model(ds.user_schema, ds.item_schema, cfg.tower);
    ParamStore params;
    model.init_params(params, cfg.train.seed, grouped ? cfg.rvq.levels : 0);
    RvqState rvq;

    BatchIterator iterator(ds, split.train, cfg.train.batch_size, true, cfg.train.seed);

    std::ofstream history(artifact("history.jsonl"), std::ios::binary);
    if (!history) throw IoError("cannot write history: " + artifact("history.jsonl"));

    TrainOutcome outcome;
    outcome.run_dir = out_dir;
    outcome.flagged_split_users = static_cast<int64_t>(split.flagged_users.size());

    ParamStore best_params = params;
    RvqState best_rvq = rvq;
    int64_t evals_since_best = 0;

    const auto record_eval = [&](int64_t step, const BreakdownAccumulator& acc) {
        const EvalSummary valid = evaluate_indices(model, params, ds, split.valid);
        const bool improved =
            std::isfinite(valid.gauc) &&
            (!std::isfinite(outcome.best_valid.gauc) || valid.gauc > outcome.best_valid.gauc);
        if (outcome.best_step < 0 || improved) {
            outcome.best_step = step;
            outcome.best_valid = valid;
            best_params = params;
            best_rvq = rvq;
            evals_since_best = 0;
        } else {
            ++evals_since_best;
        }
        nlohmann::json j;
        j["step"] = step;
        j["train"] = breakdown_to_json(acc.mean());
        j["valid"] = eval_to_json(valid);
        j["best_step"] = outcome.best_step;
        history << j.dump() << '\n';
    };

    const int64_t warmup_steps = std::max<int64_t>(1, cfg.train.max_steps / 10);
    CodebookHealthTracker health(warmup_steps);
    BreakdownAccumulator acc;

    record_eval(0, acc);

    bool stopped_early = false;
    for (int64_t step = 1; step <= cfg.train.max_steps && !stopped_early; ++step) {
        const Batch batch = iterator.next();

        ForwardTrace trace;
        std::vector<GroupPartition> partitions;
        if (grouped) {
            if (!rvq.initialized) {
                const DenseMatrix seed_embeddings = model.user_forward(batch, params);
                rvq = init_codebooks(seed_embeddings, cfg.rvq.codebook_size, cfg.rvq.levels,
                                     mix_seed(cfg.train.seed, 0x5eed), cfg.rvq.decay,
                                     cfg.rvq.expire_threshold, cfg.rvq.smoothing_eps);
            }
            trace = model.dual_path_forward(batch, params, rvq);
            partitions = build_partitions(trace.quant.codes);
            if (cfg.train.group_dump_every > 0 && step % cfg.train.group_dump_every == 0) {
                std::ofstream dump(artifact("groups_step" + std::to_string(step) + ".txt"),
                                   std::ios::binary);
                dump << dump_group_sizes(partitions);
            }
        } else {
            trace = model.forward(batch, params);
        }

        StepLosses losses =
            compute_losses(cfg, trace, batch.labels, partitions, log_sigma_values(params));
        if (!std::isfinite(losses.breakdown.total))
            throw DivergenceError("non-finite loss at step " + std::to_string(step));
        acc.add(losses.breakdown);

        model.backward(trace, losses.d_s, losses.d_s_q, params);
        if (!losses.d_log_sigma.empty()) {
            Param& ls = params.at(Model::kLogSigmaParam);
            for (size_t l = 0; l < losses.d_log_sigma.size(); ++l)
                ls.grad.data[l] += losses.d_log_sigma[l];
        }

        adamw_step(params, cfg.opt);

        if (grouped) {
            // Codebooks and their health are bookkept after the optimizer
            // step; grouping and losses above used pre-update codebooks.
            ema_update(rvq, trace.quant.residual_trail, trace.quant.codes);
            health.observe(rvq, step, outcome.codebook_health);
            expire_codes(rvq, trace.e_u, mix_seed(cfg.train.seed, static_cast<uint64_t>(step)));
        }

        outcome.steps_run = step;
        if (step % cfg.train.eval_every == 0) {
            record_eval(step, acc);
            acc.reset();
            if (evals_since_best > cfg.train.early_stop_patience) stopped_early = true;
        }
    }

    // selected model = best validation GAUC so far
    const Checkpoint ck = assemble_checkpoint(cfg, ds, best_params, best_rvq, split.train);
    outcome.checkpoint_path = artifact("checkpoint.bin");
    save_checkpoint(outcome.checkpoint_path, ck);

    outcome.train_metrics = evaluate_indices(model, best_params, ds, split.train);
    outcome.valid_metrics = evaluate_indices(model, best_params, ds, split.valid);
    outcome.test_metrics = evaluate_indices(model, best_params, ds, split.test);

    nlohmann::json report;
    report["run_dir"] = out_dir;
    report["objective"] = objective_to_string(cfg.loss.objective);
    report["steps_run"] = outcome.steps_run;
    report["stopped_early"] = stopped_early;
    report["best_step"] = outcome.best_step;
    report["best_valid"] = eval_to_json(outcome.best_valid);
    report["final"]["train"] = eval_to_json(outcome.train_metrics);
    report["final"]["valid"] = eval_to_json(outcome.valid_metrics);
    report["final"]["test"] = eval_to_json(outcome.test_metrics);
    report["codebook_health"] = health_to_json(outcome.codebook_health);
    report["flagged_split_users"] = outcome.flagged_split_users;
    report["checkpoint"] = outcome.checkpoint_path;
    outcome.summary_json = report.dump(2);
    std::ofstream report_file(artifact("report.json"), std::ios::binary);
    report_file << outcome.summary_json << '\n';
    return outcome;
}

namespace {

// Raw-value translation through a checkpoint vocabulary; unseen values fall
// back to id 0 and are counted.
struct VocabMapper {
    std::vector<std::map<std::string, int64_t>> index;
    int64_t misses = 0;

    explicit VocabMapper(const std::vector<std::vector<std::string>>& vocab) {
        index.resize(vocab.size());
        for (size_t f = 0; f < vocab.size(); ++f)
            for (size_t id = 0; id < vocab[f].size(); ++id)
                index[f].emplace(vocab[f][id], static_cast<int64_t>(id));
    }

    int64_t map(size_t feature, const std::string& raw) {
        const auto it = index[feature].find(raw);
        if (it == index[feature].end()) {
            ++misses;
            return 0;
        }
        return it->second;
    }
};

void require_schema_match(const std::vector<FeatureSpec>& expected,
                          const std::vector<FeatureSpec>& got, const std::string& side) {
    if (expected.size() != got.size())
        throw DataError("schema mismatch: checkpoint has " + std::to_string(expected.size()) +
                        " " + side + " features, dataset has " + std::to_string(got.size()));
    for (size_t f = 0; f < expected.size(); ++f)
        if (expected[f].name != got[f].name)
            throw DataError("schema mismatch: " + side + " feature " + std::to_string(f) +
                            " is '" + got[f].name + "', checkpoint expects '" + expected[f].name +
                            "'");
}

struct ScoredRecords {
    std::vector<EvalRecord> records;
    int64_t oov_rows = 0;
};

ScoredRecords score_dataset(const Checkpoint& ck, const Model& model,
                            const InteractionDataset& ds, const std::vector<int64_t>& indices) {
    VocabMapper user_map(ck.user_vocab);
    VocabMapper item_map(ck.item_vocab);
    ScoredRecords out;
    out.records.reserve(indices.size());
    for (int64_t begin = 0; begin < static_cast<int64_t>(indices.size()); begin += kEvalChunk) {
        const int64_t end = std::min(begin + kEvalChunk, static_cast<int64_t>(indices.size()));
        Batch batch;
        batch.user_ids.resize(ck.user_schema.size());
        batch.item_ids.resize(ck.item_schema.size());
        std::vector<std::string> raw_users;
        for (int64_t i = begin; i < end; ++i) {
            const DatasetRow& row = ds.rows[static_cast<size_t>(indices[static_cast<size_t>(i)])];
            const int64_t misses_before = user_map.misses + item_map.misses;
            for (size_t f = 0; f < ck.user_schema.size(); ++f)
                batch.user_ids[f].push_back(
                    user_map.map(f, ds.user_vocab[f][static_cast<size_t>(row.user_features[f])]));
            for (size_t f = 0; f < ck.item_schema.size(); ++f)
                batch.item_ids[f].push_back(
                    item_map.map(f, ds.item_vocab[f][static_cast<size_t>(row.item_features[f])]));
            if (user_map.misses + item_map.misses > misses_before) ++out.oov_rows;
            batch.labels.push_back(static_cast<double>(row.label));
            batch.user_keys.push_back(row.user_features[0]);
            raw_users.push_back(ds.user_vocab[0][static_cast<size_t>(row.user_features[0])]);
        }
        const ForwardTrace trace = model.forward(batch, ck.params);
        for (int64_t r = 0; r < batch.size(); ++r)
            out.records.push_back({raw_users[static_cast<size_t>(r)],
                                   sigmoid_stable(trace.s.data[static_cast<size_t>(r)]),
                                   static_cast<int>(batch.labels[static_cast<size_t>(r)])});
    }
    return out;
}

CohortMetrics cohort_metrics(const std::vector<EvalRecord>& records) {
    CohortMetrics m;
    m.records = static_cast<int64_t>(records.size());
    if (records.empty()) return m;
    std::vector<double> preds(records.size()), labels(records.size());
    for (size_t i = 0; i < records.size(); ++i) {
        preds[i] = records[i].score;
        labels[i] = static_cast<double>(records[i].label);
    }
    m.logloss = logloss(preds, labels);
    try {
        m.auc = auc(records);
    } catch (const MetricError&) {
    }
    try {
        auto [g, excluded] = gauc(records);
        m.gauc = g;
        m.users_excluded_from_gauc = excluded;
    } catch (const MetricError&) {
    }
    return m;
}

}  // namespace

MetricsReport evaluate_checkpoint(const std::string& checkpoint_path, const std::string& csv_path,
                                  const std::string& rows_manifest, int64_t cold_max,
                                  int64_t warm_max) {
    const Checkpoint ck = load_checkpoint(checkpoint_path);
    const InteractionDataset ds = load_csv(csv_path);
    require_schema_match(ck.user_schema, ds.user_schema, "user");
    require_schema_match(ck.item_schema, ds.item_schema, "item");

    std::vector<int64_t> indices;
    if (!rows_manifest.empty()) {
        indices = read_index_manifest(rows_manifest);
        for (int64_t idx : indices)
            if (idx < 0 || idx >= static_cast<int64_t>(ds.rows.size()))
                throw DataError("manifest row index " + std::to_string(idx) + " out of range");
    } else {
        indices.resize(ds.rows.size());
        for (size_t i = 0; i < ds.rows.size(); ++i) indices[i] = static_cast<int64_t>(i);
    }

    const Model model(ck.user_schema, ck.item_schema, ck.config.tower);
    const ScoredRecords scored = score_dataset(ck, model, ds, indices);

    MetricsReport report = compute_report(scored.records);
    report.rows_with_unseen_values = scored.oov_rows;

    if (cold_max > 0) {
        // cohorting by stored training-split impression counts
        const auto cohorts = stratify_cohorts(ck.train_impressions, cold_max, warm_max);
        std::map<std::string, std::vector<EvalRecord>> by_cohort;
        by_cohort["cold"] = {};
        by_cohort["warm"] = {};
        by_cohort["other"] = {};
        for (const auto& rec : scored.records) {
            const auto it = cohorts.find(rec.user);
            const Cohort c = it == cohorts.end() ? Cohort::Cold : it->second;
            by_cohort[cohort_name(c)].push_back(rec);
        }
        for (const auto& [name, recs] : by_cohort) report.per_cohort[name] = cohort_metrics(recs);
    }
    return report;
}

std::string run_sweep(const RunConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    fs::create_directories(out_dir);
    std::string csv = "K,L,logloss,auc,gauc\n";
    std::vector<std::string> errors;
    for (int64_t K : cfg.sweep_codebook_sizes) {
        for (int64_t L : cfg.sweep_levels) {
            RunConfig cell = cfg;
            cell.rvq.codebook_size = K;
            cell.rvq.levels = L;
            const std::string cell_dir =
                (fs::path(out_dir) / ("sweep_K" + std::to_string(K) + "_L" + std::to_string(L)))
                    .string();
            try {
                const TrainOutcome outcome = run_training(cell, cell_dir);
                std::ostringstream row;
                row.precision(17);
                row << K << ',' << L << ',' << outcome.test_metrics.logloss << ','
                    << outcome.test_metrics.auc << ',' << outcome.test_metrics.gauc << '\n';
                csv += row.str();
            } catch (const std::exception& e) {
                errors.push_back("K=" + std::to_string(K) + " L=" + std::to_string(L) + ": " +
                                 e.what());
            }
        }
    }
    {
        std::ofstream out((fs::path(out_dir) / "heatmap.csv").string(), std::ios::binary);
        if (!out) throw IoError("cannot write heatmap.csv under " + out_dir);
        out << csv;
    }
    if (!errors.empty())
        write_lines((fs::path(out_dir) / "sweep_errors.txt").string(), errors);
    return csv;
}

void run_gen_data(const RunConfig& cfg, const std::string& out_dir) {
    cfg.gen.validate();
    fs::create_directories(out_dir);
    const InteractionDataset ds = synthesize(cfg.gen);
    {
        std::ofstream csv((fs::path(out_dir) / "data.csv").string(), std::ios::binary);
        if (!csv) throw IoError("cannot write data.csv under " + out_dir);
        csv << ds.to_csv();
    }
    {
        std::ofstream clusters((fs::path(out_dir) / "clusters.csv").string(), std::ios::binary);
        clusters << "user_id,cluster\n";
        for (const auto& [user, cluster] : ds.ground_truth_cluster)
            clusters << ds.user_raw(user) << ',' << cluster << '\n';
    }
    {
        std::ofstream config_copy((fs::path(out_dir) / "config.txt").string(), std::ios::binary);
        config_copy << serialize_config(cfg);
    }
}

std::string run_diagnose(const std::string& checkpoint_path, const RunConfig& cfg) {
    const Checkpoint ck = load_checkpoint(checkpoint_path);
    InteractionDataset ds;
    if (cfg.data_csv.empty())
        ds = synthesize(cfg.gen);
    else
        ds = load_csv(cfg.data_csv);
    require_schema_match(ck.user_schema, ds.user_schema, "user");
    require_schema_match(ck.item_schema, ds.item_schema, "item");

    const Model model(ck.user_schema, ck.item_schema, ck.config.tower);

    // first training batch under the configured seed
    std::vector<int64_t> all(ds.rows.size());
    for (size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int64_t>(i);
    BatchIterator iterator(ds, all, cfg.train.batch_size, true, cfg.train.seed);
    const Batch batch = iterator.next();

    int64_t positive = -1;
    std::vector<int64_t> negatives;
    for (int64_t r = 0; r < batch.size(); ++r) {
        if (batch.labels[static_cast<size_t>(r)] > 0.0) {
            if (positive < 0) positive = r;
        } else if (static_cast<int64_t>(negatives.size()) < cfg.diag_max_negatives) {
            negatives.push_back(r);
        }
    }
    if (positive < 0) throw DiagnosticError("diagnose: batch contains no positive example");
    if (negatives.size() < 2) throw DiagnosticError("diagnose: need at least two negatives");

    VocabMapper user_map(ck.user_vocab);
    VocabMapper item_map(ck.item_vocab);
    const auto two_row_batch = [&](int64_t a, int64_t b) {
        Batch out;
        out.user_ids.resize(ck.user_schema.size());
        out.item_ids.resize(ck.item_schema.size());
        for (int64_t r : {a, b}) {
            for (size_t f = 0; f < ck.user_schema.size(); ++f)
                out.user_ids[f].push_back(user_map.map(
                    f, ds.user_vocab[f][static_cast<size_t>(
                           batch.user_ids[f][static_cast<size_t>(r)])]));
            for (size_t f = 0; f < ck.item_schema.size(); ++f)
                out.item_ids[f].push_back(item_map.map(
                    f, ds.item_vocab[f][static_cast<size_t>(
                           batch.item_ids[f][static_cast<size_t>(r)])]));
            out.labels.push_back(batch.labels[static_cast<size_t>(r)]);
            out.user_keys.push_back(batch.user_keys[static_cast<size_t>(r)]);
        }
        return out;
    };

    // per-negative full-parameter gradient of the pairwise logistic term
    ParamStore params = ck.params;
    std::vector<double> sq_norms;
    std::vector<double> grad_sum;
    for (int64_t neg : negatives) {
        const Batch pair = two_row_batch(positive, neg);
        const ForwardTrace trace = model.forward(pair, params);
        const double margin = trace.s.data[0] - trace.s.data[1];
        const double slack = sigmoid_stable(-margin);  // d softplus(−m)/dm = −σ(−m)
        params.zero_grads();
        model.backward(trace, {-slack, slack}, {}, params);
        double sq = 0.0;
        size_t cursor = 0;
        for (const auto& [name, p] : params.entries()) {
            if (grad_sum.size() < cursor + p.grad.data.size())
                grad_sum.resize(cursor + p.grad.data.size(), 0.0);
            for (double g : p.grad.data) {
                sq += g * g;
                grad_sum[cursor++] += g;
            }
        }
        sq_norms.push_back(sq);
    }
    params.zero_grads();
    double sum_sq = 0.0;
    for (double v : grad_sum) sum_sq += v * v;

    const size_t n = sq_norms.size();
    std::vector<double> uniform(n, 1.0 / static_cast<double>(n));
    std::vector<double> prop_norm(n, 0.0), prop_norm_sq(n, 0.0);
    double norm_total = 0.0, norm_sq_total = 0.0;
    for (double sq : sq_norms) {
        norm_total += std::sqrt(sq);
        norm_sq_total += sq;
    }
    for (size_t i = 0; i < n; ++i) {
        prop_norm[i] = norm_total > 0.0 ? std::sqrt(sq_norms[i]) / norm_total : uniform[i];
        prop_norm_sq[i] = norm_sq_total > 0.0 ? sq_norms[i] / norm_sq_total : uniform[i];
    }

    nlohmann::json rows = nlohmann::json::array();
    const auto add_row = [&](const std::string& name, const std::vector<double>& p) {
        nlohmann::json row;
        row["distribution"] = name;
        row["p"] = p;
        row["trace_variance"] = trace_variance(sq_norms, sum_sq, p);
        rows.push_back(row);
    };
    add_row("uniform", uniform);
    add_row("prop_norm", prop_norm);
    add_row("prop_norm_sq", prop_norm_sq);

    double step = cfg.diag_grid_step;
    if (step <= 0.0) step = n <= 2 ? 0.001 : (n == 3 ? 0.005 : 0.02);
    auto [grid_p, grid_trace] = grid_search_optimal(sq_norms, sum_sq, step);
    {
        nlohmann::json row;
        row["distribution"] = "grid_opt";
        row["p"] = grid_p;
        row["trace_variance"] = grid_trace;
        row["grid_step"] = step;
        rows.push_back(row);
    }

    nlohmann::json report;
    report["positive_row"] = positive;
    report["num_negatives"] = static_cast<int64_t>(n);
    std::vector<double> norms(n);
    for (size_t i = 0; i < n; ++i) norms[i] = std::sqrt(sq_norms[i]);
    report["per_negative_grad_norms"] = norms;
    report["comparison"] = rows;
    return report.dump(2);
}

}  // namespace groupce
