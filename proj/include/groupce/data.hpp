#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "groupce/matrix.hpp"

namespace groupce {

struct FeatureSpec {
    std::string name;
    int64_t cardinality = 0;
};

struct DatasetRow {
    std::vector<int64_t> user_features;  // [0] is user_id
    std::vector<int64_t> item_features;  // [0] is item_id
    int label = 0;
};

// User/item categorical feature rows with binary labels. Vocabularies map
// raw CSV strings to dense ids in order of first appearance, so reloading
// the same file reproduces the same ids.
struct InteractionDataset {
    std::vector<FeatureSpec> user_schema;  // [0] is user_id
    std::vector<FeatureSpec> item_schema;  // [0] is item_id
    std::vector<std::vector<std::string>> user_vocab;  // per feature: id -> raw value
    std::vector<std::vector<std::string>> item_vocab;
    std::vector<DatasetRow> rows;
    std::map<int64_t, int64_t> ground_truth_cluster;  // user id -> cluster (synthetic only)

    int64_t user_key(const DatasetRow& row) const { return row.user_features[0]; }
    const std::string& user_raw(int64_t user_id) const { return user_vocab[0][static_cast<size_t>(user_id)]; }
    std::string to_csv() const;
};

// CSV convention: required header columns user_id,item_id,label; extra
// columns prefixed u_ / i_ are user / item categorical features. No quoting.
InteractionDataset load_csv(const std::string& path);
InteractionDataset parse_csv_text(const std::string& text, const std::string& origin);

struct SplitSpec {
    double train_frac = 0.7;
    double valid_frac = 0.1;
    double test_frac = 0.2;
    uint64_t seed = 7;

    void validate() const;
};

struct SplitResult {
    std::vector<int64_t> train;
    std::vector<int64_t> valid;
    std::vector<int64_t> test;
    // users that could not receive a positive in every split (< 3 positives)
    std::vector<int64_t> flagged_users;
};

// Per-user shuffled allocation honoring the fractions. Every user with at
// least 3 positives gets at least one positive in each split; users with
// fewer have their positives placed train-first and are flagged.
SplitResult stratified_split(const InteractionDataset& ds, const SplitSpec& spec);

struct GenConfig {
    int64_t users = 2000;
    int64_t items = 200;
    int64_t clusters = 8;
    int64_t archetypes = 0;  // 0 -> same as clusters
    int64_t impressions_per_user = 50;
    double noise = 0.35;           // logistic noise scale; 0 gives deterministic labels
    double popularity_skew = 0.7;  // item sampling weight ∝ (rank+1)^-skew
    double liked_frac = 0.25;      // fraction of archetypes each cluster prefers
    double item_quality_std = 0.25;
    // spread of the per-(cluster, item) affinity term; gives each cluster its
    // own continuous item ordering on top of the archetype tiers
    double cluster_affinity_std = 0.0;
    uint64_t seed = 1;

    void validate() const;
};

// Latent-cluster interaction generator: users belong to clusters, clusters
// hold preferences over item archetypes, labels follow a latent-utility
// threshold with logistic noise. Ground-truth clusters are recorded.
InteractionDataset synthesize(const GenConfig& cfg);

// Columnar batch view consumed by the model.
struct Batch {
    std::vector<std::vector<int64_t>> user_ids;  // per user feature, per row
    std::vector<std::vector<int64_t>> item_ids;  // per item feature, per row
    std::vector<double> labels;
    std::vector<int64_t> user_keys;  // user id per row
    std::vector<int64_t> row_indices;

    int64_t size() const { return static_cast<int64_t>(labels.size()); }
};

Batch make_batch(const InteractionDataset& ds, const std::vector<int64_t>& indices, int64_t begin,
                 int64_t end);

// Seeded epoch iteration over a fixed index set. Each epoch reshuffles with
// a seed derived from (seed, epoch); the final short batch is emitted.
class BatchIterator {
public:
    BatchIterator(const InteractionDataset& ds, std::vector<int64_t> indices, int64_t batch_size,
                  bool shuffle, uint64_t seed);

    Batch next();
    int64_t epoch() const { return epoch_; }

private:
    void start_epoch();

    const InteractionDataset& ds_;
    std::vector<int64_t> indices_;
    int64_t batch_size_;
    bool shuffle_;
    uint64_t seed_;
    int64_t epoch_ = -1;
    int64_t cursor_ = 0;
};

void write_lines(const std::string& path, const std::vector<std::string>& lines);
std::vector<int64_t> read_index_manifest(const std::string& path);
void write_index_manifest(const std::string& path, const std::vector<int64_t>& indices);

}  // namespace groupce
