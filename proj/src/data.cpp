#include "groupce/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "groupce/error.hpp"
#include "groupce/rng.hpp"

namespace groupce {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

// vocabulary id in order of first appearance
int64_t intern(std::map<std::string, int64_t>& index, std::vector<std::string>& vocab,
               const std::string& raw) {
    auto it = index.find(raw);
    if (it != index.end()) return it->second;
    const int64_t id = static_cast<int64_t>(vocab.size());
    index.emplace(raw, id);
    vocab.push_back(raw);
    return id;
}

}  // namespace

std::string InteractionDataset::to_csv() const {
    std::ostringstream os;
    os << "user_id,item_id,label";
    for (size_t f = 1; f < user_schema.size(); ++f) os << ',' << user_schema[f].name;
    for (size_t f = 1; f < item_schema.size(); ++f) os << ',' << item_schema[f].name;
    os << '\n';
    for (const auto& row : rows) {
        os << user_vocab[0][static_cast<size_t>(row.user_features[0])] << ','
           << item_vocab[0][static_cast<size_t>(row.item_features[0])] << ',' << row.label;
        for (size_t f = 1; f < user_schema.size(); ++f)
            os << ',' << user_vocab[f][static_cast<size_t>(row.user_features[f])];
        for (size_t f = 1; f < item_schema.size(); ++f)
            os << ',' << item_vocab[f][static_cast<size_t>(row.item_features[f])];
        os << '\n';
    }
    return os.str();
}

InteractionDataset parse_csv_text(const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw DataError(origin + ": empty file");
    const std::vector<std::string> header = split_line(line);

    int user_col = -1, item_col = -1, label_col = -1;
    std::vector<std::pair<int, std::string>> extra_user, extra_item;
    for (size_t c = 0; c < header.size(); ++c) {
        const std::string& name = header[c];
        if (name == "user_id")
            user_col = static_cast<int>(c);
        else if (name == "item_id")
            item_col = static_cast<int>(c);
        else if (name == "label")
            label_col = static_cast<int>(c);
        else if (name.rfind("u_", 0) == 0)
            extra_user.emplace_back(static_cast<int>(c), name);
        else if (name.rfind("i_", 0) == 0)
            extra_item.emplace_back(static_cast<int>(c), name);
        else
            throw DataError(origin + ": unrecognized column '" + name +
                            "' (expected user_id,item_id,label and u_*/i_* features)");
    }
    if (user_col < 0) throw DataError(origin + ": missing required column user_id");
    if (item_col < 0) throw DataError(origin + ": missing required column item_id");
    if (label_col < 0) throw DataError(origin + ": missing required column label");

    InteractionDataset ds;
    ds.user_schema.push_back({"user_id", 0});
    for (const auto& [c, name] : extra_user) ds.user_schema.push_back({name, 0});
    ds.item_schema.push_back({"item_id", 0});
    for (const auto& [c, name] : extra_item) ds.item_schema.push_back({name, 0});
    ds.user_vocab.resize(ds.user_schema.size());
    ds.item_vocab.resize(ds.item_schema.size());

    std::vector<std::map<std::string, int64_t>> user_index(ds.user_schema.size());
    std::vector<std::map<std::string, int64_t>> item_index(ds.item_schema.size());

    int64_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::vector<std::string> cells = split_line(line);
        if (cells.size() != header.size())
            throw DataError(origin + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " columns, got " +
                            std::to_string(cells.size()));
        DatasetRow row;
        const std::string& label = cells[static_cast<size_t>(label_col)];
        if (label == "0")
            row.label = 0;
        else if (label == "1")
            row.label = 1;
        else
            throw DataError(origin + ":" + std::to_string(line_no) + ": non-binary label '" +
                            label + "'");
        row.user_features.push_back(
            intern(user_index[0], ds.user_vocab[0], cells[static_cast<size_t>(user_col)]));
        for (size_t f = 0; f < extra_user.size(); ++f)
            row.user_features.push_back(
                intern(user_index[f + 1], ds.user_vocab[f + 1],
                       cells[static_cast<size_t>(extra_user[f].first)]));
        row.item_features.push_back(
            intern(item_index[0], ds.item_vocab[0], cells[static_cast<size_t>(item_col)]));
        for (size_t f = 0; f < extra_item.size(); ++f)
            row.item_features.push_back(
                intern(item_index[f + 1], ds.item_vocab[f + 1],
                       cells[static_cast<size_t>(extra_item[f].first)]));
        ds.rows.push_back(std::move(row));
    }
    for (size_t f = 0; f < ds.user_schema.size(); ++f)
        ds.user_schema[f].cardinality = static_cast<int64_t>(ds.user_vocab[f].size());
    for (size_t f = 0; f < ds.item_schema.size(); ++f)
        ds.item_schema[f].cardinality = static_cast<int64_t>(ds.item_vocab[f].size());
    if (ds.rows.empty()) throw DataError(origin + ": no data rows");
    return ds;
}

InteractionDataset load_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open dataset file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_csv_text(buf.str(), path);
}

void SplitSpec::validate() const {
    if (train_frac < 0.0 || valid_frac < 0.0 || test_frac < 0.0)
        throw ConfigError("split fractions must be nonnegative");
    if (std::fabs(train_frac + valid_frac + test_frac - 1.0) > 1e-9)
        throw ConfigError("split fractions must sum to 1");
}

SplitResult stratified_split(const InteractionDataset& ds, const SplitSpec& spec) {
    spec.validate();
    if (ds.rows.empty()) throw DataError("stratified_split: empty dataset");

    std::map<int64_t, std::vector<int64_t>> rows_by_user;
    for (size_t i = 0; i < ds.rows.size(); ++i)
        rows_by_user[ds.user_key(ds.rows[i])].push_back(static_cast<int64_t>(i));

    Rng rng(spec.seed);
    SplitResult out;
    const double fracs[3] = {spec.train_frac, spec.valid_frac, spec.test_frac};

    for (auto& [user, user_rows] : rows_by_user) {
        rng.shuffle(user_rows);
        std::vector<int64_t> positives, negatives;
        for (int64_t idx : user_rows)
            (ds.rows[static_cast<size_t>(idx)].label ? positives : negatives).push_back(idx);

        const int64_t n = static_cast<int64_t>(user_rows.size());
        // raw quotas by largest remainder, ties resolved train > valid > test
        int64_t quota[3];
        {
            double frac_part[3];
            int64_t assigned = 0;
            for (int s = 0; s < 3; ++s) {
                const double target = fracs[s] * static_cast<double>(n);
                quota[s] = static_cast<int64_t>(std::floor(target));
                frac_part[s] = target - std::floor(target);
                assigned += quota[s];
            }
            int64_t leftover = n - assigned;
            while (leftover > 0) {
                int best = 0;
                for (int s = 1; s < 3; ++s)
                    if (frac_part[s] > frac_part[best]) best = s;
                quota[best] += 1;
                frac_part[best] = -1.0;
                --leftover;
            }
        }

        std::vector<int64_t>* splits[3] = {&out.train, &out.valid, &out.test};
        int64_t placed[3] = {0, 0, 0};

        size_t pos_cursor = 0;
        if (positives.size() >= 3) {
            // one positive guaranteed per split
            for (int s = 0; s < 3; ++s) {
                splits[s]->push_back(positives[pos_cursor++]);
                placed[s] += 1;
            }
        } else {
            // train-first placement for the scarce positives
            for (int s = 0; pos_cursor < positives.size() && s < 3; ++s) {
                splits[s]->push_back(positives[pos_cursor++]);
                placed[s] += 1;
            }
            out.flagged_users.push_back(user);
        }

        // remaining rows fill each split up to its quota, honoring the
        // original shuffled order; overflow goes to train
        std::vector<int64_t> remaining;
        remaining.insert(remaining.end(), positives.begin() + static_cast<long>(pos_cursor),
                         positives.end());
        remaining.insert(remaining.end(), negatives.begin(), negatives.end());
        rng.shuffle(remaining);
        int cur = 0;
        for (int64_t idx : remaining) {
            while (cur < 3 && placed[cur] >= quota[cur]) ++cur;
            const int target = cur < 3 ? cur : 0;
            splits[target]->push_back(idx);
            placed[target] += 1;
        }
    }
    return out;
}

void GenConfig::validate() const {
    if (users < 1 || items < 1 || impressions_per_user < 1)
        throw ConfigError("generator sizes must be positive");
    if (clusters < 1 || clusters > users)
        throw ConfigError("generator requires 1 <= clusters <= users");
    if (noise < 0.0) throw ConfigError("generator noise must be >= 0");
    if (liked_frac <= 0.0 || liked_frac > 1.0)
        throw ConfigError("generator liked_frac must be in (0, 1]");
}

InteractionDataset synthesize(const GenConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    const int64_t num_arch = cfg.archetypes > 0 ? cfg.archetypes : cfg.clusters;

    // balanced cluster / archetype assignment over shuffled identities
    std::vector<int64_t> user_order(static_cast<size_t>(cfg.users));
    std::iota(user_order.begin(), user_order.end(), 0);
    rng.shuffle(user_order);
    std::vector<int64_t> cluster_of(static_cast<size_t>(cfg.users));
    for (size_t i = 0; i < user_order.size(); ++i)
        cluster_of[static_cast<size_t>(user_order[i])] = static_cast<int64_t>(i) % cfg.clusters;

    std::vector<int64_t> item_order(static_cast<size_t>(cfg.items));
    std::iota(item_order.begin(), item_order.end(), 0);
    rng.shuffle(item_order);
    std::vector<int64_t> archetype_of(static_cast<size_t>(cfg.items));
    for (size_t i = 0; i < item_order.size(); ++i)
        archetype_of[static_cast<size_t>(item_order[i])] = static_cast<int64_t>(i) % num_arch;

    // cluster preference over archetypes: +1 liked, -1 disliked
    std::vector<std::vector<double>> pref(static_cast<size_t>(cfg.clusters),
                                          std::vector<double>(static_cast<size_t>(num_arch), -1.0));
    for (int64_t g = 0; g < cfg.clusters; ++g) {
        bool any = false;
        for (int64_t a = 0; a < num_arch; ++a) {
            if (rng.uniform01() < cfg.liked_frac) {
                pref[static_cast<size_t>(g)][static_cast<size_t>(a)] = 1.0;
                any = true;
            }
        }
        if (!any)
            pref[static_cast<size_t>(g)][rng.uniform_index(static_cast<uint64_t>(num_arch))] = 1.0;
    }

    std::vector<double> item_quality(static_cast<size_t>(cfg.items), 0.0);
    if (cfg.item_quality_std > 0.0)
        for (auto& q : item_quality) q = rng.normal(0.0, cfg.item_quality_std);

    // per-(cluster, item) affinity: a cluster-specific continuous ordering
    std::vector<std::vector<double>> cluster_affinity;
    if (cfg.cluster_affinity_std > 0.0) {
        cluster_affinity.assign(static_cast<size_t>(cfg.clusters),
                                std::vector<double>(static_cast<size_t>(cfg.items), 0.0));
        for (auto& row : cluster_affinity)
            for (auto& a : row) a = rng.normal(0.0, cfg.cluster_affinity_std);
    }

    // popularity-skewed item sampling distribution
    std::vector<double> cumulative(static_cast<size_t>(cfg.items), 0.0);
    {
        double total = 0.0;
        for (int64_t i = 0; i < cfg.items; ++i) {
            total += std::pow(static_cast<double>(i + 1), -cfg.popularity_skew);
            cumulative[static_cast<size_t>(i)] = total;
        }
        for (auto& c : cumulative) c /= total;
    }
    auto sample_item = [&]() -> int64_t {
        const double u = rng.uniform01();
        const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), u);
        const int64_t rank = static_cast<int64_t>(it - cumulative.begin());
        // item_order maps popularity rank -> item id
        return item_order[static_cast<size_t>(std::min(rank, cfg.items - 1))];
    };

    InteractionDataset ds;
    ds.user_schema.push_back({"user_id", cfg.users});
    ds.item_schema.push_back({"item_id", cfg.items});
    ds.user_vocab.resize(1);
    ds.item_vocab.resize(1);
    ds.user_vocab[0].reserve(static_cast<size_t>(cfg.users));
    for (int64_t u = 0; u < cfg.users; ++u) ds.user_vocab[0].push_back("u" + std::to_string(u));
    ds.item_vocab[0].reserve(static_cast<size_t>(cfg.items));
    for (int64_t i = 0; i < cfg.items; ++i) ds.item_vocab[0].push_back("i" + std::to_string(i));

    ds.rows.reserve(static_cast<size_t>(cfg.users * cfg.impressions_per_user));
    for (int64_t u = 0; u < cfg.users; ++u) {
        const int64_t g = cluster_of[static_cast<size_t>(u)];
        ds.ground_truth_cluster[u] = g;
        for (int64_t t = 0; t < cfg.impressions_per_user; ++t) {
            const int64_t item = sample_item();
            double z = pref[static_cast<size_t>(g)][static_cast<size_t>(
                           archetype_of[static_cast<size_t>(item)])] +
                       item_quality[static_cast<size_t>(item)];
            if (!cluster_affinity.empty())
                z += cluster_affinity[static_cast<size_t>(g)][static_cast<size_t>(item)];
            int label;
            if (cfg.noise > 0.0) {
                const double p = 1.0 / (1.0 + std::exp(-z / cfg.noise));
                label = rng.uniform01() < p ? 1 : 0;
            } else {
                label = z > 0.0 ? 1 : 0;
            }
            DatasetRow row;
            row.user_features = {u};
            row.item_features = {item};
            row.label = label;
            ds.rows.push_back(std::move(row));
        }
    }
    return ds;
}

Batch make_batch(const InteractionDataset& ds, const std::vector<int64_t>& indices, int64_t begin,
                 int64_t end) {
    Batch batch;
    const size_t uf = ds.user_schema.size();
    const size_t itf = ds.item_schema.size();
    batch.user_ids.resize(uf);
    batch.item_ids.resize(itf);
    for (int64_t i = begin; i < end; ++i) {
        const DatasetRow& row = ds.rows[static_cast<size_t>(indices[static_cast<size_t>(i)])];
        for (size_t f = 0; f < uf; ++f) batch.user_ids[f].push_back(row.user_features[f]);
        for (size_t f = 0; f < itf; ++f) batch.item_ids[f].push_back(row.item_features[f]);
        batch.labels.push_back(static_cast<double>(row.label));
        batch.user_keys.push_back(row.user_features[0]);
        batch.row_indices.push_back(indices[static_cast<size_t>(i)]);
    }
    return batch;
}

BatchIterator::BatchIterator(const InteractionDataset& ds, std::vector<int64_t> indices,
                             int64_t batch_size, bool shuffle, uint64_t seed)
    : ds_(ds), indices_(std::move(indices)), batch_size_(batch_size), shuffle_(shuffle),
      seed_(seed) {
    if (batch_size_ < 1) throw ConfigError("batch size must be >= 1");
    if (indices_.empty()) throw DataError("batch iterator needs a nonempty index set");
    start_epoch();
}

void BatchIterator::start_epoch() {
    ++epoch_;
    cursor_ = 0;
    if (shuffle_) {
        Rng rng(mix_seed(seed_, static_cast<uint64_t>(epoch_)));
        rng.shuffle(indices_);
    }
}

Batch BatchIterator::next() {
    if (cursor_ >= static_cast<int64_t>(indices_.size())) start_epoch();
    const int64_t begin = cursor_;
    const int64_t end = std::min(begin + batch_size_, static_cast<int64_t>(indices_.size()));
    cursor_ = end;
    return make_batch(ds_, indices_, begin, end);
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write file: " + path);
    for (const auto& line : lines) out << line << '\n';
}

std::vector<int64_t> read_index_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path);
    std::vector<int64_t> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        out.push_back(std::stoll(line));
    }
    return out;
}

void write_index_manifest(const std::string& path, const std::vector<int64_t>& indices) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write manifest: " + path);
    for (int64_t idx : indices) out << idx << '\n';
}

}  // namespace groupce
