#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "groupce/data.hpp"
#include "groupce/error.hpp"

using namespace groupce;

namespace {

const char* kSmallCsv =
    "user_id,item_id,label,u_country,i_category\n"
    "alice,apple,1,us,fruit\n"
    "bob,banana,0,de,fruit\n"
    "alice,carrot,1,us,veg\n";

}  // namespace

TEST_CASE("csv ingestion builds schemas and vocabularies in appearance order") {
    const InteractionDataset ds = parse_csv_text(kSmallCsv, "small");
    REQUIRE(ds.rows.size() == 3);
    REQUIRE(ds.user_schema.size() == 2);
    REQUIRE(ds.item_schema.size() == 2);
    CHECK(ds.user_schema[0].name == "user_id");
    CHECK(ds.user_schema[0].cardinality == 2);  // alice, bob
    CHECK(ds.user_schema[1].name == "u_country");
    CHECK(ds.user_schema[1].cardinality == 2);  // us, de
    CHECK(ds.item_schema[0].cardinality == 3);  // apple, banana, carrot
    CHECK(ds.item_schema[1].cardinality == 2);  // fruit, veg
    CHECK(ds.user_vocab[0][0] == "alice");
    CHECK(ds.rows[2].user_features[0] == 0);  // alice reuses id 0
    CHECK(ds.rows[2].label == 1);
}

TEST_CASE("csv ingestion reports malformed input with line numbers") {
    CHECK_THROWS_AS(parse_csv_text("user_id,item_id\na,b\n", "x"), DataError);
    try {
        parse_csv_text("user_id,item_id,label\na,b,2\n", "x");
        CHECK(false);
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("x:2") != std::string::npos);
        CHECK(std::string(e.what()).find("non-binary") != std::string::npos);
    }
    try {
        parse_csv_text("user_id,item_id,label\na,b\n", "x");
        CHECK(false);
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("x:2") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_csv_text("user_id,item_id,label,mystery\na,b,1,c\n", "x"), DataError);
}

TEST_CASE("reparsing the same text reproduces the dataset byte for byte") {
    GenConfig gen;
    gen.users = 120;
    gen.items = 30;
    gen.clusters = 4;
    gen.impressions_per_user = 12;
    gen.seed = 5;
    const InteractionDataset ds = synthesize(gen);
    const std::string csv = ds.to_csv();
    const InteractionDataset once = parse_csv_text(csv, "a");
    const InteractionDataset twice = parse_csv_text(csv, "b");
    CHECK(once.to_csv() == twice.to_csv());
    CHECK(once.to_csv() == csv);
}

TEST_CASE("stratified split partitions the dataset exactly") {
    GenConfig gen;
    gen.users = 80;
    gen.items = 40;
    gen.clusters = 4;
    gen.impressions_per_user = 20;
    gen.seed = 11;
    const InteractionDataset ds = synthesize(gen);
    SplitSpec spec;
    spec.seed = 3;
    const SplitResult split = stratified_split(ds, spec);

    std::set<int64_t> seen;
    for (const auto* part : {&split.train, &split.valid, &split.test})
        for (int64_t idx : *part) CHECK(seen.insert(idx).second);
    CHECK(seen.size() == ds.rows.size());
}

TEST_CASE("users with enough positives get one in every split") {
    GenConfig gen;
    gen.users = 60;
    gen.items = 50;
    gen.clusters = 3;
    gen.impressions_per_user = 30;
    gen.seed = 23;
    const InteractionDataset ds = synthesize(gen);
    SplitSpec spec;
    spec.seed = 9;
    const SplitResult split = stratified_split(ds, spec);

    std::map<int64_t, int64_t> total_positives;
    for (const auto& row : ds.rows)
        if (row.label) total_positives[row.user_features[0]] += 1;

    const std::set<int64_t> flagged(split.flagged_users.begin(), split.flagged_users.end());
    for (const auto* part : {&split.train, &split.valid, &split.test}) {
        std::map<int64_t, int64_t> positives;
        for (int64_t idx : *part) {
            const auto& row = ds.rows[static_cast<size_t>(idx)];
            if (row.label) positives[row.user_features[0]] += 1;
        }
        for (const auto& [user, total] : total_positives)
            if (total >= 3 && !flagged.count(user)) CHECK(positives[user] >= 1);
    }
    // flagged users are exactly those with fewer than 3 positives
    for (const auto& [user, total] : total_positives)
        CHECK((total < 3) == (flagged.count(user) > 0));
}

TEST_CASE("a user with a single positive lands it in train and is flagged") {
    std::string csv = "user_id,item_id,label\n";
    csv += "solo,i0,1\n";
    for (int i = 1; i <= 9; ++i) csv += "solo,i" + std::to_string(i) + ",0\n";
    // a second user keeps the dataset two-class everywhere
    for (int i = 0; i < 12; ++i)
        csv += "rich,i" + std::to_string(i) + "," + (i % 2 ? "1" : "0") + "\n";
    const InteractionDataset ds = parse_csv_text(csv, "mini");
    SplitSpec spec;
    spec.seed = 1;
    const SplitResult split = stratified_split(ds, spec);

    bool found = false;
    for (int64_t idx : split.train) {
        const auto& row = ds.rows[static_cast<size_t>(idx)];
        if (ds.user_raw(row.user_features[0]) == "solo" && row.label) found = true;
    }
    CHECK(found);
    REQUIRE(split.flagged_users.size() == 1);
    CHECK(ds.user_raw(split.flagged_users[0]) == "solo");
}

TEST_CASE("split fractions hold within two points on a large synthetic set") {
    GenConfig gen;
    gen.users = 2000;
    gen.items = 200;
    gen.clusters = 8;
    gen.impressions_per_user = 50;
    gen.seed = 1;
    const InteractionDataset ds = synthesize(gen);
    for (uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        SplitSpec spec;
        spec.seed = seed;
        const SplitResult split = stratified_split(ds, spec);
        const double n = static_cast<double>(ds.rows.size());
        CHECK(std::fabs(split.train.size() / n - 0.7) < 0.02);
        CHECK(std::fabs(split.valid.size() / n - 0.1) < 0.02);
        CHECK(std::fabs(split.test.size() / n - 0.2) < 0.02);
    }
}

TEST_CASE("noiseless generation gives perfect within-cluster label agreement") {
    GenConfig gen;
    gen.users = 40;
    gen.items = 30;
    gen.clusters = 2;
    gen.impressions_per_user = 40;
    gen.noise = 0.0;
    gen.seed = 77;
    const InteractionDataset ds = synthesize(gen);
    // label must be a function of (cluster, item)
    std::map<std::pair<int64_t, int64_t>, int> seen;
    for (const auto& row : ds.rows) {
        const int64_t cluster = ds.ground_truth_cluster.at(row.user_features[0]);
        const auto key = std::make_pair(cluster, row.item_features[0]);
        const auto it = seen.find(key);
        if (it == seen.end())
            seen.emplace(key, row.label);
        else
            CHECK(it->second == row.label);
    }
}

TEST_CASE("generation is deterministic per seed and varies across seeds") {
    GenConfig gen;
    gen.users = 50;
    gen.items = 20;
    gen.clusters = 5;
    gen.impressions_per_user = 10;
    gen.seed = 42;
    const std::string a = synthesize(gen).to_csv();
    const std::string b = synthesize(gen).to_csv();
    CHECK(a == b);
    gen.seed = 43;
    CHECK(synthesize(gen).to_csv() != a);
}

TEST_CASE("single-cluster generation assigns every user to cluster zero") {
    GenConfig gen;
    gen.users = 25;
    gen.items = 10;
    gen.clusters = 1;
    gen.impressions_per_user = 4;
    gen.seed = 3;
    const InteractionDataset ds = synthesize(gen);
    for (const auto& [user, cluster] : ds.ground_truth_cluster) CHECK(cluster == 0);
}

TEST_CASE("default generator config stays inside the expected positive-rate band") {
    GenConfig gen;  // acceptance-scale defaults
    const InteractionDataset ds = synthesize(gen);
    CHECK(ds.rows.size() == static_cast<size_t>(gen.users * gen.impressions_per_user));
    double positives = 0.0;
    for (const auto& row : ds.rows) positives += row.label;
    const double rate = positives / static_cast<double>(ds.rows.size());
    CHECK(rate > 0.12);
    CHECK(rate < 0.5);
}

TEST_CASE("batch iteration covers the index set with a final short batch") {
    GenConfig gen;
    gen.users = 5;
    gen.items = 4;
    gen.clusters = 2;
    gen.impressions_per_user = 2;
    gen.seed = 2;
    const InteractionDataset ds = synthesize(gen);  // 10 rows
    std::vector<int64_t> indices(ds.rows.size());
    for (size_t i = 0; i < indices.size(); ++i) indices[i] = static_cast<int64_t>(i);

    BatchIterator it(ds, indices, 4, false, 0);
    CHECK(it.next().size() == 4);
    CHECK(it.next().size() == 4);
    CHECK(it.next().size() == 2);
    // wraps into the next epoch
    CHECK(it.next().size() == 4);
    CHECK(it.epoch() == 1);
}

TEST_CASE("batch order is reproducible per seed and reshuffles across seeds") {
    GenConfig gen;
    gen.users = 30;
    gen.items = 10;
    gen.clusters = 3;
    gen.impressions_per_user = 4;
    gen.seed = 6;
    const InteractionDataset ds = synthesize(gen);
    std::vector<int64_t> indices(ds.rows.size());
    for (size_t i = 0; i < indices.size(); ++i) indices[i] = static_cast<int64_t>(i);

    const auto first_epoch = [&](uint64_t seed) {
        BatchIterator it(ds, indices, 16, true, seed);
        std::vector<int64_t> order;
        while (order.size() < indices.size()) {
            const Batch b = it.next();
            order.insert(order.end(), b.row_indices.begin(), b.row_indices.end());
        }
        return order;
    };
    const auto a = first_epoch(5);
    CHECK(a == first_epoch(5));
    const auto b = first_epoch(6);
    CHECK(a != b);
    auto a_sorted = a, b_sorted = b;
    std::sort(a_sorted.begin(), a_sorted.end());
    std::sort(b_sorted.begin(), b_sorted.end());
    CHECK(a_sorted == b_sorted);  // same multiset of rows
}
