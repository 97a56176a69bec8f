#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "groupce/config.hpp"
#include "groupce/data.hpp"
#include "groupce/optim.hpp"
#include "groupce/rvq.hpp"

namespace groupce {

// Everything needed to evaluate or resume a run: config echo, feature
// schemas with vocabularies, named tensors with optimizer moments, RVQ
// state, and per-user training impression counts for cohorting.
struct Checkpoint {
    RunConfig config;
    std::vector<FeatureSpec> user_schema;
    std::vector<FeatureSpec> item_schema;
    std::vector<std::vector<std::string>> user_vocab;
    std::vector<std::vector<std::string>> item_vocab;
    ParamStore params;
    RvqState rvq;
    std::map<std::string, int64_t> train_impressions;
};

// Binary format: magic + version, then length-prefixed name/shape/data
// records (little-endian f64 payloads).
void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace groupce
