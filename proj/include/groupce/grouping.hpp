#pragma once

#include <string>
#include <vector>

namespace groupce {

// Per-user sequence of code indices, shallow to deep.
using HierCode = std::vector<int>;

// Partition of batch rows at one trie level: rows sharing the length-l code
// prefix form one group. Groups are ordered lexicographically by prefix.
struct GroupPartition {
    int level = 0;  // 1-based prefix length
    std::vector<std::vector<int>> groups;           // member row indices
    std::vector<std::vector<int>> prefix_of_group;  // shared prefix per group
};

// One partition per level l = 1..L. Groups are keyed by exact prefix tuple;
// singleton groups are kept.
std::vector<GroupPartition> build_partitions(const std::vector<HierCode>& codes);

// True iff every level-(l+1) group is contained in exactly one level-l group.
bool refinement_check(const std::vector<GroupPartition>& partitions);

// Text block with group-size histograms per level, for diagnostics.
std::string dump_group_sizes(const std::vector<GroupPartition>& partitions);

}  // namespace groupce
