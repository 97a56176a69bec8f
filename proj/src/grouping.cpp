#include "groupce/grouping.hpp"

#include <map>
#include <sstream>

#include "groupce/error.hpp"

namespace groupce {

std::vector<GroupPartition> build_partitions(const std::vector<HierCode>& codes) {
    std::vector<GroupPartition> partitions;
    if (codes.empty()) return partitions;
    const size_t levels = codes.front().size();
    for (const auto& c : codes)
        if (c.size() != levels) throw ShapeError("build_partitions: ragged code lengths");

    for (size_t l = 1; l <= levels; ++l) {
        // std::map over prefix vectors gives the lexicographic group order.
        std::map<std::vector<int>, std::vector<int>> by_prefix;
        for (size_t r = 0; r < codes.size(); ++r) {
            std::vector<int> prefix(codes[r].begin(), codes[r].begin() + static_cast<long>(l));
            by_prefix[std::move(prefix)].push_back(static_cast<int>(r));
        }
        GroupPartition part;
        part.level = static_cast<int>(l);
        for (auto& [prefix, members] : by_prefix) {
            part.prefix_of_group.push_back(prefix);
            part.groups.push_back(std::move(members));
        }
        partitions.push_back(std::move(part));
    }
    return partitions;
}

bool refinement_check(const std::vector<GroupPartition>& partitions) {
    for (size_t l = 0; l + 1 < partitions.size(); ++l) {
        // row -> coarse group id
        std::map<int, int> coarse_of_row;
        for (size_t g = 0; g < partitions[l].groups.size(); ++g)
            for (int row : partitions[l].groups[g]) coarse_of_row[row] = static_cast<int>(g);
        for (const auto& fine_group : partitions[l + 1].groups) {
            if (fine_group.empty()) continue;
            auto first = coarse_of_row.find(fine_group.front());
            if (first == coarse_of_row.end()) return false;
            for (int row : fine_group) {
                auto it = coarse_of_row.find(row);
                if (it == coarse_of_row.end() || it->second != first->second) return false;
            }
        }
    }
    return true;
}

std::string dump_group_sizes(const std::vector<GroupPartition>& partitions) {
    std::ostringstream os;
    for (const auto& part : partitions) {
        os << "level " << part.level << ": " << part.groups.size() << " groups, sizes";
        for (const auto& g : part.groups) os << ' ' << g.size();
        os << '\n';
    }
    return os.str();
}

}  // namespace groupce
