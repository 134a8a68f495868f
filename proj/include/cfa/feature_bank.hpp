#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <tuple>
#include <utility>
#include <vector>

#include "cfa/dataset.hpp"
#include "cfa/parallel.hpp"

namespace cfa {

// One stored tail-predicate triplet: subject/object/union feature vectors plus
// the subject-to-object center offset used by the spatial restriction.
struct BankEntry {
    int sub_class = -1;
    int obj_class = -1;
    int predicate_id = 0;
    std::vector<double> v_s, v_o, u;
    Vec2 p_vec{0.0, 0.0};
    std::string image_id;

    friend bool operator==(const BankEntry&, const BankEntry&) = default;
};

// Immutable after build; indexed by exact triplet key and by (sub, obj) class
// pair. Safe to share across readers.
struct FeatureBank {
    int dim = 0;
    std::set<int> tail_set;
    std::vector<BankEntry> entries;
    std::map<std::tuple<int, int, int>, std::vector<int>> by_triplet;  // (sub, pred, obj)
    std::map<std::pair<int, int>, std::vector<int>> by_pair;

    friend bool operator==(const FeatureBank&, const FeatureBank&) = default;
};

// One entry per annotated tail relation, in scene order. Scenes missing
// feature vectors make the build fail with the offending scenes listed.
FeatureBank build_bank(const std::vector<Scene>& scenes, const Vocabulary& vocab,
                       const std::set<int>& tail_set, Execution exec = Execution::parallel);

// Entries matching the key whose stored offset direction lies within the
// spatial restriction: cos(p_query, entry.p_vec) > sigma. Zero vectors never
// pass. Results are entry ids in ascending order.
std::vector<int> query_by_triplet(const FeatureBank& bank, const std::tuple<int, int, int>& key,
                                  const Vec2& p_query, double sigma);
std::vector<int> query_by_pair(const FeatureBank& bank, const std::pair<int, int>& pair,
                               const Vec2& p_query, double sigma);

// bank.bin (fixed-width records, little-endian f32 vectors) + bank.json
// manifest (tail set, per-triplet counts, image-id table).
void save_bank(const FeatureBank& bank, const std::filesystem::path& dir);
FeatureBank load_bank(const std::filesystem::path& dir);

}  // namespace cfa
