#pragma once

#include <cstdint>
#include <set>
#include <utility>
#include <vector>

#include "cfa/dataset.hpp"
#include "cfa/parallel.hpp"

namespace cfa {

// Dataset-wide statistics feeding the similarity measures and the sampler.
// subj_patterns[c] holds the distinct (predicate, object-class) pairs where c
// appears as subject; obj_patterns[c] the distinct (subject-class, predicate)
// pairs where c appears as object; cooccur[c] the distinct *other* classes
// sharing at least one image with c. All per-class lists are sorted and
// duplicate-free so set intersections are cheap.
struct DatasetStats {
    int n_classes = 0;
    int n_predicates = 0;                      // annotated predicates, indices 1..P
    std::vector<int64_t> predicate_counts;     // size P+1, slot 0 unused
    std::vector<double> frequency;             // f_r, size P+1, slot 0 = 0
    int64_t total_relations = 0;
    std::vector<std::vector<std::pair<int, int>>> subj_patterns;
    std::vector<std::vector<std::pair<int, int>>> obj_patterns;
    std::vector<std::vector<int>> cooccur;

    friend bool operator==(const DatasetStats&, const DatasetStats&) = default;
};

// Single pass over the scenes; per-scene partials are merged in scene order so
// the parallel path is bitwise-identical to the serial one.
DatasetStats compute_stats(const std::vector<Scene>& scenes, const Vocabulary& vocab,
                           Execution exec = Execution::parallel);

struct FrequencyGroups {
    std::set<int> head, body, tail;

    friend bool operator==(const FrequencyGroups&, const FrequencyGroups&) = default;
};

// Splits predicate indices into head/body/tail by rank quantile: predicates
// are sorted by count descending (ties by ascending index) and the position
// quantile pos/(P-1) is compared against the two thresholds. A single
// predicate is head by convention.
FrequencyGroups split_head_body_tail(const DatasetStats& stats, double tail_quantile = 0.5,
                                     double head_quantile = 0.9);

}  // namespace cfa
