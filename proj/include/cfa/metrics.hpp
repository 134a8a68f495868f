#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "cfa/model.hpp"
#include "cfa/stats.hpp"

namespace cfa {

struct RankedTriplet {
    int sub_idx = -1;
    int obj_idx = -1;
    int predicate_id = 0;
    double confidence = 0.0;

    friend bool operator==(const RankedTriplet&, const RankedTriplet&) = default;
};

using GtTriplet = std::array<int, 3>;  // (sub_idx, obj_idx, predicate_id)

// Ranked predictions for one image. With the graph constraint each pair
// contributes its best non-background predicate; without it, every predicate
// of every pair. Confidence = predicate probability x entity confidences;
// entries are sorted by (confidence desc, sub, obj, predicate).
std::vector<RankedTriplet> rank_triplets(const ScenePrediction& pred, bool graph_constraint);

std::vector<GtTriplet> ground_truth_triplets(const Scene& scene);

// Per-image hits/GT averaged over images with at least one ground truth.
double recall_at_k(const std::vector<std::vector<RankedTriplet>>& ranked,
                   const std::vector<std::vector<GtTriplet>>& ground_truth, int k);

struct PredicateRecall {
    int64_t gt = 0;
    int64_t hits = 0;
    double recall() const { return gt > 0 ? static_cast<double>(hits) / static_cast<double>(gt) : 0.0; }
};

// Per-predicate recall pools a predicate's ground truth across images; the
// mean runs over predicates with at least one ground-truth instance.
double mean_recall_at_k(const std::vector<std::vector<RankedTriplet>>& ranked,
                        const std::vector<std::vector<GtTriplet>>& ground_truth, int k,
                        std::map<int, PredicateRecall>* per_predicate = nullptr);

// Arithmetic mean of the reported R@K / mR@K values.
double mean_metric(const std::vector<double>& values);

struct GroupMeans {
    std::optional<double> head, body, tail;
};

GroupMeans group_report(const std::map<int, PredicateRecall>& per_predicate,
                        const FrequencyGroups& groups);

}  // namespace cfa
