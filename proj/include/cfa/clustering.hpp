#pragma once

#include <vector>

#include "cfa/similarity.hpp"

namespace cfa {

struct ClusterAssignment {
    int k = 0;
    std::vector<int> assignment;  // per entity class, cluster id in 0..k-1

    // Member lists per cluster id, each sorted ascending.
    std::vector<std::vector<int>> members() const;

    friend bool operator==(const ClusterAssignment&, const ClusterAssignment&) = default;
};

struct MergeStep {
    int a_min = 0;  // smallest class index in the first merged cluster
    int b_min = 0;
    double dissimilarity = 0.0;
};

// Agglomerative clustering with average linkage on dissimilarity 1 - sim,
// stopping at k clusters. Merge ties are broken by the smallest (min index of
// A, min index of B) pair, and final cluster ids are ordered by smallest
// member, so the result is fully deterministic.
ClusterAssignment cluster_entities(const SimilarityMatrix& sim, int k,
                                   std::vector<MergeStep>* merge_log = nullptr);

}  // namespace cfa
