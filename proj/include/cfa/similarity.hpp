#pragma once

#include <string>
#include <vector>

#include "cfa/parallel.hpp"
#include "cfa/stats.hpp"

namespace cfa {

struct SimilarityWeights {
    double pattern = 1.0 / 3.0;
    double context = 1.0 / 3.0;
    double semantic = 1.0 / 3.0;

    void validate() const;
};

enum class SimKind { pattern, context, semantic_distance, combined };

struct SimilarityMatrix {
    int n = 0;
    SimKind kind = SimKind::combined;
    std::vector<double> values;  // row-major n*n

    double at(int i, int j) const { return values[static_cast<size_t>(i) * static_cast<size_t>(n) + static_cast<size_t>(j)]; }
    double& at(int i, int j) { return values[static_cast<size_t>(i) * static_cast<size_t>(n) + static_cast<size_t>(j)]; }

    friend bool operator==(const SimilarityMatrix&, const SimilarityMatrix&) = default;
};

// Behavior-pattern overlap of two entity classes: the sum of a Jaccard index
// over subject patterns and one over object patterns. Each term is 0 when its
// denominator is 0, so the value lies in [0, 2].
double pattern_similarity(const DatasetStats& stats, int c_i, int c_j);

// Jaccard overlap of the co-occurring entity-class sets, in [0, 1].
double context_similarity(const DatasetStats& stats, int c_i, int c_j);

// Euclidean distance between class embeddings (a distance, not a similarity;
// it is flipped inside combined_similarity).
double semantic_similarity(const std::vector<std::vector<double>>& embeddings, int c_i, int c_j);

SimilarityMatrix pattern_matrix(const DatasetStats& stats, Execution exec = Execution::parallel);
SimilarityMatrix context_matrix(const DatasetStats& stats, Execution exec = Execution::parallel);
SimilarityMatrix semantic_distance_matrix(const std::vector<std::vector<double>>& embeddings,
                                          Execution exec = Execution::parallel);

// Min-max normalizes each component over its off-diagonal entries, flips the
// semantic distance to a similarity, and mixes with the given weights. A
// constant component normalizes to all-zeros and appends a warning. The
// diagonal of the result is fixed at 1.
SimilarityMatrix combined_similarity(const DatasetStats& stats,
                                     const std::vector<std::vector<double>>& embeddings,
                                     const SimilarityWeights& weights,
                                     Execution exec = Execution::parallel,
                                     std::vector<std::string>* warnings = nullptr);

}  // namespace cfa
