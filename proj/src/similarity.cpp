#include "cfa/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cfa/common.hpp"

namespace cfa {

namespace {

template <class T>
size_t intersection_size(const std::vector<T>& a, const std::vector<T>& b) {
    size_t ia = 0, ib = 0, count = 0;
    while (ia < a.size() && ib < b.size()) {
        if (a[ia] < b[ib])
            ++ia;
        else if (b[ib] < a[ia])
            ++ib;
        else {
            ++count;
            ++ia;
            ++ib;
        }
    }
    return count;
}

// Jaccard via |A∩B| / (|A| + |B| - |A∩B|); 0 when both sets are empty.
double jaccard_term(size_t inter, size_t da, size_t db) {
    double denom = static_cast<double>(da) + static_cast<double>(db) - static_cast<double>(inter);
    if (denom == 0.0) return 0.0;
    return static_cast<double>(inter) / denom;
}

void check_class(const DatasetStats& stats, int c) {
    if (c < 0 || c >= stats.n_classes)
        throw InvariantError("entity class index out of range: " + std::to_string(c));
}

template <class F>
SimilarityMatrix fill_matrix(int n, SimKind kind, Execution exec, F&& entry) {
    SimilarityMatrix m;
    m.n = n;
    m.kind = kind;
    m.values.assign(static_cast<size_t>(n) * static_cast<size_t>(n), 0.0);
    parallel_for(static_cast<size_t>(n), exec, [&](size_t i) {
        for (int j = 0; j < n; ++j) m.at(static_cast<int>(i), j) = entry(static_cast<int>(i), j);
    });
    return m;
}

// Min-max over off-diagonal entries; constant matrices map to all-zeros.
// Returns false when the matrix was constant.
bool normalize_off_diagonal(SimilarityMatrix& m) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < m.n; ++i)
        for (int j = 0; j < m.n; ++j)
            if (i != j) {
                lo = std::min(lo, m.at(i, j));
                hi = std::max(hi, m.at(i, j));
            }
    if (!(hi > lo)) {
        for (int i = 0; i < m.n; ++i)
            for (int j = 0; j < m.n; ++j)
                if (i != j) m.at(i, j) = 0.0;
        return false;
    }
    double scale = 1.0 / (hi - lo);
    for (int i = 0; i < m.n; ++i)
        for (int j = 0; j < m.n; ++j)
            if (i != j) m.at(i, j) = (m.at(i, j) - lo) * scale;
    return true;
}

}  // namespace

void SimilarityWeights::validate() const {
    if (pattern < 0 || context < 0 || semantic < 0)
        throw InvariantError("similarity weights must be nonnegative");
    double sum = pattern + context + semantic;
    if (std::abs(sum - 1.0) > 1e-9)
        throw InvariantError("similarity weights must sum to 1 (got " + std::to_string(sum) + ")");
}

double pattern_similarity(const DatasetStats& stats, int c_i, int c_j) {
    check_class(stats, c_i);
    check_class(stats, c_j);
    const auto& si = stats.subj_patterns[static_cast<size_t>(c_i)];
    const auto& sj = stats.subj_patterns[static_cast<size_t>(c_j)];
    const auto& oi = stats.obj_patterns[static_cast<size_t>(c_i)];
    const auto& oj = stats.obj_patterns[static_cast<size_t>(c_j)];
    double subject_term = jaccard_term(intersection_size(si, sj), si.size(), sj.size());
    double object_term = jaccard_term(intersection_size(oi, oj), oi.size(), oj.size());
    return subject_term + object_term;
}

double context_similarity(const DatasetStats& stats, int c_i, int c_j) {
    check_class(stats, c_i);
    check_class(stats, c_j);
    const auto& ci = stats.cooccur[static_cast<size_t>(c_i)];
    const auto& cj = stats.cooccur[static_cast<size_t>(c_j)];
    return jaccard_term(intersection_size(ci, cj), ci.size(), cj.size());
}

double semantic_similarity(const std::vector<std::vector<double>>& embeddings, int c_i, int c_j) {
    if (c_i < 0 || static_cast<size_t>(c_i) >= embeddings.size() || embeddings[static_cast<size_t>(c_i)].empty())
        throw MissingInputError("no embedding for entity class " + std::to_string(c_i));
    if (c_j < 0 || static_cast<size_t>(c_j) >= embeddings.size() || embeddings[static_cast<size_t>(c_j)].empty())
        throw MissingInputError("no embedding for entity class " + std::to_string(c_j));
    const auto& a = embeddings[static_cast<size_t>(c_i)];
    const auto& b = embeddings[static_cast<size_t>(c_j)];
    if (a.size() != b.size()) throw InvariantError("embedding dimension mismatch");
    double sum = 0.0;
    for (size_t d = 0; d < a.size(); ++d) {
        double diff = a[d] - b[d];
        sum += diff * diff;
    }
    return std::sqrt(sum);
}

SimilarityMatrix pattern_matrix(const DatasetStats& stats, Execution exec) {
    return fill_matrix(stats.n_classes, SimKind::pattern, exec,
                       [&](int i, int j) { return pattern_similarity(stats, i, j); });
}

SimilarityMatrix context_matrix(const DatasetStats& stats, Execution exec) {
    return fill_matrix(stats.n_classes, SimKind::context, exec,
                       [&](int i, int j) { return context_similarity(stats, i, j); });
}

SimilarityMatrix semantic_distance_matrix(const std::vector<std::vector<double>>& embeddings,
                                          Execution exec) {
    auto m = fill_matrix(static_cast<int>(embeddings.size()), SimKind::semantic_distance, exec,
                         [&](int i, int j) { return i == j ? 0.0 : semantic_similarity(embeddings, i, j); });
    return m;
}

SimilarityMatrix combined_similarity(const DatasetStats& stats,
                                     const std::vector<std::vector<double>>& embeddings,
                                     const SimilarityWeights& weights, Execution exec,
                                     std::vector<std::string>* warnings) {
    weights.validate();
    if (static_cast<int>(embeddings.size()) != stats.n_classes)
        throw InvariantError("embeddings count does not match entity class count");

    SimilarityMatrix pat = pattern_matrix(stats, exec);
    SimilarityMatrix ctx = context_matrix(stats, exec);
    SimilarityMatrix sem = semantic_distance_matrix(embeddings, exec);

    auto warn = [&](const char* which) {
        if (warnings) warnings->push_back(std::string(which) + " similarity is constant; component zeroed");
    };
    if (!normalize_off_diagonal(pat)) warn("pattern");
    if (!normalize_off_diagonal(ctx)) warn("context");
    bool sem_ok = normalize_off_diagonal(sem);
    if (!sem_ok) warn("semantic");

    SimilarityMatrix out;
    out.n = stats.n_classes;
    out.kind = SimKind::combined;
    out.values.assign(static_cast<size_t>(out.n) * static_cast<size_t>(out.n), 0.0);
    parallel_for(static_cast<size_t>(out.n), exec, [&](size_t ui) {
        int i = static_cast<int>(ui);
        for (int j = 0; j < out.n; ++j) {
            if (i == j) {
                out.at(i, j) = 1.0;
                continue;
            }
            double semantic_sim = sem_ok ? 1.0 - sem.at(i, j) : 0.0;
            out.at(i, j) = weights.pattern * pat.at(i, j) + weights.context * ctx.at(i, j) +
                           weights.semantic * semantic_sim;
        }
    });
    return out;
}

}  // namespace cfa
