#include "cfa/clustering.hpp"

#include <algorithm>
#include <limits>

#include "cfa/common.hpp"

namespace cfa {

std::vector<std::vector<int>> ClusterAssignment::members() const {
    std::vector<std::vector<int>> out(static_cast<size_t>(k));
    for (size_t c = 0; c < assignment.size(); ++c)
        out[static_cast<size_t>(assignment[c])].push_back(static_cast<int>(c));
    return out;
}

ClusterAssignment cluster_entities(const SimilarityMatrix& sim, int k, std::vector<MergeStep>* merge_log) {
    const int n = sim.n;
    if (n < 1) throw InvariantError("cluster_entities: empty similarity matrix");
    if (k < 1 || k > n)
        throw InvariantError("cluster_entities: k=" + std::to_string(k) + " outside [1," +
                             std::to_string(n) + "]");
    if (sim.kind != SimKind::combined)
        throw InvariantError("cluster_entities expects a combined similarity matrix");

    // Clusters as sorted member lists; the first member is the tie-break key.
    std::vector<std::vector<int>> clusters(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) clusters[static_cast<size_t>(i)] = {i};

    auto average_dissimilarity = [&](const std::vector<int>& a, const std::vector<int>& b) {
        double sum = 0.0;
        for (int x : a)
            for (int y : b) sum += 1.0 - sim.at(x, y);
        return sum / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
    };

    while (static_cast<int>(clusters.size()) > k) {
        size_t best_a = 0, best_b = 1;
        double best = std::numeric_limits<double>::infinity();
        for (size_t a = 0; a + 1 < clusters.size(); ++a) {
            for (size_t b = a + 1; b < clusters.size(); ++b) {
                double d = average_dissimilarity(clusters[a], clusters[b]);
                // Clusters stay ordered by smallest member, so (a, b) scan
                // order realizes the (min A, min B) tie-break.
                if (d < best) {
                    best = d;
                    best_a = a;
                    best_b = b;
                }
            }
        }
        if (merge_log)
            merge_log->push_back({clusters[best_a].front(), clusters[best_b].front(), best});
        std::vector<int> merged;
        merged.reserve(clusters[best_a].size() + clusters[best_b].size());
        std::merge(clusters[best_a].begin(), clusters[best_a].end(), clusters[best_b].begin(),
                   clusters[best_b].end(), std::back_inserter(merged));
        clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(best_b));
        clusters[best_a] = std::move(merged);
        // Keep the cluster list ordered by smallest member.
        std::sort(clusters.begin(), clusters.end(),
                  [](const auto& x, const auto& y) { return x.front() < y.front(); });
    }

    ClusterAssignment result;
    result.k = k;
    result.assignment.assign(static_cast<size_t>(n), -1);
    for (size_t cid = 0; cid < clusters.size(); ++cid)
        for (int member : clusters[cid]) result.assignment[static_cast<size_t>(member)] = static_cast<int>(cid);
    return result;
}

}  // namespace cfa
