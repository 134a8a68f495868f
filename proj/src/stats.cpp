#include "cfa/stats.hpp"

#include <algorithm>
#include <numeric>

#include "cfa/common.hpp"

namespace cfa {

namespace {

struct ScenePartial {
    std::vector<int64_t> counts;
    std::vector<std::vector<std::pair<int, int>>> subj;
    std::vector<std::vector<std::pair<int, int>>> obj;
    std::vector<std::vector<int>> co;
};

template <class T>
void sort_unique(std::vector<T>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
}

}  // namespace

DatasetStats compute_stats(const std::vector<Scene>& scenes, const Vocabulary& vocab, Execution exec) {
    const int n_classes = vocab.n_entity_classes();
    const int n_predicates = vocab.n_predicates();

    std::vector<ScenePartial> partials(scenes.size());
    parallel_for(scenes.size(), exec, [&](size_t si) {
        const Scene& scene = scenes[si];
        ScenePartial& part = partials[si];
        part.counts.assign(static_cast<size_t>(n_predicates) + 1, 0);
        part.subj.resize(static_cast<size_t>(n_classes));
        part.obj.resize(static_cast<size_t>(n_classes));
        part.co.resize(static_cast<size_t>(n_classes));

        for (const auto& rel : scene.relations) {
            int cs = scene.entities[static_cast<size_t>(rel.sub_idx)].class_id;
            int co = scene.entities[static_cast<size_t>(rel.obj_idx)].class_id;
            part.counts[static_cast<size_t>(rel.predicate_id)] += 1;
            part.subj[static_cast<size_t>(cs)].push_back({rel.predicate_id, co});
            part.obj[static_cast<size_t>(co)].push_back({cs, rel.predicate_id});
        }

        std::vector<int> present;
        for (const auto& ent : scene.entities) present.push_back(ent.class_id);
        sort_unique(present);
        for (int c : present)
            for (int other : present)
                if (other != c) part.co[static_cast<size_t>(c)].push_back(other);
    });

    DatasetStats stats;
    stats.n_classes = n_classes;
    stats.n_predicates = n_predicates;
    stats.predicate_counts.assign(static_cast<size_t>(n_predicates) + 1, 0);
    stats.subj_patterns.resize(static_cast<size_t>(n_classes));
    stats.obj_patterns.resize(static_cast<size_t>(n_classes));
    stats.cooccur.resize(static_cast<size_t>(n_classes));

    for (const auto& part : partials) {
        for (size_t p = 1; p < part.counts.size(); ++p) stats.predicate_counts[p] += part.counts[p];
        for (int c = 0; c < n_classes; ++c) {
            auto uc = static_cast<size_t>(c);
            stats.subj_patterns[uc].insert(stats.subj_patterns[uc].end(), part.subj[uc].begin(),
                                           part.subj[uc].end());
            stats.obj_patterns[uc].insert(stats.obj_patterns[uc].end(), part.obj[uc].begin(),
                                          part.obj[uc].end());
            stats.cooccur[uc].insert(stats.cooccur[uc].end(), part.co[uc].begin(), part.co[uc].end());
        }
    }
    for (int c = 0; c < n_classes; ++c) {
        auto uc = static_cast<size_t>(c);
        sort_unique(stats.subj_patterns[uc]);
        sort_unique(stats.obj_patterns[uc]);
        sort_unique(stats.cooccur[uc]);
    }

    stats.total_relations =
        std::accumulate(stats.predicate_counts.begin(), stats.predicate_counts.end(), int64_t{0});
    if (stats.total_relations == 0)
        throw InvariantError("compute_stats requires at least one annotated relation");
    stats.frequency.assign(static_cast<size_t>(n_predicates) + 1, 0.0);
    for (int p = 1; p <= n_predicates; ++p)
        stats.frequency[static_cast<size_t>(p)] =
            static_cast<double>(stats.predicate_counts[static_cast<size_t>(p)]) /
            static_cast<double>(stats.total_relations);
    return stats;
}

FrequencyGroups split_head_body_tail(const DatasetStats& stats, double tail_quantile,
                                     double head_quantile) {
    if (!(tail_quantile > 0.0 && tail_quantile < 1.0) || !(head_quantile > 0.0 && head_quantile < 1.0))
        throw InvariantError("split quantiles must lie in (0,1)");
    if (!(tail_quantile < head_quantile))
        throw InvariantError("tail_quantile must be smaller than head_quantile");

    const int n = stats.n_predicates;
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 1);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        auto ca = stats.predicate_counts[static_cast<size_t>(a)];
        auto cb = stats.predicate_counts[static_cast<size_t>(b)];
        if (ca != cb) return ca > cb;
        return a < b;  // ties by ascending index
    });

    FrequencyGroups groups;
    for (int pos = 0; pos < n; ++pos) {
        double q = n > 1 ? static_cast<double>(pos) / static_cast<double>(n - 1) : 0.0;
        int pred = order[static_cast<size_t>(pos)];
        if (q < tail_quantile)
            groups.head.insert(pred);
        else if (q < head_quantile)
            groups.body.insert(pred);
        else
            groups.tail.insert(pred);
    }
    return groups;
}

}  // namespace cfa
