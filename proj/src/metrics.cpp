#include "cfa/metrics.hpp"

#include <algorithm>
#include <set>

#include "cfa/common.hpp"

namespace cfa {

namespace {

bool ranked_before(const RankedTriplet& a, const RankedTriplet& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    if (a.sub_idx != b.sub_idx) return a.sub_idx < b.sub_idx;
    if (a.obj_idx != b.obj_idx) return a.obj_idx < b.obj_idx;
    return a.predicate_id < b.predicate_id;
}

}  // namespace

std::vector<RankedTriplet> rank_triplets(const ScenePrediction& pred, bool graph_constraint) {
    std::vector<RankedTriplet> out;
    for (const auto& pair : pred.pairs) {
        double ent_conf = pred.entity_conf[static_cast<size_t>(pair.sub_idx)] *
                          pred.entity_conf[static_cast<size_t>(pair.obj_idx)];
        if (graph_constraint) {
            int best = -1;
            for (size_t p = 1; p < pair.probs.size(); ++p)
                if (best < 0 || pair.probs[p] > pair.probs[static_cast<size_t>(best)])
                    best = static_cast<int>(p);
            if (best >= 0)
                out.push_back({pair.sub_idx, pair.obj_idx, best,
                               pair.probs[static_cast<size_t>(best)] * ent_conf});
        } else {
            for (size_t p = 1; p < pair.probs.size(); ++p)
                out.push_back({pair.sub_idx, pair.obj_idx, static_cast<int>(p), pair.probs[p] * ent_conf});
        }
    }
    std::sort(out.begin(), out.end(), ranked_before);
    return out;
}

std::vector<GtTriplet> ground_truth_triplets(const Scene& scene) {
    std::vector<GtTriplet> out;
    out.reserve(scene.relations.size());
    for (const auto& rel : scene.relations) out.push_back({rel.sub_idx, rel.obj_idx, rel.predicate_id});
    return out;
}

double recall_at_k(const std::vector<std::vector<RankedTriplet>>& ranked,
                   const std::vector<std::vector<GtTriplet>>& ground_truth, int k) {
    if (k < 1) throw InvariantError("recall_at_k: k must be >= 1");
    if (ranked.size() != ground_truth.size())
        throw InvariantError("recall_at_k: image count mismatch");
    double sum = 0.0;
    int64_t images = 0;
    for (size_t img = 0; img < ranked.size(); ++img) {
        const auto& gt = ground_truth[img];
        if (gt.empty()) continue;
        std::set<GtTriplet> gt_set(gt.begin(), gt.end());
        int64_t hits = 0;
        const auto& list = ranked[img];
        const size_t top = std::min<size_t>(static_cast<size_t>(k), list.size());
        for (size_t i = 0; i < top; ++i)
            if (gt_set.count({list[i].sub_idx, list[i].obj_idx, list[i].predicate_id})) ++hits;
        sum += static_cast<double>(hits) / static_cast<double>(gt.size());
        ++images;
    }
    if (images == 0) throw InvariantError("recall_at_k: no ground-truth relations in any image");
    return sum / static_cast<double>(images);
}

double mean_recall_at_k(const std::vector<std::vector<RankedTriplet>>& ranked,
                        const std::vector<std::vector<GtTriplet>>& ground_truth, int k,
                        std::map<int, PredicateRecall>* per_predicate) {
    if (k < 1) throw InvariantError("mean_recall_at_k: k must be >= 1");
    if (ranked.size() != ground_truth.size())
        throw InvariantError("mean_recall_at_k: image count mismatch");
    std::map<int, PredicateRecall> acc;
    int64_t total_gt = 0;
    for (size_t img = 0; img < ranked.size(); ++img) {
        const auto& gt = ground_truth[img];
        total_gt += static_cast<int64_t>(gt.size());
        std::set<GtTriplet> gt_set(gt.begin(), gt.end());
        for (const auto& t : gt) acc[t[2]].gt += 1;
        const auto& list = ranked[img];
        const size_t top = std::min<size_t>(static_cast<size_t>(k), list.size());
        for (size_t i = 0; i < top; ++i) {
            GtTriplet t{list[i].sub_idx, list[i].obj_idx, list[i].predicate_id};
            if (gt_set.count(t)) acc[t[2]].hits += 1;
        }
    }
    if (total_gt == 0) throw InvariantError("mean_recall_at_k: no ground-truth relations in any image");
    double sum = 0.0;
    for (const auto& [pred, pr] : acc) sum += pr.recall();
    if (per_predicate) *per_predicate = acc;
    return sum / static_cast<double>(acc.size());
}

double mean_metric(const std::vector<double>& values) {
    if (values.empty()) throw InvariantError("mean_metric: empty input");
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

GroupMeans group_report(const std::map<int, PredicateRecall>& per_predicate,
                        const FrequencyGroups& groups) {
    auto mean_over = [&](const std::set<int>& members) -> std::optional<double> {
        double sum = 0.0;
        int64_t count = 0;
        for (int p : members) {
            auto it = per_predicate.find(p);
            if (it == per_predicate.end() || it->second.gt == 0) continue;
            sum += it->second.recall();
            ++count;
        }
        if (count == 0) return std::nullopt;
        return sum / static_cast<double>(count);
    };
    return {mean_over(groups.head), mean_over(groups.body), mean_over(groups.tail)};
}

}  // namespace cfa
