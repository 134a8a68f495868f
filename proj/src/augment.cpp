#include "cfa/augment.hpp"

#include <algorithm>
#include <cmath>

#include "cfa/common.hpp"

namespace cfa {

void SamplerConfig::validate() const {
    if (!(lambda > 0.0)) throw InvariantError("sampler lambda must be positive");
    if (gamma < 0.0 || gamma > 1.0) throw InvariantError("sampler gamma must lie in [0,1]");
    if (bg_rate < 0.0 || bg_rate > 1.0) throw InvariantError("sampler bg_rate must lie in [0,1]");
}

void AugmentConfig::validate() const {
    if (theta < 0.0 || theta > 1.0) throw InvariantError("augment theta must lie in [0,1]");
    if (sigma < -1.0 || sigma > 1.0) throw InvariantError("augment sigma must lie in [-1,1]");
}

PredicateTarget PredicateTarget::mixed(int a, int b, double theta) {
    if (theta >= 1.0 || a == b) return onehot(a);
    if (theta <= 0.0) return onehot(b);
    return {a, theta, b, 1.0 - theta};
}

std::vector<double> PredicateTarget::dense(int n_classes) const {
    std::vector<double> out(static_cast<size_t>(n_classes), 0.0);
    out[static_cast<size_t>(first)] = first_w;
    if (second >= 0) out[static_cast<size_t>(second)] = second_w;
    return out;
}

RepeatFactor repeat_factor(double f_r, double lambda) {
    if (!(f_r > 0.0)) throw InvariantError("repeat_factor requires f_r > 0");
    if (!(lambda > 0.0)) throw InvariantError("repeat_factor requires lambda > 0");
    RepeatFactor rf;
    rf.eta_r = std::sqrt(lambda / f_r);
    rf.eta = std::max(1.0, rf.eta_r);
    return rf;
}

double scene_repeat_factor(const Scene& scene, const DatasetStats& stats, double lambda) {
    double eta = 1.0;
    for (const auto& rel : scene.relations)
        eta = std::max(eta, repeat_factor(stats.frequency[static_cast<size_t>(rel.predicate_id)], lambda).eta);
    return eta;
}

std::vector<int> build_epoch(const std::vector<Scene>& scenes, const DatasetStats& stats,
                             const SamplerConfig& config) {
    config.validate();
    Rng rng(mix_seed({config.seed, 0x65706f63ull}));
    std::vector<int> epoch;
    for (size_t si = 0; si < scenes.size(); ++si) {
        double eta = scene_repeat_factor(scenes[si], stats, config.lambda);
        double floor_part = std::floor(eta);
        auto copies = static_cast<int>(floor_part);
        double frac = eta - floor_part;
        if (frac > 0.0 && rng.bernoulli(frac)) ++copies;
        for (int c = 0; c < copies; ++c) epoch.push_back(static_cast<int>(si));
    }
    // Fisher-Yates with the same stream.
    for (size_t i = epoch.size(); i > 1; --i) {
        size_t j = static_cast<size_t>(rng.uniform_int(i));
        std::swap(epoch[i - 1], epoch[j]);
    }
    return epoch;
}

double fg_context_probability(double eta, double eta_r, double gamma) {
    if (!(eta >= 1.0)) throw InvariantError("fg_context_probability requires eta >= 1");
    return (eta - eta_r) / eta * gamma;
}

SceneView SceneView::from_scene(const Scene& scene) {
    SceneView view;
    view.scene = &scene;
    view.class_ids.reserve(scene.entities.size());
    view.features.reserve(scene.entities.size());
    for (const auto& ent : scene.entities) {
        view.class_ids.push_back(ent.class_id);
        view.features.push_back(ent.feature);
    }
    const int n = static_cast<int>(scene.entities.size());
    std::vector<int> rel_of_pair(static_cast<size_t>(n) * static_cast<size_t>(n), -1);
    for (size_t ri = 0; ri < scene.relations.size(); ++ri) {
        const auto& rel = scene.relations[ri];
        rel_of_pair[static_cast<size_t>(rel.sub_idx) * static_cast<size_t>(n) +
                    static_cast<size_t>(rel.obj_idx)] = static_cast<int>(ri);
    }
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            PairSlot slot;
            slot.sub_idx = i;
            slot.obj_idx = j;
            int ri = rel_of_pair[static_cast<size_t>(i) * static_cast<size_t>(n) + static_cast<size_t>(j)];
            if (ri >= 0) {
                const auto& rel = scene.relations[static_cast<size_t>(ri)];
                slot.u = rel.union_feature;
                slot.target = PredicateTarget::onehot(rel.predicate_id);
                slot.annotated = true;
                slot.relation_idx = ri;
            } else {
                slot.target = PredicateTarget::onehot(0);
            }
            view.pairs.push_back(std::move(slot));
        }
    }
    return view;
}

int SceneView::pair_slot(int sub_idx, int obj_idx) const {
    const int n = static_cast<int>(class_ids.size());
    // Pairs are laid out lexicographically with the diagonal skipped.
    int idx = sub_idx * (n - 1) + obj_idx - (obj_idx > sub_idx ? 1 : 0);
    return idx;
}

std::vector<double> SceneView::pair_union(int slot) const {
    const PairSlot& p = pairs[static_cast<size_t>(slot)];
    if (!p.u.empty()) return p.u;
    const auto& a = features[static_cast<size_t>(p.sub_idx)];
    const auto& b = features[static_cast<size_t>(p.obj_idx)];
    std::vector<double> out(a.size());
    for (size_t d = 0; d < a.size(); ++d) out[d] = 0.5 * (a[d] + b[d]);
    return out;
}

AugmentCounters& AugmentCounters::operator+=(const AugmentCounters& o) {
    intrinsic_attempts += o.intrinsic_attempts;
    intrinsic_fired += o.intrinsic_fired;
    intrinsic_no_alternative += o.intrinsic_no_alternative;
    intrinsic_misses += o.intrinsic_misses;
    extrinsic_fg_attempts += o.extrinsic_fg_attempts;
    extrinsic_fg_fired += o.extrinsic_fg_fired;
    extrinsic_fg_misses += o.extrinsic_fg_misses;
    extrinsic_bg_attempts += o.extrinsic_bg_attempts;
    extrinsic_bg_fired += o.extrinsic_bg_fired;
    extrinsic_bg_misses += o.extrinsic_bg_misses;
    return *this;
}

std::vector<ContextCandidate> select_context_triplets(const SceneView& view, const DatasetStats& stats,
                                                      const SamplerConfig& sampler,
                                                      const FeatureBank& bank, Rng& rng) {
    sampler.validate();
    const Scene& scene = *view.scene;
    std::vector<ContextCandidate> out;

    for (size_t ri = 0; ri < scene.relations.size(); ++ri) {
        const auto& rel = scene.relations[ri];
        auto rf = repeat_factor(stats.frequency[static_cast<size_t>(rel.predicate_id)], sampler.lambda);
        double p = fg_context_probability(rf.eta, rf.eta_r, sampler.gamma);
        if (p > 0.0 && rng.bernoulli(p))
            out.push_back({rel.sub_idx, rel.obj_idx, ContextKind::fg, static_cast<int>(ri)});
    }

    if (sampler.bg_rate > 0.0) {
        for (const auto& slot : view.pairs) {
            if (slot.annotated) continue;
            std::pair<int, int> class_pair{view.class_ids[static_cast<size_t>(slot.sub_idx)],
                                           view.class_ids[static_cast<size_t>(slot.obj_idx)]};
            auto it = bank.by_pair.find(class_pair);
            if (it == bank.by_pair.end() || it->second.empty()) continue;
            if (rng.bernoulli(sampler.bg_rate))
                out.push_back({slot.sub_idx, slot.obj_idx, ContextKind::bg, -1});
        }
    }
    return out;
}

std::optional<AugmentedSample> intrinsic_augment(const SceneView& view, int relation_idx,
                                                 const FeatureBank& bank,
                                                 const ClusterAssignment& clusters,
                                                 const AugmentConfig& config, Rng& rng,
                                                 AugmentCounters* counters) {
    config.validate();
    const Scene& scene = *view.scene;
    const Relation& rel = scene.relations[static_cast<size_t>(relation_idx)];
    if (!bank.tail_set.count(rel.predicate_id))
        throw InvariantError("intrinsic_augment: query predicate " + std::to_string(rel.predicate_id) +
                             " is not in the tail set");
    AugmentCounters local;
    local.intrinsic_attempts = 1;

    const int role = static_cast<int>(rng.uniform_int(2));  // 0 = subject, 1 = object
    const int role_entity = role == 0 ? rel.sub_idx : rel.obj_idx;
    const int orig_class = view.class_ids[static_cast<size_t>(role_entity)];

    const int cluster_id = clusters.assignment[static_cast<size_t>(orig_class)];
    std::vector<int> alternatives;
    for (size_t c = 0; c < clusters.assignment.size(); ++c)
        if (clusters.assignment[c] == cluster_id && static_cast<int>(c) != orig_class)
            alternatives.push_back(static_cast<int>(c));
    if (alternatives.empty()) {
        local.intrinsic_no_alternative = 1;
        if (counters) *counters += local;
        return std::nullopt;
    }
    const int replacement = alternatives[rng.uniform_int(alternatives.size())];

    const int sub_class = role == 0 ? replacement : view.class_ids[static_cast<size_t>(rel.sub_idx)];
    const int obj_class = role == 1 ? replacement : view.class_ids[static_cast<size_t>(rel.obj_idx)];
    const Vec2 p_query = scene.pair_spatial(rel.sub_idx, rel.obj_idx);
    auto candidates =
        query_by_triplet(bank, {sub_class, rel.predicate_id, obj_class}, p_query, config.sigma);
    if (candidates.empty()) {
        local.intrinsic_misses = 1;
        if (counters) *counters += local;
        return std::nullopt;
    }
    const int pick = candidates[rng.uniform_int(candidates.size())];
    const BankEntry& entry = bank.entries[static_cast<size_t>(pick)];

    AugmentedSample sample;
    sample.scene_ref = scene.image_id;
    sample.sub_idx = rel.sub_idx;
    sample.obj_idx = rel.obj_idx;
    sample.v_s = role == 0 ? entry.v_s : view.features[static_cast<size_t>(rel.sub_idx)];
    sample.v_o = role == 1 ? entry.v_o : view.features[static_cast<size_t>(rel.obj_idx)];
    sample.u = view.pair_union(view.pair_slot(rel.sub_idx, rel.obj_idx));
    sample.sub_target = sub_class;
    sample.obj_target = obj_class;
    sample.predicate_target = PredicateTarget::onehot(rel.predicate_id);
    sample.provenance = "intrinsic";
    sample.bank_entry = pick;
    sample.replaced_role = role;
    sample.replacement_class = replacement;

    local.intrinsic_fired = 1;
    if (counters) *counters += local;
    return sample;
}

std::optional<AugmentedSample> extrinsic_augment(const SceneView& view, const ContextCandidate& context,
                                                 const FeatureBank& bank, const AugmentConfig& config,
                                                 Rng& rng, AugmentCounters* counters) {
    config.validate();
    const Scene& scene = *view.scene;
    const bool is_fg = context.kind == ContextKind::fg;
    AugmentCounters local;
    (is_fg ? local.extrinsic_fg_attempts : local.extrinsic_bg_attempts) = 1;

    const int sub_class = view.class_ids[static_cast<size_t>(context.sub_idx)];
    const int obj_class = view.class_ids[static_cast<size_t>(context.obj_idx)];
    const Vec2 p_query = scene.pair_spatial(context.sub_idx, context.obj_idx);
    auto candidates = query_by_pair(bank, {sub_class, obj_class}, p_query, config.sigma);
    if (candidates.empty()) {
        (is_fg ? local.extrinsic_fg_misses : local.extrinsic_bg_misses) = 1;
        if (counters) *counters += local;
        return std::nullopt;
    }
    const int pick = candidates[rng.uniform_int(candidates.size())];
    const BankEntry& entry = bank.entries[static_cast<size_t>(pick)];

    const int slot = view.pair_slot(context.sub_idx, context.obj_idx);
    const int context_predicate =
        is_fg ? scene.relations[static_cast<size_t>(context.relation_idx)].predicate_id : 0;
    const auto& v_s = view.features[static_cast<size_t>(context.sub_idx)];
    const auto& v_o = view.features[static_cast<size_t>(context.obj_idx)];
    const std::vector<double> u = view.pair_union(slot);

    AugmentedSample sample;
    sample.scene_ref = scene.image_id;
    sample.sub_idx = context.sub_idx;
    sample.obj_idx = context.obj_idx;
    sample.v_s = mix_features(v_s, entry.v_s, config.theta);
    sample.v_o = mix_features(v_o, entry.v_o, config.theta);
    sample.u = mix_features(u, entry.u, config.theta);
    sample.sub_target = sub_class;
    sample.obj_target = obj_class;
    sample.predicate_target = PredicateTarget::mixed(context_predicate, entry.predicate_id, config.theta);
    sample.contrastive_pairs.push_back({v_s, sample.v_s});
    sample.contrastive_pairs.push_back({v_o, sample.v_o});
    sample.provenance = is_fg ? "extrinsic_fg" : "extrinsic_bg";
    sample.bank_entry = pick;

    (is_fg ? local.extrinsic_fg_fired : local.extrinsic_bg_fired) = 1;
    if (counters) *counters += local;
    return sample;
}

std::vector<double> mix_features(const std::vector<double>& v, const std::vector<double>& v_prime,
                                 double theta) {
    if (v.size() != v_prime.size())
        throw InvariantError("mix_features: dimension mismatch (" + std::to_string(v.size()) + " vs " +
                             std::to_string(v_prime.size()) + ")");
    if (theta >= 1.0) return v;
    if (theta <= 0.0) return v_prime;
    std::vector<double> out(v.size());
    for (size_t d = 0; d < v.size(); ++d) out[d] = theta * v[d] + (1.0 - theta) * v_prime[d];
    return out;
}

void apply_augmented_sample(SceneView& view, const AugmentedSample& sample) {
    view.features[static_cast<size_t>(sample.sub_idx)] = sample.v_s;
    view.features[static_cast<size_t>(sample.obj_idx)] = sample.v_o;
    view.class_ids[static_cast<size_t>(sample.sub_idx)] = sample.sub_target;
    view.class_ids[static_cast<size_t>(sample.obj_idx)] = sample.obj_target;
    int slot = view.pair_slot(sample.sub_idx, sample.obj_idx);
    auto& pair = view.pairs[static_cast<size_t>(slot)];
    pair.u = sample.u;
    pair.target = sample.predicate_target;
    if (!sample.contrastive_pairs.empty()) {
        const Scene& scene = *view.scene;
        for (size_t i = 0; i < sample.contrastive_pairs.size(); ++i) {
            int ent = i == 0 ? sample.sub_idx : sample.obj_idx;
            const auto& box = scene.entities[static_cast<size_t>(ent)].box;
            auto with_box = [&](const std::vector<double>& feat) {
                std::vector<double> input = feat;
                input.push_back(box.x1 / scene.width);
                input.push_back(box.y1 / scene.height);
                input.push_back(box.x2 / scene.width);
                input.push_back(box.y2 / scene.height);
                return input;
            };
            view.contrastive_inputs.push_back(
                {with_box(sample.contrastive_pairs[i].first), with_box(sample.contrastive_pairs[i].second)});
        }
    }
}

}  // namespace cfa
