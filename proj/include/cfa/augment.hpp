#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cfa/clustering.hpp"
#include "cfa/feature_bank.hpp"
#include "cfa/rng.hpp"
#include "cfa/stats.hpp"

namespace cfa {

struct SamplerConfig {
    double lambda = 0.01;  // repeat-factor threshold
    double gamma = 0.5;    // foreground context scaling
    double bg_rate = 0.2;  // background context selection probability
    uint64_t seed = 1;

    void validate() const;
};

struct AugmentConfig {
    double sigma = 0.7;  // spatial restriction threshold
    double theta = 0.5;  // mixup coefficient (weight of the context)
    bool intrinsic_enabled = true;
    bool extrinsic_fg_enabled = true;
    bool extrinsic_bg_enabled = true;

    void validate() const;
};

// Distribution over predicate indices with at most two support points.
struct PredicateTarget {
    int first = 0;
    double first_w = 1.0;
    int second = -1;  // < 0 when the target is one-hot
    double second_w = 0.0;

    static PredicateTarget onehot(int cls) { return {cls, 1.0, -1, 0.0}; }
    // theta goes to a; degenerate weights collapse to a one-hot target.
    static PredicateTarget mixed(int a, int b, double theta);

    bool is_hard() const { return second < 0; }
    std::vector<double> dense(int n_classes) const;

    friend bool operator==(const PredicateTarget&, const PredicateTarget&) = default;
};

struct RepeatFactor {
    double eta_r = 1.0;  // sqrt(lambda / f_r)
    double eta = 1.0;    // max(1, eta_r)
};

RepeatFactor repeat_factor(double f_r, double lambda);

// Image-level repeat factor: max of eta over the scene's annotated
// predicates; 1 for scenes without relations.
double scene_repeat_factor(const Scene& scene, const DatasetStats& stats, double lambda);

// Epoch composition: each scene appears floor(eta_img) times plus one more
// with probability frac(eta_img), then the list is shuffled. Deterministic
// given config.seed.
std::vector<int> build_epoch(const std::vector<Scene>& scenes, const DatasetStats& stats,
                             const SamplerConfig& config);

// p = (eta - eta_r)/eta * gamma. Zero for every predicate with eta > 1, so
// tail predicates are never picked as foreground context.
double fg_context_probability(double eta, double eta_r, double gamma);

enum class ContextKind { fg, bg };

struct ContextCandidate {
    int sub_idx = -1;
    int obj_idx = -1;
    ContextKind kind = ContextKind::fg;
    int relation_idx = -1;  // annotated relation index for fg, -1 for bg
};

// Mutable per-visit working copy of a scene: entity classes/features start as
// annotated and get replaced or mixed by the operators. Pair slots hold the
// training target and, for annotated or mixed pairs, the union feature;
// background pairs without a stored vector fall back to the union surrogate
// of the current entity features.
struct SceneView {
    const Scene* scene = nullptr;
    std::vector<int> class_ids;
    std::vector<std::vector<double>> features;

    struct PairSlot {
        int sub_idx = -1;
        int obj_idx = -1;
        std::vector<double> u;  // empty => use surrogate of current features
        PredicateTarget target;
        bool annotated = false;
        int relation_idx = -1;
    };
    std::vector<PairSlot> pairs;  // all ordered pairs, lexicographic

    // Full input vectors (feature + normalized box) for Eq.-style contrastive
    // pairing: (original entity input, mixed entity input).
    std::vector<std::pair<std::vector<double>, std::vector<double>>> contrastive_inputs;

    static SceneView from_scene(const Scene& scene);
    int pair_slot(int sub_idx, int obj_idx) const;
    std::vector<double> pair_union(int slot) const;
};

struct AugmentCounters {
    int64_t intrinsic_attempts = 0;
    int64_t intrinsic_fired = 0;
    int64_t intrinsic_no_alternative = 0;
    int64_t intrinsic_misses = 0;  // empty candidate set after spatial filter
    int64_t extrinsic_fg_attempts = 0;
    int64_t extrinsic_fg_fired = 0;
    int64_t extrinsic_fg_misses = 0;
    int64_t extrinsic_bg_attempts = 0;
    int64_t extrinsic_bg_fired = 0;
    int64_t extrinsic_bg_misses = 0;

    AugmentCounters& operator+=(const AugmentCounters& o);
};

struct AugmentedSample {
    std::string scene_ref;
    int sub_idx = -1, obj_idx = -1;
    std::vector<double> v_s, v_o, u;
    int sub_target = -1, obj_target = -1;
    PredicateTarget predicate_target;
    std::vector<std::pair<std::vector<double>, std::vector<double>>> contrastive_pairs;
    std::string provenance;       // intrinsic | extrinsic_fg | extrinsic_bg
    int bank_entry = -1;
    int replaced_role = -1;       // 0 = subject, 1 = object (intrinsic only)
    int replacement_class = -1;   // intrinsic only
};

// Foreground candidates are the scene's annotated relations, each kept with
// its predicate's p; background candidates are unannotated ordered entity
// pairs whose class pair appears in the bank, each kept with bg_rate.
// Foreground candidates come first, both groups in scan order.
std::vector<ContextCandidate> select_context_triplets(const SceneView& view, const DatasetStats& stats,
                                                      const SamplerConfig& sampler,
                                                      const FeatureBank& bank, Rng& rng);

// Replaces one entity feature of a tail-predicate relation with a same-cluster
// candidate from the bank that passes the spatial restriction. Returns nullopt
// (and counts the reason) when no alternative class or no candidate survives.
std::optional<AugmentedSample> intrinsic_augment(const SceneView& view, int relation_idx,
                                                 const FeatureBank& bank,
                                                 const ClusterAssignment& clusters,
                                                 const AugmentConfig& config, Rng& rng,
                                                 AugmentCounters* counters = nullptr);

// Mixes a bank query triplet (same subject/object classes, spatial restriction
// applied) into the given context pair. Background contexts mix against the
// no-relation target.
std::optional<AugmentedSample> extrinsic_augment(const SceneView& view, const ContextCandidate& context,
                                                 const FeatureBank& bank, const AugmentConfig& config,
                                                 Rng& rng, AugmentCounters* counters = nullptr);

// theta * v + (1 - theta) * v_prime; endpoints are returned bit-exactly.
std::vector<double> mix_features(const std::vector<double>& v, const std::vector<double>& v_prime,
                                 double theta);

// Write an operator's result back into the working view.
void apply_augmented_sample(SceneView& view, const AugmentedSample& sample);

}  // namespace cfa
