#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cfa/dataset.hpp"
#include "cfa/parallel.hpp"

namespace cfa {

struct SynthConfig {
    int n_entity_classes = 24;
    int n_predicates = 30;
    double zipf_exponent = 1.5;
    int scenes = 2000;
    int val_scenes = 0;          // when > 0, the synth command also emits a val split
    int entities_min = 4, entities_max = 7;
    int relations_min = 3, relations_max = 6;
    int feature_dim = 16;   // D
    int embedding_dim = 8;  // D_w
    double noise_sigma = 0.32;
    uint64_t seed = 7;
    int families = 6;  // latent entity families (cluster structure)

    void validate() const;
};

// Linear-Gaussian world: classes share a family prototype direction, class
// embeddings correlate with the family, predicates carry an effect vector in
// union-feature space plus a preferred subject-to-object direction, and a
// compatibility table limits which (family, family) pairs admit a predicate.
// Rare predicates reuse a frequent "host" predicate's effect direction and
// spatial prior with a perturbation, and their compatible pairs are a subset
// of the host's, so tail triplets are confusable with and embeddable into
// head contexts.
struct WorldModel {
    std::vector<int> family_of;                          // per class
    std::vector<std::vector<double>> prototypes;         // per class, D
    std::vector<std::vector<double>> embeddings;         // per class, D_w
    std::vector<std::vector<double>> predicate_effect;   // per predicate 1..P (slot 0 empty)
    std::vector<Vec2> spatial_prior;                     // per predicate (slot 0 zero)
    std::vector<std::vector<std::pair<int, int>>> compat;  // per predicate: ordered family pairs
    std::vector<double> zipf_weight;                     // per predicate (slot 0 zero)
    std::vector<int> host_of;                            // per predicate; 0 = base predicate

    friend bool operator==(const WorldModel&, const WorldModel&) = default;
};

WorldModel generate_world(const SynthConfig& config);

// Deterministic given (world, config.seed, salt); scenes are generated in
// parallel with per-scene derived seeds. Emits entity/union features and
// per-class embeddings in the standard dataset layout.
Dataset generate_dataset(const WorldModel& world, const SynthConfig& config, int n_scenes,
                         uint64_t salt = 0, const std::string& id_prefix = "scene",
                         Execution exec = Execution::parallel);

inline Dataset generate_dataset(const WorldModel& world, const SynthConfig& config) {
    return generate_dataset(world, config, config.scenes);
}

}  // namespace cfa
