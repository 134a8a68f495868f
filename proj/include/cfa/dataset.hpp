#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "cfa/common.hpp"
#include "cfa/geometry.hpp"

namespace cfa {

// Entity and predicate inventories. Predicate index 0 is the background
// "no-relation" class; annotated relations use indices >= 1. The head/body/
// tail groups are empty until assigned from dataset statistics.
struct Vocabulary {
    std::vector<std::string> entity_classes;
    std::vector<std::string> predicate_classes;  // [0] = no-relation
    std::set<int> head_set, body_set, tail_set;

    int n_entity_classes() const { return static_cast<int>(entity_classes.size()); }
    // Number of annotated predicate classes (excludes the background slot).
    int n_predicates() const { return static_cast<int>(predicate_classes.size()) - 1; }

    void validate() const;
    // Installs the frequency groups; throws unless they partition {1..P}.
    void set_groups(std::set<int> head, std::set<int> body, std::set<int> tail);
};

struct Entity {
    int class_id = -1;
    BBox box;
    std::vector<double> feature;  // dimension D; empty when features absent
};

struct Relation {
    int sub_idx = -1;
    int obj_idx = -1;
    int predicate_id = 0;  // >= 1
    std::vector<double> union_feature;
};

struct Scene {
    std::string image_id;
    double width = 0, height = 0;
    std::vector<Entity> entities;
    std::vector<Relation> relations;

    const BBox& box(int i) const { return entities[static_cast<size_t>(i)].box; }
    Vec2 pair_spatial(int sub, int obj) const { return spatial_vector(box(sub), box(obj)); }
};

struct Dataset {
    Vocabulary vocab;
    std::vector<Scene> scenes;
    std::vector<std::vector<double>> embeddings;  // per entity class, dim D_w
    int feature_dim = 0;    // 0 when features absent (stats-only runs)
    int embedding_dim = 0;  // 0 when embeddings absent
    bool has_features = false;

    const std::vector<double>& embedding(int class_id) const {
        return embeddings[static_cast<size_t>(class_id)];
    }
};

// Union feature for a pair with no annotated union vector (background pairs):
// the mean of the two entity features. Keeps background pairs trainable and
// is the same rule at train and eval time.
std::vector<double> union_surrogate(const Scene& scene, int sub_idx, int obj_idx);

// Reads a dataset directory (vocab.json, scenes.jsonl, optional features.bin/
// features.json and embeddings.bin/embeddings.json). Errors name the file,
// line, and violated field.
Dataset load_dataset(const std::filesystem::path& dir);

// Writes a dataset in the same directory format (used by the synthetic
// generator and by tests). Features/embeddings are emitted only when present.
void write_dataset(const std::filesystem::path& dir, const Dataset& dataset);

}  // namespace cfa
