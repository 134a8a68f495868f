#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cfa/augment.hpp"
#include "cfa/dataset.hpp"
#include "cfa/parallel.hpp"

namespace cfa {

enum class Regime { predcls, sgcls };

struct ModelDims {
    int feature = 0;    // D
    int hidden = 0;     // H
    int embed = 0;      // D_w
    int n_entity = 0;   // |O|
    int n_predicate = 0;  // |P| including the no-relation slot 0

    int entity_in() const { return feature + 4; }
    int rel_in() const { return feature + hidden + embed + hidden; }
    int rel_out() const { return 2 * hidden; }
    int pair_in() const { return 4 * hidden; }

    friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

struct Tensor {
    std::string name;
    int rows = 0, cols = 0;  // cols == 1 for bias vectors
    std::vector<double> v;

    double at(int r, int c) const { return v[static_cast<size_t>(r) * static_cast<size_t>(cols) + static_cast<size_t>(c)]; }
    double& at(int r, int c) { return v[static_cast<size_t>(r) * static_cast<size_t>(cols) + static_cast<size_t>(c)]; }
    size_t size() const { return v.size(); }

    static Tensor zeros(std::string name, int rows, int cols);

    friend bool operator==(const Tensor&, const Tensor&) = default;
};

// The classifier's weights. Layout:
//   entity encoder   f_i = relu(W_obj (v_i + normalized box) + b_obj)
//   entity classifier  s_i = W_cls f_i
//   relation encoder f~_i = relu(W_rel (v_i + f_i + w_class + g) + b_rel)
//                    with g the mean of all f_j in the scene
//   pair fusion      q = relu(W_pair (f~_s + f~_o))
//   union projection m = W_u u
//   predicate scores r = W_pred (q * m)   (elementwise product)
struct ModelParams {
    ModelDims dims;
    Tensor w_obj, b_obj, w_cls, w_rel, b_rel, w_pair, w_u, w_pred;

    static ModelParams zeros(const ModelDims& dims);
    static ModelParams random_init(const ModelDims& dims, uint64_t seed);

    std::vector<Tensor*> tensors();
    std::vector<const Tensor*> tensors() const;

    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

using Gradients = ModelParams;

struct TrainConfig {
    double lr = 0.1;
    int epochs = 30;
    int batch_size = 8;   // scenes per step
    double tau = 0.5;     // contrastive temperature
    double beta = 0.1;    // contrastive weight
    uint64_t seed = 1;

    void validate() const;
};

// Per-scene forward activations kept for the backward pass.
struct EntityState {
    std::vector<double> input;       // v + normalized box
    std::vector<double> pre;         // entity encoder pre-activation
    std::vector<double> hidden;      // f_i
    std::vector<double> cls_scores;  // entity class scores (sgcls)
    std::vector<double> rel_input;   // v + f + w + g
    std::vector<double> rel_pre;
    std::vector<double> refined;     // f~_i
};

struct PairState {
    std::vector<double> u;
    std::vector<double> pair_pre;
    std::vector<double> gate;   // q
    std::vector<double> umap;   // m
    std::vector<double> scores;
};

struct SceneState {
    std::vector<EntityState> entities;
    std::vector<double> context;  // g
    std::vector<PairState> pairs;  // aligned with SceneView::pairs
};

std::vector<double> normalized_box(const Scene& scene, int entity_idx);

// Entity encoder + classifier on one input vector. `input` is the feature
// with the four normalized box coordinates appended.
EntityState forward_entity(const ModelParams& params, const std::vector<double>& input);

// Predicate scores for one pair, given the scene state's refined features.
std::vector<double> forward_relation(const ModelParams& params, const SceneState& state, int sub_idx,
                                     int obj_idx, const std::vector<double>& u);

SceneState scene_forward(const ModelParams& params, const SceneView& view,
                         const std::vector<std::vector<double>>& embeddings);

double xe_loss(const std::vector<double>& scores, int label);
double soft_xe_loss(const std::vector<double>& scores, const std::vector<double>& target);

// Normalized-temperature cross entropy over original/mixed entity pairs.
// `z` holds 2M vectors, partner(i) = i XOR 1; all other vectors in the batch
// are negatives. Throws on zero-norm vectors. Returns the mean anchor loss;
// when dz is non-null it receives d(loss)/dz.
double contrastive_loss(const std::vector<std::vector<double>>& z, double tau,
                        std::vector<std::vector<double>>* dz = nullptr);

double total_loss(double l_rel, double l_obj, double l_cl, double beta);

struct BatchLosses {
    double rel = 0.0, obj = 0.0, cl = 0.0;
    int64_t n_pairs = 0, n_entities = 0, n_contrastive = 0;
    int64_t n_contrastive_dropped = 0;  // zero-norm pairs excluded from L_cl

    double total(double beta) const { return total_loss(rel, obj, cl, beta); }
};

struct BatchEvalOptions {
    Regime regime = Regime::predcls;
    double tau = 0.5;
    double beta = 0.1;
    Execution exec = Execution::parallel;
};

// Losses (and optionally analytic gradients) of a batch of scene views.
// L_rel is the mean soft cross entropy over all trained pairs, L_obj the mean
// entity cross entropy (sgcls only), L_cl the contrastive loss over all the
// views' contrastive inputs. With `relu_masks` non-null, the sign pattern of
// every relu pre-activation is appended (used by the finite-difference tests
// to detect kink crossings).
BatchLosses eval_batch(const ModelParams& params, const std::vector<SceneView>& views,
                       const std::vector<std::vector<double>>& embeddings,
                       const BatchEvalOptions& options, Gradients* grads = nullptr,
                       std::vector<uint8_t>* relu_masks = nullptr);

// Plain gradient descent; throws naming the tensor on non-finite gradients.
void sgd_step(ModelParams& params, const Gradients& grads, double lr);

// Inference output: entity predictions/confidences plus per-pair predicate
// probability rows (softmax over all predicate slots including background).
struct ScenePrediction {
    std::vector<int> entity_pred;
    std::vector<double> entity_conf;
    struct PairPred {
        int sub_idx = -1, obj_idx = -1;
        std::vector<double> probs;
    };
    std::vector<PairPred> pairs;
};

// PredCls uses ground-truth classes (confidence 1); SGCls predicts entity
// classes first and feeds the predicted class embedding to the relation
// encoder. Pairs without an annotated union feature use the union surrogate.
ScenePrediction predict_scene(const ModelParams& params, const Scene& scene,
                              const std::vector<std::vector<double>>& embeddings, Regime regime);

// Versioned little-endian checkpoint (header + f32 tensors).
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path,
                     uint64_t config_hash);
ModelParams load_checkpoint(const std::filesystem::path& path, uint64_t* config_hash = nullptr);

}  // namespace cfa
