#include "cfa/model.hpp"

#include <algorithm>
#include <cmath>

#include "cfa/binio.hpp"
#include "cfa/common.hpp"
#include "cfa/rng.hpp"

namespace cfa {

namespace {

constexpr uint32_t kCheckpointMagic = 0x4b434643;  // "CFCK"
constexpr uint32_t kCheckpointVersion = 1;

// y += M x
void matvec_acc(const Tensor& m, const std::vector<double>& x, std::vector<double>& y) {
    for (int r = 0; r < m.rows; ++r) {
        double sum = 0.0;
        const double* row = m.v.data() + static_cast<size_t>(r) * static_cast<size_t>(m.cols);
        for (int c = 0; c < m.cols; ++c) sum += row[static_cast<size_t>(c)] * x[static_cast<size_t>(c)];
        y[static_cast<size_t>(r)] += sum;
    }
}

std::vector<double> matvec(const Tensor& m, const std::vector<double>& x) {
    std::vector<double> y(static_cast<size_t>(m.rows), 0.0);
    matvec_acc(m, x, y);
    return y;
}

// x += M^T y
void matvec_transpose_acc(const Tensor& m, const std::vector<double>& y, std::vector<double>& x) {
    for (int r = 0; r < m.rows; ++r) {
        const double yr = y[static_cast<size_t>(r)];
        if (yr == 0.0) continue;
        const double* row = m.v.data() + static_cast<size_t>(r) * static_cast<size_t>(m.cols);
        for (int c = 0; c < m.cols; ++c) x[static_cast<size_t>(c)] += row[static_cast<size_t>(c)] * yr;
    }
}

// G += y x^T
void outer_acc(Tensor& g, const std::vector<double>& y, const std::vector<double>& x) {
    for (int r = 0; r < g.rows; ++r) {
        const double yr = y[static_cast<size_t>(r)];
        if (yr == 0.0) continue;
        double* row = g.v.data() + static_cast<size_t>(r) * static_cast<size_t>(g.cols);
        for (int c = 0; c < g.cols; ++c) row[static_cast<size_t>(c)] += yr * x[static_cast<size_t>(c)];
    }
}

void vec_acc(Tensor& g, const std::vector<double>& y) {
    for (size_t i = 0; i < y.size(); ++i) g.v[i] += y[i];
}

std::vector<double> relu(const std::vector<double>& x) {
    std::vector<double> y(x.size());
    for (size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
    return y;
}

void relu_backward(const std::vector<double>& pre, std::vector<double>& grad) {
    for (size_t i = 0; i < grad.size(); ++i)
        if (!(pre[i] > 0.0)) grad[i] = 0.0;
}

double logsumexp(const std::vector<double>& s) {
    double mx = *std::max_element(s.begin(), s.end());
    double sum = 0.0;
    for (double x : s) sum += std::exp(x - mx);
    return mx + std::log(sum);
}

std::vector<double> softmax(const std::vector<double>& s) {
    double mx = *std::max_element(s.begin(), s.end());
    std::vector<double> p(s.size());
    double sum = 0.0;
    for (size_t i = 0; i < s.size(); ++i) {
        p[i] = std::exp(s[i] - mx);
        sum += p[i];
    }
    for (auto& x : p) x /= sum;
    return p;
}

void append_mask(std::vector<uint8_t>* masks, const std::vector<double>& pre) {
    if (!masks) return;
    for (double x : pre) masks->push_back(x > 0.0 ? 1 : 0);
}

}  // namespace

Tensor Tensor::zeros(std::string name, int rows, int cols) {
    Tensor t;
    t.name = std::move(name);
    t.rows = rows;
    t.cols = cols;
    t.v.assign(static_cast<size_t>(rows) * static_cast<size_t>(cols), 0.0);
    return t;
}

ModelParams ModelParams::zeros(const ModelDims& dims) {
    ModelParams p;
    p.dims = dims;
    p.w_obj = Tensor::zeros("w_obj", dims.hidden, dims.entity_in());
    p.b_obj = Tensor::zeros("b_obj", dims.hidden, 1);
    p.w_cls = Tensor::zeros("w_cls", dims.n_entity, dims.hidden);
    p.w_rel = Tensor::zeros("w_rel", dims.rel_out(), dims.rel_in());
    p.b_rel = Tensor::zeros("b_rel", dims.rel_out(), 1);
    p.w_pair = Tensor::zeros("w_pair", dims.hidden, dims.pair_in());
    p.w_u = Tensor::zeros("w_u", dims.hidden, dims.feature);
    p.w_pred = Tensor::zeros("w_pred", dims.n_predicate, dims.hidden);
    return p;
}

ModelParams ModelParams::random_init(const ModelDims& dims, uint64_t seed) {
    ModelParams p = zeros(dims);
    int idx = 0;
    for (Tensor* t : p.tensors()) {
        Rng rng(mix_seed({seed, 0x696e6974ull, static_cast<uint64_t>(idx++)}));
        if (t->cols == 1) {
            // Positive bias keeps early relu activations alive.
            std::fill(t->v.begin(), t->v.end(), 0.1);
        } else {
            double scale = 1.0 / std::sqrt(static_cast<double>(t->cols));
            for (auto& x : t->v) x = scale * rng.normal();
        }
    }
    return p;
}

std::vector<Tensor*> ModelParams::tensors() {
    return {&w_obj, &b_obj, &w_cls, &w_rel, &b_rel, &w_pair, &w_u, &w_pred};
}

std::vector<const Tensor*> ModelParams::tensors() const {
    return {&w_obj, &b_obj, &w_cls, &w_rel, &b_rel, &w_pair, &w_u, &w_pred};
}

void TrainConfig::validate() const {
    if (!(tau > 0.0)) throw InvariantError("train tau must be positive");
    if (beta < 0.0) throw InvariantError("train beta must be nonnegative");
    if (epochs < 0 || batch_size < 1) throw InvariantError("train epochs/batch_size out of range");
}

std::vector<double> normalized_box(const Scene& scene, int entity_idx) {
    const BBox& b = scene.entities[static_cast<size_t>(entity_idx)].box;
    return {b.x1 / scene.width, b.y1 / scene.height, b.x2 / scene.width, b.y2 / scene.height};
}

EntityState forward_entity(const ModelParams& params, const std::vector<double>& input) {
    if (static_cast<int>(input.size()) != params.dims.entity_in())
        throw InvariantError("forward_entity: input dimension mismatch");
    EntityState st;
    st.input = input;
    st.pre = matvec(params.w_obj, input);
    for (int h = 0; h < params.dims.hidden; ++h) st.pre[static_cast<size_t>(h)] += params.b_obj.v[static_cast<size_t>(h)];
    st.hidden = relu(st.pre);
    st.cls_scores = matvec(params.w_cls, st.hidden);
    return st;
}

std::vector<double> forward_relation(const ModelParams& params, const SceneState& state, int sub_idx,
                                     int obj_idx, const std::vector<double>& u) {
    const int n = static_cast<int>(state.entities.size());
    if (sub_idx < 0 || sub_idx >= n || obj_idx < 0 || obj_idx >= n)
        throw InvariantError("forward_relation: pair indices out of range");
    const auto& rs = state.entities[static_cast<size_t>(sub_idx)].refined;
    const auto& ro = state.entities[static_cast<size_t>(obj_idx)].refined;
    std::vector<double> cat;
    cat.reserve(rs.size() + ro.size());
    cat.insert(cat.end(), rs.begin(), rs.end());
    cat.insert(cat.end(), ro.begin(), ro.end());
    std::vector<double> gate = relu(matvec(params.w_pair, cat));
    std::vector<double> umap = matvec(params.w_u, u);
    std::vector<double> fused(gate.size());
    for (size_t h = 0; h < gate.size(); ++h) fused[h] = gate[h] * umap[h];
    return matvec(params.w_pred, fused);
}

SceneState scene_forward(const ModelParams& params, const SceneView& view,
                         const std::vector<std::vector<double>>& embeddings) {
    const Scene& scene = *view.scene;
    const ModelDims& dims = params.dims;
    SceneState state;
    state.entities.resize(scene.entities.size());

    for (size_t i = 0; i < scene.entities.size(); ++i) {
        std::vector<double> input = view.features[i];
        if (static_cast<int>(input.size()) != dims.feature)
            throw InvariantError("scene_forward: feature dimension mismatch in scene " + scene.image_id);
        auto box = normalized_box(scene, static_cast<int>(i));
        input.insert(input.end(), box.begin(), box.end());
        state.entities[i] = forward_entity(params, input);
    }

    state.context.assign(static_cast<size_t>(dims.hidden), 0.0);
    for (const auto& ent : state.entities)
        for (int h = 0; h < dims.hidden; ++h) state.context[static_cast<size_t>(h)] += ent.hidden[static_cast<size_t>(h)];
    const double inv_n = 1.0 / static_cast<double>(state.entities.size());
    for (auto& x : state.context) x *= inv_n;

    for (size_t i = 0; i < state.entities.size(); ++i) {
        EntityState& ent = state.entities[i];
        const auto& w = embeddings.at(static_cast<size_t>(view.class_ids[i]));
        if (static_cast<int>(w.size()) != dims.embed)
            throw InvariantError("scene_forward: embedding dimension mismatch");
        ent.rel_input.clear();
        ent.rel_input.reserve(static_cast<size_t>(dims.rel_in()));
        ent.rel_input.insert(ent.rel_input.end(), view.features[i].begin(), view.features[i].end());
        ent.rel_input.insert(ent.rel_input.end(), ent.hidden.begin(), ent.hidden.end());
        ent.rel_input.insert(ent.rel_input.end(), w.begin(), w.end());
        ent.rel_input.insert(ent.rel_input.end(), state.context.begin(), state.context.end());
        ent.rel_pre = matvec(params.w_rel, ent.rel_input);
        for (int h = 0; h < dims.rel_out(); ++h) ent.rel_pre[static_cast<size_t>(h)] += params.b_rel.v[static_cast<size_t>(h)];
        ent.refined = relu(ent.rel_pre);
    }

    state.pairs.resize(view.pairs.size());
    for (size_t pi = 0; pi < view.pairs.size(); ++pi) {
        const auto& slot = view.pairs[pi];
        PairState& ps = state.pairs[pi];
        ps.u = view.pair_union(static_cast<int>(pi));
        const auto& rs = state.entities[static_cast<size_t>(slot.sub_idx)].refined;
        const auto& ro = state.entities[static_cast<size_t>(slot.obj_idx)].refined;
        std::vector<double> cat;
        cat.reserve(rs.size() + ro.size());
        cat.insert(cat.end(), rs.begin(), rs.end());
        cat.insert(cat.end(), ro.begin(), ro.end());
        ps.pair_pre = matvec(params.w_pair, cat);
        ps.gate = relu(ps.pair_pre);
        ps.umap = matvec(params.w_u, ps.u);
        std::vector<double> fused(ps.gate.size());
        for (size_t h = 0; h < fused.size(); ++h) fused[h] = ps.gate[h] * ps.umap[h];
        ps.scores = matvec(params.w_pred, fused);
    }
    return state;
}

double xe_loss(const std::vector<double>& scores, int label) {
    if (label < 0 || static_cast<size_t>(label) >= scores.size())
        throw InvariantError("xe_loss: label out of range");
    return logsumexp(scores) - scores[static_cast<size_t>(label)];
}

double soft_xe_loss(const std::vector<double>& scores, const std::vector<double>& target) {
    if (scores.size() != target.size()) throw InvariantError("soft_xe_loss: size mismatch");
    double dot = 0.0, mass = 0.0;
    for (size_t i = 0; i < scores.size(); ++i) {
        dot += target[i] * scores[i];
        mass += target[i];
    }
    if (std::abs(mass - 1.0) > 1e-9) throw InvariantError("soft_xe_loss: target does not sum to 1");
    return logsumexp(scores) - dot;
}

double contrastive_loss(const std::vector<std::vector<double>>& z, double tau,
                        std::vector<std::vector<double>>* dz) {
    if (!(tau > 0.0)) throw InvariantError("contrastive_loss: tau must be positive");
    const size_t n = z.size();
    if (n == 0) return 0.0;
    if (n % 2 != 0) throw InvariantError("contrastive_loss: expected an even number of vectors");

    std::vector<double> norms(n);
    for (size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (double x : z[i]) s += x * x;
        norms[i] = std::sqrt(s);
        if (norms[i] == 0.0)
            throw InvariantError("contrastive_loss: zero-norm vector at index " + std::to_string(i));
    }
    auto cosine = [&](size_t a, size_t b) {
        double dot = 0.0;
        for (size_t d = 0; d < z[a].size(); ++d) dot += z[a][d] * z[b][d];
        return dot / (norms[a] * norms[b]);
    };

    std::vector<double> cos(n * n, 0.0);
    for (size_t a = 0; a < n; ++a)
        for (size_t b = 0; b < n; ++b)
            if (a != b) cos[a * n + b] = cosine(a, b);

    if (dz) {
        dz->assign(n, std::vector<double>(z[0].size(), 0.0));
    }

    double loss = 0.0;
    const double inv_anchors = 1.0 / static_cast<double>(n);
    for (size_t a = 0; a < n; ++a) {
        const size_t pos = a ^ 1;
        double mx = -std::numeric_limits<double>::infinity();
        for (size_t k = 0; k < n; ++k)
            if (k != a) mx = std::max(mx, cos[a * n + k] / tau);
        double denom = 0.0;
        for (size_t k = 0; k < n; ++k)
            if (k != a) denom += std::exp(cos[a * n + k] / tau - mx);
        loss += inv_anchors * (-cos[a * n + pos] / tau + mx + std::log(denom));

        if (dz) {
            for (size_t k = 0; k < n; ++k) {
                if (k == a) continue;
                double prob = std::exp(cos[a * n + k] / tau - mx) / denom;
                double dcos = inv_anchors / tau * (prob - (k == pos ? 1.0 : 0.0));
                if (dcos == 0.0) continue;
                double c = cos[a * n + k];
                for (size_t d = 0; d < z[a].size(); ++d) {
                    (*dz)[a][d] += dcos * (z[k][d] / (norms[a] * norms[k]) -
                                           c * z[a][d] / (norms[a] * norms[a]));
                    (*dz)[k][d] += dcos * (z[a][d] / (norms[a] * norms[k]) -
                                           c * z[k][d] / (norms[k] * norms[k]));
                }
            }
        }
    }
    return loss;
}

double total_loss(double l_rel, double l_obj, double l_cl, double beta) {
    return l_rel + l_obj + beta * l_cl;
}

namespace {

// Per-scene backward for the cross-entropy losses. Gradient scale factors
// (1/n_pairs, 1/n_entities) are folded into the score deltas.
void scene_backward(const ModelParams& params, const SceneView& view, const SceneState& state,
                    Regime regime, double inv_pairs, double inv_entities, Gradients& grads) {
    const ModelDims& dims = params.dims;
    const size_t n_ent = state.entities.size();

    std::vector<std::vector<double>> d_refined(n_ent,
                                               std::vector<double>(static_cast<size_t>(dims.rel_out()), 0.0));

    for (size_t pi = 0; pi < view.pairs.size(); ++pi) {
        const auto& slot = view.pairs[pi];
        const PairState& ps = state.pairs[pi];
        std::vector<double> delta = softmax(ps.scores);
        delta[static_cast<size_t>(slot.target.first)] -= slot.target.first_w;
        if (slot.target.second >= 0) delta[static_cast<size_t>(slot.target.second)] -= slot.target.second_w;
        for (auto& x : delta) x *= inv_pairs;

        std::vector<double> fused(static_cast<size_t>(dims.hidden));
        for (int h = 0; h < dims.hidden; ++h)
            fused[static_cast<size_t>(h)] = ps.gate[static_cast<size_t>(h)] * ps.umap[static_cast<size_t>(h)];
        outer_acc(grads.w_pred, delta, fused);

        std::vector<double> d_fused(static_cast<size_t>(dims.hidden), 0.0);
        matvec_transpose_acc(params.w_pred, delta, d_fused);

        std::vector<double> d_gate(static_cast<size_t>(dims.hidden));
        std::vector<double> d_umap(static_cast<size_t>(dims.hidden));
        for (int h = 0; h < dims.hidden; ++h) {
            auto uh = static_cast<size_t>(h);
            d_gate[uh] = d_fused[uh] * ps.umap[uh];
            d_umap[uh] = d_fused[uh] * ps.gate[uh];
        }
        outer_acc(grads.w_u, d_umap, ps.u);

        relu_backward(ps.pair_pre, d_gate);
        std::vector<double> cat;
        const auto& rs = state.entities[static_cast<size_t>(slot.sub_idx)].refined;
        const auto& ro = state.entities[static_cast<size_t>(slot.obj_idx)].refined;
        cat.reserve(rs.size() + ro.size());
        cat.insert(cat.end(), rs.begin(), rs.end());
        cat.insert(cat.end(), ro.begin(), ro.end());
        outer_acc(grads.w_pair, d_gate, cat);

        std::vector<double> d_cat(static_cast<size_t>(dims.pair_in()), 0.0);
        matvec_transpose_acc(params.w_pair, d_gate, d_cat);
        auto& d_rs = d_refined[static_cast<size_t>(slot.sub_idx)];
        auto& d_ro = d_refined[static_cast<size_t>(slot.obj_idx)];
        for (int h = 0; h < dims.rel_out(); ++h) {
            d_rs[static_cast<size_t>(h)] += d_cat[static_cast<size_t>(h)];
            d_ro[static_cast<size_t>(h)] += d_cat[static_cast<size_t>(h + dims.rel_out())];
        }
    }

    // Relation-encoder backward; accumulates the context gradient.
    std::vector<std::vector<double>> d_hidden(n_ent,
                                              std::vector<double>(static_cast<size_t>(dims.hidden), 0.0));
    std::vector<double> d_context(static_cast<size_t>(dims.hidden), 0.0);
    for (size_t i = 0; i < n_ent; ++i) {
        const EntityState& ent = state.entities[i];
        std::vector<double> d_rel = d_refined[i];
        relu_backward(ent.rel_pre, d_rel);
        outer_acc(grads.w_rel, d_rel, ent.rel_input);
        vec_acc(grads.b_rel, d_rel);
        std::vector<double> d_in(static_cast<size_t>(dims.rel_in()), 0.0);
        matvec_transpose_acc(params.w_rel, d_rel, d_in);
        for (int h = 0; h < dims.hidden; ++h) {
            d_hidden[i][static_cast<size_t>(h)] += d_in[static_cast<size_t>(dims.feature + h)];
            d_context[static_cast<size_t>(h)] +=
                d_in[static_cast<size_t>(dims.feature + dims.hidden + dims.embed + h)];
        }
    }

    if (regime == Regime::sgcls) {
        for (size_t i = 0; i < n_ent; ++i) {
            const EntityState& ent = state.entities[i];
            std::vector<double> delta = softmax(ent.cls_scores);
            delta[static_cast<size_t>(view.class_ids[i])] -= 1.0;
            for (auto& x : delta) x *= inv_entities;
            outer_acc(grads.w_cls, delta, ent.hidden);
            matvec_transpose_acc(params.w_cls, delta, d_hidden[i]);
        }
    }

    // The context is the mean of the entity encodings.
    const double inv_n = 1.0 / static_cast<double>(n_ent);
    for (size_t i = 0; i < n_ent; ++i)
        for (int h = 0; h < dims.hidden; ++h)
            d_hidden[i][static_cast<size_t>(h)] += d_context[static_cast<size_t>(h)] * inv_n;

    for (size_t i = 0; i < n_ent; ++i) {
        const EntityState& ent = state.entities[i];
        std::vector<double> d_pre = d_hidden[i];
        relu_backward(ent.pre, d_pre);
        outer_acc(grads.w_obj, d_pre, ent.input);
        vec_acc(grads.b_obj, d_pre);
    }
}

}  // namespace

BatchLosses eval_batch(const ModelParams& params, const std::vector<SceneView>& views,
                       const std::vector<std::vector<double>>& embeddings,
                       const BatchEvalOptions& options, Gradients* grads,
                       std::vector<uint8_t>* relu_masks) {
    BatchLosses losses;
    for (const auto& view : views) {
        losses.n_pairs += static_cast<int64_t>(view.pairs.size());
        losses.n_entities += static_cast<int64_t>(view.class_ids.size());
    }
    const double inv_pairs = losses.n_pairs > 0 ? 1.0 / static_cast<double>(losses.n_pairs) : 0.0;
    const double inv_entities =
        (options.regime == Regime::sgcls && losses.n_entities > 0)
            ? 1.0 / static_cast<double>(losses.n_entities)
            : 0.0;

    struct ScenePartial {
        double rel = 0.0, obj = 0.0;
        Gradients grads;
        std::vector<uint8_t> masks;
        bool has_grads = false;
    };
    std::vector<ScenePartial> partials(views.size());

    parallel_for(views.size(), options.exec, [&](size_t vi) {
        const SceneView& view = views[vi];
        ScenePartial& part = partials[vi];
        SceneState state = scene_forward(params, view, embeddings);

        for (const auto& ent : state.entities) append_mask(&part.masks, ent.pre);
        for (const auto& ent : state.entities) append_mask(&part.masks, ent.rel_pre);
        for (const auto& ps : state.pairs) append_mask(&part.masks, ps.pair_pre);

        for (size_t pi = 0; pi < view.pairs.size(); ++pi) {
            const auto& slot = view.pairs[pi];
            const auto& scores = state.pairs[pi].scores;
            double l = logsumexp(scores) - (slot.target.first_w * scores[static_cast<size_t>(slot.target.first)] +
                                            (slot.target.second >= 0
                                                 ? slot.target.second_w * scores[static_cast<size_t>(slot.target.second)]
                                                 : 0.0));
            part.rel += l;
        }
        if (options.regime == Regime::sgcls) {
            for (size_t i = 0; i < state.entities.size(); ++i)
                part.obj += xe_loss(state.entities[i].cls_scores, view.class_ids[i]);
        }
        if (grads) {
            part.grads = Gradients::zeros(params.dims);
            part.has_grads = true;
            scene_backward(params, view, state, options.regime, inv_pairs, inv_entities, part.grads);
        }
    });

    for (auto& part : partials) {
        losses.rel += part.rel;
        losses.obj += part.obj;
        if (relu_masks) relu_masks->insert(relu_masks->end(), part.masks.begin(), part.masks.end());
        if (grads && part.has_grads) {
            auto dst = grads->tensors();
            auto src = part.grads.tensors();
            for (size_t t = 0; t < dst.size(); ++t)
                for (size_t i = 0; i < dst[t]->v.size(); ++i) dst[t]->v[i] += src[t]->v[i];
        }
    }
    losses.rel *= inv_pairs;
    losses.obj *= inv_entities;

    // Contrastive term over all views' (original, mixed) entity inputs.
    // Pairs where either encoding has zero norm are dropped before the loss
    // (cosine is undefined there); the drop set is reflected in the relu
    // masks, so finite-difference checks detect drop-set changes as kinks.
    std::vector<std::vector<double>> z;
    std::vector<std::vector<double>> z_pre;
    std::vector<const std::vector<double>*> z_inputs;
    for (const auto& view : views) {
        for (const auto& [orig, mixed] : view.contrastive_inputs) {
            EntityState st_orig = forward_entity(params, orig);
            EntityState st_mixed = forward_entity(params, mixed);
            append_mask(relu_masks, st_orig.pre);
            append_mask(relu_masks, st_mixed.pre);
            auto norm_of = [](const std::vector<double>& v) {
                double s = 0.0;
                for (double x : v) s += x * x;
                return s;
            };
            if (norm_of(st_orig.hidden) == 0.0 || norm_of(st_mixed.hidden) == 0.0) {
                losses.n_contrastive_dropped += 1;
                continue;
            }
            z_pre.push_back(std::move(st_orig.pre));
            z.push_back(std::move(st_orig.hidden));
            z_inputs.push_back(&orig);
            z_pre.push_back(std::move(st_mixed.pre));
            z.push_back(std::move(st_mixed.hidden));
            z_inputs.push_back(&mixed);
        }
    }
    losses.n_contrastive = static_cast<int64_t>(z.size() / 2);
    if (!z.empty()) {
        std::vector<std::vector<double>> dz;
        losses.cl = contrastive_loss(z, options.tau, grads ? &dz : nullptr);
        if (grads) {
            for (size_t i = 0; i < z.size(); ++i) {
                std::vector<double> d_pre = dz[i];
                for (auto& x : d_pre) x *= options.beta;
                relu_backward(z_pre[i], d_pre);
                outer_acc(grads->w_obj, d_pre, *z_inputs[i]);
                vec_acc(grads->b_obj, d_pre);
            }
        }
    }

    if (!std::isfinite(losses.total(options.beta)))
        throw Error("eval_batch: non-finite loss");
    return losses;
}

void sgd_step(ModelParams& params, const Gradients& grads, double lr) {
    auto dst = params.tensors();
    auto src = grads.tensors();
    for (size_t t = 0; t < dst.size(); ++t) {
        for (double g : src[t]->v)
            if (!std::isfinite(g))
                throw Error("sgd_step: non-finite gradient in " + src[t]->name);
        for (size_t i = 0; i < dst[t]->v.size(); ++i) dst[t]->v[i] -= lr * src[t]->v[i];
    }
}

ScenePrediction predict_scene(const ModelParams& params, const Scene& scene,
                              const std::vector<std::vector<double>>& embeddings, Regime regime) {
    SceneView view = SceneView::from_scene(scene);
    ScenePrediction pred;
    pred.entity_pred.resize(scene.entities.size());
    pred.entity_conf.assign(scene.entities.size(), 1.0);

    if (regime == Regime::sgcls) {
        for (size_t i = 0; i < scene.entities.size(); ++i) {
            std::vector<double> input = view.features[i];
            auto box = normalized_box(scene, static_cast<int>(i));
            input.insert(input.end(), box.begin(), box.end());
            EntityState st = forward_entity(params, input);
            auto probs = softmax(st.cls_scores);
            int best = 0;
            for (size_t c = 1; c < probs.size(); ++c)
                if (probs[c] > probs[static_cast<size_t>(best)]) best = static_cast<int>(c);
            pred.entity_pred[i] = best;
            pred.entity_conf[i] = probs[static_cast<size_t>(best)];
        }
        // The relation encoder sees the predicted class embedding.
        for (size_t i = 0; i < scene.entities.size(); ++i) view.class_ids[i] = pred.entity_pred[i];
    } else {
        for (size_t i = 0; i < scene.entities.size(); ++i) pred.entity_pred[i] = scene.entities[i].class_id;
    }

    SceneState state = scene_forward(params, view, embeddings);
    pred.pairs.resize(view.pairs.size());
    for (size_t pi = 0; pi < view.pairs.size(); ++pi) {
        pred.pairs[pi].sub_idx = view.pairs[pi].sub_idx;
        pred.pairs[pi].obj_idx = view.pairs[pi].obj_idx;
        pred.pairs[pi].probs = softmax(state.pairs[pi].scores);
    }
    return pred;
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path,
                     uint64_t config_hash) {
    std::string bin;
    put_u32(bin, kCheckpointMagic);
    put_u32(bin, kCheckpointVersion);
    put_u64(bin, config_hash);
    put_u32(bin, static_cast<uint32_t>(params.dims.feature));
    put_u32(bin, static_cast<uint32_t>(params.dims.hidden));
    put_u32(bin, static_cast<uint32_t>(params.dims.embed));
    put_u32(bin, static_cast<uint32_t>(params.dims.n_entity));
    put_u32(bin, static_cast<uint32_t>(params.dims.n_predicate));
    for (const Tensor* t : params.tensors()) {
        put_u32(bin, static_cast<uint32_t>(t->rows));
        put_u32(bin, static_cast<uint32_t>(t->cols));
        for (double x : t->v) put_f32(bin, static_cast<float>(x));
    }
    write_file_bytes(path, bin);
}

ModelParams load_checkpoint(const std::filesystem::path& path, uint64_t* config_hash) {
    if (!std::filesystem::exists(path)) throw MissingInputError("missing checkpoint " + path.string());
    BinReader reader(read_file_bytes(path), path.string());
    if (reader.u32() != kCheckpointMagic) throw DataFormatError(path.string() + ": bad magic");
    if (reader.u32() != kCheckpointVersion)
        throw DataFormatError(path.string() + ": unsupported checkpoint version");
    uint64_t hash = reader.u64();
    if (config_hash) *config_hash = hash;
    ModelDims dims;
    dims.feature = static_cast<int>(reader.u32());
    dims.hidden = static_cast<int>(reader.u32());
    dims.embed = static_cast<int>(reader.u32());
    dims.n_entity = static_cast<int>(reader.u32());
    dims.n_predicate = static_cast<int>(reader.u32());
    ModelParams params = ModelParams::zeros(dims);
    for (Tensor* t : params.tensors()) {
        int rows = static_cast<int>(reader.u32());
        int cols = static_cast<int>(reader.u32());
        if (rows != t->rows || cols != t->cols)
            throw DataFormatError(path.string() + ": tensor " + t->name + " has unexpected shape");
        for (auto& x : t->v) x = static_cast<double>(reader.f32());
    }
    if (!reader.at_end()) throw DataFormatError(path.string() + ": trailing bytes");
    return params;
}

}  // namespace cfa
