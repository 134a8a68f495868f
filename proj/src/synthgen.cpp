#include "cfa/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "cfa/common.hpp"
#include "cfa/rng.hpp"

namespace cfa {

namespace {

// Generator shape constants. The image is a fixed square; boxes and offsets
// are sized so that related pairs sit a couple of box-widths apart.
constexpr double kImageSize = 1000.0;
constexpr double kBoxMin = 40.0, kBoxMax = 200.0;
constexpr double kPairDistMin = 150.0, kPairDistMax = 350.0;
constexpr double kAngleJitterRad = 20.0 * M_PI / 180.0;       // relation placement
constexpr double kHostAngleJitterRad = 12.0 * M_PI / 180.0;   // hosted prior vs host prior
constexpr double kPlacedPairMinCos = 0.3;  // acceptance when both boxes already exist
constexpr double kPrototypeJitter = 0.35;
constexpr double kEmbeddingJitter = 0.3;
constexpr double kHostEffectDelta = 1.1;
constexpr double kThemeLeak = 0.15;   // chance an entity ignores the scene theme
constexpr double kHeadFraction = 0.4;  // share of predicates that are base (non-hosted)
constexpr double kPairMix = 0.5;       // prototype share inside union features
constexpr int kMaxPredicateTries = 40;

std::vector<double> random_unit(Rng& rng, int dim) {
    std::vector<double> v(static_cast<size_t>(dim));
    double norm = 0.0;
    do {
        norm = 0.0;
        for (auto& x : v) {
            x = rng.normal();
            norm += x * x;
        }
    } while (norm == 0.0);
    norm = std::sqrt(norm);
    for (auto& x : v) x /= norm;
    return v;
}

std::vector<double> normalize(std::vector<double> v) {
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > 0)
        for (auto& x : v) x /= norm;
    return v;
}

Vec2 rotate(const Vec2& v, double angle) {
    double c = std::cos(angle), s = std::sin(angle);
    return {c * v[0] - s * v[1], s * v[0] + c * v[1]};
}

int sample_zipf(const std::vector<double>& cumulative, Rng& rng) {
    double u = rng.uniform() * cumulative.back();
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    int idx = static_cast<int>(it - cumulative.begin());
    return std::min(idx + 1, static_cast<int>(cumulative.size()));  // predicate ids are 1-based
}

}  // namespace

void SynthConfig::validate() const {
    if (n_entity_classes < 1 || n_predicates < 1 || scenes < 1)
        throw InvariantError("synth: counts must be >= 1");
    if (!(zipf_exponent > 0.0)) throw InvariantError("synth: zipf_exponent must be positive");
    if (entities_min < 2 || entities_max < entities_min)
        throw InvariantError("synth: entities_per_scene range invalid (need at least 2)");
    if (relations_min < 0 || relations_max < relations_min)
        throw InvariantError("synth: relations_per_scene range invalid");
    if (feature_dim < 1 || embedding_dim < 1) throw InvariantError("synth: dims must be >= 1");
    if (noise_sigma < 0.0) throw InvariantError("synth: noise_sigma must be nonnegative");
    if (families < 1 || families > n_entity_classes)
        throw InvariantError("synth: families must lie in [1, n_entity_classes]");
    if (val_scenes < 0) throw InvariantError("synth: val_scenes must be nonnegative");
}

WorldModel generate_world(const SynthConfig& config) {
    config.validate();
    Rng rng(mix_seed({config.seed, 0x776f726cull}));
    WorldModel world;

    const int n_classes = config.n_entity_classes;
    const int n_families = config.families;
    world.family_of.resize(static_cast<size_t>(n_classes));
    for (int c = 0; c < n_classes; ++c)
        world.family_of[static_cast<size_t>(c)] = c * n_families / n_classes;

    std::vector<std::vector<double>> family_dir, family_sem;
    for (int f = 0; f < n_families; ++f) {
        family_dir.push_back(random_unit(rng, config.feature_dim));
        family_sem.push_back(random_unit(rng, config.embedding_dim));
    }
    for (int c = 0; c < n_classes; ++c) {
        int f = world.family_of[static_cast<size_t>(c)];
        auto proto = family_dir[static_cast<size_t>(f)];
        auto jitter = random_unit(rng, config.feature_dim);
        for (size_t d = 0; d < proto.size(); ++d) proto[d] += kPrototypeJitter * jitter[d];
        world.prototypes.push_back(normalize(std::move(proto)));

        auto sem = family_sem[static_cast<size_t>(f)];
        auto sem_jitter = random_unit(rng, config.embedding_dim);
        for (size_t d = 0; d < sem.size(); ++d) sem[d] += kEmbeddingJitter * sem_jitter[d];
        // Embeddings are persisted as f32; quantize so reloads agree exactly.
        for (auto& x : sem) x = static_cast<double>(static_cast<float>(x));
        world.embeddings.push_back(std::move(sem));
    }

    const int n_pred = config.n_predicates;
    const int n_base = std::max(1, static_cast<int>(std::lround(kHeadFraction * n_pred)));
    world.predicate_effect.resize(static_cast<size_t>(n_pred) + 1);
    world.spatial_prior.assign(static_cast<size_t>(n_pred) + 1, Vec2{0.0, 0.0});
    world.compat.resize(static_cast<size_t>(n_pred) + 1);
    world.zipf_weight.assign(static_cast<size_t>(n_pred) + 1, 0.0);
    world.host_of.assign(static_cast<size_t>(n_pred) + 1, 0);

    // Compatibility pools: same-family pairs and ring-adjacent cross pairs.
    // Both pool kinds are uniform over families, which keeps the realized
    // predicate frequencies close to the Zipf targets.
    std::vector<std::pair<int, int>> same_pool, cross_pool;
    for (int f = 0; f < n_families; ++f) same_pool.push_back({f, f});
    if (n_families > 1) {
        for (int f = 0; f < n_families; ++f) {
            int next = (f + 1) % n_families;
            cross_pool.push_back({f, next});
            if (next != (f + n_families - 1) % n_families)
                cross_pool.push_back({(f + 1) % n_families, f});
        }
        std::sort(cross_pool.begin(), cross_pool.end());
        cross_pool.erase(std::unique(cross_pool.begin(), cross_pool.end()), cross_pool.end());
    }

    auto sample_distinct = [&](const std::vector<std::pair<int, int>>& pool, size_t want,
                               std::set<std::pair<int, int>>& out) {
        want = std::min(want, pool.size());
        while (out.size() < want) out.insert(pool[rng.uniform_int(pool.size())]);
    };

    for (int p = 1; p <= n_pred; ++p) {
        world.zipf_weight[static_cast<size_t>(p)] = std::pow(static_cast<double>(p), -config.zipf_exponent);
        auto up = static_cast<size_t>(p);
        if (p <= n_base) {
            world.predicate_effect[up] = random_unit(rng, config.feature_dim);
            double angle = rng.uniform(0.0, 2.0 * M_PI);
            world.spatial_prior[up] = {std::cos(angle), std::sin(angle)};
            std::set<std::pair<int, int>> pairs;
            sample_distinct(same_pool, 2, pairs);
            std::set<std::pair<int, int>> cross;
            sample_distinct(cross_pool, 4, cross);
            pairs.insert(cross.begin(), cross.end());
            world.compat[up].assign(pairs.begin(), pairs.end());
        } else {
            // Hosted predicate: attach to the lighter half of the base
            // predicates so rare classes are confusable but not hopeless.
            int host_pool = std::max(1, n_base / 2);
            int offset = (p - n_base - 1) % host_pool;
            int host = n_base - offset;
            world.host_of[up] = host;
            auto uh = static_cast<size_t>(host);
            auto effect = world.predicate_effect[uh];
            auto delta = random_unit(rng, config.feature_dim);
            for (size_t d = 0; d < effect.size(); ++d) effect[d] += kHostEffectDelta * delta[d];
            world.predicate_effect[up] = normalize(std::move(effect));
            world.spatial_prior[up] =
                rotate(world.spatial_prior[uh], rng.normal(0.0, kHostAngleJitterRad));
            const auto& host_pairs = world.compat[uh];
            std::vector<std::pair<int, int>> host_same, host_cross;
            for (const auto& fp : host_pairs)
                (fp.first == fp.second ? host_same : host_cross).push_back(fp);
            std::set<std::pair<int, int>> pairs;
            sample_distinct(host_same, 2, pairs);
            sample_distinct(host_cross.empty() ? host_same : host_cross, 2, pairs);
            world.compat[up].assign(pairs.begin(), pairs.end());
        }
        if (world.compat[up].empty())
            throw InvariantError("synth world: predicate " + std::to_string(p) +
                                 " has no compatible family pair");
    }
    return world;
}

namespace {

struct SceneBuild {
    std::vector<int> classes;
    std::vector<bool> placed;
    std::vector<BBox> boxes;
    std::vector<Relation> relations;
    std::set<std::pair<int, int>> used_pairs;
};

BBox make_box(Rng& rng, double cx, double cy) {
    double w = rng.uniform(kBoxMin, kBoxMax);
    double h = rng.uniform(kBoxMin, kBoxMax);
    cx = std::clamp(cx, w / 2, kImageSize - w / 2);
    cy = std::clamp(cy, h / 2, kImageSize - h / 2);
    return {cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2};
}

void place_random(SceneBuild& build, int i, Rng& rng) {
    double cx = rng.uniform(kBoxMax / 2, kImageSize - kBoxMax / 2);
    double cy = rng.uniform(kBoxMax / 2, kImageSize - kBoxMax / 2);
    build.boxes[static_cast<size_t>(i)] = make_box(rng, cx, cy);
    build.placed[static_cast<size_t>(i)] = true;
}

}  // namespace

Dataset generate_dataset(const WorldModel& world, const SynthConfig& config, int n_scenes,
                         uint64_t salt, const std::string& id_prefix, Execution exec) {
    config.validate();
    Dataset ds;
    for (int c = 0; c < config.n_entity_classes; ++c) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "ent_%02d", c);
        ds.vocab.entity_classes.push_back(buf);
    }
    ds.vocab.predicate_classes.push_back("no-relation");
    for (int p = 1; p <= config.n_predicates; ++p) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "rel_%02d", p);
        ds.vocab.predicate_classes.push_back(buf);
    }
    ds.embeddings = world.embeddings;
    ds.feature_dim = config.feature_dim;
    ds.embedding_dim = config.embedding_dim;
    ds.has_features = true;

    std::vector<double> zipf_cumulative;
    double acc = 0.0;
    for (int p = 1; p <= config.n_predicates; ++p) {
        acc += world.zipf_weight[static_cast<size_t>(p)];
        zipf_cumulative.push_back(acc);
    }

    ds.scenes.resize(static_cast<size_t>(n_scenes));
    parallel_for(static_cast<size_t>(n_scenes), exec, [&](size_t si) {
        Rng rng(mix_seed({config.seed, salt, 0x7363656eull, static_cast<uint64_t>(si)}));
        Scene& scene = ds.scenes[si];
        char buf[32];
        std::snprintf(buf, sizeof buf, "%s_%06zu", id_prefix.c_str(), si);
        scene.image_id = buf;
        scene.width = kImageSize;
        scene.height = kImageSize;

        const int n_fam = config.families;
        int theme_a = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(n_fam)));
        int theme_b = n_fam > 1 ? (theme_a + 1 + (rng.bernoulli(0.5) ? 0 : n_fam - 2)) % n_fam : theme_a;

        const int n_ent =
            config.entities_min +
            static_cast<int>(rng.uniform_int(static_cast<uint64_t>(config.entities_max - config.entities_min + 1)));
        SceneBuild build;
        build.classes.resize(static_cast<size_t>(n_ent));
        build.placed.assign(static_cast<size_t>(n_ent), false);
        build.boxes.resize(static_cast<size_t>(n_ent));
        for (int i = 0; i < n_ent; ++i) {
            int fam;
            if (rng.bernoulli(kThemeLeak) || n_fam == 1)
                fam = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(n_fam)));
            else
                fam = rng.bernoulli(0.5) ? theme_a : theme_b;
            // Uniform class within the family.
            std::vector<int> members;
            for (int c = 0; c < config.n_entity_classes; ++c)
                if (world.family_of[static_cast<size_t>(c)] == fam) members.push_back(c);
            build.classes[static_cast<size_t>(i)] =
                members[rng.uniform_int(members.size())];
        }

        const int n_rel =
            config.relations_min +
            static_cast<int>(rng.uniform_int(static_cast<uint64_t>(config.relations_max - config.relations_min + 1)));
        for (int slot = 0; slot < n_rel; ++slot) {
            bool made = false;
            for (int attempt = 0; attempt < kMaxPredicateTries && !made; ++attempt) {
                int p = sample_zipf(zipf_cumulative, rng);
                const auto& compat = world.compat[static_cast<size_t>(p)];
                const Vec2& prior = world.spatial_prior[static_cast<size_t>(p)];
                std::vector<std::pair<int, int>> candidates;
                for (int i = 0; i < n_ent; ++i) {
                    for (int j = 0; j < n_ent; ++j) {
                        if (i == j || build.used_pairs.count({i, j})) continue;
                        std::pair<int, int> fams{world.family_of[static_cast<size_t>(build.classes[static_cast<size_t>(i)])],
                                                 world.family_of[static_cast<size_t>(build.classes[static_cast<size_t>(j)])]};
                        if (std::find(compat.begin(), compat.end(), fams) == compat.end()) continue;
                        if (build.placed[static_cast<size_t>(i)] && build.placed[static_cast<size_t>(j)]) {
                            Vec2 offset = spatial_vector(build.boxes[static_cast<size_t>(i)],
                                                         build.boxes[static_cast<size_t>(j)]);
                            if (!spatial_match(offset, prior, kPlacedPairMinCos)) continue;
                        }
                        candidates.push_back({i, j});
                    }
                }
                if (candidates.empty()) continue;
                auto [i, j] = candidates[rng.uniform_int(candidates.size())];
                double dist = rng.uniform(kPairDistMin, kPairDistMax);
                Vec2 dir = rotate(prior, rng.normal(0.0, kAngleJitterRad));
                if (!build.placed[static_cast<size_t>(i)] && !build.placed[static_cast<size_t>(j)]) {
                    place_random(build, i, rng);
                    double cx = build.boxes[static_cast<size_t>(i)].center_x() + dist * dir[0];
                    double cy = build.boxes[static_cast<size_t>(i)].center_y() + dist * dir[1];
                    build.boxes[static_cast<size_t>(j)] = make_box(rng, cx, cy);
                    build.placed[static_cast<size_t>(j)] = true;
                } else if (build.placed[static_cast<size_t>(i)] && !build.placed[static_cast<size_t>(j)]) {
                    double cx = build.boxes[static_cast<size_t>(i)].center_x() + dist * dir[0];
                    double cy = build.boxes[static_cast<size_t>(i)].center_y() + dist * dir[1];
                    build.boxes[static_cast<size_t>(j)] = make_box(rng, cx, cy);
                    build.placed[static_cast<size_t>(j)] = true;
                } else if (!build.placed[static_cast<size_t>(i)]) {
                    double cx = build.boxes[static_cast<size_t>(j)].center_x() - dist * dir[0];
                    double cy = build.boxes[static_cast<size_t>(j)].center_y() - dist * dir[1];
                    build.boxes[static_cast<size_t>(i)] = make_box(rng, cx, cy);
                    build.placed[static_cast<size_t>(i)] = true;
                }
                Relation rel;
                rel.sub_idx = i;
                rel.obj_idx = j;
                rel.predicate_id = p;
                build.relations.push_back(rel);
                build.used_pairs.insert({i, j});
                made = true;
            }
        }
        for (int i = 0; i < n_ent; ++i)
            if (!build.placed[static_cast<size_t>(i)]) place_random(build, i, rng);

        for (int i = 0; i < n_ent; ++i) {
            Entity ent;
            ent.class_id = build.classes[static_cast<size_t>(i)];
            ent.box = build.boxes[static_cast<size_t>(i)];
            ent.feature = world.prototypes[static_cast<size_t>(ent.class_id)];
            for (auto& x : ent.feature) x += config.noise_sigma * rng.normal();
            // Features are persisted as f32; quantize now so in-memory and
            // reloaded datasets agree bit-for-bit.
            for (auto& x : ent.feature) x = static_cast<double>(static_cast<float>(x));
            scene.entities.push_back(std::move(ent));
        }
        for (auto& rel : build.relations) {
            const auto& ps = world.prototypes[static_cast<size_t>(scene.entities[static_cast<size_t>(rel.sub_idx)].class_id)];
            const auto& po = world.prototypes[static_cast<size_t>(scene.entities[static_cast<size_t>(rel.obj_idx)].class_id)];
            const auto& effect = world.predicate_effect[static_cast<size_t>(rel.predicate_id)];
            rel.union_feature.resize(static_cast<size_t>(config.feature_dim));
            for (int d = 0; d < config.feature_dim; ++d) {
                auto ud = static_cast<size_t>(d);
                rel.union_feature[ud] = kPairMix * 0.5 * (ps[ud] + po[ud]) + effect[ud] +
                                        config.noise_sigma * rng.normal();
            }
            for (auto& x : rel.union_feature) x = static_cast<double>(static_cast<float>(x));
            scene.relations.push_back(std::move(rel));
        }
    });
    return ds;
}

}  // namespace cfa
