#include <doctest.h>

#include <cmath>
#include <cstring>

#include "cfa/augment.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace cfa;

TEST_CASE("repeat factor closed forms") {
    auto rf = repeat_factor(0.01, 0.01);
    CHECK(rf.eta_r == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(rf.eta == 1.0);

    rf = repeat_factor(0.0004, 0.01);  // sqrt(25) = 5
    CHECK(rf.eta_r == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(rf.eta == doctest::Approx(5.0).epsilon(1e-12));

    rf = repeat_factor(0.04, 0.01);  // sqrt(0.25) = 0.5, clamp to 1
    CHECK(rf.eta_r == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(rf.eta == 1.0);

    CHECK_THROWS_AS(repeat_factor(0.0, 0.01), InvariantError);
    CHECK_THROWS_AS(repeat_factor(0.5, 0.0), InvariantError);
}

TEST_CASE("repeat factor equals the oracle on random inputs") {
    Rng rng(4);
    for (int it = 0; it < 200; ++it) {
        double f = rng.uniform(1e-5, 1.0);
        double lambda = rng.uniform(1e-4, 0.1);
        auto rf = repeat_factor(f, lambda);
        CHECK(rf.eta == doctest::Approx(oracle::brute_repeat_eta(f, lambda)).epsilon(1e-15));
    }
}

namespace {

DatasetStats stats_with_frequencies(const std::vector<double>& freqs) {
    DatasetStats stats;
    stats.n_predicates = static_cast<int>(freqs.size());
    stats.frequency.assign(freqs.size() + 1, 0.0);
    stats.predicate_counts.assign(freqs.size() + 1, 0);
    stats.total_relations = 1000000;
    for (size_t p = 0; p < freqs.size(); ++p) {
        stats.frequency[p + 1] = freqs[p];
        stats.predicate_counts[p + 1] =
            static_cast<int64_t>(freqs[p] * static_cast<double>(stats.total_relations));
    }
    return stats;
}

}  // namespace

TEST_CASE("build_epoch composition") {
    // Three scenes: predicate 1 is frequent (eta = 1), predicate 2 rare.
    Dataset ds;
    ds.vocab = testutil::make_vocab(2, 2);
    ds.scenes.push_back(testutil::make_scene("a", {0, 1}, {{0, 1, 1}}, 2));
    ds.scenes.push_back(testutil::make_scene("b", {0, 1}, {{0, 1, 1}}, 2));
    ds.scenes.push_back(testutil::make_scene("c", {0, 1}, {{0, 1, 2}}, 2));

    SUBCASE("all eta = 1 keeps every scene exactly once") {
        auto stats = compute_stats(ds.scenes, ds.vocab);
        SamplerConfig cfg;
        cfg.lambda = 1e-9;  // below every frequency
        cfg.seed = 3;
        auto epoch = build_epoch(ds.scenes, stats, cfg);
        std::vector<int> sorted = epoch;
        std::sort(sorted.begin(), sorted.end());
        CHECK(sorted == std::vector<int>{0, 1, 2});
    }

    SUBCASE("integer eta gives exact copies") {
        // One scene whose predicate frequency makes eta exactly 3.
        Dataset one;
        one.vocab = testutil::make_vocab(2, 1);
        one.scenes.push_back(testutil::make_scene("only", {0, 1}, {{0, 1, 1}}, 2));
        auto stats = stats_with_frequencies({1.0});
        SamplerConfig cfg;
        cfg.lambda = 9.0;  // eta_r = sqrt(9/1) = 3
        cfg.seed = 5;
        auto epoch = build_epoch(one.scenes, stats, cfg);
        CHECK(epoch.size() == 3);
    }

    SUBCASE("scene with no relations gets eta = 1") {
        Dataset d2;
        d2.vocab = testutil::make_vocab(2, 1);
        Scene s;
        s.image_id = "norel";
        s.width = s.height = 10;
        d2.scenes.push_back(s);
        auto stats = stats_with_frequencies({1.0});
        SamplerConfig cfg;
        cfg.lambda = 9.0;
        auto epoch = build_epoch(d2.scenes, stats, cfg);
        CHECK(epoch == std::vector<int>{0});
    }
}

TEST_CASE("build_epoch stochastic rounding matches the expectation over many epochs") {
    Dataset ds;
    ds.vocab = testutil::make_vocab(2, 1);
    ds.scenes.push_back(testutil::make_scene("s", {0, 1}, {{0, 1, 1}}, 2));
    auto stats = stats_with_frequencies({1.0});
    SamplerConfig cfg;
    cfg.lambda = 2.25;  // eta = 1.5
    int64_t total = 0;
    const int epochs = 10000;
    for (int e = 0; e < epochs; ++e) {
        cfg.seed = mix_seed({17, static_cast<uint64_t>(e)});
        total += static_cast<int64_t>(build_epoch(ds.scenes, stats, cfg).size());
    }
    double mean = static_cast<double>(total) / epochs;
    CHECK(mean == doctest::Approx(1.5).epsilon(0.02));  // within 2%
}

TEST_CASE("fg context probability") {
    CHECK(fg_context_probability(1.0, 1.0, 0.5) == 0.0);
    CHECK(fg_context_probability(1.0, 0.5, 0.5) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(fg_context_probability(5.0, 5.0, 0.9) == 0.0);  // eta = eta_r forces zero
    CHECK_THROWS_AS(fg_context_probability(0.5, 0.5, 0.5), InvariantError);

    // p = 0 whenever eta > 1 (tail predicates are never fg contexts).
    Rng rng(21);
    for (int it = 0; it < 100; ++it) {
        double f = rng.uniform(1e-6, 1.0);
        double lambda = rng.uniform(1e-5, 0.5);
        auto rf = repeat_factor(f, lambda);
        double p = fg_context_probability(rf.eta, rf.eta_r, 0.7);
        if (rf.eta > 1.0) CHECK(p == 0.0);
        CHECK(p >= 0.0);
        CHECK(p <= 0.7);
    }
}

namespace {

struct EngineFixture {
    Dataset ds;
    DatasetStats stats;
    FeatureBank bank;
    ClusterAssignment clusters;

    // Classes: 0 (dog), 1 (cat) clustered together; 2 (bed) alone.
    // Predicate 1 = head "on", predicate 2 = tail "laying on".
    EngineFixture() {
        ds.vocab = testutil::make_vocab(3, 2);
        Rng rng(8);
        // Several scenes so predicate 1 is frequent and predicate 2 rare.
        for (int i = 0; i < 8; ++i)
            ds.scenes.push_back(
                testutil::make_scene("head" + std::to_string(i), {0, 2}, {{0, 1, 1}}, 4, &rng));
        // Tail scenes: dog-laying_on-bed and cat-laying_on-bed.
        ds.scenes.push_back(testutil::make_scene("tail_dog", {0, 2}, {{0, 1, 2}}, 4, &rng));
        ds.scenes.push_back(testutil::make_scene("tail_cat", {1, 2}, {{0, 1, 2}}, 4, &rng));
        stats = compute_stats(ds.scenes, ds.vocab);
        bank = build_bank(ds.scenes, ds.vocab, {2});
        clusters.k = 2;
        clusters.assignment = {0, 0, 1};  // dog+cat together, bed alone
    }
};

}  // namespace

TEST_CASE("intrinsic augmentation replaces the chosen entity with a cluster sibling") {
    EngineFixture fx;
    // Query: the dog-laying_on-bed scene, relation 0.
    const Scene& query_scene = fx.ds.scenes[8];
    SceneView view = SceneView::from_scene(query_scene);
    AugmentConfig cfg;
    cfg.sigma = -1.0;  // accept all directions for this test

    // The subject role must eventually be chosen; iterate seeds until it is.
    bool replaced_subject = false;
    for (uint64_t seed = 0; seed < 32 && !replaced_subject; ++seed) {
        Rng rng(seed);
        AugmentCounters counters;
        auto sample = intrinsic_augment(view, 0, fx.bank, fx.clusters, cfg, rng, &counters);
        if (sample && sample->replaced_role == 0) {
            replaced_subject = true;
            CHECK(sample->replacement_class == 1);  // dog -> cat
            CHECK(sample->sub_target == 1);
            CHECK(sample->obj_target == 2);
            CHECK(sample->predicate_target == PredicateTarget::onehot(2));
            // The replacement feature comes from the cat-laying_on-bed entry.
            const auto& entry = fx.bank.entries[static_cast<size_t>(sample->bank_entry)];
            CHECK(entry.sub_class == 1);
            CHECK(sample->v_s == entry.v_s);
            CHECK(sample->contrastive_pairs.empty());
        }
    }
    CHECK(replaced_subject);
}

TEST_CASE("intrinsic augmentation no-ops") {
    EngineFixture fx;
    const Scene& query_scene = fx.ds.scenes[8];
    SceneView view = SceneView::from_scene(query_scene);
    AugmentConfig cfg;

    SUBCASE("singleton cluster leaves nothing to swap") {
        ClusterAssignment lonely;
        lonely.k = 3;
        lonely.assignment = {0, 1, 2};
        Rng rng(1);
        AugmentCounters counters;
        auto sample = intrinsic_augment(view, 0, fx.bank, lonely, cfg, rng, &counters);
        CHECK_FALSE(sample.has_value());
        CHECK(counters.intrinsic_no_alternative == 1);
        CHECK(counters.intrinsic_fired == 0);
    }

    SUBCASE("sigma = 1 forces a bank miss") {
        cfg.sigma = 1.0;  // cosine can never exceed 1
        Rng rng(1);
        AugmentCounters counters;
        auto sample = intrinsic_augment(view, 0, fx.bank, fx.clusters, cfg, rng, &counters);
        CHECK_FALSE(sample.has_value());
        CHECK(counters.intrinsic_misses + counters.intrinsic_no_alternative == 1);
    }

    SUBCASE("non-tail query predicate is rejected") {
        SceneView head_view = SceneView::from_scene(fx.ds.scenes[0]);
        Rng rng(1);
        CHECK_THROWS_AS(
            intrinsic_augment(head_view, 0, fx.bank, fx.clusters, cfg, rng, nullptr),
            InvariantError);
    }
}

TEST_CASE("select_context_triplets: probabilities and bank gating") {
    EngineFixture fx;

    SUBCASE("gamma = 0 and bg_rate = 0 select nothing") {
        SceneView view = SceneView::from_scene(fx.ds.scenes[0]);
        SamplerConfig cfg;
        cfg.gamma = 0.0;
        cfg.bg_rate = 0.0;
        Rng rng(2);
        CHECK(select_context_triplets(view, fx.stats, cfg, fx.bank, rng).empty());
    }

    SUBCASE("fg selection frequency matches p over many trials") {
        SceneView view = SceneView::from_scene(fx.ds.scenes[0]);
        SamplerConfig cfg;
        cfg.bg_rate = 0.0;
        // Head predicate: f = 8/10, eta_r = sqrt(lambda/f). Pick lambda so
        // p = (1 - eta_r) * gamma = 0.25.
        cfg.lambda = 0.8 * 0.25;  // eta_r = 0.5
        cfg.gamma = 0.5;
        const int trials = 10000;
        int hits = 0;
        for (int t = 0; t < trials; ++t) {
            Rng rng(mix_seed({99, static_cast<uint64_t>(t)}));
            auto got = select_context_triplets(view, fx.stats, cfg, fx.bank, rng);
            for (const auto& c : got)
                if (c.kind == ContextKind::fg) ++hits;
        }
        CHECK(hits > 2500 - 100);
        CHECK(hits < 2500 + 100);
    }

    SUBCASE("unannotated pair whose class pair is banked becomes a bg candidate") {
        // Scene with a cat and a bed but no annotated pair between them.
        Dataset d2;
        d2.vocab = fx.ds.vocab;
        Rng srng(55);
        d2.scenes.push_back(testutil::make_scene("bg", {1, 2, 0}, {{2, 1, 1}}, 4, &srng));
        SceneView view = SceneView::from_scene(d2.scenes[0]);
        SamplerConfig cfg;
        cfg.gamma = 0.0;
        cfg.bg_rate = 1.0;
        Rng rng(3);
        auto got = select_context_triplets(view, fx.stats, cfg, fx.bank, rng);
        bool found_cat_bed = false;
        for (const auto& c : got) {
            CHECK(c.kind == ContextKind::bg);
            // Every bg candidate's class pair must exist in the bank.
            std::pair<int, int> cp{view.class_ids[static_cast<size_t>(c.sub_idx)],
                                   view.class_ids[static_cast<size_t>(c.obj_idx)]};
            CHECK(fx.bank.by_pair.count(cp) == 1);
            if (cp == std::pair<int, int>{1, 2}) found_cat_bed = true;
        }
        CHECK(found_cat_bed);
    }
}

TEST_CASE("extrinsic augmentation mixes features and targets") {
    EngineFixture fx;
    const Scene& ctx_scene = fx.ds.scenes[0];  // dog-on-bed
    SceneView view = SceneView::from_scene(ctx_scene);
    ContextCandidate ctx{0, 1, ContextKind::fg, 0};
    AugmentConfig cfg;
    cfg.sigma = -1.0;
    cfg.theta = 0.5;
    Rng rng(12);
    AugmentCounters counters;
    auto sample = extrinsic_augment(view, ctx, fx.bank, cfg, rng, &counters);
    REQUIRE(sample.has_value());
    const auto& entry = fx.bank.entries[static_cast<size_t>(sample->bank_entry)];
    // Features are the midpoint of context and query.
    for (size_t d = 0; d < sample->v_s.size(); ++d) {
        CHECK(sample->v_s[d] ==
              doctest::Approx(0.5 * view.features[0][d] + 0.5 * entry.v_s[d]).epsilon(1e-15));
        CHECK(sample->u[d] ==
              doctest::Approx(0.5 * view.pairs[0].u[d] + 0.5 * entry.u[d]).epsilon(1e-15));
    }
    // Target: {on: 0.5, laying_on: 0.5}.
    CHECK(sample->predicate_target.first == 1);
    CHECK(sample->predicate_target.first_w == 0.5);
    CHECK(sample->predicate_target.second == 2);
    CHECK(sample->predicate_target.second_w == 0.5);
    CHECK(sample->contrastive_pairs.size() == 2);
    CHECK(sample->contrastive_pairs[0].first == view.features[0]);
    CHECK(sample->contrastive_pairs[0].second == sample->v_s);
    // Entity targets are unchanged by mixup.
    CHECK(sample->sub_target == 0);
    CHECK(sample->obj_target == 2);
}

TEST_CASE("theta = 1 extrinsic augmentation is bit-identical to a no-op") {
    EngineFixture fx;
    const Scene& ctx_scene = fx.ds.scenes[0];
    SceneView view = SceneView::from_scene(ctx_scene);
    ContextCandidate ctx{0, 1, ContextKind::fg, 0};
    AugmentConfig cfg;
    cfg.sigma = -1.0;
    cfg.theta = 1.0;
    Rng rng(12);
    auto sample = extrinsic_augment(view, ctx, fx.bank, cfg, rng, nullptr);
    REQUIRE(sample.has_value());
    CHECK(std::memcmp(sample->v_s.data(), view.features[0].data(),
                      sample->v_s.size() * sizeof(double)) == 0);
    CHECK(std::memcmp(sample->v_o.data(), view.features[1].data(),
                      sample->v_o.size() * sizeof(double)) == 0);
    CHECK(std::memcmp(sample->u.data(), view.pairs[0].u.data(),
                      sample->u.size() * sizeof(double)) == 0);
    CHECK(sample->predicate_target == PredicateTarget::onehot(1));
}

TEST_CASE("bg contexts mix against the no-relation target") {
    EngineFixture fx;
    Dataset d2;
    d2.vocab = fx.ds.vocab;
    Rng srng(56);
    d2.scenes.push_back(testutil::make_scene("bg", {1, 2, 0}, {{2, 1, 1}}, 4, &srng));
    SceneView view = SceneView::from_scene(d2.scenes[0]);
    ContextCandidate ctx{0, 1, ContextKind::bg, -1};  // cat-bed unannotated
    AugmentConfig cfg;
    cfg.sigma = -1.0;
    cfg.theta = 0.5;
    Rng rng(4);
    auto sample = extrinsic_augment(view, ctx, fx.bank, cfg, rng, nullptr);
    REQUIRE(sample.has_value());
    CHECK(sample->predicate_target.first == 0);  // no-relation
    CHECK(sample->predicate_target.second == 2);
    CHECK(sample->predicate_target.first_w == 0.5);
}

TEST_CASE("mix_features identities") {
    std::vector<double> a{1.0, 0.0, -0.5}, b{0.0, 1.0, 2.5};
    CHECK(mix_features(a, b, 0.0) == b);
    CHECK(mix_features(a, b, 1.0) == a);
    auto mid = mix_features(a, b, 0.5);
    CHECK(mid == std::vector<double>{0.5, 0.5, 1.0});
    // mix(a, b, t) = mix(b, a, 1 - t) exactly for t where both sides compute.
    Rng rng(2);
    for (int it = 0; it < 50; ++it) {
        double t = rng.uniform();
        auto lhs = mix_features(a, b, t);
        auto rhs = mix_features(b, a, 1.0 - t);
        for (size_t d = 0; d < a.size(); ++d) CHECK(lhs[d] == doctest::Approx(rhs[d]).epsilon(1e-15));
    }
    CHECK_THROWS_AS(mix_features(a, {1.0}, 0.5), InvariantError);
}

TEST_CASE("predicate targets stay normalized with at most two support points") {
    Rng rng(6);
    for (int it = 0; it < 100; ++it) {
        double t = rng.uniform();
        auto target = PredicateTarget::mixed(1, 2, t);
        double sum = target.first_w + (target.second >= 0 ? target.second_w : 0.0);
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(target.first_w >= 0.0);
    }
    CHECK(PredicateTarget::mixed(3, 3, 0.7) == PredicateTarget::onehot(3));
    CHECK(PredicateTarget::mixed(1, 2, 1.0) == PredicateTarget::onehot(1));
    CHECK(PredicateTarget::mixed(1, 2, 0.0) == PredicateTarget::onehot(2));
}
