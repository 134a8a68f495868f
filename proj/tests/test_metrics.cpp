#include <doctest.h>

#include <algorithm>

#include "cfa/metrics.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace cfa;

namespace {

std::vector<RankedTriplet> ranked_list(std::initializer_list<RankedTriplet> items) {
    return std::vector<RankedTriplet>(items);
}

}  // namespace

TEST_CASE("recall_at_k counting") {
    std::vector<std::vector<RankedTriplet>> ranked{ranked_list({{0, 1, 1, 0.9},
                                                                {1, 2, 2, 0.8},
                                                                {0, 2, 1, 0.7},
                                                                {2, 0, 3, 0.6}})};
    std::vector<std::vector<GtTriplet>> gt{{{0, 1, 1}, {1, 2, 2}, {0, 2, 1}, {2, 1, 3}}};
    // All four GT present? The ranked list hits 3 of 4 within the top 4.
    CHECK(recall_at_k(ranked, gt, 4) == doctest::Approx(0.75).epsilon(1e-12));
    // Everything inside top-K when the list holds all GT.
    std::vector<std::vector<GtTriplet>> gt2{{{0, 1, 1}, {1, 2, 2}}};
    CHECK(recall_at_k(ranked, gt2, 4) == doctest::Approx(1.0));
    CHECK_THROWS_AS(recall_at_k(ranked, {{}}, 5), InvariantError);
    CHECK_THROWS_AS(recall_at_k(ranked, gt, 0), InvariantError);
}

TEST_CASE("mean recall: per-class pooling and collapse to recall for one class") {
    // Two images; predicate 1 has 2 GT (both hit), predicate 2 has 2 GT (one hit).
    std::vector<std::vector<RankedTriplet>> ranked{
        ranked_list({{0, 1, 1, 0.9}, {1, 2, 2, 0.8}}),
        ranked_list({{0, 1, 1, 0.9}, {1, 2, 3, 0.8}})};
    std::vector<std::vector<GtTriplet>> gt{{{0, 1, 1}, {1, 2, 2}}, {{0, 1, 1}, {1, 2, 2}}};
    std::map<int, PredicateRecall> per;
    double mr = mean_recall_at_k(ranked, gt, 5, &per);
    CHECK(per[1].gt == 2);
    CHECK(per[1].hits == 2);
    CHECK(per[2].gt == 2);
    CHECK(per[2].hits == 1);
    CHECK(mr == doctest::Approx(0.75).epsilon(1e-12));  // (1.0 + 0.5) / 2

    // Single predicate: mR collapses to pooled recall.
    std::vector<std::vector<GtTriplet>> gt_single{{{0, 1, 1}}, {{0, 1, 1}}};
    CHECK(mean_recall_at_k(ranked, gt_single, 5) ==
          doctest::Approx(recall_at_k(ranked, gt_single, 5)).epsilon(1e-12));
}

TEST_CASE("metrics equal brute-force oracles on random prediction lists") {
    Rng rng(17);
    for (int trial = 0; trial < 60; ++trial) {
        int images = 1 + static_cast<int>(rng.uniform_int(6));
        std::vector<std::vector<RankedTriplet>> ranked(static_cast<size_t>(images));
        std::vector<std::vector<GtTriplet>> gt(static_cast<size_t>(images));
        for (int img = 0; img < images; ++img) {
            int n_ent = 3 + static_cast<int>(rng.uniform_int(3));
            std::set<std::array<int, 3>> seen;
            int n_pred = static_cast<int>(rng.uniform_int(12));
            for (int i = 0; i < n_pred; ++i) {
                int s = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(n_ent)));
                int o = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(n_ent)));
                int p = 1 + static_cast<int>(rng.uniform_int(4));
                if (s == o || !seen.insert({s, o, p}).second) continue;
                ranked[static_cast<size_t>(img)].push_back({s, o, p, rng.uniform()});
            }
            std::sort(ranked[static_cast<size_t>(img)].begin(), ranked[static_cast<size_t>(img)].end(),
                      [](const RankedTriplet& a, const RankedTriplet& b) {
                          if (a.confidence != b.confidence) return a.confidence > b.confidence;
                          if (a.sub_idx != b.sub_idx) return a.sub_idx < b.sub_idx;
                          if (a.obj_idx != b.obj_idx) return a.obj_idx < b.obj_idx;
                          return a.predicate_id < b.predicate_id;
                      });
            int n_gt = static_cast<int>(rng.uniform_int(5));
            std::set<std::pair<int, int>> used;
            for (int i = 0; i < n_gt; ++i) {
                // Half the GT copies a ranked entry so hits actually occur.
                if (!ranked[static_cast<size_t>(img)].empty() && rng.bernoulli(0.5)) {
                    const auto& r = ranked[static_cast<size_t>(img)]
                                          [rng.uniform_int(ranked[static_cast<size_t>(img)].size())];
                    if (used.insert({r.sub_idx, r.obj_idx}).second)
                        gt[static_cast<size_t>(img)].push_back({r.sub_idx, r.obj_idx, r.predicate_id});
                    continue;
                }
                int s = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(n_ent)));
                int o = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(n_ent)));
                if (s == o || !used.insert({s, o}).second) continue;
                gt[static_cast<size_t>(img)].push_back({s, o, 1 + static_cast<int>(rng.uniform_int(4))});
            }
        }
        bool any_gt = false;
        for (const auto& g : gt) any_gt |= !g.empty();
        if (!any_gt) continue;
        for (int k : {1, 3, 10}) {
            CHECK(recall_at_k(ranked, gt, k) ==
                  doctest::Approx(oracle::brute_recall_at_k(ranked, gt, k)).epsilon(1e-12));
            CHECK(mean_recall_at_k(ranked, gt, k) ==
                  doctest::Approx(oracle::brute_mean_recall_at_k(ranked, gt, k)).epsilon(1e-12));
        }
        // Non-decreasing in K.
        CHECK(recall_at_k(ranked, gt, 3) >= recall_at_k(ranked, gt, 1));
        CHECK(recall_at_k(ranked, gt, 10) >= recall_at_k(ranked, gt, 3));
        CHECK(mean_recall_at_k(ranked, gt, 10) >= mean_recall_at_k(ranked, gt, 1));
        // Invariant to permuting image order (up to summation rounding).
        std::vector<std::vector<RankedTriplet>> ranked_rev(ranked.rbegin(), ranked.rend());
        std::vector<std::vector<GtTriplet>> gt_rev(gt.rbegin(), gt.rend());
        CHECK(recall_at_k(ranked_rev, gt_rev, 3) ==
              doctest::Approx(recall_at_k(ranked, gt, 3)).epsilon(1e-12));
        CHECK(mean_recall_at_k(ranked_rev, gt_rev, 3) ==
              doctest::Approx(mean_recall_at_k(ranked, gt, 3)).epsilon(1e-12));
    }
}

TEST_CASE("mean_metric reproduces the published Mean values") {
    // Motifs PredCls row: mR@50/100 = 16.5/17.8, R@50/100 = 65.5/67.2 -> 41.8.
    CHECK(std::abs(mean_metric({16.5, 17.8, 65.5, 67.2}) - 41.8) <= 0.05 + 1e-12);
    // Motifs+CFA row: 35.7/38.2, 54.1/56.6 -> 46.2.
    CHECK(std::abs(mean_metric({35.7, 38.2, 54.1, 56.6}) - 46.2) <= 0.05 + 1e-12);
    CHECK(mean_metric({3.14, 3.14, 3.14}) == doctest::Approx(3.14).epsilon(1e-12));
    CHECK_THROWS_AS(mean_metric({}), InvariantError);
}

TEST_CASE("group report averages per group and marks absent groups") {
    std::map<int, PredicateRecall> per;
    per[1] = {10, 10};  // recall 1.0
    per[2] = {10, 5};   // recall 0.5
    per[3] = {4, 1};    // recall 0.25
    FrequencyGroups groups;
    groups.head = {1};
    groups.body = {2, 3};
    groups.tail = {4};  // never appears in GT
    auto means = group_report(per, groups);
    REQUIRE(means.head.has_value());
    CHECK(*means.head == doctest::Approx(1.0));
    REQUIRE(means.body.has_value());
    CHECK(*means.body == doctest::Approx(0.375));
    CHECK_FALSE(means.tail.has_value());

    // Singleton groups reproduce the single predicate's recall.
    FrequencyGroups singles;
    singles.head = {1};
    singles.body = {2};
    singles.tail = {3};
    auto m2 = group_report(per, singles);
    CHECK(*m2.tail == doctest::Approx(0.25));
}

TEST_CASE("ranking applies the graph constraint and the declared tie-break") {
    ScenePrediction pred;
    pred.entity_pred = {0, 1, 2};
    pred.entity_conf = {1.0, 1.0, 1.0};
    // Pair (0,1): predicate 2 wins; pair (0,2) ties pair (1,2) on confidence.
    pred.pairs.push_back({0, 1, {0.1, 0.2, 0.6, 0.1}});
    pred.pairs.push_back({0, 2, {0.2, 0.4, 0.2, 0.2}});
    pred.pairs.push_back({1, 2, {0.2, 0.4, 0.2, 0.2}});

    auto ranked = rank_triplets(pred, true);
    REQUIRE(ranked.size() == 3);
    CHECK(ranked[0].sub_idx == 0);
    CHECK(ranked[0].obj_idx == 1);
    CHECK(ranked[0].predicate_id == 2);
    // Tie at 0.4: (0,2) sorts before (1,2).
    CHECK(ranked[1].sub_idx == 0);
    CHECK(ranked[1].obj_idx == 2);
    CHECK(ranked[1].predicate_id == 1);
    CHECK(ranked[2].sub_idx == 1);

    auto unconstrained = rank_triplets(pred, false);
    CHECK(unconstrained.size() == 9);  // every non-background predicate of every pair
    // No duplicates.
    std::set<std::array<int, 3>> seen;
    for (const auto& r : unconstrained)
        CHECK(seen.insert({r.sub_idx, r.obj_idx, r.predicate_id}).second);
}

TEST_CASE("entity confidences scale the ranking confidence") {
    ScenePrediction pred;
    pred.entity_pred = {0, 1};
    pred.entity_conf = {0.5, 0.5};
    pred.pairs.push_back({0, 1, {0.2, 0.8}});
    auto ranked = rank_triplets(pred, true);
    REQUIRE(ranked.size() == 1);
    CHECK(ranked[0].confidence == doctest::Approx(0.8 * 0.25).epsilon(1e-12));
}
