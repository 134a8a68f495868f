#include <doctest.h>

#include "cfa/binio.hpp"
#include "cfa/feature_bank.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace cfa;

TEST_CASE("empty tail set gives an empty bank") {
    Dataset ds = testutil::random_micro_dataset(1);
    auto bank = build_bank(ds.scenes, ds.vocab, {});
    CHECK(bank.entries.empty());
    CHECK(bank.by_triplet.empty());
    CHECK(bank.by_pair.empty());
}

TEST_CASE("singleton bank is retrievable through both indices") {
    Dataset ds;
    ds.vocab = testutil::make_vocab(3, 2);
    Rng rng(5);
    ds.scenes.push_back(testutil::make_scene("s", {0, 1, 2}, {{0, 1, 2}, {1, 2, 1}}, 4, &rng));
    auto bank = build_bank(ds.scenes, ds.vocab, {2});
    REQUIRE(bank.entries.size() == 1);
    const auto& e = bank.entries[0];
    CHECK(e.predicate_id == 2);
    CHECK(e.sub_class == 0);
    CHECK(e.obj_class == 1);
    CHECK(e.image_id == "s");
    Vec2 q = e.p_vec;
    CHECK(query_by_triplet(bank, {0, 2, 1}, q, -1.0) == std::vector<int>{0});
    CHECK(query_by_pair(bank, {0, 1}, q, -1.0) == std::vector<int>{0});
    CHECK(query_by_pair(bank, {1, 0}, q, -1.0).empty());
}

TEST_CASE("bank size equals the brute-force tail relation count on random scenes") {
    for (uint64_t seed = 500; seed < 520; ++seed) {
        Dataset ds = testutil::random_micro_dataset(seed, 10, 6, 6);
        std::set<int> tail{5, 6};
        auto bank = build_bank(ds.scenes, ds.vocab, tail);
        size_t expect = 0;
        for (const auto& scene : ds.scenes)
            for (const auto& rel : scene.relations)
                if (tail.count(rel.predicate_id)) ++expect;
        CHECK(bank.entries.size() == expect);
        // Rebuild is identical.
        CHECK(bank == build_bank(ds.scenes, ds.vocab, tail));
    }
}

TEST_CASE("missing features make the build fail and name the scene") {
    Dataset ds;
    ds.vocab = testutil::make_vocab(2, 1);
    ds.scenes.push_back(testutil::make_scene("nofeat", {0, 1}, {{0, 1, 1}}, 3));
    for (auto& ent : ds.scenes[0].entities) ent.feature.clear();
    try {
        build_bank(ds.scenes, ds.vocab, {1});
        FAIL("expected InvariantError");
    } catch (const InvariantError& e) {
        CHECK(std::string(e.what()).find("nofeat") != std::string::npos);
    }
}

TEST_CASE("spatial restriction semantics") {
    Dataset ds;
    ds.vocab = testutil::make_vocab(2, 1);
    Scene scene;
    scene.image_id = "s";
    scene.width = scene.height = 100;
    Entity a, b;
    a.class_id = 0;
    a.box = {10, 40, 20, 50};
    a.feature = {1.0, 0.0};
    b.class_id = 1;
    b.box = {10, 10, 20, 20};  // directly above a: offset (0, -30)
    b.feature = {0.0, 1.0};
    scene.entities = {a, b};
    Relation rel;
    rel.sub_idx = 0;
    rel.obj_idx = 1;
    rel.predicate_id = 1;
    rel.union_feature = {0.5, 0.5};
    scene.relations = {rel};
    ds.scenes.push_back(scene);

    auto bank = build_bank(ds.scenes, ds.vocab, {1});
    REQUIRE(bank.entries.size() == 1);
    // Entry direction is (0, -30). An orthogonal query fails sigma = 0.5.
    CHECK(query_by_triplet(bank, {0, 1, 1}, {1, 0}, 0.5).empty());
    // Identical direction passes any sigma < 1.
    CHECK(query_by_triplet(bank, {0, 1, 1}, {0, -5}, 0.999) == std::vector<int>{0});
    // sigma = -1 admits every nonzero direction.
    CHECK(query_by_triplet(bank, {0, 1, 1}, {1, 1}, -1.0) == std::vector<int>{0});
    // Zero query vector never passes.
    CHECK(query_by_triplet(bank, {0, 1, 1}, {0, 0}, -1.0).empty());
}

TEST_CASE("queries equal a linear-scan oracle and shrink as sigma grows") {
    Rng rng(77);
    for (uint64_t seed = 600; seed < 620; ++seed) {
        Dataset ds = testutil::random_micro_dataset(seed, 10, 5, 4);
        std::set<int> tail{3, 4};
        auto bank = build_bank(ds.scenes, ds.vocab, tail);
        for (int trial = 0; trial < 10; ++trial) {
            int sub = static_cast<int>(rng.uniform_int(5));
            int obj = static_cast<int>(rng.uniform_int(5));
            int pred = 3 + static_cast<int>(rng.uniform_int(2));
            Vec2 q{rng.uniform(-1, 1), rng.uniform(-1, 1)};
            double sigma_lo = rng.uniform(-1.0, 0.5);
            double sigma_hi = rng.uniform(sigma_lo, 1.0);

            auto got_t = query_by_triplet(bank, {sub, pred, obj}, q, sigma_lo);
            CHECK(got_t == oracle::brute_query(bank, false, sub, pred, obj, q, sigma_lo));
            auto got_p = query_by_pair(bank, {sub, obj}, q, sigma_lo);
            CHECK(got_p == oracle::brute_query(bank, true, sub, 0, obj, q, sigma_lo));

            // Monotone shrinkage: the sigma_hi result is a subset.
            auto tighter = query_by_pair(bank, {sub, obj}, q, sigma_hi);
            for (int id : tighter)
                CHECK(std::find(got_p.begin(), got_p.end(), id) != got_p.end());

            // Every returned entry matches its key exactly.
            for (int id : got_t) {
                const auto& e = bank.entries[static_cast<size_t>(id)];
                CHECK(e.sub_class == sub);
                CHECK(e.obj_class == obj);
                CHECK(e.predicate_id == pred);
            }
        }
    }
}

TEST_CASE("bank save/load round-trips bitwise") {
    SUBCASE("empty bank") {
        testutil::TempDir tmp("bank_empty");
        FeatureBank bank;
        bank.dim = 0;
        save_bank(bank, tmp.path);
        CHECK(load_bank(tmp.path) == bank);
    }
    SUBCASE("single entry") {
        testutil::TempDir tmp("bank_one");
        Dataset ds;
        ds.vocab = testutil::make_vocab(3, 2);
        Rng rng(9);
        ds.scenes.push_back(testutil::make_scene("s", {0, 1}, {{0, 1, 2}}, 4, &rng));
        auto bank = build_bank(ds.scenes, ds.vocab, {2});
        save_bank(bank, tmp.path);
        CHECK(load_bank(tmp.path) == bank);
    }
    SUBCASE("large random bank") {
        testutil::TempDir tmp("bank_big");
        FeatureBank bank;
        bank.dim = 8;
        bank.tail_set = {1, 2, 3};
        Rng rng(123);
        for (int i = 0; i < 1000; ++i) {
            BankEntry e;
            e.sub_class = static_cast<int>(rng.uniform_int(6));
            e.obj_class = static_cast<int>(rng.uniform_int(6));
            e.predicate_id = 1 + static_cast<int>(rng.uniform_int(3));
            for (int d = 0; d < 8; ++d) {
                e.v_s.push_back(static_cast<double>(static_cast<float>(rng.uniform(-2, 2))));
                e.v_o.push_back(static_cast<double>(static_cast<float>(rng.uniform(-2, 2))));
                e.u.push_back(static_cast<double>(static_cast<float>(rng.uniform(-2, 2))));
            }
            e.p_vec = {rng.uniform(-100, 100), rng.uniform(-100, 100)};
            e.image_id = "img" + std::to_string(i % 37);
            bank.by_triplet[{e.sub_class, e.predicate_id, e.obj_class}].push_back(i);
            bank.by_pair[{e.sub_class, e.obj_class}].push_back(i);
            bank.entries.push_back(std::move(e));
        }
        save_bank(bank, tmp.path);
        auto loaded = load_bank(tmp.path);
        CHECK(loaded == bank);  // includes bitwise-equal vectors
    }
}

TEST_CASE("bank load rejects version and dimension mismatches") {
    testutil::TempDir tmp("bank_bad");
    FeatureBank bank;
    bank.dim = 2;
    save_bank(bank, tmp.path);
    // Corrupt the manifest dimension.
    auto manifest_path = tmp.path / "bank.json";
    std::string text = read_file_bytes(manifest_path);
    auto pos = text.find("\"dim\": 2");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 8, "\"dim\": 9");
    write_text_file(manifest_path, text);
    CHECK_THROWS_AS(load_bank(tmp.path), DataFormatError);
    CHECK_THROWS_AS(load_bank("/nonexistent/bankdir"), MissingInputError);
}
