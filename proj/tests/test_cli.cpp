#include <doctest.h>

#include <cstdlib>
#include <fstream>

#include <json.hpp>

#include "cfa/binio.hpp"
#include "test_util.hpp"

using nlohmann::json;

namespace {

#ifndef CFALAB_BIN_PATH
#define CFALAB_BIN_PATH "cfalab"
#endif

int run_cli(const std::string& args) {
    std::string cmd = std::string(CFALAB_BIN_PATH) + " " + args + " >/dev/null 2>&1";
    int status = std::system(cmd.c_str());
    if (status == -1) return -1;
    return WEXITSTATUS(status);
}

json small_experiment(const std::filesystem::path& data_dir) {
    json j;
    j["seed"] = 11;
    j["dataset"] = (data_dir / "train").string();
    j["val_dataset"] = (data_dir / "val").string();
    j["regime"] = "predcls";
    j["synth"] = {{"n_entity_classes", 12}, {"n_predicates", 8},   {"scenes", 120},
                  {"val_scenes", 40},       {"entities_min", 3},   {"entities_max", 5},
                  {"relations_min", 1},     {"relations_max", 3},  {"feature_dim", 6},
                  {"embedding_dim", 4},     {"families", 4},       {"zipf_exponent", 1.3},
                  {"seed", 21}};
    j["stats"] = {{"tail_quantile", 0.5}, {"head_quantile", 0.75}};
    j["cluster"] = {{"k", 4}};
    j["sampler"] = {{"lambda", 0.02}, {"gamma", 0.5}, {"bg_rate", 0.2}};
    j["augment"] = {{"sigma", 0.7}, {"theta", 0.5}};
    j["train"] = {{"lr", 0.2}, {"epochs", 3}, {"batch_size", 8}, {"hidden", 8}};
    j["metrics"] = {{"ks", {10, 20}}, {"graph_constraint", true}};
    return j;
}

void write_json(const std::filesystem::path& path, const json& j) {
    cfa::write_text_file(path, j.dump(2) + "\n");
}

}  // namespace

TEST_CASE("cli end-to-end: synth, stats, cluster, bank, train, eval, compare") {
    testutil::TempDir tmp("cli");
    auto cfg_path = tmp.path / "exp.json";
    write_json(cfg_path, small_experiment(tmp.path / "data"));

    REQUIRE(run_cli("synth --config " + cfg_path.string() + " --out " + (tmp.path / "data").string()) == 0);
    CHECK(std::filesystem::exists(tmp.path / "data/train/scenes.jsonl"));
    CHECK(std::filesystem::exists(tmp.path / "data/val/features.bin"));
    CHECK(std::filesystem::exists(tmp.path / "data/manifest.json"));

    REQUIRE(run_cli("stats --config " + cfg_path.string() + " --out " + (tmp.path / "stats").string()) == 0);
    json stats = json::parse(cfa::read_file_bytes(tmp.path / "stats/stats.json"));
    CHECK(stats.contains("config_hash"));
    CHECK(stats["predicates"].size() == 8);

    REQUIRE(run_cli("cluster --config " + cfg_path.string() + " --out " + (tmp.path / "clusters").string()) ==
            0);
    json clusters = json::parse(cfa::read_file_bytes(tmp.path / "clusters/clusters.json"));
    CHECK(clusters["k"] == 4);
    CHECK(clusters["assignment"].size() == 12);
    CHECK(clusters["clusters"].size() == 4);

    // k = n: every class its own cluster.
    json cfg_kn = small_experiment(tmp.path / "data");
    cfg_kn["cluster"]["k"] = 12;
    write_json(tmp.path / "exp_kn.json", cfg_kn);
    REQUIRE(run_cli("cluster --config " + (tmp.path / "exp_kn.json").string() + " --out " +
                    (tmp.path / "clusters_kn").string()) == 0);
    json singles = json::parse(cfa::read_file_bytes(tmp.path / "clusters_kn/clusters.json"));
    CHECK(singles["clusters"].size() == 12);
    for (const auto& members : singles["clusters"]) CHECK(members.size() == 1);

    REQUIRE(run_cli("bank --config " + cfg_path.string() + " --out " + (tmp.path / "bank").string()) == 0);
    CHECK(std::filesystem::exists(tmp.path / "bank/bank.bin"));

    REQUIRE(run_cli("train --config " + cfg_path.string() + " --out " + (tmp.path / "run1").string()) == 0);
    CHECK(std::filesystem::exists(tmp.path / "run1/checkpoint.bin"));
    CHECK(std::filesystem::exists(tmp.path / "run1/train_log.csv"));
    CHECK(std::filesystem::exists(tmp.path / "run1/augtrace.jsonl"));

    REQUIRE(run_cli("eval --config " + cfg_path.string() + " --checkpoint " +
                    (tmp.path / "run1/checkpoint.bin").string() + " --out " +
                    (tmp.path / "eval1").string()) == 0);
    json report = json::parse(cfa::read_file_bytes(tmp.path / "eval1/report.json"));
    CHECK(report.contains("recall"));
    CHECK(report["recall"].contains("20"));
    CHECK(report.contains("mean"));

    // Determinism: a rerun with the same config+seed is byte-identical.
    REQUIRE(run_cli("train --config " + cfg_path.string() + " --out " + (tmp.path / "run2").string()) == 0);
    CHECK(cfa::read_file_bytes(tmp.path / "run1/checkpoint.bin") ==
          cfa::read_file_bytes(tmp.path / "run2/checkpoint.bin"));
    CHECK(cfa::read_file_bytes(tmp.path / "run1/train_log.csv") ==
          cfa::read_file_bytes(tmp.path / "run2/train_log.csv"));
    CHECK(cfa::read_file_bytes(tmp.path / "run1/augtrace.jsonl") ==
          cfa::read_file_bytes(tmp.path / "run2/augtrace.jsonl"));
    REQUIRE(run_cli("eval --config " + cfg_path.string() + " --checkpoint " +
                    (tmp.path / "run2/checkpoint.bin").string() + " --out " +
                    (tmp.path / "eval2").string()) == 0);
    CHECK(cfa::read_file_bytes(tmp.path / "eval1/report.json") ==
          cfa::read_file_bytes(tmp.path / "eval2/report.json"));

    // A different seed changes the checkpoint; an explicit --seed equal to the
    // config seed reproduces it exactly.
    REQUIRE(run_cli("train --config " + cfg_path.string() + " --seed 999 --out " +
                    (tmp.path / "run3").string()) == 0);
    CHECK(cfa::read_file_bytes(tmp.path / "run1/checkpoint.bin") !=
          cfa::read_file_bytes(tmp.path / "run3/checkpoint.bin"));
    REQUIRE(run_cli("train --config " + cfg_path.string() + " --seed 11 --out " +
                    (tmp.path / "run4").string()) == 0);
    CHECK(cfa::read_file_bytes(tmp.path / "run1/checkpoint.bin") ==
          cfa::read_file_bytes(tmp.path / "run4/checkpoint.bin"));

    // compare: baseline against itself gives zero deltas, different reports
    // produce the table.
    REQUIRE(run_cli("compare --a " + (tmp.path / "eval1/report.json").string() + " --b " +
                    (tmp.path / "eval2/report.json").string() + " --out " +
                    (tmp.path / "cmp").string()) == 0);
    json cmp = json::parse(cfa::read_file_bytes(tmp.path / "cmp/compare.json"));
    CHECK(cmp["metrics"].size() > 0);
    for (const auto& row : cmp["metrics"]) CHECK(row["delta"].get<double>() == 0.0);
    CHECK(std::filesystem::exists(tmp.path / "cmp/recall_vs_frequency.csv"));
}

TEST_CASE("cli exit codes: 2 for missing inputs, 3 for invariant violations") {
    testutil::TempDir tmp("cli_err");
    auto cfg_path = tmp.path / "exp.json";
    json cfg = small_experiment(tmp.path / "data");
    write_json(cfg_path, cfg);

    // Dataset directory does not exist yet.
    CHECK(run_cli("stats --config " + cfg_path.string() + " --out " + (tmp.path / "o1").string()) == 2);
    // Missing config file.
    CHECK(run_cli("stats --config " + (tmp.path / "nope.json").string() + " --out " +
                  (tmp.path / "o2").string()) == 2);

    // Malformed dataset: generate then corrupt a bbox.
    REQUIRE(run_cli("synth --config " + cfg_path.string() + " --out " + (tmp.path / "data").string()) == 0);
    auto scenes_path = tmp.path / "data/train/scenes.jsonl";
    std::string text = cfa::read_file_bytes(scenes_path);
    auto pos = text.find("\"bbox\":[");
    REQUIRE(pos != std::string::npos);
    // Swap in an inverted box: x1 far beyond any x2 on this image.
    text.replace(pos, 8, "\"bbox\":[99999,");
    // Remove the feature files: the manifest no longer matches anyway.
    cfa::write_text_file(scenes_path, text);
    CHECK(run_cli("stats --config " + cfg_path.string() + " --out " + (tmp.path / "o3").string()) == 3);

    // Invalid cluster count.
    json bad = small_experiment(tmp.path / "data2");
    bad["cluster"]["k"] = 999;
    auto bad_path = tmp.path / "bad.json";
    write_json(bad_path, bad);
    REQUIRE(run_cli("synth --config " + bad_path.string() + " --out " + (tmp.path / "data2").string()) == 0);
    CHECK(run_cli("cluster --config " + bad_path.string() + " --out " + (tmp.path / "o4").string()) == 3);
}
