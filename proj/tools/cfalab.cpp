// cfalab: command-line driver for the compositional feature augmentation lab.
//
// Subcommands: synth, stats, cluster, bank, train, eval, compare.
// Exit codes: 0 success, 2 missing input, 3 malformed input or invariant
// violation, 1 anything else.

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cfa/binio.hpp"
#include "cfa/experiment.hpp"

using nlohmann::json;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::string data_dir;
    std::string checkpoint;
    std::string report_a, report_b;
    std::optional<uint64_t> seed;
};

cfa::ExperimentConfig load_config(const CommonArgs& args) {
    return cfa::load_experiment_config(args.config_path, args.seed);
}

std::filesystem::path ensure_out(const CommonArgs& args) {
    if (args.out_dir.empty()) throw cfa::MissingInputError("--out is required");
    std::filesystem::path out(args.out_dir);
    std::filesystem::create_directories(out);
    return out;
}

cfa::Dataset load_data(const cfa::ExperimentConfig& cfg, const CommonArgs& args) {
    std::filesystem::path dir = args.data_dir.empty() ? cfg.dataset : std::filesystem::path(args.data_dir);
    if (dir.empty()) throw cfa::MissingInputError("no dataset: set 'dataset' in the config or pass --data");
    return cfa::load_dataset(dir);
}

int cmd_synth(const CommonArgs& args) {
    auto cfg = load_config(args);
    auto out = ensure_out(args);
    cfa::WorldModel world = cfa::generate_world(cfg.synth);
    cfa::Dataset train = cfa::generate_dataset(world, cfg.synth, cfg.synth.scenes, 0, "scene");
    cfa::write_dataset(out / "train", train);
    std::vector<std::string> outputs{"train"};
    if (cfg.synth.val_scenes > 0) {
        cfa::Dataset val = cfa::generate_dataset(world, cfg.synth, cfg.synth.val_scenes, 1, "val");
        cfa::write_dataset(out / "val", val);
        outputs.push_back("val");
    }
    cfa::write_manifest(out, "synth", cfg.config_hash_hex(), outputs);
    std::cout << "synth: wrote " << train.scenes.size() << " train scenes";
    if (cfg.synth.val_scenes > 0) std::cout << " and " << cfg.synth.val_scenes << " val scenes";
    std::cout << " to " << out.string() << "\n";
    return 0;
}

int cmd_stats(const CommonArgs& args) {
    auto cfg = load_config(args);
    auto out = ensure_out(args);
    cfa::Dataset data = load_data(cfg, args);
    auto stats = cfa::compute_stats(data.scenes, data.vocab);
    auto groups = cfa::split_head_body_tail(stats, cfg.stats.tail_quantile, cfg.stats.head_quantile);
    cfa::write_text_file(out / "stats.json",
                         cfa::stats_to_json(stats, data.vocab, groups, cfg).dump(2) + "\n");
    cfa::write_manifest(out, "stats", cfg.config_hash_hex(), {"stats.json"});
    std::cout << "stats: " << stats.total_relations << " relations, " << groups.head.size()
              << " head / " << groups.body.size() << " body / " << groups.tail.size()
              << " tail predicates\n";
    return 0;
}

int cmd_cluster(const CommonArgs& args) {
    auto cfg = load_config(args);
    auto out = ensure_out(args);
    cfa::Dataset data = load_data(cfg, args);
    auto stats = cfa::compute_stats(data.scenes, data.vocab);
    std::vector<std::string> warnings;
    auto combined = cfa::combined_similarity(stats, data.embeddings, cfg.cluster.weights,
                                             cfa::Execution::parallel, &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    std::vector<cfa::MergeStep> merge_log;
    auto clusters = cfa::cluster_entities(combined, cfg.cluster.k, &merge_log);
    cfa::write_text_file(out / "clusters.json",
                         cfa::clusters_to_json(clusters, data.vocab, cfg, merge_log).dump(2) + "\n");
    cfa::write_manifest(out, "cluster", cfg.config_hash_hex(), {"clusters.json"});
    std::cout << "cluster: " << clusters.k << " clusters over " << data.vocab.n_entity_classes()
              << " classes\n";
    return 0;
}

int cmd_bank(const CommonArgs& args) {
    auto cfg = load_config(args);
    auto out = ensure_out(args);
    cfa::Dataset data = load_data(cfg, args);
    auto stats = cfa::compute_stats(data.scenes, data.vocab);
    auto groups = cfa::split_head_body_tail(stats, cfg.stats.tail_quantile, cfg.stats.head_quantile);
    auto bank = cfa::build_bank(data.scenes, data.vocab, groups.tail);
    cfa::save_bank(bank, out);
    cfa::write_manifest(out, "bank", cfg.config_hash_hex(), {"bank.bin", "bank.json"});
    std::cout << "bank: " << bank.entries.size() << " tail triplet entries\n";
    return 0;
}

int cmd_train(const CommonArgs& args) {
    auto cfg = load_config(args);
    auto out = ensure_out(args);
    cfa::Dataset data = load_data(cfg, args);
    std::optional<cfa::Dataset> val;
    if (cfg.val_dataset) val = cfa::load_dataset(*cfg.val_dataset);
    auto artifacts = cfa::build_artifacts(data, cfg);
    auto result = cfa::run_training(data, val ? &*val : nullptr, artifacts, cfg);

    cfa::save_checkpoint(result.params, out / "checkpoint.bin", cfg.config_hash());
    cfa::write_text_file(out / "train_log.csv", cfa::train_log_to_csv(result.log, cfg));
    std::ostringstream trace;
    json meta;
    meta["tool_version"] = cfa::kToolVersion;
    meta["config_hash"] = cfg.config_hash_hex();
    trace << meta.dump() << "\n";
    for (const auto& rec : result.trace) trace << rec.dump() << "\n";
    json summary;
    summary["summary"] = {{"intrinsic_attempts", result.counters.intrinsic_attempts},
                          {"intrinsic_fired", result.counters.intrinsic_fired},
                          {"intrinsic_no_alternative", result.counters.intrinsic_no_alternative},
                          {"intrinsic_misses", result.counters.intrinsic_misses},
                          {"extrinsic_fg_attempts", result.counters.extrinsic_fg_attempts},
                          {"extrinsic_fg_fired", result.counters.extrinsic_fg_fired},
                          {"extrinsic_fg_misses", result.counters.extrinsic_fg_misses},
                          {"extrinsic_bg_attempts", result.counters.extrinsic_bg_attempts},
                          {"extrinsic_bg_fired", result.counters.extrinsic_bg_fired},
                          {"extrinsic_bg_misses", result.counters.extrinsic_bg_misses}};
    trace << summary.dump() << "\n";
    cfa::write_text_file(out / "augtrace.jsonl", trace.str());
    cfa::write_manifest(out, "train", cfg.config_hash_hex(),
                        {"checkpoint.bin", "train_log.csv", "augtrace.jsonl"});
    if (!result.log.empty()) {
        const auto& last = result.log.back();
        std::cout << "train: " << result.log.size() << " epochs, final L_rel=" << last.rel;
        if (last.val_mr20) std::cout << " val mR@20=" << *last.val_mr20;
        std::cout << "\n";
    }
    return 0;
}

int cmd_eval(const CommonArgs& args) {
    auto cfg = load_config(args);
    auto out = ensure_out(args);
    if (args.checkpoint.empty()) throw cfa::MissingInputError("--checkpoint is required for eval");
    cfa::ModelParams params = cfa::load_checkpoint(args.checkpoint);

    // Frequency groups always come from the training split named in the
    // config; --data picks the split to evaluate (default: val when present).
    cfa::Dataset train_data = cfa::load_dataset(cfg.dataset);
    auto stats = cfa::compute_stats(train_data.scenes, train_data.vocab);
    auto groups = cfa::split_head_body_tail(stats, cfg.stats.tail_quantile, cfg.stats.head_quantile);

    std::filesystem::path eval_dir;
    if (!args.data_dir.empty())
        eval_dir = args.data_dir;
    else if (cfg.val_dataset)
        eval_dir = *cfg.val_dataset;
    else
        eval_dir = cfg.dataset;
    cfa::Dataset eval_data = eval_dir == cfg.dataset ? std::move(train_data) : cfa::load_dataset(eval_dir);

    auto report = cfa::evaluate_dataset(params, eval_data, groups, cfg);
    json jr = cfa::report_to_json(report, eval_data, cfg);
    cfa::write_text_file(out / "report.json", jr.dump(2) + "\n");
    cfa::write_text_file(out / "report.csv", cfa::report_to_csv(report, eval_data, cfg));
    cfa::write_manifest(out, "eval", cfg.config_hash_hex(), {"report.json", "report.csv"});
    std::cout << "eval:";
    for (int k : report.ks)
        std::cout << " R@" << k << "=" << report.recall.at(k) << " mR@" << k << "="
                  << report.mean_recall.at(k);
    std::cout << " Mean=" << report.mean << "\n";
    return 0;
}

int cmd_compare(const CommonArgs& args) {
    auto out = ensure_out(args);
    if (args.report_a.empty() || args.report_b.empty())
        throw cfa::MissingInputError("compare needs --a and --b report paths");
    auto parse = [](const std::string& path) {
        json j = json::parse(cfa::read_file_bytes(path), nullptr, false);
        if (j.is_discarded()) throw cfa::DataFormatError(path + ": invalid JSON");
        return j;
    };
    json a = parse(args.report_a);
    json b = parse(args.report_b);
    json cmp = cfa::compare_reports(a, b);
    cfa::write_text_file(out / "compare.json", cmp.dump(2) + "\n");
    cfa::write_text_file(out / "recall_vs_frequency.csv", cfa::recall_vs_frequency_csv(a, b));
    std::string hash = cmp["config_hash_a"].get<std::string>() + "+" +
                       cmp["config_hash_b"].get<std::string>();
    cfa::write_manifest(out, "compare", hash, {"compare.json", "recall_vs_frequency.csv"});

    std::printf("%-12s %12s %12s %12s %9s\n", "metric", "a", "b", "delta", "rel");
    for (const auto& row : cmp["metrics"]) {
        double rel = row["rel_delta"].is_null() ? 0.0 : row["rel_delta"].get<double>();
        std::printf("%-12s %12.6f %12.6f %+12.6f %+8.1f%%\n",
                    row["metric"].get<std::string>().c_str(), row["a"].get<double>(),
                    row["b"].get<double>(), row["delta"].get<double>(),
                    row["rel_delta"].is_null() ? 0.0 : 100.0 * rel);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"compositional feature augmentation lab"};
    app.require_subcommand(1);

    CommonArgs args;
    uint64_t seed_value = 0;
    std::vector<CLI::Option*> seed_options;

    auto add_common = [&](CLI::App* sub, bool needs_config) {
        auto* copt = sub->add_option("--config", args.config_path, "experiment config (JSON)");
        if (needs_config) copt->required();
        sub->add_option("--out", args.out_dir, "output directory")->required();
        seed_options.push_back(sub->add_option("--seed", seed_value, "override the config seed"));
    };

    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset directory");
    add_common(synth, true);
    auto* stats = app.add_subcommand("stats", "dataset statistics and frequency groups");
    add_common(stats, true);
    stats->add_option("--data", args.data_dir, "dataset directory (default: config dataset)");
    auto* cluster = app.add_subcommand("cluster", "entity-category similarity clustering");
    add_common(cluster, true);
    cluster->add_option("--data", args.data_dir, "dataset directory (default: config dataset)");
    auto* bank = app.add_subcommand("bank", "build the tail-triplet feature bank");
    add_common(bank, true);
    bank->add_option("--data", args.data_dir, "dataset directory (default: config dataset)");
    auto* train = app.add_subcommand("train", "train the relation classifier");
    add_common(train, true);
    train->add_option("--data", args.data_dir, "dataset directory (default: config dataset)");
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    add_common(eval, true);
    eval->add_option("--checkpoint", args.checkpoint, "checkpoint file")->required();
    eval->add_option("--data", args.data_dir, "dataset directory to evaluate");
    auto* compare = app.add_subcommand("compare", "delta table between two reports");
    compare->add_option("--a", args.report_a, "baseline report.json")->required();
    compare->add_option("--b", args.report_b, "comparison report.json")->required();
    compare->add_option("--out", args.out_dir, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    for (const CLI::Option* opt : seed_options)
        if (opt->count() > 0) args.seed = seed_value;

    try {
        if (synth->parsed()) return cmd_synth(args);
        if (stats->parsed()) return cmd_stats(args);
        if (cluster->parsed()) return cmd_cluster(args);
        if (bank->parsed()) return cmd_bank(args);
        if (train->parsed()) return cmd_train(args);
        if (eval->parsed()) return cmd_eval(args);
        if (compare->parsed()) return cmd_compare(args);
    } catch (const cfa::MissingInputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const cfa::DataFormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const cfa::InvariantError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
