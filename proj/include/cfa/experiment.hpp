#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cfa/augment.hpp"
#include "cfa/common.hpp"
#include "cfa/metrics.hpp"
#include "cfa/model.hpp"
#include "cfa/synthgen.hpp"

namespace cfa {

struct StatsSection {
    double tail_quantile = 0.5;
    double head_quantile = 0.9;
};

struct ClusterSection {
    int k = 15;
    SimilarityWeights weights;
};

struct MetricsSection {
    std::vector<int> ks{20, 50, 100};
    bool graph_constraint = true;
};

// One experiment = one config file. The sections mirror the CLI subcommands;
// every ablation knob (augment toggles, k, theta, gamma, lambda, sigma,
// weights, tau, beta) is a config key.
struct ExperimentConfig {
    uint64_t seed = 1;
    std::filesystem::path dataset;
    std::optional<std::filesystem::path> val_dataset;
    Regime regime = Regime::predcls;
    SynthConfig synth;
    StatsSection stats;
    ClusterSection cluster;
    SamplerConfig sampler;
    AugmentConfig augment;
    TrainConfig train;
    int hidden = 16;
    MetricsSection metrics;
    std::optional<std::filesystem::path> bank_path;      // prebuilt bank directory
    std::optional<std::filesystem::path> clusters_path;  // prebuilt clusters.json

    nlohmann::json resolved;  // the effective config, used for hashing

    uint64_t config_hash() const { return fnv1a64(resolved.dump()); }
    std::string config_hash_hex() const { return hash_hex(config_hash()); }
};

ExperimentConfig experiment_config_from_json(const nlohmann::json& j,
                                             std::optional<uint64_t> seed_override = std::nullopt);
ExperimentConfig load_experiment_config(const std::filesystem::path& path,
                                        std::optional<uint64_t> seed_override = std::nullopt);

struct Artifacts {
    DatasetStats stats;
    FrequencyGroups groups;
    SimilarityMatrix combined;
    ClusterAssignment clusters;
    std::vector<MergeStep> merge_log;
    FeatureBank bank;
};

// Stats, frequency groups, combined similarity, clusters, and the feature
// bank for a loaded dataset. Prebuilt bank/cluster artifacts from the config
// are loaded instead of recomputed when present.
Artifacts build_artifacts(const Dataset& dataset, const ExperimentConfig& config,
                          Execution exec = Execution::parallel);

struct TrainLogRow {
    int epoch = 0;
    double rel = 0.0, obj = 0.0, cl = 0.0;
    std::optional<double> val_mr20, val_r20;
};

struct TrainOutput {
    ModelParams params;
    std::vector<TrainLogRow> log;
    AugmentCounters counters;
    std::vector<nlohmann::json> trace;  // one record per operator firing
};

// The training loop: repeat-factor epochs, per-visit augmentation with
// independent per-operator rng streams, batched forward/backward with
// deterministic gradient reduction, plain SGD. Bitwise-reproducible given
// (config, seed) regardless of thread count.
TrainOutput run_training(const Dataset& train_data, const Dataset* val_data,
                         const Artifacts& artifacts, const ExperimentConfig& config,
                         Execution exec = Execution::parallel, bool collect_trace = true);

struct MetricReport {
    Regime regime = Regime::predcls;
    std::vector<int> ks;
    std::map<int, double> recall;       // k -> R@K
    std::map<int, double> mean_recall;  // k -> mR@K
    double mean = 0.0;                  // mean of all reported R@K and mR@K
    std::map<int, std::map<int, PredicateRecall>> per_predicate;  // k -> predicate -> counts
    std::map<int, GroupMeans> groups;                             // k -> head/body/tail means
};

MetricReport evaluate_dataset(const ModelParams& params, const Dataset& dataset,
                              const FrequencyGroups& groups, const ExperimentConfig& config,
                              Execution exec = Execution::parallel);

nlohmann::json report_to_json(const MetricReport& report, const Dataset& dataset,
                              const ExperimentConfig& config);
std::string report_to_csv(const MetricReport& report, const Dataset& dataset,
                          const ExperimentConfig& config);

std::string train_log_to_csv(const std::vector<TrainLogRow>& log, const ExperimentConfig& config);

nlohmann::json stats_to_json(const DatasetStats& stats, const Vocabulary& vocab,
                             const FrequencyGroups& groups, const ExperimentConfig& config);
nlohmann::json clusters_to_json(const ClusterAssignment& clusters, const Vocabulary& vocab,
                                const ExperimentConfig& config,
                                const std::vector<MergeStep>& merge_log);
ClusterAssignment clusters_from_json(const nlohmann::json& j, const Vocabulary& vocab);

// Delta table between two reports plus a per-predicate recall-vs-frequency
// table for plotting.
nlohmann::json compare_reports(const nlohmann::json& report_a, const nlohmann::json& report_b);
std::string recall_vs_frequency_csv(const nlohmann::json& report_a, const nlohmann::json& report_b);

void write_manifest(const std::filesystem::path& out_dir, const std::string& command,
                    const std::string& config_hash_hex, const std::vector<std::string>& outputs);

}  // namespace cfa
