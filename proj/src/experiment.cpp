#include "cfa/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cfa/binio.hpp"
#include "cfa/clustering.hpp"
#include "cfa/rng.hpp"
#include "cfa/similarity.hpp"

namespace cfa {

using nlohmann::json;

namespace {

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    if (j.contains(key) && !j.at(key).is_null()) return j.at(key).get<T>();
    return fallback;
}

json section(const json& j, const char* key) {
    if (j.contains(key) && j.at(key).is_object()) return j.at(key);
    return json::object();
}

// Stream tags for the independent per-purpose rng streams.
constexpr uint64_t kStreamInit = 0x696e6974ull;       // parameter init
constexpr uint64_t kStreamEpoch = 0x65706f63ull;      // epoch composition
constexpr uint64_t kStreamIntrinsic = 0x696e7472ull;  // intrinsic operator
constexpr uint64_t kStreamExtrinsic = 0x65787472ull;  // context selection + mixup

std::optional<double> report_metric(const std::map<int, double>& table, int k) {
    auto it = table.find(k);
    if (it == table.end()) return std::nullopt;
    return it->second;
}

}  // namespace

ExperimentConfig experiment_config_from_json(const json& j, std::optional<uint64_t> seed_override) {
    ExperimentConfig cfg;
    cfg.seed = seed_override.value_or(get_or<uint64_t>(j, "seed", 1));
    cfg.dataset = get_or<std::string>(j, "dataset", "");
    std::string val = get_or<std::string>(j, "val_dataset", "");
    if (!val.empty()) cfg.val_dataset = val;
    std::string regime = get_or<std::string>(j, "regime", "predcls");
    if (regime == "predcls")
        cfg.regime = Regime::predcls;
    else if (regime == "sgcls")
        cfg.regime = Regime::sgcls;
    else
        throw DataFormatError("config: unknown regime '" + regime + "'");

    json js = section(j, "synth");
    cfg.synth.n_entity_classes = get_or(js, "n_entity_classes", cfg.synth.n_entity_classes);
    cfg.synth.n_predicates = get_or(js, "n_predicates", cfg.synth.n_predicates);
    cfg.synth.zipf_exponent = get_or(js, "zipf_exponent", cfg.synth.zipf_exponent);
    cfg.synth.scenes = get_or(js, "scenes", cfg.synth.scenes);
    cfg.synth.val_scenes = get_or(js, "val_scenes", cfg.synth.val_scenes);
    cfg.synth.entities_min = get_or(js, "entities_min", cfg.synth.entities_min);
    cfg.synth.entities_max = get_or(js, "entities_max", cfg.synth.entities_max);
    cfg.synth.relations_min = get_or(js, "relations_min", cfg.synth.relations_min);
    cfg.synth.relations_max = get_or(js, "relations_max", cfg.synth.relations_max);
    cfg.synth.feature_dim = get_or(js, "feature_dim", cfg.synth.feature_dim);
    cfg.synth.embedding_dim = get_or(js, "embedding_dim", cfg.synth.embedding_dim);
    cfg.synth.noise_sigma = get_or(js, "noise_sigma", cfg.synth.noise_sigma);
    cfg.synth.families = get_or(js, "families", cfg.synth.families);
    cfg.synth.seed = get_or<uint64_t>(js, "seed", cfg.seed);

    json jst = section(j, "stats");
    cfg.stats.tail_quantile = get_or(jst, "tail_quantile", cfg.stats.tail_quantile);
    cfg.stats.head_quantile = get_or(jst, "head_quantile", cfg.stats.head_quantile);

    json jc = section(j, "cluster");
    cfg.cluster.k = get_or(jc, "k", cfg.cluster.k);
    json jw = section(jc, "weights");
    cfg.cluster.weights.pattern = get_or(jw, "pattern", cfg.cluster.weights.pattern);
    cfg.cluster.weights.context = get_or(jw, "context", cfg.cluster.weights.context);
    cfg.cluster.weights.semantic = get_or(jw, "semantic", cfg.cluster.weights.semantic);

    json jsa = section(j, "sampler");
    cfg.sampler.lambda = get_or(jsa, "lambda", cfg.sampler.lambda);
    cfg.sampler.gamma = get_or(jsa, "gamma", cfg.sampler.gamma);
    cfg.sampler.bg_rate = get_or(jsa, "bg_rate", cfg.sampler.bg_rate);
    cfg.sampler.seed = cfg.seed;

    json ja = section(j, "augment");
    cfg.augment.sigma = get_or(ja, "sigma", cfg.augment.sigma);
    cfg.augment.theta = get_or(ja, "theta", cfg.augment.theta);
    cfg.augment.intrinsic_enabled = get_or(ja, "intrinsic", cfg.augment.intrinsic_enabled);
    cfg.augment.extrinsic_fg_enabled = get_or(ja, "extrinsic_fg", cfg.augment.extrinsic_fg_enabled);
    cfg.augment.extrinsic_bg_enabled = get_or(ja, "extrinsic_bg", cfg.augment.extrinsic_bg_enabled);

    json jt = section(j, "train");
    cfg.train.lr = get_or(jt, "lr", cfg.train.lr);
    cfg.train.epochs = get_or(jt, "epochs", cfg.train.epochs);
    cfg.train.batch_size = get_or(jt, "batch_size", cfg.train.batch_size);
    cfg.train.tau = get_or(jt, "tau", cfg.train.tau);
    cfg.train.beta = get_or(jt, "beta", cfg.train.beta);
    cfg.train.seed = cfg.seed;
    cfg.hidden = get_or(jt, "hidden", cfg.hidden);

    json jm = section(j, "metrics");
    cfg.metrics.ks = get_or(jm, "ks", cfg.metrics.ks);
    cfg.metrics.graph_constraint = get_or(jm, "graph_constraint", cfg.metrics.graph_constraint);

    std::string bank = get_or<std::string>(j, "bank_path", "");
    if (!bank.empty()) cfg.bank_path = bank;
    std::string clusters = get_or<std::string>(j, "clusters_path", "");
    if (!clusters.empty()) cfg.clusters_path = clusters;

    // Resolved (effective) config: all defaults applied, seed override folded
    // in. This is what gets hashed into every output.
    json r;
    r["seed"] = cfg.seed;
    r["dataset"] = cfg.dataset.string();
    r["val_dataset"] = cfg.val_dataset ? cfg.val_dataset->string() : "";
    r["regime"] = regime;
    r["synth"] = {{"n_entity_classes", cfg.synth.n_entity_classes},
                  {"n_predicates", cfg.synth.n_predicates},
                  {"zipf_exponent", cfg.synth.zipf_exponent},
                  {"scenes", cfg.synth.scenes},
                  {"val_scenes", cfg.synth.val_scenes},
                  {"entities_min", cfg.synth.entities_min},
                  {"entities_max", cfg.synth.entities_max},
                  {"relations_min", cfg.synth.relations_min},
                  {"relations_max", cfg.synth.relations_max},
                  {"feature_dim", cfg.synth.feature_dim},
                  {"embedding_dim", cfg.synth.embedding_dim},
                  {"noise_sigma", cfg.synth.noise_sigma},
                  {"families", cfg.synth.families},
                  {"seed", cfg.synth.seed}};
    r["stats"] = {{"tail_quantile", cfg.stats.tail_quantile}, {"head_quantile", cfg.stats.head_quantile}};
    r["cluster"] = {{"k", cfg.cluster.k},
                    {"weights",
                     {{"pattern", cfg.cluster.weights.pattern},
                      {"context", cfg.cluster.weights.context},
                      {"semantic", cfg.cluster.weights.semantic}}}};
    r["sampler"] = {{"lambda", cfg.sampler.lambda},
                    {"gamma", cfg.sampler.gamma},
                    {"bg_rate", cfg.sampler.bg_rate}};
    r["augment"] = {{"sigma", cfg.augment.sigma},
                    {"theta", cfg.augment.theta},
                    {"intrinsic", cfg.augment.intrinsic_enabled},
                    {"extrinsic_fg", cfg.augment.extrinsic_fg_enabled},
                    {"extrinsic_bg", cfg.augment.extrinsic_bg_enabled}};
    r["train"] = {{"lr", cfg.train.lr},       {"epochs", cfg.train.epochs},
                  {"batch_size", cfg.train.batch_size}, {"tau", cfg.train.tau},
                  {"beta", cfg.train.beta},   {"hidden", cfg.hidden}};
    r["metrics"] = {{"ks", cfg.metrics.ks}, {"graph_constraint", cfg.metrics.graph_constraint}};
    r["bank_path"] = cfg.bank_path ? cfg.bank_path->string() : "";
    r["clusters_path"] = cfg.clusters_path ? cfg.clusters_path->string() : "";
    cfg.resolved = std::move(r);
    return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path,
                                        std::optional<uint64_t> seed_override) {
    if (!std::filesystem::exists(path)) throw MissingInputError("missing config " + path.string());
    json j = json::parse(read_file_bytes(path), nullptr, false);
    if (j.is_discarded()) throw DataFormatError(path.string() + ": invalid JSON");
    return experiment_config_from_json(j, seed_override);
}

Artifacts build_artifacts(const Dataset& dataset, const ExperimentConfig& config, Execution exec) {
    Artifacts art;
    art.stats = compute_stats(dataset.scenes, dataset.vocab, exec);
    art.groups = split_head_body_tail(art.stats, config.stats.tail_quantile, config.stats.head_quantile);

    if (config.clusters_path) {
        json j = json::parse(read_file_bytes(*config.clusters_path), nullptr, false);
        if (j.is_discarded())
            throw DataFormatError(config.clusters_path->string() + ": invalid JSON");
        art.clusters = clusters_from_json(j, dataset.vocab);
    } else {
        art.combined = combined_similarity(art.stats, dataset.embeddings, config.cluster.weights, exec);
        art.clusters = cluster_entities(art.combined, config.cluster.k, &art.merge_log);
    }

    if (config.bank_path) {
        art.bank = load_bank(*config.bank_path);
    } else {
        art.bank = build_bank(dataset.scenes, dataset.vocab, art.groups.tail, exec);
    }
    return art;
}

namespace {

struct ViewBuildResult {
    SceneView view;
    AugmentCounters counters;
    std::vector<json> trace;
};

json trace_record(const AugmentedSample& sample, double theta) {
    json rec;
    rec["scene"] = sample.scene_ref;
    rec["pair"] = {sample.sub_idx, sample.obj_idx};
    rec["operator"] = sample.provenance;
    rec["bank_entry"] = sample.bank_entry;
    rec["theta"] = theta;
    if (sample.replacement_class >= 0) {
        rec["replaced_role"] = sample.replaced_role == 0 ? "subject" : "object";
        rec["chosen_class"] = sample.replacement_class;
    }
    return rec;
}

ViewBuildResult build_training_view(const Scene& scene, const Artifacts& artifacts,
                                    const ExperimentConfig& config, uint64_t epoch, uint64_t visit,
                                    bool collect_trace) {
    ViewBuildResult out;
    out.view = SceneView::from_scene(scene);

    if (config.augment.intrinsic_enabled) {
        Rng rng(mix_seed({config.seed, kStreamIntrinsic, epoch, visit}));
        for (size_t ri = 0; ri < scene.relations.size(); ++ri) {
            if (!artifacts.bank.tail_set.count(scene.relations[ri].predicate_id)) continue;
            auto sample = intrinsic_augment(out.view, static_cast<int>(ri), artifacts.bank,
                                            artifacts.clusters, config.augment, rng, &out.counters);
            if (sample) {
                apply_augmented_sample(out.view, *sample);
                if (collect_trace) out.trace.push_back(trace_record(*sample, config.augment.theta));
            }
        }
    }

    if (config.augment.extrinsic_fg_enabled || config.augment.extrinsic_bg_enabled) {
        Rng rng(mix_seed({config.seed, kStreamExtrinsic, epoch, visit}));
        SamplerConfig selection = config.sampler;
        if (!config.augment.extrinsic_fg_enabled) selection.gamma = 0.0;
        if (!config.augment.extrinsic_bg_enabled) selection.bg_rate = 0.0;
        auto contexts = select_context_triplets(out.view, artifacts.stats, selection, artifacts.bank, rng);
        for (const auto& ctx : contexts) {
            auto sample = extrinsic_augment(out.view, ctx, artifacts.bank, config.augment, rng,
                                            &out.counters);
            if (sample) {
                apply_augmented_sample(out.view, *sample);
                if (collect_trace) out.trace.push_back(trace_record(*sample, config.augment.theta));
            }
        }
    }
    return out;
}

}  // namespace

TrainOutput run_training(const Dataset& train_data, const Dataset* val_data,
                         const Artifacts& artifacts, const ExperimentConfig& config, Execution exec,
                         bool collect_trace) {
    config.train.validate();
    config.sampler.validate();
    config.augment.validate();
    if (!train_data.has_features)
        throw MissingInputError("training requires a dataset with feature vectors");
    if (train_data.embeddings.empty())
        throw MissingInputError("training requires class embeddings");

    ModelDims dims;
    dims.feature = train_data.feature_dim;
    dims.hidden = config.hidden;
    dims.embed = train_data.embedding_dim;
    dims.n_entity = train_data.vocab.n_entity_classes();
    dims.n_predicate = train_data.vocab.n_predicates() + 1;

    TrainOutput out;
    out.params = ModelParams::random_init(dims, mix_seed({config.seed, kStreamInit}));

    BatchEvalOptions eval_opts;
    eval_opts.regime = config.regime;
    eval_opts.tau = config.train.tau;
    eval_opts.beta = config.train.beta;
    eval_opts.exec = exec;

    for (int epoch = 0; epoch < config.train.epochs; ++epoch) {
        SamplerConfig epoch_sampler = config.sampler;
        epoch_sampler.seed = mix_seed({config.seed, kStreamEpoch, static_cast<uint64_t>(epoch)});
        std::vector<int> epoch_list = build_epoch(train_data.scenes, artifacts.stats, epoch_sampler);

        double rel_sum = 0.0, obj_sum = 0.0, cl_sum = 0.0;
        int64_t pairs_total = 0, ents_total = 0, cl_total = 0;

        const auto batch_size = static_cast<size_t>(config.train.batch_size);
        for (size_t start = 0; start < epoch_list.size(); start += batch_size) {
            const size_t count = std::min(batch_size, epoch_list.size() - start);
            std::vector<ViewBuildResult> built(count);
            parallel_for(count, exec, [&](size_t b) {
                const Scene& scene =
                    train_data.scenes[static_cast<size_t>(epoch_list[start + b])];
                built[b] = build_training_view(scene, artifacts, config,
                                               static_cast<uint64_t>(epoch),
                                               static_cast<uint64_t>(start + b), collect_trace);
            });
            std::vector<SceneView> views;
            views.reserve(count);
            for (auto& vb : built) {
                out.counters += vb.counters;
                for (auto& rec : vb.trace) out.trace.push_back(std::move(rec));
                views.push_back(std::move(vb.view));
            }

            Gradients grads = Gradients::zeros(dims);
            BatchLosses losses;
            try {
                losses = eval_batch(out.params, views, train_data.embeddings, eval_opts, &grads);
                sgd_step(out.params, grads, config.train.lr);
            } catch (const Error& e) {
                throw Error("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(start / batch_size) + ": " + e.what());
            }
            rel_sum += losses.rel * static_cast<double>(losses.n_pairs);
            obj_sum += losses.obj * static_cast<double>(losses.n_entities);
            cl_sum += losses.cl * static_cast<double>(losses.n_contrastive);
            pairs_total += losses.n_pairs;
            ents_total += losses.n_entities;
            cl_total += losses.n_contrastive;
        }

        TrainLogRow row;
        row.epoch = epoch;
        row.rel = pairs_total > 0 ? rel_sum / static_cast<double>(pairs_total) : 0.0;
        row.obj = (config.regime == Regime::sgcls && ents_total > 0)
                      ? obj_sum / static_cast<double>(ents_total)
                      : 0.0;
        row.cl = cl_total > 0 ? cl_sum / static_cast<double>(cl_total) : 0.0;
        if (val_data) {
            MetricReport report = evaluate_dataset(out.params, *val_data, artifacts.groups, config, exec);
            row.val_mr20 = report_metric(report.mean_recall, 20);
            row.val_r20 = report_metric(report.recall, 20);
        }
        out.log.push_back(row);
    }
    return out;
}

MetricReport evaluate_dataset(const ModelParams& params, const Dataset& dataset,
                              const FrequencyGroups& groups, const ExperimentConfig& config,
                              Execution exec) {
    if (!dataset.has_features) throw MissingInputError("evaluation requires feature vectors");
    MetricReport report;
    report.regime = config.regime;
    report.ks = config.metrics.ks;

    std::vector<std::vector<RankedTriplet>> ranked(dataset.scenes.size());
    std::vector<std::vector<GtTriplet>> gt(dataset.scenes.size());
    parallel_for(dataset.scenes.size(), exec, [&](size_t si) {
        ScenePrediction pred =
            predict_scene(params, dataset.scenes[si], dataset.embeddings, config.regime);
        ranked[si] = rank_triplets(pred, config.metrics.graph_constraint);
        gt[si] = ground_truth_triplets(dataset.scenes[si]);
    });

    std::vector<double> reported;
    std::vector<int> ks = report.ks;
    if (std::find(ks.begin(), ks.end(), 20) == ks.end()) ks.push_back(20);  // train log needs K=20
    for (int k : ks) {
        std::map<int, PredicateRecall> per_pred;
        double mr = mean_recall_at_k(ranked, gt, k, &per_pred);
        double r = recall_at_k(ranked, gt, k);
        report.recall[k] = r;
        report.mean_recall[k] = mr;
        report.per_predicate[k] = std::move(per_pred);
        report.groups[k] = group_report(report.per_predicate[k], groups);
        if (std::find(report.ks.begin(), report.ks.end(), k) != report.ks.end()) {
            reported.push_back(r);
            reported.push_back(mr);
        }
    }
    report.mean = mean_metric(reported);
    return report;
}

json report_to_json(const MetricReport& report, const Dataset& dataset, const ExperimentConfig& config) {
    json j;
    j["tool_version"] = kToolVersion;
    j["config_hash"] = config.config_hash_hex();
    j["regime"] = report.regime == Regime::predcls ? "predcls" : "sgcls";
    j["graph_constraint"] = config.metrics.graph_constraint;
    j["ks"] = report.ks;
    json jr = json::object(), jm = json::object();
    for (int k : report.ks) {
        jr[std::to_string(k)] = report.recall.at(k);
        jm[std::to_string(k)] = report.mean_recall.at(k);
    }
    j["recall"] = std::move(jr);
    j["mean_recall"] = std::move(jm);
    j["mean"] = report.mean;

    json per = json::object();
    if (!report.ks.empty()) {
        const auto& first = report.per_predicate.at(report.ks.front());
        for (const auto& [pred, pr] : first) {
            json entry;
            entry["index"] = pred;
            entry["gt"] = pr.gt;
            json rec = json::object();
            for (int k : report.ks) {
                const auto& table = report.per_predicate.at(k);
                auto it = table.find(pred);
                rec[std::to_string(k)] = it != table.end() ? it->second.recall() : 0.0;
            }
            entry["recall"] = std::move(rec);
            per[dataset.vocab.predicate_classes[static_cast<size_t>(pred)]] = std::move(entry);
        }
    }
    j["per_predicate"] = std::move(per);

    json jg = json::object();
    for (const char* name : {"head", "body", "tail"}) jg[name] = json::object();
    for (int k : report.ks) {
        const auto& g = report.groups.at(k);
        auto put = [&](const char* name, const std::optional<double>& v) {
            jg[name][std::to_string(k)] = v ? json(*v) : json(nullptr);
        };
        put("head", g.head);
        put("body", g.body);
        put("tail", g.tail);
    }
    j["groups"] = std::move(jg);
    return j;
}

std::string report_to_csv(const MetricReport& report, const Dataset& dataset,
                          const ExperimentConfig& config) {
    std::ostringstream out;
    out << "# " << kToolVersion << " config_hash=" << config.config_hash_hex() << "\n";
    out << "metric,k,value\n";
    for (int k : report.ks) out << "R," << k << "," << report.recall.at(k) << "\n";
    for (int k : report.ks) out << "mR," << k << "," << report.mean_recall.at(k) << "\n";
    out << "Mean,," << report.mean << "\n";
    out << "\npredicate,gt";
    for (int k : report.ks) out << ",recall@" << k;
    out << "\n";
    if (!report.ks.empty()) {
        const auto& first = report.per_predicate.at(report.ks.front());
        for (const auto& [pred, pr] : first) {
            out << dataset.vocab.predicate_classes[static_cast<size_t>(pred)] << "," << pr.gt;
            for (int k : report.ks) {
                const auto& table = report.per_predicate.at(k);
                auto it = table.find(pred);
                out << "," << (it != table.end() ? it->second.recall() : 0.0);
            }
            out << "\n";
        }
    }
    return out.str();
}

std::string train_log_to_csv(const std::vector<TrainLogRow>& log, const ExperimentConfig& config) {
    std::ostringstream out;
    out << "# " << kToolVersion << " config_hash=" << config.config_hash_hex() << "\n";
    out << "epoch,L_rel,L_obj,L_cl,val_mR20,val_R20\n";
    out.precision(17);
    for (const auto& row : log) {
        out << row.epoch << "," << row.rel << "," << row.obj << "," << row.cl << ",";
        if (row.val_mr20) out << *row.val_mr20;
        out << ",";
        if (row.val_r20) out << *row.val_r20;
        out << "\n";
    }
    return out.str();
}

json stats_to_json(const DatasetStats& stats, const Vocabulary& vocab, const FrequencyGroups& groups,
                   const ExperimentConfig& config) {
    json j;
    j["tool_version"] = kToolVersion;
    j["config_hash"] = config.config_hash_hex();
    j["total_relations"] = stats.total_relations;
    j["quantiles"] = {{"tail", config.stats.tail_quantile}, {"head", config.stats.head_quantile}};
    json preds = json::array();
    for (int p = 1; p <= stats.n_predicates; ++p) {
        const char* group = groups.head.count(p) ? "head" : groups.body.count(p) ? "body" : "tail";
        preds.push_back({{"index", p},
                         {"name", vocab.predicate_classes[static_cast<size_t>(p)]},
                         {"count", stats.predicate_counts[static_cast<size_t>(p)]},
                         {"frequency", stats.frequency[static_cast<size_t>(p)]},
                         {"group", group}});
    }
    j["predicates"] = std::move(preds);
    return j;
}

json clusters_to_json(const ClusterAssignment& clusters, const Vocabulary& vocab,
                      const ExperimentConfig& config, const std::vector<MergeStep>& merge_log) {
    json j;
    j["tool_version"] = kToolVersion;
    j["config_hash"] = config.config_hash_hex();
    j["k"] = clusters.k;
    j["weights"] = {{"pattern", config.cluster.weights.pattern},
                    {"context", config.cluster.weights.context},
                    {"semantic", config.cluster.weights.semantic}};
    json assignment = json::object();
    for (size_t c = 0; c < clusters.assignment.size(); ++c)
        assignment[vocab.entity_classes[c]] = clusters.assignment[c];
    j["assignment"] = std::move(assignment);
    json members = json::array();
    for (const auto& cluster : clusters.members()) {
        json names = json::array();
        for (int c : cluster) names.push_back(vocab.entity_classes[static_cast<size_t>(c)]);
        members.push_back(std::move(names));
    }
    j["clusters"] = std::move(members);
    json merges = json::array();
    for (const auto& step : merge_log)
        merges.push_back({{"a", vocab.entity_classes[static_cast<size_t>(step.a_min)]},
                          {"b", vocab.entity_classes[static_cast<size_t>(step.b_min)]},
                          {"dissimilarity", step.dissimilarity}});
    j["merge_order"] = std::move(merges);
    return j;
}

ClusterAssignment clusters_from_json(const json& j, const Vocabulary& vocab) {
    ClusterAssignment out;
    out.k = j.at("k").get<int>();
    out.assignment.assign(vocab.entity_classes.size(), -1);
    const auto& assignment = j.at("assignment");
    for (size_t c = 0; c < vocab.entity_classes.size(); ++c) {
        const std::string& name = vocab.entity_classes[c];
        if (!assignment.contains(name))
            throw DataFormatError("clusters.json: missing assignment for class '" + name + "'");
        out.assignment[c] = assignment.at(name).get<int>();
        if (out.assignment[c] < 0 || out.assignment[c] >= out.k)
            throw DataFormatError("clusters.json: cluster id out of range for class '" + name + "'");
    }
    return out;
}

namespace {

void append_metric_rows(json& rows, const std::string& label, const json& a, const json& b) {
    if (!a.is_number() || !b.is_number()) return;
    double va = a.get<double>();
    double vb = b.get<double>();
    json row;
    row["metric"] = label;
    row["a"] = va;
    row["b"] = vb;
    row["delta"] = vb - va;
    row["rel_delta"] = va != 0.0 ? json((vb - va) / va) : json(nullptr);
    rows.push_back(std::move(row));
}

}  // namespace

json compare_reports(const json& report_a, const json& report_b) {
    json out;
    out["tool_version"] = kToolVersion;
    out["config_hash_a"] = report_a.value("config_hash", "");
    out["config_hash_b"] = report_b.value("config_hash", "");
    json rows = json::array();
    for (const auto& [k, va] : report_a.at("recall").items())
        if (report_b.at("recall").contains(k))
            append_metric_rows(rows, "R@" + k, va, report_b.at("recall").at(k));
    for (const auto& [k, va] : report_a.at("mean_recall").items())
        if (report_b.at("mean_recall").contains(k))
            append_metric_rows(rows, "mR@" + k, va, report_b.at("mean_recall").at(k));
    append_metric_rows(rows, "Mean", report_a.at("mean"), report_b.at("mean"));
    for (const char* group : {"head", "body", "tail"}) {
        if (!report_a.at("groups").contains(group) || !report_b.at("groups").contains(group)) continue;
        for (const auto& [k, va] : report_a.at("groups").at(group).items())
            if (report_b.at("groups").at(group).contains(k))
                append_metric_rows(rows, std::string(group) + "_mR@" + k, va,
                                   report_b.at("groups").at(group).at(k));
    }
    out["metrics"] = std::move(rows);
    return out;
}

std::string recall_vs_frequency_csv(const json& report_a, const json& report_b) {
    // Frequencies come from report A's ground-truth counts.
    int64_t total = 0;
    for (const auto& [name, entry] : report_a.at("per_predicate").items())
        total += entry.at("gt").get<int64_t>();
    std::ostringstream out;
    out << "predicate,gt,frequency";
    std::vector<std::string> ks;
    if (!report_a.at("per_predicate").empty()) {
        const auto& first = report_a.at("per_predicate").begin().value();
        for (const auto& [k, v] : first.at("recall").items()) ks.push_back(k);
    }
    for (const auto& k : ks) out << ",recall_a@" << k << ",recall_b@" << k;
    out << "\n";
    for (const auto& [name, entry] : report_a.at("per_predicate").items()) {
        int64_t gt = entry.at("gt").get<int64_t>();
        out << name << "," << gt << ","
            << (total > 0 ? static_cast<double>(gt) / static_cast<double>(total) : 0.0);
        const json* entry_b = nullptr;
        if (report_b.at("per_predicate").contains(name)) entry_b = &report_b.at("per_predicate").at(name);
        for (const auto& k : ks) {
            out << "," << entry.at("recall").value(k, 0.0) << ",";
            if (entry_b && (*entry_b).at("recall").contains(k))
                out << (*entry_b).at("recall").at(k).get<double>();
            else
                out << "";
        }
        out << "\n";
    }
    return out.str();
}

void write_manifest(const std::filesystem::path& out_dir, const std::string& command,
                    const std::string& config_hash_hex, const std::vector<std::string>& outputs) {
    json j;
    j["tool_version"] = kToolVersion;
    j["config_hash"] = config_hash_hex;
    j["command"] = command;
    j["outputs"] = outputs;
    write_text_file(out_dir / "manifest.json", j.dump(2) + "\n");
}

}  // namespace cfa
