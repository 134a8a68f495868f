// Benchmark comparing the serial reference kernels against the OpenMP ones.
// Both paths must produce identical results; the table reports wall time,
// speedup, and whether the outputs matched bitwise.

#include <chrono>
#include <cstdio>
#include <string>

#include "cfa/experiment.hpp"
#include "cfa/parallel.hpp"
#include "cfa/similarity.hpp"
#include "cfa/synthgen.hpp"

namespace {

using Clock = std::chrono::steady_clock;

template <class F>
double time_best_ms(F&& fn, int repeats) {
    double best = 1e300;
    for (int r = 0; r < repeats; ++r) {
        auto t0 = Clock::now();
        fn();
        auto t1 = Clock::now();
        best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    return best;
}

void report(const char* name, double serial_ms, double parallel_ms, bool equal) {
    std::printf("%-24s %10.1f ms %10.1f ms %7.2fx   %s\n", name, serial_ms, parallel_ms,
                serial_ms / parallel_ms, equal ? "outputs equal" : "OUTPUT MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
    int scenes = 3000;
    int repeats = 3;
    for (int i = 1; i < argc; ++i) {
        std::string arg = argv[i];
        if (arg == "--scenes" && i + 1 < argc) scenes = std::atoi(argv[++i]);
        if (arg == "--repeats" && i + 1 < argc) repeats = std::atoi(argv[++i]);
        if (arg == "--quick") {
            scenes = 300;
            repeats = 1;
        }
    }

    std::printf("cfa_bench: %d scenes, best of %d, %d thread(s)\n\n", scenes, repeats,
                cfa::hardware_threads());
    std::printf("%-24s %13s %13s %9s\n", "kernel", "serial", "parallel", "speedup");

    cfa::SynthConfig synth;
    synth.scenes = scenes;
    synth.n_entity_classes = 48;
    synth.families = 8;
    synth.seed = 11;
    cfa::WorldModel world = cfa::generate_world(synth);

    cfa::Dataset data_serial, data_parallel;
    double t_gen_s = time_best_ms(
        [&] { data_serial = cfa::generate_dataset(world, synth, scenes, 0, "scene", cfa::Execution::serial); },
        repeats);
    double t_gen_p = time_best_ms(
        [&] {
            data_parallel = cfa::generate_dataset(world, synth, scenes, 0, "scene", cfa::Execution::parallel);
        },
        repeats);
    bool gen_equal = data_serial.scenes.size() == data_parallel.scenes.size();
    for (size_t i = 0; gen_equal && i < data_serial.scenes.size(); ++i) {
        const auto& a = data_serial.scenes[i];
        const auto& b = data_parallel.scenes[i];
        gen_equal = a.image_id == b.image_id && a.entities.size() == b.entities.size() &&
                    a.relations.size() == b.relations.size();
        for (size_t e = 0; gen_equal && e < a.entities.size(); ++e)
            gen_equal = a.entities[e].feature == b.entities[e].feature && a.entities[e].box == b.entities[e].box;
    }
    report("generate_dataset", t_gen_s, t_gen_p, gen_equal);
    const cfa::Dataset& data = data_parallel;

    cfa::DatasetStats stats_serial, stats_parallel;
    double t_st_s = time_best_ms(
        [&] { stats_serial = cfa::compute_stats(data.scenes, data.vocab, cfa::Execution::serial); }, repeats);
    double t_st_p = time_best_ms(
        [&] { stats_parallel = cfa::compute_stats(data.scenes, data.vocab, cfa::Execution::parallel); },
        repeats);
    report("compute_stats", t_st_s, t_st_p, stats_serial == stats_parallel);

    cfa::SimilarityWeights weights;
    cfa::SimilarityMatrix sim_serial, sim_parallel;
    double t_sim_s = time_best_ms(
        [&] {
            sim_serial = cfa::combined_similarity(stats_serial, data.embeddings, weights,
                                                  cfa::Execution::serial);
        },
        repeats);
    double t_sim_p = time_best_ms(
        [&] {
            sim_parallel = cfa::combined_similarity(stats_serial, data.embeddings, weights,
                                                    cfa::Execution::parallel);
        },
        repeats);
    report("combined_similarity", t_sim_s, t_sim_p, sim_serial == sim_parallel);

    auto groups = cfa::split_head_body_tail(stats_serial, 0.5, 0.8);
    cfa::FeatureBank bank_serial, bank_parallel;
    double t_bank_s = time_best_ms(
        [&] { bank_serial = cfa::build_bank(data.scenes, data.vocab, groups.tail, cfa::Execution::serial); },
        repeats);
    double t_bank_p = time_best_ms(
        [&] {
            bank_parallel = cfa::build_bank(data.scenes, data.vocab, groups.tail, cfa::Execution::parallel);
        },
        repeats);
    report("build_bank", t_bank_s, t_bank_p, bank_serial == bank_parallel);

    // One training step over a large batch: forward + analytic backward.
    cfa::ModelDims dims;
    dims.feature = data.feature_dim;
    dims.hidden = 16;
    dims.embed = data.embedding_dim;
    dims.n_entity = data.vocab.n_entity_classes();
    dims.n_predicate = data.vocab.n_predicates() + 1;
    cfa::ModelParams params = cfa::ModelParams::random_init(dims, 5);
    std::vector<cfa::SceneView> views;
    const size_t batch = std::min<size_t>(data.scenes.size(), 256);
    for (size_t i = 0; i < batch; ++i) views.push_back(cfa::SceneView::from_scene(data.scenes[i]));
    cfa::BatchEvalOptions opts;
    cfa::Gradients grads_serial = cfa::Gradients::zeros(dims);
    cfa::Gradients grads_parallel = cfa::Gradients::zeros(dims);
    opts.exec = cfa::Execution::serial;
    double t_grad_s = time_best_ms(
        [&] {
            grads_serial = cfa::Gradients::zeros(dims);
            cfa::eval_batch(params, views, data.embeddings, opts, &grads_serial);
        },
        repeats);
    opts.exec = cfa::Execution::parallel;
    double t_grad_p = time_best_ms(
        [&] {
            grads_parallel = cfa::Gradients::zeros(dims);
            cfa::eval_batch(params, views, data.embeddings, opts, &grads_parallel);
        },
        repeats);
    report("batch_forward_backward", t_grad_s, t_grad_p, grads_serial == grads_parallel);

    // Full evaluation pass (prediction + ranking + metrics).
    cfa::ExperimentConfig cfg;
    cfg.resolved = nlohmann::json::object();
    cfa::MetricReport rep_serial, rep_parallel;
    double t_eval_s = time_best_ms(
        [&] { rep_serial = cfa::evaluate_dataset(params, data, groups, cfg, cfa::Execution::serial); },
        repeats);
    double t_eval_p = time_best_ms(
        [&] { rep_parallel = cfa::evaluate_dataset(params, data, groups, cfg, cfa::Execution::parallel); },
        repeats);
    bool eval_equal = rep_serial.recall == rep_parallel.recall &&
                      rep_serial.mean_recall == rep_parallel.mean_recall &&
                      rep_serial.mean == rep_parallel.mean;
    report("evaluate_dataset", t_eval_s, t_eval_p, eval_equal);

    return 0;
}
