// Command-line entry point wiring ingestion, predictor training, routing,
// simulation, sweeps, and the oracle comparison harness. Every subcommand
// honors the global --seed, and every report embeds the manifest that
// produced it.

#include <algorithm>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lmroute/baselines.hpp"
#include "lmroute/dataset.hpp"
#include "lmroute/errors.hpp"
#include "lmroute/optimizer.hpp"
#include "lmroute/predictor.hpp"
#include "lmroute/report.hpp"
#include "lmroute/simulator.hpp"
#include "lmroute/synthetic.hpp"

using namespace lmroute;
using ordered_json = nlohmann::ordered_json;

namespace {

struct CommonOpts {
    std::uint64_t seed = 0;
    std::string out;
};

struct DataOpts {
    std::string queries;
    std::string models;
    std::string embeddings;
    std::string embedder = "hashed";
    int dim = 256;
    int l_max = 1024;
};

struct PredictorOpts {
    std::string model_path;
    double eval_fraction = 0.2;
    int k = 16;
    double gamma = 0.5;
    double delta = 0.5;
    int buckets = 10;
    int bucket_size = 0;  // 0 = derive from buckets
};

void add_data_options(CLI::App* cmd, DataOpts& d) {
    cmd->add_option("--queries", d.queries, "Line-delimited query records")
        ->required()
        ->envname("LMROUTE_QUERIES");
    cmd->add_option("--models", d.models, "Model manifest")
        ->required()
        ->envname("LMROUTE_MODELS");
    cmd->add_option("--embeddings", d.embeddings, "Embedding sidecar keyed by id");
    cmd->add_option("--embedder", d.embedder, "hashed|precomputed")->envname("LMROUTE_EMBEDDER");
    cmd->add_option("--dim", d.dim, "Embedding dimension");
    cmd->add_option("--l-max", d.l_max, "Maximum output tokens");
}

Dataset load_data(const DataOpts& d, RunManifest& manifest) {
    LoadOptions opts;
    opts.queries_path = d.queries;
    opts.models_path = d.models;
    opts.embeddings_path = d.embeddings;
    opts.embedder = parse_embedder_kind(d.embedder);
    opts.embedding_dim = d.dim;
    opts.l_max = d.l_max;
    manifest.input_digests[d.queries] = file_digest_hex(d.queries);
    manifest.input_digests[d.models] = file_digest_hex(d.models);
    if (!d.embeddings.empty())
        manifest.input_digests[d.embeddings] = file_digest_hex(d.embeddings);
    return load_dataset(opts);
}

void emit(const CommonOpts& common, const std::vector<ordered_json>& lines, ordered_json summary,
          const RunManifest& manifest) {
    if (common.out.empty())
        write_report(std::cout, lines, std::move(summary), manifest);
    else
        write_report_file(common.out, lines, std::move(summary), manifest);
}

ordered_json data_config_json(const DataOpts& d) {
    ordered_json j;
    j["queries"] = d.queries;
    j["models"] = d.models;
    j["embeddings"] = d.embeddings;
    j["embedder"] = d.embedder;
    j["dim"] = d.dim;
    j["l_max"] = d.l_max;
    return j;
}

// ---------------------------------------------------------------------------
// ingest

int run_ingest(const CommonOpts& common, const DataOpts& data) {
    RunManifest manifest;
    manifest.command = "ingest";
    manifest.seed = common.seed;
    manifest.config = data_config_json(data);

    const Dataset ds = load_data(data, manifest);

    ordered_json summary;
    summary["n_queries"] = ds.n_queries();
    summary["n_models"] = ds.n_models();
    ordered_json by_source = ordered_json::object();
    ordered_json by_difficulty = ordered_json::object();
    std::map<std::string, int> sources;
    int difficulty_counts[3] = {0, 0, 0};
    for (const auto& q : ds.queries) {
        ++sources[to_string(q.source)];
        ++difficulty_counts[static_cast<int>(
            label_difficulty(q, static_cast<int>(ds.n_models())))];
    }
    for (const auto& [name, count] : sources) by_source[name] = count;
    by_difficulty["EASY"] = difficulty_counts[0];
    by_difficulty["MEDIUM"] = difficulty_counts[1];
    by_difficulty["HARD"] = difficulty_counts[2];
    summary["by_source"] = by_source;
    summary["by_difficulty"] = by_difficulty;

    emit(common, {}, std::move(summary), manifest);
    return 0;
}

// ---------------------------------------------------------------------------
// gen-synthetic

int run_gen_synthetic(const CommonOpts& common, const SyntheticConfig& cfg,
                      const std::string& out_queries, const std::string& out_models) {
    RunManifest manifest;
    manifest.command = "gen-synthetic";
    manifest.seed = common.seed;
    manifest.config["n"] = cfg.n_queries;
    manifest.config["models"] = cfg.n_models;
    manifest.config["mix"] = cfg.difficulty_mix;
    manifest.config["dim"] = cfg.embedding_dim;
    manifest.config["l_max"] = cfg.l_max;
    manifest.config["concurrency"] = cfg.concurrency_limit;
    manifest.config["out_queries"] = out_queries;
    manifest.config["out_models"] = out_models;

    const Dataset ds = gen_synthetic(cfg);
    save_dataset(ds, out_queries, out_models);
    manifest.input_digests[out_queries] = file_digest_hex(out_queries);
    manifest.input_digests[out_models] = file_digest_hex(out_models);

    ordered_json summary;
    summary["n_queries"] = ds.n_queries();
    summary["n_models"] = ds.n_models();
    summary["queries_path"] = out_queries;
    summary["models_path"] = out_models;
    emit(common, {}, std::move(summary), manifest);
    return 0;
}

// ---------------------------------------------------------------------------
// train

int run_train(const CommonOpts& common, const DataOpts& data, const PredictorOpts& pred,
              const TrainConfig& train_cfg, const std::string& model_out) {
    RunManifest manifest;
    manifest.command = "train";
    manifest.seed = common.seed;
    manifest.config = data_config_json(data);
    manifest.config["epochs"] = train_cfg.epochs;
    manifest.config["lr"] = train_cfg.learning_rate;
    manifest.config["batch"] = train_cfg.batch_size;
    manifest.config["buckets"] = pred.buckets;
    manifest.config["bucket_size"] = pred.bucket_size;
    manifest.config["eval_fraction"] = pred.eval_fraction;
    manifest.config["model_out"] = model_out;

    const Dataset ds = load_data(data, manifest);
    const SplitResult split = split_train_eval(ds, pred.eval_fraction, common.seed);

    DualHeadModel model =
        pred.bucket_size > 0
            ? DualHeadModel::zeros_with_bucket_size(data.dim, data.l_max, pred.bucket_size)
            : DualHeadModel::zeros(data.dim, data.l_max, pred.buckets);
    const TrainLog log = train(model, split.train, train_cfg);
    model.save(model_out);

    std::vector<ordered_json> lines;
    for (const auto& epoch : log.epochs) {
        ordered_json line;
        line["epoch"] = epoch.epoch;
        line["capability_loss"] = epoch.capability_loss;
        line["length_loss"] = epoch.length_loss;
        line["total_loss"] = epoch.total_loss;
        lines.push_back(std::move(line));
    }
    ordered_json summary;
    summary["train_queries"] = split.train.n_queries();
    summary["eval_queries"] = split.eval.n_queries();
    summary["model_path"] = model_out;
    if (!log.epochs.empty()) summary["final_loss"] = log.epochs.back().total_loss;
    emit(common, lines, std::move(summary), manifest);
    return 0;
}

// ---------------------------------------------------------------------------
// evaluate-predictor

int run_evaluate(const CommonOpts& common, const DataOpts& data, const PredictorOpts& pred) {
    RunManifest manifest;
    manifest.command = "evaluate-predictor";
    manifest.seed = common.seed;
    manifest.config = data_config_json(data);
    manifest.config["model"] = pred.model_path;
    manifest.config["k"] = pred.k;
    manifest.config["gamma"] = pred.gamma;
    manifest.config["delta"] = pred.delta;
    manifest.config["eval_fraction"] = pred.eval_fraction;

    const Dataset ds = load_data(data, manifest);
    const SplitResult split = split_train_eval(ds, pred.eval_fraction, common.seed);
    const DualHeadModel model = DualHeadModel::load(pred.model_path);
    manifest.input_digests[pred.model_path] = file_digest_hex(pred.model_path);

    const RetrievalStore store = RetrievalStore::from_dataset(split.train);
    FusionConfig fusion;
    fusion.gamma = pred.gamma;
    fusion.delta = pred.delta;
    fusion.k = pred.k;
    const PredictorEvaluation eval = evaluate_predictor(model, &store, fusion, split.eval);

    ordered_json summary;
    summary["pairs"] = eval.pairs;
    summary["capability_accuracy"] = eval.capability_accuracy;
    summary["bucket_exact_accuracy"] = eval.bucket_exact_accuracy;
    summary["bucket_within_one_accuracy"] = eval.bucket_within_one_accuracy;
    emit(common, {}, std::move(summary), manifest);
    return 0;
}

// ---------------------------------------------------------------------------
// route

int run_route(const CommonOpts& common, const std::string& instance_path,
              std::optional<double> alpha_override, std::optional<int> capacity_override,
              int max_iters) {
    RunManifest manifest;
    manifest.command = "route";
    manifest.seed = common.seed;
    manifest.config["instance"] = instance_path;
    manifest.config["max_iters"] = max_iters;
    manifest.input_digests[instance_path] = file_digest_hex(instance_path);

    RoutingInstance inst = load_instance(instance_path);
    if (alpha_override) {
        inst.alpha = *alpha_override;
        manifest.config["alpha"] = *alpha_override;
    }
    if (capacity_override) {
        std::fill(inst.capacity.begin(), inst.capacity.end(), *capacity_override);
        manifest.config["capacity"] = *capacity_override;
    }

    SolverConfig solver;
    solver.max_iters = max_iters;
    const auto [assignment, report] = solve(inst, solver);

    std::vector<ordered_json> lines;
    for (std::size_t i = 0; i < assignment.choice.size(); ++i) {
        ordered_json line;
        line["query"] = i;
        line["model"] = assignment.choice[i];
        lines.push_back(std::move(line));
    }
    ordered_json summary;
    summary["status"] = to_string(report.status);
    summary["feasible"] = report.feasible;
    summary["total_cost"] = report.total_cost;
    summary["avg_quality"] = report.avg_quality;
    summary["iterations"] = report.iterations;
    summary["dual_value"] = report.dual_value;
    summary["quality_slack_residual"] = report.quality_slack_residual;
    summary["capacity_residuals"] = report.capacity_residuals;
    emit(common, lines, std::move(summary), manifest);
    return 0;
}

// ---------------------------------------------------------------------------
// oracle-compare

int run_oracle_compare(const CommonOpts& common, int trials, int max_n, int max_m,
                       int max_iters) {
    RunManifest manifest;
    manifest.command = "oracle-compare";
    manifest.seed = common.seed;
    manifest.config["trials"] = trials;
    manifest.config["max_n"] = max_n;
    manifest.config["max_m"] = max_m;
    manifest.config["max_iters"] = max_iters;

    Rng rng(common.seed);
    SolverConfig solver;
    solver.max_iters = max_iters;

    std::vector<ordered_json> lines;
    std::vector<double> gaps;
    int feasible_count = 0, duality_ok = 0;
    for (int trial = 0; trial < trials; ++trial) {
        const RoutingInstance inst = make_random_feasible_instance(rng, max_n, max_m);
        const OracleResult oracle = brute_force(inst);
        const auto [assignment, report] = solve(inst, solver);
        const double gap = oracle.assignment
                               ? (report.total_cost - oracle.cost) / std::max(oracle.cost, 1e-12)
                               : 0.0;
        if (report.feasible) ++feasible_count;
        if (report.dual_value <= oracle.cost + 1e-9) ++duality_ok;
        gaps.push_back(gap);

        ordered_json line;
        line["trial"] = trial;
        line["n"] = inst.n_queries();
        line["m"] = inst.n_models();
        line["alpha"] = inst.alpha;
        line["oracle_cost"] = oracle.cost;
        line["solver_cost"] = report.total_cost;
        line["gap"] = gap;
        line["feasible"] = report.feasible;
        line["dual_value"] = report.dual_value;
        lines.push_back(std::move(line));
    }
    std::sort(gaps.begin(), gaps.end());
    ordered_json summary;
    summary["trials"] = trials;
    summary["feasible"] = feasible_count;
    summary["weak_duality_ok"] = duality_ok;
    summary["median_gap"] = gaps.empty() ? 0.0 : gaps[gaps.size() / 2];
    summary["p95_gap"] = gaps.empty() ? 0.0 : gaps[(gaps.size() * 95) / 100];
    summary["max_gap"] = gaps.empty() ? 0.0 : gaps.back();
    emit(common, lines, std::move(summary), manifest);
    return 0;
}

// ---------------------------------------------------------------------------
// simulate / sweep share the pipeline below.

struct SimPipelineOpts {
    DataOpts data;
    PredictorOpts pred;
    std::string router = "omni";
    double threshold = 0.8;
    double alpha = 0.75;
    int capacity = 0;  // 0 = per-model manifest limits
    double horizon = 0.0;
    int train_epochs = 15;
    double lr = 1e-2;
    int max_iters = 500;
    double weak_rate = 80.0;
    double strong_rate = 40.0;
    double min_service = 0.1;
};

void add_sim_options(CLI::App* cmd, SimPipelineOpts& s) {
    add_data_options(cmd, s.data);
    cmd->add_option("--model", s.pred.model_path,
                    "Trained predictor file (trains in-process when omitted)");
    cmd->add_option("--router", s.router, "omni|greedy-cost|greedy-quality|random")
        ->envname("LMROUTE_ROUTER");
    cmd->add_option("--threshold", s.threshold, "Confidence threshold for greedy-cost");
    cmd->add_option("--alpha", s.alpha, "Minimum average capability")->envname("LMROUTE_ALPHA");
    cmd->add_option("--capacity", s.capacity,
                    "Uniform concurrency limit (0 = per-model manifest values)")
        ->envname("LMROUTE_CAPACITY");
    cmd->add_option("--horizon", s.horizon, "Simulation horizon in seconds (0 = drain)");
    cmd->add_option("--k", s.pred.k, "Retrieval neighbors")->envname("LMROUTE_K");
    cmd->add_option("--gamma", s.pred.gamma, "Trained/retrieved capability weight");
    cmd->add_option("--delta", s.pred.delta, "Trained/retrieved cost weight");
    cmd->add_option("--buckets", s.pred.buckets, "Length buckets");
    cmd->add_option("--bucket-size", s.pred.bucket_size, "Bucket width (overrides --buckets)");
    cmd->add_option("--eval-fraction", s.pred.eval_fraction, "Eval split fraction");
    cmd->add_option("--train-epochs", s.train_epochs, "Epochs for in-process training");
    cmd->add_option("--lr", s.lr, "Learning rate for in-process training");
    cmd->add_option("--max-iters", s.max_iters, "Dual solver iteration budget");
    cmd->add_option("--weak-rate", s.weak_rate, "Weak-tier tokens per second");
    cmd->add_option("--strong-rate", s.strong_rate, "Strong-tier tokens per second");
    cmd->add_option("--min-service", s.min_service, "Minimum service seconds");
}

ordered_json sim_config_json(const SimPipelineOpts& s) {
    ordered_json j = data_config_json(s.data);
    j["model"] = s.pred.model_path;
    j["router"] = s.router;
    j["threshold"] = s.threshold;
    j["alpha"] = s.alpha;
    j["capacity"] = s.capacity;
    j["horizon"] = s.horizon;
    j["k"] = s.pred.k;
    j["gamma"] = s.pred.gamma;
    j["delta"] = s.pred.delta;
    j["buckets"] = s.pred.buckets;
    j["bucket_size"] = s.pred.bucket_size;
    j["eval_fraction"] = s.pred.eval_fraction;
    j["train_epochs"] = s.train_epochs;
    j["lr"] = s.lr;
    j["max_iters"] = s.max_iters;
    j["weak_rate"] = s.weak_rate;
    j["strong_rate"] = s.strong_rate;
    j["min_service"] = s.min_service;
    return j;
}

struct SimPipeline {
    Dataset eval;
    PredictionTable predictions;
    RouterSpec router;
    SimConfig config;
};

SimPipeline build_pipeline(const SimPipelineOpts& s, std::uint64_t seed, RunManifest& manifest) {
    const Dataset ds = load_data(s.data, manifest);
    const SplitResult split = split_train_eval(ds, s.pred.eval_fraction, seed);

    DualHeadModel model;
    if (!s.pred.model_path.empty()) {
        model = DualHeadModel::load(s.pred.model_path);
        manifest.input_digests[s.pred.model_path] = file_digest_hex(s.pred.model_path);
    } else {
        model = s.pred.bucket_size > 0
                    ? DualHeadModel::zeros_with_bucket_size(s.data.dim, s.data.l_max,
                                                            s.pred.bucket_size)
                    : DualHeadModel::zeros(s.data.dim, s.data.l_max, s.pred.buckets);
        TrainConfig train_cfg;
        train_cfg.epochs = s.train_epochs;
        train_cfg.learning_rate = s.lr;
        train_cfg.seed = seed;
        train(model, split.train, train_cfg);
    }

    SimPipeline pipeline;
    pipeline.eval = split.eval;
    const RetrievalStore store = RetrievalStore::from_dataset(split.train);
    FusionConfig fusion;
    fusion.gamma = s.pred.gamma;
    fusion.delta = s.pred.delta;
    fusion.k = s.pred.k;
    pipeline.predictions = predict_all(model, &store, fusion, pipeline.eval);

    pipeline.router = RouterSpec::parse(s.router, s.threshold, seed);
    pipeline.config.traffic.seed = seed;
    pipeline.config.traffic.horizon_seconds = s.horizon;
    pipeline.config.alpha = s.alpha;
    if (s.capacity > 0) pipeline.config.uniform_capacity = s.capacity;
    pipeline.config.solver.max_iters = s.max_iters;
    pipeline.config.service.weak_tokens_per_second = s.weak_rate;
    pipeline.config.service.strong_tokens_per_second = s.strong_rate;
    pipeline.config.service.min_service_seconds = s.min_service;
    return pipeline;
}

int run_simulate(const CommonOpts& common, const SimPipelineOpts& s) {
    RunManifest manifest;
    manifest.command = "simulate";
    manifest.seed = common.seed;
    manifest.config = sim_config_json(s);

    const SimPipeline pipeline = build_pipeline(s, common.seed, manifest);
    std::vector<WindowLogEntry> window_log;
    const SimMetrics metrics = run_simulation(pipeline.eval, pipeline.predictions,
                                              pipeline.router, pipeline.config, &window_log);

    std::vector<ordered_json> lines;
    for (const auto& entry : window_log) lines.push_back(entry.to_json());
    ordered_json summary;
    summary["router"] = pipeline.router.name();
    summary["metrics"] = metrics.to_json();
    summary["routing_distribution"] = routing_distribution(metrics).to_json();
    emit(common, lines, std::move(summary), manifest);
    return 0;
}

int run_sweep(const CommonOpts& common, const SimPipelineOpts& s, const std::string& param,
              const std::vector<double>& values) {
    RunManifest manifest;
    manifest.command = "sweep";
    manifest.seed = common.seed;
    manifest.config = sim_config_json(s);
    manifest.config["param"] = param;
    manifest.config["values"] = values;

    if (values.empty()) throw ArgumentError("sweep needs at least one value");
    const SimPipeline pipeline = build_pipeline(s, common.seed, manifest);

    std::vector<SweepPoint> curve;
    if (param == "alpha") {
        curve = sweep_alpha(pipeline.eval, pipeline.predictions, pipeline.router, pipeline.config,
                            values);
    } else if (param == "concurrency") {
        std::vector<int> caps;
        for (double v : values) caps.push_back(static_cast<int>(v));
        curve = sweep_concurrency(pipeline.eval, pipeline.predictions, pipeline.router,
                                  pipeline.config, caps);
    } else {
        throw ArgumentError("--param must be alpha or concurrency");
    }

    std::vector<ordered_json> lines;
    for (const auto& point : curve) {
        ordered_json line;
        line[param] = point.param;
        line["accuracy"] = point.metrics.accuracy;
        line["cost_dollars"] = money_to_string(point.metrics.total_cost);
        line["cost_picodollars"] = point.metrics.total_cost;
        line["quality_violation_windows"] = point.metrics.quality_violation_windows;
        line["capacity_violations"] = point.metrics.capacity_violations;
        line["routed"] = point.metrics.routed;
        lines.push_back(std::move(line));
    }
    ordered_json summary;
    summary["router"] = pipeline.router.name();
    summary["param"] = param;
    summary["points"] = curve.size();
    emit(common, lines, std::move(summary), manifest);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Budget- and performance-controllable multi-LLM routing engine"};
    app.require_subcommand(1);
    app.fallthrough();  // global --seed/--out may follow the subcommand's options

    CommonOpts common;
    app.add_option("--seed", common.seed, "Global seed; all sub-commands are reproducible")
        ->envname("LMROUTE_SEED");
    app.add_option("--out", common.out, "Report path (default: stdout)")->envname("LMROUTE_OUT");

    // ingest
    DataOpts ingest_data;
    auto* ingest = app.add_subcommand("ingest", "Load and validate a dataset");
    add_data_options(ingest, ingest_data);

    // gen-synthetic
    SyntheticConfig gen_cfg;
    std::string gen_out_queries = "synthetic_queries.jsonl";
    std::string gen_out_models = "synthetic_models.jsonl";
    std::vector<double> gen_mix;
    auto* gen = app.add_subcommand("gen-synthetic", "Emit a planted synthetic dataset");
    gen->add_option("--n", gen_cfg.n_queries, "Number of queries");
    gen->add_option("--models", gen_cfg.n_models, "Number of models");
    gen->add_option("--mix", gen_mix, "EASY,MEDIUM,HARD fractions")->delimiter(',');
    gen->add_option("--dim", gen_cfg.embedding_dim, "Embedding dimension");
    gen->add_option("--l-max", gen_cfg.l_max, "Maximum output tokens");
    gen->add_option("--concurrency", gen_cfg.concurrency_limit, "Per-model concurrency limit");
    gen->add_option("--out-queries", gen_out_queries, "Query file to write");
    gen->add_option("--out-models", gen_out_models, "Model manifest to write");

    // train
    DataOpts train_data;
    PredictorOpts train_pred;
    TrainConfig train_cfg;
    std::string model_out = "model.json";
    auto* train_cmd = app.add_subcommand("train", "Train the dual-head predictor");
    add_data_options(train_cmd, train_data);
    train_cmd->add_option("--epochs", train_cfg.epochs, "Training epochs")
        ->envname("LMROUTE_EPOCHS");
    train_cmd->add_option("--lr", train_cfg.learning_rate, "Learning rate")
        ->envname("LMROUTE_LR");
    train_cmd->add_option("--batch", train_cfg.batch_size, "Mini-batch size");
    train_cmd->add_option("--buckets", train_pred.buckets, "Length buckets");
    train_cmd->add_option("--bucket-size", train_pred.bucket_size,
                          "Bucket width (overrides --buckets)");
    train_cmd->add_option("--eval-fraction", train_pred.eval_fraction, "Eval split fraction");
    train_cmd->add_option("--model-out", model_out, "Where to write the trained model");

    // evaluate-predictor
    DataOpts eval_data;
    PredictorOpts eval_pred;
    auto* eval_cmd = app.add_subcommand("evaluate-predictor",
                                        "Score the fused predictor on the eval split");
    add_data_options(eval_cmd, eval_data);
    eval_cmd->add_option("--model", eval_pred.model_path, "Trained predictor file")->required();
    eval_cmd->add_option("--k", eval_pred.k, "Retrieval neighbors")->envname("LMROUTE_K");
    eval_cmd->add_option("--gamma", eval_pred.gamma, "Capability fusion weight");
    eval_cmd->add_option("--delta", eval_pred.delta, "Cost fusion weight");
    eval_cmd->add_option("--eval-fraction", eval_pred.eval_fraction, "Eval split fraction");

    // route
    std::string instance_path;
    double route_alpha = -1.0;
    int route_capacity = 0;
    int route_max_iters = 2000;
    auto* route_cmd = app.add_subcommand("route", "Solve one routing instance file");
    route_cmd->add_option("--instance", instance_path, "Instance file")->required();
    auto* route_alpha_opt = route_cmd->add_option("--alpha", route_alpha,
                                                  "Override the instance's alpha");
    auto* route_cap_opt = route_cmd->add_option("--capacity", route_capacity,
                                                "Override all capacities uniformly");
    route_cmd->add_option("--max-iters", route_max_iters, "Dual solver iteration budget");

    // simulate
    SimPipelineOpts sim_opts;
    auto* simulate_cmd = app.add_subcommand("simulate", "Run the serving simulation");
    add_sim_options(simulate_cmd, sim_opts);

    // sweep
    SimPipelineOpts sweep_opts;
    std::string sweep_param = "alpha";
    std::vector<double> sweep_values;
    auto* sweep_cmd = app.add_subcommand("sweep", "Sweep alpha or concurrency");
    add_sim_options(sweep_cmd, sweep_opts);
    sweep_cmd->add_option("--param", sweep_param, "alpha|concurrency");
    sweep_cmd->add_option("--values", sweep_values, "Sweep points, ascending")
        ->delimiter(',')
        ->required();

    // oracle-compare
    int trials = 200, max_n = 8, max_m = 3, oc_max_iters = 2000;
    auto* oracle_cmd = app.add_subcommand("oracle-compare",
                                          "Differential-test the solver against enumeration");
    oracle_cmd->add_option("--trials", trials, "Number of random instances");
    oracle_cmd->add_option("--max-n", max_n, "Maximum queries per instance");
    oracle_cmd->add_option("--max-m", max_m, "Maximum models per instance");
    oracle_cmd->add_option("--max-iters", oc_max_iters, "Dual solver iteration budget");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (gen->parsed() && !gen_mix.empty()) {
            if (gen_mix.size() != 3) throw ArgumentError("--mix needs exactly three fractions");
            gen_cfg.difficulty_mix = {gen_mix[0], gen_mix[1], gen_mix[2]};
        }
        gen_cfg.seed = common.seed;

        if (ingest->parsed()) return run_ingest(common, ingest_data);
        if (gen->parsed()) return run_gen_synthetic(common, gen_cfg, gen_out_queries,
                                                    gen_out_models);
        if (train_cmd->parsed()) {
            train_cfg.seed = common.seed;
            return run_train(common, train_data, train_pred, train_cfg, model_out);
        }
        if (eval_cmd->parsed()) return run_evaluate(common, eval_data, eval_pred);
        if (route_cmd->parsed()) {
            std::optional<double> alpha_override;
            std::optional<int> cap_override;
            if (route_alpha_opt->count() > 0) alpha_override = route_alpha;
            if (route_cap_opt->count() > 0) cap_override = route_capacity;
            return run_route(common, instance_path, alpha_override, cap_override,
                             route_max_iters);
        }
        if (simulate_cmd->parsed()) return run_simulate(common, sim_opts);
        if (sweep_cmd->parsed()) return run_sweep(common, sweep_opts, sweep_param, sweep_values);
        if (oracle_cmd->parsed())
            return run_oracle_compare(common, trials, max_n, max_m, oc_max_iters);
        return 2;
    } catch (const ArgumentError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
