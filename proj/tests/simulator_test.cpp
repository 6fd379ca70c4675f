#include <doctest.h>

#include <numeric>

#include "helpers.hpp"
#include "lmroute/errors.hpp"
#include "lmroute/simulator.hpp"

using namespace lmroute;

namespace {

// Perfect-knowledge prediction table: capability is the observed correctness,
// cost is the exact observed token cost. Isolates routing behavior from
// predictor quality.
PredictionTable oracle_predictions(const Dataset& ds) {
    PredictionTable table;
    for (const auto& q : ds.queries) {
        std::vector<Prediction> row;
        for (const auto& m : ds.models) {
            Prediction p;
            p.a = static_cast<double>(q.correctness.at(m.id));
            p.a_trained = p.a;
            p.a_retrieved = p.a;
            p.l_trained = q.out_tokens.at(m.id);
            p.l_retrieved = p.l_trained;
            p.cost = token_cost(m, q.in_tokens, q.out_tokens.at(m.id));
            row.push_back(p);
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

SimConfig fast_config(std::uint64_t seed = 1) {
    SimConfig cfg;
    cfg.traffic.seed = seed;
    cfg.service.weak_tokens_per_second = 2000.0;
    cfg.service.strong_tokens_per_second = 1000.0;
    return cfg;
}

}  // namespace

TEST_CASE("generate_arrivals: all-zero choices yield an empty timeline") {
    TrafficConfig cfg;
    cfg.arrival_choices = {0};
    CHECK(generate_arrivals(cfg, 100).empty());
}

TEST_CASE("generate_arrivals is deterministic and covers every query once") {
    TrafficConfig cfg;
    cfg.seed = 17;
    const auto a = generate_arrivals(cfg, 100);
    const auto b = generate_arrivals(cfg, 100);
    CHECK(a == b);

    std::vector<int> seen;
    for (const auto& tick : a)
        for (int qi : tick) seen.push_back(qi);
    std::sort(seen.begin(), seen.end());
    std::vector<int> expected(100);
    std::iota(expected.begin(), expected.end(), 0);
    CHECK(seen == expected);
}

TEST_CASE("generate_arrivals matches an independent reimplementation of the draw") {
    TrafficConfig cfg;
    cfg.seed = 29;
    cfg.arrival_choices = {1, 2, 3, 4};
    const std::size_t n = 200;
    const auto timeline = generate_arrivals(cfg, n);

    // Reference: identical seeded shuffle, then per-tick counts drawn from the
    // same generator stream.
    Rng rng(cfg.seed);
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    shuffle_seeded(order, rng);
    std::size_t consumed = 0;
    std::vector<std::vector<int>> reference;
    while (consumed < n) {
        const int draw = cfg.arrival_choices[next_below(rng, cfg.arrival_choices.size())];
        std::vector<int> tick;
        for (int k = 0; k < draw && consumed < n; ++k) tick.push_back(order[consumed++]);
        reference.push_back(std::move(tick));
    }
    CHECK(timeline == reference);

    // Count sanity: with choices {1,2,3,4} the expected arrivals in 100 ticks
    // is about 250, so 200 queries should be scheduled well within 100 ticks.
    CHECK(timeline.size() <= 100);
}

TEST_CASE("route_window: empty queue is a no-op") {
    PredictionTable preds;
    const auto result = route_window({}, {1, 1}, preds, 0.75, RouterSpec::omni(),
                                     SolverConfig{}, nullptr);
    CHECK(result.placements.empty());
    CHECK(result.requeued.empty());
}

TEST_CASE("route_window: a single query on the only free model") {
    PredictionTable preds;
    Prediction p;
    p.a = 0.9;
    p.cost = money_from_dollars(0.01);
    preds.rows = {{p}};
    const auto result = route_window({0}, {1}, preds, 0.75, RouterSpec::omni(),
                                     SolverConfig{}, nullptr);
    REQUIRE(result.placements.size() == 1);
    CHECK(result.placements[0] == std::pair<int, int>{0, 0});
}

TEST_CASE("route_window allocation matches brute force on the window instance") {
    // Six queries, two models, L = (4, 4). Model 0 is cheap with capability
    // 0.6; model 1 is pricier with capability near 0.95. Cost/quality ratios
    // are distinct so the optimum is unique: queries 0..2 upgrade to model 1.
    const int n = 6;
    PredictionTable preds;
    RoutingInstance inst;
    inst.alpha = 0.75;
    inst.capacity = {4, 4};
    for (int i = 0; i < n; ++i) {
        Prediction cheap, strong;
        cheap.a = 0.6;
        cheap.cost = money_from_dollars(0.01 + 0.001 * i);
        strong.a = 0.95 - 0.005 * i;
        strong.cost = money_from_dollars(0.08 + 0.004 * i);
        preds.rows.push_back({cheap, strong});
        inst.cost.push_back({money_to_dollars(cheap.cost), money_to_dollars(strong.cost)});
        inst.capability.push_back({cheap.a, strong.a});
    }

    const auto oracle = brute_force(inst);
    REQUIRE(oracle.assignment.has_value());

    std::vector<int> pending(n);
    std::iota(pending.begin(), pending.end(), 0);
    const auto window = route_window(pending, {4, 4}, preds, 0.75, RouterSpec::omni(),
                                     SolverConfig{}, nullptr);
    REQUIRE(window.placements.size() == static_cast<std::size_t>(n));
    std::vector<int> choice(n, -1);
    for (const auto& [qi, j] : window.placements) choice[static_cast<std::size_t>(qi)] = j;
    CHECK(choice == oracle.assignment->choice);
}

TEST_CASE("run_simulation routes everything to a dominant model") {
    const std::vector<ModelSpec> models = {
        testutil::make_model("cheap-ace", 0.1, 0.1, Tier::WEAK, 8),
        testutil::make_model("pricey", 5.0, 20.0, Tier::STRONG, 8)};
    const Dataset ds = testutil::make_dataset(40, models, {2}, 8);  // both models always correct
    const auto preds = oracle_predictions(ds);

    SimConfig cfg = fast_config();
    cfg.uniform_capacity = 40;  // constraints inactive
    const auto metrics = run_simulation(ds, preds, RouterSpec::omni(), cfg);
    CHECK(metrics.infeasible_windows == 0);
    CHECK(metrics.routed == 40);
    CHECK(metrics.completed == 40);
    CHECK(metrics.accuracy == 1.0);
    CHECK(metrics.routed_per_model[0] == 40);
    CHECK(metrics.routed_per_model[1] == 0);
    CHECK(metrics.capacity_violations == 0);
}

TEST_CASE("run_simulation conserves queries and respects capacity at every tick") {
    const auto models = std::vector<ModelSpec>{
        testutil::make_model("w0", 0.25, 0.25, Tier::WEAK, 8, 2),
        testutil::make_model("w1", 0.5, 0.5, Tier::WEAK, 8, 2),
        testutil::make_model("s0", 3.0, 12.0, Tier::STRONG, 8, 2)};
    const Dataset ds = testutil::make_dataset(60, models, {3, 2, 1}, 8);
    const auto preds = oracle_predictions(ds);

    for (const auto& router : {RouterSpec::omni(),
                               RouterSpec::greedy_router({GreedyKind::CHEAPEST_CONFIDENT, 0.8, 3}),
                               RouterSpec::greedy_router({GreedyKind::RANDOM, 0.5, 3})}) {
        SimConfig cfg;  // default (slow) service rates keep the system saturated
        cfg.traffic.seed = 5;
        cfg.uniform_capacity = 1;  // tightest setting
        std::int64_t checks = 0;
        const auto metrics = run_simulation(ds, preds, router, cfg, nullptr,
                                            [&](const TickState& state) {
            CHECK(state.arrived == state.completed + state.in_flight + state.queued);
            for (std::size_t j = 0; j < state.loads.size(); ++j)
                CHECK(state.loads[j] <= state.capacities[j]);
            ++checks;
        });
        CHECK(checks > 0);
        CHECK(metrics.capacity_violations == 0);
        CHECK(metrics.completed == 60);
        CHECK(metrics.arrived == 60);
    }
}

TEST_CASE("run_simulation stops at the horizon and reports the remainder") {
    const auto models = testutil::price_table_models(8);
    const Dataset ds = testutil::make_dataset(50, models, {10, 6}, 8);
    const auto preds = oracle_predictions(ds);
    SimConfig cfg = fast_config();
    cfg.traffic.horizon_seconds = 0.5;  // ends before the first routing window
    const auto metrics = run_simulation(ds, preds, RouterSpec::omni(), cfg);
    CHECK(metrics.completed < 50);
    CHECK(metrics.routed == 0);
    CHECK(metrics.completed + metrics.remaining_in_flight + metrics.remaining_queued +
              metrics.remaining_unarrived ==
          50);
}

TEST_CASE("run_simulation is byte-deterministic per seed") {
    const auto models = testutil::price_table_models(8);
    const Dataset ds = testutil::make_dataset(30, models, {9, 5, 2}, 8);
    const auto preds = oracle_predictions(ds);
    std::vector<WindowLogEntry> log1, log2;
    const auto m1 = run_simulation(ds, preds, RouterSpec::omni(), fast_config(42), &log1);
    const auto m2 = run_simulation(ds, preds, RouterSpec::omni(), fast_config(42), &log2);
    CHECK(m1.to_json().dump() == m2.to_json().dump());
    REQUIRE(log1.size() == log2.size());
    for (std::size_t i = 0; i < log1.size(); ++i)
        CHECK(log1[i].to_json().dump() == log2[i].to_json().dump());
}

TEST_CASE("cost accounting sums observed token costs exactly") {
    const std::vector<ModelSpec> models = {testutil::make_model("only", 0.267, 0.534,
                                                                Tier::WEAK, 8)};
    const Dataset ds = testutil::make_dataset(25, models, {1}, 8);
    const auto preds = oracle_predictions(ds);
    const auto metrics = run_simulation(ds, preds, RouterSpec::omni(), fast_config(9));
    Money expected = 0;
    for (const auto& q : ds.queries)
        expected += token_cost(models[0], q.in_tokens, q.out_tokens.at("only"));
    CHECK(metrics.total_cost == expected);
    CHECK(metrics.routed == 25);
}

TEST_CASE("swapping routers does not perturb the arrival timeline") {
    TrafficConfig cfg;
    cfg.seed = 31;
    // The timeline is a pure function of (config, n); routers never touch it.
    CHECK(generate_arrivals(cfg, 64) == generate_arrivals(cfg, 64));
}

TEST_CASE("degenerate sweeps reproduce single runs") {
    const auto models = testutil::price_table_models(8);
    const Dataset ds = testutil::make_dataset(20, models, {8, 4}, 8);
    const auto preds = oracle_predictions(ds);
    const SimConfig base = fast_config(7);

    const auto alpha_curve = sweep_alpha(ds, preds, RouterSpec::omni(), base, {0.75});
    REQUIRE(alpha_curve.size() == 1);
    SimConfig direct = base;
    direct.alpha = 0.75;
    CHECK(alpha_curve[0].metrics.to_json().dump() ==
          run_simulation(ds, preds, RouterSpec::omni(), direct).to_json().dump());

    const auto cap_curve = sweep_concurrency(ds, preds, RouterSpec::omni(), base, {4});
    REQUIRE(cap_curve.size() == 1);
    SimConfig capped = base;
    capped.uniform_capacity = 4;
    CHECK(cap_curve[0].metrics.to_json().dump() ==
          run_simulation(ds, preds, RouterSpec::omni(), capped).to_json().dump());

    CHECK_THROWS_AS(sweep_alpha(ds, preds, RouterSpec::omni(), base, {0.9, 0.7}), ArgumentError);
}

TEST_CASE("the concurrency curve is flat once capacity stops binding") {
    const auto models = testutil::price_table_models(8);
    const Dataset ds = testutil::make_dataset(30, models, {10, 7}, 8);
    const auto preds = oracle_predictions(ds);
    const auto curve =
        sweep_concurrency(ds, preds, RouterSpec::omni(), fast_config(3), {30, 40});
    REQUIRE(curve.size() == 2);
    CHECK(curve[0].metrics.accuracy == curve[1].metrics.accuracy);
    CHECK(curve[0].metrics.total_cost == curve[1].metrics.total_cost);
}

TEST_CASE("routing distribution fixtures") {
    SUBCASE("single weak model and easy queries put all mass in one cell") {
        const std::vector<ModelSpec> models = {testutil::make_model("w", 0.1, 0.1, Tier::WEAK, 8)};
        const Dataset ds = testutil::make_dataset(10, models, {1}, 8);
        const auto metrics =
            run_simulation(ds, oracle_predictions(ds), RouterSpec::omni(), fast_config());
        const auto dist = routing_distribution(metrics);
        CHECK(dist.fraction[0][0] == 1.0);  // EASY x WEAK
        CHECK(dist.fraction[2][1] == 0.0);
    }
    SUBCASE("fractions sum to one over routed queries") {
        const auto models = testutil::price_table_models(8);
        const Dataset ds = testutil::make_dataset(40, models, {10, 6, 2}, 8);
        const auto metrics =
            run_simulation(ds, oracle_predictions(ds), RouterSpec::omni(), fast_config());
        const auto dist = routing_distribution(metrics);
        double sum = 0.0;
        for (int d = 0; d < 3; ++d)
            for (int t = 0; t < 2; ++t) sum += dist.fraction[d][t];
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("traffic validation rejects misaligned intervals") {
    TrafficConfig cfg;
    cfg.routing_interval_seconds = 0.25;  // not a multiple of 0.1
    CHECK_THROWS_AS(cfg.validate(), ArgumentError);
    TrafficConfig empty;
    empty.arrival_choices = {};
    CHECK_THROWS_AS(empty.validate(), ArgumentError);
}
