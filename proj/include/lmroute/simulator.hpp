#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lmroute/baselines.hpp"
#include "lmroute/dataset.hpp"
#include "lmroute/optimizer.hpp"
#include "lmroute/predictor.hpp"

namespace lmroute {

// Arrival process and clock discipline: n queries drawn from arrival_choices
// join the queue every tick, routing fires once per interval.
struct TrafficConfig {
    std::vector<int> arrival_choices{1, 2, 3, 4};
    double tick_seconds = 0.1;
    double routing_interval_seconds = 1.0;
    double horizon_seconds = 0.0;  // 0 = run until the queue drains
    std::uint64_t seed = 0;

    void validate() const;
    int ticks_per_window() const;
    std::int64_t horizon_ticks() const;  // 0 = unbounded
};

// Synthetic service-time model: occupancy lasts observed output tokens divided
// by the model's token rate, with a floor, rounded up to whole ticks.
struct ServiceModel {
    double weak_tokens_per_second = 80.0;
    double strong_tokens_per_second = 40.0;
    double min_service_seconds = 0.1;
    std::map<std::string, double> rate_overrides;  // model id -> tokens per second

    double rate_for(const ModelSpec& model) const;
    void validate() const;
};

enum class RouterKind { OMNI, GREEDY };

struct RouterSpec {
    RouterKind kind = RouterKind::OMNI;
    GreedyPolicy greedy;

    static RouterSpec omni() { return RouterSpec{RouterKind::OMNI, {}}; }
    static RouterSpec greedy_router(const GreedyPolicy& policy) {
        return RouterSpec{RouterKind::GREEDY, policy};
    }
    // CLI names: omni | greedy-cost | greedy-quality | random.
    static RouterSpec parse(const std::string& name, double threshold, std::uint64_t seed);
    std::string name() const;
};

struct SimConfig {
    TrafficConfig traffic;
    ServiceModel service;
    double alpha = 0.75;
    std::optional<int> uniform_capacity;  // overrides per-model concurrency limits
    SolverConfig solver;
};

struct SimMetrics {
    std::int64_t arrived = 0;
    std::int64_t routed = 0;
    std::int64_t completed = 0;
    std::int64_t requeues = 0;
    std::int64_t correct = 0;
    double accuracy = 0.0;                       // over routed queries, observed ground truth
    Money total_cost = 0;                        // observed token usage, exact
    std::int64_t difficulty_tier_counts[3][2] = {{0, 0}, {0, 0}, {0, 0}};
    std::int64_t quality_violation_windows = 0;  // windows whose placed set misses alpha
    std::int64_t capacity_violations = 0;        // must stay 0
    std::int64_t infeasible_windows = 0;
    std::int64_t windows = 0;
    std::int64_t ticks = 0;
    std::int64_t remaining_queued = 0;
    std::int64_t remaining_unarrived = 0;
    std::int64_t remaining_in_flight = 0;
    double avg_predicted_quality = 0.0;          // over routed queries
    std::vector<std::int64_t> routed_per_model;

    nlohmann::ordered_json to_json() const;
};

struct WindowLogEntry {
    std::int64_t tick = 0;
    int queue_depth = 0;  // before routing
    int placed = 0;
    int requeued = 0;
    std::vector<int> loads;  // per model, after placement
    std::string solver_status;

    nlohmann::ordered_json to_json() const;
};

// Per-tick snapshot handed to test observers after each tick settles.
struct TickState {
    std::int64_t tick = 0;
    std::int64_t arrived = 0;
    std::int64_t completed = 0;
    std::int64_t queued = 0;
    std::int64_t in_flight = 0;
    std::vector<int> loads;
    std::vector<int> capacities;
};
using TickObserver = std::function<void(const TickState&)>;

// Per-tick arrival timeline: timeline[t] lists the dataset query indices that
// join the queue at tick t. The eval order is a seeded shuffle consumed
// front-to-back (sampling without replacement), so the timeline depends only
// on (config, n_queries, seed) and never on the router.
std::vector<std::vector<int>> generate_arrivals(const TrafficConfig& config,
                                                std::size_t n_queries);

// Routing decision for one window. pending holds dataset query indices in FIFO
// order; residual holds per-model free slots. Queries that cannot be placed are
// re-queued in their original order.
struct WindowResult {
    std::vector<std::pair<int, int>> placements;  // (query index, model index)
    std::vector<int> requeued;
    std::string solver_status;
    double mean_predicted_quality = 0.0;  // over placements
};

WindowResult route_window(const std::vector<int>& pending, const std::vector<int>& residual,
                          const PredictionTable& predictions, double alpha,
                          const RouterSpec& router, const SolverConfig& solver,
                          GreedyRouter* greedy);

// Full run over one dataset (normally the eval split). Metrics score observed
// ground truth; routing sees only the prediction table.
SimMetrics run_simulation(const Dataset& ds, const PredictionTable& predictions,
                          const RouterSpec& router, const SimConfig& config,
                          std::vector<WindowLogEntry>* window_log = nullptr,
                          const TickObserver& observer = nullptr);

struct SweepPoint {
    double param = 0.0;
    SimMetrics metrics;
};

// One full simulation per value, all sharing the base config's seeds.
std::vector<SweepPoint> sweep_alpha(const Dataset& ds, const PredictionTable& predictions,
                                    const RouterSpec& router, const SimConfig& base,
                                    const std::vector<double>& values);
std::vector<SweepPoint> sweep_concurrency(const Dataset& ds, const PredictionTable& predictions,
                                          const RouterSpec& router, const SimConfig& base,
                                          const std::vector<int>& values);

// (difficulty x tier) fractions over all routed queries.
struct RoutingDistribution {
    double fraction[3][2] = {{0, 0}, {0, 0}, {0, 0}};
    nlohmann::ordered_json to_json() const;
};
RoutingDistribution routing_distribution(const SimMetrics& metrics);

}  // namespace lmroute
