#include "lmroute/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "lmroute/errors.hpp"

namespace lmroute {

using ordered_json = nlohmann::ordered_json;

void TrafficConfig::validate() const {
    if (tick_seconds <= 0.0) throw ArgumentError("tick_seconds must be positive");
    if (arrival_choices.empty()) throw ArgumentError("arrival_choices must be non-empty");
    for (int c : arrival_choices)
        if (c < 0) throw ArgumentError("arrival_choices entries must be >= 0");
    const double ratio = routing_interval_seconds / tick_seconds;
    if (std::abs(ratio - std::llround(ratio)) > 1e-9 || std::llround(ratio) < 1)
        throw ArgumentError("routing_interval must be a positive integer multiple of tick");
    if (horizon_seconds < 0.0) throw ArgumentError("horizon must be non-negative");
}

int TrafficConfig::ticks_per_window() const {
    return static_cast<int>(std::llround(routing_interval_seconds / tick_seconds));
}

std::int64_t TrafficConfig::horizon_ticks() const {
    if (horizon_seconds <= 0.0) return 0;
    return static_cast<std::int64_t>(std::ceil(horizon_seconds / tick_seconds - 1e-9));
}

double ServiceModel::rate_for(const ModelSpec& model) const {
    auto it = rate_overrides.find(model.id);
    if (it != rate_overrides.end()) return it->second;
    return model.tier == Tier::WEAK ? weak_tokens_per_second : strong_tokens_per_second;
}

void ServiceModel::validate() const {
    if (weak_tokens_per_second <= 0.0 || strong_tokens_per_second <= 0.0)
        throw ArgumentError("token rates must be positive");
    for (const auto& [id, rate] : rate_overrides)
        if (rate <= 0.0) throw ArgumentError("token rate override for '" + id + "' must be positive");
    if (min_service_seconds < 0.0) throw ArgumentError("min_service must be non-negative");
}

RouterSpec RouterSpec::parse(const std::string& name, double threshold, std::uint64_t seed) {
    if (name == "omni") return omni();
    GreedyPolicy policy;
    policy.kind = parse_greedy_kind(name);
    policy.confidence_threshold = threshold;
    policy.seed = seed;
    return greedy_router(policy);
}

std::string RouterSpec::name() const {
    if (kind == RouterKind::OMNI) return "omni";
    switch (greedy.kind) {
        case GreedyKind::CHEAPEST_CONFIDENT: return "greedy-cost";
        case GreedyKind::MAX_QUALITY: return "greedy-quality";
        case GreedyKind::RANDOM: return "random";
    }
    return "greedy";
}

std::vector<std::vector<int>> generate_arrivals(const TrafficConfig& config,
                                                std::size_t n_queries) {
    config.validate();
    std::vector<std::vector<int>> timeline;
    if (n_queries == 0) return timeline;
    if (*std::max_element(config.arrival_choices.begin(), config.arrival_choices.end()) == 0)
        return timeline;

    Rng rng(config.seed);
    std::vector<int> order(n_queries);
    std::iota(order.begin(), order.end(), 0);
    shuffle_seeded(order, rng);

    std::size_t next = 0;
    while (next < order.size()) {
        const std::size_t pick = next_below(rng, config.arrival_choices.size());
        const int n = config.arrival_choices[pick];
        std::vector<int> tick_arrivals;
        for (int k = 0; k < n && next < order.size(); ++k) tick_arrivals.push_back(order[next++]);
        timeline.push_back(std::move(tick_arrivals));
    }
    return timeline;
}

WindowResult route_window(const std::vector<int>& pending, const std::vector<int>& residual,
                          const PredictionTable& predictions, double alpha,
                          const RouterSpec& router, const SolverConfig& solver,
                          GreedyRouter* greedy) {
    WindowResult result;
    if (pending.empty()) {
        result.solver_status = "empty";
        return result;
    }

    const int m = static_cast<int>(residual.size());
    std::vector<int> free_slots = residual;
    double quality_sum = 0.0;

    auto place = [&](int query_idx, int model_idx) {
        result.placements.emplace_back(query_idx, model_idx);
        --free_slots[static_cast<std::size_t>(model_idx)];
        quality_sum += predictions.rows[static_cast<std::size_t>(query_idx)]
                                      [static_cast<std::size_t>(model_idx)].a;
    };

    if (router.kind == RouterKind::OMNI) {
        // Only models with a free slot enter the window instance (capacities
        // must be positive); indices map back through `avail`.
        std::vector<int> avail;
        for (int j = 0; j < m; ++j)
            if (residual[static_cast<std::size_t>(j)] > 0) avail.push_back(j);
        if (avail.empty()) {
            result.requeued = pending;
            result.solver_status = "skipped";
            return result;
        }

        RoutingInstance inst;
        inst.alpha = alpha;
        for (int j : avail) inst.capacity.push_back(residual[static_cast<std::size_t>(j)]);
        inst.cost.reserve(pending.size());
        inst.capability.reserve(pending.size());
        for (int qi : pending) {
            const auto& row = predictions.rows[static_cast<std::size_t>(qi)];
            std::vector<double> crow, arow;
            crow.reserve(avail.size());
            arow.reserve(avail.size());
            for (int j : avail) {
                crow.push_back(money_to_dollars(row[static_cast<std::size_t>(j)].cost));
                arow.push_back(row[static_cast<std::size_t>(j)].a);
            }
            inst.cost.push_back(std::move(crow));
            inst.capability.push_back(std::move(arow));
        }

        const auto [assignment, report] = lmroute::solve(inst, solver);
        result.solver_status = to_string(report.status);
        for (std::size_t i = 0; i < pending.size(); ++i) {
            const int model_idx = avail[static_cast<std::size_t>(assignment.choice[i])];
            if (free_slots[static_cast<std::size_t>(model_idx)] > 0)
                place(pending[i], model_idx);
            else
                result.requeued.push_back(pending[i]);
        }
    } else {
        result.solver_status = "greedy";
        for (int qi : pending) {
            try {
                const int model_idx =
                    greedy->route(predictions.rows[static_cast<std::size_t>(qi)], free_slots);
                place(qi, model_idx);
            } catch (const CapacityExhaustedError&) {
                result.requeued.push_back(qi);
            }
        }
    }

    if (!result.placements.empty())
        result.mean_predicted_quality = quality_sum / static_cast<double>(result.placements.size());
    return result;
}

SimMetrics run_simulation(const Dataset& ds, const PredictionTable& predictions,
                          const RouterSpec& router, const SimConfig& config,
                          std::vector<WindowLogEntry>* window_log, const TickObserver& observer) {
    config.traffic.validate();
    config.service.validate();
    if (predictions.rows.size() != ds.queries.size())
        throw ArgumentError("prediction table does not cover the dataset");

    const int m = static_cast<int>(ds.models.size());
    std::vector<int> capacities(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j)
        capacities[static_cast<std::size_t>(j)] =
            config.uniform_capacity.value_or(ds.models[static_cast<std::size_t>(j)].concurrency_limit);
    for (int c : capacities)
        if (c < 1) throw ArgumentError("capacities must be >= 1");

    const auto timeline = generate_arrivals(config.traffic, ds.queries.size());
    const int ticks_per_window = config.traffic.ticks_per_window();
    const std::int64_t horizon = config.traffic.horizon_ticks();

    // Difficulty of each query is fixed ground truth; compute it once.
    std::vector<Difficulty> difficulty;
    difficulty.reserve(ds.queries.size());
    for (const auto& q : ds.queries) difficulty.push_back(label_difficulty(q, m));

    GreedyRouter greedy(router.greedy);

    SimMetrics metrics;
    metrics.routed_per_model.assign(static_cast<std::size_t>(m), 0);

    std::deque<int> queue;
    // (query index, completion tick) per model, insertion-ordered.
    std::vector<std::vector<std::pair<int, std::int64_t>>> in_flight(static_cast<std::size_t>(m));
    std::int64_t in_flight_count = 0;
    std::size_t next_tick = 0;
    std::int64_t tick = 0;
    double predicted_quality_sum = 0.0;

    auto service_ticks = [&](const ModelSpec& model, int out_tokens) {
        const double seconds = std::max(config.service.min_service_seconds,
                                        static_cast<double>(out_tokens) /
                                            config.service.rate_for(model));
        const auto ticks = static_cast<std::int64_t>(
            std::ceil(seconds / config.traffic.tick_seconds - 1e-9));
        return std::max<std::int64_t>(ticks, 1);
    };

    while (true) {
        // Completions scheduled for this tick free their slots first.
        for (int j = 0; j < m; ++j) {
            auto& lane = in_flight[static_cast<std::size_t>(j)];
            auto it = lane.begin();
            while (it != lane.end()) {
                if (it->second <= tick) {
                    ++metrics.completed;
                    --in_flight_count;
                    it = lane.erase(it);
                } else {
                    ++it;
                }
            }
        }

        // Arrivals due this tick join the back of the queue.
        if (next_tick < timeline.size() && static_cast<std::size_t>(tick) == next_tick) {
            for (int qi : timeline[next_tick]) {
                queue.push_back(qi);
                ++metrics.arrived;
            }
            ++next_tick;
        }

        // Routing window.
        if (tick > 0 && tick % ticks_per_window == 0 && !queue.empty()) {
            std::vector<int> pending(queue.begin(), queue.end());
            queue.clear();
            std::vector<int> residual(static_cast<std::size_t>(m));
            for (int j = 0; j < m; ++j)
                residual[static_cast<std::size_t>(j)] =
                    capacities[static_cast<std::size_t>(j)] -
                    static_cast<int>(in_flight[static_cast<std::size_t>(j)].size());

            const WindowResult window = route_window(pending, residual, predictions, config.alpha,
                                                     router, config.solver, &greedy);

            for (const auto& [qi, j] : window.placements) {
                const QueryRecord& q = ds.queries[static_cast<std::size_t>(qi)];
                const ModelSpec& model = ds.models[static_cast<std::size_t>(j)];
                if (static_cast<int>(in_flight[static_cast<std::size_t>(j)].size()) >=
                    capacities[static_cast<std::size_t>(j)]) {
                    ++metrics.capacity_violations;  // never expected; tracked, not hidden
                }
                const int out_tokens = q.out_tokens.at(model.id);
                in_flight[static_cast<std::size_t>(j)].emplace_back(
                    qi, tick + service_ticks(model, out_tokens));
                ++in_flight_count;
                ++metrics.routed;
                ++metrics.routed_per_model[static_cast<std::size_t>(j)];
                metrics.correct += q.correctness.at(model.id);
                metrics.total_cost += token_cost(model, q.in_tokens, out_tokens);
                const int d = static_cast<int>(difficulty[static_cast<std::size_t>(qi)]);
                const int t = static_cast<int>(model.tier);
                ++metrics.difficulty_tier_counts[d][t];
                predicted_quality_sum += predictions.rows[static_cast<std::size_t>(qi)]
                                                        [static_cast<std::size_t>(j)].a;
            }
            for (int qi : window.requeued) queue.push_back(qi);
            metrics.requeues += static_cast<std::int64_t>(window.requeued.size());
            ++metrics.windows;
            if (!window.placements.empty() &&
                window.mean_predicted_quality < config.alpha - 1e-9)
                ++metrics.quality_violation_windows;
            if (window.solver_status == "LIKELY_INFEASIBLE") ++metrics.infeasible_windows;

            if (window_log) {
                WindowLogEntry entry;
                entry.tick = tick;
                entry.queue_depth = static_cast<int>(pending.size());
                entry.placed = static_cast<int>(window.placements.size());
                entry.requeued = static_cast<int>(window.requeued.size());
                entry.loads.resize(static_cast<std::size_t>(m));
                for (int j = 0; j < m; ++j)
                    entry.loads[static_cast<std::size_t>(j)] =
                        static_cast<int>(in_flight[static_cast<std::size_t>(j)].size());
                entry.solver_status = window.solver_status;
                window_log->push_back(std::move(entry));
            }
        }

        if (observer) {
            TickState state;
            state.tick = tick;
            state.arrived = metrics.arrived;
            state.completed = metrics.completed;
            state.queued = static_cast<std::int64_t>(queue.size());
            state.in_flight = in_flight_count;
            state.loads.resize(static_cast<std::size_t>(m));
            for (int j = 0; j < m; ++j)
                state.loads[static_cast<std::size_t>(j)] =
                    static_cast<int>(in_flight[static_cast<std::size_t>(j)].size());
            state.capacities = capacities;
            observer(state);
        }

        const bool drained =
            next_tick >= timeline.size() && queue.empty() && in_flight_count == 0;
        if (drained) break;
        ++tick;
        if (horizon > 0 && tick >= horizon) break;
    }

    metrics.ticks = tick;
    metrics.remaining_queued = static_cast<std::int64_t>(queue.size());
    metrics.remaining_in_flight = in_flight_count;
    for (std::size_t t = next_tick; t < timeline.size(); ++t)
        metrics.remaining_unarrived += static_cast<std::int64_t>(timeline[t].size());
    if (metrics.routed > 0) {
        metrics.accuracy = static_cast<double>(metrics.correct) / static_cast<double>(metrics.routed);
        metrics.avg_predicted_quality = predicted_quality_sum / static_cast<double>(metrics.routed);
    }
    return metrics;
}

std::vector<SweepPoint> sweep_alpha(const Dataset& ds, const PredictionTable& predictions,
                                    const RouterSpec& router, const SimConfig& base,
                                    const std::vector<double>& values) {
    if (!std::is_sorted(values.begin(), values.end()))
        throw ArgumentError("sweep values must be sorted ascending");
    std::vector<SweepPoint> curve;
    for (double alpha : values) {
        SimConfig cfg = base;
        cfg.alpha = alpha;
        curve.push_back({alpha, run_simulation(ds, predictions, router, cfg)});
    }
    return curve;
}

std::vector<SweepPoint> sweep_concurrency(const Dataset& ds, const PredictionTable& predictions,
                                          const RouterSpec& router, const SimConfig& base,
                                          const std::vector<int>& values) {
    if (!std::is_sorted(values.begin(), values.end()))
        throw ArgumentError("sweep values must be sorted ascending");
    std::vector<SweepPoint> curve;
    for (int cap : values) {
        SimConfig cfg = base;
        cfg.uniform_capacity = cap;
        curve.push_back({static_cast<double>(cap), run_simulation(ds, predictions, router, cfg)});
    }
    return curve;
}

RoutingDistribution routing_distribution(const SimMetrics& metrics) {
    RoutingDistribution dist;
    if (metrics.routed == 0) return dist;
    for (int d = 0; d < 3; ++d)
        for (int t = 0; t < 2; ++t)
            dist.fraction[d][t] = static_cast<double>(metrics.difficulty_tier_counts[d][t]) /
                                  static_cast<double>(metrics.routed);
    return dist;
}

ordered_json SimMetrics::to_json() const {
    ordered_json j;
    j["arrived"] = arrived;
    j["routed"] = routed;
    j["completed"] = completed;
    j["requeues"] = requeues;
    j["correct"] = correct;
    j["accuracy"] = accuracy;
    j["total_cost_dollars"] = money_to_string(total_cost);
    j["total_cost_picodollars"] = total_cost;
    ordered_json dist;
    const char* difficulty_names[3] = {"EASY", "MEDIUM", "HARD"};
    const char* tier_names[2] = {"WEAK", "STRONG"};
    for (int d = 0; d < 3; ++d)
        for (int t = 0; t < 2; ++t)
            dist[std::string(difficulty_names[d]) + "_" + tier_names[t]] =
                difficulty_tier_counts[d][t];
    j["difficulty_tier_counts"] = dist;
    j["quality_violation_windows"] = quality_violation_windows;
    j["capacity_violations"] = capacity_violations;
    j["infeasible_windows"] = infeasible_windows;
    j["windows"] = windows;
    j["ticks"] = ticks;
    j["remaining_queued"] = remaining_queued;
    j["remaining_unarrived"] = remaining_unarrived;
    j["remaining_in_flight"] = remaining_in_flight;
    j["avg_predicted_quality"] = avg_predicted_quality;
    j["routed_per_model"] = routed_per_model;
    return j;
}

ordered_json WindowLogEntry::to_json() const {
    ordered_json j;
    j["tick"] = tick;
    j["queue_depth"] = queue_depth;
    j["placed"] = placed;
    j["requeued"] = requeued;
    j["loads"] = loads;
    j["solver_status"] = solver_status;
    return j;
}

ordered_json RoutingDistribution::to_json() const {
    ordered_json j;
    const char* difficulty_names[3] = {"EASY", "MEDIUM", "HARD"};
    const char* tier_names[2] = {"WEAK", "STRONG"};
    for (int d = 0; d < 3; ++d) {
        ordered_json row;
        for (int t = 0; t < 2; ++t) row[tier_names[t]] = fraction[d][t];
        j[difficulty_names[d]] = row;
    }
    return j;
}

}  // namespace lmroute
