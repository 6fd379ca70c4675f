#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lmroute/rng.hpp"

namespace lmroute {

// One window's constrained assignment problem: route each of N queries to one
// of M models, minimizing total cost subject to a minimum average capability
// (alpha) and a per-model load cap.
struct RoutingInstance {
    std::vector<std::vector<double>> cost;        // N x M, non-negative
    std::vector<std::vector<double>> capability;  // N x M, in [0, 1]
    double alpha = 0.0;
    std::vector<int> capacity;                    // M, entries >= 1

    int n_queries() const { return static_cast<int>(cost.size()); }
    int n_models() const { return static_cast<int>(capacity.size()); }
    void validate() const;
};

// Dual state: one multiplier pricing the quality constraint, one per model
// pricing its capacity. The per-query assignment multipliers are eliminated
// analytically and never materialized.
struct Multipliers {
    double quality = 0.0;            // >= 0
    std::vector<double> capacity;    // per model, >= 0

    static Multipliers zeros(int n_models) { return {0.0, std::vector<double>(static_cast<std::size_t>(n_models), 0.0)}; }
};

// choice[i] is the model index query i is routed to; exactly one per query.
struct Assignment {
    std::vector<int> choice;
};

struct SolverConfig {
    double step_quality = 0.0;    // 0 = auto: 2 * mean(cost) * N / span(capability)
    double step_capacity = 0.0;   // 0 = auto: mean(cost)
    int max_iters = 500;
    double lambda1_cap = 0.0;     // 0 = auto: 1e4 * mean(cost) * N
    int stall_window = 25;
};

enum class SolveStatus { CONVERGED, MAX_ITERS, LIKELY_INFEASIBLE };

std::string to_string(SolveStatus s);

struct SolveReport {
    double total_cost = 0.0;
    double avg_quality = 0.0;
    int iterations = 0;
    bool feasible = false;
    double quality_slack_residual = 0.0;        // lambda1 * (alpha - avg_quality)
    std::vector<double> capacity_residuals;     // lambda2_j * (L_j - load_j)
    double dual_value = 0.0;                    // dual function at final multipliers
    SolveStatus status = SolveStatus::MAX_ITERS;
    Multipliers multipliers;                    // final dual state
};

// c_ij - lambda1 * a_ij / N + lambda2_j.
double reduced_cost(const RoutingInstance& inst, int i, int j, const Multipliers& mult);

// Row-wise argmin of reduced cost; ties broken by higher capability, then
// lower model index.
Assignment assign_given_multipliers(const RoutingInstance& inst, const Multipliers& mult);

// Per-model loads induced by an assignment.
std::vector<int> assignment_loads(const RoutingInstance& inst, const Assignment& asg);
double assignment_cost(const RoutingInstance& inst, const Assignment& asg);
double assignment_avg_quality(const RoutingInstance& inst, const Assignment& asg);
bool assignment_feasible(const RoutingInstance& inst, const Assignment& asg);

// Projected ascent step: multipliers move along the constraint violations and
// are clamped at zero.
Multipliers update_multipliers(const Multipliers& mult, const Assignment& asg,
                               const RoutingInstance& inst, double step_quality,
                               double step_capacity);
Multipliers update_multipliers(const Multipliers& mult, const Assignment& asg,
                               const RoutingInstance& inst, const SolverConfig& config);

// Dual function value: sum_i min_j reduced_cost(i, j) + lambda1 * alpha
// - sum_j lambda2_j * L_j. A lower bound on every feasible assignment's cost.
double dual_value(const RoutingInstance& inst, const Multipliers& mult);

// Capacity-respecting assignment that greedily maximizes total capability:
// queries in descending capability-spread order, each to the highest-capability
// model with remaining capacity (ties: lower index). When every model is full
// the query overflows to its highest-capability model; callers that must
// respect capacity place queries against residual capacity themselves.
Assignment fallback_assignment(const RoutingInstance& inst);

// Projected dual gradient ascent from zero multipliers, tracking the best
// primal-feasible assignment seen across iterates. The returned assignment is
// always the incumbent (or the greedy fallback when no feasible iterate was
// found, with status LIKELY_INFEASIBLE).
std::pair<Assignment, SolveReport> solve(const RoutingInstance& inst, const SolverConfig& config);

// Exhaustive enumeration oracle. Guarded to M^N <= 1e7; returns std::nullopt
// when no assignment satisfies both constraint families. Ties resolve to the
// lexicographically smallest choice vector.
struct OracleResult {
    std::optional<Assignment> assignment;
    double cost = 0.0;
};
OracleResult brute_force(const RoutingInstance& inst);

// Highest average capability over capacity-feasible assignments (same
// enumeration guard). Used to draw alpha values that keep an instance feasible.
double best_feasible_quality(const RoutingInstance& inst);

struct KktReport {
    bool quality_feasible = false;
    bool capacity_feasible = false;
    bool assignment_complete = false;
    bool dual_feasible = false;
    double avg_quality = 0.0;
    std::vector<int> loads;
    double quality_residual = 0.0;           // lambda1 * (alpha - avg_quality)
    std::vector<double> capacity_residuals;  // lambda2_j * (L_j - load_j)
};

KktReport check_kkt(const RoutingInstance& inst, const Assignment& asg, const Multipliers& mult);

// Random instance with uniform costs/capabilities, capacities summing to at
// least N, and alpha drawn inside the feasible range. Deterministic given rng.
RoutingInstance make_random_feasible_instance(Rng& rng, int max_n, int max_m);

// Text round trip for golden tests and the oracle-compare CLI.
std::string format_instance(const RoutingInstance& inst);
RoutingInstance parse_instance(const std::string& text);
RoutingInstance load_instance(const std::string& path);
void save_instance(const RoutingInstance& inst, const std::string& path);

}  // namespace lmroute
