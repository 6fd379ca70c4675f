#include "lmroute/optimizer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "lmroute/errors.hpp"

namespace lmroute {

namespace {

constexpr double kFeasibilityTol = 1e-9;
constexpr double kStallTol = 1e-9;

struct InstanceScales {
    double mean_cost = 0.0;
    double capability_span = 0.0;
};

InstanceScales measure(const RoutingInstance& inst) {
    InstanceScales s;
    const int n = inst.n_queries(), m = inst.n_models();
    if (n == 0 || m == 0) return s;
    double sum = 0.0;
    double lo = inst.capability[0][0], hi = inst.capability[0][0];
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j) {
            sum += inst.cost[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            const double a = inst.capability[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            lo = std::min(lo, a);
            hi = std::max(hi, a);
        }
    }
    s.mean_cost = sum / static_cast<double>(n * m);
    s.capability_span = hi - lo;
    return s;
}

}  // namespace

std::string to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::CONVERGED: return "CONVERGED";
        case SolveStatus::MAX_ITERS: return "MAX_ITERS";
        case SolveStatus::LIKELY_INFEASIBLE: return "LIKELY_INFEASIBLE";
    }
    return "MAX_ITERS";
}

void RoutingInstance::validate() const {
    const int n = n_queries(), m = n_models();
    if (m < 1) throw ArgumentError("instance needs at least one model");
    if (static_cast<int>(capability.size()) != n)
        throw ArgumentError("cost and capability row counts differ");
    if (alpha < 0.0 || alpha > 1.0) throw ArgumentError("alpha must lie in [0, 1]");
    for (int i = 0; i < n; ++i) {
        const auto& crow = cost[static_cast<std::size_t>(i)];
        const auto& arow = capability[static_cast<std::size_t>(i)];
        if (static_cast<int>(crow.size()) != m || static_cast<int>(arow.size()) != m)
            throw ArgumentError("row " + std::to_string(i) + " has wrong width");
        for (int j = 0; j < m; ++j) {
            if (!(crow[static_cast<std::size_t>(j)] >= 0.0))
                throw ArgumentError("costs must be non-negative");
            const double a = arow[static_cast<std::size_t>(j)];
            if (!(a >= 0.0 && a <= 1.0)) throw ArgumentError("capabilities must lie in [0, 1]");
        }
    }
    for (int c : capacity)
        if (c < 1) throw ArgumentError("capacities must be >= 1");
}

double reduced_cost(const RoutingInstance& inst, int i, int j, const Multipliers& mult) {
    const int n = inst.n_queries();
    if (i < 0 || i >= n || j < 0 || j >= inst.n_models())
        throw ArgumentError("reduced_cost index out of range");
    return inst.cost[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] -
           mult.quality * inst.capability[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] /
               static_cast<double>(n) +
           mult.capacity[static_cast<std::size_t>(j)];
}

Assignment assign_given_multipliers(const RoutingInstance& inst, const Multipliers& mult) {
    const int n = inst.n_queries(), m = inst.n_models();
    Assignment asg;
    asg.choice.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        int best = 0;
        double best_rc = reduced_cost(inst, i, 0, mult);
        double best_a = inst.capability[static_cast<std::size_t>(i)][0];
        for (int j = 1; j < m; ++j) {
            const double rc = reduced_cost(inst, i, j, mult);
            const double a = inst.capability[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            // Ascending j means lower index wins remaining ties.
            if (rc < best_rc || (rc == best_rc && a > best_a)) {
                best = j;
                best_rc = rc;
                best_a = a;
            }
        }
        asg.choice[static_cast<std::size_t>(i)] = best;
    }
    return asg;
}

std::vector<int> assignment_loads(const RoutingInstance& inst, const Assignment& asg) {
    std::vector<int> loads(static_cast<std::size_t>(inst.n_models()), 0);
    for (int j : asg.choice) ++loads[static_cast<std::size_t>(j)];
    return loads;
}

double assignment_cost(const RoutingInstance& inst, const Assignment& asg) {
    double total = 0.0;
    for (std::size_t i = 0; i < asg.choice.size(); ++i)
        total += inst.cost[i][static_cast<std::size_t>(asg.choice[i])];
    return total;
}

double assignment_avg_quality(const RoutingInstance& inst, const Assignment& asg) {
    if (asg.choice.empty()) return 1.0;
    double total = 0.0;
    for (std::size_t i = 0; i < asg.choice.size(); ++i)
        total += inst.capability[i][static_cast<std::size_t>(asg.choice[i])];
    return total / static_cast<double>(asg.choice.size());
}

bool assignment_feasible(const RoutingInstance& inst, const Assignment& asg) {
    if (assignment_avg_quality(inst, asg) < inst.alpha - kFeasibilityTol) return false;
    const std::vector<int> loads = assignment_loads(inst, asg);
    for (int j = 0; j < inst.n_models(); ++j)
        if (loads[static_cast<std::size_t>(j)] > inst.capacity[static_cast<std::size_t>(j)])
            return false;
    return true;
}

Multipliers update_multipliers(const Multipliers& mult, const Assignment& asg,
                               const RoutingInstance& inst, double step_quality,
                               double step_capacity) {
    Multipliers next = mult;
    const double avg_quality = assignment_avg_quality(inst, asg);
    next.quality = std::max(mult.quality + step_quality * (inst.alpha - avg_quality), 0.0);
    const std::vector<int> loads = assignment_loads(inst, asg);
    for (std::size_t j = 0; j < next.capacity.size(); ++j)
        next.capacity[j] = std::max(
            mult.capacity[j] + step_capacity * static_cast<double>(loads[j] - inst.capacity[j]),
            0.0);
    return next;
}

Multipliers update_multipliers(const Multipliers& mult, const Assignment& asg,
                               const RoutingInstance& inst, const SolverConfig& config) {
    return update_multipliers(mult, asg, inst, config.step_quality, config.step_capacity);
}

double dual_value(const RoutingInstance& inst, const Multipliers& mult) {
    double value = mult.quality * inst.alpha;
    for (int j = 0; j < inst.n_models(); ++j)
        value -= mult.capacity[static_cast<std::size_t>(j)] *
                 static_cast<double>(inst.capacity[static_cast<std::size_t>(j)]);
    for (int i = 0; i < inst.n_queries(); ++i) {
        double best = reduced_cost(inst, i, 0, mult);
        for (int j = 1; j < inst.n_models(); ++j)
            best = std::min(best, reduced_cost(inst, i, j, mult));
        value += best;
    }
    return value;
}

Assignment fallback_assignment(const RoutingInstance& inst) {
    const int n = inst.n_queries(), m = inst.n_models();
    // Queries with the largest capability spread have the most to lose from a
    // bad slot, so they pick first.
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> spread(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
        const auto& row = inst.capability[static_cast<std::size_t>(i)];
        const auto [lo, hi] = std::minmax_element(row.begin(), row.end());
        spread[static_cast<std::size_t>(i)] = *hi - *lo;
    }
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (spread[static_cast<std::size_t>(a)] != spread[static_cast<std::size_t>(b)])
            return spread[static_cast<std::size_t>(a)] > spread[static_cast<std::size_t>(b)];
        return a < b;
    });

    Assignment asg;
    asg.choice.assign(static_cast<std::size_t>(n), 0);
    std::vector<int> remaining(inst.capacity.begin(), inst.capacity.end());
    for (int i : order) {
        const auto& row = inst.capability[static_cast<std::size_t>(i)];
        int best = -1;
        for (int j = 0; j < m; ++j) {
            if (remaining[static_cast<std::size_t>(j)] <= 0) continue;
            if (best < 0 || row[static_cast<std::size_t>(j)] > row[static_cast<std::size_t>(best)])
                best = j;
        }
        if (best < 0) {
            // Everything is full; overflow to the best model regardless.
            best = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
        } else {
            --remaining[static_cast<std::size_t>(best)];
        }
        asg.choice[static_cast<std::size_t>(i)] = best;
    }
    return asg;
}

std::pair<Assignment, SolveReport> solve(const RoutingInstance& inst, const SolverConfig& config) {
    inst.validate();
    const int n = inst.n_queries();

    SolveReport report;
    report.capacity_residuals.assign(static_cast<std::size_t>(inst.n_models()), 0.0);
    report.multipliers = Multipliers::zeros(inst.n_models());

    if (n == 0) {
        report.feasible = true;
        report.avg_quality = 1.0;
        report.status = SolveStatus::CONVERGED;
        report.dual_value = dual_value(inst, report.multipliers);
        return {Assignment{}, report};
    }

    const InstanceScales scales = measure(inst);
    const double cost_scale = scales.mean_cost > 0.0 ? scales.mean_cost : 1.0;
    const double span = scales.capability_span > 1e-12 ? scales.capability_span : 1.0;
    const double step_quality =
        config.step_quality > 0.0 ? config.step_quality : 2.0 * cost_scale * n / span;
    const double step_capacity = config.step_capacity > 0.0 ? config.step_capacity : cost_scale;
    const double lambda1_cap =
        config.lambda1_cap > 0.0 ? config.lambda1_cap : 1e4 * cost_scale * n;

    // Capacity-free certificate: even routing every query to its best model
    // cannot reach alpha.
    double best_possible = 0.0;
    for (int i = 0; i < n; ++i) {
        const auto& row = inst.capability[static_cast<std::size_t>(i)];
        best_possible += *std::max_element(row.begin(), row.end());
    }
    best_possible /= static_cast<double>(n);

    const Assignment fallback = fallback_assignment(inst);
    if (best_possible < inst.alpha - kFeasibilityTol) {
        report.status = SolveStatus::LIKELY_INFEASIBLE;
        report.feasible = false;
        report.total_cost = assignment_cost(inst, fallback);
        report.avg_quality = assignment_avg_quality(inst, fallback);
        report.dual_value = dual_value(inst, report.multipliers);
        return {fallback, report};
    }

    std::optional<Assignment> incumbent;
    double incumbent_cost = 0.0;
    // The deterministic fallback seeds the incumbent when it happens to be
    // feasible; dual iterates replace it as soon as they find anything cheaper.
    if (assignment_feasible(inst, fallback)) {
        incumbent = fallback;
        incumbent_cost = assignment_cost(inst, fallback);
    }

    Multipliers mult = Multipliers::zeros(inst.n_models());
    int stall_count = 0;
    bool stalled = false;
    int iterations = 0;
    for (int t = 1; t <= config.max_iters; ++t) {
        iterations = t;
        const Assignment asg = assign_given_multipliers(inst, mult);
        if (assignment_feasible(inst, asg)) {
            const double cost = assignment_cost(inst, asg);
            if (!incumbent || cost < incumbent_cost) {
                incumbent = asg;
                incumbent_cost = cost;
            }
        }

        if (mult.quality > lambda1_cap && !incumbent) break;

        const double decay = 1.0 / std::sqrt(static_cast<double>(t));
        const Multipliers next =
            update_multipliers(mult, asg, inst, step_quality * decay, step_capacity * decay);

        double change = std::abs(next.quality - mult.quality);
        for (std::size_t j = 0; j < next.capacity.size(); ++j)
            change = std::max(change, std::abs(next.capacity[j] - mult.capacity[j]));
        mult = next;

        if (change < kStallTol) {
            if (++stall_count >= config.stall_window) {
                stalled = true;
                break;
            }
        } else {
            stall_count = 0;
        }
    }

    report.iterations = iterations;
    report.multipliers = mult;
    report.dual_value = dual_value(inst, mult);

    const Assignment& chosen = incumbent ? *incumbent : fallback;
    report.feasible = incumbent.has_value();
    report.total_cost = assignment_cost(inst, chosen);
    report.avg_quality = assignment_avg_quality(inst, chosen);
    report.quality_slack_residual = mult.quality * (inst.alpha - report.avg_quality);
    const std::vector<int> loads = assignment_loads(inst, chosen);
    for (std::size_t j = 0; j < loads.size(); ++j)
        report.capacity_residuals[j] =
            mult.capacity[j] * static_cast<double>(inst.capacity[j] - loads[j]);

    if (!incumbent)
        report.status = SolveStatus::LIKELY_INFEASIBLE;
    else if (stalled)
        report.status = SolveStatus::CONVERGED;
    else
        report.status = SolveStatus::MAX_ITERS;
    return {chosen, report};
}

namespace {

void guard_enumeration_size(const RoutingInstance& inst) {
    const int n = inst.n_queries(), m = inst.n_models();
    double combos = 1.0;
    for (int i = 0; i < n; ++i) {
        combos *= static_cast<double>(m);
        if (combos > 1e7)
            throw SizeGuardError("brute force refused: M^N exceeds 1e7 (N=" + std::to_string(n) +
                                 ", M=" + std::to_string(m) + ")");
    }
}

// Enumerates choice vectors in lexicographic order, invoking fn(asg) for each.
template <typename Fn>
void for_each_assignment(const RoutingInstance& inst, Fn&& fn) {
    const int n = inst.n_queries(), m = inst.n_models();
    Assignment asg;
    asg.choice.assign(static_cast<std::size_t>(n), 0);
    if (n == 0) {
        fn(asg);
        return;
    }
    while (true) {
        fn(asg);
        int pos = n - 1;
        while (pos >= 0 && asg.choice[static_cast<std::size_t>(pos)] == m - 1) {
            asg.choice[static_cast<std::size_t>(pos)] = 0;
            --pos;
        }
        if (pos < 0) break;
        ++asg.choice[static_cast<std::size_t>(pos)];
    }
}

}  // namespace

OracleResult brute_force(const RoutingInstance& inst) {
    inst.validate();
    guard_enumeration_size(inst);

    OracleResult result;
    for_each_assignment(inst, [&](const Assignment& asg) {
        if (!assignment_feasible(inst, asg)) return;
        const double cost = assignment_cost(inst, asg);
        // Strict improvement keeps the lexicographically smallest optimum.
        if (!result.assignment || cost < result.cost) {
            result.assignment = asg;
            result.cost = cost;
        }
    });
    return result;
}

double best_feasible_quality(const RoutingInstance& inst) {
    inst.validate();
    guard_enumeration_size(inst);

    double best = -1.0;
    for_each_assignment(inst, [&](const Assignment& asg) {
        const std::vector<int> loads = assignment_loads(inst, asg);
        for (int j = 0; j < inst.n_models(); ++j)
            if (loads[static_cast<std::size_t>(j)] > inst.capacity[static_cast<std::size_t>(j)])
                return;
        best = std::max(best, assignment_avg_quality(inst, asg));
    });
    return best;
}

KktReport check_kkt(const RoutingInstance& inst, const Assignment& asg, const Multipliers& mult) {
    KktReport report;
    report.assignment_complete =
        static_cast<int>(asg.choice.size()) == inst.n_queries() &&
        std::all_of(asg.choice.begin(), asg.choice.end(),
                    [&](int j) { return j >= 0 && j < inst.n_models(); });
    report.avg_quality = assignment_avg_quality(inst, asg);
    report.quality_feasible = report.avg_quality >= inst.alpha - kFeasibilityTol;
    report.loads = assignment_loads(inst, asg);
    report.capacity_feasible = true;
    for (int j = 0; j < inst.n_models(); ++j)
        if (report.loads[static_cast<std::size_t>(j)] > inst.capacity[static_cast<std::size_t>(j)])
            report.capacity_feasible = false;
    report.dual_feasible = mult.quality >= 0.0 &&
                           std::all_of(mult.capacity.begin(), mult.capacity.end(),
                                       [](double x) { return x >= 0.0; });
    report.quality_residual = mult.quality * (inst.alpha - report.avg_quality);
    report.capacity_residuals.resize(static_cast<std::size_t>(inst.n_models()));
    for (int j = 0; j < inst.n_models(); ++j)
        report.capacity_residuals[static_cast<std::size_t>(j)] =
            mult.capacity[static_cast<std::size_t>(j)] *
            static_cast<double>(inst.capacity[static_cast<std::size_t>(j)] -
                                report.loads[static_cast<std::size_t>(j)]);
    return report;
}

RoutingInstance make_random_feasible_instance(Rng& rng, int max_n, int max_m) {
    if (max_n < 1 || max_m < 1) throw ArgumentError("max_n and max_m must be >= 1");
    RoutingInstance inst;
    const int n = static_cast<int>(next_int_in(rng, 1, max_n));
    const int m = static_cast<int>(next_int_in(rng, 1, max_m));
    inst.cost.assign(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(m)));
    inst.capability.assign(static_cast<std::size_t>(n),
                           std::vector<double>(static_cast<std::size_t>(m)));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) {
            inst.cost[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = next_unit(rng);
            inst.capability[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = next_unit(rng);
        }

    // Capacities drawn to sum to at least N so a capacity-feasible assignment
    // always exists, then alpha inside the achievable quality range.
    inst.capacity.assign(static_cast<std::size_t>(m), 1);
    int total = m;
    for (int j = 0; j < m; ++j) {
        const int extra = static_cast<int>(next_int_in(rng, 0, n));
        inst.capacity[static_cast<std::size_t>(j)] += extra;
        total += extra;
    }
    while (total < n) {
        const int j = static_cast<int>(next_below(rng, static_cast<std::uint64_t>(m)));
        ++inst.capacity[static_cast<std::size_t>(j)];
        ++total;
    }

    inst.alpha = 0.0;
    const double best = best_feasible_quality(inst);
    inst.alpha = next_unit(rng) * best;
    return inst;
}

namespace {

std::string format_double(double x) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    (void)ec;
    return std::string(buf, ptr);
}

double parse_double_token(const std::string& tok, int line_no) {
    double x = 0.0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), x);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
        throw ParseError("instance line " + std::to_string(line_no) + ": bad number '" + tok + "'");
    return x;
}

}  // namespace

std::string format_instance(const RoutingInstance& inst) {
    std::ostringstream out;
    out << "n " << inst.n_queries() << " m " << inst.n_models() << "\n";
    out << "alpha " << format_double(inst.alpha) << "\n";
    out << "capacity";
    for (int c : inst.capacity) out << " " << c;
    out << "\ncost\n";
    for (const auto& row : inst.cost) {
        for (std::size_t j = 0; j < row.size(); ++j) out << (j ? " " : "") << format_double(row[j]);
        out << "\n";
    }
    out << "capability\n";
    for (const auto& row : inst.capability) {
        for (std::size_t j = 0; j < row.size(); ++j) out << (j ? " " : "") << format_double(row[j]);
        out << "\n";
    }
    return out.str();
}

RoutingInstance parse_instance(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    auto next_line = [&]() {
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty()) return true;
        }
        return false;
    };
    auto tokens = [&]() {
        std::vector<std::string> toks;
        std::istringstream ls(line);
        std::string t;
        while (ls >> t) toks.push_back(t);
        return toks;
    };

    if (!next_line()) throw ParseError("instance: empty input");
    auto header = tokens();
    if (header.size() != 4 || header[0] != "n" || header[2] != "m")
        throw ParseError("instance line 1: expected 'n <N> m <M>'");
    const int n = static_cast<int>(parse_double_token(header[1], line_no));
    const int m = static_cast<int>(parse_double_token(header[3], line_no));
    if (n < 0 || m < 1) throw ParseError("instance: invalid dimensions");

    if (!next_line()) throw ParseError("instance: missing alpha line");
    auto alpha_toks = tokens();
    if (alpha_toks.size() != 2 || alpha_toks[0] != "alpha")
        throw ParseError("instance line " + std::to_string(line_no) + ": expected 'alpha <value>'");
    RoutingInstance inst;
    inst.alpha = parse_double_token(alpha_toks[1], line_no);

    if (!next_line()) throw ParseError("instance: missing capacity line");
    auto cap_toks = tokens();
    if (cap_toks.size() != static_cast<std::size_t>(m) + 1 || cap_toks[0] != "capacity")
        throw ParseError("instance line " + std::to_string(line_no) +
                         ": expected 'capacity' followed by M values");
    for (int j = 0; j < m; ++j)
        inst.capacity.push_back(
            static_cast<int>(parse_double_token(cap_toks[static_cast<std::size_t>(j) + 1], line_no)));

    auto read_matrix = [&](const std::string& name) {
        if (!next_line() || line != name)
            throw ParseError("instance line " + std::to_string(line_no) + ": expected '" + name + "'");
        std::vector<std::vector<double>> matrix;
        for (int i = 0; i < n; ++i) {
            if (!next_line())
                throw ParseError("instance: " + name + " matrix has too few rows");
            auto toks = tokens();
            if (toks.size() != static_cast<std::size_t>(m))
                throw ParseError("instance line " + std::to_string(line_no) + ": expected " +
                                 std::to_string(m) + " values");
            std::vector<double> row;
            for (const auto& t : toks) row.push_back(parse_double_token(t, line_no));
            matrix.push_back(std::move(row));
        }
        return matrix;
    };
    inst.cost = read_matrix("cost");
    inst.capability = read_matrix("capability");
    inst.validate();
    return inst;
}

RoutingInstance load_instance(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open instance file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_instance(buf.str());
}

void save_instance(const RoutingInstance& inst, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write instance file: " + path);
    out << format_instance(inst);
}

}  // namespace lmroute
