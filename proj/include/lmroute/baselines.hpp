#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lmroute/predictor.hpp"
#include "lmroute/rng.hpp"

namespace lmroute {

// Per-query greedy policies, the locally-optimal family the constrained router
// is compared against. They filter on remaining capacity but ignore the
// quality constraint by construction.
enum class GreedyKind { CHEAPEST_CONFIDENT, MAX_QUALITY, RANDOM };

GreedyKind parse_greedy_kind(const std::string& name);

struct GreedyPolicy {
    GreedyKind kind = GreedyKind::CHEAPEST_CONFIDENT;
    double confidence_threshold = 0.8;  // CHEAPEST_CONFIDENT only
    std::uint64_t seed = 0;             // RANDOM only

    void validate() const;
};

// Owns the seeded generator for RANDOM; a router instance must not be shared
// across concurrent simulations.
class GreedyRouter {
public:
    explicit GreedyRouter(const GreedyPolicy& policy);

    // Picks a model index for one query given its per-model predictions and the
    // remaining per-model capacity. Throws CapacityExhaustedError when no model
    // has capacity; the caller re-queues the query.
    int route(const std::vector<Prediction>& predictions,
              const std::vector<int>& remaining_capacity);

    const GreedyPolicy& policy() const { return policy_; }

private:
    GreedyPolicy policy_;
    Rng rng_;
};

int route_greedy(GreedyPolicy policy, const std::vector<Prediction>& predictions,
                 const std::vector<int>& remaining_capacity, Rng& rng);

}  // namespace lmroute
