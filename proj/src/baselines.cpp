#include "lmroute/baselines.hpp"

#include "lmroute/errors.hpp"

namespace lmroute {

namespace {

// Lowest predicted cost among candidates; ties by higher capability, then
// lower index (ascending scan).
int cheapest_of(const std::vector<Prediction>& preds, const std::vector<int>& capacity,
                bool require_confident, double threshold) {
    int best = -1;
    for (std::size_t j = 0; j < preds.size(); ++j) {
        if (capacity[j] <= 0) continue;
        if (require_confident && preds[j].a < threshold) continue;
        if (best < 0 || preds[j].cost < preds[static_cast<std::size_t>(best)].cost ||
            (preds[j].cost == preds[static_cast<std::size_t>(best)].cost &&
             preds[j].a > preds[static_cast<std::size_t>(best)].a))
            best = static_cast<int>(j);
    }
    return best;
}

}  // namespace

GreedyKind parse_greedy_kind(const std::string& name) {
    if (name == "greedy-cost") return GreedyKind::CHEAPEST_CONFIDENT;
    if (name == "greedy-quality") return GreedyKind::MAX_QUALITY;
    if (name == "random") return GreedyKind::RANDOM;
    throw ArgumentError("unknown greedy router: '" + name + "'");
}

void GreedyPolicy::validate() const {
    if (confidence_threshold < 0.0 || confidence_threshold > 1.0)
        throw ArgumentError("confidence_threshold must lie in [0, 1]");
}

GreedyRouter::GreedyRouter(const GreedyPolicy& policy) : policy_(policy), rng_(policy.seed) {
    policy_.validate();
}

int GreedyRouter::route(const std::vector<Prediction>& predictions,
                        const std::vector<int>& remaining_capacity) {
    return route_greedy(policy_, predictions, remaining_capacity, rng_);
}

int route_greedy(GreedyPolicy policy, const std::vector<Prediction>& predictions,
                 const std::vector<int>& remaining_capacity, Rng& rng) {
    policy.validate();
    if (predictions.size() != remaining_capacity.size())
        throw ArgumentError("predictions and capacity vectors differ in length");

    bool any_free = false;
    for (int c : remaining_capacity)
        if (c > 0) any_free = true;
    if (!any_free) throw CapacityExhaustedError("no model has remaining capacity");

    switch (policy.kind) {
        case GreedyKind::CHEAPEST_CONFIDENT: {
            const int confident =
                cheapest_of(predictions, remaining_capacity, true, policy.confidence_threshold);
            if (confident >= 0) return confident;
            return cheapest_of(predictions, remaining_capacity, false, 0.0);
        }
        case GreedyKind::MAX_QUALITY: {
            int best = -1;
            for (std::size_t j = 0; j < predictions.size(); ++j) {
                if (remaining_capacity[j] <= 0) continue;
                if (best < 0 || predictions[j].a > predictions[static_cast<std::size_t>(best)].a ||
                    (predictions[j].a == predictions[static_cast<std::size_t>(best)].a &&
                     predictions[j].cost < predictions[static_cast<std::size_t>(best)].cost))
                    best = static_cast<int>(j);
            }
            return best;
        }
        case GreedyKind::RANDOM: {
            std::vector<int> free;
            for (std::size_t j = 0; j < remaining_capacity.size(); ++j)
                if (remaining_capacity[j] > 0) free.push_back(static_cast<int>(j));
            return free[next_below(rng, free.size())];
        }
    }
    throw ArgumentError("unreachable greedy kind");
}

}  // namespace lmroute
