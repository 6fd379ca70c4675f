#pragma once

#include <stdexcept>
#include <string>

namespace lmroute {

// Malformed input file (names the offending line where possible).
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Structurally valid input that violates a dataset/schema invariant.
struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid argument to an operation (dimension mismatch, bad range, ...).
struct ArgumentError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Lookup of an unknown id (precomputed embedding, model id, ...).
struct LookupError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Training produced a non-finite loss.
struct TrainingDivergedError : std::runtime_error {
    explicit TrainingDivergedError(int epoch_)
        : std::runtime_error("training diverged (non-finite loss) at epoch " +
                             std::to_string(epoch_)),
          epoch(epoch_) {}
    int epoch;
};

// No model has remaining capacity; the caller re-queues the query.
struct CapacityExhaustedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Exhaustive enumeration refused because the instance is too large.
struct SizeGuardError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Retrieval store is empty; the caller falls back to trained-only predictions.
struct RetrievalUnavailableError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace lmroute
