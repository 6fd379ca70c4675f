#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lmroute/dataset.hpp"
#include "lmroute/money.hpp"

namespace lmroute {

// Two linear heads over the query/model embeddings: a sigmoid capability score
// fed by the elementwise product of the two embeddings, and a softmax
// classifier over fixed-width output-length buckets fed by their sum.
struct DualHeadModel {
    std::vector<double> w_cap;               // capability head weights, dimension D
    double b_cap = 0.0;
    std::vector<std::vector<double>> w_len;  // length head weights, K x D
    std::vector<double> b_len;               // length head bias, dimension K
    int bucket_size = 0;
    int n_buckets = 0;
    int l_max = 0;

    int dim() const { return static_cast<int>(w_cap.size()); }

    // Zero-initialized model with bucket_size = ceil(l_max / n_buckets).
    static DualHeadModel zeros(int dim, int l_max, int n_buckets);
    // Same, but sized from an explicit bucket width: n_buckets = ceil(l_max / bs).
    static DualHeadModel zeros_with_bucket_size(int dim, int l_max, int bucket_size);

    void validate() const;

    // Bucket index of an observed output length: min(tokens / bucket_size, K-1).
    int bucket_of(int tokens) const;
    // Center of a bucket, rounded, capped at l_max.
    int bucket_center_tokens(int bucket) const;

    void save(const std::string& path) const;
    static DualHeadModel load(const std::string& path);
};

double predict_capability_trained(const DualHeadModel& model,
                                  const std::vector<double>& query_embedding,
                                  const std::vector<double>& model_embedding);

struct LengthPrediction {
    std::vector<double> bucket_probs;  // sums to 1
    int bucket = 0;                    // argmax (lowest index on ties)
    int predicted_tokens = 0;          // rounded bucket center, capped at l_max
};

LengthPrediction predict_length_trained(const DualHeadModel& model,
                                        const std::vector<double>& query_embedding,
                                        const std::vector<double>& model_embedding);

// Historical query-model observations behind the retrieval component. Entries
// keep their insertion order; lookups are an exact linear scan.
class RetrievalStore {
public:
    struct Entry {
        std::vector<double> embedding;   // unit norm
        std::vector<double> capability;  // per model index, observed {0,1}
        std::vector<int> out_tokens;     // per model index
    };

    RetrievalStore(std::vector<std::string> model_ids, int l_max);
    static RetrievalStore from_dataset(const Dataset& ds);

    void add(Entry entry);
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    int l_max() const { return l_max_; }
    int model_index(const std::string& id) const;
    const Entry& entry(std::size_t i) const { return entries_[i]; }

    // Top-k by descending cosine similarity, ties by ascending insertion index.
    // Returns min(k, size) hits; throws RetrievalUnavailableError when empty.
    std::vector<std::pair<std::size_t, double>> retrieve_topk(
        const std::vector<double>& query_embedding, int k) const;

    // Similarity-weighted average of the neighbors' observed capability for one
    // model; similarities are clamped to [0,1] before weighting, and a zero
    // weight sum degrades to the unweighted mean.
    double capability_retrieve(const std::vector<double>& query_embedding,
                               const std::string& model_id, int k) const;
    double capability_retrieve(const std::vector<double>& query_embedding, int model_idx,
                               int k) const;

    // Same weighting over observed output lengths, rounded, capped at l_max.
    int length_retrieve(const std::vector<double>& query_embedding,
                        const std::string& model_id, int k) const;
    int length_retrieve(const std::vector<double>& query_embedding, int model_idx, int k) const;

private:
    std::vector<std::string> model_ids_;
    std::vector<Entry> entries_;
    int l_max_;
};

struct FusionConfig {
    double gamma = 0.5;  // trained vs retrieved capability weight
    double delta = 0.5;  // trained vs retrieved cost weight
    int k = 16;

    void validate() const;
};

struct Prediction {
    double a = 0.0;       // fused capability
    Money cost = 0;       // fused money cost, input-token term included
    double a_trained = 0.0;
    double a_retrieved = 0.0;
    int l_trained = 0;
    int l_retrieved = 0;
};

// gamma blends the capability estimates; delta blends the output-token cost
// estimates. The input-token cost is known exactly at routing time and is
// added unweighted.
Prediction fuse(double a_trained, int l_trained, double a_retrieved, int l_retrieved,
                const FusionConfig& config, const ModelSpec& model, int in_tokens);

// Full prediction for one query-model pair. A null store (or an empty one)
// degrades to trained-only: gamma and delta are treated as 1.
Prediction predict_pair(const DualHeadModel& model, const RetrievalStore* store,
                        const FusionConfig& config, const QueryRecord& query,
                        const ModelSpec& model_spec, int model_idx);

// Predictions for every query-model pair of a dataset, query-major.
struct PredictionTable {
    std::vector<std::vector<Prediction>> rows;
};

PredictionTable predict_all(const DualHeadModel& model, const RetrievalStore* store,
                            const FusionConfig& config, const Dataset& ds);

struct TrainConfig {
    int epochs = 50;
    double learning_rate = 1e-2;
    int batch_size = 64;
    std::uint64_t seed = 0;
};

struct EpochStats {
    int epoch = 0;
    double capability_loss = 0.0;  // mean squared error
    double length_loss = 0.0;      // mean cross-entropy
    double total_loss = 0.0;
};

struct TrainLog {
    std::vector<EpochStats> epochs;
};

// Gradient container with the same shapes as the trainable parameters.
struct DualHeadGradient {
    std::vector<double> w_cap;
    double b_cap = 0.0;
    std::vector<std::vector<double>> w_len;
    std::vector<double> b_len;
};

// Mean loss / gradient over the given (query, model) index pairs. Exposed so
// the analytic gradients can be checked against finite differences.
struct LossBreakdown {
    double capability = 0.0;
    double length = 0.0;
    double total = 0.0;
};

LossBreakdown training_loss(const DualHeadModel& model, const Dataset& ds,
                            const std::vector<std::pair<int, int>>& pairs);
DualHeadGradient training_gradient(const DualHeadModel& model, const Dataset& ds,
                                   const std::vector<std::pair<int, int>>& pairs);

// Mini-batch gradient descent on MSE(capability) + cross-entropy(length bucket)
// over all query-model pairs of the training set. Deterministic given the seed.
TrainLog train(DualHeadModel& model, const Dataset& train_set, const TrainConfig& config);

struct PredictorEvaluation {
    double capability_accuracy = 0.0;
    double bucket_exact_accuracy = 0.0;
    double bucket_within_one_accuracy = 0.0;
    std::size_t pairs = 0;
};

// Pair-level accuracy of the fused predictor against observed ground truth.
// The fused length is round(delta * l_trained + (1-delta) * l_retrieved).
PredictorEvaluation evaluate_predictor(const DualHeadModel& model, const RetrievalStore* store,
                                       const FusionConfig& config, const Dataset& eval_set);

}  // namespace lmroute
