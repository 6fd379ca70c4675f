#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lmroute/embedding.hpp"
#include "lmroute/money.hpp"

namespace lmroute {

enum class Source { MMLU, GPQA, MATH500, GSM8K, SYNTHETIC };
enum class Tier { WEAK, STRONG };
enum class Difficulty { EASY, MEDIUM, HARD };

Source parse_source(const std::string& name);
std::string to_string(Source s);
Tier parse_tier(const std::string& name);
std::string to_string(Tier t);
std::string to_string(Difficulty d);

// One query with its observed per-model ground truth: whether each candidate
// model answered it correctly and how many output tokens it spent doing so.
struct QueryRecord {
    std::string id;
    std::string text;
    Source source = Source::SYNTHETIC;
    std::vector<double> embedding;            // unit L2 norm
    std::map<std::string, int> correctness;   // model id -> {0,1}
    std::map<std::string, int> out_tokens;    // model id -> observed output length
    int in_tokens = 0;

    int correct_count() const;
};

// One candidate model. Prices are stored as integer picodollars per token
// (numerically equal to the quoted dollars per million tokens, scaled by 1e6).
struct ModelSpec {
    std::string id;
    std::string name;
    std::string description;
    std::vector<double> embedding;
    Money price_in_per_token = 0;
    Money price_out_per_token = 0;
    Tier tier = Tier::WEAK;
    int concurrency_limit = 1;
};

struct Dataset {
    std::vector<QueryRecord> queries;
    std::vector<ModelSpec> models;
    int l_max = 1024;
    int embedding_dim = 256;

    int model_index(const std::string& id) const;  // -1 when absent
    std::size_t n_queries() const { return queries.size(); }
    std::size_t n_models() const { return models.size(); }

    // Enforces every type invariant; throws SchemaError / ArgumentError.
    void validate() const;
};

// Difficulty from the number of models answering correctly. For 10 models this
// is the {8,9,10} / {4..7} / {0..3} bracketing; for other counts the same
// correct-fraction bands [0.8,1], [0.4,0.8), [0,0.4) apply, evaluated in exact
// integer arithmetic.
Difficulty label_from_correct_count(int correct, int total_models);
Difficulty label_difficulty(const QueryRecord& record, int total_models);

// in_tokens * price_in + out_tokens * price_out, exact in integer picodollars.
Money token_cost(const ModelSpec& model, std::int64_t in_tokens, std::int64_t out_tokens);

struct LoadOptions {
    std::string queries_path;
    std::string models_path;
    std::string embeddings_path;  // optional sidecar; defaults to <queries>.emb when present
    EmbedderKind embedder = EmbedderKind::HASHED;
    int embedding_dim = 256;
    int l_max = 1024;
};

Dataset load_dataset(const LoadOptions& options);
void save_dataset(const Dataset& ds, const std::string& queries_path,
                  const std::string& models_path);

struct SplitResult {
    Dataset train;
    Dataset eval;
};

// Disjoint source-stratified partition, deterministic given the seed. Each
// source contributes round(eval_fraction * count) queries to the eval side.
SplitResult split_train_eval(const Dataset& ds, double eval_fraction, std::uint64_t seed);

}  // namespace lmroute
