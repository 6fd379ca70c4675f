#pragma once

#include <array>
#include <cstdint>

#include "lmroute/dataset.hpp"

namespace lmroute {

// Planted dataset with a controlled difficulty mix: the number of models able
// to answer each query is drawn from the difficulty's correct-count band, the
// answering set is (mostly) the most capable models, and query texts carry
// topic tokens so hashed embeddings cluster by topic. Weak-tier models are
// priced well below strong-tier ones, mirroring the production price table's
// ordering.
struct SyntheticConfig {
    int n_queries = 1000;
    int n_models = 10;
    std::uint64_t seed = 0;
    std::array<double, 3> difficulty_mix{0.784, 0.152, 0.064};  // EASY, MEDIUM, HARD
    int embedding_dim = 256;
    int l_max = 1024;
    int concurrency_limit = 4;
    int topics_per_difficulty = 8;
    double label_noise = 0.2;  // probability of swapping one answering model per query

    void validate() const;
};

Dataset gen_synthetic(const SyntheticConfig& config);

}  // namespace lmroute
