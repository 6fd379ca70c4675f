#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "lmroute/dataset.hpp"
#include "lmroute/embedding.hpp"
#include "lmroute/rng.hpp"

namespace testutil {

// The ten production models and their published per-million-token prices.
struct PriceRow {
    const char* id;
    double price_in;
    double price_out;
    lmroute::Tier tier;
};

inline const std::vector<PriceRow>& price_table() {
    static const std::vector<PriceRow> rows = {
        {"qwen-2.5-7b-instruct", 0.267, 0.267, lmroute::Tier::WEAK},
        {"qwen-2.5-14b-instruct", 0.534, 0.534, lmroute::Tier::WEAK},
        {"qwen-2.5-32b-instruct", 1.22, 1.22, lmroute::Tier::WEAK},
        {"qwen-2.5-72b-instruct", 2.745, 2.745, lmroute::Tier::STRONG},
        {"gemma-2-9b-it", 0.343, 0.343, lmroute::Tier::WEAK},
        {"gemma-2-27b-it", 1.03, 1.03, lmroute::Tier::WEAK},
        {"gpt-4o-mini", 0.15, 0.6, lmroute::Tier::STRONG},
        {"gpt-4o", 2.5, 10.0, lmroute::Tier::STRONG},
        {"gemini-1.5-flash", 0.075, 0.3, lmroute::Tier::STRONG},
        {"claude-3-5-sonnet", 3.0, 15.0, lmroute::Tier::STRONG},
    };
    return rows;
}

inline lmroute::ModelSpec make_model(const std::string& id, double price_in, double price_out,
                                     lmroute::Tier tier, int dim = 16, int concurrency = 4) {
    lmroute::ModelSpec m;
    m.id = id;
    m.name = id;
    m.description = "model " + id;
    m.embedding = lmroute::HashedEmbedder(dim).embed(m.description);
    m.price_in_per_token = lmroute::token_price_from_dollars_per_million(price_in);
    m.price_out_per_token = lmroute::token_price_from_dollars_per_million(price_out);
    m.tier = tier;
    m.concurrency_limit = concurrency;
    return m;
}

inline std::vector<lmroute::ModelSpec> price_table_models(int dim = 16) {
    std::vector<lmroute::ModelSpec> models;
    for (const auto& row : price_table())
        models.push_back(make_model(row.id, row.price_in, row.price_out, row.tier, dim));
    return models;
}

// Dataset with `correct_of_10`-style control: each query's answering set is the
// last `correct` models in manifest order.
inline lmroute::Dataset make_dataset(int n_queries, const std::vector<lmroute::ModelSpec>& models,
                                     const std::vector<int>& correct_counts, int dim = 16,
                                     lmroute::Source source = lmroute::Source::SYNTHETIC) {
    lmroute::Dataset ds;
    ds.models = models;
    ds.embedding_dim = dim;
    lmroute::HashedEmbedder embedder(dim);
    lmroute::Rng rng(7);
    for (int i = 0; i < n_queries; ++i) {
        lmroute::QueryRecord q;
        q.id = "q" + std::to_string(i);
        q.text = "question number " + std::to_string(i) + " about topic " + std::to_string(i % 5);
        q.source = source;
        q.embedding = embedder.embed(q.text);
        q.in_tokens = 30 + (i % 50);
        const int correct = correct_counts[static_cast<std::size_t>(i) % correct_counts.size()];
        const int m = static_cast<int>(models.size());
        for (int j = 0; j < m; ++j) {
            q.correctness[models[static_cast<std::size_t>(j)].id] = j >= m - correct ? 1 : 0;
            q.out_tokens[models[static_cast<std::size_t>(j)].id] =
                static_cast<int>(lmroute::next_int_in(rng, 10, 400));
        }
        ds.queries.push_back(std::move(q));
    }
    ds.validate();
    return ds;
}

// Scratch directory under the build tree, wiped at construction.
class TempDir {
public:
    explicit TempDir(const std::string& name)
        : path_(std::filesystem::current_path() / "test_tmp" / name) {
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    std::string file(const std::string& name) const { return (path_ / name).string(); }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return content;
}

}  // namespace testutil
