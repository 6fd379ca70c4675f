#include "lmroute/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lmroute/embedding.hpp"
#include "lmroute/errors.hpp"
#include "lmroute/rng.hpp"

namespace lmroute {

namespace {

// Correct-count band for a difficulty, matching the label brackets.
std::pair<int, int> count_band(Difficulty d, int m) {
    const int easy_lo = (4 * m + 4) / 5;  // ceil(0.8 m)
    const int medium_lo = (2 * m + 4) / 5;  // ceil(0.4 m)
    switch (d) {
        case Difficulty::EASY: return {easy_lo, m};
        case Difficulty::MEDIUM: return {medium_lo, easy_lo - 1};
        case Difficulty::HARD: return {0, medium_lo - 1};
    }
    return {0, 0};
}

// Largest-remainder apportionment of n into 3 difficulty counts.
std::array<int, 3> apportion(int n, const std::array<double, 3>& mix) {
    std::array<int, 3> counts{};
    std::array<double, 3> remainders{};
    int assigned = 0;
    for (int d = 0; d < 3; ++d) {
        const double exact = mix[static_cast<std::size_t>(d)] * n;
        counts[static_cast<std::size_t>(d)] = static_cast<int>(std::floor(exact));
        remainders[static_cast<std::size_t>(d)] = exact - std::floor(exact);
        assigned += counts[static_cast<std::size_t>(d)];
    }
    while (assigned < n) {
        int best = 0;
        for (int d = 1; d < 3; ++d)
            if (remainders[static_cast<std::size_t>(d)] > remainders[static_cast<std::size_t>(best)])
                best = d;
        ++counts[static_cast<std::size_t>(best)];
        remainders[static_cast<std::size_t>(best)] = -1.0;
        assigned += 1;
    }
    return counts;
}

double round3(double x) { return std::round(x * 1000.0) / 1000.0; }

}  // namespace

void SyntheticConfig::validate() const {
    if (n_queries < 0) throw ArgumentError("n_queries must be non-negative");
    if (n_models < 2) throw ArgumentError("n_models must be >= 2");
    double mix_sum = 0.0;
    for (double v : difficulty_mix) {
        if (v < 0.0) throw ArgumentError("difficulty mix entries must be non-negative");
        mix_sum += v;
    }
    if (std::abs(mix_sum - 1.0) > 1e-6) throw ArgumentError("difficulty mix must sum to 1");
    if (embedding_dim <= 0 || l_max <= 0 || concurrency_limit < 1 || topics_per_difficulty < 1)
        throw ArgumentError("invalid synthetic config");
    if (label_noise < 0.0 || label_noise > 1.0)
        throw ArgumentError("label_noise must lie in [0, 1]");
}

Dataset gen_synthetic(const SyntheticConfig& config) {
    config.validate();
    Rng rng(config.seed);
    HashedEmbedder embedder(config.embedding_dim);

    Dataset ds;
    ds.l_max = config.l_max;
    ds.embedding_dim = config.embedding_dim;

    // Models: the weaker half is cheap with symmetric prices, the stronger half
    // is expensive with output tokens priced 4x input. Model index doubles as a
    // skill rank (higher index answers harder queries).
    const int m = config.n_models;
    const int n_weak = (m + 1) / 2;
    for (int j = 0; j < m; ++j) {
        ModelSpec spec;
        const bool weak = j < n_weak;
        spec.id = (weak ? "weak-" : "strong-") + std::to_string(weak ? j : j - n_weak);
        spec.name = spec.id;
        spec.tier = weak ? Tier::WEAK : Tier::STRONG;
        spec.concurrency_limit = config.concurrency_limit;
        if (weak) {
            const double t = n_weak > 1 ? static_cast<double>(j) / (n_weak - 1) : 0.0;
            const double price = round3(0.25 + t * 1.0);  // 0.25 .. 1.25 $/Mtok
            spec.price_in_per_token = token_price_from_dollars_per_million(price);
            spec.price_out_per_token = spec.price_in_per_token;
            spec.description = "compact instruct model, snappy and budget friendly, rank " +
                               std::to_string(j);
        } else {
            const int r = j - n_weak;
            const int n_strong = m - n_weak;
            const double t = n_strong > 1 ? static_cast<double>(r) / (n_strong - 1) : 0.0;
            const double price_in = round3(2.5 + t * 2.5);  // 2.5 .. 5.0 $/Mtok
            spec.price_in_per_token = token_price_from_dollars_per_million(price_in);
            spec.price_out_per_token = token_price_from_dollars_per_million(round3(price_in * 4.0));
            spec.description = "frontier scale reasoning model, deliberate and thorough, rank " +
                               std::to_string(j);
        }
        spec.embedding = embedder.embed(spec.description);
        ds.models.push_back(std::move(spec));
    }

    // Difficulty sequence with exact planted counts, shuffled.
    const std::array<int, 3> counts = apportion(config.n_queries, config.difficulty_mix);
    std::vector<Difficulty> difficulty;
    difficulty.reserve(static_cast<std::size_t>(config.n_queries));
    for (int d = 0; d < 3; ++d)
        for (int k = 0; k < counts[static_cast<std::size_t>(d)]; ++k)
            difficulty.push_back(static_cast<Difficulty>(d));
    shuffle_seeded(difficulty, rng);

    // Per (difficulty, topic): a correct-count drawn from the difficulty band.
    // Queries of a topic share that count, so retrieval neighbors agree.
    std::vector<std::vector<int>> topic_counts(3);
    for (int d = 0; d < 3; ++d) {
        const auto [lo, hi] = count_band(static_cast<Difficulty>(d), m);
        for (int t = 0; t < config.topics_per_difficulty; ++t)
            topic_counts[static_cast<std::size_t>(d)].push_back(
                static_cast<int>(next_int_in(rng, lo, hi)));
    }

    const char* difficulty_word[3] = {"orchard", "glacier", "labyrinth"};
    for (int i = 0; i < config.n_queries; ++i) {
        QueryRecord q;
        q.id = "syn-" + std::to_string(i);
        q.source = Source::SYNTHETIC;
        const int d = static_cast<int>(difficulty[static_cast<std::size_t>(i)]);
        const int topic = static_cast<int>(next_below(
            rng, static_cast<std::uint64_t>(config.topics_per_difficulty)));

        // Topic vocabulary dominates the text so hashed embeddings cluster.
        std::string text = std::string(difficulty_word[d]);
        for (int w = 0; w < 5; ++w)
            text += " t" + std::to_string(d) + "x" + std::to_string(topic) + "w" + std::to_string(w);
        text += " q" + std::to_string(i % 17);
        q.text = text;
        q.embedding = embedder.embed(q.text);
        q.in_tokens = static_cast<int>(next_int_in(rng, 20, 200));

        // The c most skilled models answer; occasionally one answering slot is
        // swapped for a weaker model to keep labels noisy but count-preserving.
        const int c = topic_counts[static_cast<std::size_t>(d)][static_cast<std::size_t>(topic)];
        std::vector<int> correct(static_cast<std::size_t>(m), 0);
        for (int j = m - c; j < m; ++j) correct[static_cast<std::size_t>(j)] = 1;
        if (c > 0 && c < m && next_unit(rng) < config.label_noise) {
            const int in_set = m - 1 - static_cast<int>(next_below(rng, static_cast<std::uint64_t>(c)));
            const int out_set = static_cast<int>(next_below(rng, static_cast<std::uint64_t>(m - c)));
            correct[static_cast<std::size_t>(in_set)] = 0;
            correct[static_cast<std::size_t>(out_set)] = 1;
        }

        static const int base_lo[3] = {40, 150, 300};
        static const int base_hi[3] = {200, 500, 900};
        const double base = static_cast<double>(next_int_in(rng, base_lo[d], base_hi[d]));
        for (int j = 0; j < m; ++j) {
            const ModelSpec& model = ds.models[static_cast<std::size_t>(j)];
            const double factor = (model.tier == Tier::STRONG ? 1.2 : 1.0) * next_in(rng, 0.8, 1.2);
            const int tokens = std::clamp(static_cast<int>(std::llround(base * factor)), 1,
                                          config.l_max);
            q.correctness[model.id] = correct[static_cast<std::size_t>(j)];
            q.out_tokens[model.id] = tokens;
        }
        ds.queries.push_back(std::move(q));
    }

    ds.validate();
    return ds;
}

}  // namespace lmroute
