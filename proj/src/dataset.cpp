#include "lmroute/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "lmroute/errors.hpp"
#include "lmroute/rng.hpp"

namespace lmroute {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

Source parse_source(const std::string& name) {
    if (name == "MMLU") return Source::MMLU;
    if (name == "GPQA") return Source::GPQA;
    if (name == "MATH500") return Source::MATH500;
    if (name == "GSM8K") return Source::GSM8K;
    if (name == "SYNTHETIC") return Source::SYNTHETIC;
    throw SchemaError("unknown source: '" + name + "'");
}

std::string to_string(Source s) {
    switch (s) {
        case Source::MMLU: return "MMLU";
        case Source::GPQA: return "GPQA";
        case Source::MATH500: return "MATH500";
        case Source::GSM8K: return "GSM8K";
        case Source::SYNTHETIC: return "SYNTHETIC";
    }
    return "SYNTHETIC";
}

Tier parse_tier(const std::string& name) {
    if (name == "WEAK") return Tier::WEAK;
    if (name == "STRONG") return Tier::STRONG;
    throw SchemaError("unknown tier: '" + name + "'");
}

std::string to_string(Tier t) { return t == Tier::WEAK ? "WEAK" : "STRONG"; }

std::string to_string(Difficulty d) {
    switch (d) {
        case Difficulty::EASY: return "EASY";
        case Difficulty::MEDIUM: return "MEDIUM";
        case Difficulty::HARD: return "HARD";
    }
    return "HARD";
}

int QueryRecord::correct_count() const {
    int count = 0;
    for (const auto& [_, v] : correctness) count += v;
    return count;
}

int Dataset::model_index(const std::string& id) const {
    for (std::size_t j = 0; j < models.size(); ++j)
        if (models[j].id == id) return static_cast<int>(j);
    return -1;
}

void Dataset::validate() const {
    if (models.empty()) throw SchemaError("dataset has no models");
    if (l_max <= 0) throw SchemaError("l_max must be positive");
    if (embedding_dim <= 0) throw SchemaError("embedding_dim must be positive");

    std::vector<std::string> model_ids;
    for (const auto& m : models) {
        if (m.id.empty()) throw SchemaError("model with empty id");
        if (m.price_in_per_token < 0 || m.price_out_per_token < 0)
            throw SchemaError("model '" + m.id + "' has a negative price");
        if (m.concurrency_limit < 1)
            throw SchemaError("model '" + m.id + "' has concurrency_limit < 1");
        if (static_cast<int>(m.embedding.size()) != embedding_dim)
            throw SchemaError("model '" + m.id + "' embedding dimension mismatch");
        model_ids.push_back(m.id);
    }
    std::sort(model_ids.begin(), model_ids.end());
    if (std::adjacent_find(model_ids.begin(), model_ids.end()) != model_ids.end())
        throw SchemaError("duplicate model ids");

    std::vector<std::string> query_ids;
    for (const auto& q : queries) {
        if (q.id.empty()) throw SchemaError("query with empty id");
        if (static_cast<int>(q.embedding.size()) != embedding_dim)
            throw SchemaError("query '" + q.id + "' embedding dimension mismatch");
        const double norm = l2_norm(q.embedding);
        if (std::abs(norm - 1.0) > 1e-6)
            throw SchemaError("query '" + q.id + "' embedding is not unit norm");
        if (q.in_tokens < 0) throw SchemaError("query '" + q.id + "' has negative in_tokens");
        if (q.correctness.size() != models.size() || q.out_tokens.size() != models.size())
            throw SchemaError("query '" + q.id + "' per-model maps do not cover the model set");
        for (const auto& m : models) {
            auto c = q.correctness.find(m.id);
            auto t = q.out_tokens.find(m.id);
            if (c == q.correctness.end() || t == q.out_tokens.end())
                throw SchemaError("query '" + q.id + "' is missing model '" + m.id + "'");
            if (c->second != 0 && c->second != 1)
                throw SchemaError("query '" + q.id + "' correctness for '" + m.id +
                                  "' is not 0/1");
            if (t->second < 0 || t->second > l_max)
                throw SchemaError("query '" + q.id + "' out_tokens for '" + m.id +
                                  "' outside [0, l_max]");
        }
        query_ids.push_back(q.id);
    }
    std::sort(query_ids.begin(), query_ids.end());
    if (std::adjacent_find(query_ids.begin(), query_ids.end()) != query_ids.end())
        throw SchemaError("duplicate query ids");
}

Difficulty label_from_correct_count(int correct, int total_models) {
    if (total_models < 1) throw ArgumentError("total_models must be >= 1");
    if (correct < 0 || correct > total_models)
        throw ArgumentError("correct count " + std::to_string(correct) + " outside [0, " +
                            std::to_string(total_models) + "]");
    // EASY iff fraction >= 0.8, MEDIUM iff >= 0.4, in exact integer arithmetic.
    if (5 * correct >= 4 * total_models) return Difficulty::EASY;
    if (5 * correct >= 2 * total_models) return Difficulty::MEDIUM;
    return Difficulty::HARD;
}

Difficulty label_difficulty(const QueryRecord& record, int total_models) {
    return label_from_correct_count(record.correct_count(), total_models);
}

Money token_cost(const ModelSpec& model, std::int64_t in_tokens, std::int64_t out_tokens) {
    if (in_tokens < 0 || out_tokens < 0) throw ArgumentError("token counts must be non-negative");
    return in_tokens * model.price_in_per_token + out_tokens * model.price_out_per_token;
}

namespace {

json parse_line(const std::string& path, int line_no, const std::string& line) {
    json rec = json::parse(line, nullptr, false);
    if (rec.is_discarded())
        throw ParseError(path + ":" + std::to_string(line_no) + ": invalid JSON");
    if (!rec.is_object())
        throw ParseError(path + ":" + std::to_string(line_no) + ": record is not an object");
    return rec;
}

void require_fields(const json& rec, std::initializer_list<const char*> fields,
                    const std::string& path, int line_no) {
    for (const char* f : fields)
        if (!rec.contains(f))
            throw SchemaError(path + ":" + std::to_string(line_no) + ": missing field '" +
                              std::string(f) + "'");
}

std::map<std::string, int> parse_int_map(const json& obj, const std::string& where) {
    if (!obj.is_object()) throw SchemaError(where + ": expected an object");
    std::map<std::string, int> out;
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!it.value().is_number_integer())
            throw SchemaError(where + ": value for '" + it.key() + "' is not an integer");
        out[it.key()] = it.value().get<int>();
    }
    return out;
}

std::vector<ModelSpec> load_models(const std::string& path, const EmbeddingProvider& embedder,
                                   const PrecomputedEmbedder* sidecar) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open model manifest: " + path);

    std::vector<ModelSpec> models;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json rec = parse_line(path, line_no, line);
        require_fields(rec, {"id", "name", "description", "price_in", "price_out", "tier",
                             "concurrency_limit"},
                       path, line_no);
        ModelSpec m;
        m.id = rec["id"].get<std::string>();
        m.name = rec["name"].get<std::string>();
        m.description = rec["description"].get<std::string>();
        m.price_in_per_token = token_price_from_dollars_per_million(rec["price_in"].get<double>());
        m.price_out_per_token = token_price_from_dollars_per_million(rec["price_out"].get<double>());
        m.tier = parse_tier(rec["tier"].get<std::string>());
        m.concurrency_limit = rec["concurrency_limit"].get<int>();
        if (rec.contains("embedding")) {
            m.embedding = rec["embedding"].get<std::vector<double>>();
            l2_normalize(m.embedding);
        } else if (sidecar != nullptr && sidecar->contains(m.id)) {
            m.embedding = sidecar->embed(m.id);
        } else {
            m.embedding = embedder.embed(m.description);
        }
        models.push_back(std::move(m));
    }
    return models;
}

}  // namespace

Dataset load_dataset(const LoadOptions& options) {
    Dataset ds;
    ds.l_max = options.l_max;
    ds.embedding_dim = options.embedding_dim;

    std::string sidecar_path = options.embeddings_path;
    if (sidecar_path.empty()) {
        const std::string candidate = options.queries_path + ".emb";
        if (std::filesystem::exists(candidate)) sidecar_path = candidate;
    }

    std::unique_ptr<PrecomputedEmbedder> sidecar;
    if (!sidecar_path.empty())
        sidecar = std::make_unique<PrecomputedEmbedder>(
            PrecomputedEmbedder::load(sidecar_path, options.embedding_dim));
    if (options.embedder == EmbedderKind::PRECOMPUTED && !sidecar)
        throw ArgumentError("precomputed embedder requires an embeddings sidecar file");

    HashedEmbedder hashed(options.embedding_dim);

    ds.models = load_models(options.models_path, hashed, sidecar.get());

    std::ifstream in(options.queries_path);
    if (!in) throw ParseError("cannot open query file: " + options.queries_path);

    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json rec = parse_line(options.queries_path, line_no, line);
        require_fields(rec, {"id", "text", "source", "in_tokens", "correctness", "out_tokens"},
                       options.queries_path, line_no);
        QueryRecord q;
        q.id = rec["id"].get<std::string>();
        q.text = rec["text"].get<std::string>();
        q.source = parse_source(rec["source"].get<std::string>());
        q.in_tokens = rec["in_tokens"].get<int>();
        const std::string where = options.queries_path + ":" + std::to_string(line_no);
        q.correctness = parse_int_map(rec["correctness"], where + ": correctness");
        q.out_tokens = parse_int_map(rec["out_tokens"], where + ": out_tokens");

        if (rec.contains("embedding")) {
            q.embedding = rec["embedding"].get<std::vector<double>>();
            if (static_cast<int>(q.embedding.size()) != ds.embedding_dim)
                throw SchemaError(where + ": embedding dimension " +
                                  std::to_string(q.embedding.size()) + " != expected " +
                                  std::to_string(ds.embedding_dim));
            l2_normalize(q.embedding);
        } else if (options.embedder == EmbedderKind::PRECOMPUTED) {
            q.embedding = sidecar->embed(q.id);
        } else if (sidecar && sidecar->contains(q.id)) {
            q.embedding = sidecar->embed(q.id);
        } else {
            q.embedding = hashed.embed(q.text);
        }
        ds.queries.push_back(std::move(q));
    }

    ds.validate();
    return ds;
}

void save_dataset(const Dataset& ds, const std::string& queries_path,
                  const std::string& models_path) {
    std::ofstream mout(models_path);
    if (!mout) throw ParseError("cannot write model manifest: " + models_path);
    for (const auto& m : ds.models) {
        ordered_json rec;
        rec["id"] = m.id;
        rec["name"] = m.name;
        rec["description"] = m.description;
        rec["price_in"] = token_price_to_dollars_per_million(m.price_in_per_token);
        rec["price_out"] = token_price_to_dollars_per_million(m.price_out_per_token);
        rec["tier"] = to_string(m.tier);
        rec["concurrency_limit"] = m.concurrency_limit;
        rec["embedding"] = m.embedding;
        mout << rec.dump() << "\n";
    }

    std::ofstream qout(queries_path);
    if (!qout) throw ParseError("cannot write query file: " + queries_path);
    for (const auto& q : ds.queries) {
        ordered_json rec;
        rec["id"] = q.id;
        rec["text"] = q.text;
        rec["source"] = to_string(q.source);
        rec["in_tokens"] = q.in_tokens;
        rec["correctness"] = q.correctness;
        rec["out_tokens"] = q.out_tokens;
        rec["embedding"] = q.embedding;
        qout << rec.dump() << "\n";
    }
}

SplitResult split_train_eval(const Dataset& ds, double eval_fraction, std::uint64_t seed) {
    if (ds.queries.size() < 2) throw ArgumentError("split requires at least 2 queries");
    if (!(eval_fraction > 0.0 && eval_fraction < 1.0))
        throw ArgumentError("eval_fraction must lie in (0, 1)");

    // Group query indices by source, preserving dataset order within a group.
    std::map<Source, std::vector<std::size_t>> by_source;
    for (std::size_t i = 0; i < ds.queries.size(); ++i)
        by_source[ds.queries[i].source].push_back(i);

    std::vector<bool> in_eval(ds.queries.size(), false);
    std::size_t eval_total = 0;
    Rng rng(seed);
    for (auto& [_, indices] : by_source) {
        shuffle_seeded(indices, rng);
        const std::size_t take = static_cast<std::size_t>(
            std::llround(eval_fraction * static_cast<double>(indices.size())));
        for (std::size_t k = 0; k < take; ++k) in_eval[indices[k]] = true;
        eval_total += take;
    }
    if (eval_total == 0 || eval_total == ds.queries.size())
        throw ArgumentError("eval_fraction " + std::to_string(eval_fraction) +
                            " produces an empty split");

    SplitResult result;
    result.train.models = ds.models;
    result.train.l_max = ds.l_max;
    result.train.embedding_dim = ds.embedding_dim;
    result.eval.models = ds.models;
    result.eval.l_max = ds.l_max;
    result.eval.embedding_dim = ds.embedding_dim;
    for (std::size_t i = 0; i < ds.queries.size(); ++i)
        (in_eval[i] ? result.eval : result.train).queries.push_back(ds.queries[i]);
    return result;
}

}  // namespace lmroute
