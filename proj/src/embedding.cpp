#include "lmroute/embedding.hpp"

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>

#include <json.hpp>

#include "lmroute/errors.hpp"

namespace lmroute {

namespace {

// FNV-1a, 64-bit. std::hash is implementation-defined, so we roll our own to
// keep hashed embeddings identical across toolchains.
std::uint64_t fnv1a64(const std::string& s, std::uint64_t h = 14695981039346656037ULL) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::vector<std::string> tokenize_words(const std::string& text) {
    std::vector<std::string> words;
    std::string current;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            words.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) words.push_back(std::move(current));
    return words;
}

}  // namespace

EmbedderKind parse_embedder_kind(const std::string& name) {
    if (name == "hashed") return EmbedderKind::HASHED;
    if (name == "precomputed") return EmbedderKind::PRECOMPUTED;
    throw ArgumentError("unknown embedder kind: '" + name + "' (expected hashed|precomputed)");
}

double l2_norm(const std::vector<double>& v) {
    double sq = 0.0;
    for (double x : v) sq += x * x;
    return std::sqrt(sq);
}

void l2_normalize(std::vector<double>& v) {
    const double norm = l2_norm(v);
    if (norm == 0.0) {
        if (!v.empty()) v[0] = 1.0;
        return;
    }
    // Skip the division when the vector is already unit-norm to the working
    // precision; this keeps save/load round trips bit-exact.
    if (std::abs(norm - 1.0) <= 1e-9) return;
    for (double& x : v) x /= norm;
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size())
        throw ArgumentError("cosine_similarity: dimension mismatch (" +
                            std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

HashedEmbedder::HashedEmbedder(int dim) : dim_(dim) {
    if (dim <= 0) throw ArgumentError("embedding dimension must be positive");
}

std::vector<double> HashedEmbedder::embed(const std::string& text) const {
    std::vector<double> v(static_cast<std::size_t>(dim_), 0.0);
    const std::vector<std::string> words = tokenize_words(text);
    for (std::size_t n = 1; n <= 3; ++n) {
        if (words.size() < n) break;
        for (std::size_t i = 0; i + n <= words.size(); ++i) {
            std::uint64_t h = fnv1a64(std::to_string(n));
            for (std::size_t k = 0; k < n; ++k) h = fnv1a64(words[i + k], fnv1a64("|", h));
            const std::size_t bucket = static_cast<std::size_t>(h % static_cast<std::uint64_t>(dim_));
            const double sign = ((h >> 32) & 1ULL) ? 1.0 : -1.0;
            v[bucket] += sign;
        }
    }
    l2_normalize(v);
    return v;
}

PrecomputedEmbedder::PrecomputedEmbedder(std::unordered_map<std::string, std::vector<double>> table,
                                         int dim)
    : table_(std::move(table)), dim_(dim) {}

PrecomputedEmbedder PrecomputedEmbedder::load(const std::string& path, int expected_dim) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open embeddings file: " + path);

    std::unordered_map<std::string, std::vector<double>> table;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json rec = nlohmann::json::parse(line, nullptr, false);
        if (rec.is_discarded())
            throw ParseError(path + ":" + std::to_string(line_no) + ": invalid JSON");
        if (!rec.contains("id") || !rec.contains("embedding"))
            throw SchemaError(path + ":" + std::to_string(line_no) +
                              ": embedding record needs 'id' and 'embedding'");
        std::vector<double> v = rec["embedding"].get<std::vector<double>>();
        if (expected_dim > 0 && static_cast<int>(v.size()) != expected_dim)
            throw SchemaError(path + ":" + std::to_string(line_no) + ": embedding dimension " +
                              std::to_string(v.size()) + " != expected " +
                              std::to_string(expected_dim));
        l2_normalize(v);
        table[rec["id"].get<std::string>()] = std::move(v);
    }
    return PrecomputedEmbedder(std::move(table), expected_dim);
}

std::vector<double> PrecomputedEmbedder::embed(const std::string& id) const {
    auto it = table_.find(id);
    if (it == table_.end())
        throw LookupError("no precomputed embedding for id '" + id + "'");
    return it->second;
}

std::unique_ptr<EmbeddingProvider> make_embedder(EmbedderKind kind, int dim,
                                                 const std::string& sidecar_path) {
    if (kind == EmbedderKind::HASHED) return std::make_unique<HashedEmbedder>(dim);
    if (sidecar_path.empty())
        throw ArgumentError("precomputed embedder requires an embeddings sidecar file");
    return std::make_unique<PrecomputedEmbedder>(PrecomputedEmbedder::load(sidecar_path, dim));
}

}  // namespace lmroute
