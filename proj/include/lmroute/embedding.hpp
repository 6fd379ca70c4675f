#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

namespace lmroute {

enum class EmbedderKind { HASHED, PRECOMPUTED };

EmbedderKind parse_embedder_kind(const std::string& name);

// L2-normalize in place. An all-zero vector gets a deterministic unit fallback
// (first coordinate set to 1) so downstream cosine math never divides by zero.
void l2_normalize(std::vector<double>& v);

double l2_norm(const std::vector<double>& v);
double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

// Maps a text (for HASHED) or an id (for PRECOMPUTED) to a unit-norm vector of
// fixed dimension.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::vector<double> embed(const std::string& key) const = 0;
    virtual int dim() const = 0;
};

// Deterministic feature-hashing embedder: word n-grams (n = 1..3) of the
// lowercased text are hashed into signed buckets, then L2-normalized. Pure:
// the same text always yields the same vector, on every platform.
class HashedEmbedder : public EmbeddingProvider {
public:
    explicit HashedEmbedder(int dim = 256);
    std::vector<double> embed(const std::string& text) const override;
    int dim() const override { return dim_; }

private:
    int dim_;
};

// Lookup table keyed by record id, loaded from a sidecar file of line-delimited
// {"id": ..., "embedding": [...]} records. A miss is a LookupError naming the id.
class PrecomputedEmbedder : public EmbeddingProvider {
public:
    PrecomputedEmbedder(std::unordered_map<std::string, std::vector<double>> table, int dim);
    static PrecomputedEmbedder load(const std::string& path, int expected_dim);

    std::vector<double> embed(const std::string& id) const override;
    int dim() const override { return dim_; }
    bool contains(const std::string& id) const { return table_.count(id) > 0; }

private:
    std::unordered_map<std::string, std::vector<double>> table_;
    int dim_;
};

std::unique_ptr<EmbeddingProvider> make_embedder(EmbedderKind kind, int dim,
                                                 const std::string& sidecar_path);

}  // namespace lmroute
