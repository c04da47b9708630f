#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

namespace selfgoal {

/// Maps text to a fixed-dimension real vector. Implementations must be
/// deterministic: the same text always yields the same vector, and vectors
/// for nonempty text have finite entries and nonzero norm.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::vector<double> embed(const std::string& text) const = 0;
};

/// dot(u,v) / (|u||v|). Throws std::invalid_argument on dimension mismatch
/// or a zero-norm input.
double cosine_similarity(std::span<const double> u, std::span<const double> v);

/// Deterministic pseudo-embedding derived from a hash of the text. Distinct
/// texts land in near-random directions; identical texts coincide exactly.
/// Good enough to drive the similarity filter in scripted runs where no
/// embedding endpoint exists.
class HashedEmbedding : public EmbeddingProvider {
public:
    explicit HashedEmbedding(int dim = 16);
    std::vector<double> embed(const std::string& text) const override;

private:
    int dim_;
};

/// Table of hand-chosen vectors for tests. Unknown text either falls back to
/// a HashedEmbedding (when permitted) or throws, which catches fixture drift.
class FixtureEmbedding : public EmbeddingProvider {
public:
    explicit FixtureEmbedding(bool hashed_fallback = false, int fallback_dim = 16);
    void set(std::string text, std::vector<double> vec);
    std::vector<double> embed(const std::string& text) const override;

private:
    std::map<std::string, std::vector<double>> table_;
    bool hashed_fallback_;
    HashedEmbedding fallback_;
};

}  // namespace selfgoal
