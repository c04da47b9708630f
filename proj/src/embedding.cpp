#include "selfgoal/embedding.hpp"

#include <cmath>
#include <stdexcept>

#include "selfgoal/digest.hpp"
#include "selfgoal/errors.hpp"
#include "selfgoal/rng.hpp"

namespace selfgoal {

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size())
        throw std::invalid_argument("cosine_similarity: dimension mismatch");
    if (u.empty()) throw std::invalid_argument("cosine_similarity: empty vectors");
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    if (nu == 0.0 || nv == 0.0)
        throw std::invalid_argument("cosine_similarity: zero-norm vector");
    double c = dot / (std::sqrt(nu) * std::sqrt(nv));
    if (c > 1.0) c = 1.0;
    if (c < -1.0) c = -1.0;
    return c;
}

HashedEmbedding::HashedEmbedding(int dim) : dim_(dim) {
    if (dim < 2) throw std::invalid_argument("HashedEmbedding: dim must be >= 2");
}

std::vector<double> HashedEmbedding::embed(const std::string& text) const {
    if (text.empty()) throw std::invalid_argument("embed: empty text");
    auto h = sha256(text);
    std::uint64_t seed = 0;
    for (int i = 0; i < 8; ++i) seed = (seed << 8) | h[static_cast<std::size_t>(i)];
    Rng rng(seed);
    std::vector<double> v(static_cast<std::size_t>(dim_));
    double norm = 0.0;
    for (auto& x : v) {
        x = rng.normal();
        norm += x * x;
    }
    norm = std::sqrt(norm);
    if (norm < 1e-12) {
        v[0] = 1.0;
        return v;
    }
    for (auto& x : v) x /= norm;
    return v;
}

FixtureEmbedding::FixtureEmbedding(bool hashed_fallback, int fallback_dim)
    : hashed_fallback_(hashed_fallback), fallback_(fallback_dim) {}

void FixtureEmbedding::set(std::string text, std::vector<double> vec) {
    table_[std::move(text)] = std::move(vec);
}

std::vector<double> FixtureEmbedding::embed(const std::string& text) const {
    if (text.empty()) throw std::invalid_argument("embed: empty text");
    auto it = table_.find(text);
    if (it != table_.end()) return it->second;
    if (hashed_fallback_) return fallback_.embed(text);
    throw NotFoundError("FixtureEmbedding: no vector for text: " + text);
}

}  // namespace selfgoal
