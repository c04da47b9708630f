#pragma once

// Shared fixtures for the test suites.

#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "selfgoal/backend.hpp"
#include "selfgoal/embedding.hpp"

namespace selfgoal::testing {

/// Embedding fixture assigning orthogonal basis vectors to known texts, so
/// any two distinct known texts have cosine 0 and identical texts cosine 1.
inline FixtureEmbedding orthogonal_embedding(const std::vector<std::string>& texts, int dim = 0) {
    const int d = dim > 0 ? dim : static_cast<int>(texts.size());
    FixtureEmbedding emb;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        std::vector<double> v(static_cast<std::size_t>(d), 0.0);
        v[i % static_cast<std::size_t>(d)] = 1.0;
        emb.set(texts[i], v);
    }
    return emb;
}

/// Unit vector at a prescribed cosine to the first basis direction, using a
/// private orthogonal component so two such vectors built with distinct
/// `axis` values have pairwise cosine c1*c2.
inline std::vector<double> vector_with_cosine(double c, std::size_t axis, std::size_t dim) {
    std::vector<double> v(dim, 0.0);
    v[0] = c;
    v[axis] = std::sqrt(1.0 - c * c);
    return v;
}

}  // namespace selfgoal::testing
