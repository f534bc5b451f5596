#pragma once

#include <vector>

#include "ssp/retrieval.hpp"

namespace ssp {

/// k-reciprocal re-ranking parameters. lambda is the weight on the original
/// distance; 1-lambda weights the Jaccard distance.
struct RerankConfig {
  int k1 = 20;
  int k2 = 6;
  double lambda = 0.3;
};

/// Shrinks k1/k2 to what a small probe+gallery set supports. Throws
/// std::invalid_argument when the gallery is no larger than k2.
RerankConfig clamp_rerank_config(RerankConfig cfg, int num_queries,
                                 int num_gallery);

/// Re-ranked query-by-gallery distance matrix: lambda * original distance +
/// (1 - lambda) * Jaccard distance over Gaussian-weighted k-reciprocal
/// expanded neighbor sets. Pure transform of the inputs; features and any
/// downstream protocol filtering are untouched.
DistMatrix rerank(const std::vector<FeatureVector>& q_features,
                  const std::vector<FeatureVector>& g_features,
                  const RerankConfig& cfg);

}  // namespace ssp
