#include "ssp/rerank.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ssp/errors.hpp"

namespace ssp {

RerankConfig clamp_rerank_config(RerankConfig cfg, int num_queries,
                                 int num_gallery) {
  if (cfg.k1 < 1 || cfg.k2 < 1)
    throw std::invalid_argument("rerank: k1 and k2 must be >= 1");
  if (cfg.k2 > cfg.k1) throw std::invalid_argument("rerank: k2 must be <= k1");
  if (!(cfg.lambda >= 0.0 && cfg.lambda <= 1.0))
    throw std::invalid_argument("rerank: lambda outside [0,1]");
  if (num_gallery <= cfg.k2)
    throw std::invalid_argument("rerank: gallery size " +
                                std::to_string(num_gallery) +
                                " too small for k2=" + std::to_string(cfg.k2));
  int total = num_queries + num_gallery;
  if (cfg.k1 + 1 > total) cfg.k1 = total - 1;
  if (cfg.k2 > cfg.k1) cfg.k2 = cfg.k1;
  return cfg;
}

namespace {

// Neighborhood j of i such that i is also a top-k neighbor of j.
std::vector<int> k_reciprocal(const std::vector<std::vector<int>>& initial_rank,
                              int i, int k) {
  std::vector<int> out;
  for (int pos = 0; pos <= k; ++pos) {
    int j = initial_rank[i][pos];
    for (int back = 0; back <= k; ++back) {
      if (initial_rank[j][back] == i) {
        out.push_back(j);
        break;
      }
    }
  }
  return out;
}

}  // namespace

DistMatrix rerank(const std::vector<FeatureVector>& q_features,
                  const std::vector<FeatureVector>& g_features,
                  const RerankConfig& cfg_in) {
  const int nq = static_cast<int>(q_features.size());
  const int ng = static_cast<int>(g_features.size());
  if (nq == 0 || ng == 0) throw std::invalid_argument("rerank: empty input");
  RerankConfig cfg = clamp_rerank_config(cfg_in, nq, ng);
  const int n = nq + ng;

  std::vector<const FeatureVector*> all;
  all.reserve(n);
  for (const auto& f : q_features) all.push_back(&f);
  for (const auto& f : g_features) all.push_back(&f);
  const size_t dim = all[0]->size();
  for (const auto* f : all)
    if (f->size() != dim)
      throw std::invalid_argument("rerank: feature dimension mismatch");

  // Squared distances over the probe+gallery union, each row scaled by its
  // own maximum.
  std::vector<double> orig(static_cast<size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (size_t k = 0; k < dim; ++k) {
        double d = static_cast<double>((*all[i])[k]) -
                   static_cast<double>((*all[j])[k]);
        s += d * d;
      }
      orig[static_cast<size_t>(i) * n + j] = s;
      orig[static_cast<size_t>(j) * n + i] = s;
    }
  for (int i = 0; i < n; ++i) {
    double mx = 0.0;
    for (int j = 0; j < n; ++j) mx = std::max(mx, orig[static_cast<size_t>(i) * n + j]);
    if (mx > 0.0)
      for (int j = 0; j < n; ++j) orig[static_cast<size_t>(i) * n + j] /= mx;
  }

  std::vector<std::vector<int>> initial_rank(n, std::vector<int>(n));
  for (int i = 0; i < n; ++i) {
    auto& row = initial_rank[i];
    std::iota(row.begin(), row.end(), 0);
    const double* d = &orig[static_cast<size_t>(i) * n];
    std::sort(row.begin(), row.end(), [&](int a, int b) {
      if (d[a] != d[b]) return d[a] < d[b];
      return a < b;
    });
  }

  // Gaussian-weighted membership over the expanded reciprocal sets.
  std::vector<double> V(static_cast<size_t>(n) * n, 0.0);
  const int half_k1 = static_cast<int>(std::nearbyint(cfg.k1 / 2.0));
  for (int i = 0; i < n; ++i) {
    std::vector<int> expansion = k_reciprocal(initial_rank, i, cfg.k1);
    const std::vector<int> base = expansion;
    for (int candidate : base) {
      std::vector<int> cand_set = k_reciprocal(initial_rank, candidate, half_k1);
      int overlap = 0;
      for (int x : cand_set)
        if (std::find(base.begin(), base.end(), x) != base.end()) ++overlap;
      if (3 * overlap > 2 * static_cast<int>(cand_set.size()))
        expansion.insert(expansion.end(), cand_set.begin(), cand_set.end());
    }
    std::sort(expansion.begin(), expansion.end());
    expansion.erase(std::unique(expansion.begin(), expansion.end()),
                    expansion.end());

    double sum = 0.0;
    for (int j : expansion) sum += std::exp(-orig[static_cast<size_t>(i) * n + j]);
    for (int j : expansion)
      V[static_cast<size_t>(i) * n + j] =
          std::exp(-orig[static_cast<size_t>(i) * n + j]) / sum;
  }

  // Local query expansion: average membership over the k2 nearest rows.
  if (cfg.k2 > 1) {
    std::vector<double> Vq(static_cast<size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) {
      for (int p = 0; p < cfg.k2; ++p) {
        int j = initial_rank[i][p];
        const double* src = &V[static_cast<size_t>(j) * n];
        double* dst = &Vq[static_cast<size_t>(i) * n];
        for (int k = 0; k < n; ++k) dst[k] += src[k];
      }
      double* dst = &Vq[static_cast<size_t>(i) * n];
      for (int k = 0; k < n; ++k) dst[k] /= cfg.k2;
    }
    V.swap(Vq);
  }

  // Jaccard distance via min-sums; rows of V sum to 1, so the union term is
  // 2 - intersection.
  DistMatrix out(nq, ng);
  for (int qi = 0; qi < nq; ++qi) {
    const double* vq = &V[static_cast<size_t>(qi) * n];
    for (int gj = 0; gj < ng; ++gj) {
      const double* vg = &V[static_cast<size_t>(nq + gj) * n];
      double inter = 0.0;
      for (int k = 0; k < n; ++k) inter += std::min(vq[k], vg[k]);
      double jaccard = 1.0 - inter / (2.0 - inter);
      out.at(qi, gj) = cfg.lambda * orig[static_cast<size_t>(qi) * n + (nq + gj)] +
                       (1.0 - cfg.lambda) * jaccard;
    }
  }
  return out;
}

}  // namespace ssp
