#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "ssp/rerank.hpp"
#include "ssp/retrieval.hpp"
#include "ssp/rng.hpp"

using namespace ssp;

namespace {

std::vector<int> argsort_row(const DistMatrix& m, int row) {
  std::vector<int> idx(m.cols);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (m.at(row, a) != m.at(row, b)) return m.at(row, a) < m.at(row, b);
    return a < b;
  });
  return idx;
}

/// Five tight identity clusters; a handful of queries per cluster plus one
/// near-duplicate wrong-identity distractor hugging query 0.
struct ClusteredInstance {
  std::vector<GalleryEntry> queries, gallery;
  std::vector<FeatureVector> qf, gf;
};

ClusteredInstance clustered_instance(uint64_t seed) {
  Rng rng(seed);
  const int ids = 5, dim = 8;
  ClusteredInstance inst;
  std::vector<FeatureVector> centers;
  for (int c = 0; c < ids; ++c) {
    FeatureVector center(dim);
    for (auto& v : center) v = static_cast<float>(4.0 * rng.normal());
    centers.push_back(center);
  }
  auto sample_around = [&](const FeatureVector& c, double s) {
    FeatureVector f(c.size());
    for (size_t k = 0; k < c.size(); ++k)
      f[k] = c[k] + static_cast<float>(s * rng.normal());
    return f;
  };
  for (int c = 0; c < ids; ++c) {
    for (int i = 0; i < 2; ++i)
      inst.queries.push_back(
          {static_cast<uint32_t>(c), 0, sample_around(centers[c], 0.4)});
    for (int i = 0; i < 6; ++i)
      inst.gallery.push_back(
          {static_cast<uint32_t>(c), 1, sample_around(centers[c], 0.4)});
  }
  // Distractor: nearly identical to query 0 but with a wrong identity, so it
  // grabs rank 1 under plain Euclidean ranking.
  FeatureVector dup = inst.queries[0].feature;
  for (auto& v : dup) v += static_cast<float>(0.01 * rng.normal());
  inst.gallery.push_back({static_cast<uint32_t>(ids + 1), 1, dup});

  for (auto& e : inst.queries) inst.qf.push_back(e.feature);
  for (auto& e : inst.gallery) inst.gf.push_back(e.feature);
  return inst;
}

}  // namespace

TEST_CASE("rerank with lambda=1 preserves the original ranking") {
  Rng rng(101);
  std::vector<FeatureVector> qf, gf;
  for (int i = 0; i < 6; ++i) {
    FeatureVector f(5);
    for (auto& v : f) v = static_cast<float>(rng.normal());
    qf.push_back(f);
  }
  for (int j = 0; j < 25; ++j) {
    FeatureVector f(5);
    for (auto& v : f) v = static_cast<float>(rng.normal());
    gf.push_back(f);
  }
  RerankConfig cfg;
  cfg.k1 = 8;
  cfg.k2 = 3;
  cfg.lambda = 1.0;
  DistMatrix reranked = rerank(qf, gf, cfg);
  DistMatrix orig = distance_matrix(qf, gf);
  for (int i = 0; i < reranked.rows; ++i)
    CHECK(argsort_row(reranked, i) == argsort_row(orig, i));
}

TEST_CASE("an exact duplicate stays rank-1 in separated clusters") {
  ClusteredInstance inst = clustered_instance(7);
  // Replace the distractor with an exact copy of gallery cluster structure:
  // query 3 duplicated into the gallery with the right identity.
  inst.gallery.back() = {inst.queries[3].person_id, 1, inst.queries[3].feature};
  inst.gf.back() = inst.queries[3].feature;
  RerankConfig cfg;
  cfg.k1 = 6;
  cfg.k2 = 2;
  DistMatrix reranked = rerank(inst.qf, inst.gf, cfg);
  auto order = argsort_row(reranked, 3);
  CHECK(order[0] == static_cast<int>(inst.gf.size()) - 1);
}

TEST_CASE("rerank demotes the near-duplicate distractor") {
  for (uint64_t seed : {1, 2, 3, 4, 5}) {
    ClusteredInstance inst = clustered_instance(seed);
    EvalReport before = evaluate(inst.queries, inst.gallery, Protocol::market, 10);
    RerankConfig cfg;
    cfg.k1 = 8;
    cfg.k2 = 3;
    cfg.lambda = 0.3;
    DistMatrix dist = rerank(inst.qf, inst.gf, cfg);
    EvalReport after =
        evaluate_with_distances(inst.queries, inst.gallery, dist, Protocol::market, 10);
    CHECK(after.map >= before.map);
  }
}

TEST_CASE("jaccard component stays in [0,1] and output is nonnegative") {
  Rng rng(103);
  std::vector<FeatureVector> qf, gf;
  for (int i = 0; i < 5; ++i) {
    FeatureVector f(4);
    for (auto& v : f) v = static_cast<float>(rng.normal());
    qf.push_back(f);
  }
  for (int j = 0; j < 20; ++j) {
    FeatureVector f(4);
    for (auto& v : f) v = static_cast<float>(rng.normal());
    gf.push_back(f);
  }
  RerankConfig jaccard_only;
  jaccard_only.k1 = 6;
  jaccard_only.k2 = 2;
  jaccard_only.lambda = 0.0;
  DistMatrix j = rerank(qf, gf, jaccard_only);
  for (double v : j.values) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }

  RerankConfig mixed;
  mixed.k1 = 6;
  mixed.k2 = 2;
  mixed.lambda = 0.3;
  for (double v : rerank(qf, gf, mixed).values) CHECK(v >= 0.0);
}

TEST_CASE("rerank is deterministic") {
  ClusteredInstance inst = clustered_instance(11);
  RerankConfig cfg;
  DistMatrix a = rerank(inst.qf, inst.gf, cfg);
  DistMatrix b = rerank(inst.qf, inst.gf, cfg);
  CHECK(a.values == b.values);
}

TEST_CASE("config validation and clamping") {
  CHECK_THROWS_AS(clamp_rerank_config({0, 1, 0.3}, 5, 50), std::invalid_argument);
  CHECK_THROWS_AS(clamp_rerank_config({4, 6, 0.3}, 5, 50), std::invalid_argument);
  CHECK_THROWS_AS(clamp_rerank_config({20, 6, 1.5}, 5, 50), std::invalid_argument);
  // Gallery no larger than k2.
  CHECK_THROWS_AS(clamp_rerank_config({20, 6, 0.3}, 5, 6), std::invalid_argument);

  // Oversized k1 shrinks to the probe+gallery population.
  RerankConfig clamped = clamp_rerank_config({200, 6, 0.3}, 5, 30);
  CHECK(clamped.k1 == 34);
  CHECK(clamped.k2 == 6);
}
