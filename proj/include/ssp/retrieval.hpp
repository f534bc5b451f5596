#pragma once

#include <cstdint>
#include <vector>

#include "ssp/tensor.hpp"

namespace ssp {

struct GalleryEntry {
  uint32_t person_id = 0;
  uint16_t camera_id = 0;
  FeatureVector feature;
};

enum class Protocol {
  market,  // drop gallery entries sharing both person and camera with the query
  none,
};

/// Gallery indices ordered by ascending distance to the query, ties broken by
/// ascending gallery index. relevance[k] = 1 iff entries[k] has the query's id.
struct RankedList {
  uint32_t query_id = 0;
  std::vector<int> entries;
  std::vector<uint8_t> relevance;
  std::vector<double> distances;
};

struct EvalReport {
  double map = 0.0;
  std::vector<double> cmc;   // cmc[r-1] = CMC(r), non-decreasing
  int evaluated_queries = 0;
  int skipped_queries = 0;   // queries with no relevant entry after filtering

  double rank1() const { return cmc.empty() ? 0.0 : cmc[0]; }
};

/// Dense row-major matrix of distances.
struct DistMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;

  DistMatrix() = default;
  DistMatrix(int r, int c)
      : rows(r), cols(c), values(static_cast<size_t>(r) * c, 0.0) {}
  double& at(int i, int j) { return values[static_cast<size_t>(i) * cols + j]; }
  double at(int i, int j) const {
    return values[static_cast<size_t>(i) * cols + j];
  }
};

double euclidean_distance(const FeatureVector& a, const FeatureVector& b);

/// Pairwise Euclidean distances, queries along rows.
DistMatrix distance_matrix(const std::vector<FeatureVector>& queries,
                           const std::vector<FeatureVector>& gallery);

RankedList rank(const GalleryEntry& query,
                const std::vector<GalleryEntry>& gallery, Protocol protocol);

/// AP over the full list length; throws protocol_error when the list holds no
/// relevant entry.
double average_precision(const RankedList& list);

/// mAP and CMC over all queries. Queries that retain no relevant gallery
/// entry after protocol filtering are excluded from both denominators and
/// reported in skipped_queries.
EvalReport evaluate(const std::vector<GalleryEntry>& queries,
                    const std::vector<GalleryEntry>& gallery,
                    Protocol protocol, int max_rank = 50);

/// Same metrics, but ranking by the rows of a precomputed distance matrix
/// (as produced by rerank) instead of feature-space distances.
EvalReport evaluate_with_distances(const std::vector<GalleryEntry>& queries,
                                   const std::vector<GalleryEntry>& gallery,
                                   const DistMatrix& dist, Protocol protocol,
                                   int max_rank = 50);

}  // namespace ssp
