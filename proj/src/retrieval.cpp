#include "ssp/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "ssp/errors.hpp"

namespace ssp {

double euclidean_distance(const FeatureVector& a, const FeatureVector& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("euclidean_distance: dimension mismatch");
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return std::sqrt(s);
}

DistMatrix distance_matrix(const std::vector<FeatureVector>& queries,
                           const std::vector<FeatureVector>& gallery) {
  DistMatrix m(static_cast<int>(queries.size()), static_cast<int>(gallery.size()));
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j)
      m.at(i, j) = euclidean_distance(queries[i], gallery[j]);
  return m;
}

namespace {

RankedList rank_with_row(const GalleryEntry& query,
                         const std::vector<GalleryEntry>& gallery,
                         const std::vector<double>& row, Protocol protocol) {
  std::vector<int> keep;
  keep.reserve(gallery.size());
  for (int j = 0; j < static_cast<int>(gallery.size()); ++j) {
    if (protocol == Protocol::market &&
        gallery[j].person_id == query.person_id &&
        gallery[j].camera_id == query.camera_id)
      continue;
    keep.push_back(j);
  }
  if (keep.empty())
    throw protocol_error("rank: protocol filter removed the whole gallery");

  std::sort(keep.begin(), keep.end(), [&](int a, int b) {
    if (row[a] != row[b]) return row[a] < row[b];
    return a < b;
  });

  RankedList list;
  list.query_id = query.person_id;
  list.entries = std::move(keep);
  list.relevance.resize(list.entries.size());
  list.distances.resize(list.entries.size());
  for (size_t k = 0; k < list.entries.size(); ++k) {
    int j = list.entries[k];
    list.relevance[k] = gallery[j].person_id == query.person_id ? 1 : 0;
    list.distances[k] = row[j];
  }
  return list;
}

EvalReport evaluate_rows(const std::vector<GalleryEntry>& queries,
                         const std::vector<GalleryEntry>& gallery,
                         const std::function<std::vector<double>(int)>& row_of,
                         Protocol protocol, int max_rank) {
  if (queries.empty()) throw protocol_error("evaluate: no queries");
  if (gallery.empty()) throw protocol_error("evaluate: empty gallery");
  if (max_rank < 1) throw std::invalid_argument("evaluate: max_rank must be >= 1");

  EvalReport report;
  report.cmc.assign(max_rank, 0.0);
  double ap_sum = 0.0;

  for (size_t q = 0; q < queries.size(); ++q) {
    RankedList list;
    try {
      list = rank_with_row(queries[q], gallery, row_of(static_cast<int>(q)),
                           protocol);
    } catch (const protocol_error&) {
      // Filter emptied the gallery: nothing relevant remains for this query.
      ++report.skipped_queries;
      continue;
    }
    int first_hit = -1;
    for (size_t k = 0; k < list.relevance.size(); ++k)
      if (list.relevance[k]) {
        first_hit = static_cast<int>(k);
        break;
      }
    if (first_hit < 0) {
      ++report.skipped_queries;
      continue;
    }
    ++report.evaluated_queries;
    ap_sum += average_precision(list);
    for (int r = first_hit; r < max_rank; ++r) report.cmc[r] += 1.0;
  }

  if (report.evaluated_queries == 0)
    throw protocol_error("evaluate: no query has a relevant gallery entry");
  report.map = ap_sum / report.evaluated_queries;
  for (auto& v : report.cmc) v /= report.evaluated_queries;
  return report;
}

}  // namespace

RankedList rank(const GalleryEntry& query,
                const std::vector<GalleryEntry>& gallery, Protocol protocol) {
  if (gallery.empty()) throw protocol_error("rank: empty gallery");
  std::vector<double> row(gallery.size());
  for (size_t j = 0; j < gallery.size(); ++j)
    row[j] = euclidean_distance(query.feature, gallery[j].feature);
  return rank_with_row(query, gallery, row, protocol);
}

double average_precision(const RankedList& list) {
  int relevant = 0;
  double sum = 0.0;
  for (size_t k = 0; k < list.relevance.size(); ++k) {
    if (!list.relevance[k]) continue;
    ++relevant;
    sum += static_cast<double>(relevant) / static_cast<double>(k + 1);
  }
  if (relevant == 0)
    throw protocol_error("average_precision: no relevant entries in list");
  return sum / relevant;
}

EvalReport evaluate(const std::vector<GalleryEntry>& queries,
                    const std::vector<GalleryEntry>& gallery,
                    Protocol protocol, int max_rank) {
  return evaluate_rows(
      queries, gallery,
      [&](int q) {
        std::vector<double> row(gallery.size());
        for (size_t j = 0; j < gallery.size(); ++j)
          row[j] = euclidean_distance(queries[q].feature, gallery[j].feature);
        return row;
      },
      protocol, max_rank);
}

EvalReport evaluate_with_distances(const std::vector<GalleryEntry>& queries,
                                   const std::vector<GalleryEntry>& gallery,
                                   const DistMatrix& dist, Protocol protocol,
                                   int max_rank) {
  if (dist.rows != static_cast<int>(queries.size()) ||
      dist.cols != static_cast<int>(gallery.size()))
    throw std::invalid_argument("evaluate_with_distances: matrix shape mismatch");
  return evaluate_rows(
      queries, gallery,
      [&](int q) {
        return std::vector<double>(
            dist.values.begin() + static_cast<size_t>(q) * dist.cols,
            dist.values.begin() + static_cast<size_t>(q + 1) * dist.cols);
      },
      protocol, max_rank);
}

}  // namespace ssp
