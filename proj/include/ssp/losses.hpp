#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace ssp {

/// Smoothed one-hot target: the true class gets (1-eps) + eps/K, every other
/// class gets eps/K.
template <typename T>
std::vector<T> lsr_target(int true_class, int num_classes, T epsilon) {
  if (num_classes < 1) throw std::invalid_argument("lsr_target: K must be >= 1");
  if (true_class < 0 || true_class >= num_classes)
    throw std::invalid_argument("lsr_target: class index " +
                                std::to_string(true_class) + " out of range");
  if (!(epsilon >= T(0) && epsilon <= T(1)))
    throw std::invalid_argument("lsr_target: epsilon outside [0,1]");
  std::vector<T> q(num_classes, epsilon / static_cast<T>(num_classes));
  q[true_class] += T(1) - epsilon;
  return q;
}

/// Shifted softmax; the max subtraction cancels analytically and only guards
/// against overflow.
template <typename T>
std::vector<T> softmax(const std::vector<T>& logits) {
  if (logits.empty()) throw std::invalid_argument("softmax: empty logits");
  T mx = *std::max_element(logits.begin(), logits.end());
  std::vector<T> p(logits.size());
  double sum = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    double e = std::exp(static_cast<double>(logits[i] - mx));
    p[i] = static_cast<T>(e);
    sum += e;
  }
  for (auto& v : p) v = static_cast<T>(static_cast<double>(v) / sum);
  return p;
}

template <typename T>
struct CrossEntropyResult {
  T loss;
  std::vector<T> grad;  // d loss / d logits = p - q'
};

/// Cross-entropy against the label-smoothed target. Returns the loss and its
/// exact gradient with respect to the logits.
template <typename T>
CrossEntropyResult<T> cross_entropy_lsr(const std::vector<T>& logits,
                                        int true_class, T epsilon) {
  std::vector<T> q = lsr_target<T>(true_class, static_cast<int>(logits.size()),
                                   epsilon);
  T mx = *std::max_element(logits.begin(), logits.end());
  double sumexp = 0.0;
  for (T l : logits) sumexp += std::exp(static_cast<double>(l - mx));
  double logsum = std::log(sumexp);

  double loss = 0.0;
  CrossEntropyResult<T> out;
  out.grad.resize(logits.size());
  for (size_t k = 0; k < logits.size(); ++k) {
    double logp = static_cast<double>(logits[k] - mx) - logsum;
    loss -= static_cast<double>(q[k]) * logp;
    double p = std::exp(logp);
    out.grad[k] = static_cast<T>(p - static_cast<double>(q[k]));
  }
  out.loss = static_cast<T>(loss);
  return out;
}

/// A training batch of P people with N embeddings each, person-major:
/// embeddings[i*per_person + a] is image a of person i.
template <typename T>
struct TripletBatchT {
  int people = 0;
  int per_person = 0;
  std::vector<std::vector<T>> embeddings;
  T margin = T(0);
};

using TripletBatch = TripletBatchT<float>;

template <typename T>
struct TripletResult {
  T loss;  // sum of hinge terms over all P*N anchors
  std::vector<std::vector<T>> grads;
  int active = 0;  // anchors with a positive hinge
};

namespace detail {

template <typename T>
double euclid(const std::vector<T>& a, const std::vector<T>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace detail

/// Batch-hard triplet loss: per anchor, the farthest same-person embedding
/// and the nearest different-person embedding feed a hinge at the margin.
/// Subgradients flow only through the selected pairs; zero-distance pairs
/// contribute no gradient.
template <typename T>
TripletResult<T> triplet_hard(const TripletBatchT<T>& batch) {
  const int P = batch.people, N = batch.per_person;
  if (P < 2)
    throw std::invalid_argument("triplet_hard: need P >= 2 people (no negatives)");
  if (N < 2)
    throw std::invalid_argument("triplet_hard: need N >= 2 images per person");
  if (batch.embeddings.size() != static_cast<size_t>(P) * N)
    throw std::invalid_argument("triplet_hard: embedding count != P*N");
  if (batch.margin < T(0))
    throw std::invalid_argument("triplet_hard: negative margin");
  const size_t dim = batch.embeddings[0].size();
  for (const auto& e : batch.embeddings)
    if (e.size() != dim)
      throw std::invalid_argument("triplet_hard: ragged embedding dims");

  const int total = P * N;
  std::vector<double> dist(static_cast<size_t>(total) * total, 0.0);
  for (int a = 0; a < total; ++a)
    for (int b = a + 1; b < total; ++b) {
      double d = detail::euclid(batch.embeddings[a], batch.embeddings[b]);
      dist[static_cast<size_t>(a) * total + b] = d;
      dist[static_cast<size_t>(b) * total + a] = d;
    }

  std::vector<std::vector<double>> acc(total, std::vector<double>(dim, 0.0));
  double loss = 0.0;
  int active = 0;

  for (int anchor = 0; anchor < total; ++anchor) {
    int person = anchor / N;
    int hardest_pos = -1, hardest_neg = -1;
    double dpos = -1.0, dneg = 0.0;
    for (int other = person * N; other < (person + 1) * N; ++other) {
      if (other == anchor) continue;
      double d = dist[static_cast<size_t>(anchor) * total + other];
      if (d > dpos) {
        dpos = d;
        hardest_pos = other;
      }
    }
    bool first = true;
    for (int other = 0; other < total; ++other) {
      if (other / N == person) continue;
      double d = dist[static_cast<size_t>(anchor) * total + other];
      if (first || d < dneg) {
        dneg = d;
        hardest_neg = other;
        first = false;
      }
    }
    double hinge = static_cast<double>(batch.margin) + dpos - dneg;
    if (hinge <= 0.0) continue;
    loss += hinge;
    ++active;

    // d|a-b| / da = (a-b)/|a-b|; guarded at coincident points.
    auto add_pair = [&](int i, int j, double scale, double d) {
      if (d <= 0.0) return;
      auto& gi = acc[i];
      auto& gj = acc[j];
      const auto& ei = batch.embeddings[i];
      const auto& ej = batch.embeddings[j];
      for (size_t k = 0; k < dim; ++k) {
        double diff = (static_cast<double>(ei[k]) - static_cast<double>(ej[k])) / d;
        gi[k] += scale * diff;
        gj[k] -= scale * diff;
      }
    };
    add_pair(anchor, hardest_pos, +1.0, dpos);
    add_pair(anchor, hardest_neg, -1.0, dneg);
  }

  TripletResult<T> out;
  out.loss = static_cast<T>(loss);
  out.active = active;
  out.grads.resize(total);
  for (int i = 0; i < total; ++i) {
    out.grads[i].resize(dim);
    for (size_t k = 0; k < dim; ++k) out.grads[i][k] = static_cast<T>(acc[i][k]);
  }
  return out;
}

}  // namespace ssp
