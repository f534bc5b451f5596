#include <doctest.h>

#include <cmath>

#include "ssp/losses.hpp"
#include "ssp/rng.hpp"
#include "support/gradcheck.hpp"

using namespace ssp;
using testsupport::central_diff;
using testsupport::rel_err;

namespace {

/// Test-local reference: enumerate every positive and negative pair per
/// anchor instead of tracking argmax/argmin.
double brute_force_triplet(const TripletBatchT<double>& b) {
  auto dist = [&](int i, int j) {
    double s = 0;
    for (size_t k = 0; k < b.embeddings[i].size(); ++k) {
      double d = b.embeddings[i][k] - b.embeddings[j][k];
      s += d * d;
    }
    return std::sqrt(s);
  };
  double total = 0;
  for (int anchor = 0; anchor < b.people * b.per_person; ++anchor) {
    int person = anchor / b.per_person;
    double dpos = 0, dneg = 1e300;
    for (int o = 0; o < b.people * b.per_person; ++o) {
      if (o == anchor) continue;
      if (o / b.per_person == person)
        dpos = std::max(dpos, dist(anchor, o));
      else
        dneg = std::min(dneg, dist(anchor, o));
    }
    total += std::max(0.0, b.margin + dpos - dneg);
  }
  return total;
}

TripletBatchT<double> random_batch(int P, int N, int dim, Rng& rng) {
  TripletBatchT<double> b;
  b.people = P;
  b.per_person = N;
  b.margin = 0.3;
  for (int i = 0; i < P * N; ++i) {
    std::vector<double> e(dim);
    // Cluster per person so hinges are active for some anchors only.
    for (auto& v : e) v = (i / N) * 0.8 + 0.5 * rng.normal();
    b.embeddings.push_back(std::move(e));
  }
  return b;
}

}  // namespace

TEST_CASE("lsr_target hand values") {
  auto onehot = lsr_target<double>(2, 4, 0.0);
  CHECK(onehot == std::vector<double>{0, 0, 1, 0});

  auto smoothed = lsr_target<double>(1, 4, 0.1);
  CHECK(smoothed[0] == doctest::Approx(0.025));
  CHECK(smoothed[1] == doctest::Approx(0.925));
  CHECK(smoothed[2] == doctest::Approx(0.025));
  CHECK(smoothed[3] == doctest::Approx(0.025));

  auto uniform = lsr_target<double>(0, 5, 1.0);
  for (double q : uniform) CHECK(q == doctest::Approx(0.2));

  CHECK_THROWS_AS(lsr_target<double>(4, 4, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(lsr_target<double>(-1, 4, 0.1), std::invalid_argument);
}

TEST_CASE("cross_entropy_lsr closed forms") {
  SUBCASE("uniform logits give ln K regardless of epsilon") {
    for (int K : {2, 4, 7}) {
      for (double eps : {0.0, 0.1, 0.5}) {
        std::vector<double> logits(K, 1.25);
        auto r = cross_entropy_lsr(logits, K - 1, eps);
        CHECK(r.loss == doctest::Approx(std::log(K)).epsilon(1e-9));
      }
    }
  }

  SUBCASE("confident correct prediction drives the loss to zero") {
    std::vector<double> logits = {40.0, 0.0, 0.0};
    auto r = cross_entropy_lsr(logits, 0, 0.0);
    CHECK(r.loss < 1e-9);
  }

  SUBCASE("K=2 hand case") {
    std::vector<double> logits = {0.0, 0.0};
    auto r = cross_entropy_lsr(logits, 0, 0.1);
    CHECK(r.loss == doctest::Approx(std::log(2.0)).epsilon(1e-9));
    CHECK(r.grad[0] == doctest::Approx(-0.45));
    CHECK(r.grad[1] == doctest::Approx(0.45));
  }
}

TEST_CASE("cross_entropy_lsr decompositions agree") {
  Rng rng(51);
  for (int rep = 0; rep < 50; ++rep) {
    int K = rng.uniform_int(2, 9);
    int y = rng.uniform_int(0, K - 1);
    double eps = rng.uniform(0.0, 0.9);
    std::vector<double> logits(K);
    for (auto& v : logits) v = rng.uniform(-4, 4);
    auto direct = cross_entropy_lsr(logits, y, eps);

    // (1-eps) H(q,p) + eps H(u,p)
    double mx = *std::max_element(logits.begin(), logits.end());
    double sumexp = 0;
    for (double l : logits) sumexp += std::exp(l - mx);
    auto logp = [&](int k) { return logits[k] - mx - std::log(sumexp); };
    double h_q = -logp(y);
    double h_u = 0;
    for (int k = 0; k < K; ++k) h_u -= logp(k) / K;
    double split = (1 - eps) * h_q + eps * h_u;
    CHECK(std::abs(direct.loss - split) < 1e-6);
  }
}

TEST_CASE("cross_entropy_lsr gradient matches finite differences") {
  Rng rng(53);
  int checked = 0;
  for (int rep = 0; rep < 100; ++rep) {
    int K = rng.uniform_int(2, 10);
    int y = rng.uniform_int(0, K - 1);
    double eps = rng.uniform(0.0, 0.5);
    std::vector<double> logits(K);
    for (auto& v : logits) v = rng.uniform(-3, 3);
    auto analytic = cross_entropy_lsr(logits, y, eps);
    int i = rng.uniform_int(0, K - 1);
    double fd = central_diff(
        [&] { return static_cast<double>(cross_entropy_lsr(logits, y, eps).loss); },
        &logits[i]);
    CHECK(rel_err(analytic.grad[i], fd) < 1e-4);
    ++checked;
  }
  CHECK(checked == 100);
}

TEST_CASE("triplet_hard closed forms") {
  SUBCASE("all-identical embeddings hinge at the margin") {
    TripletBatchT<double> b;
    b.people = 2;
    b.per_person = 2;
    b.margin = 0.3;
    b.embeddings.assign(4, {1.0, 2.0});
    auto r = triplet_hard(b);
    CHECK(r.loss == doctest::Approx(1.2).epsilon(1e-12));
    for (const auto& g : r.grads)
      for (double v : g) CHECK(v == 0.0);  // zero-distance pairs give no grad
  }

  SUBCASE("well-separated tight clusters give zero loss") {
    TripletBatchT<double> b;
    b.people = 2;
    b.per_person = 2;
    b.margin = 0.3;
    b.embeddings = {{0.0}, {0.0}, {10.0}, {10.0}};
    auto r = triplet_hard(b);
    CHECK(r.loss == 0.0);
  }

  SUBCASE("1-D derived cases") {
    TripletBatchT<double> far;
    far.people = 2;
    far.per_person = 2;
    far.margin = 0.3;
    far.embeddings = {{0.0}, {1.0}, {10.0}, {11.0}};
    CHECK(triplet_hard(far).loss == 0.0);

    // Shrunk gap: anchors at 1 and 2.2 see hardest positive 1.0 and hardest
    // negative 1.2, so each contributes 0.3 + 1.0 - 1.2 = 0.1.
    TripletBatchT<double> close = far;
    close.embeddings = {{0.0}, {1.0}, {2.2}, {3.2}};
    auto r = triplet_hard(close);
    CHECK(r.loss == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(r.loss == doctest::Approx(brute_force_triplet(close)).epsilon(1e-12));
  }
}

TEST_CASE("triplet_hard matches the brute-force oracle on random batches") {
  Rng rng(59);
  for (int rep = 0; rep < 50; ++rep) {
    auto b = random_batch(rng.uniform_int(2, 4), rng.uniform_int(2, 4), 3, rng);
    auto r = triplet_hard(b);
    CHECK(r.loss == doctest::Approx(brute_force_triplet(b)).epsilon(1e-10));
  }
}

TEST_CASE("triplet_hard invariances") {
  Rng rng(61);
  auto b = random_batch(3, 3, 4, rng);
  double base = triplet_hard(b).loss;

  SUBCASE("permuting people") {
    TripletBatchT<double> p = b;
    // Swap person 0 and person 2 blocks.
    for (int n = 0; n < 3; ++n) std::swap(p.embeddings[n], p.embeddings[6 + n]);
    CHECK(triplet_hard(p).loss == doctest::Approx(base).epsilon(1e-9));
  }

  SUBCASE("permuting images within a person") {
    TripletBatchT<double> p = b;
    std::swap(p.embeddings[3], p.embeddings[5]);
    CHECK(triplet_hard(p).loss == doctest::Approx(base).epsilon(1e-9));
  }

  SUBCASE("translating every embedding") {
    TripletBatchT<double> p = b;
    for (auto& e : p.embeddings)
      for (size_t k = 0; k < e.size(); ++k) e[k] += 3.7;
    CHECK(triplet_hard(p).loss == doctest::Approx(base).epsilon(1e-9));
  }
}

TEST_CASE("triplet_hard gradient matches finite differences at generic points") {
  Rng rng(67);
  int checked = 0;
  while (checked < 100) {
    auto b = random_batch(rng.uniform_int(2, 3), rng.uniform_int(2, 3), 3, rng);
    // Re-sample when a hardest-pair selection or hinge sits near a tie.
    bool degenerate = false;
    const int total = b.people * b.per_person;
    for (int anchor = 0; anchor < total && !degenerate; ++anchor) {
      int person = anchor / b.per_person;
      std::vector<double> pos, neg;
      for (int o = 0; o < total; ++o) {
        if (o == anchor) continue;
        double s = 0;
        for (size_t k = 0; k < b.embeddings[o].size(); ++k) {
          double d = b.embeddings[anchor][k] - b.embeddings[o][k];
          s += d * d;
        }
        (o / b.per_person == person ? pos : neg).push_back(std::sqrt(s));
      }
      std::sort(pos.rbegin(), pos.rend());
      std::sort(neg.begin(), neg.end());
      if (pos.size() > 1 && pos[0] - pos[1] < 1e-4) degenerate = true;
      if (neg.size() > 1 && neg[1] - neg[0] < 1e-4) degenerate = true;
      if (std::abs(b.margin + pos[0] - neg[0]) < 1e-4) degenerate = true;
      if (pos[0] < 1e-4 || neg[0] < 1e-4) degenerate = true;
    }
    if (degenerate) continue;

    auto analytic = triplet_hard(b);
    int i = static_cast<int>(rng.next_u64() % b.embeddings.size());
    int k = static_cast<int>(rng.next_u64() % b.embeddings[i].size());
    double fd = central_diff(
        [&] { return static_cast<double>(triplet_hard(b).loss); },
        &b.embeddings[i][k]);
    CHECK(rel_err(analytic.grads[i][k], fd) < 1e-4);
    ++checked;
  }
  CHECK(checked == 100);
}

TEST_CASE("triplet_hard validates its batch") {
  TripletBatchT<double> b;
  b.people = 1;
  b.per_person = 2;
  b.margin = 0.3;
  b.embeddings.assign(2, {0.0});
  CHECK_THROWS_AS(triplet_hard(b), std::invalid_argument);

  b.people = 2;
  b.per_person = 1;
  CHECK_THROWS_AS(triplet_hard(b), std::invalid_argument);

  b.per_person = 2;
  b.embeddings.assign(3, {0.0});
  CHECK_THROWS_AS(triplet_hard(b), std::invalid_argument);
}
