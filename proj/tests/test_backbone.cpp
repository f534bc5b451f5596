#include <doctest.h>

#include <cmath>

#include "ssp/backbone.hpp"
#include "ssp/losses.hpp"
#include "ssp/rng.hpp"
#include "ssp/stream_loss.hpp"
#include "support/gradcheck.hpp"

using namespace ssp;
using testsupport::central_diff;
using testsupport::rel_err;

namespace {

BackboneConfig tiny_config() {
  BackboneConfig cfg;
  cfg.in_h = 16;
  cfg.in_w = 8;
  cfg.in_c = 2;
  cfg.channels = {4, 6, 8, 10};
  cfg.tap_stage = 2;
  return cfg;
}

template <typename T>
TensorT<T> random_image(const BackboneConfig& cfg, Rng& rng) {
  TensorT<T> img(cfg.in_h, cfg.in_w, cfg.in_c);
  for (auto& v : img.data) v = static_cast<T>(rng.uniform(-0.5, 0.5));
  return img;
}

template <typename T>
GuidanceMapT<T> random_map(int h, int w, Rng& rng) {
  GuidanceMapT<T> m(h, w);
  for (auto& v : m.weights) v = static_cast<T>(rng.uniform());
  return m;
}

template <typename T>
ParsingMapsT<T> random_parsing(int h, int w, Rng& rng) {
  ParsingMapsT<T> maps;
  for (int r = 0; r < kCompleteBody; ++r) {
    maps.regions[r] = GuidanceMapT<T>(h, w);
    for (auto& v : maps.regions[r].weights)
      v = rng.uniform() < 0.35 ? T(1) : T(0);
  }
  maps.regions[kCompleteBody] = GuidanceMapT<T>(h, w);
  for (size_t i = 0; i < maps.regions[0].weights.size(); ++i) {
    T mx = 0;
    for (int r = 0; r < kCompleteBody; ++r)
      mx = std::max(mx, maps.regions[r].weights[i]);
    maps.regions[kCompleteBody].weights[i] = mx;
  }
  return maps;
}

template <typename T>
std::vector<StreamSample<T>> random_batch_samples(const BackboneConfig& cfg,
                                                  int people, int per_person,
                                                  int map_h, int map_w, Rng& rng) {
  std::vector<StreamSample<T>> out;
  for (int p = 0; p < people; ++p)
    for (int n = 0; n < per_person; ++n) {
      StreamSample<T> s;
      s.image = random_image<T>(cfg, rng);
      s.saliency = random_map<T>(map_h, map_w, rng);
      s.parsing = random_parsing<T>(map_h, map_w, rng);
      s.label = p;
      out.push_back(std::move(s));
    }
  return out;
}

}  // namespace

TEST_CASE("zero weights give zero logits and a uniform softmax") {
  BackboneConfig cfg = tiny_config();
  Rng rng(1);
  ToyBackboneT<float> m = make_backbone<float>(cfg, rng);
  attach_classifier(m, 5, Stream::S, rng);
  for (auto* p : param_ptrs(m)) *p = 0.0f;

  Tensor img = random_image<float>(cfg, rng);
  GuidanceMap map = random_map<float>(8, 4, rng);
  auto out = forward(m, img, map);
  for (float l : out.logits) CHECK(l == 0.0f);
  auto p = softmax(out.logits);
  for (float v : p) CHECK(v == doctest::Approx(0.2f));
}

TEST_CASE("doubling the classifier doubles the logits") {
  BackboneConfig cfg = tiny_config();
  Rng rng(2);
  ToyBackboneT<float> m = make_backbone<float>(cfg, rng);
  attach_classifier(m, 4, Stream::S, rng);
  for (auto& b : m.classifier.bias) b = static_cast<float>(rng.normal());

  Tensor img = random_image<float>(cfg, rng);
  GuidanceMap map = random_map<float>(8, 4, rng);
  auto base = forward(m, img, map);

  for (auto& w : m.classifier.weights) w *= 2.0f;
  for (auto& b : m.classifier.bias) b *= 2.0f;
  auto doubled = forward(m, img, map);
  for (size_t k = 0; k < base.logits.size(); ++k)
    CHECK(doubled.logits[k] == doctest::Approx(2.0f * base.logits[k]).epsilon(1e-5));
}

TEST_CASE("forward is deterministic and validates input shape") {
  BackboneConfig cfg = tiny_config();
  Rng rng_a(77), rng_b(77);
  ToyBackboneT<float> a = make_backbone<float>(cfg, rng_a);
  ToyBackboneT<float> b = make_backbone<float>(cfg, rng_b);
  Rng data_rng(5);
  Tensor img = random_image<float>(cfg, data_rng);
  GuidanceMap map = random_map<float>(8, 4, data_rng);
  auto fa = forward(a, img, map);
  auto fb = forward(b, img, map);
  CHECK(fa.global == fb.global);
  CHECK(fa.stream.combined == fb.stream.combined);

  Tensor wrong(8, 8, 2);
  CHECK_THROWS_AS(forward(a, wrong, map), std::invalid_argument);
}

TEST_CASE("tap stage must sit strictly before the final stage") {
  BackboneConfig cfg = tiny_config();
  cfg.tap_stage = 3;  // == last stage
  Rng rng(9);
  CHECK_THROWS_AS(make_backbone<float>(cfg, rng), std::invalid_argument);
}

TEST_CASE("zeroed map regions receive no guided-path gradient") {
  // Map at tap resolution, so the resize inside the join is the identity and
  // the zero region maps one-to-one onto tap cells.
  Rng rng(21);
  const int th = 4, tw = 2, c = 3;
  GuidanceMapT<double> map(th, tw);
  for (int i = 0; i < th; ++i)
    for (int j = 0; j < tw; ++j) map.at(i, j) = i < th / 2 ? 0.0 : 0.7;
  std::vector<double> grad_v(c);
  for (auto& v : grad_v) v = rng.normal();
  TensorT<double> grad_tap = saliency_join_backward(grad_v, th, tw, map);
  for (int i = 0; i < th; ++i)
    for (int j = 0; j < tw; ++j)
      for (int k = 0; k < c; ++k) {
        if (i < th / 2)
          CHECK(grad_tap.at(i, j, k) == 0.0);
        else
          CHECK(grad_tap.at(i, j, k) != 0.0);
      }
}

TEST_CASE("stream batch loss gradients match finite differences") {
  BackboneConfig cfg = tiny_config();
  Rng rng(31);

  for (Stream stream : {Stream::S, Stream::SP}) {
    ToyBackboneT<double> model = make_backbone<double>(cfg, rng);
    attach_classifier(model, 2, stream, rng);
    auto samples = random_batch_samples<double>(cfg, 2, 2, 8, 4, rng);
    std::vector<const StreamSample<double>*> batch;
    for (auto& s : samples) batch.push_back(&s);

    auto loss_fn = [&] {
      return static_cast<double>(
          stream_batch_loss<double>(model, batch, 2, 2, stream, 0.1, 0.3,
                                    true, nullptr)
              .total);
    };

    ToyBackboneT<double> grads = zeros_like(model);
    stream_batch_loss<double>(model, batch, 2, 2, stream, 0.1, 0.3, true, &grads);

    auto params = param_ptrs(model);
    auto grad_vals = param_ptrs(grads);
    REQUIRE(params.size() == grad_vals.size());
    int bad = 0;
    for (int rep = 0; rep < 25; ++rep) {
      size_t idx = rng.next_u64() % params.size();
      double fd = central_diff(loss_fn, params[idx]);
      if (rel_err(*grad_vals[idx], fd, 1e-7) >= 1e-3) ++bad;
    }
    CHECK(bad == 0);
  }
}

TEST_CASE("threaded batch loss reproduces the single-thread result bitwise") {
  BackboneConfig cfg = tiny_config();
  Rng rng(41);
  ToyBackboneT<float> model = make_backbone<float>(cfg, rng);
  attach_classifier(model, 3, Stream::SP, rng);
  auto samples = random_batch_samples<float>(cfg, 3, 2, 8, 4, rng);
  std::vector<const StreamSample<float>*> batch;
  for (auto& s : samples) batch.push_back(&s);

  ToyBackboneT<float> g1 = zeros_like(model), g4 = zeros_like(model);
  auto p1 = stream_batch_loss<float>(model, batch, 3, 2, Stream::SP, 0.1f, 0.3f,
                                     true, &g1, 1);
  auto p4 = stream_batch_loss<float>(model, batch, 3, 2, Stream::SP, 0.1f, 0.3f,
                                     true, &g4, 4);
  CHECK(p1.total == p4.total);
  auto v1 = param_ptrs(g1);
  auto v4 = param_ptrs(g4);
  for (size_t i = 0; i < v1.size(); ++i) CHECK(*v1[i] == *v4[i]);
}

TEST_CASE("stream dimensions follow the stream kind") {
  BackboneConfig cfg = tiny_config();
  Rng rng(51);
  ToyBackboneT<float> m = make_backbone<float>(cfg, rng);
  CHECK(m.stream_dim(Stream::S) == 10 + 8);
  CHECK(m.stream_dim(Stream::SP) == 10 + 5 * 8);

  Tensor img = random_image<float>(cfg, rng);
  auto s_out = forward(m, img, random_map<float>(8, 4, rng));
  CHECK(s_out.stream.combined.size() == 18);
  auto sp_out = forward(m, img, random_parsing<float>(8, 4, rng));
  CHECK(sp_out.stream.combined.size() == 50);
  CHECK(ssp_combine(s_out.stream, sp_out.stream).size() == 68);
}
