#pragma once

#include <atomic>
#include <thread>
#include <vector>

#include "ssp/backbone.hpp"
#include "ssp/losses.hpp"

namespace ssp {

/// One training example: the image, its two guidance inputs, and the class
/// index of its identity within the training label set.
template <typename T>
struct StreamSample {
  TensorT<T> image;
  GuidanceMapT<T> saliency;
  ParsingMapsT<T> parsing;
  int label = 0;
};

template <typename T>
struct StreamLossParts {
  T total = T(0);
  T crosse = T(0);  // mean cross-entropy per sample
  T trip = T(0);    // triplet hinge sum averaged per anchor
};

namespace detail {

template <typename T>
struct SampleState {
  BackboneActs<T> cache;
  std::vector<T> guided_raw;
  StreamOutputT<T> stream;
  std::vector<T> logits;
  std::vector<T> dlogits;
  std::vector<T> dcombined;
};

template <typename Fn>
void parallel_over(int count, int threads, Fn&& fn) {
  if (threads <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  int workers = std::min(threads, count);
  for (int t = 0; t < workers; ++t)
    pool.emplace_back([&]() {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace detail

/// Batch objective of one stream: label-smoothed cross-entropy on the
/// classifier logits plus (optionally) batch-hard triplet loss on the
/// combined embeddings. The batch is person-major with `people * per_person`
/// samples. When `grads` is non-null, parameter gradients of the total loss
/// are accumulated into it; per-sample work may run on several threads but
/// the reduction order is fixed, so results are deterministic.
template <typename T>
StreamLossParts<T> stream_batch_loss(
    const ToyBackboneT<T>& model,
    const std::vector<const StreamSample<T>*>& batch, int people,
    int per_person, Stream stream, T epsilon, T margin, bool with_triplet,
    ToyBackboneT<T>* grads, int threads = 1) {
  const int count = static_cast<int>(batch.size());
  if (count != people * per_person)
    throw std::invalid_argument("stream_batch_loss: batch size != P*N");
  if (!model.has_classifier)
    throw std::invalid_argument("stream_batch_loss: model has no classifier");

  std::vector<detail::SampleState<T>> states(count);

  detail::parallel_over(count, threads, [&](int i) {
    auto& st = states[i];
    const auto& s = *batch[i];
    st.cache = backbone_forward(model, s.image);
    st.guided_raw = stream == Stream::S
                        ? saliency_join(st.cache.tap(model), s.saliency)
                        : parsing_join(st.cache.tap(model), s.parsing);
    st.stream = stream_output(global_avg_pool(st.cache.last()), st.guided_raw);
    st.logits = linear_forward(model.classifier, st.stream.combined);
  });

  StreamLossParts<T> parts;
  double crosse_sum = 0.0;
  for (int i = 0; i < count; ++i) {
    auto ce = cross_entropy_lsr(states[i].logits, batch[i]->label, epsilon);
    crosse_sum += static_cast<double>(ce.loss);
    states[i].dlogits.resize(ce.grad.size());
    for (size_t k = 0; k < ce.grad.size(); ++k)
      states[i].dlogits[k] = static_cast<T>(static_cast<double>(ce.grad[k]) / count);
  }
  parts.crosse = static_cast<T>(crosse_sum / count);

  if (with_triplet) {
    TripletBatchT<T> tb;
    tb.people = people;
    tb.per_person = per_person;
    tb.margin = margin;
    tb.embeddings.reserve(count);
    for (int i = 0; i < count; ++i) tb.embeddings.push_back(states[i].stream.combined);
    auto tr = triplet_hard(tb);
    parts.trip = static_cast<T>(static_cast<double>(tr.loss) / count);
    for (int i = 0; i < count; ++i) {
      states[i].dcombined.resize(tr.grads[i].size());
      for (size_t k = 0; k < tr.grads[i].size(); ++k)
        states[i].dcombined[k] =
            static_cast<T>(static_cast<double>(tr.grads[i][k]) / count);
    }
  }
  parts.total = parts.crosse + parts.trip;

  if (grads == nullptr) return parts;

  std::vector<ToyBackboneT<T>> sample_grads(count);
  detail::parallel_over(count, threads, [&](int i) {
    auto& st = states[i];
    const auto& s = *batch[i];
    ToyBackboneT<T> g = zeros_like(model);

    std::vector<T> dcombined =
        linear_backward(model.classifier, st.stream.combined, st.dlogits,
                        g.classifier);
    if (!st.dcombined.empty())
      for (size_t k = 0; k < dcombined.size(); ++k) dcombined[k] += st.dcombined[k];

    const size_t gdim = st.stream.global.size();
    std::vector<T> dglobal_n(dcombined.begin(), dcombined.begin() + gdim);
    std::vector<T> dguided_n(dcombined.begin() + gdim, dcombined.end());
    std::vector<T> dglobal = l2_normalize_backward(st.stream.global, dglobal_n);
    std::vector<T> dguided = l2_normalize_backward(st.guided_raw, dguided_n);

    const int nstages = static_cast<int>(model.stages.size());
    std::vector<TensorT<T>> act_grads(nstages + 1);
    for (int a = 1; a <= nstages; ++a) {
      const auto& ref = st.cache.acts[a];
      act_grads[a] = TensorT<T>(ref.height, ref.width, ref.channels);
    }
    {
      const auto& last = st.cache.last();
      act_grads[nstages] =
          global_avg_pool_backward(dglobal, last.height, last.width);
    }
    {
      const auto& tap = st.cache.tap(model);
      TensorT<T> gtap =
          stream == Stream::S
              ? saliency_join_backward(dguided, tap.height, tap.width, s.saliency)
              : parsing_join_backward(dguided, tap.height, tap.width, s.parsing);
      auto& dst = act_grads[model.tap_stage + 1];
      for (size_t k = 0; k < dst.data.size(); ++k) dst.data[k] += gtap.data[k];
    }
    for (int si = nstages - 1; si >= 0; --si) {
      TensorT<T> gin =
          conv_backward(model.stages[si], st.cache.acts[si],
                        st.cache.acts[si + 1], act_grads[si + 1], g.stages[si]);
      if (si > 0)
        for (size_t k = 0; k < gin.data.size(); ++k)
          act_grads[si].data[k] += gin.data[k];
    }
    sample_grads[i] = std::move(g);
  });

  // Fixed-order reduction keeps threaded runs bit-identical.
  auto dst = param_ptrs(*grads);
  for (int i = 0; i < count; ++i) {
    auto src = param_ptrs(sample_grads[i]);
    for (size_t k = 0; k < dst.size(); ++k) *dst[k] += *src[k];
  }
  return parts;
}

}  // namespace ssp
