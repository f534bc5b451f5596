#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "ssp/guidance.hpp"
#include "ssp/tensor.hpp"

namespace ssp {

/// L2 normalization with zero-vector passthrough (degenerate inputs are
/// returned unchanged instead of dividing by zero).
template <typename T>
std::vector<T> l2_normalize(const std::vector<T>& v) {
  double sq = 0.0;
  for (T x : v) sq += static_cast<double>(x) * static_cast<double>(x);
  if (sq == 0.0) return v;
  double inv = 1.0 / std::sqrt(sq);
  std::vector<T> out(v.size());
  for (size_t i = 0; i < v.size(); ++i)
    out[i] = static_cast<T>(static_cast<double>(v[i]) * inv);
  return out;
}

/// Gradient of l2_normalize at input x given upstream grad on the output:
/// (g - y (y.g)) / |x|, identity for the zero-vector passthrough case.
template <typename T>
std::vector<T> l2_normalize_backward(const std::vector<T>& x,
                                     const std::vector<T>& grad_y) {
  double sq = 0.0;
  for (T v : x) sq += static_cast<double>(v) * static_cast<double>(v);
  if (sq == 0.0) return grad_y;
  double norm = std::sqrt(sq);
  double dot = 0.0;
  for (size_t i = 0; i < x.size(); ++i)
    dot += static_cast<double>(x[i]) / norm * static_cast<double>(grad_y[i]);
  std::vector<T> out(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    double y = static_cast<double>(x[i]) / norm;
    out[i] = static_cast<T>((static_cast<double>(grad_y[i]) - y * dot) / norm);
  }
  return out;
}

/// Guided join: resize the tensor to the map resolution, weight every channel
/// by the map, then spatially average-pool. Output length = tau.channels.
template <typename T>
std::vector<T> saliency_join(const TensorT<T>& tau, const GuidanceMapT<T>& map) {
  TensorT<T> resized = bilinear_resize(tau, map.height, map.width);
  return global_avg_pool(channel_weight(resized, map));
}

template <typename T>
TensorT<T> saliency_join_backward(const std::vector<T>& grad_v,
                                  int tau_h, int tau_w,
                                  const GuidanceMapT<T>& map) {
  TensorT<T> g = global_avg_pool_backward(grad_v, map.height, map.width);
  g = channel_weight_backward(g, map);
  return bilinear_resize_backward(g, tau_h, tau_w);
}

/// Per-region guided join over the five parsing maps, concatenated in the
/// fixed region order. Output length = 5 * tau.channels. Each region slice
/// equals saliency_join with that region's map, bit for bit.
template <typename T>
std::vector<T> parsing_join(const TensorT<T>& tau, const ParsingMapsT<T>& maps) {
  TensorT<T> resized = bilinear_resize(tau, maps.height(), maps.width());
  std::vector<T> out;
  out.reserve(static_cast<size_t>(kParsingRegions) * tau.channels);
  for (int r = 0; r < kParsingRegions; ++r) {
    std::vector<T> part = global_avg_pool(channel_weight(resized, maps.regions[r]));
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

template <typename T>
TensorT<T> parsing_join_backward(const std::vector<T>& grad_v,
                                 int tau_h, int tau_w,
                                 const ParsingMapsT<T>& maps) {
  int c = static_cast<int>(grad_v.size()) / kParsingRegions;
  TensorT<T> g_resized(maps.height(), maps.width(), c);
  for (int r = 0; r < kParsingRegions; ++r) {
    std::vector<T> slice(grad_v.begin() + static_cast<size_t>(r) * c,
                         grad_v.begin() + static_cast<size_t>(r + 1) * c);
    TensorT<T> g = global_avg_pool_backward(slice, maps.height(), maps.width());
    g = channel_weight_backward(g, maps.regions[r]);
    for (size_t i = 0; i < g.data.size(); ++i) g_resized.data[i] += g.data[i];
  }
  return bilinear_resize_backward(g_resized, tau_h, tau_w);
}

/// One stream's output: the backbone global feature, the map-guided feature,
/// and their combination (concatenation of the L2-normalized parts).
template <typename T>
struct StreamOutputT {
  std::vector<T> global;
  std::vector<T> guided;
  std::vector<T> combined;
};

using StreamOutput = StreamOutputT<float>;

template <typename T>
StreamOutputT<T> stream_output(const std::vector<T>& global,
                               const std::vector<T>& guided) {
  StreamOutputT<T> out;
  out.global = global;
  out.guided = guided;
  out.combined = concat(l2_normalize(global), l2_normalize(guided));
  return out;
}

/// Score-level fusion of the saliency and parsing streams: concatenation of
/// the two L2-normalized combined vectors, so the squared Euclidean distance
/// between two fused embeddings is the sum of the per-stream squared
/// distances.
template <typename T>
std::vector<T> ssp_combine(const StreamOutputT<T>& s, const StreamOutputT<T>& sp) {
  return concat(l2_normalize(s.combined), l2_normalize(sp.combined));
}

}  // namespace ssp
