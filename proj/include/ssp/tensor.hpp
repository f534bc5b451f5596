#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace ssp {

/// Dense rank-3 array in row-major (height, width, channel) order.
/// Immutable by convention once filled; every operation below returns a new
/// tensor and is safe to call concurrently.
template <typename T>
struct TensorT {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<T> data;

  TensorT() = default;
  TensorT(int h, int w, int c)
      : height(h), width(w), channels(c),
        data(static_cast<size_t>(h) * w * c, T(0)) {
    if (h <= 0 || w <= 0 || c <= 0)
      throw std::invalid_argument("tensor dimensions must be positive");
  }

  size_t index(int i, int j, int k) const {
    return (static_cast<size_t>(i) * width + j) * channels + k;
  }
  T& at(int i, int j, int k) { return data[index(i, j, k)]; }
  const T& at(int i, int j, int k) const { return data[index(i, j, k)]; }

  size_t size() const { return data.size(); }

  bool finite() const {
    for (T v : data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }
};

using Tensor = TensorT<float>;

template <typename T>
using VectorT = std::vector<T>;

using FeatureVector = std::vector<float>;

/// Single-channel spatial weight map, weights in [0, 1].
template <typename T>
struct GuidanceMapT {
  int height = 0;
  int width = 0;
  std::vector<T> weights;

  GuidanceMapT() = default;
  GuidanceMapT(int h, int w)
      : height(h), width(w), weights(static_cast<size_t>(h) * w, T(0)) {
    if (h <= 0 || w <= 0)
      throw std::invalid_argument("map dimensions must be positive");
  }

  T& at(int i, int j) { return weights[static_cast<size_t>(i) * width + j]; }
  const T& at(int i, int j) const {
    return weights[static_cast<size_t>(i) * width + j];
  }
};

using GuidanceMap = GuidanceMapT<float>;

namespace detail {

/// Align-corners source coordinate plus blend weights for one output line.
struct LinearSample {
  int lo;
  int hi;
  double frac;
};

inline LinearSample linear_sample(int out_idx, int in_size, int out_size) {
  double src = 0.0;
  if (out_size > 1)
    src = static_cast<double>(out_idx) * (in_size - 1) / (out_size - 1);
  int lo = static_cast<int>(src);
  if (lo > in_size - 1) lo = in_size - 1;
  int hi = lo + 1 < in_size ? lo + 1 : lo;
  return {lo, hi, src - lo};
}

}  // namespace detail

/// Resize with the align-corners convention: output row i samples source row
/// i*(h-1)/(out_h-1) (0 when out_h == 1) and blends the four surrounding grid
/// points. Resizing to the input shape reproduces it exactly.
template <typename T>
TensorT<T> bilinear_resize(const TensorT<T>& t, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1)
    throw std::invalid_argument("bilinear_resize: target size must be >= 1");
  TensorT<T> out(out_h, out_w, t.channels);
  std::vector<detail::LinearSample> rows(out_h), cols(out_w);
  for (int i = 0; i < out_h; ++i) rows[i] = detail::linear_sample(i, t.height, out_h);
  for (int j = 0; j < out_w; ++j) cols[j] = detail::linear_sample(j, t.width, out_w);

  for (int i = 0; i < out_h; ++i) {
    const auto& r = rows[i];
    T fy = static_cast<T>(r.frac);
    for (int j = 0; j < out_w; ++j) {
      const auto& c = cols[j];
      T fx = static_cast<T>(c.frac);
      for (int k = 0; k < t.channels; ++k) {
        T v00 = t.at(r.lo, c.lo, k);
        T v01 = t.at(r.lo, c.hi, k);
        T v10 = t.at(r.hi, c.lo, k);
        T v11 = t.at(r.hi, c.hi, k);
        T top = v00 + fx * (v01 - v00);
        T bot = v10 + fx * (v11 - v10);
        out.at(i, j, k) = top + fy * (bot - top);
      }
    }
  }
  return out;
}

/// Adjoint of bilinear_resize: scatters an upstream gradient of shape
/// (out_h, out_w, c) back onto the (in_h, in_w, c) input grid.
template <typename T>
TensorT<T> bilinear_resize_backward(const TensorT<T>& grad_out, int in_h, int in_w) {
  TensorT<T> grad_in(in_h, in_w, grad_out.channels);
  std::vector<double> acc(grad_in.size(), 0.0);
  std::vector<detail::LinearSample> rows(grad_out.height), cols(grad_out.width);
  for (int i = 0; i < grad_out.height; ++i)
    rows[i] = detail::linear_sample(i, in_h, grad_out.height);
  for (int j = 0; j < grad_out.width; ++j)
    cols[j] = detail::linear_sample(j, in_w, grad_out.width);

  for (int i = 0; i < grad_out.height; ++i) {
    const auto& r = rows[i];
    for (int j = 0; j < grad_out.width; ++j) {
      const auto& c = cols[j];
      for (int k = 0; k < grad_out.channels; ++k) {
        double g = static_cast<double>(grad_out.at(i, j, k));
        acc[grad_in.index(r.lo, c.lo, k)] += g * (1 - r.frac) * (1 - c.frac);
        acc[grad_in.index(r.lo, c.hi, k)] += g * (1 - r.frac) * c.frac;
        acc[grad_in.index(r.hi, c.lo, k)] += g * r.frac * (1 - c.frac);
        acc[grad_in.index(r.hi, c.hi, k)] += g * r.frac * c.frac;
      }
    }
  }
  for (size_t i = 0; i < acc.size(); ++i) grad_in.data[i] = static_cast<T>(acc[i]);
  return grad_in;
}

/// Multiply every channel of t by the map, pointwise over (i, j).
template <typename T>
TensorT<T> channel_weight(const TensorT<T>& t, const GuidanceMapT<T>& map) {
  if (t.height != map.height || t.width != map.width)
    throw std::invalid_argument(
        "channel_weight: tensor " + std::to_string(t.height) + "x" +
        std::to_string(t.width) + " vs map " + std::to_string(map.height) +
        "x" + std::to_string(map.width));
  TensorT<T> out(t.height, t.width, t.channels);
  size_t p = 0;
  for (int i = 0; i < t.height; ++i)
    for (int j = 0; j < t.width; ++j) {
      T w = map.at(i, j);
      for (int k = 0; k < t.channels; ++k, ++p) out.data[p] = t.data[p] * w;
    }
  return out;
}

template <typename T>
TensorT<T> channel_weight_backward(const TensorT<T>& grad_out,
                                   const GuidanceMapT<T>& map) {
  return channel_weight(grad_out, map);
}

/// Spatial mean per channel. Sums are accumulated in double regardless of T
/// so the mean error does not grow with spatial size.
template <typename T>
std::vector<T> global_avg_pool(const TensorT<T>& t) {
  std::vector<double> acc(t.channels, 0.0);
  size_t p = 0;
  size_t cells = static_cast<size_t>(t.height) * t.width;
  for (size_t ij = 0; ij < cells; ++ij)
    for (int k = 0; k < t.channels; ++k, ++p) acc[k] += static_cast<double>(t.data[p]);
  std::vector<T> out(t.channels);
  for (int k = 0; k < t.channels; ++k)
    out[k] = static_cast<T>(acc[k] / static_cast<double>(cells));
  return out;
}

template <typename T>
TensorT<T> global_avg_pool_backward(const std::vector<T>& grad_vec, int h, int w) {
  TensorT<T> grad(h, w, static_cast<int>(grad_vec.size()));
  double inv = 1.0 / (static_cast<double>(h) * w);
  size_t p = 0;
  for (int ij = 0; ij < h * w; ++ij)
    for (size_t k = 0; k < grad_vec.size(); ++k, ++p)
      grad.data[p] = static_cast<T>(static_cast<double>(grad_vec[k]) * inv);
  return grad;
}

/// a's entries followed by b's.
template <typename T>
std::vector<T> concat(const std::vector<T>& a, const std::vector<T>& b) {
  std::vector<T> out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

}  // namespace ssp
