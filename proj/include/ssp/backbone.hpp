#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "ssp/fusion.hpp"
#include "ssp/rng.hpp"
#include "ssp/tensor.hpp"

namespace ssp {

enum class Stream { S, SP };

inline const char* stream_name(Stream s) { return s == Stream::S ? "s" : "sp"; }

/// One strided convolution stage with tanh activation. Weight layout is
/// [ky][kx][in][out] row-major; padding is (k-1)/2 ("same" before striding).
template <typename T>
struct ConvStageT {
  int kh = 3, kw = 3;
  int in_ch = 0, out_ch = 0;
  int stride = 2;
  std::vector<T> weights;
  std::vector<T> bias;

  size_t widx(int ky, int kx, int ic, int oc) const {
    return ((static_cast<size_t>(ky) * kw + kx) * in_ch + ic) * out_ch + oc;
  }
  int out_size(int in, int k, int pad) const {
    return (in + 2 * pad - k) / stride + 1;
  }
};

template <typename T>
struct LinearT {
  int in_dim = 0, out_dim = 0;
  std::vector<T> weights;  // [in][out] row-major
  std::vector<T> bias;
};

/// Small trainable convolutional backbone. The tap stage output feeds the
/// guided join; its index must be strictly before the final stage. The
/// classifier exists only for training and is absent on inference models.
template <typename T>
struct ToyBackboneT {
  int in_h = 254, in_w = 128, in_c = 3;
  std::vector<ConvStageT<T>> stages;
  int tap_stage = 2;
  bool has_classifier = false;
  LinearT<T> classifier;

  int tap_channels() const { return stages[tap_stage].out_ch; }
  int global_channels() const { return stages.back().out_ch; }

  /// Combined stream feature length for this backbone.
  int stream_dim(Stream s) const {
    return global_channels() +
           (s == Stream::S ? tap_channels() : kParsingRegions * tap_channels());
  }
};

using ToyBackbone = ToyBackboneT<float>;

struct BackboneConfig {
  int in_h = 254, in_w = 128, in_c = 3;
  std::vector<int> channels = {16, 32, 64, 128};
  int kernel = 3;
  int stride = 2;
  int tap_stage = 2;
};

template <typename T>
void validate_backbone(const ToyBackboneT<T>& m) {
  if (m.stages.size() < 2)
    throw std::invalid_argument("backbone: need at least two stages");
  if (m.tap_stage < 0 || m.tap_stage >= static_cast<int>(m.stages.size()) - 1)
    throw std::invalid_argument(
        "backbone: tap stage must be strictly before the final stage");
}

/// Glorot-normal initialized backbone without a classifier.
template <typename T>
ToyBackboneT<T> make_backbone(const BackboneConfig& cfg, Rng& rng) {
  ToyBackboneT<T> m;
  m.in_h = cfg.in_h;
  m.in_w = cfg.in_w;
  m.in_c = cfg.in_c;
  m.tap_stage = cfg.tap_stage;
  int in_ch = cfg.in_c;
  for (int out_ch : cfg.channels) {
    ConvStageT<T> s;
    s.kh = s.kw = cfg.kernel;
    s.stride = cfg.stride;
    s.in_ch = in_ch;
    s.out_ch = out_ch;
    s.weights.resize(static_cast<size_t>(s.kh) * s.kw * in_ch * out_ch);
    s.bias.assign(out_ch, T(0));
    double fan_in = static_cast<double>(s.kh) * s.kw * in_ch;
    double fan_out = static_cast<double>(s.kh) * s.kw * out_ch;
    double std_dev = std::sqrt(2.0 / (fan_in + fan_out));
    for (auto& w : s.weights) w = static_cast<T>(rng.normal() * std_dev);
    m.stages.push_back(std::move(s));
    in_ch = out_ch;
  }
  validate_backbone(m);
  return m;
}

template <typename T>
void attach_classifier(ToyBackboneT<T>& m, int num_classes, Stream stream,
                       Rng& rng) {
  LinearT<T> lin;
  lin.in_dim = m.stream_dim(stream);
  lin.out_dim = num_classes;
  lin.weights.resize(static_cast<size_t>(lin.in_dim) * num_classes);
  lin.bias.assign(num_classes, T(0));
  double std_dev = std::sqrt(2.0 / (lin.in_dim + num_classes));
  for (auto& w : lin.weights) w = static_cast<T>(rng.normal() * std_dev);
  m.classifier = std::move(lin);
  m.has_classifier = true;
}

/// Same-shape model with zeroed parameters, for gradient accumulation.
template <typename T>
ToyBackboneT<T> zeros_like(const ToyBackboneT<T>& m) {
  ToyBackboneT<T> z = m;
  for (auto& s : z.stages) {
    std::fill(s.weights.begin(), s.weights.end(), T(0));
    std::fill(s.bias.begin(), s.bias.end(), T(0));
  }
  std::fill(z.classifier.weights.begin(), z.classifier.weights.end(), T(0));
  std::fill(z.classifier.bias.begin(), z.classifier.bias.end(), T(0));
  return z;
}

/// Flat parameter view in a fixed order (stage weights, stage bias, ...,
/// classifier weights, classifier bias). The optimizer and the finite
/// difference harness share this ordering.
template <typename T>
std::vector<T*> param_ptrs(ToyBackboneT<T>& m) {
  std::vector<T*> out;
  for (auto& s : m.stages) {
    for (auto& w : s.weights) out.push_back(&w);
    for (auto& b : s.bias) out.push_back(&b);
  }
  if (m.has_classifier) {
    for (auto& w : m.classifier.weights) out.push_back(&w);
    for (auto& b : m.classifier.bias) out.push_back(&b);
  }
  return out;
}

template <typename T>
TensorT<T> conv_forward(const ConvStageT<T>& s, const TensorT<T>& in) {
  const int pad_h = (s.kh - 1) / 2, pad_w = (s.kw - 1) / 2;
  const int oh = s.out_size(in.height, s.kh, pad_h);
  const int ow = s.out_size(in.width, s.kw, pad_w);
  TensorT<T> out(oh, ow, s.out_ch);
  std::vector<double> acc(s.out_ch);
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      for (int oc = 0; oc < s.out_ch; ++oc)
        acc[oc] = static_cast<double>(s.bias[oc]);
      for (int ky = 0; ky < s.kh; ++ky) {
        int iy = oy * s.stride - pad_h + ky;
        if (iy < 0 || iy >= in.height) continue;
        for (int kx = 0; kx < s.kw; ++kx) {
          int ix = ox * s.stride - pad_w + kx;
          if (ix < 0 || ix >= in.width) continue;
          const T* px = &in.data[in.index(iy, ix, 0)];
          const T* wrow = &s.weights[s.widx(ky, kx, 0, 0)];
          for (int ic = 0; ic < s.in_ch; ++ic, wrow += s.out_ch) {
            double v = static_cast<double>(px[ic]);
            for (int oc = 0; oc < s.out_ch; ++oc)
              acc[oc] += v * static_cast<double>(wrow[oc]);
          }
        }
      }
      for (int oc = 0; oc < s.out_ch; ++oc)
        out.at(oy, ox, oc) = static_cast<T>(std::tanh(acc[oc]));
    }
  }
  return out;
}

/// Backward through one stage. act is the stage output (post-tanh), grad_act
/// the upstream gradient on it. Accumulates parameter grads and returns the
/// gradient on the stage input.
template <typename T>
TensorT<T> conv_backward(const ConvStageT<T>& s, const TensorT<T>& in,
                         const TensorT<T>& act, const TensorT<T>& grad_act,
                         ConvStageT<T>& grad_s) {
  const int pad_h = (s.kh - 1) / 2, pad_w = (s.kw - 1) / 2;
  TensorT<T> grad_in(in.height, in.width, in.channels);
  std::vector<T> gpre(s.out_ch);
  for (int oy = 0; oy < act.height; ++oy) {
    for (int ox = 0; ox < act.width; ++ox) {
      for (int oc = 0; oc < s.out_ch; ++oc) {
        T a = act.at(oy, ox, oc);
        gpre[oc] = grad_act.at(oy, ox, oc) * (T(1) - a * a);
        grad_s.bias[oc] += gpre[oc];
      }
      for (int ky = 0; ky < s.kh; ++ky) {
        int iy = oy * s.stride - pad_h + ky;
        if (iy < 0 || iy >= in.height) continue;
        for (int kx = 0; kx < s.kw; ++kx) {
          int ix = ox * s.stride - pad_w + kx;
          if (ix < 0 || ix >= in.width) continue;
          const T* px = &in.data[in.index(iy, ix, 0)];
          T* gpx = &grad_in.data[grad_in.index(iy, ix, 0)];
          for (int ic = 0; ic < s.in_ch; ++ic) {
            const T* wrow = &s.weights[s.widx(ky, kx, ic, 0)];
            T* gwrow = &grad_s.weights[s.widx(ky, kx, ic, 0)];
            T v = px[ic];
            T gsum = T(0);
            for (int oc = 0; oc < s.out_ch; ++oc) {
              gwrow[oc] += v * gpre[oc];
              gsum += wrow[oc] * gpre[oc];
            }
            gpx[ic] += gsum;
          }
        }
      }
    }
  }
  return grad_in;
}

/// All stage activations for one image; acts[0] is the input, acts[s+1] the
/// output of stage s.
template <typename T>
struct BackboneActs {
  std::vector<TensorT<T>> acts;

  const TensorT<T>& tap(const ToyBackboneT<T>& m) const {
    return acts[m.tap_stage + 1];
  }
  const TensorT<T>& last() const { return acts.back(); }
};

template <typename T>
BackboneActs<T> backbone_forward(const ToyBackboneT<T>& m, const TensorT<T>& image) {
  if (image.height != m.in_h || image.width != m.in_w || image.channels != m.in_c)
    throw std::invalid_argument("backbone: input shape mismatch");
  BackboneActs<T> cache;
  cache.acts.reserve(m.stages.size() + 1);
  cache.acts.push_back(image);
  for (const auto& s : m.stages)
    cache.acts.push_back(conv_forward(s, cache.acts.back()));
  return cache;
}

template <typename T>
std::vector<T> linear_forward(const LinearT<T>& lin, const std::vector<T>& x) {
  if (static_cast<int>(x.size()) != lin.in_dim)
    throw std::invalid_argument("linear: input dim mismatch");
  std::vector<double> acc(lin.out_dim);
  for (int o = 0; o < lin.out_dim; ++o) acc[o] = static_cast<double>(lin.bias[o]);
  for (int i = 0; i < lin.in_dim; ++i) {
    double v = static_cast<double>(x[i]);
    const T* wrow = &lin.weights[static_cast<size_t>(i) * lin.out_dim];
    for (int o = 0; o < lin.out_dim; ++o)
      acc[o] += v * static_cast<double>(wrow[o]);
  }
  std::vector<T> out(lin.out_dim);
  for (int o = 0; o < lin.out_dim; ++o) out[o] = static_cast<T>(acc[o]);
  return out;
}

template <typename T>
std::vector<T> linear_backward(const LinearT<T>& lin, const std::vector<T>& x,
                               const std::vector<T>& grad_out, LinearT<T>& grad_lin) {
  std::vector<T> grad_x(lin.in_dim, T(0));
  for (int o = 0; o < lin.out_dim; ++o) grad_lin.bias[o] += grad_out[o];
  for (int i = 0; i < lin.in_dim; ++i) {
    const T* wrow = &lin.weights[static_cast<size_t>(i) * lin.out_dim];
    T* gwrow = &grad_lin.weights[static_cast<size_t>(i) * lin.out_dim];
    double gx = 0.0;
    for (int o = 0; o < lin.out_dim; ++o) {
      gwrow[o] += x[i] * grad_out[o];
      gx += static_cast<double>(wrow[o]) * static_cast<double>(grad_out[o]);
    }
    grad_x[i] = static_cast<T>(gx);
  }
  return grad_x;
}

/// Complete per-image stream pass: backbone, guided join, normalized
/// combination, and classifier logits (empty when no classifier is attached).
template <typename T>
struct StreamForwardT {
  std::vector<T> global;
  TensorT<T> tap;
  StreamOutputT<T> stream;
  std::vector<T> logits;
};

template <typename T>
StreamForwardT<T> forward(const ToyBackboneT<T>& m, const TensorT<T>& image,
                          const GuidanceMapT<T>& saliency) {
  BackboneActs<T> cache = backbone_forward(m, image);
  StreamForwardT<T> out;
  out.global = global_avg_pool(cache.last());
  out.tap = cache.tap(m);
  out.stream = stream_output(out.global, saliency_join(out.tap, saliency));
  if (m.has_classifier)
    out.logits = linear_forward(m.classifier, out.stream.combined);
  return out;
}

template <typename T>
StreamForwardT<T> forward(const ToyBackboneT<T>& m, const TensorT<T>& image,
                          const ParsingMapsT<T>& parsing) {
  BackboneActs<T> cache = backbone_forward(m, image);
  StreamForwardT<T> out;
  out.global = global_avg_pool(cache.last());
  out.tap = cache.tap(m);
  out.stream = stream_output(out.global, parsing_join(out.tap, parsing));
  if (m.has_classifier)
    out.logits = linear_forward(m.classifier, out.stream.combined);
  return out;
}

}  // namespace ssp
