#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ssp/tensor.hpp"

namespace ssp {

/// Fixed region order for the five-part semantic parsing stack.
enum ParsingRegion : int {
  kHead = 0,
  kUpperBody = 1,
  kLowerBody = 2,
  kShoes = 3,
  kCompleteBody = 4,
};

constexpr int kParsingRegions = 5;

/// Five guidance maps of identical shape, ordered
/// (head, upper body, lower body, shoes, complete body).
/// The complete-body map is the pointwise max of the other four.
template <typename T>
struct ParsingMapsT {
  std::array<GuidanceMapT<T>, kParsingRegions> regions;

  int height() const { return regions[0].height; }
  int width() const { return regions[0].width; }
};

using ParsingMaps = ParsingMapsT<float>;

/// Throws std::invalid_argument unless weights lie in [0,1] and shape matches.
void validate_map(const GuidanceMap& map);
void validate_parsing(const ParsingMaps& maps);

template <typename To, typename From>
GuidanceMapT<To> map_cast(const GuidanceMapT<From>& m) {
  GuidanceMapT<To> out(m.height, m.width);
  for (size_t i = 0; i < m.weights.size(); ++i)
    out.weights[i] = static_cast<To>(m.weights[i]);
  return out;
}

template <typename To, typename From>
ParsingMapsT<To> parsing_cast(const ParsingMapsT<From>& m) {
  ParsingMapsT<To> out;
  for (int r = 0; r < kParsingRegions; ++r)
    out.regions[r] = map_cast<To>(m.regions[r]);
  return out;
}

// ---------------------------------------------------------------------------
// Binary PGM ("P5", maxval 255) is the on-disk form for both map kinds.
// Saliency: pixel p encodes weight p/255.
// Parsing: pixel is a region label, 0=background 1=head 2=upper 3=lower
// 4=shoes; anything >= 5 is a format error.
// ---------------------------------------------------------------------------

struct PgmImage {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> pixels;  // row-major
};

PgmImage read_pgm(const std::string& path);
void write_pgm(const std::string& path, const PgmImage& img);

GuidanceMap load_saliency(const std::string& path);
void save_saliency(const std::string& path, const GuidanceMap& map);

ParsingMaps load_parsing(const std::string& path);
ParsingMaps parsing_from_labels(const PgmImage& labels);

// ---------------------------------------------------------------------------
// Synthetic layouts stand in for the external saliency / parsing detectors.
// ---------------------------------------------------------------------------

struct Box {
  int top = 0;
  int left = 0;
  int height = 0;
  int width = 0;

  int bottom() const { return top + height; }
  int right() const { return left + width; }
  bool overlaps(const Box& o) const {
    return top < o.bottom() && o.top < bottom() && left < o.right() &&
           o.left < right();
  }
};

/// Rectangular body-part boxes inside a frame, at map resolution. The four
/// part boxes must not overlap; the salient box may overlap anything (a bag
/// sits on top of the upper body).
struct PersonLayout {
  int frame_h = 0;
  int frame_w = 0;
  Box head, upper, lower, shoes;
  bool has_salient = false;
  Box salient;
};

/// Deterministic map pair for a layout: parsing maps are the box indicators
/// (complete body = union), saliency is a smooth bump centered on the salient
/// box. Same (layout, seed) gives bitwise-identical output.
std::pair<GuidanceMap, ParsingMaps> synth_maps(const PersonLayout& layout,
                                               uint64_t seed);

}  // namespace ssp
