#include "ssp/guidance.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ssp/errors.hpp"
#include "ssp/rng.hpp"

namespace ssp {

void validate_map(const GuidanceMap& map) {
  if (map.height <= 0 || map.width <= 0)
    throw std::invalid_argument("guidance map has empty shape");
  if (map.weights.size() != static_cast<size_t>(map.height) * map.width)
    throw std::invalid_argument("guidance map payload size mismatch");
  for (float w : map.weights)
    if (!(w >= 0.0f && w <= 1.0f))
      throw std::invalid_argument("guidance map weight outside [0,1]");
}

void validate_parsing(const ParsingMaps& maps) {
  int h = maps.regions[0].height, w = maps.regions[0].width;
  for (const auto& r : maps.regions) {
    validate_map(r);
    if (r.height != h || r.width != w)
      throw std::invalid_argument("parsing regions differ in shape");
  }
  const auto& complete = maps.regions[kCompleteBody];
  for (int r = 0; r < kCompleteBody; ++r)
    for (size_t i = 0; i < complete.weights.size(); ++i)
      if (maps.regions[r].weights[i] > complete.weights[i])
        throw std::invalid_argument(
            "complete-body map not >= region " + std::to_string(r));
}

namespace {

int read_pnm_int(std::istream& in, const std::string& path) {
  // Skips whitespace and '#' comments, per the netpbm header grammar.
  int c = in.get();
  while (c != EOF && (std::isspace(c) || c == '#')) {
    if (c == '#')
      while (c != EOF && c != '\n') c = in.get();
    c = in.get();
  }
  if (c == EOF || !std::isdigit(c))
    throw load_error(load_errc::bad_header, path + ": malformed PGM header");
  long v = 0;
  while (c != EOF && std::isdigit(c)) {
    v = v * 10 + (c - '0');
    if (v > 1 << 30)
      throw load_error(load_errc::bad_header, path + ": header value overflow");
    c = in.get();
  }
  if (c != EOF) in.unget();
  return static_cast<int>(v);
}

}  // namespace

PgmImage read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw load_error(load_errc::missing_file, path + ": cannot open file");
  char m0 = 0, m1 = 0;
  in.get(m0);
  in.get(m1);
  if (m0 != 'P' || m1 != '5')
    throw load_error(load_errc::bad_header, path + ": not a binary PGM (P5)");
  PgmImage img;
  img.width = read_pnm_int(in, path);
  img.height = read_pnm_int(in, path);
  int maxval = read_pnm_int(in, path);
  if (img.width <= 0 || img.height <= 0)
    throw load_error(load_errc::bad_header, path + ": non-positive dimensions");
  if (maxval != 255)
    throw load_error(load_errc::bad_header,
                     path + ": expected maxval 255, got " + std::to_string(maxval));
  in.get();  // single whitespace byte after maxval
  size_t n = static_cast<size_t>(img.width) * img.height;
  img.pixels.resize(n);
  in.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(n));
  if (static_cast<size_t>(in.gcount()) != n)
    throw load_error(load_errc::truncated,
                     path + ": truncated payload, expected " +
                         std::to_string(n) + " bytes, got " +
                         std::to_string(in.gcount()));
  return img;
}

void write_pgm(const std::string& path, const PgmImage& img) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw format_error(path + ": cannot open for writing");
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
  if (!out) throw format_error(path + ": write failed");
}

GuidanceMap load_saliency(const std::string& path) {
  PgmImage img = read_pgm(path);
  GuidanceMap map(img.height, img.width);
  for (size_t i = 0; i < img.pixels.size(); ++i)
    map.weights[i] = static_cast<float>(img.pixels[i]) / 255.0f;
  return map;
}

void save_saliency(const std::string& path, const GuidanceMap& map) {
  PgmImage img;
  img.width = map.width;
  img.height = map.height;
  img.pixels.resize(map.weights.size());
  for (size_t i = 0; i < map.weights.size(); ++i) {
    float v = map.weights[i] * 255.0f;
    int p = static_cast<int>(std::lround(v));
    img.pixels[i] = static_cast<uint8_t>(p < 0 ? 0 : (p > 255 ? 255 : p));
  }
  write_pgm(path, img);
}

ParsingMaps parsing_from_labels(const PgmImage& labels) {
  ParsingMaps maps;
  for (auto& r : maps.regions) r = GuidanceMap(labels.height, labels.width);
  for (int i = 0; i < labels.height; ++i) {
    for (int j = 0; j < labels.width; ++j) {
      uint8_t v = labels.pixels[static_cast<size_t>(i) * labels.width + j];
      if (v >= 5)
        throw load_error(load_errc::bad_value,
                         "parsing label " + std::to_string(int(v)) +
                             " out of range at pixel (row " + std::to_string(i) +
                             ", col " + std::to_string(j) + ")");
      if (v >= 1) maps.regions[v - 1].at(i, j) = 1.0f;
    }
  }
  auto& complete = maps.regions[kCompleteBody];
  for (int r = 0; r < kCompleteBody; ++r)
    for (size_t i = 0; i < complete.weights.size(); ++i)
      complete.weights[i] = std::max(complete.weights[i], maps.regions[r].weights[i]);
  return maps;
}

ParsingMaps load_parsing(const std::string& path) {
  return parsing_from_labels(read_pgm(path));
}

namespace {

void require_inside(const Box& b, int fh, int fw, const char* name) {
  if (b.height < 1 || b.width < 1 || b.top < 0 || b.left < 0 ||
      b.bottom() > fh || b.right() > fw)
    throw std::invalid_argument(std::string("layout box '") + name +
                                "' not inside frame");
}

}  // namespace

std::pair<GuidanceMap, ParsingMaps> synth_maps(const PersonLayout& layout,
                                               uint64_t seed) {
  if (layout.frame_h <= 0 || layout.frame_w <= 0)
    throw std::invalid_argument("layout frame must be positive");
  const Box* parts[4] = {&layout.head, &layout.upper, &layout.lower,
                         &layout.shoes};
  const char* names[4] = {"head", "upper", "lower", "shoes"};
  for (int i = 0; i < 4; ++i)
    require_inside(*parts[i], layout.frame_h, layout.frame_w, names[i]);
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j)
      if (parts[i]->overlaps(*parts[j]))
        throw std::invalid_argument(std::string("part boxes '") + names[i] +
                                    "' and '" + names[j] + "' overlap");
  if (layout.has_salient)
    require_inside(layout.salient, layout.frame_h, layout.frame_w, "salient");

  ParsingMaps parsing;
  for (auto& r : parsing.regions)
    r = GuidanceMap(layout.frame_h, layout.frame_w);
  for (int p = 0; p < 4; ++p) {
    const Box& b = *parts[p];
    for (int i = b.top; i < b.bottom(); ++i)
      for (int j = b.left; j < b.right(); ++j) {
        parsing.regions[p].at(i, j) = 1.0f;
        parsing.regions[kCompleteBody].at(i, j) = 1.0f;
      }
  }

  GuidanceMap sal(layout.frame_h, layout.frame_w);
  if (layout.has_salient) {
    Rng rng(seed);
    double amp = 0.85 + 0.15 * rng.uniform();
    double spread = 0.9 + 0.2 * rng.uniform();
    const Box& b = layout.salient;
    double cy = b.top + (b.height - 1) / 2.0;
    double cx = b.left + (b.width - 1) / 2.0;
    double sy = std::max(1.0, b.height / 2.0) * spread;
    double sx = std::max(1.0, b.width / 2.0) * spread;
    for (int i = 0; i < layout.frame_h; ++i)
      for (int j = 0; j < layout.frame_w; ++j) {
        double dy = (i - cy) / sy;
        double dx = (j - cx) / sx;
        sal.at(i, j) = static_cast<float>(amp * std::exp(-0.5 * (dy * dy + dx * dx)));
      }
  }
  validate_map(sal);
  validate_parsing(parsing);
  return {std::move(sal), std::move(parsing)};
}

}  // namespace ssp
