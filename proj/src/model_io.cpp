#include "ssp/model_io.hpp"

#include <fstream>

#include "ssp/binio.hpp"
#include "ssp/errors.hpp"

namespace ssp {

namespace {
constexpr char kMagic[4] = {'S', 'S', 'P', 'M'};
constexpr uint8_t kVersion = 1;
constexpr uint8_t kConvRecord = 0;
constexpr uint8_t kLinearRecord = 1;
}  // namespace

void save_checkpoint(const std::string& path, const ToyBackbone& model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw format_error(path + ": cannot open for writing");
  out.write(kMagic, 4);
  binio::put_u8(out, kVersion);
  uint8_t records =
      static_cast<uint8_t>(model.stages.size() + (model.has_classifier ? 1 : 0));
  binio::put_u8(out, records);
  binio::put_u16(out, static_cast<uint16_t>(model.in_h));
  binio::put_u16(out, static_cast<uint16_t>(model.in_w));
  binio::put_u16(out, static_cast<uint16_t>(model.in_c));
  binio::put_u8(out, static_cast<uint8_t>(model.tap_stage));

  for (const auto& s : model.stages) {
    binio::put_u8(out, kConvRecord);
    binio::put_u16(out, static_cast<uint16_t>(s.kh));
    binio::put_u16(out, static_cast<uint16_t>(s.kw));
    binio::put_u16(out, static_cast<uint16_t>(s.in_ch));
    binio::put_u16(out, static_cast<uint16_t>(s.out_ch));
    binio::put_u16(out, static_cast<uint16_t>(s.stride));
    for (float w : s.weights) binio::put_f32(out, w);
    for (float b : s.bias) binio::put_f32(out, b);
  }
  if (model.has_classifier) {
    binio::put_u8(out, kLinearRecord);
    binio::put_u32(out, static_cast<uint32_t>(model.classifier.in_dim));
    binio::put_u32(out, static_cast<uint32_t>(model.classifier.out_dim));
    for (float w : model.classifier.weights) binio::put_f32(out, w);
    for (float b : model.classifier.bias) binio::put_f32(out, b);
  }
  if (!out) throw format_error(path + ": write failed");
}

ToyBackbone load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw load_error(load_errc::missing_file, path + ": cannot open file");
  char magic[4];
  binio::read_bytes(in, magic, 4, path);
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw load_error(load_errc::bad_header, path + ": bad checkpoint magic");
  uint8_t version = binio::get_u8(in, path);
  if (version != kVersion)
    throw load_error(load_errc::bad_header,
                     path + ": unsupported checkpoint version " +
                         std::to_string(int(version)));
  uint8_t records = binio::get_u8(in, path);

  ToyBackbone m;
  m.in_h = binio::get_u16(in, path);
  m.in_w = binio::get_u16(in, path);
  m.in_c = binio::get_u16(in, path);
  m.tap_stage = binio::get_u8(in, path);
  m.stages.clear();
  m.has_classifier = false;

  for (int r = 0; r < records; ++r) {
    uint8_t kind = binio::get_u8(in, path);
    if (kind == kConvRecord) {
      if (m.has_classifier)
        throw load_error(load_errc::bad_header,
                         path + ": conv record after classifier");
      ConvStageT<float> s;
      s.kh = binio::get_u16(in, path);
      s.kw = binio::get_u16(in, path);
      s.in_ch = binio::get_u16(in, path);
      s.out_ch = binio::get_u16(in, path);
      s.stride = binio::get_u16(in, path);
      if (s.kh < 1 || s.kw < 1 || s.in_ch < 1 || s.out_ch < 1 || s.stride < 1)
        throw load_error(load_errc::bad_header, path + ": bad stage shape");
      s.weights.resize(static_cast<size_t>(s.kh) * s.kw * s.in_ch * s.out_ch);
      s.bias.resize(s.out_ch);
      for (auto& w : s.weights) w = binio::get_f32(in, path);
      for (auto& b : s.bias) b = binio::get_f32(in, path);
      m.stages.push_back(std::move(s));
    } else if (kind == kLinearRecord) {
      LinearT<float> lin;
      lin.in_dim = static_cast<int>(binio::get_u32(in, path));
      lin.out_dim = static_cast<int>(binio::get_u32(in, path));
      if (lin.in_dim < 1 || lin.out_dim < 1)
        throw load_error(load_errc::bad_header, path + ": bad classifier shape");
      lin.weights.resize(static_cast<size_t>(lin.in_dim) * lin.out_dim);
      lin.bias.resize(lin.out_dim);
      for (auto& w : lin.weights) w = binio::get_f32(in, path);
      for (auto& b : lin.bias) b = binio::get_f32(in, path);
      m.classifier = std::move(lin);
      m.has_classifier = true;
    } else {
      throw load_error(load_errc::bad_header,
                       path + ": unknown record kind " + std::to_string(int(kind)));
    }
  }
  validate_backbone(m);
  return m;
}

}  // namespace ssp
