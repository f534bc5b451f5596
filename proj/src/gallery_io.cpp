#include "ssp/gallery_io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

#include "ssp/binio.hpp"
#include "ssp/errors.hpp"

namespace ssp {

namespace {
constexpr char kMagic[4] = {'S', 'S', 'P', 'F'};
constexpr uint8_t kVersion = 1;
}  // namespace

void save_gallery(const std::string& path,
                  const std::vector<GalleryEntry>& entries) {
  size_t dim = entries.empty() ? 0 : entries[0].feature.size();
  for (const auto& e : entries)
    if (e.feature.size() != dim)
      throw std::invalid_argument("save_gallery: non-uniform feature dims");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw format_error(path + ": cannot open for writing");
  out.write(kMagic, 4);
  binio::put_u8(out, kVersion);
  binio::put_u32(out, static_cast<uint32_t>(entries.size()));
  binio::put_u32(out, static_cast<uint32_t>(dim));
  for (const auto& e : entries) {
    binio::put_u32(out, e.person_id);
    binio::put_u16(out, e.camera_id);
    for (float f : e.feature) binio::put_f32(out, f);
  }
  if (!out) throw format_error(path + ": write failed");
}

std::vector<GalleryEntry> load_gallery(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw load_error(load_errc::missing_file, path + ": cannot open file");
  char magic[4];
  binio::read_bytes(in, magic, 4, path);
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw load_error(load_errc::bad_header, path + ": bad gallery magic");
  uint8_t version = binio::get_u8(in, path);
  if (version != kVersion)
    throw load_error(load_errc::bad_header,
                     path + ": unsupported gallery version " +
                         std::to_string(int(version)));
  uint32_t count = binio::get_u32(in, path);
  uint32_t dim = binio::get_u32(in, path);
  std::vector<GalleryEntry> entries(count);
  for (auto& e : entries) {
    e.person_id = binio::get_u32(in, path);
    e.camera_id = binio::get_u16(in, path);
    e.feature.resize(dim);
    for (auto& f : e.feature) f = binio::get_f32(in, path);
  }
  // Trailing garbage means the declared count does not match the payload.
  if (in.peek() != EOF)
    throw load_error(load_errc::bad_header,
                     path + ": payload exceeds declared entry count");
  return entries;
}

void export_gallery_csv(const std::string& path,
                        const std::vector<GalleryEntry>& entries) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw format_error(path + ": cannot open for writing");
  out << "person_id,camera_id,features...\n";
  char buf[48];
  for (const auto& e : entries) {
    out << e.person_id << ',' << e.camera_id;
    for (float f : e.feature) {
      std::snprintf(buf, sizeof buf, ",%.9g", static_cast<double>(f));
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace ssp
