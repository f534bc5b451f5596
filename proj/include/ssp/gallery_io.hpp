#pragma once

#include <string>
#include <vector>

#include "ssp/retrieval.hpp"

namespace ssp {

/// SSPF gallery file: magic "SSPF", version byte, little-endian u32 count and
/// dim, then per entry a u32 person id, u16 camera id, and dim f32 features.
void save_gallery(const std::string& path, const std::vector<GalleryEntry>& entries);
std::vector<GalleryEntry> load_gallery(const std::string& path);

/// Debug-only text form; the binary format is the interchange contract.
void export_gallery_csv(const std::string& path,
                        const std::vector<GalleryEntry>& entries);

}  // namespace ssp
