#pragma once

#include <string>

#include "ssp/backbone.hpp"

namespace ssp {

/// SSPM checkpoint: magic "SSPM", version byte, record count, input shape
/// header, then per-record shape header + little-endian f32 weights. Conv
/// stages and the optional training classifier are stored as typed records.
void save_checkpoint(const std::string& path, const ToyBackbone& model);
ToyBackbone load_checkpoint(const std::string& path);

}  // namespace ssp
