#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ssp/guidance.hpp"
#include "ssp/tensor.hpp"

namespace ssp {

/// Binary PPM (P6, maxval 255) — the image companion to the PGM maps.
struct PpmImage {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> pixels;  // row-major, interleaved RGB
};

PpmImage read_ppm(const std::string& path);
void write_ppm(const std::string& path, const PpmImage& img);

/// Byte image to float tensor, pixel p -> p/255 - 0.5.
Tensor to_tensor(const PpmImage& img);

enum class SplitKind { train, query, gallery };

const char* split_name(SplitKind s);
SplitKind split_from_name(const std::string& name);

struct SynthConfig {
  int img_h = 64;
  int img_w = 32;  // maps are emitted at half resolution
  int num_cameras = 2;
  double occlusion_prob = 0.5;
  double noise_std = 0.03;
  double camera_brightness_step = 0.22;  // brightness drop per camera index
  double color_jitter = 0.04;            // within-pair body color jitter
};

struct DatasetItem {
  std::string name;  // file stem, e.g. id003_cam1_img005
  uint32_t person_id = 0;
  uint16_t camera_id = 0;
  SplitKind split = SplitKind::train;
  PpmImage ppm;
  Tensor image;          // to_tensor(ppm)
  GuidanceMap saliency;  // quantized to the PGM grid
  ParsingMaps parsing;
  PgmImage parsing_labels;
};

struct SynthDataset {
  int num_ids = 0;
  int images_per_id = 0;
  SynthConfig config;
  std::vector<DatasetItem> items;
  /// Ground-truth identity color prototype (head/upper/lower/shoes/item RGB),
  /// the "perfect oracle" feature for sanity checks.
  std::vector<FeatureVector> prototypes;

  std::vector<int> indices_of(SplitKind split) const;
};

/// Deterministic desk-scale benchmark. Identities come in pairs that share
/// body colors but differ in the color of a salient carried item drawn from
/// a small palette, so the saliency and parsing clues resolve different
/// confusions. Images vary by camera (brightness/shift), occlusion, and
/// pixel noise; maps describe the unoccluded layout. Camera 0 images outside
/// the train split become queries, all other cameras become gallery.
SynthDataset synth_dataset(int num_ids, int images_per_id, uint64_t seed,
                           const SynthConfig& config = {});

/// Writes images, both PGM map kinds, and split.csv into dir (which must
/// exist). Returns the emitted file names relative to dir.
std::vector<std::string> write_dataset(const SynthDataset& data,
                                       const std::string& dir);

/// Loads what write_dataset produced (split.csv plus per-item files).
SynthDataset load_dataset(const std::string& dir);

/// One split.csv row, before any image or map file is touched.
struct SplitRow {
  std::string name;
  uint32_t person_id = 0;
  uint16_t camera_id = 0;
  SplitKind split = SplitKind::train;
};

std::vector<SplitRow> load_split_rows(const std::string& dir);

}  // namespace ssp
