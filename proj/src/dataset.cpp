#include "ssp/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ssp/errors.hpp"
#include "ssp/rng.hpp"

namespace ssp {

namespace {

int read_pnm_int(std::istream& in, const std::string& path) {
  int c = in.get();
  while (c != EOF && (std::isspace(c) || c == '#')) {
    if (c == '#')
      while (c != EOF && c != '\n') c = in.get();
    c = in.get();
  }
  if (c == EOF || !std::isdigit(c))
    throw load_error(load_errc::bad_header, path + ": malformed PPM header");
  long v = 0;
  while (c != EOF && std::isdigit(c)) {
    v = v * 10 + (c - '0');
    c = in.get();
  }
  if (c != EOF) in.unget();
  return static_cast<int>(v);
}

}  // namespace

PpmImage read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw load_error(load_errc::missing_file, path + ": cannot open file");
  char m0 = 0, m1 = 0;
  in.get(m0);
  in.get(m1);
  if (m0 != 'P' || m1 != '6')
    throw load_error(load_errc::bad_header, path + ": not a binary PPM (P6)");
  PpmImage img;
  img.width = read_pnm_int(in, path);
  img.height = read_pnm_int(in, path);
  int maxval = read_pnm_int(in, path);
  if (img.width <= 0 || img.height <= 0 || maxval != 255)
    throw load_error(load_errc::bad_header, path + ": bad PPM dimensions/maxval");
  in.get();
  size_t n = static_cast<size_t>(img.width) * img.height * 3;
  img.pixels.resize(n);
  in.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(n));
  if (static_cast<size_t>(in.gcount()) != n)
    throw load_error(load_errc::truncated, path + ": truncated PPM payload");
  return img;
}

void write_ppm(const std::string& path, const PpmImage& img) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw format_error(path + ": cannot open for writing");
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
  if (!out) throw format_error(path + ": write failed");
}

Tensor to_tensor(const PpmImage& img) {
  Tensor t(img.height, img.width, 3);
  for (size_t i = 0; i < img.pixels.size(); ++i)
    t.data[i] = static_cast<float>(img.pixels[i]) / 255.0f - 0.5f;
  return t;
}

const char* split_name(SplitKind s) {
  switch (s) {
    case SplitKind::train: return "train";
    case SplitKind::query: return "query";
    default: return "gallery";
  }
}

SplitKind split_from_name(const std::string& name) {
  if (name == "train") return SplitKind::train;
  if (name == "query") return SplitKind::query;
  if (name == "gallery") return SplitKind::gallery;
  throw format_error("unknown split name '" + name + "'");
}

std::vector<int> SynthDataset::indices_of(SplitKind split) const {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(items.size()); ++i)
    if (items[i].split == split) out.push_back(i);
  return out;
}

namespace {

struct Color {
  double r, g, b;
};

/// Per-identity appearance: geometric layout (map resolution) plus colors.
struct PersonStyle {
  PersonLayout layout;
  Color head, upper, lower, shoes, item;
};

Color jitter(Color c, Rng& rng, double amount) {
  auto clamp01 = [](double v) { return v < 0 ? 0 : (v > 1 ? 1 : v); };
  return {clamp01(c.r + rng.uniform(-amount, amount)),
          clamp01(c.g + rng.uniform(-amount, amount)),
          clamp01(c.b + rng.uniform(-amount, amount))};
}

// Small palette of strong item colors; collisions across identity pairs are
// intentional so the item alone cannot separate everyone.
const Color kItemPalette[] = {
    {0.95, 0.10, 0.10}, {0.10, 0.90, 0.15}, {0.10, 0.20, 0.95},
    {0.95, 0.90, 0.10},
};

// Clothing palette. Body parts draw from a limited set so different
// identities collide per part and global averages mix permuted outfits,
// while the aligned part regions still separate them.
const Color kBodyPalette[] = {
    {0.90, 0.15, 0.15}, {0.15, 0.75, 0.20}, {0.15, 0.25, 0.90},
    {0.90, 0.80, 0.15}, {0.80, 0.20, 0.80}, {0.15, 0.80, 0.80},
};

PersonStyle make_style(int id, Rng& rng, const SynthConfig& cfg) {
  const int mh = cfg.img_h / 2, mw = cfg.img_w / 2;
  PersonStyle st;
  PersonLayout& L = st.layout;
  L.frame_h = mh;
  L.frame_w = mw;

  // Vertical band boundaries with light per-identity jitter.
  int head_top = 1 + rng.uniform_int(0, 1);
  int head_bot = mh / 5 + rng.uniform_int(0, 1);
  int upper_bot = mh / 2 + rng.uniform_int(-1, 1);
  int lower_bot = (5 * mh) / 6 + rng.uniform_int(-1, 0);
  int shoes_bot = mh - 1;

  int body_left = mw / 4 + rng.uniform_int(0, 1);
  int body_right = (3 * mw) / 4 + rng.uniform_int(-1, 0);
  int body_w = std::max(3, body_right - body_left);

  L.head = {head_top, body_left + body_w / 4, head_bot - head_top,
            std::max(2, body_w / 2)};
  L.upper = {head_bot + 1, body_left, upper_bot - head_bot - 1, body_w};
  L.lower = {upper_bot + 1, body_left + 1, lower_bot - upper_bot - 1,
             std::max(2, body_w - 2)};
  L.shoes = {lower_bot + 1, body_left + 1, shoes_bot - lower_bot - 1,
             std::max(2, body_w - 2)};

  // Carried item beside the upper body, outside every part box.
  bool left_side = (id % 4) < 2;
  int item_h = std::max(2, mh / 6);
  int item_w = std::max(2, mw / 5);
  int item_top = head_bot + 2 + rng.uniform_int(0, 1);
  int item_left = left_side ? std::max(0, body_left - item_w)
                            : std::min(mw - item_w, body_left + body_w);
  L.has_salient = true;
  L.salient = {item_top, item_left, item_h, item_w};

  st.head = {0.85, 0.70, 0.55};
  st.upper = kBodyPalette[rng.uniform_int(0, 5)];
  st.lower = kBodyPalette[rng.uniform_int(0, 5)];
  st.shoes = kBodyPalette[rng.uniform_int(0, 5)];
  st.item = kItemPalette[rng.uniform_int(0, 3)];
  return st;
}

void fill_box(PpmImage& img, const Box& box_map_res, Color c, double scale) {
  int top = static_cast<int>(box_map_res.top * scale);
  int left = static_cast<int>(box_map_res.left * scale);
  int bottom = static_cast<int>(box_map_res.bottom() * scale);
  int right = static_cast<int>(box_map_res.right() * scale);
  for (int i = top; i < std::min(bottom, img.height); ++i)
    for (int j = left; j < std::min(right, img.width); ++j) {
      size_t p = (static_cast<size_t>(i) * img.width + j) * 3;
      img.pixels[p] = static_cast<uint8_t>(std::lround(c.r * 255));
      img.pixels[p + 1] = static_cast<uint8_t>(std::lround(c.g * 255));
      img.pixels[p + 2] = static_cast<uint8_t>(std::lround(c.b * 255));
    }
}

PpmImage render_image(const PersonStyle& st, int camera, Rng& rng,
                      const SynthConfig& cfg) {
  PpmImage img;
  img.width = cfg.img_w;
  img.height = cfg.img_h;
  img.pixels.assign(static_cast<size_t>(cfg.img_w) * cfg.img_h * 3, 0);

  Color bg = {0.32 + 0.10 * camera, 0.34, 0.36 - 0.06 * camera};
  fill_box(img, {0, 0, cfg.img_h / 2, cfg.img_w / 2}, bg, 2.0);

  fill_box(img, st.layout.head, st.head, 2.0);
  fill_box(img, st.layout.upper, st.upper, 2.0);
  fill_box(img, st.layout.lower, st.lower, 2.0);
  fill_box(img, st.layout.shoes, st.shoes, 2.0);
  if (st.layout.has_salient) fill_box(img, st.layout.salient, st.item, 2.0);

  // Camera look: brightness drop, mild channel tint, small horizontal shift.
  double brightness = 1.0 - cfg.camera_brightness_step * camera;
  double tint[3] = {1.0 + 0.10 * camera, 1.0, 1.0 - 0.10 * camera};
  int shift = rng.uniform_int(-2, 2);

  PpmImage shifted = img;
  for (int i = 0; i < img.height; ++i)
    for (int j = 0; j < img.width; ++j) {
      int sj = j - shift;
      sj = std::clamp(sj, 0, img.width - 1);
      for (int ch = 0; ch < 3; ++ch)
        shifted.pixels[(static_cast<size_t>(i) * img.width + j) * 3 + ch] =
            img.pixels[(static_cast<size_t>(i) * img.width + sj) * 3 + ch];
    }

  if (rng.uniform() < cfg.occlusion_prob) {
    int oh = rng.uniform_int(cfg.img_h / 4, cfg.img_h / 2);
    int ow = rng.uniform_int(cfg.img_w / 2, cfg.img_w);
    int ot = rng.uniform_int(0, cfg.img_h - oh);
    int ol = rng.uniform_int(0, cfg.img_w - ow);
    // Neutral gray occluder with a per-image level: it hides identity
    // evidence without mimicking any palette color, and varying the level
    // keeps unrelated occluded images from looking alike.
    uint8_t level = static_cast<uint8_t>(rng.uniform_int(60, 180));
    for (int i = ot; i < ot + oh; ++i)
      for (int j = ol; j < ol + ow; ++j) {
        size_t p = (static_cast<size_t>(i) * img.width + j) * 3;
        shifted.pixels[p] = shifted.pixels[p + 1] = shifted.pixels[p + 2] = level;
      }
  }

  for (size_t p = 0; p < shifted.pixels.size(); ++p) {
    double v = shifted.pixels[p] / 255.0;
    v = v * brightness * tint[p % 3] + cfg.noise_std * rng.normal();
    int byte = static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    shifted.pixels[p] = static_cast<uint8_t>(byte);
  }
  return shifted;
}

GuidanceMap quantize_map(const GuidanceMap& m) {
  GuidanceMap out = m;
  for (auto& w : out.weights) {
    int p = static_cast<int>(std::lround(w * 255.0f));
    p = std::clamp(p, 0, 255);
    w = static_cast<float>(p) / 255.0f;
  }
  return out;
}

PgmImage labels_from_layout(const PersonLayout& L) {
  PgmImage img;
  img.width = L.frame_w;
  img.height = L.frame_h;
  img.pixels.assign(static_cast<size_t>(L.frame_w) * L.frame_h, 0);
  const Box* parts[4] = {&L.head, &L.upper, &L.lower, &L.shoes};
  for (int p = 0; p < 4; ++p)
    for (int i = parts[p]->top; i < parts[p]->bottom(); ++i)
      for (int j = parts[p]->left; j < parts[p]->right(); ++j)
        img.pixels[static_cast<size_t>(i) * L.frame_w + j] =
            static_cast<uint8_t>(p + 1);
  return img;
}

}  // namespace

SynthDataset synth_dataset(int num_ids, int images_per_id, uint64_t seed,
                           const SynthConfig& config) {
  if (num_ids < 2 || images_per_id < 2)
    throw std::invalid_argument("synth_dataset: need >= 2 ids and >= 2 images each");
  if (config.num_cameras < 2)
    throw std::invalid_argument("synth_dataset: need >= 2 cameras");
  if (config.img_h < 16 || config.img_w < 8)
    throw std::invalid_argument("synth_dataset: frame too small");
  if (config.img_h % 2 != 0 || config.img_w % 2 != 0)
    throw std::invalid_argument("synth_dataset: frame sides must be even");

  SynthDataset data;
  data.num_ids = num_ids;
  data.images_per_id = images_per_id;
  data.config = config;

  Rng master(seed);
  Rng style_rng = master.fork(1);

  std::vector<PersonStyle> styles;
  styles.reserve(num_ids);
  for (int id = 0; id < num_ids; ++id) {
    if (id % 2 == 0) {
      styles.push_back(make_style(id, style_rng, config));
    } else {
      // Pair partner: same geometry and body colors (lightly jittered),
      // different item color.
      PersonStyle st = styles.back();
      st.upper = jitter(st.upper, style_rng, config.color_jitter);
      st.lower = jitter(st.lower, style_rng, config.color_jitter);
      st.shoes = jitter(st.shoes, style_rng, config.color_jitter);
      Color prev = st.item;
      do {
        st.item = kItemPalette[style_rng.uniform_int(0, 3)];
      } while (st.item.r == prev.r && st.item.g == prev.g && st.item.b == prev.b);
      styles.push_back(st);
    }
  }

  for (int id = 0; id < num_ids; ++id) {
    const PersonStyle& st = styles[id];
    data.prototypes.push_back({
        static_cast<float>(st.head.r), static_cast<float>(st.head.g),
        static_cast<float>(st.head.b), static_cast<float>(st.upper.r),
        static_cast<float>(st.upper.g), static_cast<float>(st.upper.b),
        static_cast<float>(st.lower.r), static_cast<float>(st.lower.g),
        static_cast<float>(st.lower.b), static_cast<float>(st.shoes.r),
        static_cast<float>(st.shoes.g), static_cast<float>(st.shoes.b),
        static_cast<float>(st.item.r), static_cast<float>(st.item.g),
        static_cast<float>(st.item.b),
    });

    for (int k = 0; k < images_per_id; ++k) {
      int camera = k % config.num_cameras;
      uint64_t image_uid = static_cast<uint64_t>(id) * 1000 + k;
      Rng img_rng(master.next_u64() ^ image_uid);

      DatasetItem item;
      item.person_id = static_cast<uint32_t>(id);
      item.camera_id = static_cast<uint16_t>(camera);
      char name[64];
      std::snprintf(name, sizeof name, "id%03d_cam%d_img%03d", id, camera, k);
      item.name = name;

      int half = images_per_id / 2;
      if (k < half)
        item.split = SplitKind::train;
      else
        item.split = camera == 0 ? SplitKind::query : SplitKind::gallery;

      item.ppm = render_image(st, camera, img_rng, config);
      item.image = to_tensor(item.ppm);

      auto [sal, parsing] = synth_maps(st.layout, seed ^ image_uid);
      item.saliency = quantize_map(sal);
      item.parsing = parsing;
      item.parsing_labels = labels_from_layout(st.layout);
      data.items.push_back(std::move(item));
    }
  }
  return data;
}

std::vector<std::string> write_dataset(const SynthDataset& data,
                                       const std::string& dir) {
  std::vector<std::string> files;
  std::string split_path = dir + "/split.csv";
  std::ofstream split(split_path, std::ios::trunc);
  if (!split) throw format_error(split_path + ": cannot open for writing");
  split << "name,person_id,camera_id,split\n";
  for (const auto& item : data.items) {
    write_ppm(dir + "/" + item.name + ".ppm", item.ppm);
    save_saliency(dir + "/" + item.name + "_sal.pgm", item.saliency);
    write_pgm(dir + "/" + item.name + "_parse.pgm", item.parsing_labels);
    files.push_back(item.name + ".ppm");
    files.push_back(item.name + "_sal.pgm");
    files.push_back(item.name + "_parse.pgm");
    split << item.name << ',' << item.person_id << ',' << item.camera_id << ','
          << split_name(item.split) << '\n';
  }
  if (!split) throw format_error(split_path + ": write failed");
  files.push_back("split.csv");
  return files;
}

std::vector<SplitRow> load_split_rows(const std::string& dir) {
  std::string split_path = dir + "/split.csv";
  std::ifstream split(split_path);
  if (!split)
    throw load_error(load_errc::missing_file, split_path + ": cannot open file");
  std::vector<SplitRow> rows;
  std::string line;
  std::getline(split, line);  // header
  if (line != "name,person_id,camera_id,split")
    throw format_error(split_path + ": unexpected header '" + line + "'");
  while (std::getline(split, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string name, person, camera, split_str;
    if (!std::getline(ss, name, ',') || !std::getline(ss, person, ',') ||
        !std::getline(ss, camera, ',') || !std::getline(ss, split_str))
      throw format_error(split_path + ": malformed row '" + line + "'");
    SplitRow row;
    row.name = name;
    row.person_id = static_cast<uint32_t>(std::stoul(person));
    row.camera_id = static_cast<uint16_t>(std::stoul(camera));
    row.split = split_from_name(split_str);
    rows.push_back(std::move(row));
  }
  return rows;
}

SynthDataset load_dataset(const std::string& dir) {
  SynthDataset data;
  for (const SplitRow& row : load_split_rows(dir)) {
    DatasetItem item;
    item.name = row.name;
    item.person_id = row.person_id;
    item.camera_id = row.camera_id;
    item.split = row.split;
    item.ppm = read_ppm(dir + "/" + row.name + ".ppm");
    item.image = to_tensor(item.ppm);
    item.saliency = load_saliency(dir + "/" + row.name + "_sal.pgm");
    item.parsing_labels = read_pgm(dir + "/" + row.name + "_parse.pgm");
    item.parsing = parsing_from_labels(item.parsing_labels);
    data.num_ids = std::max<int>(data.num_ids, item.person_id + 1);
    data.items.push_back(std::move(item));
  }
  return data;
}

}  // namespace ssp
