#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "ssp/dataset.hpp"
#include "ssp/errors.hpp"
#include "ssp/fusion.hpp"
#include "ssp/gallery_io.hpp"
#include "ssp/guidance.hpp"
#include "ssp/manifest.hpp"
#include "ssp/model_io.hpp"
#include "ssp/rerank.hpp"
#include "ssp/retrieval.hpp"
#include "ssp/rng.hpp"
#include "ssp/stream_loss.hpp"
#include "ssp/trainer.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitArgument = 2;
constexpr int kExitFormat = 3;
constexpr int kExitProtocol = 4;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

/// Write through a temp file and rename so failures never leave a partial
/// output at the final path.
template <typename Fn>
void atomic_output(const std::string& path, Fn&& writer) {
  std::string tmp = path + ".tmp";
  writer(tmp);
  fs::rename(tmp, path);
}

ssp::RunManifest base_manifest(const std::string& command, uint64_t seed) {
  ssp::RunManifest m;
  m.tool_version = SSPREID_VERSION;
  m.command = command;
  m.seed = seed;
  return m;
}

void add_dataset_inputs(ssp::RunManifest& m, const std::string& dir,
                        const ssp::SynthDataset& data) {
  m.inputs.emplace_back(dir + "/split.csv", ssp::fnv1a64_file(dir + "/split.csv"));
  for (const auto& item : data.items) {
    for (const char* suffix : {".ppm", "_sal.pgm", "_parse.pgm"}) {
      std::string p = dir + "/" + item.name + suffix;
      m.inputs.emplace_back(p, ssp::fnv1a64_file(p));
    }
  }
}

struct SynthArgs {
  int ids = 20;
  int per_id = 8;
  uint64_t seed = 1;
  std::string out_dir;
  ssp::SynthConfig cfg;
};

int run_synth(const SynthArgs& a) {
  fs::create_directories(a.out_dir);
  ssp::SynthDataset data = ssp::synth_dataset(a.ids, a.per_id, a.seed, a.cfg);
  ssp::write_dataset(data, a.out_dir);

  ssp::RunManifest m = base_manifest("synth", a.seed);
  m.config = {{"ids", std::to_string(a.ids)},
              {"per_id", std::to_string(a.per_id)},
              {"img_h", std::to_string(a.cfg.img_h)},
              {"img_w", std::to_string(a.cfg.img_w)},
              {"cameras", std::to_string(a.cfg.num_cameras)},
              {"occlusion", fmt(a.cfg.occlusion_prob)},
              {"noise", fmt(a.cfg.noise_std)},
              {"out", a.out_dir}};
  ssp::save_manifest(a.out_dir + "/synth.manifest.json", m);
  std::cout << "wrote " << data.items.size() << " images to " << a.out_dir << "\n";
  return kExitOk;
}

struct TrainArgs {
  std::string data_dir;
  std::string stream = "s";
  std::string out_ckpt;
  std::string curve_csv;
  ssp::TrainConfig cfg;
  std::string loss = "cross_plus_triplet";
};

int run_train(const TrainArgs& a) {
  ssp::SynthDataset data = ssp::load_dataset(a.data_dir);
  auto train_idx = data.indices_of(ssp::SplitKind::train);
  if (train_idx.empty()) throw ssp::format_error("train split is empty");

  std::map<uint32_t, int> label_of;
  for (int i : train_idx) label_of.emplace(data.items[i].person_id, 0);
  int next = 0;
  for (auto& [id, label] : label_of) label = next++;

  std::vector<ssp::StreamSample<float>> samples;
  samples.reserve(train_idx.size());
  for (int i : train_idx) {
    const auto& item = data.items[i];
    samples.push_back({item.image, item.saliency, item.parsing,
                       label_of.at(item.person_id)});
  }

  ssp::TrainConfig cfg = a.cfg;
  cfg.loss_mode = a.loss == "cross_only" ? ssp::LossMode::cross_only
                                         : ssp::LossMode::cross_plus_triplet;
  ssp::Stream stream = a.stream == "s" ? ssp::Stream::S : ssp::Stream::SP;

  ssp::BackboneConfig bc;
  bc.in_h = samples[0].image.height;
  bc.in_w = samples[0].image.width;
  bc.in_c = samples[0].image.channels;
  ssp::Rng init_rng(cfg.seed ^ 0xB0BACAFEULL);
  ssp::ToyBackbone model = ssp::make_backbone<float>(bc, init_rng);

  ssp::TrainResult result =
      ssp::train_stream(model, samples, next, cfg, stream);

  atomic_output(a.out_ckpt, [&](const std::string& tmp) {
    ssp::save_checkpoint(tmp, result.model);
  });
  if (!a.curve_csv.empty())
    atomic_output(a.curve_csv, [&](const std::string& tmp) {
      ssp::write_loss_csv(tmp, result.curve, cfg.loss_mode);
    });

  ssp::RunManifest m = base_manifest("train-toy", cfg.seed);
  m.config = {{"data", a.data_dir},
              {"stream", a.stream},
              {"loss", a.loss},
              {"epochs", std::to_string(cfg.epochs)},
              {"lr", fmt(cfg.learning_rate)},
              {"weight_decay", fmt(cfg.weight_decay)},
              {"lr_decay_factor", fmt(cfg.lr_decay_factor)},
              {"lr_decay_every", std::to_string(cfg.lr_decay_every)},
              {"batch_people", std::to_string(cfg.batch_people)},
              {"images_per_person", std::to_string(cfg.images_per_person)},
              {"epsilon", fmt(cfg.epsilon)},
              {"margin", fmt(cfg.margin)},
              {"out", a.out_ckpt}};
  add_dataset_inputs(m, a.data_dir, data);
  ssp::save_manifest(a.out_ckpt + ".manifest.json", m);

  if (!result.curve.empty())
    std::cout << "final epoch crosse " << fmt(result.curve.back().crosse)
              << " trip " << fmt(result.curve.back().trip) << "\n";
  std::cout << "checkpoint " << a.out_ckpt << "\n";
  return kExitOk;
}

struct FuseArgs {
  std::string data_dir;
  std::string split = "all";
  std::string stream = "ssp";
  std::string ckpt_s, ckpt_sp;
  std::string out;
  int threads = 1;
};

int run_fuse(const FuseArgs& a) {
  if ((a.stream == "s" || a.stream == "ssp") && a.ckpt_s.empty())
    throw CLI::ValidationError("--ckpt-s is required for stream " + a.stream);
  if ((a.stream == "sp" || a.stream == "ssp") && a.ckpt_sp.empty())
    throw CLI::ValidationError("--ckpt-sp is required for stream " + a.stream);

  // Load everything up front, reporting every unreadable input at once and
  // aborting before any output is written.
  auto rows = ssp::load_split_rows(a.data_dir);
  std::vector<ssp::SplitRow> selected;
  for (const auto& row : rows)
    if (a.split == "all" || row.split == ssp::split_from_name(a.split))
      selected.push_back(row);
  if (selected.empty()) throw ssp::format_error("no images in split " + a.split);

  struct Loaded {
    ssp::Tensor image;
    ssp::GuidanceMap saliency;
    ssp::ParsingMaps parsing;
  };
  std::vector<Loaded> inputs(selected.size());
  std::vector<std::string> bad_inputs;
  for (size_t n = 0; n < selected.size(); ++n) {
    const std::string base = a.data_dir + "/" + selected[n].name;
    try {
      inputs[n].image = ssp::to_tensor(ssp::read_ppm(base + ".ppm"));
      if (a.stream != "sp")
        inputs[n].saliency = ssp::load_saliency(base + "_sal.pgm");
      if (a.stream != "s")
        inputs[n].parsing = ssp::load_parsing(base + "_parse.pgm");
    } catch (const ssp::format_error& e) {
      bad_inputs.push_back(e.what());
    }
  }
  if (!bad_inputs.empty()) {
    for (const auto& msg : bad_inputs) std::cerr << "input error: " << msg << "\n";
    throw ssp::format_error(std::to_string(bad_inputs.size()) +
                            " unreadable input file(s); no output written");
  }

  ssp::ToyBackbone model_s, model_sp;
  if (!a.ckpt_s.empty()) model_s = ssp::load_checkpoint(a.ckpt_s);
  if (!a.ckpt_sp.empty()) model_sp = ssp::load_checkpoint(a.ckpt_sp);

  std::vector<ssp::GalleryEntry> entries(selected.size());
  ssp::detail::parallel_over(
      static_cast<int>(selected.size()), a.threads, [&](int n) {
        const auto& in = inputs[n];
        ssp::FeatureVector feature;
        if (a.stream == "s") {
          feature = ssp::forward(model_s, in.image, in.saliency).stream.combined;
        } else if (a.stream == "sp") {
          feature = ssp::forward(model_sp, in.image, in.parsing).stream.combined;
        } else {
          auto s_out = ssp::forward(model_s, in.image, in.saliency);
          auto sp_out = ssp::forward(model_sp, in.image, in.parsing);
          feature = ssp::ssp_combine(s_out.stream, sp_out.stream);
        }
        entries[n] = {selected[n].person_id, selected[n].camera_id,
                      std::move(feature)};
      });

  atomic_output(a.out, [&](const std::string& tmp) {
    ssp::save_gallery(tmp, entries);
  });

  ssp::RunManifest m = base_manifest("fuse", 0);
  m.config = {{"data", a.data_dir},
              {"split", a.split},
              {"stream", a.stream},
              {"ckpt_s", a.ckpt_s},
              {"ckpt_sp", a.ckpt_sp},
              {"out", a.out}};
  m.inputs.emplace_back(a.data_dir + "/split.csv",
                        ssp::fnv1a64_file(a.data_dir + "/split.csv"));
  for (const auto& row : selected) {
    const std::string base = a.data_dir + "/" + row.name;
    m.inputs.emplace_back(base + ".ppm", ssp::fnv1a64_file(base + ".ppm"));
    if (a.stream != "sp")
      m.inputs.emplace_back(base + "_sal.pgm",
                            ssp::fnv1a64_file(base + "_sal.pgm"));
    if (a.stream != "s")
      m.inputs.emplace_back(base + "_parse.pgm",
                            ssp::fnv1a64_file(base + "_parse.pgm"));
  }
  if (!a.ckpt_s.empty())
    m.inputs.emplace_back(a.ckpt_s, ssp::fnv1a64_file(a.ckpt_s));
  if (!a.ckpt_sp.empty())
    m.inputs.emplace_back(a.ckpt_sp, ssp::fnv1a64_file(a.ckpt_sp));
  ssp::save_manifest(a.out + ".manifest.json", m);

  std::cout << "wrote " << entries.size() << " features (dim "
            << (entries.empty() ? 0 : entries[0].feature.size()) << ") to "
            << a.out << "\n";
  return kExitOk;
}

struct EvalArgs {
  std::string query_path, gallery_path;
  std::string protocol = "market";
  int max_rank = 50;
  bool use_rerank = false;
  ssp::RerankConfig rr;
  std::string manifest_path = "eval.manifest.json";
  std::string report_path;
};

int run_eval(const EvalArgs& a) {
  auto queries = ssp::load_gallery(a.query_path);
  auto gallery = ssp::load_gallery(a.gallery_path);
  if (queries.empty()) throw ssp::protocol_error("query set is empty");
  ssp::Protocol protocol =
      a.protocol == "none" ? ssp::Protocol::none : ssp::Protocol::market;

  ssp::EvalReport report;
  if (a.use_rerank) {
    std::vector<ssp::FeatureVector> qf, gf;
    for (auto& e : queries) qf.push_back(e.feature);
    for (auto& e : gallery) gf.push_back(e.feature);
    ssp::RerankConfig cfg = ssp::clamp_rerank_config(
        a.rr, static_cast<int>(qf.size()), static_cast<int>(gf.size()));
    if (cfg.k1 != a.rr.k1 || cfg.k2 != a.rr.k2)
      std::cerr << "warning: clamped k1/k2 to " << cfg.k1 << "/" << cfg.k2
                << " for this gallery size\n";
    ssp::DistMatrix dist = ssp::rerank(qf, gf, cfg);
    report = ssp::evaluate_with_distances(queries, gallery, dist, protocol,
                                          a.max_rank);
  } else {
    report = ssp::evaluate(queries, gallery, protocol, a.max_rank);
  }

  std::ostringstream text;
  text << "map " << fmt(report.map) << "\n";
  text << "rank1 " << fmt(report.rank1()) << "\n";
  for (int r = 1; r <= a.max_rank; ++r)
    text << "cmc[" << r << "] " << fmt(report.cmc[r - 1]) << "\n";
  text << "evaluated_queries " << report.evaluated_queries << "\n";
  text << "skipped_queries " << report.skipped_queries << "\n";
  std::cout << text.str();
  if (!a.report_path.empty())
    atomic_output(a.report_path, [&](const std::string& tmp) {
      std::ofstream out(tmp, std::ios::trunc);
      out << text.str();
      if (!out) throw ssp::format_error(tmp + ": write failed");
    });

  ssp::RunManifest m = base_manifest("eval", 0);
  m.config = {{"query", a.query_path},
              {"gallery", a.gallery_path},
              {"protocol", a.protocol},
              {"max_rank", std::to_string(a.max_rank)},
              {"rerank", a.use_rerank ? "true" : "false"},
              {"k1", std::to_string(a.rr.k1)},
              {"k2", std::to_string(a.rr.k2)},
              {"lambda", fmt(a.rr.lambda)}};
  m.inputs.emplace_back(a.query_path, ssp::fnv1a64_file(a.query_path));
  m.inputs.emplace_back(a.gallery_path, ssp::fnv1a64_file(a.gallery_path));
  ssp::save_manifest(a.manifest_path, m);
  return kExitOk;
}

struct RerankArgs {
  std::string query_path, gallery_path, out;
  ssp::RerankConfig rr;
};

int run_rerank(const RerankArgs& a) {
  auto queries = ssp::load_gallery(a.query_path);
  auto gallery = ssp::load_gallery(a.gallery_path);
  std::vector<ssp::FeatureVector> qf, gf;
  for (auto& e : queries) qf.push_back(e.feature);
  for (auto& e : gallery) gf.push_back(e.feature);
  ssp::RerankConfig cfg = ssp::clamp_rerank_config(
      a.rr, static_cast<int>(qf.size()), static_cast<int>(gf.size()));
  if (cfg.k1 != a.rr.k1 || cfg.k2 != a.rr.k2)
    std::cerr << "warning: clamped k1/k2 to " << cfg.k1 << "/" << cfg.k2
              << " for this gallery size\n";
  ssp::DistMatrix dist = ssp::rerank(qf, gf, cfg);

  atomic_output(a.out, [&](const std::string& tmp) {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw ssp::format_error(tmp + ": cannot open for writing");
    for (int i = 0; i < dist.rows; ++i) {
      for (int j = 0; j < dist.cols; ++j)
        out << (j ? "," : "") << fmt(dist.at(i, j));
      out << "\n";
    }
    if (!out) throw ssp::format_error(tmp + ": write failed");
  });

  ssp::RunManifest m = base_manifest("rerank", 0);
  m.config = {{"query", a.query_path},
              {"gallery", a.gallery_path},
              {"k1", std::to_string(a.rr.k1)},
              {"k2", std::to_string(a.rr.k2)},
              {"lambda", fmt(a.rr.lambda)},
              {"out", a.out}};
  m.inputs.emplace_back(a.query_path, ssp::fnv1a64_file(a.query_path));
  m.inputs.emplace_back(a.gallery_path, ssp::fnv1a64_file(a.gallery_path));
  ssp::save_manifest(a.out + ".manifest.json", m);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stream guided re-identification toolkit"};
  app.set_version_flag("--version", SSPREID_VERSION);
  app.require_subcommand(1);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth_cmd->add_option("--ids", synth.ids, "Number of identities")
      ->check(CLI::Range(2, 100000));
  synth_cmd->add_option("--per-id", synth.per_id, "Images per identity")
      ->check(CLI::Range(2, 100000));
  synth_cmd->add_option("--seed", synth.seed, "Master seed");
  synth_cmd->add_option("--out", synth.out_dir, "Output directory")->required();
  synth_cmd->add_option("--img-h", synth.cfg.img_h, "Image height");
  synth_cmd->add_option("--img-w", synth.cfg.img_w, "Image width");
  synth_cmd->add_option("--cameras", synth.cfg.num_cameras, "Simulated cameras");
  synth_cmd->add_option("--occlusion", synth.cfg.occlusion_prob,
                        "Occlusion probability");
  synth_cmd->add_option("--noise", synth.cfg.noise_std, "Pixel noise stddev");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train-toy", "Train one toy stream");
  train_cmd->add_option("--data", train.data_dir, "Dataset directory")->required();
  train_cmd->add_option("--stream", train.stream, "Stream to train")
      ->check(CLI::IsMember({"s", "sp"}));
  train_cmd->add_option("--out", train.out_ckpt, "Checkpoint path")->required();
  train_cmd->add_option("--curve", train.curve_csv, "Loss curve CSV path");
  train_cmd->add_option("--seed", train.cfg.seed, "Training seed");
  train_cmd->add_option("--epochs", train.cfg.epochs, "Training epochs")
      ->check(CLI::Range(0, 100000));
  train_cmd->add_option("--lr", train.cfg.learning_rate, "Initial learning rate");
  train_cmd->add_option("--weight-decay", train.cfg.weight_decay, "Weight decay");
  train_cmd->add_option("--lr-decay-factor", train.cfg.lr_decay_factor,
                        "LR decay factor");
  train_cmd->add_option("--lr-decay-every", train.cfg.lr_decay_every,
                        "Epochs between LR decays");
  train_cmd->add_option("--batch-people", train.cfg.batch_people, "P");
  train_cmd->add_option("--images-per-person", train.cfg.images_per_person, "N");
  train_cmd->add_option("--epsilon", train.cfg.epsilon, "Label smoothing");
  train_cmd->add_option("--margin", train.cfg.margin, "Triplet margin");
  train_cmd->add_option("--loss", train.loss, "Loss mode")
      ->check(CLI::IsMember({"cross_only", "cross_plus_triplet"}));
  train_cmd->add_option("--threads", train.cfg.threads, "Worker threads");

  FuseArgs fuse;
  auto* fuse_cmd = app.add_subcommand("fuse", "Compute features for a dataset");
  fuse_cmd->add_option("--data", fuse.data_dir, "Dataset directory")->required();
  fuse_cmd->add_option("--split", fuse.split, "Split to fuse")
      ->check(CLI::IsMember({"train", "query", "gallery", "all"}));
  fuse_cmd->add_option("--stream", fuse.stream, "Feature stream")
      ->check(CLI::IsMember({"s", "sp", "ssp"}));
  fuse_cmd->add_option("--ckpt-s", fuse.ckpt_s, "Saliency-stream checkpoint");
  fuse_cmd->add_option("--ckpt-sp", fuse.ckpt_sp, "Parsing-stream checkpoint");
  fuse_cmd->add_option("--out", fuse.out, "Output gallery file")->required();
  fuse_cmd->add_option("--threads", fuse.threads, "Worker threads");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate query against gallery");
  eval_cmd->add_option("--query", eval.query_path, "Query SSPF file")->required();
  eval_cmd->add_option("--gallery", eval.gallery_path, "Gallery SSPF file")
      ->required();
  eval_cmd->add_option("--protocol", eval.protocol, "Evaluation protocol")
      ->check(CLI::IsMember({"market", "none"}));
  eval_cmd->add_option("--max-rank", eval.max_rank, "CMC table depth")
      ->check(CLI::Range(1, 100000));
  eval_cmd->add_flag("--rerank", eval.use_rerank, "Re-rank before evaluating");
  eval_cmd->add_option("--k1", eval.rr.k1, "Reciprocal neighborhood size");
  eval_cmd->add_option("--k2", eval.rr.k2, "Expansion neighborhood size");
  eval_cmd->add_option("--lambda", eval.rr.lambda, "Original-distance weight");
  eval_cmd->add_option("--manifest", eval.manifest_path, "Manifest path");
  eval_cmd->add_option("--report", eval.report_path, "Also write report here");

  RerankArgs rr;
  auto* rr_cmd = app.add_subcommand("rerank", "Write a re-ranked distance matrix");
  rr_cmd->add_option("--query", rr.query_path, "Query SSPF file")->required();
  rr_cmd->add_option("--gallery", rr.gallery_path, "Gallery SSPF file")->required();
  rr_cmd->add_option("--k1", rr.rr.k1, "Reciprocal neighborhood size");
  rr_cmd->add_option("--k2", rr.rr.k2, "Expansion neighborhood size");
  rr_cmd->add_option("--lambda", rr.rr.lambda, "Original-distance weight");
  rr_cmd->add_option("--out", rr.out, "Output CSV path")->required();

  try {
    app.parse(argc, argv);
    if (synth_cmd->parsed()) return run_synth(synth);
    if (train_cmd->parsed()) return run_train(train);
    if (fuse_cmd->parsed()) return run_fuse(fuse);
    if (eval_cmd->parsed()) return run_eval(eval);
    if (rr_cmd->parsed()) return run_rerank(rr);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? kExitOk : kExitArgument;
  } catch (const ssp::protocol_error& e) {
    std::cerr << "protocol error: " << e.what() << "\n";
    return kExitProtocol;
  } catch (const ssp::format_error& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kExitFormat;
  } catch (const std::invalid_argument& e) {
    std::cerr << "argument error: " << e.what() << "\n";
    return kExitArgument;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
