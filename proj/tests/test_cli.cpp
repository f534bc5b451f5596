#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "ssp/gallery_io.hpp"
#include "ssp/manifest.hpp"

namespace fs = std::filesystem;

namespace {

std::string cli_path() {
  const char* p = std::getenv("SSPREID_CLI");
  REQUIRE_MESSAGE(p != nullptr, "SSPREID_CLI must point at the CLI binary");
  return p;
}

struct CliResult {
  int code = -1;
  std::string out;
};

CliResult run_cli(const std::string& args, const std::string& tag) {
  auto dir = fs::temp_directory_path() / "ssp_cli_tests";
  fs::create_directories(dir);
  std::string out_file = (dir / (tag + ".out")).string();
  std::string cmd = cli_path() + " " + args + " > " + out_file + " 2>&1";
  int raw = std::system(cmd.c_str());
  CliResult r;
  r.code = raw < 0 ? raw : WEXITSTATUS(raw);
  std::ifstream in(out_file);
  std::ostringstream ss;
  ss << in.rdbuf();
  r.out = ss.str();
  return r;
}

std::string work_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / "ssp_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

double parse_metric(const std::string& text, const std::string& key) {
  std::istringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    if (line.rfind(key + " ", 0) == 0)
      return std::stod(line.substr(key.size() + 1));
  }
  FAIL(("metric not found: " + key + " in:\n" + text));
  return -1;
}

}  // namespace

TEST_CASE("synth emits the expected files and a coherent split") {
  std::string dir = work_dir("synth");
  auto r = run_cli("synth --ids 5 --per-id 4 --seed 3 --out " + dir + "/data",
                   "synth");
  REQUIRE(r.code == 0);

  int ppm = 0, sal = 0, parse = 0;
  for (const auto& e : fs::directory_iterator(dir + "/data")) {
    std::string name = e.path().filename().string();
    if (name.ends_with("_sal.pgm")) ++sal;
    else if (name.ends_with("_parse.pgm")) ++parse;
    else if (name.ends_with(".ppm")) ++ppm;
  }
  CHECK(ppm == 20);
  CHECK(sal == 20);
  CHECK(parse == 20);

  std::ifstream split(dir + "/data/split.csv");
  std::string line;
  std::getline(split, line);
  int rows = 0;
  while (std::getline(split, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 20);
  CHECK(fs::exists(dir + "/data/synth.manifest.json"));
}

TEST_CASE("pipeline determinism: identical seeds give identical bytes") {
  std::string dir = work_dir("determinism");
  std::string common = " --ids 4 --per-id 4 --seed 11 ";
  REQUIRE(run_cli("synth" + common + "--out " + dir + "/a", "det_syn_a").code == 0);
  REQUIRE(run_cli("synth" + common + "--out " + dir + "/b", "det_syn_b").code == 0);

  std::string train_flags =
      " --epochs 2 --seed 5 --batch-people 2 --images-per-person 2 --stream s";
  REQUIRE(run_cli("train-toy --data " + dir + "/a" + train_flags + " --out " +
                      dir + "/a.sspm --curve " + dir + "/a.csv",
                  "det_tr_a").code == 0);
  REQUIRE(run_cli("train-toy --data " + dir + "/b" + train_flags + " --out " +
                      dir + "/b.sspm --curve " + dir + "/b.csv",
                  "det_tr_b").code == 0);
  CHECK(read_file(dir + "/a.sspm") == read_file(dir + "/b.sspm"));
  CHECK(read_file(dir + "/a.csv") == read_file(dir + "/b.csv"));

  std::string fuse_flags = " --split query --stream s --ckpt-s " + dir + "/a.sspm";
  REQUIRE(run_cli("fuse --data " + dir + "/a" + fuse_flags + " --out " + dir +
                      "/a.sspf",
                  "det_fu_a").code == 0);
  REQUIRE(run_cli("fuse --data " + dir + "/b" + fuse_flags + " --out " + dir +
                      "/b.sspf",
                  "det_fu_b").code == 0);
  CHECK(read_file(dir + "/a.sspf") == read_file(dir + "/b.sspf"));
}

TEST_CASE("train-toy with zero epochs is a deterministic no-op checkpoint") {
  std::string dir = work_dir("zero_epochs");
  REQUIRE(run_cli("synth --ids 4 --per-id 4 --seed 2 --out " + dir + "/data",
                  "ze_syn").code == 0);
  std::string flags = "train-toy --data " + dir +
                      "/data --stream sp --epochs 0 --seed 9 --out ";
  REQUIRE(run_cli(flags + dir + "/a.sspm", "ze_a").code == 0);
  REQUIRE(run_cli(flags + dir + "/b.sspm", "ze_b").code == 0);
  CHECK(read_file(dir + "/a.sspm") == read_file(dir + "/b.sspm"));
}

TEST_CASE("loss mode controls the curve columns") {
  std::string dir = work_dir("loss_mode");
  REQUIRE(run_cli("synth --ids 4 --per-id 4 --seed 2 --out " + dir + "/data",
                  "lm_syn").code == 0);
  std::string base = "train-toy --data " + dir +
                     "/data --epochs 1 --batch-people 2 --images-per-person 2 ";
  REQUIRE(run_cli(base + "--out " + dir + "/a.sspm --curve " + dir +
                      "/with_trip.csv",
                  "lm_a").code == 0);
  REQUIRE(run_cli(base + "--loss cross_only --out " + dir + "/b.sspm --curve " +
                      dir + "/cross_only.csv",
                  "lm_b").code == 0);
  std::string with_trip = read_file(dir + "/with_trip.csv");
  std::string cross_only = read_file(dir + "/cross_only.csv");
  CHECK(with_trip.find("epoch,crosse,trip,lr") == 0);
  CHECK(cross_only.find("epoch,crosse,lr") == 0);
}

TEST_CASE("fuse dims grow from s to ssp and eval self-retrieval is perfect") {
  std::string dir = work_dir("fuse_eval");
  REQUIRE(run_cli("synth --ids 4 --per-id 4 --seed 21 --out " + dir + "/data",
                  "fe_syn").code == 0);
  std::string train = "train-toy --data " + dir +
                      "/data --epochs 1 --batch-people 2 --images-per-person 2 "
                      "--seed 4 ";
  REQUIRE(run_cli(train + "--stream s --out " + dir + "/s.sspm", "fe_tr_s").code == 0);
  REQUIRE(run_cli(train + "--stream sp --out " + dir + "/sp.sspm", "fe_tr_sp").code == 0);

  std::string fuse = "fuse --data " + dir + "/data --split query ";
  REQUIRE(run_cli(fuse + "--stream s --ckpt-s " + dir + "/s.sspm --out " + dir +
                      "/q_s.sspf",
                  "fe_fu_s").code == 0);
  REQUIRE(run_cli(fuse + "--stream ssp --ckpt-s " + dir + "/s.sspm --ckpt-sp " +
                      dir + "/sp.sspm --out " + dir + "/q_ssp.sspf",
                  "fe_fu_ssp").code == 0);
  auto q_s = ssp::load_gallery(dir + "/q_s.sspf");
  auto q_ssp = ssp::load_gallery(dir + "/q_ssp.sspf");
  CHECK(q_ssp[0].feature.size() > q_s[0].feature.size());

  // Self-retrieval with the protocol off: every query matches itself first.
  auto r = run_cli("eval --query " + dir + "/q_s.sspf --gallery " + dir +
                       "/q_s.sspf --protocol none --max-rank 4",
                   "fe_eval");
  REQUIRE(r.code == 0);
  CHECK(parse_metric(r.out, "rank1") == doctest::Approx(1.0));
}

TEST_CASE("eval with rerank runs and reports") {
  std::string dir = work_dir("eval_rerank");
  REQUIRE(run_cli("synth --ids 6 --per-id 8 --seed 33 --out " + dir + "/data",
                  "er_syn").code == 0);
  std::string train = "train-toy --data " + dir +
                      "/data --epochs 1 --batch-people 2 --images-per-person 2 "
                      "--seed 4 --stream s --out " + dir + "/s.sspm";
  REQUIRE(run_cli(train, "er_tr").code == 0);
  std::string fuse = "fuse --data " + dir + "/data --stream s --ckpt-s " + dir +
                     "/s.sspm ";
  REQUIRE(run_cli(fuse + "--split query --out " + dir + "/q.sspf", "er_fq").code == 0);
  REQUIRE(run_cli(fuse + "--split gallery --out " + dir + "/g.sspf", "er_fg").code == 0);

  auto r = run_cli("eval --query " + dir + "/q.sspf --gallery " + dir +
                       "/g.sspf --rerank --k1 6 --k2 2 --max-rank 5 --manifest " +
                       dir + "/eval.manifest.json",
                   "er_eval");
  REQUIRE(r.code == 0);
  double map = parse_metric(r.out, "map");
  CHECK(map >= 0.0);
  CHECK(map <= 1.0);

  auto m = ssp::load_manifest(dir + "/eval.manifest.json");
  CHECK(m.command == "eval");
}

TEST_CASE("rerank subcommand writes a full matrix") {
  std::string dir = work_dir("rerank_cmd");
  REQUIRE(run_cli("synth --ids 6 --per-id 8 --seed 13 --out " + dir + "/data",
                  "rc_syn").code == 0);
  std::string train = "train-toy --data " + dir +
                      "/data --epochs 0 --seed 4 --stream s --out " + dir +
                      "/s.sspm";
  REQUIRE(run_cli(train, "rc_tr").code == 0);
  std::string fuse = "fuse --data " + dir + "/data --stream s --ckpt-s " + dir +
                     "/s.sspm ";
  REQUIRE(run_cli(fuse + "--split query --out " + dir + "/q.sspf", "rc_fq").code == 0);
  REQUIRE(run_cli(fuse + "--split gallery --out " + dir + "/g.sspf", "rc_fg").code == 0);
  auto r = run_cli("rerank --query " + dir + "/q.sspf --gallery " + dir +
                       "/g.sspf --k1 6 --k2 2 --out " + dir + "/dist.csv",
                   "rc_run");
  REQUIRE(r.code == 0);

  std::ifstream csv(dir + "/dist.csv");
  std::string line;
  int rows = 0;
  size_t cols = 0;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    ++rows;
    cols = static_cast<size_t>(std::count(line.begin(), line.end(), ',')) + 1;
  }
  auto queries = ssp::load_gallery(dir + "/q.sspf");
  auto gallery = ssp::load_gallery(dir + "/g.sspf");
  CHECK(rows == static_cast<int>(queries.size()));
  CHECK(cols == gallery.size());
}

TEST_CASE("exit codes distinguish argument, format, and protocol errors") {
  std::string dir = work_dir("exit_codes");

  // Unknown flag: argument error.
  CHECK(run_cli("eval --nonsense", "ec_arg").code == 2);

  // Malformed magic bytes: format error.
  std::string bogus = dir + "/bogus.sspf";
  std::ofstream(bogus) << "not a gallery";
  CHECK(run_cli("eval --query " + bogus + " --gallery " + bogus, "ec_fmt").code == 3);

  // Same-camera-only gallery under the market protocol: protocol error.
  std::vector<ssp::GalleryEntry> q = {{1, 0, {0.0f, 0.0f}}};
  std::vector<ssp::GalleryEntry> g = {{1, 0, {0.1f, 0.1f}}};
  ssp::save_gallery(dir + "/q.sspf", q);
  ssp::save_gallery(dir + "/g.sspf", g);
  CHECK(run_cli("eval --query " + dir + "/q.sspf --gallery " + dir +
                    "/g.sspf --protocol market",
                "ec_proto").code == 4);

  // Dimension mismatch: argument error.
  std::vector<ssp::GalleryEntry> g3 = {{1, 1, {0.1f, 0.1f, 0.2f}}};
  ssp::save_gallery(dir + "/g3.sspf", g3);
  CHECK(run_cli("eval --query " + dir + "/q.sspf --gallery " + dir + "/g3.sspf",
                "ec_dim").code == 2);
}

TEST_CASE("fuse lists every unreadable input and writes nothing") {
  std::string dir = work_dir("fuse_errors");
  REQUIRE(run_cli("synth --ids 4 --per-id 4 --seed 6 --out " + dir + "/data",
                  "fe2_syn").code == 0);
  REQUIRE(run_cli("train-toy --data " + dir +
                      "/data --epochs 0 --seed 1 --stream s --out " + dir +
                      "/s.sspm",
                  "fe2_tr").code == 0);

  // Corrupt two query images.
  int corrupted = 0;
  for (const auto& e : fs::directory_iterator(dir + "/data")) {
    std::string name = e.path().filename().string();
    if (corrupted < 2 && name.ends_with(".ppm") &&
        name.find("img002") != std::string::npos) {
      std::ofstream(e.path(), std::ios::trunc) << "garbage";
      ++corrupted;
    }
  }
  REQUIRE(corrupted == 2);

  auto r = run_cli("fuse --data " + dir + "/data --split query --stream s "
                   "--ckpt-s " + dir + "/s.sspm --out " + dir + "/q.sspf",
                   "fe2_run");
  CHECK(r.code == 3);
  // Both offenders are named, and no partial output is left behind.
  size_t first = r.out.find("input error:");
  size_t last = r.out.rfind("input error:");
  CHECK(first != std::string::npos);
  CHECK(last != first);
  CHECK(!fs::exists(dir + "/q.sspf"));
}

TEST_CASE("fuse manifests are reproducible records") {
  std::string dir = work_dir("manifest");
  REQUIRE(run_cli("synth --ids 4 --per-id 4 --seed 8 --out " + dir + "/data",
                  "mf_syn").code == 0);
  REQUIRE(run_cli("train-toy --data " + dir +
                      "/data --epochs 0 --seed 1 --stream s --out " + dir +
                      "/s.sspm",
                  "mf_tr").code == 0);
  std::string fuse = "fuse --data " + dir + "/data --split query --stream s "
                     "--ckpt-s " + dir + "/s.sspm --out " + dir + "/q.sspf";
  REQUIRE(run_cli(fuse, "mf_f1").code == 0);
  auto m1 = ssp::load_manifest(dir + "/q.sspf.manifest.json");
  REQUIRE(run_cli(fuse, "mf_f2").code == 0);
  auto m2 = ssp::load_manifest(dir + "/q.sspf.manifest.json");
  CHECK(m1 == m2);
  CHECK(!m1.inputs.empty());
}
