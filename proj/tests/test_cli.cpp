// Drives the installed CLI binary end to end: pipelines, exit codes, and
// byte-stability of reports.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "relpose/pipeline.hpp"

using namespace relpose;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("relpose_cli_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

int run_cli(const std::string& args) {
  std::string cmd = std::string(RELPOSE_CLI_PATH) + " " + args +
                    " >/dev/null 2>/dev/null";
  int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

nlohmann::json load_json(const std::string& path) {
  return nlohmann::json::parse(slurp(path));
}

const char* kNoisySpec = R"({
  "shape": "box", "scale": 0.12, "seed": 42,
  "descriptor_noise_sigma": 0.1, "outlier_fraction": 0.3,
  "distractor_count": 1, "model_points": 8000
})";

}  // namespace

TEST_CASE("staged pipeline: synth, match, register, evaluate") {
  TempDir tmp;
  write_text(tmp.file("spec.json"), kNoisySpec);

  CHECK(run_cli("synth --spec " + tmp.file("spec.json") + " --out " +
                tmp.file("scene")) == 0);
  CHECK(fs::exists(tmp.file("scene/manifest.json")));
  CHECK(fs::exists(tmp.file("scene/depth_a.png")));
  CHECK(fs::exists(tmp.file("scene/features_q.fmap")));

  CHECK(run_cli("match --manifest " + tmp.file("scene/manifest.json") +
                " --out " + tmp.file("matches.csv")) == 0);
  CHECK(fs::exists(tmp.file("matches.csv")));

  CHECK(run_cli("register --manifest " + tmp.file("scene/manifest.json") +
                " --matches " + tmp.file("matches.csv") + " --out " +
                tmp.file("pose.json") + " --report " + tmp.file("reg.json") +
                " --seed 42") == 0);
  CHECK(fs::exists(tmp.file("pose.json")));

  CHECK(run_cli("evaluate --manifest " + tmp.file("scene/manifest.json") +
                " --pose " + tmp.file("pose.json") + " --out " +
                tmp.file("eval.json")) == 0);
  nlohmann::json eval = load_json(tmp.file("eval.json"));
  CHECK(eval.contains("metrics"));
  CHECK(eval.contains("pose_error"));
  CHECK(eval.contains("losses"));
  CHECK(eval["metrics"]["ar"].get<double>() >= 0.9);
  CHECK(eval["metrics"]["miou"].get<double>() == 1.0);
}

TEST_CASE("e2e equals the library pipeline for the same seed") {
  TempDir tmp;
  write_text(tmp.file("spec.json"), kNoisySpec);
  CHECK(run_cli("e2e --spec " + tmp.file("spec.json") + " --out " +
                tmp.file("run")) == 0);
  nlohmann::json report = load_json(tmp.file("run/report.json"));

  SyntheticSceneSpec spec = load_scene_spec(tmp.file("spec.json"));
  PipelineConfig cfg;
  PipelineReport lib = run_pipeline(to_loaded(generate_scene_pair(spec)), cfg,
                                    spec.seed);
  CHECK(report["pose_error"]["rotation_deg"].get<double>() ==
        lib.pose_error->rotation_deg);
  CHECK(report["pose_error"]["translation_m"].get<double>() ==
        lib.pose_error->translation_m);
  CHECK(report["matching"]["match_count"].get<std::size_t>() == lib.match_count);
  CHECK(report["registration"]["inlier_count"].get<std::size_t>() ==
        lib.inlier_count);
  CHECK(report["metrics"]["ar"].get<double>() == lib.metrics->ar);
}

TEST_CASE("noiseless identity-pose spec with mutual filtering is exact") {
  TempDir tmp;
  write_text(tmp.file("spec.json"), R"({
    "shape": "box", "scale": 0.12, "seed": 7,
    "pose_a": {"rotation": [1,0,0,0,1,0,0,0,1], "translation": [0,0,0.65]},
    "pose_q": {"rotation": [1,0,0,0,1,0,0,0,1], "translation": [0,0,0.65]}
  })");
  write_text(tmp.file("config.json"), R"({"mutual_filter": true})");
  CHECK(run_cli("e2e --spec " + tmp.file("spec.json") + " --config " +
                tmp.file("config.json") + " --out " + tmp.file("run")) == 0);
  nlohmann::json report = load_json(tmp.file("run/report.json"));
  CHECK(report["metrics"]["ar"].get<double>() == 1.0);
  CHECK(report["metrics"]["add_err"].get<double>() < 1e-6);
  CHECK(report["metrics"]["add_recall_01d"].get<bool>());
  CHECK(report["losses"]["positive"].get<double>() == 0.0);
}

TEST_CASE("noiseless default-config run reaches ar = 1") {
  TempDir tmp;
  write_text(tmp.file("spec.json"), R"({"shape": "box", "seed": 11})");
  CHECK(run_cli("e2e --spec " + tmp.file("spec.json") + " --out " +
                tmp.file("run")) == 0);
  nlohmann::json report = load_json(tmp.file("run/report.json"));
  CHECK(report["metrics"]["ar"].get<double>() == 1.0);
  // Exact descriptor ties floor the default-config noiseless error at the
  // splat-cell scale (a few mm); the mutual-filter case above is the exact one.
  CHECK(report["metrics"]["add_err"].get<double>() < 5e-3);
  CHECK(report["metrics"]["add_recall_01d"].get<bool>());
}

TEST_CASE("reports are byte-identical across runs and thread counts") {
  TempDir tmp;
  write_text(tmp.file("spec.json"), R"({
    "shape": "box", "seed": 99, "descriptor_noise_sigma": 0.1,
    "outlier_fraction": 0.2, "model_points": 5000
  })");
  CHECK(run_cli("e2e --spec " + tmp.file("spec.json") + " --out " +
                tmp.file("r1") + " --threads 1") == 0);
  CHECK(run_cli("e2e --spec " + tmp.file("spec.json") + " --out " +
                tmp.file("r2") + " --threads 4") == 0);
  CHECK(run_cli("e2e --spec " + tmp.file("spec.json") + " --out " +
                tmp.file("r3") + " --threads 1") == 0);
  std::string a = slurp(tmp.file("r1/report.json"));
  CHECK(!a.empty());
  CHECK(a == slurp(tmp.file("r2/report.json")));
  CHECK(a == slurp(tmp.file("r3/report.json")));
  CHECK(slurp(tmp.file("r1/matches.csv")) == slurp(tmp.file("r2/matches.csv")));
  CHECK(slurp(tmp.file("r1/depth_a.png")) == slurp(tmp.file("r2/depth_a.png")));
}

TEST_CASE("csv report format is stable and flat") {
  TempDir tmp;
  write_text(tmp.file("spec.json"), R"({"shape": "box", "seed": 3, "model_points": 5000})");
  CHECK(run_cli("e2e --spec " + tmp.file("spec.json") + " --out " +
                tmp.file("run") + " --format csv") == 0);
  std::string csv = slurp(tmp.file("run/report.csv"));
  CHECK(csv.rfind("key,value\n", 0) == 0);
  CHECK(csv.find("metrics.ar,") != std::string::npos);
  CHECK(csv.find("pose_error.rotation_deg,") != std::string::npos);
}

TEST_CASE("exit codes follow the documented error classes") {
  TempDir tmp;
  write_text(tmp.file("spec.json"), R"({"shape": "box", "seed": 5, "model_points": 5000})");
  CHECK(run_cli("synth --spec " + tmp.file("spec.json") + " --out " +
                tmp.file("scene")) == 0);

  SUBCASE("empty mask exits 3") {
    Mask empty(192, 192);
    io::save_mask_png(tmp.file("scene/mask_a.png"), empty);
    CHECK(run_cli("match --manifest " + tmp.file("scene/manifest.json") +
                  " --out " + tmp.file("m.csv")) == 3);
  }

  SUBCASE("corrupt feature file exits 2") {
    auto bytes = io::detail::read_binary(tmp.file("scene/features_a.fmap"));
    bytes.resize(bytes.size() / 3);
    io::detail::write_binary(tmp.file("scene/features_a.fmap"), bytes);
    CHECK(run_cli("match --manifest " + tmp.file("scene/manifest.json") +
                  " --out " + tmp.file("m.csv")) == 2);
  }

  SUBCASE("unknown spec key exits 2") {
    write_text(tmp.file("bad.json"), R"({"shape": "box", "wobble": 3})");
    CHECK(run_cli("synth --spec " + tmp.file("bad.json") + " --out " +
                  tmp.file("x")) == 2);
  }

  SUBCASE("missing required option exits 2") {
    CHECK(run_cli("synth --out " + tmp.file("x")) == 2);
  }

  SUBCASE("mu_t = 0 rejects all matches and exits 3") {
    write_text(tmp.file("cfg.json"), R"({"mu_t": 0.0})");
    write_text(tmp.file("noisy.json"),
               R"({"shape": "box", "seed": 5, "model_points": 5000,
                   "descriptor_noise_sigma": 0.2})");
    CHECK(run_cli("synth --spec " + tmp.file("noisy.json") + " --out " +
                  tmp.file("scene_n")) == 0);
    CHECK(run_cli("match --manifest " + tmp.file("scene_n/manifest.json") +
                  " --config " + tmp.file("cfg.json") + " --out " +
                  tmp.file("m.csv")) == 3);
  }
}
