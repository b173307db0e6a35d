#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "oracles.hpp"
#include "relpose/io.hpp"
#include "relpose/pipeline.hpp"

using namespace relpose;
namespace fs = std::filesystem;

namespace {

bool is_error(const std::function<void()>& fn, ErrorCode code) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code() == code;
  }
  return false;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("relpose_io_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("depth PNG stores millimeters in 16 bits") {
  TempDir tmp;
  Rng rng(1);

  SUBCASE("mm-quantized values round-trip exactly") {
    DepthMap d(37, 23);
    for (double& v : d.values)
      v = rng.uniform() < 0.2 ? 0.0 : rng.uniform_index(60000) / 1000.0;
    io::save_depth_png(tmp.file("d.png"), d);
    DepthMap back = io::load_depth_png(tmp.file("d.png"));
    CHECK(back.width == d.width);
    CHECK(back.height == d.height);
    CHECK(back.values == d.values);
  }

  SUBCASE("a pixel holding 1500 decodes to 1.5 m") {
    DepthMap d(4, 4);
    d.at(2, 1) = 1.5;
    io::save_depth_png(tmp.file("mm.png"), d);
    auto raw = io::detail::png_decode_gray(
        io::detail::read_binary(tmp.file("mm.png")), "mm.png");
    CHECK(raw.pixels[1 * 4 + 2] == 1500);
    DepthMap back = io::load_depth_png(tmp.file("mm.png"));
    CHECK(back.at(2, 1) == 1.5);
  }
}

TEST_CASE("mask PNG uses nonzero-as-object") {
  TempDir tmp;
  Rng rng(2);
  Mask m(19, 31);
  for (auto& v : m.values) v = rng.uniform() < 0.5 ? 1 : 0;
  io::save_mask_png(tmp.file("m.png"), m);
  Mask back = io::load_mask_png(tmp.file("m.png"));
  CHECK(back.values == m.values);
}

TEST_CASE("feature map binary format") {
  TempDir tmp;
  Rng rng(3);

  SUBCASE("a random 192x192x32 map round-trips bit-identically") {
    FeatureMap f(192, 192, 32);
    for (double& v : f.data) v = static_cast<float>(rng.normal());
    io::save_feature_map(tmp.file("f.fmap"), f);
    FeatureMap back = io::load_feature_map(tmp.file("f.fmap"));
    CHECK(back.height == 192);
    CHECK(back.width == 192);
    CHECK(back.dim == 32);
    CHECK(back.data == f.data);
  }

  SUBCASE("truncated file reports malformed-header") {
    FeatureMap f(8, 8, 4);
    for (double& v : f.data) v = static_cast<float>(rng.normal());
    io::save_feature_map(tmp.file("t.fmap"), f);
    auto bytes = io::detail::read_binary(tmp.file("t.fmap"));
    bytes.resize(bytes.size() / 2);
    io::detail::write_binary(tmp.file("t.fmap"), bytes);
    CHECK(is_error([&] { io::load_feature_map(tmp.file("t.fmap")); },
                   ErrorCode::malformed_header));
  }

  SUBCASE("corrupted payload reports checksum-failure") {
    FeatureMap f(8, 8, 4);
    for (double& v : f.data) v = static_cast<float>(rng.normal());
    io::save_feature_map(tmp.file("c.fmap"), f);
    auto bytes = io::detail::read_binary(tmp.file("c.fmap"));
    bytes[30] ^= 0x40;
    io::detail::write_binary(tmp.file("c.fmap"), bytes);
    CHECK(is_error([&] { io::load_feature_map(tmp.file("c.fmap")); },
                   ErrorCode::checksum_failure));
  }

  SUBCASE("bad magic reports malformed-header") {
    io::detail::write_binary(tmp.file("bad.fmap"),
                             {'N', 'O', 'P', 'E', 0, 0, 0, 0});
    CHECK(is_error([&] { io::load_feature_map(tmp.file("bad.fmap")); },
                   ErrorCode::malformed_header));
  }
}

TEST_CASE("intrinsics and pose JSON round-trip exactly") {
  TempDir tmp;
  Rng rng(4);

  CameraIntrinsics k{517.3, 421.9, 318.64, 255.31, 640, 480};
  io::save_intrinsics(tmp.file("k.json"), k);
  CameraIntrinsics kb = io::load_intrinsics(tmp.file("k.json"));
  CHECK(kb.fx == k.fx);
  CHECK(kb.fy == k.fy);
  CHECK(kb.cx == k.cx);
  CHECK(kb.cy == k.cy);
  CHECK(kb.width == k.width);
  CHECK(kb.height == k.height);

  RigidTransform t = oracles::random_rigid(rng);
  io::save_pose(tmp.file("p.json"), t, "A_to_Q");
  io::LoadedPose lp = io::load_pose(tmp.file("p.json"));
  CHECK(lp.frame == "A_to_Q");
  CHECK(lp.transform.rotation.m == t.rotation.m);
  CHECK(lp.transform.translation.x == t.translation.x);

  SUBCASE("a non-orthonormal rotation is rejected") {
    std::ofstream out(tmp.file("bad.json"));
    out << R"({"rotation":[1,0,0,0,2,0,0,0,1],"translation":[0,0,0],"frame":"A_to_Q"})";
    out.close();
    CHECK(is_error([&] { io::load_pose(tmp.file("bad.json")); },
                   ErrorCode::malformed_header));
  }

  SUBCASE("missing fields are named") {
    std::ofstream out(tmp.file("miss.json"));
    out << R"({"fx": 100.0})";
    out.close();
    try {
      io::load_intrinsics(tmp.file("miss.json"));
      CHECK(false);
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("fy") != std::string::npos);
    }
  }
}

TEST_CASE("match CSV round-trips and is idempotent at 6 decimals") {
  TempDir tmp;
  Rng rng(5);
  MatchSet ms;
  for (int i = 0; i < 200; ++i) {
    Match m;
    m.a = {static_cast<int>(rng.uniform_index(192)),
           static_cast<int>(rng.uniform_index(192))};
    m.q = {static_cast<int>(rng.uniform_index(192)),
           static_cast<int>(rng.uniform_index(192))};
    m.distance = std::round(rng.uniform() * 1e6) / 1e6;
    ms.pairs.push_back(m);
  }
  io::save_matches_csv(tmp.file("m.csv"), ms);
  MatchSet back = io::load_matches_csv(tmp.file("m.csv"));
  REQUIRE(back.pairs.size() == ms.pairs.size());
  for (std::size_t i = 0; i < ms.pairs.size(); ++i) {
    CHECK(back.pairs[i].a == ms.pairs[i].a);
    CHECK(back.pairs[i].q == ms.pairs[i].q);
    CHECK(back.pairs[i].distance == ms.pairs[i].distance);
  }

  SUBCASE("header mismatch is malformed") {
    std::ofstream out(tmp.file("h.csv"));
    out << "a,b,c\n1,2,3\n";
    out.close();
    CHECK(is_error([&] { io::load_matches_csv(tmp.file("h.csv")); },
                   ErrorCode::malformed_header));
  }
}

TEST_CASE("supervision CSV keeps full double precision") {
  TempDir tmp;
  Rng rng(6);
  MatchSupervision sup;
  for (int i = 0; i < 100; ++i)
    sup.pairs.push_back({rng.uniform(0, 191), rng.uniform(0, 191),
                         rng.uniform(0, 191), rng.uniform(0, 191)});
  io::save_supervision_csv(tmp.file("s.csv"), sup);
  MatchSupervision back = io::load_supervision_csv(tmp.file("s.csv"));
  REQUIRE(back.pairs.size() == sup.pairs.size());
  for (std::size_t i = 0; i < sup.pairs.size(); ++i) {
    CHECK(back.pairs[i].u_a == sup.pairs[i].u_a);
    CHECK(back.pairs[i].v_a == sup.pairs[i].v_a);
    CHECK(back.pairs[i].u_q == sup.pairs[i].u_q);
    CHECK(back.pairs[i].v_q == sup.pairs[i].v_q);
  }
}

TEST_CASE("object model JSON + XYZ round-trips exactly") {
  TempDir tmp;
  Rng rng(7);
  ObjectModel m;
  for (int i = 0; i < 150; ++i) m.points.points.push_back(rng.normal_vec3(0.05));
  m.diameter = 0.31892;
  m.symmetries = {RigidTransform::identity(), {rng.rotation(), {}}};
  io::save_object_model(tmp.file("model.json"), "pts.xyz", m);
  ObjectModel back = io::load_object_model(tmp.file("model.json"));
  CHECK(back.diameter == m.diameter);
  REQUIRE(back.points.size() == m.points.size());
  for (std::size_t i = 0; i < m.points.size(); ++i) {
    CHECK(back.points.points[i].x == m.points.points[i].x);
    CHECK(back.points.points[i].y == m.points.points[i].y);
    CHECK(back.points.points[i].z == m.points.points[i].z);
  }
  REQUIRE(back.symmetries.size() == 2);
  CHECK(back.symmetries[1].rotation.m == m.symmetries[1].rotation.m);
}

TEST_CASE("scene pair manifests") {
  TempDir tmp;
  SyntheticSceneSpec spec;
  spec.seed = 5;
  spec.model_points = 3000;
  spec.image_width = 96;
  spec.image_height = 96;
  spec.focal = 125.0;
  ScenePair pair = generate_scene_pair(spec);

  SUBCASE("save and load preserve everything up to depth quantization") {
    std::string manifest = io::save_scene_pair(tmp.file("scene"), pair);
    io::LoadedScenePair back = io::load_scene_pair(manifest);
    CHECK(back.mask_a.values == pair.mask_a.values);
    CHECK(back.mask_q.values == pair.mask_q.values);
    CHECK(back.intrinsics_a.fx == pair.intrinsics_a.fx);
    REQUIRE(back.gt_pose.has_value());
    CHECK(back.gt_pose->rotation.m == pair.gt_pose.rotation.m);
    REQUIRE(back.object_pose_a.has_value());
    REQUIRE(back.gt_matches.has_value());
    CHECK(back.gt_matches->pairs.size() == pair.gt_matches.pairs.size());
    double max_depth_err = 0.0;
    for (std::size_t i = 0; i < pair.depth_a.values.size(); ++i)
      max_depth_err = std::max(
          max_depth_err, std::abs(back.depth_a.values[i] - pair.depth_a.values[i]));
    CHECK(max_depth_err <= 5.0e-4 + 1e-12);  // half a millimeter
    // Feature maps were synthesized as doubles; files hold f32.
    for (std::size_t i = 0; i < pair.fmap_a.data.size(); ++i)
      CHECK(back.fmap_a.data[i] ==
            static_cast<double>(static_cast<float>(pair.fmap_a.data[i])));
  }

  SUBCASE("dimension mismatches name the offending file") {
    std::string manifest = io::save_scene_pair(tmp.file("scene2"), pair);
    CameraIntrinsics wrong{125, 125, 48, 48, 64, 64};
    io::save_intrinsics(tmp.file("scene2/intrinsics_a.json"), wrong);
    try {
      io::load_scene_pair(manifest);
      CHECK(false);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::dimension_mismatch);
      CHECK(std::string(e.what()).find("depth_a") != std::string::npos);
    }
  }

  SUBCASE("missing referenced file is an input error") {
    std::string manifest = io::save_scene_pair(tmp.file("scene3"), pair);
    fs::remove(tmp.file("scene3/features_q.fmap"));
    CHECK(is_error([&] { io::load_scene_pair(manifest); },
                   ErrorCode::invalid_argument));
  }
}
