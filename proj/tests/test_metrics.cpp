#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "relpose/metrics.hpp"
#include "relpose/synth.hpp"

using namespace relpose;

namespace {

bool is_error(const std::function<void()>& fn, ErrorCode code) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code() == code;
  }
  return false;
}

/// Planar 4-point square in the xy plane, 4-fold symmetric about z.
ObjectModel square_model(double half = 0.05) {
  ObjectModel m;
  m.points.points = {{half, half, 0}, {-half, half, 0},
                     {-half, -half, 0}, {half, -half, 0}};
  m.diameter = 2.0 * half * std::sqrt(2.0);
  m.symmetries.clear();
  for (int k = 0; k < 4; ++k)
    m.symmetries.push_back(
        {rotation_about_axis({0, 0, 1}, k * 1.5707963267948966), {}});
  return m;
}

ObjectModel random_model(Rng& rng, std::size_t n = 40) {
  ObjectModel m;
  for (std::size_t i = 0; i < n; ++i)
    m.points.points.push_back(rng.normal_vec3(0.03));
  double best = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      best = std::max(best,
                      (m.points.points[i] - m.points.points[j]).norm());
  m.diameter = best;
  return m;
}

RigidTransform in_front(double z = 0.7) {
  return {Mat3::identity(), {0, 0, z}};
}

CameraIntrinsics cam() { return {250, 250, 96, 96, 192, 192}; }

}  // namespace

TEST_CASE("add and adds errors") {
  Rng rng(1);
  ObjectModel model = random_model(rng);
  RigidTransform gt = in_front();

  SUBCASE("zero for a perfect pose") {
    CHECK(add_error(model, gt, gt) == 0.0);
    CHECK(adds_error(model, gt, gt) == 0.0);
  }

  SUBCASE("pure translation gives the exact offset") {
    RigidTransform pred = gt;
    pred.translation.x += 0.01;
    CHECK(add_error(model, gt, pred) == doctest::Approx(0.01).epsilon(1e-12));
  }

  SUBCASE("90-degree rotation of a symmetric square: adds 0, add > 0") {
    ObjectModel sq = square_model();
    RigidTransform gt_sq = in_front();
    RigidTransform pred =
        compose(gt_sq, {rotation_about_axis({0, 0, 1}, 1.5707963267948966), {}});
    CHECK(add_error(sq, gt_sq, pred) > 0.01);
    CHECK(adds_error(sq, gt_sq, pred) < 1e-12);
  }

  SUBCASE("adds never exceeds add") {
    for (int t = 0; t < 100; ++t) {
      RigidTransform pred = oracles::random_rigid(rng, 0.05);
      pred.translation.z += 0.7;
      CHECK(adds_error(model, gt, pred) <= add_error(model, gt, pred) + 1e-12);
    }
  }

  SUBCASE("empty model raises") {
    ObjectModel empty;
    CHECK(is_error([&] { add_error(empty, gt, gt); }, ErrorCode::empty_model));
  }
}

TEST_CASE("add_recall_01d thresholds at 10% of the diameter") {
  Rng rng(2);
  ObjectModel model = random_model(rng);
  RigidTransform gt = in_front();
  CHECK(add_recall_01d(model, gt, gt));

  RigidTransform far = gt;
  far.translation.x += 0.2 * model.diameter;
  CHECK(!add_recall_01d(model, gt, far));

  // Pure translation: add equals the offset exactly, so 0.09999d passes.
  RigidTransform close = gt;
  close.translation.x += 0.09999 * model.diameter;
  CHECK(add_recall_01d(model, gt, close));
}

TEST_CASE("mssd takes the min over symmetries of the max surface distance") {
  Rng rng(3);
  ObjectModel model = random_model(rng);
  RigidTransform gt = in_front();

  CHECK(mssd(model, gt, gt) == 0.0);

  SUBCASE("identity-only symmetry collapses to max point distance") {
    RigidTransform pred = oracles::random_rigid(rng, 0.01);
    pred.translation.z += 0.7;
    double expected = 0.0;
    for (const Vec3& p : model.points.points)
      expected = std::max(expected, (gt.apply(p) - pred.apply(p)).norm());
    CHECK(mssd(model, gt, pred) == doctest::Approx(expected).epsilon(1e-14));
  }

  SUBCASE("4-fold square rotated 90 degrees scores 0 with symmetries") {
    ObjectModel sq = square_model();
    RigidTransform gt_sq = in_front();
    RigidTransform pred =
        compose(gt_sq, {rotation_about_axis({0, 0, 1}, 1.5707963267948966), {}});
    CHECK(mssd(sq, gt_sq, pred) < 1e-12);

    ObjectModel stripped = sq;
    stripped.symmetries = {RigidTransform::identity()};
    // Exhaustive oracle over the 4 symmetries of the full model.
    double expected = std::numeric_limits<double>::infinity();
    for (const RigidTransform& s : sq.symmetries) {
      double worst = 0.0;
      for (const Vec3& p : sq.points.points)
        worst = std::max(worst,
                         (compose(gt_sq, s).apply(p) - pred.apply(p)).norm());
      expected = std::min(expected, worst);
    }
    CHECK(mssd(sq, gt_sq, pred) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(mssd(stripped, gt_sq, pred) > 0.01);
  }

  SUBCASE("enlarging the symmetry set never increases mssd or mspd") {
    ObjectModel base = random_model(rng);
    RigidTransform gt2 = in_front();
    for (int t = 0; t < 25; ++t) {
      RigidTransform pred = oracles::random_rigid(rng, 0.02);
      pred.translation.z += 0.7;
      ObjectModel enlarged = base;
      enlarged.symmetries.push_back({rng.rotation(), {}});
      enlarged.symmetries.push_back({rng.rotation(), {}});
      CHECK(mssd(enlarged, gt2, pred) <= mssd(base, gt2, pred) + 1e-12);
      CHECK(mspd(enlarged, gt2, pred, cam()) <=
            mspd(base, gt2, pred, cam()) + 1e-12);
    }
  }
}

TEST_CASE("mspd measures symmetry-aware projection distance in pixels") {
  Rng rng(4);
  ObjectModel model = random_model(rng);
  RigidTransform gt = in_front();
  CameraIntrinsics k = cam();

  CHECK(mspd(model, gt, gt, k) == 0.0);

  SUBCASE("depth-axis translation matches a project-and-measure oracle") {
    RigidTransform pred = gt;
    pred.translation.z += 0.1;
    double expected = 0.0;
    for (const Vec3& p : model.points.points) {
      PixelDepth a = project_point(k, gt.apply(p));
      PixelDepth b = project_point(k, pred.apply(p));
      expected = std::max(expected, std::hypot(a.u - b.u, a.v - b.v));
    }
    CHECK(expected > 0.0);
    CHECK(mspd(model, gt, pred, k) == doctest::Approx(expected).epsilon(1e-14));
  }

  SUBCASE("4-fold square rotated 90 degrees projects to 0") {
    ObjectModel sq = square_model();
    RigidTransform gt_sq = in_front();
    RigidTransform pred =
        compose(gt_sq, {rotation_about_axis({0, 0, 1}, 1.5707963267948966), {}});
    CHECK(mspd(sq, gt_sq, pred, k) < 1e-9);
  }

  SUBCASE("points behind the camera raise") {
    RigidTransform behind = gt;
    behind.translation.z = -0.5;
    CHECK(is_error([&] { mspd(model, gt, behind, k); },
                   ErrorCode::behind_camera));
  }
}

TEST_CASE("vsd compares visible rendered surfaces") {
  CameraIntrinsics k = cam();
  ObjectModel box = sample_object(ObjectShape::box, 0.08, 3000, 0);
  RigidTransform gt = in_front(0.6);
  RenderResult scene = render_depth(box, gt, k);

  SUBCASE("perfect pose, unoccluded scene: zero error") {
    CHECK(vsd(box, gt, gt, scene.depth, k, 0.02) == 0.0);
  }

  SUBCASE("disjoint renders give error 1") {
    RigidTransform pred = gt;
    pred.translation.x += 0.3;  // footprints cannot overlap
    CHECK(vsd(box, gt, pred, scene.depth, k, 0.02) == 1.0);
  }

  SUBCASE("object fully outside the frustum raises empty-render") {
    RigidTransform gone = gt;
    gone.translation = {5.0, 5.0, 0.1};
    CHECK(is_error([&] { vsd(box, gone, gone, scene.depth, k, 0.02); },
                   ErrorCode::empty_render));
  }

  SUBCASE("half-overlapping flat square matches the analytic pixel fraction") {
    // S x S grid of points spaced exactly one pixel apart at z0, shifted by
    // S/2 pixels. With unit splat radius the footprints dilate by a
    // 4-neighborhood; counting cells gives error (S+2)/(1.5S+5), which is
    // within one boundary row of the undilated hand value 2/3.
    const int S = 60;
    const double z0 = 1.0, f = 200.0;
    CameraIntrinsics kk{f, f, 96, 96, 192, 192};
    ObjectModel flat;
    for (int j = 0; j < S; ++j)
      for (int i = 0; i < S; ++i)
        flat.points.points.push_back(
            {(i - S / 2) * z0 / f, (j - S / 2) * z0 / f, 0.0});
    flat.diameter = (flat.points.points.front() - flat.points.points.back()).norm();
    RigidTransform gt_sq{Mat3::identity(), {0, 0, z0}};
    RigidTransform pred = gt_sq;
    pred.translation.x += (S / 2) * z0 / f;

    RenderResult flat_scene = render_depth(flat, gt_sq, kk, 1);
    double e = vsd(flat, gt_sq, pred, flat_scene.depth, kk, 0.05);
    double analytic = (S + 2.0) / (1.5 * S + 5.0);
    CHECK(e == doctest::Approx(analytic).epsilon(1e-12));
    CHECK(std::abs(e - 2.0 / 3.0) <= 1.5 / S + 1e-12);
  }
}

TEST_CASE("average_recall aggregates the threshold grids") {
  CameraIntrinsics k = cam();
  ObjectModel box = sample_object(ObjectShape::box, 0.08, 3000, 0);
  RigidTransform gt = in_front(0.6);
  RenderResult scene = render_depth(box, gt, k);

  SUBCASE("perfect pose scores ar = 1 with zero errors") {
    MetricReport r = average_recall(box, gt, gt, k, scene.depth);
    CHECK(r.ar == 1.0);
    CHECK(r.vsd_recall == 1.0);
    CHECK(r.mssd_recall == 1.0);
    CHECK(r.mspd_recall == 1.0);
    CHECK(r.add_err == 0.0);
    CHECK(r.adds_err == 0.0);
    CHECK(r.add_recall_flag);
  }

  SUBCASE("a displacement of 10 diameters scores ar = 0") {
    RigidTransform pred = gt;
    pred.translation.x += 10.0 * box.diameter;
    MetricReport r = average_recall(box, gt, pred, k, scene.depth);
    CHECK(r.ar == 0.0);
    CHECK(!r.add_recall_flag);
  }

  SUBCASE("mid-range perturbation equals recomputation over explicit grids") {
    RigidTransform pred = compose(
        gt, {rotation_about_axis({0.3, 1.0, -0.2}, 0.12), {0.01, -0.008, 0.015}});
    MetricReport r = average_recall(box, gt, pred, k, scene.depth);

    double d = box.diameter;
    double mssd_val = mssd(box, gt, pred);
    double mspd_val = mspd(box, gt, pred, k);
    int mssd_pass = 0, mspd_pass = 0, vsd_pass = 0;
    for (int step = 1; step <= 10; ++step) {
      if (mssd_val < 0.05 * step * d) ++mssd_pass;
      if (mspd_val < 0.05 * step * k.width) ++mspd_pass;
    }
    for (int tol = 1; tol <= 10; ++tol) {
      double e = vsd(box, gt, pred, scene.depth, k, 0.05 * tol * d);
      for (int theta = 1; theta <= 10; ++theta)
        if (e < 0.05 * theta) ++vsd_pass;
    }
    CHECK(r.mssd_recall == mssd_pass / 10.0);
    CHECK(r.mspd_recall == mspd_pass / 10.0);
    CHECK(r.vsd_recall == vsd_pass / 100.0);
    CHECK(r.ar == (r.vsd_recall + r.mssd_recall + r.mspd_recall) / 3.0);
  }

  SUBCASE("recalls are monotone non-increasing along a perturbation sweep") {
    double prev_mssd = 1.0, prev_mspd = 1.0;
    for (int step = 0; step <= 8; ++step) {
      RigidTransform pred = gt;
      pred.translation.x += 0.012 * step;
      MetricReport r = average_recall(box, gt, pred, k, scene.depth);
      CHECK(r.mssd_recall <= prev_mssd + 1e-12);
      CHECK(r.mspd_recall <= prev_mspd + 1e-12);
      prev_mssd = r.mssd_recall;
      prev_mspd = r.mspd_recall;
      CHECK(r.ar >= 0.0);
      CHECK(r.ar <= 1.0);
    }
  }
}

TEST_CASE("mask_miou averages per-view IoU") {
  Mask a(8, 8), b(8, 8);
  for (int v = 0; v < 4; ++v)
    for (int u = 0; u < 8; ++u) a.set(u, v, true);

  SUBCASE("identical masks give 1") {
    CHECK(mask_miou(a, a, a, a) == 1.0);
  }

  SUBCASE("disjoint nonempty masks give 0") {
    for (int v = 4; v < 8; ++v)
      for (int u = 0; u < 8; ++u) b.set(u, v, true);
    CHECK(mask_miou(a, b, a, b) == 0.0);
  }

  SUBCASE("half-overlapping rectangles give 1/3") {
    // a covers rows 0..3, c covers rows 2..5: inter 16 px, union 48 px.
    Mask c(8, 8);
    for (int v = 2; v < 6; ++v)
      for (int u = 0; u < 8; ++u) c.set(u, v, true);
    CHECK(mask_miou(a, c, a, c) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  }

  SUBCASE("both-empty views count as IoU 1") {
    Mask empty(8, 8);
    CHECK(mask_miou(empty, empty, a, a) == 1.0);
  }

  SUBCASE("dimension mismatch raises") {
    Mask wrong(4, 8);
    CHECK(is_error([&] { mask_miou(a, wrong, a, a); },
                   ErrorCode::dimension_mismatch));
  }
}

TEST_CASE("object model validation") {
  ObjectModel m = square_model();
  m.validate();

  SUBCASE("diameter below max pairwise distance fails") {
    m.diameter = 0.01;
    CHECK(is_error([&] { m.validate(); }, ErrorCode::invalid_argument));
  }

  SUBCASE("missing identity symmetry fails") {
    ObjectModel no_id = square_model();
    no_id.symmetries.erase(no_id.symmetries.begin());
    CHECK(is_error([&] { no_id.validate(); }, ErrorCode::invalid_argument));
  }
}
