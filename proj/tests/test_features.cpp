#include "helpers.hpp"
#include "oracles.hpp"

#include "klrf/features.hpp"

#include <doctest.h>

using namespace klrf;
using namespace klrf::features;

namespace {

LayoutPlane plane(std::array<double, 3> n, double offset, std::string label = "p")
{
  LayoutPlane p;
  p.normal = n;
  p.offset = offset;
  p.label = std::move(label);
  return p;
}

double norm3(double x, double y, double z) { return std::sqrt(x * x + y * y + z * z); }

double dist(Joint3 const & a, Joint3 const & b) { return norm3(a.x - b.x, a.y - b.y, a.z - b.z); }

} // namespace

TEST_CASE("layout cue: documented examples against the sampled-plane oracle")
{
  struct Case
  {
      Joint3 joint;
      LayoutPlane plane;
      std::array<double, 3> expected;
  };
  std::vector<Case> cases{{{3, -2, 0}, plane({0, 0, 1}, 0), {0, 0, 0}},
                          {{0, 0, 2}, plane({0, 0, 1}, 0), {0, 0, 2}},
                          {{1, 1, 1}, plane({1, 0, 0}, 0), {1, 0, 0}}};
  for (auto const & c : cases) {
    SkeletonFrame f;
    f.joints = {c.joint};
    auto d = layout_cue(f, std::vector<LayoutPlane>{c.plane});
    REQUIRE(d.size() == 3);
    auto foot = oracle::nearest_point_on_plane({c.joint.x, c.joint.y, c.joint.z},
                                               {c.plane.normal[0], c.plane.normal[1], c.plane.normal[2]},
                                               c.plane.offset);
    for (int a = 0; a < 3; ++a) {
      CHECK(d[a] == doctest::Approx(c.expected[a]).epsilon(1e-12));
      double const joint_a = a == 0 ? c.joint.x : a == 1 ? c.joint.y : c.joint.z;
      CHECK(std::abs(d[a] - (joint_a - foot[a])) < 1e-6);
    }
  }
}

TEST_CASE("layout cue: random tilted planes agree with the oracle and stay parallel to the normal")
{
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    double nx = uniform(rng, -1, 1), ny = uniform(rng, -1, 1), nz = uniform(rng, -1, 1);
    double const n = norm3(nx, ny, nz);
    LayoutPlane p = plane({nx / n, ny / n, nz / n}, uniform(rng, -2, 2));
    SkeletonFrame f;
    f.joints = {{uniform(rng, -3, 3), uniform(rng, -3, 3), uniform(rng, -3, 3)}};
    auto d = layout_cue(f, std::vector<LayoutPlane>{p});
    auto foot = oracle::nearest_point_on_plane({f.joints[0].x, f.joints[0].y, f.joints[0].z},
                                               {p.normal[0], p.normal[1], p.normal[2]}, p.offset);
    CHECK(std::abs(d[0] - (f.joints[0].x - foot[0])) < 1e-6);
    CHECK(std::abs(d[1] - (f.joints[0].y - foot[1])) < 1e-6);
    CHECK(std::abs(d[2] - (f.joints[0].z - foot[2])) < 1e-6);
    // cross product with the normal vanishes
    double const cx = d[1] * p.normal[2] - d[2] * p.normal[1];
    double const cy = d[2] * p.normal[0] - d[0] * p.normal[2];
    double const cz = d[0] * p.normal[1] - d[1] * p.normal[0];
    CHECK(norm3(cx, cy, cz) < 1e-9);
  }
}

TEST_CASE("layout cue: joint-major ordering and in-plane translation invariance")
{
  SkeletonFrame f;
  f.joints = {{0, 0, 1}, {0, 2, 3}};
  std::vector<LayoutPlane> planes{plane({0, 0, 1}, 0, "floor"), plane({0, 1, 0}, 1, "wall")};
  auto d = layout_cue(f, planes);
  REQUIRE(d.size() == 3 * 2 * 2);
  std::vector<double> expected{0, 0, 1, 0, -1, 0, 0, 0, 3, 0, 1, 0};
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(d[i] == doctest::Approx(expected[i]));

  // moving along x is parallel to both planes
  SkeletonFrame g = f;
  for (auto & j : g.joints) j.x += 7.5;
  CHECK(layout_cue(g, planes) == d);
}

TEST_CASE("skeleton cue: examples and length")
{
  SkeletonFrame a;
  a.joints = {{0, 0, 0}, {1, 2, 3}};
  auto first = skeleton_cue(a, a, a);
  REQUIRE(first.size() == 3 * (1 + 2 * 2));
  CHECK(first[0] == -1);
  CHECK(first[1] == -2);
  CHECK(first[2] == -3);
  for (std::size_t i = 3; i < first.size(); ++i) CHECK(first[i] == 0.0);

  SkeletonFrame b = a;
  for (auto & j : b.joints) j = {j.x + 0.5, j.y - 1.0, j.z + 2.0};
  auto moved = skeleton_cue(b, a, a);
  for (int i = 0; i < 3; ++i) CHECK(moved[i] == first[i]);
  for (std::size_t p = 0; p < 2; ++p) {
    CHECK(moved[3 + 3 * p] == doctest::Approx(0.5));
    CHECK(moved[4 + 3 * p] == doctest::Approx(-1.0));
    CHECK(moved[5 + 3 * p] == doctest::Approx(2.0));
  }

  for (std::size_t p : {2, 5, 15}) {
    SkeletonFrame f;
    f.joints.assign(p, Joint3{});
    CHECK(skeleton_cue(f, f, f).size() == 3 * (p * (p - 1) / 2 + 2 * p));
  }

  SkeletonFrame short_frame;
  short_frame.joints = {{0, 0, 0}};
  CHECK_THROWS_AS(skeleton_cue(a, short_frame, a), DataError);
}

TEST_CASE("depth fallback descriptor")
{
  DepthFrame flat{20, 10, std::vector<double>(200, 3.0)};
  auto zeros = depth_cue_fallback(flat);
  REQUIRE(zeros.size() == 256);
  for (double v : zeros) CHECK(v == 0.0);

  DepthFrame exact{16, 16, {}};
  for (int i = 0; i < 256; ++i) exact.values.push_back(2.0 + 0.5 * ((i * 37) % 256));
  auto e = depth_cue_fallback(exact);
  double const lo = 2.0, hi = 2.0 + 0.5 * 255;
  for (int i = 0; i < 256; ++i) CHECK(e[i] == doctest::Approx((exact.values[i] - lo) / (hi - lo)).epsilon(1e-12));

  // 32x32 frame made of 2x2 constant blocks
  DepthFrame blocks{32, 32, std::vector<double>(1024)};
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) blocks.values[y * 32 + x] = static_cast<double>((y / 2) * 16 + (x / 2));
  auto bl = depth_cue_fallback(blocks);
  for (int c = 0; c < 256; ++c) CHECK(bl[c] == doctest::Approx(c / 255.0).epsilon(1e-12));

  CHECK_THROWS_AS(depth_cue_fallback(DepthFrame{0, 4, {}}), DataError);
}

TEST_CASE("fourier encoding: dimension, DC property and single-level identity")
{
  Rng rng(9);
  for (std::size_t d : {1, 3, 7})
    for (int levels : {1, 2, 3, 4})
      for (int k : {1, 2, 4}) {
        Matrix cue(17, d);
        for (std::size_t t = 0; t < 17; ++t)
          for (std::size_t j = 0; j < d; ++j) cue(t, j) = uniform(rng, -1, 1);
        auto out = fourier_encode(cue, levels, k);
        CHECK(out.size() == d * static_cast<std::size_t>(k) * ((1U << levels) - 1));
        CHECK(out.size() == fourier_length(d, levels, k));
      }

  // every level-3 segment has at least k = 4 frames, so no zero padding is involved
  Matrix constant(16, 2);
  for (std::size_t t = 0; t < 16; ++t) constant(t, 0) = 1.5, constant(t, 1) = -4.0;
  auto c = fourier_encode(constant, 3, 4);
  for (std::size_t i = 0; i < c.size(); ++i)
    if (i % 4 != 0) CHECK(c[i] < 1e-9);
    else CHECK(c[i] > 0.0);

  // a segment shorter than k is zero-padded, which leaks a constant into the non-DC bins
  Matrix short_constant(3, 1, 2.0);
  auto padded = fourier_encode(short_constant, 1, 4);
  CHECK(padded[0] == doctest::Approx(6.0));
  CHECK(padded[1] == doctest::Approx(2.0));

  Matrix cue(10, 2);
  for (std::size_t t = 0; t < 10; ++t) cue(t, 0) = uniform(rng, -1, 1), cue(t, 1) = uniform(rng, -1, 1);
  auto single = fourier_encode(cue, 1, 3);
  for (std::size_t j = 0; j < 2; ++j) {
    std::vector<double> series;
    for (std::size_t t = 0; t < 10; ++t) series.push_back(cue(t, j));
    auto ref = oracle::dft_magnitudes(series, 3);
    for (int f = 0; f < 3; ++f) CHECK(std::abs(single[j * 3 + f] - ref[f]) < 1e-12);
  }

  Matrix cosine(8, 1);
  for (int t = 0; t < 8; ++t) cosine(t, 0) = std::cos(2 * std::numbers::pi * t / 8);
  auto cs = fourier_encode(cosine, 1, 2);
  CHECK(cs[0] < 1e-12);
  CHECK(cs[1] == doctest::Approx(4.0));
}

TEST_CASE("fourier encoding: segment layout with the remainder in the last segment")
{
  // T = 7 at level 2 splits into [0, 3) and [3, 7); DC magnitude is the segment sum.
  Matrix cue(7, 1);
  for (int t = 0; t < 7; ++t) cue(t, 0) = t + 1;
  auto out = fourier_encode(cue, 2, 1);
  REQUIRE(out.size() == 3);
  CHECK(out[0] == doctest::Approx(28));
  CHECK(out[1] == doctest::Approx(1 + 2 + 3));
  CHECK(out[2] == doctest::Approx(4 + 5 + 6 + 7));

  // fewer frames than segments still produces finite output of the right length
  Matrix tiny(1, 2);
  tiny(0, 0) = 1, tiny(0, 1) = 2;
  auto t = fourier_encode(tiny, 3, 4);
  CHECK(t.size() == fourier_length(2, 3, 4));
  for (double v : t) CHECK(std::isfinite(v));
}

TEST_CASE("assemble features: dimensions, single frame and test-time sequences")
{
  KLRFConfig config;
  auto s = fixture::sequence("a", "walk", 9, 15, 4);
  s.planes.push_back(plane({1, 0, 0}, 0.0, "wall"));
  s.planes.push_back(plane({1, 0, 0}, 2.0, "door"));
  s.planes.push_back(plane({0, 0, 1}, 2.5, "ceiling"));
  auto sample = assemble_features(s, config);
  CHECK(sample.appearance.size() == 4 * 4 * 7);
  std::size_t const layout = 3 * 15 * 5 * 4 * 7;
  CHECK(layout == 6300);
  std::size_t const skeleton = 3 * (15 * 14 / 2 + 2 * 15) * 4 * 7;
  CHECK(sample.kinematic.size() == layout + skeleton);
  CHECK(sample.augmentation_group == "a");

  auto one = fixture::sequence("b", "walk", 1, 3, 4);
  auto single = assemble_features(one, config);
  for (double v : single.kinematic) CHECK(std::isfinite(v));

  auto stripped = assemble_features(strip_privileged(s), config);
  CHECK(stripped.kinematic.empty());
  CHECK(stripped.appearance == sample.appearance);

  auto none = strip_privileged(s);
  none.appearance_frames.reset();
  CHECK_THROWS_WITH_AS(assemble_features(none, config), doctest::Contains("appearance_frames"), DataError);
}

TEST_CASE("assemble features: in-plane translation leaves the layout block unchanged")
{
  KLRFConfig config;
  auto s = fixture::sequence("a", "walk", 8, 4, 4);
  s.planes = {plane({0, 0, 1}, 0.0, "floor"), plane({0, 0, 1}, 0.8, "bed")};
  auto moved = features::translate_joints(s, {2.0, -1.0, 0.0});
  auto a = assemble_features(s, config), b = assemble_features(moved, config);
  std::size_t const layout = fourier_length(3 * 4 * 2, 3, 4);
  for (std::size_t i = 0; i < layout; ++i) CHECK(std::abs(a.kinematic[i] - b.kinematic[i]) < 1e-12);
}

TEST_CASE("augment: counts, labels, groups and isometry")
{
  auto s = fixture::sequence("a", "walk", 12, 5, 4);
  AugmentationConfig config;
  Rng rng(3);
  auto variants = augment(s, config, rng);
  CHECK(variants.size() == 25);  // plus the original, 26 samples per sequence
  for (auto const & v : variants) {
    CHECK(v.label == s.label);
    CHECK(v.group() == s.group());
    CHECK(v.length() == s.length());
  }

  // rotation variants are indices 10..14
  for (int i = 10; i < 15; ++i) {
    auto const & v = variants[i];
    for (std::size_t t = 0; t < s.frames.size(); ++t) {
      auto const & a = s.frames[t].joints;
      auto const & b = v.frames[t].joints;
      for (std::size_t p = 0; p < a.size(); ++p)
        for (std::size_t q = p + 1; q < a.size(); ++q) CHECK(std::abs(dist(a[p], a[q]) - dist(b[p], b[q])) < 1e-9);
      auto la = layout_cue(s.frames[t], s.planes), lb = layout_cue(v.frames[t], v.planes);
      for (std::size_t e = 0; e < la.size(); e += 3)
        CHECK(std::abs(norm3(la[e], la[e + 1], la[e + 2]) - norm3(lb[e], lb[e + 1], lb[e + 2])) < 1e-9);
    }
    for (auto const & p : v.planes) CHECK(norm3(p.normal[0], p.normal[1], p.normal[2]) == doctest::Approx(1.0));
  }

  // translations move joints only
  for (int i = 0; i < 10; ++i) CHECK(variants[i].planes == s.planes);

  // offsets rotate the frame order cyclically, clamped at T-1
  auto shifted = temporal_offset(s, 3);
  CHECK(shifted.frames[0].joints == s.frames[3].joints);
  CHECK(shifted.frames[11].joints == s.frames[2].joints);
  CHECK(temporal_offset(s, 50).frames[0].joints == s.frames[11].joints);
  CHECK(temporal_offset(s, 0) == s);

  AugmentationConfig product;
  product.translations = 2;
  product.rotations = 3;
  product.temporal_offsets = 2;
  product.product = true;
  CHECK(augment(s, product, rng).size() == 12);
  CHECK(augment(s, AugmentationConfig{0, 0, 60, 0, false}, rng).empty());
  CHECK(augment(s, AugmentationConfig{0, 0, 60, 0, true}, rng).empty());
}

TEST_CASE("augment: deterministic for a fixed stream")
{
  auto s = fixture::sequence("a", "walk");
  Rng r1(77), r2(77);
  CHECK(augment(s, AugmentationConfig{}, r1) == augment(s, AugmentationConfig{}, r2));
}
