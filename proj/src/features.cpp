#include "klrf/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace klrf::features {

namespace {

void push3(std::vector<double> & out, double x, double y, double z)
{
  out.push_back(x);
  out.push_back(y);
  out.push_back(z);
}

Joint3 rotate_point(Joint3 const & p, double const (&r)[3][3])
{
  return {r[0][0] * p.x + r[0][1] * p.y + r[0][2] * p.z,
          r[1][0] * p.x + r[1][1] * p.y + r[1][2] * p.z,
          r[2][0] * p.x + r[2][1] * p.y + r[2][2] * p.z};
}

std::array<double, 3> random_unit(Rng & rng)
{
  for (;;) {
    double x = standard_normal(rng), y = standard_normal(rng), z = standard_normal(rng);
    double const n = std::sqrt(x * x + y * y + z * z);
    if (n > 1e-12) return {x / n, y / n, z / n};
  }
}

double joint_bbox_diagonal(ActionSequence const & sequence)
{
  double lo[3] = {INFINITY, INFINITY, INFINITY};
  double hi[3] = {-INFINITY, -INFINITY, -INFINITY};
  bool any = false;
  for (auto const & f : sequence.frames)
    for (auto const & j : f.joints) {
      double const v[3] = {j.x, j.y, j.z};
      for (int a = 0; a < 3; ++a) {
        lo[a] = std::min(lo[a], v[a]);
        hi[a] = std::max(hi[a], v[a]);
      }
      any = true;
    }
  if (!any) return 0.0;
  return std::sqrt((hi[0] - lo[0]) * (hi[0] - lo[0]) + (hi[1] - lo[1]) * (hi[1] - lo[1]) +
                   (hi[2] - lo[2]) * (hi[2] - lo[2]));
}

std::string variant_group(ActionSequence const & sequence) { return sequence.group(); }

} // namespace

//============================================================================
// Per-frame cues
//============================================================================

std::vector<double> layout_cue(SkeletonFrame const & frame, std::span<const LayoutPlane> planes)
{
  std::vector<double> out;
  out.reserve(3 * frame.joints.size() * planes.size());
  for (auto const & p : frame.joints)
    for (auto const & plane : planes) {
      double const dist = plane.signed_distance(p);
      push3(out, dist * plane.normal[0], dist * plane.normal[1], dist * plane.normal[2]);
    }
  return out;
}

std::vector<double> skeleton_cue(SkeletonFrame const & frame, SkeletonFrame const & previous,
                                 SkeletonFrame const & first)
{
  std::size_t const n = frame.joints.size();
  if (previous.joints.size() != n || first.joints.size() != n)
    throw DataError("skeleton_cue: frames disagree on joint count");

  std::vector<double> out;
  out.reserve(3 * (n * (n - 1) / 2 + 2 * n));
  auto const & j = frame.joints;
  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t q = p + 1; q < n; ++q) push3(out, j[p].x - j[q].x, j[p].y - j[q].y, j[p].z - j[q].z);
  for (std::size_t p = 0; p < n; ++p)
    push3(out, j[p].x - previous.joints[p].x, j[p].y - previous.joints[p].y, j[p].z - previous.joints[p].z);
  for (std::size_t p = 0; p < n; ++p)
    push3(out, j[p].x - first.joints[p].x, j[p].y - first.joints[p].y, j[p].z - first.joints[p].z);
  return out;
}

std::vector<double> depth_cue_fallback(DepthFrame const & frame)
{
  if (frame.width <= 0 || frame.height <= 0) throw DataError("depth frame has zero area");
  std::size_t const w = static_cast<std::size_t>(frame.width);
  std::size_t const h = static_cast<std::size_t>(frame.height);
  if (frame.values.size() != w * h) throw DataError("depth frame value count does not match its size");

  constexpr std::size_t g = kFallbackGrid;
  std::vector<double> sum(g * g, 0.0);
  std::vector<int> count(g * g, 0);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      std::size_t const cell = (y * g / h) * g + (x * g / w);
      sum[cell] += frame.values[y * w + x];
      ++count[cell];
    }

  std::vector<double> grid(g * g);
  for (std::size_t cy = 0; cy < g; ++cy)
    for (std::size_t cx = 0; cx < g; ++cx) {
      std::size_t const cell = cy * g + cx;
      if (count[cell] > 0) {
        grid[cell] = sum[cell] / count[cell];
      } else {
        // frames smaller than the grid: sample the covering pixel
        std::size_t const y = std::min(h - 1, (2 * cy + 1) * h / (2 * g));
        std::size_t const x = std::min(w - 1, (2 * cx + 1) * w / (2 * g));
        grid[cell] = frame.values[y * w + x];
      }
    }

  auto [mn, mx] = std::minmax_element(grid.begin(), grid.end());
  double const lo = *mn, range = *mx - *mn;
  if (!(range > 0.0)) return std::vector<double>(g * g, 0.0);
  for (double & v : grid) v = (v - lo) / range;
  return grid;
}

//============================================================================
// Temporal encoding
//============================================================================

std::size_t fourier_length(std::size_t d, int levels, int k)
{
  return d * static_cast<std::size_t>(k) * ((std::size_t{1} << levels) - 1);
}

std::vector<double> fourier_encode(Matrix const & cue, int levels, int k)
{
  if (levels < 1 || k < 1) throw std::invalid_argument("fourier_encode: levels and k must be >= 1");
  std::size_t const t_len = cue.rows();
  std::size_t const d = cue.cols();
  if (t_len == 0) throw DataError("fourier_encode: empty cue");

  std::vector<double> out;
  out.reserve(fourier_length(d, levels, k));
  std::vector<double> series;
  for (int level = 1; level <= levels; ++level) {
    std::size_t const segments = std::size_t{1} << (level - 1);
    std::size_t const base = t_len / segments;
    for (std::size_t s = 0; s < segments; ++s) {
      std::size_t begin, end;
      if (base >= 1) {
        begin = s * base;
        end = (s + 1 == segments) ? t_len : begin + base;
      } else {
        begin = std::min(s, t_len);
        end = std::min(s + 1, t_len);
      }
      for (std::size_t j = 0; j < d; ++j) {
        series.clear();
        for (std::size_t t = begin; t < end; ++t) series.push_back(cue(t, j));
        if (series.empty()) series.push_back(0.0);
        auto mags = numeric::dft_low_magnitudes(series, static_cast<std::size_t>(k));
        out.insert(out.end(), mags.begin(), mags.end());
      }
    }
  }
  return out;
}

//============================================================================
// Sequence-level cue matrices
//============================================================================

CueMatrix depth_cues(ActionSequence const & sequence)
{
  if (sequence.appearance_frames) return {CueKind::Depth, *sequence.appearance_frames};
  if (!sequence.depth_frames.empty()) {
    std::size_t const cells = kFallbackGrid * kFallbackGrid;
    Matrix m(sequence.depth_frames.size(), cells);
    for (std::size_t t = 0; t < sequence.depth_frames.size(); ++t) {
      auto row = depth_cue_fallback(sequence.depth_frames[t]);
      std::copy(row.begin(), row.end(), m.row(t).begin());
    }
    return {CueKind::Depth, std::move(m)};
  }
  throw DataError("sequence '" + sequence.id +
                  "' has no appearance source; supply appearance_frames (or depth frames for the fallback descriptor)");
}

CueMatrix layout_cues(ActionSequence const & sequence)
{
  if (sequence.frames.empty() || sequence.planes.empty()) throw DataError("layout cue needs skeletons and planes");
  std::size_t const d = 3 * sequence.frames.front().joints.size() * sequence.planes.size();
  Matrix m(sequence.frames.size(), d);
  for (std::size_t t = 0; t < sequence.frames.size(); ++t) {
    auto row = layout_cue(sequence.frames[t], sequence.planes);
    if (row.size() != d) throw DataError("sequence '" + sequence.id + "': joint count changes over time");
    std::copy(row.begin(), row.end(), m.row(t).begin());
  }
  return {CueKind::Layout, std::move(m)};
}

CueMatrix skeleton_cues(ActionSequence const & sequence)
{
  if (sequence.frames.empty()) throw DataError("skeleton cue needs skeleton frames");
  std::size_t const p = sequence.frames.front().joints.size();
  std::size_t const d = 3 * (p * (p - 1) / 2 + 2 * p);
  Matrix m(sequence.frames.size(), d);
  for (std::size_t t = 0; t < sequence.frames.size(); ++t) {
    auto const & prev = sequence.frames[t == 0 ? 0 : t - 1];
    auto row = skeleton_cue(sequence.frames[t], prev, sequence.frames.front());
    std::copy(row.begin(), row.end(), m.row(t).begin());
  }
  return {CueKind::Skeleton, std::move(m)};
}

Sample assemble_features(ActionSequence const & sequence, KLRFConfig const & config)
{
  int const levels = config.pyramid_levels;
  int const k = config.fourier_coeffs_per_segment;

  Sample sample;
  sample.appearance = fourier_encode(depth_cues(sequence).values, levels, k);
  if (sequence.has_kinematics()) {
    sample.kinematic = fourier_encode(layout_cues(sequence).values, levels, k);
    auto skel = fourier_encode(skeleton_cues(sequence).values, levels, k);
    sample.kinematic.insert(sample.kinematic.end(), skel.begin(), skel.end());
  }
  sample.augmentation_group = sequence.group();
  return sample;
}

//============================================================================
// Augmentation
//============================================================================

Joint3 scene_centroid(ActionSequence const & sequence)
{
  Joint3 c;
  double n = 0;
  for (auto const & f : sequence.frames)
    for (auto const & j : f.joints) {
      c.x += j.x;
      c.y += j.y;
      c.z += j.z;
      n += 1;
    }
  if (n > 0) {
    c.x /= n;
    c.y /= n;
    c.z /= n;
  }
  return c;
}

ActionSequence temporal_offset(ActionSequence const & sequence, int offset)
{
  std::size_t const t_len = sequence.length();
  ActionSequence out = sequence;
  if (t_len == 0) return out;
  std::size_t const o = static_cast<std::size_t>(std::clamp<long long>(offset, 0, static_cast<long long>(t_len) - 1));
  if (o == 0) return out;

  if (!sequence.frames.empty()) {
    for (std::size_t t = 0; t < t_len; ++t) {
      out.frames[t].joints = sequence.frames[(t + o) % t_len].joints;
      out.frames[t].t = static_cast<int>(t + 1);
    }
  }
  if (sequence.appearance_frames) {
    auto const & src = *sequence.appearance_frames;
    Matrix m(src.rows(), src.cols());
    for (std::size_t t = 0; t < src.rows(); ++t) {
      auto from = src.row((t + o) % src.rows());
      std::copy(from.begin(), from.end(), m.row(t).begin());
    }
    out.appearance_frames = std::move(m);
  }
  if (!sequence.depth_frames.empty()) {
    std::size_t const n = sequence.depth_frames.size();
    for (std::size_t t = 0; t < n; ++t) out.depth_frames[t] = sequence.depth_frames[(t + o) % n];
  }
  return out;
}

ActionSequence rotate(ActionSequence const & sequence, std::array<double, 3> const & axis, double angle,
                      Joint3 const & center)
{
  double const c = std::cos(angle), s = std::sin(angle), ic = 1.0 - c;
  double const x = axis[0], y = axis[1], z = axis[2];
  double const r[3][3] = {{c + x * x * ic, x * y * ic - z * s, x * z * ic + y * s},
                          {y * x * ic + z * s, c + y * y * ic, y * z * ic - x * s},
                          {z * x * ic - y * s, z * y * ic + x * s, c + z * z * ic}};

  ActionSequence out = sequence;
  for (auto & f : out.frames)
    for (auto & j : f.joints) {
      Joint3 const rel{j.x - center.x, j.y - center.y, j.z - center.z};
      Joint3 const rot = rotate_point(rel, r);
      j = {rot.x + center.x, rot.y + center.y, rot.z + center.z};
    }
  for (auto & plane : out.planes) {
    Joint3 const n = rotate_point({plane.normal[0], plane.normal[1], plane.normal[2]}, r);
    // a point on the plane, moved by the same rigid motion
    Joint3 const on{plane.offset * plane.normal[0] - center.x, plane.offset * plane.normal[1] - center.y,
                    plane.offset * plane.normal[2] - center.z};
    Joint3 const moved = rotate_point(on, r);
    plane.normal = {n.x, n.y, n.z};
    plane.offset = n.x * (moved.x + center.x) + n.y * (moved.y + center.y) + n.z * (moved.z + center.z);
  }
  return out;
}

ActionSequence translate_joints(ActionSequence const & sequence, Joint3 const & delta)
{
  ActionSequence out = sequence;
  for (auto & f : out.frames)
    for (auto & j : f.joints) {
      j.x += delta.x;
      j.y += delta.y;
      j.z += delta.z;
    }
  return out;
}

std::vector<ActionSequence> augment(ActionSequence const & sequence, AugmentationConfig const & config, Rng & rng)
{
  std::vector<ActionSequence> variants;
  std::string const group = variant_group(sequence);
  Joint3 const center = scene_centroid(sequence);
  double const max_angle = config.rotation_max_deg * std::numbers::pi / 180.0;
  double const shift_scale = 0.05 * joint_bbox_diagonal(sequence);

  auto random_rotation = [&](ActionSequence const & s) {
    auto axis = random_unit(rng);
    double const angle = uniform(rng, 0.0, max_angle);
    return rotate(s, axis, angle, center);
  };
  auto random_translation = [&](ActionSequence const & s) {
    auto dir = random_unit(rng);
    double const mag = uniform(rng, 0.0, shift_scale);
    return translate_joints(s, {dir[0] * mag, dir[1] * mag, dir[2] * mag});
  };
  auto finish = [&](ActionSequence v, std::string const & suffix) {
    v.id = sequence.id + "~" + suffix;
    v.augmentation_group = group;
    variants.push_back(std::move(v));
  };

  if (!config.product) {
    for (int i = 0; i < config.translations; ++i) finish(random_translation(sequence), "tr" + std::to_string(i));
    for (int i = 0; i < config.rotations; ++i) finish(random_rotation(sequence), "rot" + std::to_string(i));
    for (int i = 0; i < config.temporal_offsets; ++i) finish(temporal_offset(sequence, i), "off" + std::to_string(i));
    return variants;
  }

  if (config.translations <= 0 && config.rotations <= 0 && config.temporal_offsets <= 0) return variants;
  int const nt = std::max(config.translations, 1);
  int const nr = std::max(config.rotations, 1);
  int const no = std::max(config.temporal_offsets, 1);
  for (int a = 0; a < nt; ++a)
    for (int b = 0; b < nr; ++b)
      for (int c = 0; c < no; ++c) {
        ActionSequence v = sequence;
        if (config.translations > 0) v = random_translation(v);
        if (config.rotations > 0) v = random_rotation(v);
        if (config.temporal_offsets > 0) v = temporal_offset(v, c);
        finish(std::move(v), "tr" + std::to_string(a) + "-rot" + std::to_string(b) + "-off" + std::to_string(c));
      }
  return variants;
}

} // namespace klrf::features
