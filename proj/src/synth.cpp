#include "klrf/synth.hpp"

#include "klrf/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

namespace klrf::synth {

namespace {

constexpr double kPi = std::numbers::pi;

// Rotation centre of the camera azimuth, near the bed edge.
constexpr Joint3 kSceneCenter{0.6, 1.0, 0.0};

constexpr std::uint64_t kSubjectTag = 0x7375626a;
constexpr std::uint64_t kTrainTag = 0x74726e;
constexpr std::uint64_t kTestTag = 0x747374;

enum class Kind { Static, Dynamic };

struct ClassRole
{
    Kind kind;
    int rank;   // position within its subset
    int count;  // size of its subset
};

ClassRole role_of(SynthConfig const & config, int c)
{
  auto rank_in = [c](std::vector<int> const & v) {
    auto it = std::find(v.begin(), v.end(), c);
    return it == v.end() ? -1 : static_cast<int>(it - v.begin());
  };
  if (int r = rank_in(config.kinematic_classes); r >= 0)
    return {Kind::Static, r, static_cast<int>(config.kinematic_classes.size())};
  return {Kind::Dynamic, rank_in(config.appearance_classes), static_cast<int>(config.appearance_classes.size())};
}

// Body pose as a blend between lying on the bed (e = 0) and standing beside it (e = 1).
Joint3 pose_joint(double e, double shift_x, int p, int joints)
{
  double const u = joints > 1 ? static_cast<double>(p) / (joints - 1) : 0.0;
  Joint3 const lying{0.2 + 0.9 * u, 1.4, 0.6};
  Joint3 const standing{0.6, 0.4, 0.05 + 1.65 * (1.0 - u)};
  return {(1 - e) * lying.x + e * standing.x + shift_x, (1 - e) * lying.y + e * standing.y,
          (1 - e) * lying.z + e * standing.z};
}

struct Subject
{
    double dx = 0, dy = 0;
};

Subject subject_params(SynthConfig const & config, int subject)
{
  Rng rng(derive_seed(config.seed, kSubjectTag + static_cast<std::uint64_t>(subject)));
  double const s = 3.0 * config.sigma_k;
  return {s * standard_normal(rng), s * standard_normal(rng)};
}

Joint3 rotate_z(Joint3 const & p, double angle)
{
  double const c = std::cos(angle), s = std::sin(angle);
  double const x = p.x - kSceneCenter.x, y = p.y - kSceneCenter.y;
  return {kSceneCenter.x + c * x - s * y, kSceneCenter.y + s * x + c * y, p.z};
}

std::vector<LayoutPlane> planes_at(double angle)
{
  LayoutPlane bed;
  bed.label = "bed";
  bed.normal = {0.0, 1.0, 0.0};
  bed.offset = 1.0;
  LayoutPlane floor;
  floor.label = "floor";
  floor.normal = {0.0, 0.0, 1.0};
  floor.offset = 0.0;
  if (angle != 0.0) {
    // rotate the bed plane about the vertical axis through the scene centre
    double const c = std::cos(angle), s = std::sin(angle);
    std::array<double, 3> const n{-s, c, 0.0};
    Joint3 const on_plane = rotate_z({kSceneCenter.x, 1.0, 0.0}, angle);
    bed.normal = n;
    bed.offset = n[0] * on_plane.x + n[1] * on_plane.y;
  }
  return {bed, floor};
}

/// Renders one clip. `noise` is null for the noise-free prototype.
ActionSequence render(SynthConfig const & config, int c, Subject const & subject, double degrees, Rng * noise)
{
  ClassRole const role = role_of(config, c);
  int const T = config.frames_per_sequence;
  int const P = config.joint_count;
  int const d = config.appearance_dim;
  double const angle = degrees * kPi / 180.0;

  double e = 1.0, shift_x = 0.6;  // dynamic classes share one standing pose away from the bed
  if (role.kind == Kind::Static) {
    e = role.count > 1 ? static_cast<double>(role.rank) / (role.count - 1) : 0.5;
    shift_x = 0.0;
  }

  ActionSequence seq;
  seq.label = class_name(config, c);
  seq.view = view_label(degrees);
  seq.planes = planes_at(angle);

  // Joint noise and appearance noise come from the same clip stream in a fixed order, so every
  // view of one clip shares its noise.
  std::vector<double> joint_noise(static_cast<std::size_t>(T) * P * 3, 0.0);
  std::vector<double> app_noise(static_cast<std::size_t>(T) * d, 0.0);
  double phase = 0.0;  // where in its cycle the clip starts
  if (noise) {
    for (double & v : joint_noise) v = config.sigma_k * standard_normal(*noise);
    for (double & v : app_noise) v = config.sigma_a * standard_normal(*noise);
    if (config.random_phase) phase = 2 * kPi * uniform01(*noise);
  }

  for (int t = 0; t < T; ++t) {
    SkeletonFrame frame;
    frame.t = t + 1;
    double const breathe = 0.01 * std::sin(2 * kPi * t / T);
    for (int p = 0; p < P; ++p) {
      Joint3 j = pose_joint(e, shift_x, p, P);
      std::size_t const k = (static_cast<std::size_t>(t) * P + p) * 3;
      j.x += subject.dx + joint_noise[k];
      j.y += subject.dy + joint_noise[k + 1];
      j.z += breathe + joint_noise[k + 2];
      frame.joints.push_back(rotate_z(j, angle));
    }
    seq.frames.push_back(std::move(frame));
  }

  Matrix app(static_cast<std::size_t>(T), static_cast<std::size_t>(d));
  for (int t = 0; t < T; ++t)
    for (int ch = 0; ch < d; ++ch) {
      double v;
      if (role.kind == Kind::Static) {
        v = 0.5 * std::cos(0.9 * ch);
        if (ch == role.rank % d) v += config.kinematic_appearance_leak;
      } else {
        double const f = 1.0 + role.rank;
        v = std::sin(2 * kPi * f * t / T + 0.7 * ch + f * phase);
      }
      app(t, ch) = v + app_noise[static_cast<std::size_t>(t) * d + ch];
    }
  // The camera azimuth mixes channel pairs like a planar rotation.
  double const ca = std::cos(angle), sa = std::sin(angle);
  for (int t = 0; t < T; ++t)
    for (int ch = 0; ch + 1 < d; ch += 2) {
      double const a = app(t, ch), b = app(t, ch + 1);
      app(t, ch) = ca * a - sa * b;
      app(t, ch + 1) = sa * a + ca * b;
    }
  seq.appearance_frames = std::move(app);
  return seq;
}

std::string pad2(int v)
{
  return v < 10 ? "0" + std::to_string(v) : std::to_string(v);
}

std::string pad4(int v)
{
  std::string s = std::to_string(v);
  return std::string(s.size() < 4 ? 4 - s.size() : 0, '0') + s;
}

} // namespace

void SynthConfig::validate() const
{
  if (num_classes < 2) throw ConfigError("synth: need at least 2 classes");
  std::set<int> seen;
  for (int c : kinematic_classes)
    if (!seen.insert(c).second) throw ConfigError("synth: class subsets overlap");
  for (int c : appearance_classes)
    if (!seen.insert(c).second) throw ConfigError("synth: class subsets overlap");
  if (static_cast<int>(seen.size()) != num_classes || *seen.begin() != 0 || *seen.rbegin() != num_classes - 1)
    throw ConfigError("synth: class subsets must partition 0..num_classes-1");
  if (!(sigma_a >= 0) || !(sigma_k >= 0)) throw ConfigError("synth: noise levels must be >= 0");
  if (!std::isfinite(kinematic_appearance_leak)) throw ConfigError("synth: leak must be finite");
  if (sequences_per_class < 1 || test_sequences_per_class < 0) throw ConfigError("synth: bad sequence counts");
  if (frames_per_sequence < 2) throw ConfigError("synth: need at least 2 frames per sequence");
  if (appearance_dim < 2 || appearance_dim % 2 != 0) throw ConfigError("synth: appearance_dim must be even and >= 2");
  if (joint_count < 2) throw ConfigError("synth: need at least 2 joints");
  if (train_subjects < 1 || test_subjects < 1) throw ConfigError("synth: need at least one subject per split");
  if (views.empty()) throw ConfigError("synth: need at least one view");
  for (double v : views)
    if (!std::isfinite(v)) throw ConfigError("synth: views must be finite");
}

std::string class_name(SynthConfig const & config, int c)
{
  return "c" + pad2(c) + (role_of(config, c).kind == Kind::Static ? "_static" : "_dynamic");
}

std::string view_label(double degrees)
{
  double const r = std::round(degrees);
  if (r == degrees) return std::to_string(static_cast<long long>(r));
  std::string s = std::to_string(degrees);
  s.erase(s.find_last_not_of('0') + 1);
  return s;
}

ActionSequence prototype(SynthConfig const & config, int c, double degrees)
{
  config.validate();
  ActionSequence seq = render(config, c, Subject{}, degrees, nullptr);
  seq.id = "proto_c" + pad2(c) + "_v" + seq.view;
  return seq;
}

SynthData synth_generate(SynthConfig const & config)
{
  config.validate();
  SynthData out;
  std::uint64_t const train_seed = derive_seed(config.seed, kTrainTag);
  std::uint64_t const test_seed = derive_seed(config.seed, kTestTag);

  for (int c = 0; c < config.num_classes; ++c)
    for (int i = 0; i < config.sequences_per_class; ++i) {
      int const subject = i % config.train_subjects;
      Rng rng(derive_seed(train_seed, static_cast<std::uint64_t>(c) * 1000003U + static_cast<std::uint64_t>(i)));
      ActionSequence seq = render(config, c, subject_params(config, subject), config.views.front(), &rng);
      seq.id = "tr_c" + pad2(c) + "_" + pad4(i);
      seq.subject = "s" + pad2(subject);
      out.train.push_back(std::move(seq));
    }

  for (double view : config.views)
    for (int c = 0; c < config.num_classes; ++c)
      for (int i = 0; i < config.test_sequences_per_class; ++i) {
        int const subject = config.train_subjects + i % config.test_subjects;
        Rng rng(derive_seed(test_seed, static_cast<std::uint64_t>(c) * 1000003U + static_cast<std::uint64_t>(i)));
        ActionSequence seq = render(config, c, subject_params(config, subject), view, &rng);
        seq.id = "te_c" + pad2(c) + "_" + pad4(i) + "_v" + seq.view;
        seq.subject = "s" + pad2(subject);
        out.test.push_back(std::move(seq));
      }
  return out;
}

} // namespace klrf::synth
