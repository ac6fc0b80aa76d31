#pragma once
// Small fixtures shared by the unit tests.

#include "klrf/core.hpp"
#include "klrf/rng.hpp"

#include <string>

namespace fixture {

/// Well-formed sequence: `joints` joints drifting over `frames` frames, two planes and
/// a `dim`-dimensional appearance stream.
inline klrf::ActionSequence sequence(std::string id, std::string label, int frames = 6, int joints = 3, int dim = 4,
                                     std::uint64_t seed = 1)
{
  klrf::Rng rng(seed);
  klrf::ActionSequence s;
  s.id = std::move(id);
  s.label = std::move(label);
  s.subject = "s00";
  s.view = "0";
  for (int t = 0; t < frames; ++t) {
    klrf::SkeletonFrame f;
    f.t = t + 1;
    for (int p = 0; p < joints; ++p)
      f.joints.push_back({0.1 * p + klrf::uniform(rng, -0.05, 0.05), 0.5 + 0.01 * t, 1.0 + 0.2 * p});
    s.frames.push_back(f);
  }
  klrf::LayoutPlane bed;
  bed.label = "bed";
  bed.normal = {0, 1, 0};
  bed.offset = 1.0;
  klrf::LayoutPlane floor;
  floor.label = "floor";
  floor.normal = {0, 0, 1};
  floor.offset = 0.0;
  s.planes = {bed, floor};
  klrf::Matrix app(static_cast<std::size_t>(frames), static_cast<std::size_t>(dim));
  for (int t = 0; t < frames; ++t)
    for (int c = 0; c < dim; ++c) app(t, c) = klrf::uniform(rng, -1, 1);
  s.appearance_frames = app;
  return s;
}

inline bool contains(std::vector<std::string> const & report, std::string const & needle)
{
  for (auto const & line : report)
    if (line.find(needle) != std::string::npos) return true;
  return false;
}

} // namespace fixture
