#include "klrf/core.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace klrf {

std::size_t ActionSequence::length() const
{
  if (!frames.empty()) return frames.size();
  if (appearance_frames) return appearance_frames->rows();
  return depth_frames.size();
}

ActionSequence strip_privileged(ActionSequence sequence)
{
  sequence.frames.clear();
  sequence.planes.clear();
  return sequence;
}

//============================================================================
// ClassDistribution
//============================================================================

ClassDistribution::ClassDistribution(std::vector<double> probs) : probs_(std::move(probs))
{
  if (probs_.empty()) throw InvariantError("ClassDistribution: empty");
  double sum = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw InvariantError("ClassDistribution: negative or non-finite entry");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw InvariantError("ClassDistribution: entries do not sum to 1");
}

ClassDistribution ClassDistribution::from_counts(std::span<const double> counts)
{
  double total = 0.0;
  for (double c : counts) {
    if (!(c >= 0.0)) throw InvariantError("ClassDistribution: negative count");
    total += c;
  }
  if (!(total > 0.0)) throw InvariantError("ClassDistribution: no mass");
  std::vector<double> probs(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) probs[i] = counts[i] / total;
  return ClassDistribution(std::move(probs));
}

ClassDistribution ClassDistribution::uniform(std::size_t num_classes)
{
  return ClassDistribution(std::vector<double>(num_classes, 1.0 / static_cast<double>(num_classes)));
}

ClassDistribution ClassDistribution::one_hot(std::size_t num_classes, std::size_t index)
{
  std::vector<double> probs(num_classes, 0.0);
  probs.at(index) = 1.0;
  return ClassDistribution(std::move(probs));
}

std::size_t ClassDistribution::argmax() const
{
  return static_cast<std::size_t>(std::max_element(probs_.begin(), probs_.end()) - probs_.begin());
}

//============================================================================
// LabelMap
//============================================================================

LabelMap::LabelMap(std::vector<std::string> names) : names_(std::move(names))
{
  std::sort(names_.begin(), names_.end());
  names_.erase(std::unique(names_.begin(), names_.end()), names_.end());
}

LabelMap LabelMap::from_sequences(std::span<const ActionSequence> sequences)
{
  std::vector<std::string> names;
  names.reserve(sequences.size());
  for (auto const & s : sequences) names.push_back(s.label);
  return LabelMap(std::move(names));
}

std::optional<int> LabelMap::find(std::string const & name) const
{
  auto it = std::lower_bound(names_.begin(), names_.end(), name);
  if (it == names_.end() || *it != name) return std::nullopt;
  return static_cast<int>(it - names_.begin());
}

int LabelMap::index_of(std::string const & name) const
{
  if (auto idx = find(name)) return *idx;
  throw DataError("unknown class name '" + name + "'");
}

//============================================================================
// KLRFConfig
//============================================================================

void KLRFConfig::validate() const
{
  auto fail = [](std::string const & msg) { throw ConfigError("invalid configuration: " + msg); };
  if (num_trees < 1) fail("num_trees must be >= 1");
  if (!(eta_fraction > 0.0 && eta_fraction < 1.0)) fail("eta_fraction must lie in (0, 1)");
  if (candidates_per_node < 1) fail("candidates_per_node must be >= 1");
  if (min_samples_leaf < 1) fail("min_samples_leaf must be >= 1");
  if (!(qv_switch_prob >= 0.0 && qv_switch_prob <= 1.0)) fail("qv_switch_prob must lie in [0, 1]");
  if (kcf_bandwidth && !(*kcf_bandwidth > 0.0)) fail("kcf_bandwidth must be positive");
  if (!(weight_clamp_epsilon > 0.0)) fail("weight_clamp_epsilon must be positive");
  if (pyramid_levels < 1 || pyramid_levels > 12) fail("pyramid_levels must lie in [1, 12]");
  if (fourier_coeffs_per_segment < 1) fail("fourier_coeffs_per_segment must be >= 1");
  if (augmentation.translations < 0 || augmentation.rotations < 0 || augmentation.temporal_offsets < 0)
    fail("augmentation counts must be >= 0");
  if (!(augmentation.rotation_max_deg >= 0.0 && augmentation.rotation_max_deg <= 180.0))
    fail("rotation_max_deg must lie in [0, 180]");
}

//============================================================================
// validate_dataset
//============================================================================

std::vector<std::string> validate_dataset(std::span<const ActionSequence> sequences)
{
  std::vector<std::string> report;
  if (sequences.empty()) {
    report.emplace_back("dataset contains no sequences");
    return report;
  }

  std::optional<std::size_t> joint_count;
  std::optional<std::size_t> appearance_dim;
  std::optional<std::vector<std::string>> plane_labels;
  std::set<std::string> ids;

  for (auto const & seq : sequences) {
    std::string const where = "sequence '" + seq.id + "': ";
    if (!ids.insert(seq.id).second) report.push_back(where + "duplicate sequence id");
    if (seq.label.empty()) report.push_back(where + "missing class label");

    std::size_t const t = seq.length();
    if (t == 0) report.push_back(where + "sequence has no frames");

    for (auto const & frame : seq.frames) {
      if (!joint_count) joint_count = frame.joints.size();
      if (frame.joints.size() != *joint_count) {
        std::ostringstream msg;
        msg << where << "joint-count mismatch (frame " << frame.t << " has " << frame.joints.size()
            << " joints, expected " << *joint_count << ")";
        report.push_back(msg.str());
        break;
      }
      bool finite = true;
      for (auto const & j : frame.joints)
        finite = finite && std::isfinite(j.x) && std::isfinite(j.y) && std::isfinite(j.z);
      if (!finite) {
        report.push_back(where + "non-finite joint coordinate");
        break;
      }
    }
    if (!seq.frames.empty() && seq.frames.front().joints.size() < 2)
      report.push_back(where + "skeleton needs at least 2 joints");

    if (seq.appearance_frames) {
      auto const & app = *seq.appearance_frames;
      if (!appearance_dim) appearance_dim = app.cols();
      if (app.cols() != *appearance_dim) {
        std::ostringstream msg;
        msg << where << "appearance dimension mismatch (" << app.cols() << " vs " << *appearance_dim << ")";
        report.push_back(msg.str());
      }
      if (!seq.frames.empty() && app.rows() != seq.frames.size())
        report.push_back(where + "appearance row count differs from skeleton frame count");
    }
    if (!seq.depth_frames.empty() && !seq.frames.empty() && seq.depth_frames.size() != seq.frames.size())
      report.push_back(where + "depth frame count differs from skeleton frame count");

    std::set<std::string> seen_labels;
    std::vector<std::string> labels;
    for (auto const & plane : seq.planes) {
      double const norm = std::sqrt(plane.normal[0] * plane.normal[0] + plane.normal[1] * plane.normal[1] +
                                    plane.normal[2] * plane.normal[2]);
      if (!(std::abs(norm - 1.0) <= 1e-9)) {
        std::ostringstream msg;
        msg << where << "plane '" << plane.label << "' has non-unit normal (norm " << norm << ")";
        report.push_back(msg.str());
      }
      if (!seen_labels.insert(plane.label).second)
        report.push_back(where + "duplicate plane label '" + plane.label + "'");
      labels.push_back(plane.label);
    }
    if (!labels.empty()) {
      if (!plane_labels) plane_labels = labels;
      else if (*plane_labels != labels)
        report.push_back(where + "plane labels differ from the dataset's declared order");
    }
  }
  return report;
}

} // namespace klrf
