#pragma once

#include "klrf/numeric.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace klrf {

//============================================================================
// Errors. The CLI maps each family to its own exit status.
//============================================================================

class Error : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration or command-line usage.
class ConfigError : public Error
{
  public:
    using Error::Error;
};

/// Malformed, inconsistent or unusable input data (datasets, model files).
class DataError : public Error
{
  public:
    using Error::Error;
};

/// An internal invariant was violated. Indicates a bug rather than bad input.
class InvariantError : public Error
{
  public:
    using Error::Error;
};

//============================================================================
// Geometry and sequences
//============================================================================

struct Joint3
{
    double x = 0, y = 0, z = 0;

    bool operator==(Joint3 const &) const = default;
};

struct SkeletonFrame
{
    std::vector<Joint3> joints;
    int t = 1;  // 1-based frame index

    bool operator==(SkeletonFrame const &) const = default;
};

/// Plane in Hessian normal form: { x : normal . x = offset }, with a unit normal.
struct LayoutPlane
{
    std::array<double, 3> normal{0, 0, 1};
    double offset = 0;
    std::string label;

    /// Signed distance of a point to the plane.
    double signed_distance(Joint3 const & p) const
    {
      return normal[0] * p.x + normal[1] * p.y + normal[2] * p.z - offset;
    }

    bool operator==(LayoutPlane const &) const = default;
};

struct DepthFrame
{
    int width = 0;
    int height = 0;
    std::vector<double> values;  // row-major

    bool operator==(DepthFrame const &) const = default;
};

/// One labeled clip. Frames and planes are privileged: present for training, optional at test time.
struct ActionSequence
{
    std::string id;
    std::string subject;
    std::string view;
    std::string label;
    std::vector<SkeletonFrame> frames;
    std::vector<LayoutPlane> planes;
    std::optional<Matrix> appearance_frames;  // T x d_a
    std::vector<DepthFrame> depth_frames;
    std::string augmentation_group;           // empty means the sequence is its own group

    /// Sequence length T, taken from whichever per-frame stream is present.
    std::size_t length() const;
    std::string const & group() const { return augmentation_group.empty() ? id : augmentation_group; }
    bool has_kinematics() const { return !frames.empty() && !planes.empty(); }

    bool operator==(ActionSequence const &) const = default;
};

/// Removes every privileged field (skeletons and planes), as seen at test time.
ActionSequence strip_privileged(ActionSequence sequence);

//============================================================================
// Learning-side records
//============================================================================

/// Normalized class posterior. Construction enforces nonnegativity and unit sum.
class ClassDistribution
{
  public:
    ClassDistribution() = default;

    /// Wraps an already-normalized vector; throws InvariantError when it is not a distribution.
    explicit ClassDistribution(std::vector<double> probs);

    /// Normalizes nonnegative counts. All-zero counts are rejected.
    static ClassDistribution from_counts(std::span<const double> counts);
    static ClassDistribution uniform(std::size_t num_classes);
    static ClassDistribution one_hot(std::size_t num_classes, std::size_t index);

    std::vector<double> const & probs() const { return probs_; }
    std::size_t size() const { return probs_.size(); }
    double operator[](std::size_t i) const { return probs_[i]; }
    std::size_t argmax() const;

    bool operator==(ClassDistribution const &) const = default;

  private:
    std::vector<double> probs_;
};

/// Per-sequence training/test unit: appearance A(V), kinematic-layout K(V) and bookkeeping.
struct Sample
{
    std::vector<double> appearance;
    std::vector<double> kinematic;             // empty on test samples
    int label_index = -1;                      // -1 when unknown
    std::optional<double> usefulness;
    std::string augmentation_group;
    std::vector<double> appearance_posterior;  // F_A(V); empty until computed
    std::vector<double> kinematic_posterior;   // F_K(V); empty until computed
};

/// Lexicographic bijection between class names and label indices.
class LabelMap
{
  public:
    LabelMap() = default;
    explicit LabelMap(std::vector<std::string> names);  // sorted and de-duplicated

    static LabelMap from_sequences(std::span<const ActionSequence> sequences);

    std::size_t size() const { return names_.size(); }
    std::vector<std::string> const & names() const { return names_; }
    std::string const & name(std::size_t index) const { return names_.at(index); }
    std::optional<int> find(std::string const & name) const;
    /// Throws DataError naming the unknown class.
    int index_of(std::string const & name) const;

    bool operator==(LabelMap const &) const = default;

  private:
    std::vector<std::string> names_;
};

//============================================================================
// Configuration
//============================================================================

struct AugmentationConfig
{
    int translations = 10;
    int rotations = 5;
    double rotation_max_deg = 60.0;
    int temporal_offsets = 10;
    bool product = false;  // compose all three instead of applying them independently

    bool operator==(AugmentationConfig const &) const = default;
};

struct KLRFConfig
{
    int num_trees = 500;
    double eta_fraction = 0.1;
    int candidates_per_node = 100;
    int min_samples_leaf = 1;
    double qv_switch_prob = 0.5;
    std::optional<double> kcf_bandwidth;  // nullopt selects the median pairwise distance
    double weight_clamp_epsilon = 1e-6;
    int pyramid_levels = 3;
    int fourier_coeffs_per_segment = 4;
    AugmentationConfig augmentation;
    std::uint64_t seed = 0;
    bool cross_view_mode = false;
    /// Grow every tree on the full training set instead of a bootstrap resample.
    bool full_bag = false;
    /// Stopping test at Q_k nodes. Q_k(Psi) never exceeds Q_k of the all-left reference split,
    /// so the literal gain Q_k(Psi*) - Q_k(Psi0) is never positive; WeightedEntropy measures the
    /// gain as the weighted class-entropy reduction of the chosen split instead.
    enum class KinematicGain { WeightedEntropy, Literal };
    KinematicGain kinematic_gain = KinematicGain::WeightedEntropy;

    /// Throws ConfigError on out-of-range values.
    void validate() const;

    bool operator==(KLRFConfig const &) const = default;
};

//============================================================================
// Dataset validation
//============================================================================

/// Human-readable list of violations. Empty means the dataset is trainable.
std::vector<std::string> validate_dataset(std::span<const ActionSequence> sequences);

} // namespace klrf
