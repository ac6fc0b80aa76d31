#pragma once

#include "klrf/core.hpp"
#include "klrf/rng.hpp"

#include <functional>

namespace klrf::forest {

/// Which per-sample vector the split functions threshold.
enum class FeatureSource : std::uint8_t { Appearance = 0, Kinematic = 1 };

/// Quality function used at a split node.
enum class QualityChoice : std::uint8_t { Switch = 0, Appearance = 1, KinematicLayout = 2, ViewClustering = 3 };

char const * to_string(QualityChoice choice);

inline std::span<const double> features_of(Sample const & s, FeatureSource source)
{
  return source == FeatureSource::Appearance ? std::span<const double>(s.appearance)
                                             : std::span<const double>(s.kinematic);
}

/// Psi(gamma, tau): a sample goes left iff feature[gamma] < tau.
struct SplitFunction
{
    std::uint32_t gamma = 0;
    double tau = 0;

    bool goes_left(std::span<const double> features) const { return features[gamma] < tau; }
    bool operator==(SplitFunction const &) const = default;
};

struct Leaf
{
    ClassDistribution class_hist;
    std::vector<std::uint32_t> members;  // training-sample indices reaching the leaf (with bootstrap repeats)

    std::size_t count() const { return members.size(); }
    bool operator==(Leaf const &) const = default;
};

/// Flat binary tree; nodes[0] is the root and children always follow their parent (preorder).
struct Tree
{
    struct Node
    {
        bool is_leaf = true;
        SplitFunction split;
        QualityChoice choice = QualityChoice::Appearance;
        std::int32_t left = -1, right = -1;  // node indices, split nodes only
        std::int32_t leaf = -1;              // index into leaves, leaf nodes only

        bool operator==(Node const &) const = default;
    };

    std::vector<Node> nodes;
    std::vector<Leaf> leaves;

    Leaf const & route(std::span<const double> features) const;
    std::size_t depth() const;
    bool operator==(Tree const &) const = default;
};

/// In-bag flags of one tree's bootstrap, one bit per training sample.
class Bitmap
{
  public:
    Bitmap() = default;
    explicit Bitmap(std::size_t size) : size_(size), words_((size + 63) / 64, 0) {}

    std::size_t size() const { return size_; }
    bool test(std::size_t i) const { return (words_[i / 64] >> (i % 64)) & 1U; }
    void set(std::size_t i) { words_[i / 64] |= std::uint64_t{1} << (i % 64); }
    std::vector<std::uint64_t> const & words() const { return words_; }
    static Bitmap from_words(std::size_t size, std::vector<std::uint64_t> words);

    bool operator==(Bitmap const &) const = default;

  private:
    std::size_t size_ = 0;
    std::vector<std::uint64_t> words_;
};

struct Forest
{
    std::vector<Tree> trees;
    FeatureSource source = FeatureSource::Appearance;
    std::size_t feature_dim = 0;
    KLRFConfig config;
    LabelMap labels;
    std::vector<Bitmap> in_bag;  // per tree, length = training-set size
    /// Training K(V) rows; leaf kinematic means are computed from the rows of their members.
    /// Empty when the training samples had no kinematic vectors.
    Matrix kinematic_table;

    std::size_t num_classes() const { return labels.size(); }
    std::size_t training_size() const { return in_bag.empty() ? 0 : in_bag.front().size(); }

    bool operator==(Forest const &) const = default;
};

//============================================================================
// Growth with pluggable quality functions
//============================================================================

/// What a selector sees at a node.
struct NodeInput
{
    std::span<const Sample> samples;          // whole training set
    std::span<const std::uint32_t> members;   // node members as sample indices
    std::size_t total_count = 0;              // size of the tree's training set
    std::size_t num_classes = 0;
};

/// Positions index into NodeInput::members.
using Positions = std::span<const std::uint32_t>;

/// Scoring plan chosen for one node.
struct NodePlan
{
    QualityChoice choice = QualityChoice::Appearance;
    /// Q(Psi) for a candidate partition.
    std::function<double(Positions left, Positions right)> score;
    /// Information gain of the selected split; defaults to score(best) - score(all-left).
    std::function<double(Positions left, Positions right)> gain;
};

/// Picks the node's quality function. `choice_rng` is the tree's stream for per-node random draws.
using QualitySelector = std::function<NodePlan(NodeInput const &, Rng & choice_rng)>;

/// Q_c everywhere.
QualitySelector appearance_selector();

/// Class-count histogram over the given positions of a node.
std::vector<double> class_histogram(NodeInput const & node, Positions positions);

/// `count` random split candidates: gamma uniform over feature indices, tau uniform within the
/// node's range of feature gamma.
std::vector<SplitFunction> generate_candidates(std::span<const Sample> samples, std::span<const std::uint32_t> members,
                                               FeatureSource source, std::size_t count, Rng & rng);

/// Convenience overload over every sample.
std::vector<SplitFunction> generate_candidates(std::span<const Sample> samples, FeatureSource source,
                                               std::size_t count, Rng & rng);

struct Partition
{
    std::vector<std::uint32_t> left, right;
};

/// Splits sample indices by `split`; order within each side follows the input order.
Partition partition(std::span<const Sample> samples, std::span<const std::uint32_t> members, SplitFunction split,
                    FeatureSource source);

/// RNG streams owned by one tree.
struct TreeStreams
{
    Rng candidates;
    Rng choices;

    explicit TreeStreams(std::uint64_t seed);
};

/// Grows one tree over `members` (indices into samples, repeats allowed).
Tree grow_tree(std::span<const Sample> samples, std::span<const std::uint32_t> members,
               QualitySelector const & selector, TreeStreams & streams, KLRFConfig const & config,
               FeatureSource source, std::size_t num_classes);

/// Bagged forest: tree i is grown on a bootstrap of size N drawn from stream derive_seed(seed, i).
/// Throws DataError when fewer than 2 samples or fewer than 2 classes are present.
/// `threads` <= 0 selects the hardware concurrency; results do not depend on it.
Forest train_forest(std::span<const Sample> samples, QualitySelector const & selector, KLRFConfig const & config,
                    LabelMap const & labels, FeatureSource source, std::uint64_t seed, int threads = 0);

//============================================================================
// Inference
//============================================================================

struct Prediction
{
    ClassDistribution distribution;
    std::vector<double> kinematic;  // K-hat; empty when the forest has no kinematic table
};

/// Averages leaf class histograms and leaf kinematic means uniformly over trees.
/// Throws DataError on a feature-dimension mismatch.
Prediction predict(Forest const & forest, std::span<const double> features);

/// As predict, restricted to trees whose bootstrap excluded training sample `index`.
std::optional<ClassDistribution> oob_posterior(Forest const & forest, std::span<const double> features,
                                               std::size_t index);

/// Mean kinematic vector of a leaf's members.
std::vector<double> leaf_kinematic(Forest const & forest, Leaf const & leaf);

} // namespace klrf::forest
