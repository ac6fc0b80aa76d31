#pragma once

#include "klrf/forest.hpp"

#include <chrono>

namespace klrf::learning {

using forest::Forest;
using forest::QualityChoice;

//============================================================================
// Quality functions
//============================================================================

/// Q_s = [1 + sum_m (|D_m|/|D|) var(U over D_m)]^-1, population variance, empty child contributes 0.
double q_switch(std::span<const double> left_usefulness, std::span<const double> right_usefulness);

/// Q_c = sum_m |D_m| * sum_y p log p over each child's class-count histogram.
double q_appearance(std::span<const double> left_counts, std::span<const double> right_counts);

/// Q_k = sum_m sum_y n_w(y, D_m) log(n_w(y, D_m) / W), W = total weight over both children,
/// on weighted class histograms.
double q_kinematic(std::span<const double> left_weighted, std::span<const double> right_weighted);

/// Q_k on per-sample labels and weights. Throws std::invalid_argument when a label list and its
/// weight list differ in length or a label is out of range.
double q_kinematic(std::span<const int> left_labels, std::span<const double> left_weights,
                   std::span<const int> right_labels, std::span<const double> right_weights,
                   std::size_t num_classes);

/// Q_v = [1 + sum_m (|D_m|/|D|) tr var(K over D_m)]^-1.
double q_view(std::span<const std::span<const double>> left_kinematic,
              std::span<const std::span<const double>> right_kinematic);

/// Weighted information gain: weighted conditional-entropy reduction of the class histogram.
/// Always >= 0. Used as the stopping test at Q_k nodes (see grow_kinematic_gain).
double weighted_information_gain(std::span<const double> left_weighted, std::span<const double> right_weighted);

//============================================================================
// Usefulness and gap-closing weights
//============================================================================

/// U(V) = F_K(V)[y*] - F_A(V)[y*].
double usefulness_score(ClassDistribution const & appearance_posterior, ClassDistribution const & kinematic_posterior,
                        std::size_t true_label);

struct GapWeights
{
    std::vector<double> raw;      // minimum-norm least-squares solution
    std::vector<double> clamped;  // max(raw_i, epsilon)
};

/// Solves min ||A w - b||^2 where column i of A is member i's appearance posterior and b the mean
/// kinematic posterior over the members, then clamps weights to at least `epsilon`.
GapWeights gap_weights(std::span<const Sample * const> members, double epsilon);

/// Same solve on explicit columns (each of length |Y|) and target b.
GapWeights gap_weights(std::span<const std::vector<double>> appearance_posteriors, std::span<const double> b,
                       double epsilon);

//============================================================================
// Node-level selection
//============================================================================

struct NodeContext
{
    std::size_t node_size = 0;
    std::size_t total_training_count = 0;
    double delta = 0;      // fraction of node samples with U > 0
    double zeta = 0;       // per-node draw in (0, 1]
    double view_draw = 1;  // per-node draw in [0, 1) for the Q_v switch
    bool cross_view = false;
};

/// Cross-view: ViewClustering with probability qv_switch_prob. Otherwise Switch when
/// |D| > eta * total and the node mixes useful and non-useful samples (0 < delta < 1);
/// else Appearance when zeta > delta, KinematicLayout when zeta <= delta.
QualityChoice select_quality(NodeContext const & ctx, KLRFConfig const & config);

/// Node selector implementing the combined quality function (and Q_v in cross-view mode).
/// Every training sample must carry a usefulness score and both posteriors.
forest::QualitySelector klrf_selector(KLRFConfig const & config);

//============================================================================
// Pipeline
//============================================================================

struct ReferenceForests
{
    Forest appearance;  // F_A, splits on A(V)
    Forest kinematic;   // F_K, splits on K(V)
};

/// Trains F_A and F_K with Q_c. Throws DataError if any sample lacks a kinematic vector.
ReferenceForests pretrain_reference_forests(std::span<const Sample> samples, KLRFConfig const & config,
                                            LabelMap const & labels, std::uint64_t seed, int threads = 0);

/// Fills usefulness and both posteriors on every sample from the reference forests, using
/// out-of-bag posteriors where available and whole-forest posteriors otherwise.
void annotate_samples(std::span<Sample> samples, ReferenceForests const & references);

struct StageTiming
{
    std::string stage;
    double seconds = 0;
};

/// Result of a training run.
struct TrainedModel
{
    std::string mode;  // "klrf" or "baseline"
    Forest forest;
    std::optional<ReferenceForests> references;
    std::vector<int> training_labels;   // per training sample (after augmentation)
    std::vector<double> usefulness;     // per training sample; empty for baseline
    std::vector<StageTiming> timings;   // not serialized
};

/// Assembles features for every training sequence and its augmented variants.
std::vector<Sample> build_training_samples(std::span<const ActionSequence> sequences, KLRFConfig const & config,
                                           LabelMap const & labels);

/// Full KLRF training: features + augmentation, reference forests, usefulness scores, posteriors,
/// then the main forest grown with the combined quality function on appearance splits only.
TrainedModel train_klrf(std::span<const ActionSequence> sequences, KLRFConfig const & config, int threads = 0);

/// Q_c-only forest on the same training samples and main-forest seed as train_klrf.
TrainedModel train_baseline(std::span<const ActionSequence> sequences, KLRFConfig const & config, int threads = 0);

/// train_klrf / train_baseline on already assembled samples (labels set; KLRF also needs kinematics).
TrainedModel train_klrf_samples(std::vector<Sample> samples, KLRFConfig const & config, LabelMap const & labels,
                                int threads = 0);
TrainedModel train_baseline_samples(std::vector<Sample> samples, KLRFConfig const & config, LabelMap const & labels,
                                    int threads = 0);

/// Seeds of the training streams derived from config.seed.
std::uint64_t main_forest_seed(std::uint64_t seed);
std::uint64_t augmentation_seed(std::uint64_t seed, std::size_t sequence_index);

//============================================================================
// Kinematic consistency filter
//============================================================================

/// P*(y|V) = (1/W) sum_{J in S(V)} P(y|J) g(||K^(V) - K^(J)||). With no bandwidth the median
/// pairwise K^ distance within the group is used (floored at 1e-9). Throws std::invalid_argument
/// on an empty group or an out-of-range query.
ClassDistribution kcf(std::size_t query, std::span<const forest::Prediction> group,
                      std::optional<double> bandwidth = std::nullopt);

} // namespace klrf::learning
