#pragma once

#include "klrf/learning.hpp"

#include <map>

namespace klrf::report {

/// Classification summary. Mean accuracy is the mean of the row-normalized confusion diagonal
/// over classes that have at least one test sequence.
struct RunReport
{
    std::vector<std::string> class_names;
    std::vector<std::vector<std::size_t>> confusion;  // [true][predicted] counts
    std::vector<double> per_class_accuracy;           // recall per class; NaN-free, 0 for absent classes
    std::vector<double> precision;                    // 0 when a class was never predicted
    std::vector<double> recall;
    double mean_accuracy = 0;
    std::size_t num_sequences = 0;
    std::map<std::string, double> per_view_mean_accuracy;  // filled when sequences carry views
    std::string mode;
    bool kcf = false;
    std::string config_json;  // config echo
    std::uint64_t seed = 0;
    double wall_clock_seconds = 0;  // text report only; kept out of the machine-readable body
};

/// Builds the metric fields from counts.
RunReport summarize(std::vector<std::vector<std::size_t>> confusion, std::vector<std::string> class_names);

struct EvalOptions
{
    bool kcf = false;
    /// Test-time temporal-offset variants per sequence pooled with it in one KCF group.
    int kcf_offsets = 0;
    std::optional<double> kcf_bandwidth;
};

struct SequencePrediction
{
    std::string id;
    std::string view;
    int true_label = -1;  // -1 when the label is absent or unknown to the model
    int predicted = -1;
    ClassDistribution distribution;
};

/// Per-sequence predictions from appearance alone: privileged fields are stripped before
/// feature extraction.
std::vector<SequencePrediction> predict_sequences(learning::TrainedModel const & model,
                                                  std::span<const ActionSequence> sequences,
                                                  EvalOptions const & options = {});

/// predict_sequences followed by summarize, overall and per view.
RunReport evaluate(learning::TrainedModel const & model, std::span<const ActionSequence> sequences,
                   EvalOptions const & options = {});

/// Mean class accuracy of `model` on `sequences` (convenience for experiments).
double mean_accuracy(learning::TrainedModel const & model, std::span<const ActionSequence> sequences,
                     EvalOptions const & options = {});

std::string to_json(RunReport const & report, int indent = 2);
std::string to_text(RunReport const & report);

/// Per-class histogram of training usefulness scores over fixed bins on [-1, 1].
struct UsefulnessHistogram
{
    std::vector<double> bin_edges;                   // bins + 1 edges
    std::vector<std::vector<std::size_t>> counts;    // [class][bin]
    std::vector<double> class_mean;
};

UsefulnessHistogram usefulness_histogram(learning::TrainedModel const & model, int bins = 10);
std::string to_text(UsefulnessHistogram const & histogram, std::vector<std::string> const & class_names);

/// Structural summary of a forest.
struct ForestSummary
{
    std::size_t trees = 0;
    std::size_t internal_nodes = 0;
    std::size_t leaves = 0;
    std::size_t min_depth = 0, max_depth = 0;
    double mean_depth = 0;
    std::map<std::string, std::size_t> choice_counts;  // "Q_s", "Q_c", "Q_k", "Q_v"
    /// Leaves bucketed by training-member count: [1], [2,3], [4,7], [8,15], ...
    std::vector<std::size_t> leaf_size_histogram;
};

ForestSummary summarize_forest(forest::Forest const & forest);
std::string to_text(ForestSummary const & summary);

} // namespace klrf::report
