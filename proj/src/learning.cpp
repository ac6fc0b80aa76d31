#include "klrf/learning.hpp"

#include "klrf/features.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace klrf::learning {

using forest::FeatureSource;
using forest::NodeInput;
using forest::NodePlan;
using forest::Positions;

namespace {

double population_variance(std::span<const double> values)
{
  if (values.empty()) return 0.0;
  double const n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double acc = 0.0;
  for (double v : values) acc += (v - mean) * (v - mean);
  return acc / n;
}

double mass(std::span<const double> hist)
{
  double total = 0.0;
  for (double h : hist) total += h;
  return total;
}

/// sum_y n(y) log(n(y) / denom), 0 log 0 = 0.
double weighted_log_sum(std::span<const double> hist, double denom)
{
  double acc = 0.0;
  for (double h : hist)
    if (h > 0.0) acc += h * std::log(h / denom);
  return acc;
}

/// Node-local kinematic vectors centred on their mean, for fast Q_v scoring.
class ViewTable
{
  public:
    explicit ViewTable(forest::NodeInput const & node)
    {
      n_ = node.members.size();
      dim_ = n_ ? node.samples[node.members.front()].kinematic.size() : 0;
      if (dim_ == 0) throw InvariantError("Q_v needs kinematic vectors on every training sample");
      values_.resize(n_ * dim_);
      std::vector<double> mean(dim_, 0.0);
      for (std::size_t p = 0; p < n_; ++p) {
        auto const & k = node.samples[node.members[p]].kinematic;
        if (k.size() != dim_) throw InvariantError("kinematic vectors differ in length");
        for (std::size_t d = 0; d < dim_; ++d) mean[d] += k[d];
      }
      for (double & m : mean) m /= static_cast<double>(n_);
      for (std::size_t p = 0; p < n_; ++p) {
        auto const & k = node.samples[node.members[p]].kinematic;
        double * row = values_.data() + p * dim_;
        for (std::size_t d = 0; d < dim_; ++d) {
          row[d] = k[d] - mean[d];
          total_sq_ += row[d] * row[d];
        }
      }
    }

    double score(forest::Positions left, forest::Positions right) const
    {
      std::size_t const nl = left.size(), nr = right.size();
      if (nl + nr != n_) throw InvariantError("Q_v scored on a partial partition");
      if (nl == 0 || nr == 0) return 1.0 / (1.0 + total_sq_ / static_cast<double>(n_));
      forest::Positions small = nl <= nr ? left : right;
      std::vector<double> sum(dim_, 0.0);
      for (auto p : small) {
        double const * row = values_.data() + static_cast<std::size_t>(p) * dim_;
        for (std::size_t d = 0; d < dim_; ++d) sum[d] += row[d];
      }
      double sq = 0.0;
      for (double v : sum) sq += v * v;
      double const within = total_sq_ - sq / static_cast<double>(nl) - sq / static_cast<double>(nr);
      return 1.0 / (1.0 + std::max(within, 0.0) / static_cast<double>(n_));
    }

  private:
    std::size_t n_ = 0, dim_ = 0;
    std::vector<double> values_;
    double total_sq_ = 0.0;
};

class Stopwatch
{
  public:
    double lap()
    {
      auto const now = std::chrono::steady_clock::now();
      double const s = std::chrono::duration<double>(now - last_).count();
      last_ = now;
      return s;
    }

  private:
    std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

} // namespace

//============================================================================
// Quality functions
//============================================================================

double q_switch(std::span<const double> left_usefulness, std::span<const double> right_usefulness)
{
  double const total = static_cast<double>(left_usefulness.size() + right_usefulness.size());
  if (total == 0.0) return 1.0;
  double const l = static_cast<double>(left_usefulness.size()) / total * population_variance(left_usefulness);
  double const r = static_cast<double>(right_usefulness.size()) / total * population_variance(right_usefulness);
  return 1.0 / (1.0 + (l + r));
}

double q_appearance(std::span<const double> left_counts, std::span<const double> right_counts)
{
  return mass(left_counts) * numeric::shannon_term(left_counts) +
         mass(right_counts) * numeric::shannon_term(right_counts);
}

double q_kinematic(std::span<const double> left_weighted, std::span<const double> right_weighted)
{
  double const total = mass(left_weighted) + mass(right_weighted);
  if (!(total > 0.0)) return 0.0;
  return weighted_log_sum(left_weighted, total) + weighted_log_sum(right_weighted, total);
}

double q_kinematic(std::span<const int> left_labels, std::span<const double> left_weights,
                   std::span<const int> right_labels, std::span<const double> right_weights,
                   std::size_t num_classes)
{
  if (left_labels.size() != left_weights.size() || right_labels.size() != right_weights.size())
    throw std::invalid_argument("q_kinematic: weights are not aligned with the samples");
  auto histogram = [num_classes](std::span<const int> labels, std::span<const double> weights) {
    std::vector<double> h(num_classes, 0.0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes)
        throw std::invalid_argument("q_kinematic: label out of range");
      h[static_cast<std::size_t>(labels[i])] += weights[i];
    }
    return h;
  };
  return q_kinematic(histogram(left_labels, left_weights), histogram(right_labels, right_weights));
}

double q_view(std::span<const std::span<const double>> left_kinematic,
              std::span<const std::span<const double>> right_kinematic)
{
  double const total = static_cast<double>(left_kinematic.size() + right_kinematic.size());
  if (total == 0.0) return 1.0;
  double const l = static_cast<double>(left_kinematic.size()) / total * numeric::variance_trace(left_kinematic);
  double const r = static_cast<double>(right_kinematic.size()) / total * numeric::variance_trace(right_kinematic);
  return 1.0 / (1.0 + (l + r));
}

double weighted_information_gain(std::span<const double> left_weighted, std::span<const double> right_weighted)
{
  std::vector<double> parent(left_weighted.size(), 0.0);
  for (std::size_t y = 0; y < parent.size(); ++y) parent[y] = left_weighted[y] + right_weighted[y];
  double const children = weighted_log_sum(left_weighted, mass(left_weighted)) +
                          weighted_log_sum(right_weighted, mass(right_weighted));
  return children - weighted_log_sum(parent, mass(parent));
}

//============================================================================
// Usefulness and weights
//============================================================================

double usefulness_score(ClassDistribution const & appearance_posterior, ClassDistribution const & kinematic_posterior,
                        std::size_t true_label)
{
  return kinematic_posterior.probs().at(true_label) - appearance_posterior.probs().at(true_label);
}

GapWeights gap_weights(std::span<const std::vector<double>> appearance_posteriors, std::span<const double> b,
                       double epsilon)
{
  if (appearance_posteriors.empty()) throw std::invalid_argument("gap_weights: no samples");
  std::size_t const classes = b.size();
  Matrix a(classes, appearance_posteriors.size());
  for (std::size_t i = 0; i < appearance_posteriors.size(); ++i) {
    if (appearance_posteriors[i].size() != classes)
      throw std::invalid_argument("gap_weights: posterior length differs from |Y|");
    for (std::size_t y = 0; y < classes; ++y) a(y, i) = appearance_posteriors[i][y];
  }
  GapWeights out;
  out.raw = numeric::least_squares_min_norm(a, b);
  out.clamped.resize(out.raw.size());
  for (std::size_t i = 0; i < out.raw.size(); ++i) out.clamped[i] = std::max(out.raw[i], epsilon);
  return out;
}

GapWeights gap_weights(std::span<const Sample * const> members, double epsilon)
{
  if (members.empty()) throw std::invalid_argument("gap_weights: no samples");
  std::size_t const classes = members.front()->kinematic_posterior.size();
  if (classes == 0) throw std::invalid_argument("gap_weights: posteriors not set");
  std::vector<std::vector<double>> columns;
  columns.reserve(members.size());
  std::vector<double> b(classes, 0.0);
  for (Sample const * s : members) {
    if (s->kinematic_posterior.size() != classes || s->appearance_posterior.size() != classes)
      throw std::invalid_argument("gap_weights: posteriors not set");
    columns.push_back(s->appearance_posterior);
    for (std::size_t y = 0; y < classes; ++y) b[y] += s->kinematic_posterior[y];
  }
  for (double & v : b) v /= static_cast<double>(members.size());
  return gap_weights(columns, b, epsilon);
}

//============================================================================
// Selection
//============================================================================

QualityChoice select_quality(NodeContext const & ctx, KLRFConfig const & config)
{
  if (ctx.cross_view && ctx.view_draw < config.qv_switch_prob) return QualityChoice::ViewClustering;
  double const eta = config.eta_fraction * static_cast<double>(ctx.total_training_count);
  if (static_cast<double>(ctx.node_size) > eta && ctx.delta > 0.0 && ctx.delta < 1.0) return QualityChoice::Switch;
  return ctx.zeta > ctx.delta ? QualityChoice::Appearance : QualityChoice::KinematicLayout;
}

forest::QualitySelector klrf_selector(KLRFConfig const & config)
{
  return [config](NodeInput const & node, Rng & rng) {
    std::size_t const n = node.members.size();
    std::size_t useful = 0;
    for (auto m : node.members) {
      auto const & u = node.samples[m].usefulness;
      if (!u) throw InvariantError("KLRF training sample without a usefulness score");
      if (*u > 0.0) ++useful;
    }

    NodeContext ctx;
    ctx.node_size = n;
    ctx.total_training_count = node.total_count;
    ctx.delta = static_cast<double>(useful) / static_cast<double>(n);
    ctx.zeta = uniform01_open_low(rng);
    ctx.view_draw = uniform01(rng);
    ctx.cross_view = config.cross_view_mode;

    NodePlan plan;
    plan.choice = select_quality(ctx, config);
    switch (plan.choice) {
      case QualityChoice::Switch:
        plan.score = [node](Positions l, Positions r) {
          std::vector<double> ul, ur;
          ul.reserve(l.size());
          ur.reserve(r.size());
          for (auto p : l) ul.push_back(*node.samples[node.members[p]].usefulness);
          for (auto p : r) ur.push_back(*node.samples[node.members[p]].usefulness);
          return q_switch(ul, ur);
        };
        break;

      case QualityChoice::Appearance:
        plan.score = [node](Positions l, Positions r) {
          return q_appearance(forest::class_histogram(node, l), forest::class_histogram(node, r));
        };
        break;

      case QualityChoice::KinematicLayout: {
        std::vector<Sample const *> members;
        members.reserve(n);
        for (auto m : node.members) members.push_back(&node.samples[m]);
        auto weights = std::make_shared<std::vector<double>>(gap_weights(members, config.weight_clamp_epsilon).clamped);
        auto histogram = [node, weights](Positions ps) {
          std::vector<double> h(node.num_classes, 0.0);
          for (auto p : ps) h[static_cast<std::size_t>(node.samples[node.members[p]].label_index)] += (*weights)[p];
          return h;
        };
        plan.score = [histogram](Positions l, Positions r) { return q_kinematic(histogram(l), histogram(r)); };
        if (config.kinematic_gain == KLRFConfig::KinematicGain::WeightedEntropy)
          plan.gain = [histogram](Positions l, Positions r) {
            return weighted_information_gain(histogram(l), histogram(r));
          };
        break;
      }

      case QualityChoice::ViewClustering: {
        // Same value as q_view, in a form that costs min(|D_l|, |D_r|) * dim per candidate:
        // with vectors centred on the node mean the two child sums are negatives of each other, so
        // sum_m (|D_m|/|D|) tr var_m = (S - |s_l|^2 / n_l - |s_l|^2 / n_r) / n, S = sum of squared norms.
        auto centred = std::make_shared<ViewTable>(node);
        plan.score = [centred](Positions l, Positions r) { return centred->score(l, r); };
        break;
      }
    }
    return plan;
  };
}

//============================================================================
// Pipeline
//============================================================================

std::uint64_t main_forest_seed(std::uint64_t seed) { return derive_seed(seed, 0x6d61696e); }

std::uint64_t augmentation_seed(std::uint64_t seed, std::size_t sequence_index)
{
  return derive_seed(derive_seed(seed, 0x61756700), sequence_index);
}

ReferenceForests pretrain_reference_forests(std::span<const Sample> samples, KLRFConfig const & config,
                                            LabelMap const & labels, std::uint64_t seed, int threads)
{
  for (auto const & s : samples)
    if (s.kinematic.empty()) throw DataError("reference forests need kinematic vectors on every training sample");

  KLRFConfig ref_config = config;
  ref_config.full_bag = false;  // out-of-bag posteriors are the point of these forests
  auto selector = forest::appearance_selector();
  ReferenceForests refs{
      forest::train_forest(samples, selector, ref_config, labels, FeatureSource::Appearance, derive_seed(seed, 1), threads),
      forest::train_forest(samples, selector, ref_config, labels, FeatureSource::Kinematic, derive_seed(seed, 2), threads)};
  refs.appearance.kinematic_table = Matrix();
  refs.kinematic.kinematic_table = Matrix();
  return refs;
}

void annotate_samples(std::span<Sample> samples, ReferenceForests const & references)
{
  for (std::size_t i = 0; i < samples.size(); ++i) {
    Sample & s = samples[i];
    auto pa = forest::oob_posterior(references.appearance, s.appearance, i);
    if (!pa) pa = forest::predict(references.appearance, s.appearance).distribution;
    auto pk = forest::oob_posterior(references.kinematic, s.kinematic, i);
    if (!pk) pk = forest::predict(references.kinematic, s.kinematic).distribution;
    s.usefulness = usefulness_score(*pa, *pk, static_cast<std::size_t>(s.label_index));
    s.appearance_posterior = pa->probs();
    s.kinematic_posterior = pk->probs();
  }
}

std::vector<Sample> build_training_samples(std::span<const ActionSequence> sequences, KLRFConfig const & config,
                                           LabelMap const & labels)
{
  std::vector<Sample> samples;
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    auto const & seq = sequences[i];
    int const label = labels.index_of(seq.label);
    Sample s = features::assemble_features(seq, config);
    s.label_index = label;
    samples.push_back(std::move(s));

    Rng rng(augmentation_seed(config.seed, i));
    for (auto const & variant : features::augment(seq, config.augmentation, rng)) {
      Sample v = features::assemble_features(variant, config);
      v.label_index = label;
      samples.push_back(std::move(v));
    }
  }
  return samples;
}

TrainedModel train_klrf_samples(std::vector<Sample> samples, KLRFConfig const & config, LabelMap const & labels,
                                int threads)
{
  config.validate();
  Stopwatch watch;
  TrainedModel model;
  model.mode = "klrf";

  model.references = pretrain_reference_forests(samples, config, labels, config.seed, threads);
  model.timings.push_back({"reference forests", watch.lap()});

  annotate_samples(samples, *model.references);
  model.timings.push_back({"usefulness scores", watch.lap()});

  KLRFConfig main_config = config;
  if (!main_config.cross_view_mode) main_config.qv_switch_prob = 0.0;
  model.forest = forest::train_forest(samples, klrf_selector(main_config), main_config, labels,
                                      FeatureSource::Appearance, main_forest_seed(config.seed), threads);
  model.forest.config = config;
  model.timings.push_back({"main forest", watch.lap()});

  for (auto const & s : samples) {
    model.training_labels.push_back(s.label_index);
    model.usefulness.push_back(*s.usefulness);
  }
  return model;
}

TrainedModel train_baseline_samples(std::vector<Sample> samples, KLRFConfig const & config, LabelMap const & labels,
                                    int threads)
{
  config.validate();
  Stopwatch watch;
  TrainedModel model;
  model.mode = "baseline";
  model.forest = forest::train_forest(samples, forest::appearance_selector(), config, labels,
                                      FeatureSource::Appearance, main_forest_seed(config.seed), threads);
  model.timings.push_back({"main forest", watch.lap()});
  for (auto const & s : samples) model.training_labels.push_back(s.label_index);
  return model;
}

namespace {

std::vector<Sample> prepare(std::span<const ActionSequence> sequences, KLRFConfig const & config, LabelMap & labels,
                            bool need_kinematics)
{
  config.validate();
  auto problems = validate_dataset(sequences);
  if (!problems.empty()) throw DataError("invalid training dataset: " + problems.front());
  if (need_kinematics)
    for (auto const & s : sequences)
      if (!s.has_kinematics())
        throw DataError("training sequence '" + s.id + "' lacks skeletons or planes (privileged data is required)");
  labels = LabelMap::from_sequences(sequences);
  if (labels.size() < 2) throw DataError("training needs at least 2 classes");
  return build_training_samples(sequences, config, labels);
}

} // namespace

TrainedModel train_klrf(std::span<const ActionSequence> sequences, KLRFConfig const & config, int threads)
{
  Stopwatch watch;
  LabelMap labels;
  auto samples = prepare(sequences, config, labels, true);
  double const feature_time = watch.lap();
  auto model = train_klrf_samples(std::move(samples), config, labels, threads);
  model.timings.insert(model.timings.begin(), {"features + augmentation", feature_time});
  return model;
}

TrainedModel train_baseline(std::span<const ActionSequence> sequences, KLRFConfig const & config, int threads)
{
  Stopwatch watch;
  LabelMap labels;
  bool const kinematics = std::all_of(sequences.begin(), sequences.end(),
                                      [](ActionSequence const & s) { return s.has_kinematics(); });
  auto samples = prepare(sequences, config, labels, false);
  if (!kinematics)
    for (auto & s : samples) s.kinematic.clear();
  double const feature_time = watch.lap();
  auto model = train_baseline_samples(std::move(samples), config, labels, threads);
  model.timings.insert(model.timings.begin(), {"features + augmentation", feature_time});
  return model;
}

//============================================================================
// KCF
//============================================================================

ClassDistribution kcf(std::size_t query, std::span<const forest::Prediction> group, std::optional<double> bandwidth)
{
  if (group.empty()) throw std::invalid_argument("kcf: empty group");
  if (query >= group.size()) throw std::invalid_argument("kcf: query index outside the group");
  std::size_t const classes = group[query].distribution.size();
  std::size_t const dim = group[query].kinematic.size();
  for (auto const & member : group)
    if (member.kinematic.size() != dim || member.distribution.size() != classes)
      throw std::invalid_argument("kcf: group members disagree in dimension");

  auto distance = [&](std::size_t a, std::size_t b) {
    double acc = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      double const d = group[a].kinematic[j] - group[b].kinematic[j];
      acc += d * d;
    }
    return std::sqrt(acc);
  };

  double sigma;
  if (bandwidth) {
    sigma = *bandwidth;
  } else {
    std::vector<double> pairwise;
    for (std::size_t a = 0; a < group.size(); ++a)
      for (std::size_t b = a + 1; b < group.size(); ++b) pairwise.push_back(distance(a, b));
    sigma = 0.0;
    if (!pairwise.empty()) {
      std::sort(pairwise.begin(), pairwise.end());
      std::size_t const mid = pairwise.size() / 2;
      sigma = pairwise.size() % 2 ? pairwise[mid] : 0.5 * (pairwise[mid - 1] + pairwise[mid]);
    }
  }
  sigma = std::max(sigma, 1e-9);

  std::vector<double> acc(classes, 0.0);
  for (std::size_t j = 0; j < group.size(); ++j) {
    double const w = numeric::gaussian_kernel(distance(query, j), sigma);
    for (std::size_t y = 0; y < classes; ++y) acc[y] += w * group[j].distribution[y];
  }
  return ClassDistribution::from_counts(acc);
}

} // namespace klrf::learning
