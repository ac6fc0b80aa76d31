#include "klrf/forest.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

namespace klrf::forest {

char const * to_string(QualityChoice choice)
{
  switch (choice) {
    case QualityChoice::Switch: return "Q_s";
    case QualityChoice::Appearance: return "Q_c";
    case QualityChoice::KinematicLayout: return "Q_k";
    case QualityChoice::ViewClustering: return "Q_v";
  }
  return "?";
}

//============================================================================
// Tree / Bitmap
//============================================================================

Leaf const & Tree::route(std::span<const double> features) const
{
  std::size_t i = 0;
  while (!nodes[i].is_leaf) i = static_cast<std::size_t>(nodes[i].split.goes_left(features) ? nodes[i].left : nodes[i].right);
  return leaves[static_cast<std::size_t>(nodes[i].leaf)];
}

std::size_t Tree::depth() const
{
  if (nodes.empty()) return 0;
  std::vector<std::size_t> d(nodes.size(), 0);
  std::size_t best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {  // children follow parents
    best = std::max(best, d[i]);
    if (!nodes[i].is_leaf) {
      d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
    }
  }
  return best;
}

Bitmap Bitmap::from_words(std::size_t size, std::vector<std::uint64_t> words)
{
  if (words.size() != (size + 63) / 64) throw DataError("bitmap word count does not match its size");
  Bitmap b;
  b.size_ = size;
  b.words_ = std::move(words);
  return b;
}

TreeStreams::TreeStreams(std::uint64_t seed) : candidates(derive_seed(seed, 1)), choices(derive_seed(seed, 2)) {}

//============================================================================
// Candidates and partitions
//============================================================================

std::vector<SplitFunction> generate_candidates(std::span<const Sample> samples, std::span<const std::uint32_t> members,
                                               FeatureSource source, std::size_t count, Rng & rng)
{
  std::vector<SplitFunction> out;
  if (members.empty()) return out;
  std::size_t const dim = features_of(samples[members.front()], source).size();
  if (dim == 0) throw DataError("generate_candidates: samples have no features");
  out.reserve(count);
  for (std::size_t c = 0; c < count; ++c) {
    auto const gamma = static_cast<std::uint32_t>(uniform_index(rng, dim));
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (auto m : members) {
      double const v = features_of(samples[m], source)[gamma];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    out.push_back({gamma, uniform(rng, lo, hi)});
  }
  return out;
}

std::vector<SplitFunction> generate_candidates(std::span<const Sample> samples, FeatureSource source,
                                               std::size_t count, Rng & rng)
{
  std::vector<std::uint32_t> all(samples.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<std::uint32_t>(i);
  return generate_candidates(samples, all, source, count, rng);
}

Partition partition(std::span<const Sample> samples, std::span<const std::uint32_t> members, SplitFunction split,
                    FeatureSource source)
{
  Partition p;
  for (auto m : members) (split.goes_left(features_of(samples[m], source)) ? p.left : p.right).push_back(m);
  return p;
}

std::vector<double> class_histogram(NodeInput const & node, Positions positions)
{
  std::vector<double> hist(node.num_classes, 0.0);
  for (auto p : positions) hist[static_cast<std::size_t>(node.samples[node.members[p]].label_index)] += 1.0;
  return hist;
}

//============================================================================
// Q_c selector
//============================================================================

namespace {

double appearance_quality(std::vector<double> const & l, std::vector<double> const & r)
{
  // sum_m |D_m| sum_y p log p, written on counts
  auto side = [](std::vector<double> const & h) {
    double n = 0.0;
    for (double c : h) n += c;
    if (n <= 0.0) return 0.0;
    double acc = 0.0;
    for (double c : h)
      if (c > 0.0) acc += c * std::log(c / n);
    return acc;
  };
  return side(l) + side(r);
}

} // namespace

QualitySelector appearance_selector()
{
  return [](NodeInput const & node, Rng &) {
    NodePlan plan;
    plan.choice = QualityChoice::Appearance;
    plan.score = [node](Positions l, Positions r) {
      return appearance_quality(class_histogram(node, l), class_histogram(node, r));
    };
    return plan;
  };
}

//============================================================================
// Growth
//============================================================================

namespace {

class Grower
{
  public:
    Grower(std::span<const Sample> samples, QualitySelector const & selector, TreeStreams & streams,
           KLRFConfig const & config, FeatureSource source, std::size_t num_classes, std::size_t total)
      : samples_(samples), selector_(selector), streams_(streams), config_(config), source_(source),
        num_classes_(num_classes), total_(total) {}

    std::int32_t build(std::vector<std::uint32_t> members)
    {
      auto const index = static_cast<std::int32_t>(tree_.nodes.size());
      tree_.nodes.emplace_back();
      std::size_t const n = members.size();

      std::vector<double> hist(num_classes_, 0.0);
      for (auto m : members) hist[static_cast<std::size_t>(samples_[m].label_index)] += 1.0;
      std::size_t const classes_present =
          static_cast<std::size_t>(std::count_if(hist.begin(), hist.end(), [](double c) { return c > 0.0; }));

      if (n <= static_cast<std::size_t>(config_.min_samples_leaf) || classes_present <= 1 || all_constant(members))
        return make_leaf(index, std::move(members), hist);

      NodeInput const input{samples_, members, total_, num_classes_};
      NodePlan const plan = selector_(input, streams_.choices);
      auto const candidates = generate_candidates(samples_, members, source_,
                                                  static_cast<std::size_t>(config_.candidates_per_node),
                                                  streams_.candidates);

      bool found = false;
      double best_score = -std::numeric_limits<double>::infinity();
      SplitFunction best;
      for (auto const & c : candidates) {
        left_.clear();
        right_.clear();
        for (std::uint32_t p = 0; p < n; ++p)
          (c.goes_left(features_of(samples_[members[p]], source_)) ? left_ : right_).push_back(p);
        if (left_.empty() || right_.empty()) continue;  // one-sided: no gain by construction
        double const s = plan.score(left_, right_);
        if (!found || s > best_score) {
          found = true;
          best_score = s;
          best = c;
          best_left_.swap(left_);
          best_right_.swap(right_);
        }
      }
      if (!found) return make_leaf(index, std::move(members), hist);

      double gain;
      if (plan.gain) {
        gain = plan.gain(best_left_, best_right_);
      } else {
        all_.resize(n);
        for (std::uint32_t p = 0; p < n; ++p) all_[p] = p;
        double const reference = plan.score(all_, Positions{});
        gain = best_score - reference;
      }
      if (!(gain > 1e-10 * std::max(1.0, std::abs(best_score)))) return make_leaf(index, std::move(members), hist);

      std::vector<std::uint32_t> left_members, right_members;
      left_members.reserve(best_left_.size());
      right_members.reserve(best_right_.size());
      for (auto p : best_left_) left_members.push_back(members[p]);
      for (auto p : best_right_) right_members.push_back(members[p]);
      members.clear();
      members.shrink_to_fit();

      tree_.nodes[static_cast<std::size_t>(index)].is_leaf = false;
      tree_.nodes[static_cast<std::size_t>(index)].split = best;
      tree_.nodes[static_cast<std::size_t>(index)].choice = plan.choice;
      std::int32_t const l = build(std::move(left_members));
      std::int32_t const r = build(std::move(right_members));
      tree_.nodes[static_cast<std::size_t>(index)].left = l;
      tree_.nodes[static_cast<std::size_t>(index)].right = r;
      return index;
    }

    Tree take() { return std::move(tree_); }

  private:
    bool all_constant(std::vector<std::uint32_t> const & members) const
    {
      auto const first = features_of(samples_[members.front()], source_);
      for (std::size_t j = 0; j < first.size(); ++j)
        for (auto m : members)
          if (features_of(samples_[m], source_)[j] != first[j]) return false;
      return true;
    }

    std::int32_t make_leaf(std::int32_t index, std::vector<std::uint32_t> members, std::vector<double> const & hist)
    {
      auto & node = tree_.nodes[static_cast<std::size_t>(index)];
      node.is_leaf = true;
      node.leaf = static_cast<std::int32_t>(tree_.leaves.size());
      tree_.leaves.push_back({ClassDistribution::from_counts(hist), std::move(members)});
      return index;
    }

    std::span<const Sample> samples_;
    QualitySelector const & selector_;
    TreeStreams & streams_;
    KLRFConfig const & config_;
    FeatureSource source_;
    std::size_t num_classes_;
    std::size_t total_;
    Tree tree_;
    std::vector<std::uint32_t> left_, right_, best_left_, best_right_, all_;
};

void check_training_set(std::span<const Sample> samples, std::size_t num_classes, FeatureSource source)
{
  if (samples.size() < 2) throw DataError("training needs at least 2 samples");
  std::vector<bool> seen(num_classes, false);
  std::size_t const dim = features_of(samples.front(), source).size();
  if (dim == 0)
    throw DataError(source == FeatureSource::Appearance ? "training samples have empty appearance vectors"
                                                        : "training samples have empty kinematic vectors");
  for (auto const & s : samples) {
    if (s.label_index < 0 || static_cast<std::size_t>(s.label_index) >= num_classes)
      throw DataError("training sample has a label index outside the label map");
    if (features_of(s, source).size() != dim) throw DataError("training samples differ in feature dimension");
    seen[static_cast<std::size_t>(s.label_index)] = true;
  }
  if (std::count(seen.begin(), seen.end(), true) < 2) throw DataError("training needs at least 2 classes");
}

} // namespace

Tree grow_tree(std::span<const Sample> samples, std::span<const std::uint32_t> members,
               QualitySelector const & selector, TreeStreams & streams, KLRFConfig const & config,
               FeatureSource source, std::size_t num_classes)
{
  if (members.empty()) throw DataError("grow_tree needs at least one sample");
  Grower grower(samples, selector, streams, config, source, num_classes, members.size());
  grower.build({members.begin(), members.end()});
  return grower.take();
}

Forest train_forest(std::span<const Sample> samples, QualitySelector const & selector, KLRFConfig const & config,
                    LabelMap const & labels, FeatureSource source, std::uint64_t seed, int threads)
{
  config.validate();
  std::size_t const num_classes = labels.size();
  check_training_set(samples, num_classes, source);

  std::size_t const n = samples.size();
  std::size_t const num_trees = static_cast<std::size_t>(config.num_trees);

  Forest forest;
  forest.source = source;
  forest.feature_dim = features_of(samples.front(), source).size();
  forest.config = config;
  forest.labels = labels;
  forest.trees.resize(num_trees);
  forest.in_bag.assign(num_trees, Bitmap(n));

  std::size_t const k_dim = samples.front().kinematic.size();
  bool const has_k = k_dim > 0 && std::all_of(samples.begin(), samples.end(),
                                              [&](Sample const & s) { return s.kinematic.size() == k_dim; });
  if (has_k) {
    forest.kinematic_table = Matrix(n, k_dim);
    for (std::size_t i = 0; i < n; ++i)
      std::copy(samples[i].kinematic.begin(), samples[i].kinematic.end(), forest.kinematic_table.row(i).begin());
  }

  auto grow_one = [&](std::size_t t) {
    std::uint64_t const tree_seed = derive_seed(seed, t);
    std::vector<std::uint32_t> members(n);
    if (config.full_bag) {
      for (std::size_t i = 0; i < n; ++i) members[i] = static_cast<std::uint32_t>(i);
    } else {
      Rng bootstrap(derive_seed(tree_seed, 0));
      for (std::size_t i = 0; i < n; ++i) members[i] = static_cast<std::uint32_t>(uniform_index(bootstrap, n));
    }
    for (auto m : members) forest.in_bag[t].set(m);
    TreeStreams streams(tree_seed);
    forest.trees[t] = grow_tree(samples, members, selector, streams, config, source, num_classes);
  };

  std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads)
                                    : std::max<std::size_t>(1, std::thread::hardware_concurrency());
  workers = std::min(workers, num_trees);
  if (workers <= 1) {
    for (std::size_t t = 0; t < num_trees; ++t) grow_one(t);
    return forest;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t t = next++; t < num_trees && !failed; t = next++) {
          try {
            grow_one(t);
          } catch (...) {
            if (!failed.exchange(true)) failure = std::current_exception();
          }
        }
      });
  }
  if (failure) std::rethrow_exception(failure);
  return forest;
}

//============================================================================
// Inference
//============================================================================

std::vector<double> leaf_kinematic(Forest const & forest, Leaf const & leaf)
{
  auto const & table = forest.kinematic_table;
  if (table.empty() || leaf.members.empty()) return {};
  std::vector<double> mean(table.cols(), 0.0);
  for (auto m : leaf.members) {
    auto row = table.row(m);
    for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += row[j];
  }
  for (double & v : mean) v /= static_cast<double>(leaf.members.size());
  return mean;
}

Prediction predict(Forest const & forest, std::span<const double> features)
{
  if (features.size() != forest.feature_dim)
    throw DataError("feature dimension mismatch: model expects " + std::to_string(forest.feature_dim) + ", got " +
                    std::to_string(features.size()));
  if (forest.trees.empty()) throw InvariantError("predict: forest has no trees");

  std::vector<double> probs(forest.num_classes(), 0.0);
  std::vector<double> k_hat;
  if (!forest.kinematic_table.empty()) k_hat.assign(forest.kinematic_table.cols(), 0.0);
  for (auto const & tree : forest.trees) {
    Leaf const & leaf = tree.route(features);
    for (std::size_t y = 0; y < probs.size(); ++y) probs[y] += leaf.class_hist[y];
    if (!k_hat.empty()) {
      auto mean = leaf_kinematic(forest, leaf);
      for (std::size_t j = 0; j < k_hat.size(); ++j) k_hat[j] += mean[j];
    }
  }
  double const t = static_cast<double>(forest.trees.size());
  for (double & p : probs) p /= t;
  for (double & v : k_hat) v /= t;
  return {ClassDistribution::from_counts(probs), std::move(k_hat)};
}

std::optional<ClassDistribution> oob_posterior(Forest const & forest, std::span<const double> features,
                                               std::size_t index)
{
  if (features.size() != forest.feature_dim) throw DataError("feature dimension mismatch in oob_posterior");
  std::vector<double> probs(forest.num_classes(), 0.0);
  std::size_t used = 0;
  for (std::size_t t = 0; t < forest.trees.size(); ++t) {
    if (forest.in_bag[t].test(index)) continue;
    Leaf const & leaf = forest.trees[t].route(features);
    for (std::size_t y = 0; y < probs.size(); ++y) probs[y] += leaf.class_hist[y];
    ++used;
  }
  if (used == 0) return std::nullopt;
  return ClassDistribution::from_counts(probs);
}

} // namespace klrf::forest
