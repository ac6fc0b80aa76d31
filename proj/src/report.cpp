#include "klrf/report.hpp"

#include "klrf/features.hpp"
#include "klrf/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace klrf::report {

using nlohmann::json;

RunReport summarize(std::vector<std::vector<std::size_t>> confusion, std::vector<std::string> class_names)
{
  std::size_t const n = class_names.size();
  if (confusion.size() != n) throw InvariantError("confusion matrix does not match the class list");
  for (auto const & row : confusion)
    if (row.size() != n) throw InvariantError("confusion matrix is not square");

  RunReport r;
  r.class_names = std::move(class_names);
  r.confusion = std::move(confusion);
  r.per_class_accuracy.assign(n, 0.0);
  r.precision.assign(n, 0.0);
  r.recall.assign(n, 0.0);

  double diag_sum = 0;
  std::size_t present = 0;
  for (std::size_t y = 0; y < n; ++y) {
    std::size_t row_total = 0, col_total = 0;
    for (std::size_t j = 0; j < n; ++j) {
      row_total += r.confusion[y][j];
      col_total += r.confusion[j][y];
    }
    r.num_sequences += row_total;
    std::size_t const hit = r.confusion[y][y];
    if (row_total > 0) {
      r.recall[y] = static_cast<double>(hit) / static_cast<double>(row_total);
      diag_sum += r.recall[y];
      ++present;
    }
    if (col_total > 0) r.precision[y] = static_cast<double>(hit) / static_cast<double>(col_total);
    r.per_class_accuracy[y] = r.recall[y];
  }
  r.mean_accuracy = present > 0 ? diag_sum / static_cast<double>(present) : 0.0;
  return r;
}

//============================================================================
// Prediction
//============================================================================

namespace {

std::vector<double> appearance_of(ActionSequence const & sequence, KLRFConfig const & config)
{
  return features::assemble_features(strip_privileged(sequence), config).appearance;
}

} // namespace

std::vector<SequencePrediction> predict_sequences(learning::TrainedModel const & model,
                                                  std::span<const ActionSequence> sequences,
                                                  EvalOptions const & options)
{
  auto const & forest = model.forest;
  auto const & config = forest.config;
  std::size_t const n = sequences.size();

  std::vector<SequencePrediction> out(n);
  std::vector<forest::Prediction> base(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto const & seq = sequences[i];
    base[i] = forest::predict(forest, appearance_of(seq, config));
    out[i].id = seq.id;
    out[i].view = seq.view;
    if (auto idx = forest.labels.find(seq.label)) out[i].true_label = *idx;
    out[i].distribution = base[i].distribution;
  }

  if (options.kcf) {
    // Pool sequences that share an augmentation group, plus any test-time offset variants.
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < n; ++i) groups[sequences[i].group()].push_back(i);

    for (auto const & [name, members] : groups) {
      std::vector<forest::Prediction> pool;
      for (std::size_t i : members) pool.push_back(base[i]);
      for (std::size_t i : members) {
        std::size_t const T = sequences[i].length();
        for (int j = 1; j <= options.kcf_offsets; ++j) {
          int const offset = static_cast<int>((static_cast<std::size_t>(j) * T) / (options.kcf_offsets + 1));
          if (offset == 0) continue;
          pool.push_back(forest::predict(forest, appearance_of(features::temporal_offset(sequences[i], offset), config)));
        }
      }
      for (std::size_t q = 0; q < members.size(); ++q)
        out[members[q]].distribution = learning::kcf(q, pool, options.kcf_bandwidth);
    }
  }

  for (auto & p : out) p.predicted = static_cast<int>(p.distribution.argmax());
  return out;
}

RunReport evaluate(learning::TrainedModel const & model, std::span<const ActionSequence> sequences,
                   EvalOptions const & options)
{
  auto const predictions = predict_sequences(model, sequences, options);
  std::size_t const k = model.forest.num_classes();
  using Counts = std::vector<std::vector<std::size_t>>;

  Counts overall(k, std::vector<std::size_t>(k, 0));
  std::map<std::string, Counts> per_view;
  for (auto const & p : predictions) {
    if (p.true_label < 0) throw DataError("sequence '" + p.id + "' has a label unknown to the model");
    ++overall[p.true_label][p.predicted];
    if (!p.view.empty()) {
      auto [it, inserted] = per_view.try_emplace(p.view, k, std::vector<std::size_t>(k, 0));
      ++it->second[p.true_label][p.predicted];
    }
  }

  RunReport r = summarize(std::move(overall), model.forest.labels.names());
  for (auto & [view, counts] : per_view)
    r.per_view_mean_accuracy[view] = summarize(std::move(counts), model.forest.labels.names()).mean_accuracy;
  r.mode = model.mode;
  r.kcf = options.kcf;
  r.config_json = io::config_to_json(model.forest.config);
  r.seed = model.forest.config.seed;
  return r;
}

double mean_accuracy(learning::TrainedModel const & model, std::span<const ActionSequence> sequences,
                     EvalOptions const & options)
{
  return evaluate(model, sequences, options).mean_accuracy;
}

//============================================================================
// Rendering
//============================================================================

std::string to_json(RunReport const & r, int indent)
{
  json j;
  j["mode"] = r.mode;
  j["kcf"] = r.kcf;
  j["seed"] = r.seed;
  j["config"] = r.config_json.empty() ? json(nullptr) : json::parse(r.config_json);
  j["class_names"] = r.class_names;
  j["num_sequences"] = r.num_sequences;
  j["mean_accuracy"] = r.mean_accuracy;
  j["per_class_accuracy"] = r.per_class_accuracy;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["confusion"] = r.confusion;
  j["per_view_mean_accuracy"] = r.per_view_mean_accuracy;
  return j.dump(indent);
}

namespace {

std::string fixed(double v, int digits = 3)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::size_t widest(std::vector<std::string> const & names)
{
  std::size_t w = 5;
  for (auto const & n : names) w = std::max(w, n.size());
  return w;
}

std::string pad(std::string s, std::size_t width)
{
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

} // namespace

std::string to_text(RunReport const & r)
{
  std::ostringstream os;
  std::size_t const w = widest(r.class_names);
  os << "mode " << (r.mode.empty() ? "?" : r.mode) << (r.kcf ? " + kcf" : "") << ", seed " << r.seed << ", "
     << r.num_sequences << " sequences\n";
  os << "mean accuracy " << fixed(100 * r.mean_accuracy, 2) << "%\n";
  for (auto const & [view, acc] : r.per_view_mean_accuracy)
    os << "  view " << view << ": " << fixed(100 * acc, 2) << "%\n";
  os << '\n' << pad("class", w) << "  accuracy  precision  recall\n";
  for (std::size_t y = 0; y < r.class_names.size(); ++y)
    os << pad(r.class_names[y], w) << "  " << pad(fixed(r.per_class_accuracy[y]), 8) << "  "
       << pad(fixed(r.precision[y]), 9) << "  " << fixed(r.recall[y]) << '\n';
  os << "\nconfusion (rows: true, columns: predicted)\n";
  for (std::size_t y = 0; y < r.confusion.size(); ++y) {
    os << pad(r.class_names[y], w);
    for (auto c : r.confusion[y]) {
      std::string cell = std::to_string(c);
      os << ' ' << std::string(cell.size() < 5 ? 5 - cell.size() : 0, ' ') << cell;
    }
    os << '\n';
  }
  if (r.wall_clock_seconds > 0) os << "\nwall clock " << fixed(r.wall_clock_seconds, 2) << " s\n";
  return os.str();
}

//============================================================================
// Training diagnostics
//============================================================================

UsefulnessHistogram usefulness_histogram(learning::TrainedModel const & model, int bins)
{
  if (bins < 1) throw ConfigError("histogram needs at least one bin");
  std::size_t const k = model.forest.num_classes();
  UsefulnessHistogram h;
  for (int b = 0; b <= bins; ++b) h.bin_edges.push_back(-1.0 + 2.0 * b / bins);
  h.counts.assign(k, std::vector<std::size_t>(static_cast<std::size_t>(bins), 0));
  h.class_mean.assign(k, 0.0);
  std::vector<std::size_t> n(k, 0);

  std::size_t const m = std::min(model.usefulness.size(), model.training_labels.size());
  for (std::size_t i = 0; i < m; ++i) {
    int const y = model.training_labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= k) continue;
    double const u = model.usefulness[i];
    auto bin = static_cast<int>((u + 1.0) / 2.0 * bins);
    bin = std::clamp(bin, 0, bins - 1);
    ++h.counts[y][bin];
    h.class_mean[y] += u;
    ++n[y];
  }
  for (std::size_t y = 0; y < k; ++y)
    if (n[y] > 0) h.class_mean[y] /= static_cast<double>(n[y]);
  return h;
}

std::string to_text(UsefulnessHistogram const & h, std::vector<std::string> const & class_names)
{
  std::ostringstream os;
  std::size_t const w = widest(class_names);
  os << "usefulness U = F_K[y] - F_A[y] per class, bins over [-1, 1]\n";
  for (std::size_t y = 0; y < h.counts.size(); ++y) {
    os << pad(y < class_names.size() ? class_names[y] : std::to_string(y), w) << "  mean " << pad(fixed(h.class_mean[y]), 6)
       << " |";
    for (auto c : h.counts[y]) {
      std::string cell = std::to_string(c);
      os << ' ' << std::string(cell.size() < 4 ? 4 - cell.size() : 0, ' ') << cell;
    }
    os << '\n';
  }
  return os.str();
}

ForestSummary summarize_forest(forest::Forest const & f)
{
  ForestSummary s;
  s.trees = f.trees.size();
  for (char const * name : {"Q_s", "Q_c", "Q_k", "Q_v"}) s.choice_counts[name] = 0;
  double depth_sum = 0;
  bool first = true;
  for (auto const & tree : f.trees) {
    std::size_t const d = tree.depth();
    depth_sum += static_cast<double>(d);
    s.min_depth = first ? d : std::min(s.min_depth, d);
    s.max_depth = first ? d : std::max(s.max_depth, d);
    first = false;
    for (auto const & node : tree.nodes) {
      if (node.is_leaf) continue;
      ++s.internal_nodes;
      ++s.choice_counts[forest::to_string(node.choice)];
    }
    for (auto const & leaf : tree.leaves) {
      ++s.leaves;
      std::size_t bucket = 0;
      for (std::size_t c = leaf.count(); c > 1; c >>= 1) ++bucket;
      if (s.leaf_size_histogram.size() <= bucket) s.leaf_size_histogram.resize(bucket + 1, 0);
      ++s.leaf_size_histogram[bucket];
    }
  }
  if (s.trees > 0) s.mean_depth = depth_sum / static_cast<double>(s.trees);
  return s;
}

std::string to_text(ForestSummary const & s)
{
  std::ostringstream os;
  os << "trees " << s.trees << ", internal nodes " << s.internal_nodes << ", leaves " << s.leaves << '\n';
  os << "depth min " << s.min_depth << ", mean " << fixed(s.mean_depth, 2) << ", max " << s.max_depth << '\n';
  os << "quality choices at internal nodes:\n";
  for (auto const & [name, count] : s.choice_counts) {
    double const share = s.internal_nodes ? 100.0 * static_cast<double>(count) / static_cast<double>(s.internal_nodes) : 0.0;
    os << "  " << name << "  " << count << "  (" << fixed(share, 1) << "%)\n";
  }
  os << "leaf sizes (training members incl. bootstrap repeats):\n";
  for (std::size_t b = 0; b < s.leaf_size_histogram.size(); ++b) {
    std::size_t const lo = std::size_t{1} << b, hi = (std::size_t{1} << (b + 1)) - 1;
    os << "  " << (lo == hi ? std::to_string(lo) : std::to_string(lo) + "-" + std::to_string(hi)) << "  "
       << s.leaf_size_histogram[b] << '\n';
  }
  return os.str();
}

} // namespace klrf::report
