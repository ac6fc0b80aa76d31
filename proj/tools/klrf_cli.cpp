// klrf: synthesize data, train, evaluate, predict and inspect kinematic-layout-aware forests.

#include "klrf/io.hpp"
#include "klrf/report.hpp"
#include "klrf/synth.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iostream>

namespace {

using namespace klrf;
namespace fs = std::filesystem;

enum Exit : int { kOk = 0, kOther = 1, kConfig = 2, kData = 3, kInvariant = 4 };

struct TrainFlags
{
    std::string data, model_out, config_file, report_out;
    bool baseline = false, cross_view = false, no_references = false;
    std::optional<int> trees;
    std::optional<double> qv_prob;
    std::optional<std::uint64_t> seed;
    int threads = 0;
};

struct EvalFlags
{
    std::string model;
    std::vector<std::string> data;
    std::string report_out;
    std::vector<std::string> views;
    bool kcf = false;
    int kcf_offsets = 0;
    std::optional<double> kcf_bandwidth;
};

struct SynthFlags
{
    std::string out;
    synth::SynthConfig config;
    std::string views;
};

KLRFConfig load_config(std::string const & path)
{
  return path.empty() ? KLRFConfig{} : io::read_config(path);
}

std::vector<double> parse_views(std::string const & text)
{
  std::vector<double> views;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      views.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (std::exception const &) {
      throw ConfigError("--views: cannot parse '" + item + "' as an angle in degrees");
    }
  }
  if (views.empty()) throw ConfigError("--views: expected a comma-separated list of angles");
  return views;
}

void write_file(fs::path const & path, std::string const & text)
{
  std::ofstream out(path);
  out << text;
  if (!out) throw DataError("cannot write " + path.string());
}

//============================================================================

int cmd_synth(SynthFlags const & f)
{
  synth::SynthConfig config = f.config;
  if (!f.views.empty()) config.views = parse_views(f.views);
  config.kinematic_classes.clear();
  config.appearance_classes.clear();
  for (int c = 0; c < config.num_classes; ++c)
    (c < config.num_classes / 2 ? config.kinematic_classes : config.appearance_classes).push_back(c);
  auto const data = synth::synth_generate(config);

  std::vector<std::string> names;
  for (int c = 0; c < config.num_classes; ++c) names.push_back(synth::class_name(config, c));

  fs::path const out(f.out);
  auto const train = io::save_dataset(out / "train", "manifest.json", "synth-train", data.train, names);
  std::cout << "train: " << data.train.size() << " sequences -> " << train.string() << '\n';
  for (double view : config.views) {
    std::string const label = synth::view_label(view);
    std::vector<ActionSequence> subset;
    for (auto const & s : data.test)
      if (s.view == label) subset.push_back(s);
    auto const path = io::save_dataset(out / ("test_v" + label), "manifest.json", "synth-test-v" + label, subset, names);
    std::cout << "test view " << label << ": " << subset.size() << " sequences -> " << path.string() << '\n';
  }
  return kOk;
}

int cmd_train(TrainFlags const & f)
{
  KLRFConfig config = load_config(f.config_file);
  if (f.trees) config.num_trees = *f.trees;
  if (f.seed) config.seed = *f.seed;
  if (f.cross_view) config.cross_view_mode = true;
  if (f.qv_prob) config.qv_switch_prob = *f.qv_prob;
  config.validate();

  auto const start = std::chrono::steady_clock::now();
  auto const sequences = io::load_dataset(f.data);
  auto model = f.baseline ? learning::train_baseline(sequences, config, f.threads)
                          : learning::train_klrf(sequences, config, f.threads);
  io::save_model(model, f.model_out, !f.no_references);
  double const wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  std::cout << "trained " << model.mode << " forest: " << model.forest.trees.size() << " trees on "
            << model.training_labels.size() << " samples (" << sequences.size() << " sequences)\n";
  for (auto const & t : model.timings) std::cout << "  " << t.stage << ": " << t.seconds << " s\n";
  std::cout << "  total wall clock: " << wall << " s\n";
  if (!model.usefulness.empty())
    std::cout << '\n' << report::to_text(report::usefulness_histogram(model), model.forest.labels.names());
  std::cout << "\nmodel written to " << f.model_out << '\n';

  if (!f.report_out.empty()) {
    // Training report: the training-set fit of the main forest.
    auto r = report::evaluate(model, sequences);
    write_file(f.report_out, report::to_json(r) + "\n");
  }
  return kOk;
}

std::vector<ActionSequence> load_many(std::vector<std::string> const & manifests, std::vector<std::string> const & views)
{
  std::vector<ActionSequence> all;
  for (auto const & m : manifests)
    for (auto & s : io::load_dataset(m))
      if (views.empty() || std::find(views.begin(), views.end(), s.view) != views.end()) all.push_back(std::move(s));
  if (all.empty()) throw DataError("no test sequences selected");
  return all;
}

report::EvalOptions eval_options(EvalFlags const & f)
{
  report::EvalOptions o;
  o.kcf = f.kcf;
  o.kcf_offsets = f.kcf_offsets;
  o.kcf_bandwidth = f.kcf_bandwidth;
  if (o.kcf_offsets < 0) throw ConfigError("--kcf-offsets must be >= 0");
  if (o.kcf_bandwidth && !(*o.kcf_bandwidth > 0)) throw ConfigError("--kcf-bandwidth must be > 0");
  return o;
}

int cmd_eval(EvalFlags const & f)
{
  auto const start = std::chrono::steady_clock::now();
  auto const model = io::load_model(f.model);
  auto const test = load_many(f.data, f.views);
  auto r = report::evaluate(model, test, eval_options(f));
  r.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cout << report::to_text(r);
  if (!f.report_out.empty()) write_file(f.report_out, report::to_json(r) + "\n");
  return kOk;
}

int cmd_predict(EvalFlags const & f)
{
  auto const model = io::load_model(f.model);
  auto const test = load_many(f.data, f.views);
  auto const predictions = report::predict_sequences(model, test, eval_options(f));
  auto const & names = model.forest.labels.names();
  for (auto const & p : predictions) {
    std::cout << p.id << '\t' << names[p.predicted];
    for (std::size_t y = 0; y < names.size(); ++y) std::cout << '\t' << names[y] << '=' << p.distribution[y];
    std::cout << '\n';
  }
  return kOk;
}

int cmd_inspect(std::string const & path)
{
  auto const model = io::load_model(path);
  std::cout << "mode " << model.mode << ", classes " << model.forest.num_classes() << ", training samples "
            << model.training_labels.size() << ", seed " << model.forest.config.seed << '\n';
  std::cout << report::to_text(report::summarize_forest(model.forest));
  std::cout << "reference forests " << (model.references ? "present" : "absent") << '\n';
  return kOk;
}

} // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"Kinematic-layout-aware random forests for action recognition"};
  app.require_subcommand(1);

  SynthFlags synth_flags;
  auto * synth_cmd = app.add_subcommand("synth", "Generate the synthetic benchmark");
  synth_cmd->add_option("--out", synth_flags.out, "Output directory")->required();
  synth_cmd->add_option("--seed", synth_flags.config.seed, "Generator seed");
  synth_cmd->add_option("--views", synth_flags.views, "Comma-separated camera azimuths in degrees");
  synth_cmd->add_option("--classes", synth_flags.config.num_classes, "Number of classes (first half static)");
  synth_cmd->add_option("--per-class", synth_flags.config.sequences_per_class, "Training sequences per class");
  synth_cmd->add_option("--test-per-class", synth_flags.config.test_sequences_per_class,
                        "Test sequences per class and view");
  synth_cmd->add_option("--frames", synth_flags.config.frames_per_sequence, "Frames per sequence");
  synth_cmd->add_option("--sigma-a", synth_flags.config.sigma_a, "Appearance noise");
  synth_cmd->add_option("--sigma-k", synth_flags.config.sigma_k, "Joint noise in metres");
  synth_cmd->add_option("--leak", synth_flags.config.kinematic_appearance_leak,
                        "Class-specific appearance offset of static classes");

  TrainFlags train_flags;
  auto * train_cmd = app.add_subcommand("train", "Train a KLRF (or baseline) model");
  train_cmd->add_option("--data", train_flags.data, "Training manifest")->required();
  train_cmd->add_option("--model", train_flags.model_out, "Model output path")->required();
  train_cmd->add_option("--config", train_flags.config_file, "JSON config file; flags override it");
  train_cmd->add_option("--trees", train_flags.trees, "Number of trees (default 500)");
  train_cmd->add_option("--seed", train_flags.seed, "Training seed");
  train_cmd->add_option("--threads", train_flags.threads, "Worker threads (0 = all cores)");
  train_cmd->add_option("--qv-prob", train_flags.qv_prob, "Probability of switching to Q_v in cross-view mode");
  train_cmd->add_flag("--baseline", train_flags.baseline, "Train a Q_c-only random forest");
  train_cmd->add_flag("--cross-view", train_flags.cross_view, "Enable the view-clustering quality function");
  train_cmd->add_flag("--no-references", train_flags.no_references, "Do not store F_A and F_K in the model file");
  train_cmd->add_option("--report", train_flags.report_out, "Write a JSON training-fit report");

  auto add_eval_flags = [](CLI::App * cmd, EvalFlags & f) {
    cmd->add_option("--model", f.model, "Model file")->required();
    cmd->add_option("--data", f.data, "Test manifest (repeatable)")->required();
    cmd->add_option("--views", f.views, "Only evaluate these view labels (repeatable)");
    cmd->add_flag("--kcf", f.kcf, "Apply the kinematic consistency filter per augmentation group");
    cmd->add_option("--kcf-offsets", f.kcf_offsets, "Test-time temporal-offset variants pooled per sequence");
    cmd->add_option("--kcf-bandwidth", f.kcf_bandwidth, "KCF kernel width (default: median distance)");
  };
  EvalFlags eval_flags;
  auto * eval_cmd = app.add_subcommand("eval", "Evaluate a model on labeled sequences");
  add_eval_flags(eval_cmd, eval_flags);
  eval_cmd->add_option("--report", eval_flags.report_out, "Write the JSON report here");

  EvalFlags predict_flags;
  auto * predict_cmd = app.add_subcommand("predict", "Print per-sequence predictions");
  add_eval_flags(predict_cmd, predict_flags);

  std::string inspect_path;
  auto * inspect_cmd = app.add_subcommand("inspect", "Summarize a model file");
  inspect_cmd->add_option("model", inspect_path, "Model file")->required();

  try {
    app.parse(argc, argv);
  } catch (CLI::ParseError const & e) {
    int const code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*synth_cmd) return cmd_synth(synth_flags);
    if (*train_cmd) return cmd_train(train_flags);
    if (*eval_cmd) return cmd_eval(eval_flags);
    if (*predict_cmd) return cmd_predict(predict_flags);
    if (*inspect_cmd) return cmd_inspect(inspect_path);
  } catch (ConfigError const & e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (DataError const & e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (InvariantError const & e) {
    std::cerr << "internal invariant violated: " << e.what() << '\n';
    return kInvariant;
  } catch (std::exception const & e) {
    std::cerr << "error: " << e.what() << '\n';
    return kOther;
  }
  return kOther;
}
