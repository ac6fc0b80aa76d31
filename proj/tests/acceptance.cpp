// Acceptance harness: runs each primary criterion at its stated tolerance and prints one
// PASS/FAIL line per criterion. Exit status is 0 only when every selected criterion passes.

#include "oracles.hpp"

#include "klrf/features.hpp"
#include "klrf/io.hpp"
#include "klrf/report.hpp"
#include "klrf/synth.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

using namespace klrf;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start)
{
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, int precision = 2)
{
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

std::string sci(double v)
{
  std::ostringstream os;
  os << std::scientific << std::setprecision(2) << v;
  return os.str();
}

struct Outcome
{
    bool pass = false;
    std::string detail;
};

void note(std::string const & line)
{
  std::cout << "    " << line << std::endl;
}

/// Default synthetic benchmark for one seed.
synth::SynthData benchmark(std::uint64_t seed, std::vector<double> views = {0.0}, double sigma_a = 1.0)
{
  synth::SynthConfig sc;
  sc.seed = seed;
  sc.views = std::move(views);
  sc.sigma_a = sigma_a;
  return synth::synth_generate(sc);
}

KLRFConfig same_view_config(std::uint64_t seed, int trees)
{
  KLRFConfig c;
  c.num_trees = trees;
  c.seed = seed;
  c.augmentation = {0, 0, 60.0, 0, false};
  return c;
}

std::vector<ActionSequence> of_views(std::vector<ActionSequence> const & all, std::set<std::string> const & views)
{
  std::vector<ActionSequence> out;
  for (auto const & s : all)
    if (views.count(s.view)) out.push_back(s);
  return out;
}

Rng & shared_rng()
{
  static Rng rng(20240611);
  return rng;
}

std::vector<double> random_distribution(Rng & rng, std::size_t n)
{
  std::vector<double> p(n);
  double s = 0;
  for (double & v : p) s += (v = uniform01_open_low(rng));
  for (double & v : p) v /= s;
  return p;
}

//============================================================================
// Criteria 1 and 2: same-view benchmark
//============================================================================

struct SameViewRun
{
    double klrf = 0, baseline = 0, seconds = 0;
    std::vector<double> usefulness;
    std::vector<int> labels;
    std::vector<std::string> class_names;
};

std::vector<SameViewRun> same_view_runs(int seeds, int trees)
{
  std::vector<SameViewRun> runs;
  for (int s = 0; s < seeds; ++s) {
    auto const start = Clock::now();
    auto data = benchmark(static_cast<std::uint64_t>(s));
    auto config = same_view_config(static_cast<std::uint64_t>(s), trees);
    auto klrf_model = learning::train_klrf(data.train, config, 1);
    auto base_model = learning::train_baseline(data.train, config, 1);
    SameViewRun r;
    r.klrf = 100 * report::mean_accuracy(klrf_model, data.test);
    r.baseline = 100 * report::mean_accuracy(base_model, data.test);
    r.seconds = seconds_since(start);
    r.usefulness = klrf_model.usefulness;
    r.labels = klrf_model.training_labels;
    r.class_names = klrf_model.forest.labels.names();
    note("seed " + std::to_string(s) + ": klrf " + fmt(r.klrf) + "  baseline " + fmt(r.baseline) + "  diff " +
         fmt(r.klrf - r.baseline) + "  (" + fmt(r.seconds, 1) + " s)");
    runs.push_back(std::move(r));
  }
  return runs;
}

Outcome criterion1(std::vector<SameViewRun> const & runs)
{
  double diff = 0, base = 0, worst_time = 0;
  bool base_in_range = true;
  for (auto const & r : runs) {
    diff += r.klrf - r.baseline;
    base += r.baseline;
    base_in_range = base_in_range && r.baseline >= 60 && r.baseline <= 85;
    worst_time = std::max(worst_time, r.seconds);
  }
  double const n = static_cast<double>(runs.size());
  diff /= n;
  base /= n;
  bool const pass = diff >= 3.0 && base_in_range && worst_time <= 300;
  return {pass, "mean klrf - baseline " + fmt(diff) + " pts (need >= +3.00), mean baseline " + fmt(base) +
                    "% (each in [60, 85]: " + (base_in_range ? "yes" : "no") + "), slowest seed " + fmt(worst_time, 1) +
                    " s (limit 300)"};
}

Outcome criterion2(std::vector<SameViewRun> const & runs)
{
  double kin = 0, app = 0;
  std::size_t nk = 0, na = 0;
  for (auto const & r : runs)
    for (std::size_t i = 0; i < r.usefulness.size(); ++i) {
      auto const & name = r.class_names[static_cast<std::size_t>(r.labels[i])];
      if (name.ends_with("_static"))
        kin += r.usefulness[i], ++nk;
      else
        app += r.usefulness[i], ++na;
    }
  kin /= static_cast<double>(nk);
  app /= static_cast<double>(na);
  return {kin > 0.05 && app < -0.05,
          "mean U kinematic classes " + fmt(kin, 3) + " (need > 0.05), appearance classes " + fmt(app, 3) +
              " (need < -0.05)"};
}

//============================================================================
// Criterion 3: gap-closing weights
//============================================================================

Outcome criterion3()
{
  Rng & rng = shared_rng();
  double worst_dw = 0;
  int residual_failures = 0;
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t const classes = 2 + uniform_index(rng, 5), n = 2 + uniform_index(rng, 39);
    std::vector<std::vector<double>> cols;
    for (std::size_t i = 0; i < n; ++i) cols.push_back(random_distribution(rng, classes));
    auto const b = random_distribution(rng, classes);
    auto const w = learning::gap_weights(cols, b, 1e-6);

    Matrix a(classes, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t y = 0; y < classes; ++y) a(y, i) = cols[i][y];
    auto const reference = oracle::least_squares_by_gradient(a, b);
    for (std::size_t i = 0; i < n; ++i) worst_dw = std::max(worst_dw, std::abs(w.raw[i] - reference[i]));
    std::vector<double> const uniform_w(n, 1.0 / static_cast<double>(n));
    if (oracle::residual_norm(a, w.raw, b) > oracle::residual_norm(a, uniform_w, b) + 1e-12) ++residual_failures;
  }
  return {worst_dw <= 1e-6 && residual_failures == 0,
          "max |dw| vs gradient oracle " + sci(worst_dw) + " (need <= 1e-6), residual above uniform in " +
              std::to_string(residual_failures) + "/50"};
}

//============================================================================
// Criterion 4: quality functions
//============================================================================

Outcome criterion4()
{
  using namespace learning;
  double worst = 0;
  auto hand = [&](double got, double want) { worst = std::max(worst, std::abs(got - want)); };

  std::vector<double> l{-1, 1}, r{0};
  hand(q_switch(l, r), 0.6);
  std::vector<double> a{0.3, 0.3}, b{-0.2};
  hand(q_switch(a, b), 1.0);
  std::vector<double> mixed{1, 1}, empty{0, 0}, pure_l{3, 0}, pure_r{0, 2};
  hand(q_appearance(mixed, empty), -2 * std::log(2.0));
  hand(q_appearance(pure_l, pure_r), 0.0);
  double const w = 0.7;
  std::vector<double> kl{2 * w, 0}, kr{0, 2 * w};
  hand(q_kinematic(kl, kr), -4 * w * std::log(2.0));
  std::vector<double> k1{0, 0}, k2{2, 0}, k3{5, 5};
  std::vector<std::span<const double>> vl{k1, k2}, vr{k3};
  hand(q_view(vl, vr), 0.6);

  Rng & rng = shared_rng();
  int asymmetric = 0;
  for (int node = 0; node < 1000; ++node) {
    std::size_t const nl = uniform_index(rng, 8), nr = 1 + uniform_index(rng, 8), classes = 2 + uniform_index(rng, 4);
    std::vector<double> ul(nl), ur(nr), hl(classes), hr(classes);
    for (double & v : ul) v = uniform(rng, -1, 1);
    for (double & v : ur) v = uniform(rng, -1, 1);
    for (double & v : hl) v = uniform(rng, 0, 5);
    for (double & v : hr) v = uniform(rng, 0, 5);
    std::vector<std::vector<double>> kls(nl, std::vector<double>(3)), krs(nr, std::vector<double>(3));
    for (auto & k : kls)
      for (double & v : k) v = uniform(rng, -2, 2);
    for (auto & k : krs)
      for (double & v : k) v = uniform(rng, -2, 2);
    std::vector<std::span<const double>> sl(kls.begin(), kls.end()), sr(krs.begin(), krs.end());
    bool const same = std::abs(q_switch(ul, ur) - q_switch(ur, ul)) <= 1e-12 &&
                      std::abs(q_appearance(hl, hr) - q_appearance(hr, hl)) <= 1e-12 &&
                      std::abs(q_kinematic(hl, hr) - q_kinematic(hr, hl)) <= 1e-12 &&
                      std::abs(q_view(sl, sr) - q_view(sr, sl)) <= 1e-12;
    asymmetric += !same;
  }
  return {worst <= 1e-12 && asymmetric == 0,
          "max hand-value error " + sci(worst) + " (need <= 1e-12), swap-asymmetric nodes " +
              std::to_string(asymmetric) + "/1000"};
}

//============================================================================
// Criterion 5: kinematic consistency filter
//============================================================================

Outcome criterion5()
{
  Rng & rng = shared_rng();
  auto pred = [&](std::size_t classes, std::vector<double> k) {
    return forest::Prediction{ClassDistribution(random_distribution(rng, classes)), std::move(k)};
  };
  double worst_sum = 0, worst_identity = 0, worst_mean = 0;
  for (int g = 0; g < 1000; ++g) {
    std::size_t const classes = 2 + uniform_index(rng, 5), size = 1 + uniform_index(rng, 8);
    std::vector<forest::Prediction> group;
    for (std::size_t i = 0; i < size; ++i) group.push_back(pred(classes, {uniform(rng, -1, 1), uniform(rng, -1, 1)}));
    auto const query = uniform_index(rng, size);
    auto const out = learning::kcf(query, group);
    double s = 0;
    for (double v : out.probs()) s += v;
    worst_sum = std::max(worst_sum, std::abs(s - 1.0));

    std::vector<forest::Prediction> single{group[query]};
    auto const id = learning::kcf(0, single);
    for (std::size_t y = 0; y < classes; ++y) worst_identity = std::max(worst_identity, std::abs(id[y] - single[0].distribution[y]));

    auto coincide = group;
    for (auto & p : coincide) p.kinematic = group[0].kinematic;
    auto const m = learning::kcf(query, coincide);
    for (std::size_t y = 0; y < classes; ++y) {
      double mean = 0;
      for (auto const & p : coincide) mean += p.distribution[y];
      worst_mean = std::max(worst_mean, std::abs(m[y] - mean / static_cast<double>(size)));
    }
  }
  return {worst_sum <= 1e-9 && worst_identity <= 1e-9 && worst_mean <= 1e-9,
          "max |sum - 1| " + sci(worst_sum) + ", singleton deviation " + sci(worst_identity) +
              ", coincident-K deviation from mean " + sci(worst_mean) + " (each need <= 1e-9)"};
}

//============================================================================
// Criterion 6: temporal Fourier pyramid
//============================================================================

Outcome criterion6()
{
  Rng & rng = shared_rng();
  double worst_dc = 0, worst_shift = 0;
  int bad_dims = 0;
  for (int trial = 0; trial < 100; ++trial) {
    int const levels = 1 + static_cast<int>(uniform_index(rng, 4));
    int const k = 1 + static_cast<int>(uniform_index(rng, 6));
    std::size_t const d = 1 + uniform_index(rng, 6);
    // every pyramid segment holds at least k frames
    std::size_t const T = static_cast<std::size_t>(k) * (std::size_t{1} << (levels - 1)) + uniform_index(rng, 20);

    Matrix constant(T, d);
    for (std::size_t j = 0; j < d; ++j) {
      double const c = uniform(rng, -5, 5);
      for (std::size_t t = 0; t < T; ++t) constant(t, j) = c;
    }
    auto const enc = features::fourier_encode(constant, levels, k);
    if (enc.size() != d * static_cast<std::size_t>(k) * ((std::size_t{1} << levels) - 1) ||
        enc.size() != features::fourier_length(d, levels, k))
      ++bad_dims;
    for (std::size_t i = 0; i < enc.size(); ++i)
      if (i % static_cast<std::size_t>(k) != 0) worst_dc = std::max(worst_dc, std::abs(enc[i]));

    Matrix random(T, d), shifted(T, d);
    std::size_t const shift = uniform_index(rng, T);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t j = 0; j < d; ++j) random(t, j) = uniform(rng, -1, 1);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t j = 0; j < d; ++j) shifted(t, j) = random((t + shift) % T, j);
    auto const e1 = features::fourier_encode(random, 1, k), e2 = features::fourier_encode(shifted, 1, k);
    for (std::size_t i = 0; i < e1.size(); ++i) worst_shift = std::max(worst_shift, std::abs(e1[i] - e2[i]));
  }
  return {worst_dc < 1e-9 && worst_shift <= 1e-9 && bad_dims == 0,
          "max non-DC on constants " + sci(worst_dc) + ", max shift deviation " +
              sci(worst_shift) + " (need < 1e-9), dimension mismatches " + std::to_string(bad_dims) + "/100"};
}

//============================================================================
// Criterion 7: determinism
//============================================================================

Outcome criterion7(int trees)
{
  auto data = benchmark(0);
  auto config = same_view_config(0, trees);
  auto const one_a = io::serialize_model(learning::train_klrf(data.train, config, 1));
  auto const one_b = io::serialize_model(learning::train_klrf(data.train, config, 1));
  auto const four = io::serialize_model(learning::train_klrf(data.train, config, 4));
  bool const pass = one_a == one_b && one_a == four;
  return {pass, std::to_string(trees) + "-tree KLRF model, " + std::to_string(one_a.size()) +
                    " bytes: repeat run " + (one_a == one_b ? "identical" : "DIFFERS") + ", 4 threads " +
                    (one_a == four ? "identical" : "DIFFERS")};
}

//============================================================================
// Criterion 8: more trees do not hurt
//============================================================================

Outcome criterion8()
{
  auto data = benchmark(0);
  double const small = 100 * report::mean_accuracy(learning::train_klrf(data.train, same_view_config(0, 50), 1), data.test);
  double const large = 100 * report::mean_accuracy(learning::train_klrf(data.train, same_view_config(0, 500), 1), data.test);
  return {large >= small - 1.0, "accuracy at 500 trees " + fmt(large) + "%, at 50 trees " + fmt(small) +
                                    "% (need 500 >= 50 - 1.00)"};
}

//============================================================================
// Criterion 9: predictions use appearance only
//============================================================================

Outcome criterion9(int trees)
{
  auto data = benchmark(0);
  auto model = learning::train_klrf(data.train, same_view_config(0, trees), 1);
  std::vector<ActionSequence> stripped;
  for (auto const & s : data.test) stripped.push_back(strip_privileged(s));
  auto const full = report::predict_sequences(model, data.test);
  auto const bare = report::predict_sequences(model, stripped);
  std::size_t changed = 0;
  for (std::size_t i = 0; i < full.size(); ++i)
    changed += !(full[i].predicted == bare[i].predicted && full[i].distribution == bare[i].distribution);
  return {changed == 0, std::to_string(changed) + "/" + std::to_string(full.size()) +
                            " predictions changed after stripping skeletons and planes"};
}

//============================================================================
// Criterion 10: cross-view benchmark
//============================================================================

Outcome criterion10(int seeds, int trees)
{
  double diff_sum = 0;
  int wins = 0;
  for (int s = 0; s < seeds; ++s) {
    auto const start = Clock::now();
    auto const seed = static_cast<std::uint64_t>(s);
    auto data = benchmark(seed, {0.0, 30.0, 60.0}, 1.5);
    auto const test = of_views(data.test, {"30", "60"});

    auto control_config = same_view_config(seed, trees);
    double const control = 100 * report::mean_accuracy(learning::train_klrf(data.train, control_config, 1), test);

    auto treatment_config = control_config;
    treatment_config.cross_view_mode = true;
    treatment_config.qv_switch_prob = 0.5;
    treatment_config.augmentation = {2, 2, 60.0, 4, false};
    report::EvalOptions kcf;
    kcf.kcf = true;
    kcf.kcf_offsets = 4;
    double const treatment =
        100 * report::mean_accuracy(learning::train_klrf(data.train, treatment_config, 1), test, kcf);

    diff_sum += treatment - control;
    wins += treatment > control;
    note("seed " + std::to_string(s) + ": Q_v+aug+KCF " + fmt(treatment) + "  control " + fmt(control) + "  diff " +
         fmt(treatment - control) + "  (" + fmt(seconds_since(start), 1) + " s)");
  }
  double const mean = diff_sum / seeds;
  return {mean >= -0.5 && wins >= (6 * seeds + 9) / 10,
          "mean treatment - control " + fmt(mean) + " pts (need >= -0.50), strictly better on " +
              std::to_string(wins) + "/" + std::to_string(seeds) + " seeds (need >= 6/10)"};
}

} // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"Acceptance criteria"};
  int seeds = 10;
  int trees = 100;
  std::vector<int> only;
  app.add_option("--seeds", seeds, "Seeds for the benchmark criteria (1, 2, 10)");
  app.add_option("--trees", trees, "Trees for the benchmark criteria (1, 2, 7, 9, 10)");
  app.add_option("--only", only, "Run only these criteria");
  CLI11_PARSE(app, argc, argv);

  auto selected = [&](int c) { return only.empty() || std::find(only.begin(), only.end(), c) != only.end(); };
  int failures = 0;
  auto report_line = [&](int c, Outcome const & o) {
    std::cout << "criterion " << std::setw(2) << c << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail
              << std::endl;
    failures += !o.pass;
  };
  auto run = [&](int c, auto && body) {
    if (!selected(c)) return;
    auto const start = Clock::now();
    try {
      Outcome o = body();
      o.detail += "  [" + fmt(seconds_since(start), 1) + " s]";
      report_line(c, o);
    } catch (std::exception const & e) {
      report_line(c, {false, std::string("threw: ") + e.what()});
    }
  };

  std::vector<SameViewRun> same_view;
  if (selected(1) || selected(2)) same_view = same_view_runs(seeds, trees);
  run(1, [&] { return criterion1(same_view); });
  run(2, [&] { return criterion2(same_view); });
  run(3, [] { return criterion3(); });
  run(4, [] { return criterion4(); });
  run(5, [] { return criterion5(); });
  run(6, [] { return criterion6(); });
  run(7, [&] { return criterion7(trees); });
  run(8, [] { return criterion8(); });
  run(9, [&] { return criterion9(trees); });
  run(10, [&] { return criterion10(seeds, trees); });
  return failures == 0 ? 0 : 1;
}
