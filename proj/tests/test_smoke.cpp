#include "klrf/learning.hpp"
#include "klrf/report.hpp"
#include "klrf/synth.hpp"

#include <doctest.h>

TEST_CASE("synthetic benchmark trains end to end")
{
  klrf::synth::SynthConfig sc;
  sc.sequences_per_class = 10;
  sc.test_sequences_per_class = 5;
  auto data = klrf::synth::synth_generate(sc);
  klrf::KLRFConfig c;
  c.num_trees = 10;
  c.augmentation = {0, 0, 60.0, 0, false};
  auto model = klrf::learning::train_klrf(data.train, c, 1);
  CHECK(klrf::report::mean_accuracy(model, data.test) > 0.2);
}
