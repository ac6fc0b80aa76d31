#include "helpers.hpp"

#include <doctest.h>

using namespace klrf;

TEST_CASE("class distribution enforces its invariant")
{
  ClassDistribution d(std::vector<double>{0.25, 0.75});
  CHECK(d.argmax() == 1);
  CHECK_THROWS_AS(ClassDistribution(std::vector<double>{0.5, 0.6}), InvariantError);
  CHECK_THROWS_AS(ClassDistribution(std::vector<double>{-0.1, 1.1}), InvariantError);
  CHECK_THROWS_AS(ClassDistribution(std::vector<double>{}), InvariantError);
  CHECK_THROWS_AS(ClassDistribution(std::vector<double>{NAN, 1.0}), InvariantError);

  auto c = ClassDistribution::from_counts(std::vector<double>{1, 3, 0});
  CHECK(c[0] == doctest::Approx(0.25));
  CHECK(c[1] == doctest::Approx(0.75));
  CHECK_THROWS_AS(ClassDistribution::from_counts(std::vector<double>{0, 0}), InvariantError);

  auto u = ClassDistribution::uniform(4);
  for (double p : u.probs()) CHECK(p == 0.25);
  auto h = ClassDistribution::one_hot(3, 2);
  CHECK(h.probs() == std::vector<double>{0, 0, 1});
}

TEST_CASE("label map is lexicographic over the training classes")
{
  std::vector<ActionSequence> seqs{fixture::sequence("a", "walk"), fixture::sequence("b", "lie"),
                                   fixture::sequence("c", "walk"), fixture::sequence("d", "fall")};
  auto labels = LabelMap::from_sequences(seqs);
  REQUIRE(labels.size() == 3);
  CHECK(labels.names() == std::vector<std::string>{"fall", "lie", "walk"});
  for (std::size_t i = 0; i < labels.size(); ++i) CHECK(labels.index_of(labels.name(i)) == static_cast<int>(i));
  CHECK_FALSE(labels.find("run").has_value());
  CHECK_THROWS_AS(labels.index_of("run"), DataError);
}

TEST_CASE("validate_dataset: well-formed sequence passes")
{
  std::vector<ActionSequence> seqs{fixture::sequence("a", "walk")};
  CHECK(validate_dataset(seqs).empty());
}

TEST_CASE("validate_dataset: joint-count mismatch across sequences")
{
  std::vector<ActionSequence> seqs{fixture::sequence("a", "walk", 6, 15), fixture::sequence("b", "walk", 6, 14)};
  auto report = validate_dataset(seqs);
  REQUIRE_FALSE(report.empty());
  CHECK(fixture::contains(report, "joint-count mismatch"));
}

TEST_CASE("validate_dataset: non-unit normal")
{
  auto s = fixture::sequence("a", "walk");
  s.planes[1].normal = {0, 0, 2};
  std::vector<ActionSequence> seqs{s};
  CHECK(fixture::contains(validate_dataset(seqs), "non-unit normal"));
}

TEST_CASE("validate_dataset: duplicate ids and appearance dimension")
{
  std::vector<ActionSequence> seqs{fixture::sequence("a", "walk", 6, 3, 4), fixture::sequence("a", "lie", 6, 3, 5)};
  auto report = validate_dataset(seqs);
  CHECK(fixture::contains(report, "duplicate sequence id"));
  CHECK(fixture::contains(report, "appearance dimension mismatch"));
  CHECK(fixture::contains(validate_dataset(std::vector<ActionSequence>{}), "no sequences"));
}

TEST_CASE("strip_privileged removes skeletons and planes only")
{
  auto s = fixture::sequence("a", "walk");
  auto t = strip_privileged(s);
  CHECK(t.frames.empty());
  CHECK(t.planes.empty());
  CHECK_FALSE(t.has_kinematics());
  CHECK(t.appearance_frames == s.appearance_frames);
  CHECK(t.length() == s.length());
  CHECK(t.label == s.label);
}

TEST_CASE("config defaults and validation")
{
  KLRFConfig c;
  CHECK(c.num_trees == 500);
  CHECK(c.eta_fraction == 0.1);
  CHECK(c.candidates_per_node == 100);
  CHECK(c.min_samples_leaf == 1);
  CHECK(c.qv_switch_prob == 0.5);
  CHECK_FALSE(c.kcf_bandwidth.has_value());
  CHECK(c.weight_clamp_epsilon == 1e-6);
  CHECK(c.pyramid_levels == 3);
  CHECK(c.fourier_coeffs_per_segment == 4);
  CHECK(c.augmentation.translations == 10);
  CHECK(c.augmentation.rotations == 5);
  CHECK(c.augmentation.rotation_max_deg == 60.0);
  CHECK(c.augmentation.temporal_offsets == 10);
  CHECK_FALSE(c.cross_view_mode);
  CHECK_NOTHROW(c.validate());

  auto bad = [](auto mutate) {
    KLRFConfig x;
    mutate(x);
    CHECK_THROWS_AS(x.validate(), ConfigError);
  };
  bad([](KLRFConfig & x) { x.num_trees = 0; });
  bad([](KLRFConfig & x) { x.eta_fraction = 0.0; });
  bad([](KLRFConfig & x) { x.eta_fraction = 1.0; });
  bad([](KLRFConfig & x) { x.qv_switch_prob = 1.5; });
  bad([](KLRFConfig & x) { x.kcf_bandwidth = 0.0; });
  bad([](KLRFConfig & x) { x.augmentation.rotations = -1; });
}
