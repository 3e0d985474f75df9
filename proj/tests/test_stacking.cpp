#include <doctest.h>

#include <set>
#include <vector>

#include "oracles.hpp"
#include "vstack/io.hpp"
#include "vstack/pipeline.hpp"
#include "vstack/stacking.hpp"

using namespace vstack;

namespace {

ProbabilityVector pv(std::vector<double> v) { return validate_probability_vector(v); }

// Ten samples, two learners, three classes. Samples s7..s9 are mispredicted by
// the vote.
struct Fixture {
  ProbabilityTable table{3, {"a", "b"}, 0};
  LabelMap labels;
  std::map<SampleId, VoteResult> votes;

  Fixture() {
    for (int i = 0; i < 10; ++i) {
      const SampleId id = "s" + std::to_string(i);
      const ClassIndex y = static_cast<ClassIndex>(i % 3);
      const ClassIndex shown = i >= 7 ? (y + 1) % 3 : y;
      std::vector<double> a(3, 0.1);
      a[shown] = 0.8;
      std::vector<double> b(3, 0.2);
      b[shown] = 0.6;
      table.insert({id, 0, kSingleFold}, pv(a));
      table.insert({id, 1, kSingleFold}, pv(b));
      table.set_label(id, y);
      labels[id] = y;
    }
    const auto ids = table.sample_ids();
    votes = vote_table(table, ids);
  }
};

LearnerSpec knn(std::size_t k, std::string name = "knn") {
  LearnerSpec s;
  s.name = std::move(name);
  s.kind = LearnerKind::Knn;
  s.neighbors = k;
  return s;
}

LearnerSpec gnb(std::string name = "gnb") {
  LearnerSpec s;
  s.name = std::move(name);
  s.kind = LearnerKind::GaussianNb;
  return s;
}

}  // namespace

TEST_CASE("meta features concatenate in learner order") {
  const std::vector<ProbabilityVector> ps{pv({0.1, 0.9}), pv({0.7, 0.3})};
  CHECK(build_meta_features(ps) == std::vector<double>{0.1, 0.9, 0.7, 0.3});
  const std::vector<ProbabilityVector> ragged{pv({0.1, 0.9}), pv({0.2, 0.3, 0.5})};
  CHECK_THROWS_AS(build_meta_features(ragged), Error);
}

TEST_CASE("the filtered meta set keeps exactly the mispredicted samples") {
  Fixture f;
  const auto meta = build_meta_training_set(f.table, f.labels, f.votes, true);
  CHECK(meta.size() == 3);
  CHECK(meta.provenance.source_size == 10);
  CHECK(meta.provenance.retained == 3);
  CHECK(meta.feature_dim() == 6);
  std::set<SampleId> kept;
  for (const auto& s : meta.samples) {
    kept.insert(s.source_id);
    CHECK(s.label == f.labels.at(s.source_id));
    CHECK(s.features.size() == 6);
  }
  CHECK(kept == std::set<SampleId>{"s7", "s8", "s9"});

  const auto plain = build_meta_training_set(f.table, f.labels, f.votes, false);
  CHECK(plain.size() == 10);
  CHECK_FALSE(plain.provenance.filtered);
}

TEST_CASE("filtering agrees with a direct recomputation on random tables") {
  Rng rng(404);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t c = 2 + rng.below(4);
    const std::size_t t = 1 + rng.below(4);
    std::vector<std::string> names;
    for (std::size_t i = 0; i < t; ++i) names.push_back("l" + std::to_string(i));
    ProbabilityTable table(c, names, 0);
    LabelMap labels;
    const std::size_t n = 5 + rng.below(30);
    for (std::size_t i = 0; i < n; ++i) {
      const SampleId id = "r" + std::to_string(i);
      for (std::size_t l = 0; l < t; ++l) {
        std::vector<double> v(c);
        double total = 0.0;
        for (auto& x : v) total += (x = rng.uniform());
        for (auto& x : v) x /= total;
        table.insert({id, l, kSingleFold}, renormalize_probability_vector(v, 1e-6));
      }
      labels[id] = rng.below(c);
    }
    const auto ids = table.sample_ids();
    const auto votes = vote_table(table, ids);
    const auto meta = build_meta_training_set(table, labels, votes, true);
    std::set<SampleId> expected;
    for (const auto& [id, y] : labels) {
      std::vector<double> mean(c, 0.0);
      for (std::size_t l = 0; l < t; ++l) {
        for (std::size_t j = 0; j < c; ++j) mean[j] += table.at({id, l, kSingleFold})[j] / static_cast<double>(t);
      }
      if (oracle::first_max(mean) != y) expected.insert(id);
    }
    std::set<SampleId> got;
    for (const auto& s : meta.samples) got.insert(s.source_id);
    CHECK(got == expected);
  }
}

TEST_CASE("meta set requires a vote for every labeled sample") {
  Fixture f;
  f.votes.erase("s3");
  CHECK_THROWS_AS(build_meta_training_set(f.table, f.labels, f.votes, true), Error);
}

TEST_CASE("a meta learner recovers a fixed class permutation") {
  // Base learners always report the class after the true one.
  ProbabilityTable table(3, {"a", "b"}, 0);
  LabelMap labels;
  for (int i = 0; i < 60; ++i) {
    const SampleId id = "p" + std::to_string(100 + i);
    const ClassIndex y = static_cast<ClassIndex>(i % 3);
    std::vector<double> v(3, 0.05);
    v[(y + 1) % 3] = 0.9;
    table.insert({id, 0, kSingleFold}, pv(v));
    table.insert({id, 1, kSingleFold}, pv(v));
    labels[id] = y;
  }
  const auto ids = table.sample_ids();
  const auto votes = vote_table(table, ids);
  const auto meta = build_meta_training_set(table, labels, votes, true);
  REQUIRE(meta.size() == 60);
  LearnerSpec spec;
  spec.train.learning_rate = 0.05;
  spec.train.seed = 1;
  const auto stack = multilevel_stack(meta, StackConfig::two_level(spec));
  for (const auto& s : meta.samples) CHECK(argmax_label(stack.predict(s.features)) == s.label);
}

TEST_CASE("meta training failure modes") {
  MetaDataset empty{{}, 2, 3, {}};
  try {
    multilevel_stack(empty, StackConfig::two_level(LearnerSpec{}));
    FAIL("empty meta accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptyMeta);
  }

  MetaDataset single{{}, 1, 2, {}};
  for (int i = 0; i < 6; ++i) single.samples.push_back({"m" + std::to_string(i), {0.5, 0.5}, 1});
  try {
    multilevel_stack(single, StackConfig::two_level(LearnerSpec{}));
    FAIL("single-class meta accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DegenerateSplit);
  }
}

TEST_CASE("label-guided routing sends exactly the vote errors to the meta learner") {
  Fixture f;
  const auto meta = build_meta_training_set(f.table, f.labels, f.votes, true);
  const auto stack = multilevel_stack(meta, StackConfig::two_level(knn(1)));
  const auto r = predict_label_guided(f.table, &stack, f.labels);
  CHECK(r.routed == std::set<SampleId>{"s7", "s8", "s9"});
  for (const auto& id : r.routed) CHECK(r.predicted.at(id) == f.labels.at(id));
  for (int i = 0; i < 7; ++i) {
    const SampleId id = "s" + std::to_string(i);
    CHECK(r.predicted.at(id) == f.votes.at(id).predicted);
  }

  const auto plain = predict_label_guided(f.table, nullptr, f.labels);
  CHECK(plain.routed.empty());
  for (const auto& [id, y] : plain.predicted) CHECK(y == f.votes.at(id).predicted);
}

TEST_CASE("disagreement routing follows the argmax labels only") {
  ProbabilityTable t(2, {"a", "b"}, 0);
  t.insert({"agree", 0, kSingleFold}, pv({0.9, 0.1}));
  t.insert({"agree", 1, kSingleFold}, pv({0.6, 0.4}));
  t.insert({"split", 0, kSingleFold}, pv({0.9, 0.1}));
  t.insert({"split", 1, kSingleFold}, pv({0.4, 0.6}));
  MetaStack always_one;
  always_one.level2.push_back(FittedLearner{KnnModel{2, 1, {{"m", {0.0, 0.0, 0.0, 0.0}, 1}}}, std::nullopt});
  const auto r = predict_disagreement(t, &always_one);
  CHECK(r.routed == std::set<SampleId>{"split"});
  CHECK(r.predicted.at("agree") == 0);
  CHECK(r.predicted.at("split") == 1);
  const auto v = predict_disagreement(t, nullptr);
  CHECK(v.predicted.at("split") == 0);
  CHECK(v.routed.empty());
}

TEST_CASE("label-guided routing without labels is a mode error") {
  Fixture f;
  try {
    voting_stacking_predict(f.table, nullptr, RoutingMode::LabelGuided, nullptr);
    FAIL("missing labels accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Mode);
  }
  LabelMap partial = f.labels;
  partial.erase("s0");
  CHECK_THROWS_AS(voting_stacking_predict(f.table, nullptr, RoutingMode::LabelGuided, &partial), Error);
  CHECK_NOTHROW(voting_stacking_predict(f.table, nullptr, RoutingMode::Disagreement, nullptr));
}

TEST_CASE("routing modes parse by name") {
  CHECK(parse_routing_mode("guided") == RoutingMode::LabelGuided);
  CHECK(parse_routing_mode("disagreement") == RoutingMode::Disagreement);
  CHECK_THROWS_AS(parse_routing_mode("oracle"), Error);
  CHECK(to_string(RoutingMode::LabelGuided) == "guided");
}

TEST_CASE("general stacking with one perfect base learner reproduces it") {
  const auto train = oracle::random_dataset(12, 30, 3, 2, 0.05);
  const std::vector<LearnerSpec> bases{knn(1)};
  const auto model = general_stacking(train, train, bases, knn(1, "meta"));
  for (const auto& s : train.samples()) CHECK(model.predict(s.features) == s.label);
}

TEST_CASE("general stacking matches the brute-force reference") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto train = oracle::random_dataset(seed, 24, 3, 3, 1.2);
    const auto probe = oracle::random_dataset(seed + 50, 12, 3, 3, 2.0, "q");
    const std::vector<LearnerSpec> bases{knn(3), gnb()};
    const auto model = general_stacking(train, train, bases, gnb("meta"));
    const oracle::StackingOracle ref(train, {{LearnerKind::Knn, 3}, {LearnerKind::GaussianNb}},
                                     {LearnerKind::GaussianNb});
    for (const auto& s : probe.samples()) CHECK(model.predict(s.features) == ref.classify(s.features));
  }
}

TEST_CASE("a zero-epoch softmax meta learner always predicts class 0") {
  const auto train = oracle::random_dataset(2, 20, 3, 2);
  LearnerSpec meta;
  meta.train.max_epochs = 0;
  const std::vector<LearnerSpec> bases{gnb()};
  const auto model = general_stacking(train, train, bases, meta);
  for (const auto& s : train.samples()) CHECK(model.predict(s.features) == 0);
}

TEST_CASE("identical level-2 learners under a super learner") {
  Fixture f;
  const auto meta = build_meta_training_set(f.table, f.labels, f.votes, false);
  StackConfig cfg;
  cfg.level2 = {knn(1, "k1"), knn(1, "k2")};
  cfg.super_learner = knn(1, "super");
  const auto stack = multilevel_stack(meta, cfg);
  REQUIRE(stack.level2.size() == 2);
  CHECK(stack.level2[0] == stack.level2[1]);
  for (const auto& s : meta.samples) {
    const auto z = stack.level3_features(s.features);
    CHECK(z.size() == 6);
    CHECK(std::equal(z.begin(), z.begin() + 3, z.begin() + 3));
  }
}

TEST_CASE("a single level-2 learner under a super learner warns") {
  Fixture f;
  const auto meta = build_meta_training_set(f.table, f.labels, f.votes, false);
  StackConfig cfg;
  cfg.level2 = {knn(1)};
  cfg.super_learner = knn(1, "super");
  const auto stack = multilevel_stack(meta, cfg);
  CHECK_FALSE(stack.warnings.empty());

  StackConfig bad;
  bad.level2 = {knn(1), gnb()};
  CHECK_THROWS_AS(multilevel_stack(meta, bad), Error);
}

TEST_CASE("split_meta is stratified, disjoint and seeded") {
  Fixture f;
  const auto meta = build_meta_training_set(f.table, f.labels, f.votes, false);
  const auto [train, val] = split_meta(meta, 0.2, 9);
  CHECK(train.size() + val.size() == meta.size());
  CHECK(val.size() == 2);
  std::set<SampleId> seen;
  for (const auto& s : train.samples) seen.insert(s.source_id);
  for (const auto& s : val.samples) CHECK(seen.insert(s.source_id).second);
  const auto [train2, val2] = split_meta(meta, 0.2, 9);
  CHECK(val2.samples == val.samples);
}

TEST_CASE("the super learner is at least as accurate as every level-2 learner on the three-level config") {
  auto cfg = read_run_config(std::string(VSTACK_SOURCE_DIR) + "/configs/three_level.json");
  cfg.ablation = false;
  cfg.meta_comparison = false;
  const auto run = run_pipeline(cfg);
  const auto& stack = run.report.stack;
  REQUIRE_FALSE(stack.meta_skipped);
  for (const auto& mode : stack.modes) {
    REQUIRE(mode.evaluation.has_value());
    for (const auto& [name, alone] : stack.level2) {
      for (const auto& m : alone) {
        if (m.mode != mode.mode) continue;
        REQUIRE(m.evaluation.has_value());
        CHECK(mode.evaluation->metrics.accuracy >= m.evaluation->metrics.accuracy);
      }
    }
  }
}
