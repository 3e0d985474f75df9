#include <doctest.h>

#include <cmath>
#include <map>
#include <vector>

#include "vstack/metrics.hpp"
#include "vstack/random.hpp"

using namespace vstack;

namespace {

ConfusionMatrix binary_example() {
  ConfusionMatrix cm(2);
  cm.add(1, 1, 3);  // TP
  cm.add(0, 0, 5);  // TN
  cm.add(0, 1, 1);  // FP
  cm.add(1, 0, 1);  // FN
  return cm;
}

}  // namespace

TEST_CASE("binary example TP3 TN5 FP1 FN1") {
  const auto m = compute_metrics(binary_example());
  CHECK(m.averaging == Averaging::Binary);
  CHECK(m.accuracy == doctest::Approx(0.8));
  CHECK(m.precision == doctest::Approx(0.75));
  CHECK(m.recall == doctest::Approx(0.75));
  CHECK(m.f1 == doctest::Approx(0.75));
  CHECK(m.total == 10);
  CHECK(m.correct == 8);
  CHECK(m.warnings.empty());
}

TEST_CASE("confusion from predictions") {
  const std::map<SampleId, ClassIndex> pred{{"a", 0}, {"b", 2}, {"c", 2}};
  const LabelMap labels{{"a", 0}, {"b", 1}, {"c", 2}, {"extra", 1}};
  const auto cm = compute_confusion(pred, labels, 3);
  CHECK(cm.at(0, 0) == 1);
  CHECK(cm.at(1, 2) == 1);
  CHECK(cm.at(2, 2) == 1);
  CHECK(cm.total() == 3);
  CHECK(cm.trace() == 2);

  try {
    compute_confusion({}, labels, 3);
    FAIL("empty predictions accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptyInput);
  }
  CHECK_THROWS_AS(compute_confusion({{"zzz", 0}}, labels, 3), Error);
  CHECK_THROWS_AS(compute_confusion({{"a", 3}}, labels, 3), Error);
}

TEST_CASE("a class that is never predicted yields a warning and zero precision") {
  ConfusionMatrix cm(3);
  cm.add(0, 0, 4);
  cm.add(1, 0, 2);
  cm.add(2, 2, 3);
  const auto m = compute_metrics(cm);
  CHECK(m.averaging == Averaging::Macro);
  CHECK(m.per_class[1].precision == 0.0);
  CHECK(m.per_class[1].f1 == 0.0);
  CHECK_FALSE(m.warnings.empty());
}

TEST_CASE("averaging modes") {
  ConfusionMatrix cm(3);
  cm.add(0, 0, 8);
  cm.add(0, 1, 2);
  cm.add(1, 1, 3);
  cm.add(2, 2, 1);
  cm.add(2, 0, 1);
  const auto macro = compute_metrics(cm, Averaging::Macro);
  const auto micro = compute_metrics(cm, Averaging::Micro);
  const auto weighted = compute_metrics(cm, Averaging::Weighted);
  double p = 0.0;
  double wr = 0.0;
  for (const auto& c : macro.per_class) {
    p += c.precision / 3.0;
    wr += c.recall * static_cast<double>(c.support) / 15.0;
  }
  CHECK(macro.precision == doctest::Approx(p));
  CHECK(micro.precision == doctest::Approx(12.0 / 15.0));
  CHECK(micro.f1 == micro.accuracy);
  CHECK(weighted.recall == doctest::Approx(wr));
  CHECK(weighted.recall == doctest::Approx(weighted.accuracy));
  CHECK_THROWS_AS(compute_metrics(cm, Averaging::Binary), Error);
}

TEST_CASE("accuracy equals trace over total on random confusions") {
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t c = 2 + rng.below(6);
    ConfusionMatrix cm(c);
    for (std::size_t i = 0; i < c * c; ++i) cm.add(i / c, i % c, rng.below(20));
    cm.add(0, 0);
    const auto m = compute_metrics(cm);
    CHECK(m.accuracy == static_cast<double>(cm.trace()) / static_cast<double>(cm.total()));
    for (const auto& pc : m.per_class) {
      CHECK(pc.precision >= 0.0);
      CHECK(pc.precision <= 1.0);
      CHECK(pc.recall <= 1.0);
    }
  }
}

TEST_CASE("metrics of an empty matrix are an error") {
  CHECK_THROWS_AS(compute_metrics(ConfusionMatrix(2)), Error);
}

TEST_CASE("mean and population standard deviation") {
  const std::vector<double> v{2, 4, 4, 4, 5, 5, 7, 9};
  const auto ms = mean_std(v);
  CHECK(ms.mean == 5.0);
  CHECK(ms.std == 2.0);
  const std::vector<double> one{0.3};
  CHECK(mean_std(one).std == 0.0);
  CHECK_THROWS_AS(mean_std(std::vector<double>{}), Error);
}

TEST_CASE("averaging names round-trip") {
  for (auto a : {Averaging::Auto, Averaging::Binary, Averaging::Macro, Averaging::Micro, Averaging::Weighted}) {
    CHECK(parse_averaging(to_string(a)) == a);
  }
  CHECK_THROWS_AS(parse_averaging("harmonic"), Error);
}
