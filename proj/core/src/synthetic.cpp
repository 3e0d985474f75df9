#include "vstack/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "vstack/evaluation.hpp"
#include "vstack/random.hpp"

namespace vstack {

namespace {

void check(const SyntheticConfig& cfg) {
  if (cfg.class_count < 2) fail(ErrorKind::Config, "synthetic: need at least 2 classes");
  if (cfg.learner_count < 1) fail(ErrorKind::Config, "synthetic: need at least 1 learner");
  if (cfg.samples_per_class == 0) fail(ErrorKind::Config, "synthetic: samples_per_class must be positive");
  if (cfg.error_fraction < 0.0 || cfg.error_fraction * static_cast<double>(cfg.learner_count) > 1.0) {
    fail(ErrorKind::Config, "synthetic: error regions must be disjoint (learner_count * error_fraction <= 1)");
  }
}

struct Draw {
  std::vector<LabeledSample> samples;
  std::vector<int> regions;
};

Draw draw(const SyntheticConfig& cfg) {
  check(cfg);
  constexpr double kTwoPi = 6.283185307179586;
  const auto centroid = [&](std::size_t cls, std::size_t view, std::size_t axis) {
    // Each view rotates the class ring so views are not copies of each other.
    const double angle = kTwoPi * (static_cast<double>(cls) / static_cast<double>(cfg.class_count)) +
                         0.7 * static_cast<double>(view);
    return cfg.radius * (axis == 0 ? std::cos(angle) : std::sin(angle));
  };

  Rng rng(cfg.seed);
  Draw out;
  const std::size_t n = cfg.class_count * cfg.samples_per_class;
  // Region assignment: exactly round(error_fraction * n) samples per learner,
  // chosen by a seeded permutation so regions are disjoint.
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  rng.shuffle(std::span<std::size_t>(perm));
  out.regions.assign(n, -1);
  const auto per_region = static_cast<std::size_t>(std::llround(cfg.error_fraction * static_cast<double>(n)));
  for (std::size_t t = 0; t < cfg.learner_count; ++t) {
    for (std::size_t i = 0; i < per_region; ++i) out.regions[perm[t * per_region + i]] = static_cast<int>(t);
  }

  const std::size_t width = std::to_string(n - 1).size();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t y = i % cfg.class_count;
    const std::size_t next = (y + 1) % cfg.class_count;
    LabeledSample s;
    std::string id = std::to_string(i);
    s.id = "s" + std::string(width - id.size(), '0') + id;
    s.label = y;
    for (std::size_t view = 0; view < cfg.learner_count; ++view) {
      for (std::size_t axis = 0; axis < 2; ++axis) {
        double mu = centroid(y, view, axis);
        if (out.regions[i] == static_cast<int>(view)) {
          mu = centroid(next, view, axis);
        } else if (out.regions[i] >= 0) {
          mu += cfg.ambiguity * (centroid(next, view, axis) - mu);
        }
        s.features.push_back(mu + cfg.noise * rng.normal());
      }
    }
    out.samples.push_back(std::move(s));
  }
  return out;
}

}  // namespace

Dataset make_synthetic(const SyntheticConfig& config) {
  auto d = draw(config);
  std::vector<std::string> names;
  for (std::size_t r = 0; r < config.class_count; ++r) names.push_back("class" + std::to_string(r));
  return Dataset(std::move(d.samples), config.class_count, 2 * config.learner_count, std::move(names));
}

std::vector<int> synthetic_error_regions(const SyntheticConfig& config) { return draw(config).regions; }

std::vector<LearnerSpec> synthetic_roster(const SyntheticConfig& config, const TrainConfig& train) {
  std::vector<LearnerSpec> roster;
  for (std::size_t t = 0; t < config.learner_count; ++t) {
    LearnerSpec spec;
    spec.name = "view" + std::to_string(t) + "_softmax";
    spec.kind = LearnerKind::Softmax;
    spec.train = train;
    spec.view = FeatureView{2 * t, 2};
    roster.push_back(std::move(spec));
  }
  return roster;
}

SyntheticTable make_synthetic_table(const SyntheticTableConfig& cfg) {
  if (cfg.class_count < 2 || cfg.learner_count < 1 || cfg.samples_per_class == 0) {
    fail(ErrorKind::Config, "synthetic table: need >= 2 classes, >= 1 learner and samples");
  }
  if (cfg.error_fraction < 0.0 || cfg.error_fraction * static_cast<double>(cfg.learner_count) > 1.0) {
    fail(ErrorKind::Config, "synthetic table: error regions must be disjoint (learner_count * error_fraction <= 1)");
  }
  if (cfg.hesitant_fraction < 0.0 || cfg.hesitant_fraction > 1.0) {
    fail(ErrorKind::Config, "synthetic table: hesitant_fraction must lie in [0, 1]");
  }

  const std::size_t n = cfg.class_count * cfg.samples_per_class;
  const std::size_t width = std::to_string(n - 1).size();
  std::vector<LabeledSample> rows;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string num = std::to_string(i);
    rows.push_back({"s" + std::string(width - num.size(), '0') + num, {}, i % cfg.class_count});
  }
  const Dataset ids(std::move(rows), cfg.class_count, 0);

  Rng rng(cfg.seed);
  // Disjoint regions by seeded permutation; within each region the first
  // `hesitant_fraction` get hesitant support from the other learners.
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  rng.shuffle(std::span<std::size_t>(perm));
  std::vector<int> region(n, -1);
  std::vector<bool> hesitant(n, false);
  const auto per_region = static_cast<std::size_t>(std::llround(cfg.error_fraction * static_cast<double>(n)));
  const auto per_hesitant =
      static_cast<std::size_t>(std::llround(cfg.hesitant_fraction * static_cast<double>(per_region)));
  for (std::size_t t = 0; t < cfg.learner_count; ++t) {
    for (std::size_t i = 0; i < per_region; ++i) {
      region[perm[t * per_region + i]] = static_cast<int>(t);
      hesitant[perm[t * per_region + i]] = i < per_hesitant;
    }
  }

  const auto split = stratified_split(ids, cfg.test_fraction, 0.0, derive_seed(cfg.seed, 1));
  const auto plan = make_folds(ids, split.train, cfg.folds, derive_seed(cfg.seed, 2), true, 0.0);

  std::vector<std::string> names;
  for (std::size_t t = 0; t < cfg.learner_count; ++t) names.push_back("engineered" + std::to_string(t));
  SyntheticTable out{ProbabilityTable(cfg.class_count, names, cfg.folds), split.train, split.test};

  const auto draw_vector = [&](std::size_t i, std::size_t t) {
    const std::size_t y = ids[i].label;
    const std::size_t next = (y + 1) % cfg.class_count;
    std::vector<double> logits(cfg.class_count, 0.0);
    if (region[i] == static_cast<int>(t)) {
      logits[next] = cfg.confident_logit;
    } else if (region[i] >= 0 && hesitant[i]) {
      logits[y] = cfg.hesitant_logit + cfg.hesitant_gap;
      logits[next] = cfg.hesitant_logit;
    } else {
      logits[y] = cfg.confident_logit;
    }
    double peak = -std::numeric_limits<double>::infinity();
    for (auto& z : logits) {
      z += cfg.noise * rng.normal();
      peak = std::max(peak, z);
    }
    double total = 0.0;
    for (auto& z : logits) total += (z = std::exp(z - peak));
    for (auto& z : logits) z /= total;
    return validate_probability_vector(logits);
  };

  std::map<SampleId, std::size_t> heldout_fold;
  for (std::size_t j = 0; j < plan.folds.size(); ++j) {
    for (const auto& id : plan.folds[j].heldout) heldout_fold[id] = j;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = ids[i];
    out.table.set_label(s.id, s.label);
    for (std::size_t t = 0; t < cfg.learner_count; ++t) {
      if (auto it = heldout_fold.find(s.id); it != heldout_fold.end()) {
        out.table.insert(TableKey{s.id, t, it->second}, draw_vector(i, t));
      } else {
        for (std::size_t j = 0; j < cfg.folds; ++j) out.table.insert(TableKey{s.id, t, j}, draw_vector(i, t));
      }
    }
  }
  return out;
}

}  // namespace vstack
