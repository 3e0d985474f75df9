#include "vstack/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <numeric>
#include <set>
#include <thread>

#include "vstack/random.hpp"
#include "vstack/voting.hpp"

namespace vstack {

std::vector<std::size_t> largest_remainder_quota(std::span<const std::size_t> class_counts, double fraction) {
  if (!(fraction >= 0.0 && fraction < 1.0)) fail(ErrorKind::Config, "fraction must lie in [0, 1)");
  const std::size_t total = std::accumulate(class_counts.begin(), class_counts.end(), std::size_t{0});
  const auto target = static_cast<std::size_t>(std::llround(static_cast<double>(total) * fraction));

  std::vector<std::size_t> quota(class_counts.size());
  std::vector<double> remainder(class_counts.size());
  std::size_t assigned = 0;
  for (std::size_t r = 0; r < class_counts.size(); ++r) {
    const double exact = static_cast<double>(class_counts[r]) * fraction;
    quota[r] = std::min(class_counts[r], static_cast<std::size_t>(std::floor(exact)));
    remainder[r] = exact - static_cast<double>(quota[r]);
    assigned += quota[r];
  }
  std::vector<std::size_t> order(class_counts.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; assigned < target && i < order.size(); ++i) {
    const std::size_t r = order[i];
    if (quota[r] < class_counts[r]) {
      ++quota[r];
      ++assigned;
    }
  }
  return quota;
}

namespace {

// Ids of `pool` grouped by label, each group in pool order.
std::vector<std::vector<SampleId>> group_by_class(const Dataset& data, std::span<const SampleId> pool) {
  std::vector<std::vector<SampleId>> groups(data.class_count());
  for (const auto& id : pool) groups[data.at(id).label].push_back(id);
  return groups;
}

std::vector<std::size_t> sizes_of(const std::vector<std::vector<SampleId>>& groups) {
  std::vector<std::size_t> out;
  for (const auto& g : groups) out.push_back(g.size());
  return out;
}

std::string class_name(const Dataset& data, std::size_t r) {
  return data.class_names().empty() ? std::to_string(r) : data.class_names()[r];
}

}  // namespace

SplitPlan stratified_split(const Dataset& data, double test_fraction, double val_fraction,
                           std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) fail(ErrorKind::Config, "test_fraction must lie in (0, 1)");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) fail(ErrorKind::Config, "val_fraction must lie in [0, 1)");
  if (test_fraction + val_fraction >= 1.0) fail(ErrorKind::Config, "test and validation fractions sum to >= 1");

  std::vector<SampleId> all;
  for (const auto& s : data.samples()) all.push_back(s.id);
  auto groups = group_by_class(data, all);
  const auto counts = sizes_of(groups);
  const auto test_quota = largest_remainder_quota(counts, test_fraction);
  const auto val_quota = largest_remainder_quota(counts, val_fraction);
  const std::size_t parts = val_fraction > 0.0 ? 3 : 2;

  SplitPlan plan;
  Rng rng(seed);
  for (std::size_t r = 0; r < groups.size(); ++r) {
    auto& ids = groups[r];
    rng.shuffle(std::span<SampleId>(ids));
    const std::size_t n_test = test_quota[r];
    const std::size_t n_val = std::min(val_quota[r], ids.size() - n_test);
    if (ids.size() < parts || n_test == 0 || (parts == 3 && n_val == 0) || n_test + n_val == ids.size()) {
      plan.warnings.push_back("degenerate class '" + class_name(data, r) + "': " + std::to_string(ids.size()) +
                              " samples cannot populate all " + std::to_string(parts) + " parts");
    }
    plan.test.insert(plan.test.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_test));
    plan.val.insert(plan.val.end(), ids.begin() + static_cast<std::ptrdiff_t>(n_test),
                    ids.begin() + static_cast<std::ptrdiff_t>(n_test + n_val));
    plan.train.insert(plan.train.end(), ids.begin() + static_cast<std::ptrdiff_t>(n_test + n_val), ids.end());
  }
  return plan;
}

std::vector<SampleId> FoldPlan::pool() const {
  std::vector<SampleId> out;
  for (const auto& f : folds) out.insert(out.end(), f.heldout.begin(), f.heldout.end());
  return out;
}

FoldPlan make_folds(const Dataset& data, std::span<const SampleId> pool, std::size_t k,
                    std::uint64_t seed, bool stratified, double val_fraction) {
  if (k < 2) fail(ErrorKind::Config, "k must be >= 2");
  if (pool.size() < k) {
    fail(ErrorKind::Config, "pool of " + std::to_string(pool.size()) + " samples cannot fill " +
                                std::to_string(k) + " folds");
  }
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.stratified = stratified;
  plan.folds.resize(k);

  Rng rng(seed);
  if (stratified) {
    auto groups = group_by_class(data, pool);
    for (std::size_t r = 0; r < groups.size(); ++r) {
      if (!groups[r].empty() && groups[r].size() < k) {
        fail(ErrorKind::Stratification, "class '" + class_name(data, r) + "' has " +
                                            std::to_string(groups[r].size()) + " samples, fewer than k = " +
                                            std::to_string(k));
      }
    }
    std::size_t cursor = 0;
    for (auto& ids : groups) {
      rng.shuffle(std::span<SampleId>(ids));
      for (const auto& id : ids) {
        plan.folds[cursor].heldout.push_back(id);
        cursor = (cursor + 1) % k;
      }
    }
  } else {
    std::vector<SampleId> ids(pool.begin(), pool.end());
    rng.shuffle(std::span<SampleId>(ids));
    for (std::size_t i = 0; i < ids.size(); ++i) plan.folds[i % k].heldout.push_back(ids[i]);
  }

  // Validation carve from each fold's complement, stratified by class.
  for (std::size_t j = 0; j < k; ++j) {
    std::vector<SampleId> complement;
    for (std::size_t other = 0; other < k; ++other) {
      if (other == j) continue;
      complement.insert(complement.end(), plan.folds[other].heldout.begin(), plan.folds[other].heldout.end());
    }
    auto groups = group_by_class(data, complement);
    auto quota = largest_remainder_quota(sizes_of(groups), val_fraction);
    if (val_fraction > 0.0 && std::accumulate(quota.begin(), quota.end(), std::size_t{0}) == 0) {
      // Tiny pools: keep at least one validation sample, from the largest class.
      std::size_t largest = 0;
      for (std::size_t r = 1; r < groups.size(); ++r) {
        if (groups[r].size() > groups[largest].size()) largest = r;
      }
      if (groups[largest].size() > 1) quota[largest] = 1;
    }
    Rng carve(derive_seed(seed, j));
    auto& fold = plan.folds[j];
    for (std::size_t r = 0; r < groups.size(); ++r) {
      auto& ids = groups[r];
      carve.shuffle(std::span<SampleId>(ids));
      fold.val.insert(fold.val.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(quota[r]));
      fold.train.insert(fold.train.end(), ids.begin() + static_cast<std::ptrdiff_t>(quota[r]), ids.end());
    }
    if (fold.val.empty()) {
      plan.warnings.push_back("fold " + std::to_string(j) + ": no validation samples; validating on the fit set");
    }
  }
  return plan;
}

Dataset rebalance_by_duplication(const Dataset& data) {
  const auto counts = data.class_counts();
  const std::size_t target = *std::max_element(counts.begin(), counts.end());
  std::vector<LabeledSample> rows = data.samples();
  for (std::size_t r = 0; r < counts.size(); ++r) {
    if (counts[r] == 0 || counts[r] == target) continue;
    std::vector<const LabeledSample*> members;
    for (const auto& s : data.samples()) {
      if (s.label == r) members.push_back(&s);
    }
    for (std::size_t i = 0; i < target - counts[r]; ++i) {
      LabeledSample copy = *members[i % members.size()];
      copy.id += "#dup" + std::to_string(i / members.size() + 1);
      rows.push_back(std::move(copy));
    }
  }
  return Dataset(std::move(rows), data.class_count(), data.feature_dim(), data.class_names());
}

ProbabilityTable collect_fold_probabilities(const FoldPlan& plan, std::span<const LearnerSpec> learners,
                                            const Dataset& data, const CollectOptions& options) {
  if (learners.empty()) fail(ErrorKind::Config, "no base learners configured");
  if (plan.folds.size() != plan.k || plan.k < 2) fail(ErrorKind::Config, "fold plan is malformed");

  std::vector<std::string> names;
  for (std::size_t t = 0; t < learners.size(); ++t) {
    names.push_back(learners[t].name.empty() ? "learner" + std::to_string(t) : learners[t].name);
  }
  ProbabilityTable table(data.class_count(), names, plan.k);

  const std::size_t n_tasks = learners.size() * plan.k;
  struct TaskResult {
    std::vector<std::pair<TableKey, ProbabilityVector>> rows;
    std::exception_ptr error;
  };
  std::vector<TaskResult> results(n_tasks);

  const auto run_task = [&](std::size_t task) {
    const std::size_t t = task / plan.k;
    const std::size_t j = task % plan.k;
    try {
      const auto& fold = plan.folds[j];
      Dataset fit_set = data.subset(fold.train);
      if (options.rebalance) fit_set = rebalance_by_duplication(fit_set);
      const Dataset val_set = fold.val.empty() ? fit_set : data.subset(fold.val);
      const FittedLearner model = fit_learner(learners[t], fit_set, val_set, derive_seed(options.seed, t, j));
      auto& rows = results[task].rows;
      for (const auto& id : fold.heldout) {
        rows.emplace_back(TableKey{id, t, j}, model.predict(data.at(id).features));
      }
      for (const auto& id : plan.test_ids) {
        rows.emplace_back(TableKey{id, t, j}, model.predict(data.at(id).features));
      }
    } catch (...) {
      results[task].error = std::current_exception();
    }
  };

  const std::size_t workers = std::clamp<std::size_t>(options.jobs, 1, n_tasks);
  if (workers == 1) {
    for (std::size_t task = 0; task < n_tasks; ++task) run_task(task);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t task = next++; task < n_tasks; task = next++) run_task(task);
      });
    }
  }

  for (std::size_t task = 0; task < n_tasks; ++task) {
    if (!results[task].error) continue;
    const std::string where = "fold " + std::to_string(task % plan.k) + ", learner '" + names[task / plan.k] + "'";
    try {
      std::rethrow_exception(results[task].error);
    } catch (const Error& e) {
      throw Error(e.kind(), where + ": " + e.what());
    } catch (const std::exception& e) {
      throw Error(ErrorKind::Numeric, where + ": " + e.what());
    }
  }
  for (auto& result : results) {
    for (auto& [key, p] : result.rows) table.insert(key, std::move(p));
  }
  for (const auto& id : plan.pool()) table.set_label(id, data.at(id).label);
  for (const auto& id : plan.test_ids) table.set_label(id, data.at(id).label);
  return table;
}

ProbabilityTable average_test_probabilities(const ProbabilityTable& table, std::span<const SampleId> ids) {
  ProbabilityTable out(table.class_count(), table.learner_names(), table.fold_count());
  for (const auto& id : ids) {
    for (std::size_t t = 0; t < table.learner_count(); ++t) {
      std::vector<ProbabilityVector> slices;
      for (std::size_t j = 0; j < table.fold_count(); ++j) {
        const auto* p = table.find(TableKey{id, t, j});
        if (p == nullptr) {
          fail(ErrorKind::IncompleteTable, "test sample '" + id + "' lacks fold " + std::to_string(j) +
                                               " for learner " + std::to_string(t));
        }
        slices.push_back(*p);
      }
      out.insert(TableKey{id, t, kSingleFold}, soft_vote(slices).averaged);
    }
    if (auto y = table.label(id)) out.set_label(id, *y);
  }
  return out;
}

ProbabilityTable out_of_fold_table(const ProbabilityTable& table, std::span<const SampleId> ids) {
  ProbabilityTable out(table.class_count(), table.learner_names(), table.fold_count());
  for (const auto& id : ids) {
    for (std::size_t t = 0; t < table.learner_count(); ++t) {
      const auto folds = table.folds_of(id, t);
      if (folds.size() != 1) {
        fail(ErrorKind::IncompleteTable, "sample '" + id + "' has " + std::to_string(folds.size()) +
                                             " entries for learner " + std::to_string(t) +
                                             ", expected exactly one out-of-fold vector");
      }
      out.insert(TableKey{id, t, kSingleFold}, table.at(TableKey{id, t, folds.front()}));
    }
    if (auto y = table.label(id)) out.set_label(id, *y);
  }
  return out;
}

TableRoles infer_table_roles(const ProbabilityTable& table) {
  TableRoles roles;
  const std::size_t k = table.fold_count();
  for (const auto& id : table.sample_ids()) {
    const std::size_t n = table.folds_of(id, 0).size();
    const bool has_single = n > 0 && !table.folds_of(id, 0).front().has_value();
    if (has_single) {
      fail(ErrorKind::Schema, "sample '" + id + "' has a 'single' fold row; cross-validated tables need fold indices");
    }
    if (n == 1) {
      roles.pool.push_back(id);
    } else if (k >= 2 && n == k) {
      roles.test.push_back(id);
    } else {
      fail(ErrorKind::IncompleteTable, "sample '" + id + "' has " + std::to_string(n) +
                                           " fold rows; expected 1 (out-of-fold) or " + std::to_string(k) + " (test)");
    }
  }
  return roles;
}

}  // namespace vstack
