#include "vstack/voting.hpp"

#include <algorithm>

namespace vstack {

VoteResult soft_vote(std::span<const ProbabilityVector> per_learner) {
  if (per_learner.empty()) fail(ErrorKind::EmptyInput, "soft_vote: no learner vectors");
  const std::size_t c = per_learner.front().size();
  for (const auto& p : per_learner) {
    if (p.size() != c) {
      fail(ErrorKind::Shape, "soft_vote: class counts differ (" + std::to_string(c) + " vs " +
                                 std::to_string(p.size()) + ")");
    }
  }
  // Per class: sorted values folded into a running mean. Sorting makes the
  // result independent of learner order; the running mean keeps identical
  // inputs exact.
  std::vector<double> mean(c, 0.0);
  std::vector<double> column(per_learner.size());
  for (std::size_t j = 0; j < c; ++j) {
    for (std::size_t t = 0; t < per_learner.size(); ++t) column[t] = per_learner[t][j];
    std::sort(column.begin(), column.end());
    double m = column.front();
    for (std::size_t t = 1; t < column.size(); ++t) m += (column[t] - m) / static_cast<double>(t + 1);
    mean[j] = m;
  }

  VoteResult out;
  out.averaged = validate_probability_vector(mean);
  out.predicted = argmax_label(out.averaged);
  out.per_learner.assign(per_learner.begin(), per_learner.end());
  return out;
}

std::vector<ProbabilityVector> learner_vectors(const ProbabilityTable& table, const SampleId& id) {
  std::vector<ProbabilityVector> out;
  out.reserve(table.learner_count());
  for (std::size_t t = 0; t < table.learner_count(); ++t) {
    out.push_back(table.at(TableKey{id, t, kSingleFold}));
  }
  return out;
}

std::map<SampleId, VoteResult> vote_table(const ProbabilityTable& table,
                                          std::span<const SampleId> sample_ids) {
  std::map<SampleId, VoteResult> out;
  for (const auto& id : sample_ids) {
    const auto vectors = learner_vectors(table, id);
    out.emplace(id, soft_vote(vectors));
  }
  return out;
}

}  // namespace vstack
