#pragma once

#include <map>
#include <span>
#include <vector>

#include "vstack/core.hpp"

namespace vstack {

struct VoteResult {
  ProbabilityVector averaged;
  ClassIndex predicted = 0;
  std::vector<ProbabilityVector> per_learner;
};

/// Uniform soft vote: entrywise mean of the learners' vectors, then argmax.
VoteResult soft_vote(std::span<const ProbabilityVector> per_learner);

/// Soft vote per sample over the "single"-fold slice of `table`.
std::map<SampleId, VoteResult> vote_table(const ProbabilityTable& table,
                                          std::span<const SampleId> sample_ids);

/// The T vectors of one sample from the "single"-fold slice, learner order.
std::vector<ProbabilityVector> learner_vectors(const ProbabilityTable& table, const SampleId& id);

}  // namespace vstack
