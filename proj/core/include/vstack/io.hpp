#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vstack/core.hpp"
#include "vstack/evaluation.hpp"
#include "vstack/pipeline.hpp"
#include "vstack/stacking.hpp"

namespace vstack {

// Probability tables ------------------------------------------------------------
//
// CSV with header `sample_id,learner,fold,label,p_0,...,p_{c-1}`, one row per
// (sample, learner, fold). `fold` is a non-negative integer or `single`;
// `label` may be empty. Learner indices follow first appearance in the file.

/// Rows must sum to one within 1e-6 and are renormalized on acceptance.
/// Errors carry the offending line number.
ProbabilityTable parse_probability_table(std::istream& in);
ProbabilityTable read_probability_table(const std::filesystem::path& path);

void format_probability_table(const ProbabilityTable& table, std::ostream& out);
void write_probability_table(const ProbabilityTable& table, const std::filesystem::path& path);

// Datasets ----------------------------------------------------------------------

struct DatasetManifest {
  std::string name;
  std::size_t class_count = 0;
  std::vector<std::string> class_names;
  std::size_t feature_dim = 0;
  std::optional<std::size_t> sample_count;
  bool rebalance = false;
  std::string notes;

  bool operator==(const DatasetManifest&) const = default;
};

DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Feature CSV with header `sample_id,label,f_0,...,f_{d-1}` checked against
/// the manifest.
Dataset parse_features(const DatasetManifest& manifest, std::istream& in);
Dataset read_dataset(const DatasetManifest& manifest, const std::filesystem::path& features);
void write_features(const Dataset& data, const std::filesystem::path& path);

// JSON documents ----------------------------------------------------------------

std::string fold_plan_to_json(const FoldPlan& plan);
FoldPlan fold_plan_from_json(const std::string& text);
void write_fold_plan(const FoldPlan& plan, const std::filesystem::path& path);
FoldPlan read_fold_plan(const std::filesystem::path& path);

std::string model_to_json(const MetaStack& stack);
MetaStack model_from_json(const std::string& text);

/// Missing fields keep their defaults; unknown fields are a Config error.
RunConfig run_config_from_json(const std::string& text);
std::string run_config_to_json(const RunConfig& config);
RunConfig read_run_config(const std::filesystem::path& path);

/// `with_timing = false` drops the timing block, leaving a document that is
/// identical across reruns of the same configuration.
std::string report_to_json(const EvaluationReport& report, bool with_timing = true);
EvaluationReport report_from_json(const std::string& text);

// Predictions -------------------------------------------------------------------

/// Columns: sample_id, label (empty when unknown), then one column per entry
/// of `columns`.
void write_predictions(const std::map<std::string, std::map<SampleId, ClassIndex>>& columns,
                       const LabelMap& labels, const std::filesystem::path& path);

struct PredictionColumn {
  std::map<SampleId, ClassIndex> predicted;
  LabelMap labels;
};
PredictionColumn read_predictions(const std::filesystem::path& path, const std::string& column);

// Files -------------------------------------------------------------------------

std::string read_text(const std::filesystem::path& path);
/// Writes through a temporary sibling and renames it into place.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace vstack
