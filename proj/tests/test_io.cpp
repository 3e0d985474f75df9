#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "vstack/io.hpp"

using namespace vstack;
namespace fs = std::filesystem;

namespace {

const char* const kHeader = "sample_id,learner,fold,label,p_0,p_1\n";

ProbabilityTable parse(const std::string& text) {
  std::istringstream in(text);
  return parse_probability_table(in);
}

std::size_t error_line(const std::string& text) {
  try {
    parse(text);
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

ErrorKind error_kind(const std::string& text) {
  try {
    parse(text);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("table accepted");
  return ErrorKind::Io;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "vstack-test-io";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("probability table round-trips exactly") {
  const auto st = make_synthetic_table(SyntheticTableConfig{.samples_per_class = 20});
  std::ostringstream out;
  format_probability_table(st.table, out);
  const auto back = parse(out.str());
  CHECK(back == st.table);
  std::ostringstream again;
  format_probability_table(back, again);
  CHECK(again.str() == out.str());

  const auto path = scratch("table.csv");
  write_probability_table(st.table, path);
  CHECK(read_probability_table(path) == st.table);
}

TEST_CASE("thirty-vector example table") {
  std::string text = "sample_id,learner,fold,label,p_0,p_1,p_2\n";
  for (int s = 0; s < 10; ++s) {
    for (int l = 0; l < 3; ++l) {
      text += "id" + std::to_string(s) + ",cnn" + std::to_string(l) + ",single," + std::to_string(s % 3) +
              ",0.2,0.3,0.5\n";
    }
  }
  const auto t = parse(text);
  CHECK(t.size() == 30);
  CHECK(t.learner_count() == 3);
  CHECK(t.learner_names()[2] == "cnn2");
  CHECK(t.class_count() == 3);
  CHECK(t.fold_count() == 0);
  CHECK(t.label("id4") == ClassIndex{1});
  CHECK(t.at({"id4", 1, kSingleFold})[2] == 0.5);
}

TEST_CASE("rows slightly off the simplex are renormalized, larger errors rejected with their line") {
  const auto t = parse(std::string(kHeader) + "a,m,single,,0.6000008,0.4\n");
  CHECK(t.at({"a", 0, kSingleFold})[0] == doctest::Approx(0.6000008 / 1.0000008).epsilon(1e-15));
  CHECK(std::abs(t.at({"a", 0, kSingleFold})[0] + t.at({"a", 0, kSingleFold})[1] - 1.0) <= 1e-15);
  CHECK_FALSE(t.label("a").has_value());
  CHECK(error_kind(std::string(kHeader) + "a,m,single,,0.600002,0.4\n") == ErrorKind::Normalization);

  const std::string bad = std::string(kHeader) + "a,m,single,0,0.5,0.5\nb,m,single,1,0.45,0.45\n";
  CHECK(error_line(bad) == 3);
  CHECK(error_kind(bad) == ErrorKind::Normalization);
}

TEST_CASE("table parse errors") {
  CHECK(error_kind(std::string(kHeader) + "a,m,0,0,0.5,0.5\na,m,0,0,0.5,0.5\n") == ErrorKind::DuplicateRow);
  CHECK(error_line(std::string(kHeader) + "a,m,0,0,0.5,0.5\na,m,0,0,0.5,0.5\n") == 3);
  CHECK(error_kind(std::string(kHeader) + "a,m,0,0,0.5\n") == ErrorKind::Parse);
  CHECK(error_line(std::string(kHeader) + "a,m,0,0,0.5\n") == 2);
  CHECK(error_kind("sample,learner,fold,label,p_0,p_1\na,m,0,0,0.5,0.5\n") == ErrorKind::Schema);
  CHECK(error_kind("sample_id,learner,fold,label,p_0,p_2\n") == ErrorKind::Schema);
  CHECK(error_kind(std::string(kHeader) + "a,m,0,2,0.5,0.5\n") == ErrorKind::Range);
  CHECK(error_kind(std::string(kHeader) + "a,m,0,x,0.5,0.5\n") == ErrorKind::Parse);
  CHECK(error_kind(std::string(kHeader) + "a,m,zero,0,0.5,0.5\n") == ErrorKind::Parse);
  CHECK(error_kind(std::string(kHeader) + "a,m,0,0,1.5,-0.5\n") == ErrorKind::Range);
  CHECK(error_kind(std::string(kHeader) + "a,m,0,0,nan,0.5\n") != ErrorKind::Io);
  CHECK(error_kind(std::string(kHeader) + "a,m,0,0,0.5,0.5\na,m2,0,1,0.5,0.5\n") == ErrorKind::Schema);
  CHECK(error_kind(std::string(kHeader)) == ErrorKind::EmptyInput);
  CHECK(error_kind("") == ErrorKind::Parse);
  try {
    read_probability_table("/nonexistent/table.csv");
    FAIL("missing file accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Io);
  }
}

TEST_CASE("truncated or mutated tables only raise library errors") {
  const auto st = make_synthetic_table(SyntheticTableConfig{.samples_per_class = 5, .folds = 2});
  std::ostringstream out;
  format_probability_table(st.table, out);
  const std::string good = out.str();
  Rng rng(1);
  const std::string alphabet = "0123456789.,-e\nxs";
  for (int trial = 0; trial < 300; ++trial) {
    std::string text = good;
    const int edits = 1 + static_cast<int>(rng.below(4));
    for (int e = 0; e < edits; ++e) {
      const auto pos = rng.below(text.size());
      switch (rng.below(3)) {
        case 0: text[pos] = alphabet[rng.below(alphabet.size())]; break;
        case 1: text.erase(pos, 1 + rng.below(5)); break;
        default: text.resize(pos); break;
      }
    }
    try {
      parse(text);
    } catch (const Error&) {
    } catch (const std::exception& e) {
      FAIL("foreign exception: " << e.what());
    }
  }
}

TEST_CASE("datasets round-trip through manifest and features") {
  const auto d = oracle::random_dataset(4, 12, 3, 2);
  const DatasetManifest m{"demo", 3, {"a", "b", "c"}, 2, 12, false, "test data"};
  const auto mpath = scratch("manifest.json");
  const auto fpath = scratch("features.csv");
  write_manifest(m, mpath);
  write_features(d, fpath);
  const auto m2 = read_manifest(mpath);
  CHECK(m2 == m);
  const auto d2 = read_dataset(m2, fpath);
  REQUIRE(d2.size() == d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(d2[i].id == d[i].id);
    CHECK(d2[i].features == d[i].features);
    CHECK(d2[i].label == d[i].label);
  }
  CHECK(d2.class_names() == m.class_names);
}

TEST_CASE("feature files must match the manifest") {
  const DatasetManifest m{"demo", 2, {}, 2, std::nullopt, false, ""};
  std::istringstream wide("sample_id,label,f_0,f_1,f_2\na,0,1,2,3\n");
  try {
    parse_features(m, wide);
    FAIL("wrong column count accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Schema);
  }
  std::istringstream ragged("sample_id,label,f_0,f_1\na,0,1\n");
  CHECK_THROWS_AS(parse_features(m, ragged), Error);
  DatasetManifest counted = m;
  counted.sample_count = 3;
  std::istringstream short_file("sample_id,label,f_0,f_1\na,0,1,2\n");
  CHECK_THROWS_AS(parse_features(counted, short_file), Error);
}

TEST_CASE("fold plans round-trip") {
  const auto d = oracle::random_dataset(9, 30, 2, 2);
  std::vector<SampleId> ids;
  for (const auto& s : d.samples()) ids.push_back(s.id);
  auto plan = make_folds(d, ids, 3, 5, true);
  plan.test_ids = {"t1", "t2"};
  const auto text = fold_plan_to_json(plan);
  const auto back = fold_plan_from_json(text);
  CHECK(back.folds == plan.folds);
  CHECK(back.test_ids == plan.test_ids);
  CHECK(back.k == 3);
  CHECK(back.seed == 5);
  const auto path = scratch("plan.json");
  write_fold_plan(plan, path);
  CHECK(read_fold_plan(path).folds == plan.folds);
}

TEST_CASE("run configs round-trip and reject unknown fields") {
  RunConfig cfg;
  cfg.seed = 42;
  cfg.k = 7;
  cfg.levels = 3;
  cfg.modes = {RoutingMode::Disagreement};
  cfg.meta.kind = LearnerKind::Knn;
  cfg.meta.neighbors = 3;
  cfg.synthetic_table.noise = 0.1;
  cfg.averaging = Averaging::Weighted;
  const auto back = run_config_from_json(run_config_to_json(cfg));
  CHECK(back == cfg);
  CHECK(run_config_from_json("{}") == RunConfig{});

  try {
    run_config_from_json(R"({"seed": 1, "sede": 2})");
    FAIL("unknown field accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Config);
    CHECK(std::string(e.what()).find("sede") != std::string::npos);
  }
  CHECK_THROWS_AS(run_config_from_json(R"({"seed": "one"})"), Error);
  CHECK_THROWS_AS(run_config_from_json(R"({"meta": {"kind": "svm"}})"), Error);
  CHECK_THROWS_AS(run_config_from_json("{"), Error);
}

TEST_CASE("bundled configs load") {
  for (const char* name : {"synthetic_table.json", "synthetic_features.json", "three_level.json",
                           "features_example.json"}) {
    const auto cfg = read_run_config(fs::path(VSTACK_SOURCE_DIR) / "configs" / name);
    CHECK_NOTHROW(cfg.validate());
  }
}

TEST_CASE("models round-trip and predict identically") {
  const auto train = oracle::random_dataset(2, 30, 3, 6);
  MetaDataset meta{{}, 2, 3, {}};
  for (const auto& s : train.samples()) meta.samples.push_back({s.id, s.features, s.label});
  StackConfig cfg;
  LearnerSpec sm;
  sm.train.learning_rate = 0.05;
  sm.train.max_epochs = 5;
  LearnerSpec kn;
  kn.kind = LearnerKind::Knn;
  kn.neighbors = 3;
  LearnerSpec nb;
  nb.kind = LearnerKind::GaussianNb;
  cfg.level2 = {sm, kn, nb};
  cfg.super_learner = sm;
  const auto stack = multilevel_stack(meta, cfg);
  const auto back = model_from_json(model_to_json(stack));
  CHECK(back.level2 == stack.level2);
  CHECK(back.super_learner == stack.super_learner);
  for (const auto& s : train.samples()) CHECK(back.predict(s.features) == stack.predict(s.features));
}

TEST_CASE("reports round-trip") {
  RunConfig cfg = read_run_config(fs::path(VSTACK_SOURCE_DIR) / "configs" / "synthetic_table.json");
  cfg.synthetic_table.samples_per_class = 60;
  const auto run = run_pipeline(cfg);
  const auto text = report_to_json(run.report);
  const auto back = report_from_json(text);
  CHECK(report_to_json(back) == text);
  CHECK(back.stack == run.report.stack);
  CHECK(back.ablation == run.report.ablation);
  const auto untimed = report_to_json(run.report, false);
  CHECK(untimed.find("\"timing\"") == std::string::npos);
}

TEST_CASE("predictions files round-trip") {
  const std::map<std::string, std::map<SampleId, ClassIndex>> cols{{"vote", {{"a", 1}, {"b", 0}}},
                                                                   {"guided", {{"a", 1}, {"b", 1}}}};
  const LabelMap labels{{"a", 1}};
  const auto path = scratch("pred.csv");
  write_predictions(cols, labels, path);
  const auto vote = read_predictions(path, "vote");
  CHECK(vote.predicted == cols.at("vote"));
  CHECK(vote.labels == labels);
  CHECK_THROWS_AS(read_predictions(path, "missing"), Error);
  CHECK_THROWS_AS(write_predictions({{"label", {{"a", 0}}}}, labels, path), Error);
}

TEST_CASE("writing into a missing directory is an io error") {
  try {
    write_text("/nonexistent-dir/sub/file.txt", "x");
    FAIL("write succeeded");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Io);
  }
}
