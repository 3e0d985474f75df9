#include "vstack/io.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <system_error>

#include <json.hpp>

namespace vstack {

using Json = nlohmann::ordered_json;

namespace {

// Text primitives ------------------------------------------------------------------

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

bool next_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

[[noreturn]] void parse_fail(ErrorKind kind, std::size_t line, const std::string& what) {
  throw ParseError(kind, line, "line " + std::to_string(line) + ": " + what);
}

double parse_real(const std::string& text, std::size_t line, const std::string& field) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc() || ptr != end) {
    parse_fail(ErrorKind::Parse, line, "field '" + field + "' is not a real number: '" + text + "'");
  }
  return v;
}

std::size_t parse_index(const std::string& text, std::size_t line, const std::string& field) {
  std::size_t v = 0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc() || ptr != end) {
    parse_fail(ErrorKind::Parse, line, "field '" + field + "' is not a non-negative integer: '" + text + "'");
  }
  return v;
}

std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  if (ec != std::errc()) fail(ErrorKind::Io, "cannot format real number");
  return std::string(buf, ptr);
}

void expect_header(const std::vector<std::string>& header, std::size_t fixed,
                   const std::vector<std::string>& leading, const std::string& prefix) {
  for (std::size_t i = 0; i < fixed; ++i) {
    if (i >= header.size() || header[i] != leading[i]) {
      parse_fail(ErrorKind::Schema, 1, "header column " + std::to_string(i) + " must be '" + leading[i] + "'");
    }
  }
  for (std::size_t i = fixed; i < header.size(); ++i) {
    if (header[i] != prefix + std::to_string(i - fixed)) {
      parse_fail(ErrorKind::Schema, 1, "header column " + std::to_string(i) + " must be '" + prefix +
                                           std::to_string(i - fixed) + "'");
    }
  }
}

Json parse_json(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(ErrorKind::Parse, 0, what + ": " + e.what());
  }
}

// Strict JSON field access -----------------------------------------------------------

struct Fields {
  const Json& j;
  std::string where;
  ErrorKind kind = ErrorKind::Schema;

  Fields(const Json& json, std::string w, ErrorKind k) : j(json), where(std::move(w)), kind(k) {
    if (!j.is_object()) fail(kind, where + ": expected an object");
  }

  void only(std::initializer_list<const char*> allowed) const {
    for (const auto& [key, _] : j.items()) {
      bool ok = false;
      for (const char* a : allowed) ok = ok || key == a;
      if (!ok) fail(kind, where + ": unknown field '" + key + "'");
    }
  }

  bool has(const char* key) const { return j.contains(key) && !j.at(key).is_null(); }

  template <class T>
  void opt(const char* key, T& out) const {
    if (!has(key)) return;
    try {
      out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      fail(kind, where + ": field '" + key + "' has the wrong type");
    }
  }

  template <class T>
  T req(const char* key) const {
    if (!has(key)) fail(kind, where + ": missing field '" + key + "'");
    T out{};
    opt(key, out);
    return out;
  }

  const Json& sub(const char* key) const {
    if (!has(key)) fail(kind, where + ": missing field '" + key + "'");
    return j.at(key);
  }
};

// Config pieces ------------------------------------------------------------------

Json to_json(const PlateauParams& p) {
  return {{"patience", p.patience}, {"factor", p.factor}, {"min_lr", p.min_lr}, {"threshold", p.threshold}};
}

PlateauParams plateau_from(const Json& j, const std::string& where, ErrorKind kind) {
  Fields f(j, where, kind);
  f.only({"patience", "factor", "min_lr", "threshold"});
  PlateauParams p;
  f.opt("patience", p.patience);
  f.opt("factor", p.factor);
  f.opt("min_lr", p.min_lr);
  f.opt("threshold", p.threshold);
  return p;
}

Json to_json(const TrainConfig& t) {
  return {{"learning_rate", t.learning_rate}, {"batch_size", t.batch_size},
          {"max_epochs", t.max_epochs},       {"weight_decay", t.weight_decay},
          {"seed", t.seed},                   {"scheduler", to_json(t.scheduler)}};
}

TrainConfig train_from(const Json& j, TrainConfig t, const std::string& where, ErrorKind kind) {
  Fields f(j, where, kind);
  f.only({"learning_rate", "batch_size", "max_epochs", "weight_decay", "seed", "scheduler"});
  f.opt("learning_rate", t.learning_rate);
  f.opt("batch_size", t.batch_size);
  f.opt("max_epochs", t.max_epochs);
  f.opt("weight_decay", t.weight_decay);
  f.opt("seed", t.seed);
  if (f.has("scheduler")) t.scheduler = plateau_from(j.at("scheduler"), where + ".scheduler", kind);
  return t;
}

Json to_json(const std::optional<FeatureView>& v) {
  if (!v) return nullptr;
  return {{"first", v->first}, {"count", v->count}};
}

std::optional<FeatureView> view_from(const Json& j, const std::string& where, ErrorKind kind) {
  if (j.is_null()) return std::nullopt;
  Fields f(j, where, kind);
  f.only({"first", "count"});
  return FeatureView{f.req<std::size_t>("first"), f.req<std::size_t>("count")};
}

Json to_json(const LearnerSpec& s) {
  return {{"name", s.name},
          {"kind", std::string(to_string(s.kind))},
          {"train", to_json(s.train)},
          {"neighbors", s.neighbors},
          {"variance_floor", s.variance_floor},
          {"view", to_json(s.view)}};
}

LearnerSpec spec_from(const Json& j, LearnerSpec s, const std::string& where, ErrorKind kind) {
  Fields f(j, where, kind);
  f.only({"name", "kind", "train", "neighbors", "variance_floor", "view"});
  f.opt("name", s.name);
  if (f.has("kind")) s.kind = parse_learner_kind(f.req<std::string>("kind"));
  if (f.has("train")) s.train = train_from(j.at("train"), s.train, where + ".train", kind);
  f.opt("neighbors", s.neighbors);
  f.opt("variance_floor", s.variance_floor);
  if (j.contains("view")) s.view = view_from(j.at("view"), where + ".view", kind);
  return s;
}

std::vector<LearnerSpec> specs_from(const Json& j, const std::string& where, ErrorKind kind,
                                    const TrainConfig& train_default) {
  if (!j.is_array()) fail(kind, where + ": expected an array");
  std::vector<LearnerSpec> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    LearnerSpec base;
    base.train = train_default;
    out.push_back(spec_from(j[i], base, where + "[" + std::to_string(i) + "]", kind));
  }
  return out;
}

Json to_json(const SyntheticConfig& s) {
  return {{"class_count", s.class_count}, {"learner_count", s.learner_count},
          {"samples_per_class", s.samples_per_class}, {"error_fraction", s.error_fraction},
          {"ambiguity", s.ambiguity}, {"radius", s.radius}, {"noise", s.noise}, {"seed", s.seed}};
}

SyntheticConfig synthetic_from(const Json& j, const std::string& where, ErrorKind kind) {
  Fields f(j, where, kind);
  f.only({"class_count", "learner_count", "samples_per_class", "error_fraction", "ambiguity", "radius", "noise",
          "seed"});
  SyntheticConfig s;
  f.opt("class_count", s.class_count);
  f.opt("learner_count", s.learner_count);
  f.opt("samples_per_class", s.samples_per_class);
  f.opt("error_fraction", s.error_fraction);
  f.opt("ambiguity", s.ambiguity);
  f.opt("radius", s.radius);
  f.opt("noise", s.noise);
  f.opt("seed", s.seed);
  return s;
}

Json to_json(const SyntheticTableConfig& s) {
  return {{"class_count", s.class_count},       {"learner_count", s.learner_count},
          {"samples_per_class", s.samples_per_class}, {"folds", s.folds},
          {"test_fraction", s.test_fraction},   {"error_fraction", s.error_fraction},
          {"hesitant_fraction", s.hesitant_fraction}, {"confident_logit", s.confident_logit},
          {"hesitant_logit", s.hesitant_logit}, {"hesitant_gap", s.hesitant_gap},
          {"noise", s.noise},                   {"seed", s.seed}};
}

SyntheticTableConfig synthetic_table_from(const Json& j, const std::string& where, ErrorKind kind) {
  Fields f(j, where, kind);
  f.only({"class_count", "learner_count", "samples_per_class", "folds", "test_fraction", "error_fraction",
          "hesitant_fraction", "confident_logit", "hesitant_logit", "hesitant_gap", "noise", "seed"});
  SyntheticTableConfig s;
  f.opt("class_count", s.class_count);
  f.opt("learner_count", s.learner_count);
  f.opt("samples_per_class", s.samples_per_class);
  f.opt("folds", s.folds);
  f.opt("test_fraction", s.test_fraction);
  f.opt("error_fraction", s.error_fraction);
  f.opt("hesitant_fraction", s.hesitant_fraction);
  f.opt("confident_logit", s.confident_logit);
  f.opt("hesitant_logit", s.hesitant_logit);
  f.opt("hesitant_gap", s.hesitant_gap);
  f.opt("noise", s.noise);
  f.opt("seed", s.seed);
  return s;
}

Json config_json(const RunConfig& c) {
  Json learners = Json::array();
  for (const auto& l : c.learners) learners.push_back(to_json(l));
  Json level2 = Json::array();
  for (const auto& l : c.level2) level2.push_back(to_json(l));
  Json modes = Json::array();
  for (auto m : c.modes) modes.push_back(std::string(to_string(m)));
  return {{"input", std::string(to_string(c.input))},
          {"manifest_path", c.manifest_path},
          {"features_path", c.features_path},
          {"table_path", c.table_path},
          {"synthetic", to_json(c.synthetic)},
          {"synthetic_table", to_json(c.synthetic_table)},
          {"test_fraction", c.test_fraction},
          {"fold_val_fraction", c.fold_val_fraction},
          {"k", c.k},
          {"seed", c.seed},
          {"stratified", c.stratified},
          {"rebalance", c.rebalance},
          {"learners", learners},
          {"base_train", to_json(c.base_train)},
          {"levels", c.levels},
          {"meta", to_json(c.meta)},
          {"level2", level2},
          {"super_learner", to_json(c.super_learner)},
          {"meta_val_fraction", c.meta_val_fraction},
          {"modes", modes},
          {"ablation", c.ablation},
          {"meta_comparison", c.meta_comparison},
          {"averaging", std::string(to_string(c.averaging))},
          {"jobs", c.jobs}};
}

RunConfig config_from(const Json& j, ErrorKind kind) {
  Fields f(j, "config", kind);
  f.only({"input", "manifest_path", "features_path", "table_path", "synthetic", "synthetic_table",
          "test_fraction", "fold_val_fraction", "k", "seed", "stratified", "rebalance", "learners", "base_train",
          "levels", "meta", "level2", "super_learner", "meta_val_fraction", "modes", "ablation",
          "meta_comparison", "averaging", "jobs"});
  RunConfig c;
  if (f.has("input")) c.input = parse_input_kind(f.req<std::string>("input"));
  f.opt("manifest_path", c.manifest_path);
  f.opt("features_path", c.features_path);
  f.opt("table_path", c.table_path);
  if (f.has("synthetic")) c.synthetic = synthetic_from(j.at("synthetic"), "config.synthetic", kind);
  if (f.has("synthetic_table")) {
    c.synthetic_table = synthetic_table_from(j.at("synthetic_table"), "config.synthetic_table", kind);
  }
  f.opt("test_fraction", c.test_fraction);
  f.opt("fold_val_fraction", c.fold_val_fraction);
  f.opt("k", c.k);
  f.opt("seed", c.seed);
  f.opt("stratified", c.stratified);
  f.opt("rebalance", c.rebalance);
  if (f.has("base_train")) c.base_train = train_from(j.at("base_train"), c.base_train, "config.base_train", kind);
  if (f.has("learners")) c.learners = specs_from(j.at("learners"), "config.learners", kind, c.base_train);
  f.opt("levels", c.levels);
  if (f.has("meta")) c.meta = spec_from(j.at("meta"), c.meta, "config.meta", kind);
  if (f.has("level2")) c.level2 = specs_from(j.at("level2"), "config.level2", kind, c.meta.train);
  if (f.has("super_learner")) {
    c.super_learner = spec_from(j.at("super_learner"), c.super_learner, "config.super_learner", kind);
  }
  f.opt("meta_val_fraction", c.meta_val_fraction);
  if (f.has("modes")) {
    const auto& m = j.at("modes");
    if (!m.is_array()) fail(kind, "config: field 'modes' must be an array");
    c.modes.clear();
    for (const auto& name : m) {
      if (!name.is_string()) fail(kind, "config: field 'modes' must hold strings");
      c.modes.push_back(parse_routing_mode(name.get<std::string>()));
    }
  }
  f.opt("ablation", c.ablation);
  f.opt("meta_comparison", c.meta_comparison);
  if (f.has("averaging")) c.averaging = parse_averaging(f.req<std::string>("averaging"));
  f.opt("jobs", c.jobs);
  return c;
}

// Report pieces ------------------------------------------------------------------

Json to_json(const MetricsReport& m) {
  Json per_class = Json::array();
  for (const auto& c : m.per_class) {
    per_class.push_back({{"precision", c.precision}, {"recall", c.recall}, {"f1", c.f1}, {"support", c.support}});
  }
  return {{"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1},
          {"averaging", std::string(to_string(m.averaging))}, {"total", m.total}, {"correct", m.correct},
          {"per_class", per_class}, {"warnings", m.warnings}};
}

MetricsReport metrics_from(const Json& j, const std::string& where) {
  Fields f(j, where, ErrorKind::Schema);
  MetricsReport m;
  m.accuracy = f.req<double>("accuracy");
  m.precision = f.req<double>("precision");
  m.recall = f.req<double>("recall");
  m.f1 = f.req<double>("f1");
  m.averaging = parse_averaging(f.req<std::string>("averaging"));
  m.total = f.req<std::size_t>("total");
  m.correct = f.req<std::size_t>("correct");
  for (const auto& c : f.sub("per_class")) {
    Fields g(c, where + ".per_class", ErrorKind::Schema);
    m.per_class.push_back(
        {g.req<double>("precision"), g.req<double>("recall"), g.req<double>("f1"), g.req<std::size_t>("support")});
  }
  f.opt("warnings", m.warnings);
  return m;
}

Json to_json(const ConfusionMatrix& cm) {
  Json rows = Json::array();
  for (std::size_t r = 0; r < cm.class_count(); ++r) {
    Json row = Json::array();
    for (std::size_t s = 0; s < cm.class_count(); ++s) row.push_back(cm.at(r, s));
    rows.push_back(row);
  }
  return rows;
}

ConfusionMatrix confusion_from(const Json& j, const std::string& where) {
  if (!j.is_array()) fail(ErrorKind::Schema, where + ": confusion matrix must be an array of rows");
  ConfusionMatrix cm(j.size());
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != j.size()) fail(ErrorKind::Schema, where + ": confusion matrix is not square");
    for (std::size_t s = 0; s < j.size(); ++s) cm.add(r, s, j[r][s].get<std::size_t>());
  }
  return cm;
}

Json to_json(const std::optional<Evaluation>& e) {
  if (!e) return nullptr;
  return {{"metrics", to_json(e->metrics)}, {"confusion", to_json(e->confusion)}};
}

std::optional<Evaluation> evaluation_from(const Json& j, const std::string& where) {
  if (j.is_null()) return std::nullopt;
  Fields f(j, where, ErrorKind::Schema);
  return Evaluation{metrics_from(f.sub("metrics"), where + ".metrics"), confusion_from(f.sub("confusion"), where)};
}

Json to_json(const MeanStd& m) { return {{"mean", m.mean}, {"std", m.std}}; }

MeanStd mean_std_from(const Json& j, const std::string& where) {
  Fields f(j, where, ErrorKind::Schema);
  return {f.req<double>("mean"), f.req<double>("std")};
}

Json to_json(const std::vector<ModeResult>& modes) {
  Json out = Json::array();
  for (const auto& m : modes) {
    out.push_back({{"mode", std::string(to_string(m.mode))}, {"routed", m.routed}, {"evaluation", to_json(m.evaluation)}});
  }
  return out;
}

std::vector<ModeResult> modes_from(const Json& j, const std::string& where) {
  std::vector<ModeResult> out;
  for (const auto& m : j) {
    Fields f(m, where, ErrorKind::Schema);
    ModeResult r;
    r.mode = parse_routing_mode(f.req<std::string>("mode"));
    r.routed = f.req<std::size_t>("routed");
    if (m.contains("evaluation")) r.evaluation = evaluation_from(m.at("evaluation"), where + ".evaluation");
    out.push_back(std::move(r));
  }
  return out;
}

// Models ---------------------------------------------------------------------------

Json to_json(const FittedLearner& l) {
  Json j{{"view", to_json(l.view)}};
  if (const auto* m = std::get_if<SoftmaxModel>(&l.model)) {
    j["kind"] = "softmax";
    j["class_count"] = m->class_count;
    j["feature_dim"] = m->feature_dim;
    j["shape"] = {m->class_count, m->cols()};
    j["weights"] = m->weights;
  } else if (const auto* m = std::get_if<KnnModel>(&l.model)) {
    j["kind"] = "knn";
    j["class_count"] = m->class_count;
    j["neighbors"] = m->neighbors;
    Json samples = Json::array();
    for (const auto& s : m->samples) samples.push_back({{"id", s.id}, {"label", s.label}, {"features", s.features}});
    j["samples"] = samples;
  } else {
    const auto& g = std::get<GaussianNbModel>(l.model);
    j["kind"] = "gnb";
    j["class_count"] = g.class_count;
    j["feature_dim"] = g.feature_dim;
    j["priors"] = g.priors;
    j["means"] = g.means;
    j["variances"] = g.variances;
  }
  return j;
}

FittedLearner learner_from(const Json& j, const std::string& where) {
  Fields f(j, where, ErrorKind::Schema);
  FittedLearner l;
  if (j.contains("view")) l.view = view_from(j.at("view"), where + ".view", ErrorKind::Schema);
  const auto kind = parse_learner_kind(f.req<std::string>("kind"));
  if (kind == LearnerKind::Softmax) {
    SoftmaxModel m;
    m.class_count = f.req<std::size_t>("class_count");
    m.feature_dim = f.req<std::size_t>("feature_dim");
    m.weights = f.req<std::vector<double>>("weights");
    const auto shape = f.req<std::vector<std::size_t>>("shape");
    if (shape.size() != 2 || shape[0] != m.class_count || shape[1] != m.cols() ||
        m.weights.size() != m.class_count * m.cols()) {
      fail(ErrorKind::Schema, where + ": softmax weights do not match their shape");
    }
    l.model = std::move(m);
  } else if (kind == LearnerKind::Knn) {
    KnnModel m;
    m.class_count = f.req<std::size_t>("class_count");
    m.neighbors = f.req<std::size_t>("neighbors");
    for (const auto& s : f.sub("samples")) {
      Fields g(s, where + ".samples", ErrorKind::Schema);
      m.samples.push_back({g.req<std::string>("id"), g.req<std::vector<double>>("features"),
                           g.req<std::size_t>("label")});
    }
    l.model = std::move(m);
  } else {
    GaussianNbModel m;
    m.class_count = f.req<std::size_t>("class_count");
    m.feature_dim = f.req<std::size_t>("feature_dim");
    m.priors = f.req<std::vector<double>>("priors");
    m.means = f.req<std::vector<double>>("means");
    m.variances = f.req<std::vector<double>>("variances");
    if (m.priors.size() != m.class_count || m.means.size() != m.class_count * m.feature_dim ||
        m.variances.size() != m.means.size()) {
      fail(ErrorKind::Schema, where + ": naive Bayes parameters have inconsistent sizes");
    }
    l.model = std::move(m);
  }
  return l;
}

}  // namespace

// Files ----------------------------------------------------------------------------

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
    out << text;
    out.flush();
    if (!out) fail(ErrorKind::Io, "write to '" + path.string() + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(ErrorKind::Io, "cannot move '" + tmp.string() + "' into place: " + ec.message());
}

// Probability tables -------------------------------------------------------------

ProbabilityTable parse_probability_table(std::istream& in) {
  std::string line;
  if (!next_line(in, line)) throw ParseError(ErrorKind::Parse, 1, "line 1: empty probability table");
  const auto header = split_csv(line);
  if (header.size() < 6) parse_fail(ErrorKind::Schema, 1, "header needs sample_id,learner,fold,label and >= 2 classes");
  expect_header(header, 4, {"sample_id", "learner", "fold", "label"}, "p_");
  const std::size_t c = header.size() - 4;

  struct Row {
    std::size_t line;
    SampleId id;
    std::size_t learner;
    FoldSlot fold;
    std::optional<ClassIndex> label;
    ProbabilityVector p;
  };
  std::vector<Row> rows;
  std::vector<std::string> learners;
  std::map<std::string, std::size_t> learner_index;
  std::size_t fold_count = 0;

  for (std::size_t n = 2; next_line(in, line); ++n) {
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != header.size()) {
      parse_fail(ErrorKind::Parse, n, "expected " + std::to_string(header.size()) + " fields, found " +
                                          std::to_string(fields.size()));
    }
    Row row;
    row.line = n;
    row.id = fields[0];
    if (row.id.empty()) parse_fail(ErrorKind::Parse, n, "empty sample_id");
    if (fields[1].empty()) parse_fail(ErrorKind::Parse, n, "empty learner");
    auto [it, fresh] = learner_index.try_emplace(fields[1], learners.size());
    if (fresh) learners.push_back(fields[1]);
    row.learner = it->second;
    if (fields[2] != "single") {
      row.fold = parse_index(fields[2], n, "fold");
      fold_count = std::max(fold_count, *row.fold + 1);
    }
    if (!fields[3].empty()) {
      row.label = parse_index(fields[3], n, "label");
      if (*row.label >= c) parse_fail(ErrorKind::Range, n, "label " + fields[3] + " outside [0, " + std::to_string(c) + ")");
    }
    std::vector<double> p;
    for (std::size_t r = 0; r < c; ++r) p.push_back(parse_real(fields[4 + r], n, header[4 + r]));
    try {
      // Vectors already on the simplex are kept bit-for-bit so that tables
      // written by this library read back unchanged.
      try {
        row.p = validate_probability_vector(p, kSimplexTolerance);
      } catch (const NormalizationError&) {
        row.p = renormalize_probability_vector(p, kIngestTolerance);
      }
    } catch (const NormalizationError& e) {
      throw ParseError(ErrorKind::Normalization, n, "line " + std::to_string(n) + ": " + e.what());
    } catch (const Error& e) {
      throw ParseError(e.kind(), n, "line " + std::to_string(n) + ": " + e.what());
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(ErrorKind::EmptyInput, 1, "line 1: probability table has no rows");

  ProbabilityTable table(c, learners, fold_count);
  for (auto& row : rows) {
    try {
      if (row.label) table.set_label(row.id, *row.label);
      table.insert(TableKey{row.id, row.learner, row.fold}, std::move(row.p));
    } catch (const Error& e) {
      throw ParseError(e.kind(), row.line, "line " + std::to_string(row.line) + ": " + e.what());
    }
  }
  return table;
}

ProbabilityTable read_probability_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open '" + path.string() + "' for reading");
  return parse_probability_table(in);
}

void format_probability_table(const ProbabilityTable& table, std::ostream& out) {
  out << "sample_id,learner,fold,label";
  for (std::size_t r = 0; r < table.class_count(); ++r) out << ",p_" << r;
  out << '\n';
  // Learner-major order so that first appearance reproduces learner indices.
  for (std::size_t t = 0; t < table.learner_count(); ++t) {
    for (const auto& [key, p] : table.entries()) {
      if (key.learner != t) continue;
      out << key.sample_id << ',' << table.learner_names()[t] << ',';
      if (key.fold) {
        out << *key.fold;
      } else {
        out << "single";
      }
      out << ',';
      if (auto y = table.label(key.sample_id)) out << *y;
      for (double v : p) out << ',' << format_real(v);
      out << '\n';
    }
  }
}

void write_probability_table(const ProbabilityTable& table, const std::filesystem::path& path) {
  std::ostringstream ss;
  format_probability_table(table, ss);
  write_text(path, ss.str());
}

// Datasets -------------------------------------------------------------------------

DatasetManifest read_manifest(const std::filesystem::path& path) {
  const Json j = parse_json(read_text(path), "manifest '" + path.string() + "'");
  Fields f(j, "manifest", ErrorKind::Schema);
  f.only({"name", "class_count", "class_names", "feature_dim", "sample_count", "rebalance", "notes"});
  DatasetManifest m;
  f.opt("name", m.name);
  m.class_count = f.req<std::size_t>("class_count");
  f.opt("class_names", m.class_names);
  m.feature_dim = f.req<std::size_t>("feature_dim");
  if (f.has("sample_count")) m.sample_count = f.req<std::size_t>("sample_count");
  f.opt("rebalance", m.rebalance);
  f.opt("notes", m.notes);
  if (!m.class_names.empty() && m.class_names.size() != m.class_count) {
    fail(ErrorKind::Schema, "manifest: class_names has " + std::to_string(m.class_names.size()) +
                                " entries but class_count is " + std::to_string(m.class_count));
  }
  return m;
}

void write_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  Json j{{"name", m.name},
         {"class_count", m.class_count},
         {"class_names", m.class_names},
         {"feature_dim", m.feature_dim},
         {"sample_count", m.sample_count ? Json(*m.sample_count) : Json(nullptr)},
         {"rebalance", m.rebalance},
         {"notes", m.notes}};
  write_text(path, j.dump(2) + "\n");
}

Dataset parse_features(const DatasetManifest& manifest, std::istream& in) {
  std::string line;
  if (!next_line(in, line)) throw ParseError(ErrorKind::Parse, 1, "line 1: empty feature file");
  const auto header = split_csv(line);
  if (header.size() != manifest.feature_dim + 2) {
    parse_fail(ErrorKind::Schema, 1, "feature file has " + std::to_string(header.size()) +
                                         " columns, manifest implies " + std::to_string(manifest.feature_dim + 2));
  }
  expect_header(header, 2, {"sample_id", "label"}, "f_");

  std::vector<LabeledSample> samples;
  for (std::size_t n = 2; next_line(in, line); ++n) {
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != header.size()) {
      parse_fail(ErrorKind::Schema, n, "expected " + std::to_string(header.size()) + " fields, found " +
                                           std::to_string(fields.size()));
    }
    LabeledSample s;
    s.id = fields[0];
    if (s.id.empty()) parse_fail(ErrorKind::Parse, n, "empty sample_id");
    s.label = parse_index(fields[1], n, "label");
    if (s.label >= manifest.class_count) parse_fail(ErrorKind::Range, n, "label " + fields[1] + " out of range");
    for (std::size_t i = 2; i < fields.size(); ++i) s.features.push_back(parse_real(fields[i], n, header[i]));
    samples.push_back(std::move(s));
  }
  if (manifest.sample_count && *manifest.sample_count != samples.size()) {
    fail(ErrorKind::Schema, "manifest expects " + std::to_string(*manifest.sample_count) + " samples, file has " +
                                std::to_string(samples.size()));
  }
  return Dataset(std::move(samples), manifest.class_count, manifest.feature_dim, manifest.class_names);
}

Dataset read_dataset(const DatasetManifest& manifest, const std::filesystem::path& features) {
  std::ifstream in(features, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open '" + features.string() + "' for reading");
  return parse_features(manifest, in);
}

void write_features(const Dataset& data, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "sample_id,label";
  for (std::size_t i = 0; i < data.feature_dim(); ++i) out << ",f_" << i;
  out << '\n';
  for (const auto& s : data.samples()) {
    out << s.id << ',' << s.label;
    for (double v : s.features) out << ',' << format_real(v);
    out << '\n';
  }
  write_text(path, out.str());
}

// Fold plans -----------------------------------------------------------------------

std::string fold_plan_to_json(const FoldPlan& plan) {
  Json folds = Json::array();
  for (const auto& f : plan.folds) folds.push_back({{"heldout", f.heldout}, {"train", f.train}, {"val", f.val}});
  Json j{{"format", "vstack-fold-plan"}, {"k", plan.k},         {"seed", plan.seed},
         {"stratified", plan.stratified}, {"test_ids", plan.test_ids}, {"folds", folds},
         {"warnings", plan.warnings}};
  return j.dump(2) + "\n";
}

FoldPlan fold_plan_from_json(const std::string& text) {
  const Json j = parse_json(text, "fold plan");
  Fields f(j, "fold plan", ErrorKind::Schema);
  FoldPlan plan;
  plan.k = f.req<std::size_t>("k");
  plan.seed = f.req<std::uint64_t>("seed");
  plan.stratified = f.req<bool>("stratified");
  plan.test_ids = f.req<std::vector<SampleId>>("test_ids");
  for (const auto& fold : f.sub("folds")) {
    Fields g(fold, "fold plan.folds", ErrorKind::Schema);
    plan.folds.push_back({g.req<std::vector<SampleId>>("heldout"), g.req<std::vector<SampleId>>("train"),
                          g.req<std::vector<SampleId>>("val")});
  }
  f.opt("warnings", plan.warnings);
  if (plan.folds.size() != plan.k) fail(ErrorKind::Schema, "fold plan: k does not match the number of folds");
  return plan;
}

void write_fold_plan(const FoldPlan& plan, const std::filesystem::path& path) {
  write_text(path, fold_plan_to_json(plan));
}

FoldPlan read_fold_plan(const std::filesystem::path& path) { return fold_plan_from_json(read_text(path)); }

// Models ---------------------------------------------------------------------------

std::string model_to_json(const MetaStack& stack) {
  Json level2 = Json::array();
  for (const auto& l : stack.level2) level2.push_back(to_json(l));
  Json j{{"format", "vstack-model"},
         {"level2", level2},
         {"super_learner", stack.super_learner ? to_json(*stack.super_learner) : Json(nullptr)},
         {"warnings", stack.warnings}};
  return j.dump(2) + "\n";
}

MetaStack model_from_json(const std::string& text) {
  const Json j = parse_json(text, "model");
  Fields f(j, "model", ErrorKind::Schema);
  MetaStack stack;
  for (const auto& l : f.sub("level2")) stack.level2.push_back(learner_from(l, "model.level2"));
  if (f.has("super_learner")) stack.super_learner = learner_from(j.at("super_learner"), "model.super_learner");
  f.opt("warnings", stack.warnings);
  if (stack.level2.empty()) fail(ErrorKind::Schema, "model: no level-2 learner");
  return stack;
}

// Run configs ----------------------------------------------------------------------

RunConfig run_config_from_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(ErrorKind::Config, 0, std::string("config: ") + e.what());
  }
  return config_from(j, ErrorKind::Config);
}

std::string run_config_to_json(const RunConfig& config) { return config_json(config).dump(2) + "\n"; }

RunConfig read_run_config(const std::filesystem::path& path) {
  auto config = run_config_from_json(read_text(path));
  // Relative data paths are taken relative to the config file.
  const auto base = path.parent_path();
  for (auto* p : {&config.manifest_path, &config.features_path, &config.table_path}) {
    if (!p->empty() && std::filesystem::path(*p).is_relative()) *p = (base / *p).lexically_normal().string();
  }
  return config;
}

// Reports --------------------------------------------------------------------------

std::string report_to_json(const EvaluationReport& r, bool with_timing) {
  Json base = Json::array();
  for (const auto& b : r.base_learners) {
    base.push_back({{"name", b.name},
                    {"fold_accuracy", b.fold_accuracy},
                    {"accuracy", to_json(b.accuracy)},
                    {"precision", to_json(b.precision)},
                    {"recall", to_json(b.recall)},
                    {"f1", to_json(b.f1)},
                    {"averaged", to_json(std::optional<Evaluation>(b.averaged))}});
  }
  Json level2 = Json::array();
  for (const auto& [name, modes] : r.stack.level2) level2.push_back({{"name", name}, {"modes", to_json(modes)}});
  Json stack{{"meta_skipped", r.stack.meta_skipped},
             {"skip_reason", r.stack.skip_reason},
             {"provenance",
              {{"filtered", r.stack.provenance.filtered},
               {"source_size", r.stack.provenance.source_size},
               {"retained", r.stack.provenance.retained}}},
             {"levels", r.stack.levels},
             {"modes", to_json(r.stack.modes)},
             {"level2", level2},
             {"warnings", r.stack.warnings}};
  Json ablation = Json::array();
  for (const auto& a : r.ablation) {
    ablation.push_back({{"learners", a.learners},
                        {"voting", a.voting},
                        {"meta", a.meta},
                        {"meta_skipped", a.meta_skipped},
                        {"meta_size", a.meta_size},
                        {"modes", to_json(a.modes)}});
  }
  Json comparison = Json::array();
  for (const auto& m : r.meta_comparison) {
    comparison.push_back({{"learner", m.learner}, {"meta_skipped", m.meta_skipped}, {"modes", to_json(m.modes)}});
  }
  Json j{{"format", "vstack-report"},
         {"config", config_json(r.config)},
         {"seeds",
          {{"split", r.seeds.split}, {"folds", r.seeds.folds}, {"base", r.seeds.base}, {"meta", r.seeds.meta}}},
         {"class_count", r.class_count},
         {"learner_names", r.learner_names},
         {"fold_count", r.fold_count},
         {"pool_size", r.pool_size},
         {"test_size", r.test_size},
         {"test_labeled", r.test_labeled},
         {"base_learners", base},
         {"voting", to_json(r.voting)},
         {"stack", stack},
         {"ablation", ablation},
         {"meta_comparison", comparison},
         {"warnings", r.warnings}};
  if (with_timing) j["timing"] = r.timing;
  return j.dump(2) + "\n";
}

EvaluationReport report_from_json(const std::string& text) {
  const Json j = parse_json(text, "report");
  Fields f(j, "report", ErrorKind::Schema);
  EvaluationReport r;
  r.config = config_from(f.sub("config"), ErrorKind::Schema);
  {
    Fields s(f.sub("seeds"), "report.seeds", ErrorKind::Schema);
    r.seeds = {s.req<std::uint64_t>("split"), s.req<std::uint64_t>("folds"), s.req<std::uint64_t>("base"),
               s.req<std::uint64_t>("meta")};
  }
  r.class_count = f.req<std::size_t>("class_count");
  r.learner_names = f.req<std::vector<std::string>>("learner_names");
  r.fold_count = f.req<std::size_t>("fold_count");
  r.pool_size = f.req<std::size_t>("pool_size");
  r.test_size = f.req<std::size_t>("test_size");
  r.test_labeled = f.req<bool>("test_labeled");
  for (const auto& b : f.sub("base_learners")) {
    Fields g(b, "report.base_learners", ErrorKind::Schema);
    BaseLearnerSummary s;
    s.name = g.req<std::string>("name");
    s.fold_accuracy = g.req<std::vector<double>>("fold_accuracy");
    s.accuracy = mean_std_from(g.sub("accuracy"), "report.base_learners.accuracy");
    s.precision = mean_std_from(g.sub("precision"), "report.base_learners.precision");
    s.recall = mean_std_from(g.sub("recall"), "report.base_learners.recall");
    s.f1 = mean_std_from(g.sub("f1"), "report.base_learners.f1");
    s.averaged = *evaluation_from(g.sub("averaged"), "report.base_learners.averaged");
    r.base_learners.push_back(std::move(s));
  }
  if (j.contains("voting")) r.voting = evaluation_from(j.at("voting"), "report.voting");
  {
    const auto& sj = f.sub("stack");
    Fields s(sj, "report.stack", ErrorKind::Schema);
    r.stack.meta_skipped = s.req<bool>("meta_skipped");
    s.opt("skip_reason", r.stack.skip_reason);
    Fields p(s.sub("provenance"), "report.stack.provenance", ErrorKind::Schema);
    r.stack.provenance = {p.req<bool>("filtered"), p.req<std::size_t>("source_size"), p.req<std::size_t>("retained")};
    r.stack.levels = s.req<std::size_t>("levels");
    r.stack.modes = modes_from(s.sub("modes"), "report.stack.modes");
    for (const auto& l : s.sub("level2")) {
      Fields g(l, "report.stack.level2", ErrorKind::Schema);
      r.stack.level2.emplace_back(g.req<std::string>("name"), modes_from(g.sub("modes"), "report.stack.level2"));
    }
    s.opt("warnings", r.stack.warnings);
  }
  for (const auto& a : f.sub("ablation")) {
    Fields g(a, "report.ablation", ErrorKind::Schema);
    AblationRow row;
    row.learners = g.req<std::size_t>("learners");
    row.voting = g.req<bool>("voting");
    row.meta = g.req<bool>("meta");
    row.meta_skipped = g.req<bool>("meta_skipped");
    row.meta_size = g.req<std::size_t>("meta_size");
    row.modes = modes_from(g.sub("modes"), "report.ablation.modes");
    r.ablation.push_back(std::move(row));
  }
  for (const auto& m : f.sub("meta_comparison")) {
    Fields g(m, "report.meta_comparison", ErrorKind::Schema);
    r.meta_comparison.push_back(
        {g.req<std::string>("learner"), g.req<bool>("meta_skipped"), modes_from(g.sub("modes"), "report.meta_comparison")});
  }
  f.opt("warnings", r.warnings);
  if (f.has("timing")) r.timing = f.req<std::map<std::string, double>>("timing");
  return r;
}

// Predictions ----------------------------------------------------------------------

void write_predictions(const std::map<std::string, std::map<SampleId, ClassIndex>>& columns,
                       const LabelMap& labels, const std::filesystem::path& path) {
  std::set<SampleId> ids;
  for (const auto& [name, col] : columns) {
    if (name == "sample_id" || name == "label") fail(ErrorKind::Schema, "prediction column name '" + name + "' is reserved");
    for (const auto& [id, _] : col) ids.insert(id);
  }
  std::ostringstream out;
  out << "sample_id,label";
  for (const auto& [name, _] : columns) out << ',' << name;
  out << '\n';
  for (const auto& id : ids) {
    out << id << ',';
    if (auto it = labels.find(id); it != labels.end()) out << it->second;
    for (const auto& [_, col] : columns) {
      out << ',';
      if (auto it = col.find(id); it != col.end()) out << it->second;
    }
    out << '\n';
  }
  write_text(path, out.str());
}

PredictionColumn read_predictions(const std::filesystem::path& path, const std::string& column) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open '" + path.string() + "' for reading");
  std::string line;
  if (!next_line(in, line)) throw ParseError(ErrorKind::Parse, 1, "line 1: empty predictions file");
  const auto header = split_csv(line);
  if (header.size() < 3 || header[0] != "sample_id" || header[1] != "label") {
    parse_fail(ErrorKind::Schema, 1, "header must start with sample_id,label");
  }
  std::size_t col = 0;
  for (std::size_t i = 2; i < header.size(); ++i) {
    if (header[i] == column) col = i;
  }
  if (col == 0) parse_fail(ErrorKind::Schema, 1, "no column named '" + column + "'");
  PredictionColumn out;
  for (std::size_t n = 2; next_line(in, line); ++n) {
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != header.size()) {
      parse_fail(ErrorKind::Parse, n, "expected " + std::to_string(header.size()) + " fields, found " +
                                          std::to_string(fields.size()));
    }
    if (!fields[1].empty()) out.labels[fields[0]] = parse_index(fields[1], n, "label");
    if (!fields[col].empty()) out.predicted[fields[0]] = parse_index(fields[col], n, column);
  }
  return out;
}

}  // namespace vstack
