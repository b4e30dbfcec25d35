#include "config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "error.hpp"

namespace emcs {

using nlohmann::json;

void DatasetSchema::Validate() const {
  std::vector<std::string> errs;
  std::set<std::string> seen;
  auto add = [&](const std::string& name, const char* role) {
    if (name.empty()) {
      errs.push_back(std::string(role) + ": empty column name");
    } else if (!seen.insert(name).second) {
      errs.push_back(std::string(role) + ": duplicate column name '" + name + "'");
    }
  };
  add(outcome, "schema.outcome");
  add(treatment, "schema.treatment");
  for (const auto& c : covariates) add(c.name, "schema.covariates");
  if (covariates.empty()) errs.push_back("schema.covariates: at least one covariate required");
  std::set<std::string> ordered;
  for (const auto& name : sequential_order) {
    bool known = false;
    for (const auto& c : covariates) known = known || c.name == name;
    if (!known) errs.push_back("schema.sequential_order: unknown covariate '" + name + "'");
    if (!ordered.insert(name).second) {
      errs.push_back("schema.sequential_order: duplicate '" + name + "'");
    }
  }
  if (!errs.empty()) {
    std::string msg = "invalid dataset schema:";
    for (const auto& e : errs) msg += "\n  " + e;
    Fail(ErrorKind::kValidation, msg);
  }
}

std::vector<VariableSpec> DatasetSchema::SequentialSchema() const {
  if (sequential_order.empty()) return covariates;
  std::vector<VariableSpec> out;
  for (const auto& name : sequential_order) {
    for (const auto& c : covariates) {
      if (c.name == name) out.push_back(c);
    }
  }
  return out;
}

void RunConfig::Validate() const {
  std::vector<std::string> errs;
  if (scenario.has_value() == dataset.has_value()) {
    errs.push_back("source: exactly one of scenario or dataset is required");
  }
  if (scenario) {
    try {
      scenario->Validate();
    } catch (const Error& e) {
      errs.push_back(std::string("source.scenario: ") + e.what());
    }
  }
  if (dataset) {
    if (dataset->path.empty()) errs.push_back("source.dataset.path: required");
    try {
      dataset->schema.Validate();
    } catch (const Error& e) {
      errs.push_back(std::string("source.dataset: ") + e.what());
    }
    if (dataset->subsample_treated.has_value() != dataset->subsample_control.has_value()) {
      errs.push_back("source.dataset.subsample: both n_treated and n_control are required");
    }
    if (dataset->subsample_treated && *dataset->subsample_treated < 2) {
      errs.push_back("source.dataset.subsample.n_treated: must be >= 2");
    }
    if (dataset->subsample_control && *dataset->subsample_control < 2) {
      errs.push_back("source.dataset.subsample.n_control: must be >= 2");
    }
    if (!std::isfinite(dataset->truth_att)) {
      errs.push_back("source.dataset.truth_att: must be finite");
    }
  }
  if (n_samples < 1) errs.push_back("n_samples: must be >= 1");
  if (n_reps < 2) errs.push_back("n_reps: must be >= 2");
  if (truth_samples && *truth_samples < n_samples) {
    errs.push_back("truth_samples: must be >= n_samples");
  }
  if (designs.empty()) errs.push_back("designs: at least one design required");
  std::set<DesignKind> dset(designs.begin(), designs.end());
  if (dset.size() != designs.size()) errs.push_back("designs: duplicate entry");
  if (estimators.size() < 2) errs.push_back("estimators: at least two estimators required");
  std::set<EstimatorId> eset(estimators.begin(), estimators.end());
  if (eset.size() != estimators.size()) errs.push_back("estimators: duplicate entry");
  if (!(placebo.lambda >= 0.0) || !std::isfinite(placebo.lambda)) {
    errs.push_back("placebo.lambda: must be finite and >= 0");
  }
  if (!(grid.base > 0.0) || !(grid.factor > 1.0) || grid.count < 1) {
    errs.push_back("bandwidth_grid: need base > 0, factor > 1, count >= 1");
  }
  if (bandwidth && !(*bandwidth > 0.0)) errs.push_back("bandwidth: must be > 0");
  if (workers < 0) errs.push_back("workers: must be >= 0");
  if (output_dir.empty()) errs.push_back("output_dir: must be non-empty");
  if (calibration_samples < 1) errs.push_back("calibration_samples: must be >= 1");
  if (!(failure_budget >= 0.0 && failure_budget < 1.0)) {
    errs.push_back("failure_budget: must be in [0, 1)");
  }
  if (dset.count(DesignKind::kStructuredStylized)) {
    const bool scalar = scenario || (dataset && dataset->schema.covariates.size() == 1);
    if (!scalar) {
      errs.push_back("designs: structured_stylized needs exactly one covariate");
    }
  }
  std::set<std::string> seq_names;
  for (const auto& v : sequential_schema) {
    if (v.name.empty() || !seq_names.insert(v.name).second) {
      errs.push_back("sequential_schema: names must be unique and non-empty");
    }
  }
  if (!errs.empty()) {
    std::string msg = "invalid config:";
    for (const auto& e : errs) msg += "\n  " + e;
    Fail(ErrorKind::kValidation, msg);
  }
}

void RunConfig::ApplyPaperScale() {
  n_samples = kPaperScaleSamples;
  n_reps = kPaperScaleReps;
  if (truth_samples && *truth_samples < n_samples) truth_samples = n_samples;
}

namespace {

// Collects type errors while reading fields so that every problem in the
// document is reported at once.
class Reader {
 public:
  std::vector<std::string> errs;

  template <typename T>
  void Get(const json& obj, const char* key, const std::string& path, T& out) {
    if (!obj.contains(key)) return;
    const json& v = obj.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw std::invalid_argument("expected a boolean");
      } else if constexpr (std::is_unsigned_v<T>) {
        if (!v.is_number_unsigned()) throw std::invalid_argument("expected a non-negative integer");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw std::invalid_argument("expected an integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw std::invalid_argument("expected a number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw std::invalid_argument("expected a string");
      }
      out = v.get<T>();
    } catch (const std::exception& e) {
      errs.push_back(path + key + ": " + e.what());
    }
  }

  template <typename T>
  void GetOpt(const json& obj, const char* key, const std::string& path,
              std::optional<T>& out) {
    if (!obj.contains(key) || obj.at(key).is_null()) return;
    T tmp{};
    const std::size_t before = errs.size();
    Get(obj, key, path, tmp);
    if (errs.size() == before) out = tmp;
  }

  void Keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      bool ok = false;
      for (const char* a : allowed) ok = ok || it.key() == a;
      if (!ok) errs.push_back(path + it.key() + ": unknown field");
    }
  }

  bool Object(const json& v, const std::string& path) {
    if (v.is_object()) return true;
    errs.push_back(path + ": expected an object");
    return false;
  }

  template <typename F>
  void Parse(const std::string& field, F&& f) {
    try {
      f();
    } catch (const Error& e) {
      errs.push_back(field + ": " + e.what());
    }
  }
};

std::vector<VariableSpec> ReadVariables(Reader& r, const json& arr, const std::string& path) {
  std::vector<VariableSpec> out;
  if (!arr.is_array()) {
    r.errs.push_back(path + ": expected an array");
    return out;
  }
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string p = path + "[" + std::to_string(i) + "]";
    VariableSpec v;
    if (arr[i].is_string()) {
      v.name = arr[i].get<std::string>();
    } else if (r.Object(arr[i], p)) {
      r.Keys(arr[i], p + ".", {"name", "kind"});
      r.Get(arr[i], "name", p + ".", v.name);
      std::string kind = "continuous";
      r.Get(arr[i], "kind", p + ".", kind);
      r.Parse(p + ".kind", [&] { v.kind = ParseVariableKind(kind); });
    }
    out.push_back(v);
  }
  return out;
}

void ReadScenario(Reader& r, const json& v, RunConfig& cfg) {
  const std::string p = "source.scenario";
  ScenarioSpec spec;
  if (v.is_number_integer()) {
    const int id = v.get<int>();
    if (id < 1 || id > 3) {
      r.errs.push_back(p + ": scenario id must be 1, 2 or 3");
      return;
    }
    cfg.scenario = ScenarioSpec::ById(static_cast<ScenarioId>(id));
    return;
  }
  if (!r.Object(v, p)) return;
  r.Keys(v, p + ".", {"id", "n", "x_dist", "ps_intercept", "ps_slope", "beta0", "beta1",
                      "beta_x", "beta_interaction", "sigma0", "sigma1"});
  int id = 2;
  r.Get(v, "id", p + ".", id);
  if (id < 1 || id > 3) {
    r.errs.push_back(p + ".id: must be 1, 2 or 3");
    return;
  }
  spec = ScenarioSpec::ById(static_cast<ScenarioId>(id));
  r.Get(v, "n", p + ".", spec.n);
  r.Get(v, "ps_intercept", p + ".", spec.ps_intercept);
  r.Get(v, "ps_slope", p + ".", spec.ps_slope);
  r.Get(v, "beta0", p + ".", spec.beta0);
  r.Get(v, "beta1", p + ".", spec.beta1);
  r.Get(v, "beta_x", p + ".", spec.beta_x);
  r.Get(v, "beta_interaction", p + ".", spec.beta_interaction);
  r.Get(v, "sigma0", p + ".", spec.sigma0);
  r.Get(v, "sigma1", p + ".", spec.sigma1);
  if (v.contains("x_dist") && r.Object(v.at("x_dist"), p + ".x_dist")) {
    const json& x = v.at("x_dist");
    const std::string px = p + ".x_dist.";
    r.Keys(x, px, {"mean", "sd", "lower", "upper"});
    r.Get(x, "mean", px, spec.x_dist.mean);
    r.Get(x, "sd", px, spec.x_dist.sd);
    r.Get(x, "lower", px, spec.x_dist.lower);
    r.Get(x, "upper", px, spec.x_dist.upper);
  }
  cfg.scenario = spec;
}

void ReadDataset(Reader& r, const json& v, RunConfig& cfg) {
  const std::string p = "source.dataset.";
  if (!r.Object(v, "source.dataset")) return;
  r.Keys(v, p, {"path", "outcome", "treatment", "covariates", "sequential_order", "subsample",
                "truth_att"});
  DatasetSource ds;
  r.Get(v, "path", p, ds.path);
  r.Get(v, "outcome", p, ds.schema.outcome);
  r.Get(v, "treatment", p, ds.schema.treatment);
  if (v.contains("covariates")) {
    ds.schema.covariates = ReadVariables(r, v.at("covariates"), p + "covariates");
  }
  if (v.contains("sequential_order")) {
    for (const auto& s : ReadVariables(r, v.at("sequential_order"), p + "sequential_order")) {
      ds.schema.sequential_order.push_back(s.name);
    }
  }
  if (v.contains("subsample") && r.Object(v.at("subsample"), p + "subsample")) {
    const json& s = v.at("subsample");
    r.Keys(s, p + "subsample.", {"n_treated", "n_control"});
    r.GetOpt(s, "n_treated", p + "subsample.", ds.subsample_treated);
    r.GetOpt(s, "n_control", p + "subsample.", ds.subsample_control);
  }
  if (!v.contains("truth_att")) {
    r.errs.push_back(p + "truth_att: required for dataset sources");
  }
  r.Get(v, "truth_att", p, ds.truth_att);
  cfg.dataset = ds;
}

std::pair<int, int> LineColumn(std::string_view text, std::size_t byte) {
  int line = 1, col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace

RunConfig ParseConfig(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text.begin(), json_text.end());
  } catch (const json::parse_error& e) {
    const auto [line, col] = LineColumn(json_text, e.byte);
    std::ostringstream os;
    os << "config parse error at line " << line << ", column " << col << ": " << e.what();
    Fail(ErrorKind::kParse, os.str());
  }
  if (!doc.is_object()) Fail(ErrorKind::kParse, "config parse error: top level must be an object");

  Reader r;
  RunConfig cfg;
  r.Keys(doc, "", {"source", "n_samples", "n_reps", "truth_samples", "designs", "estimators",
                   "ps_kind", "placebo", "bandwidth_grid", "bandwidth", "sequential_schema",
                   "seed", "workers", "output_dir", "calibration_samples", "failure_budget",
                   "write_replicates"});

  if (!doc.contains("source")) {
    r.errs.push_back("source: required");
  } else if (r.Object(doc.at("source"), "source")) {
    const json& s = doc.at("source");
    r.Keys(s, "source.", {"scenario", "dataset"});
    if (s.contains("scenario")) ReadScenario(r, s.at("scenario"), cfg);
    if (s.contains("dataset")) ReadDataset(r, s.at("dataset"), cfg);
  }
  // Propensity model family: linear for the stylized scenarios, logit for data.
  cfg.ps_kind = cfg.dataset ? PropensityKind::kLogit : PropensityKind::kLinearProbability;

  r.Get(doc, "n_samples", "", cfg.n_samples);
  r.Get(doc, "n_reps", "", cfg.n_reps);
  r.GetOpt(doc, "truth_samples", "", cfg.truth_samples);
  if (doc.contains("designs")) {
    const json& d = doc.at("designs");
    cfg.designs.clear();
    if (!d.is_array()) {
      r.errs.push_back("designs: expected an array");
    } else {
      for (std::size_t i = 0; i < d.size(); ++i) {
        const std::string p = "designs[" + std::to_string(i) + "]";
        if (!d[i].is_string()) {
          r.errs.push_back(p + ": expected a string");
          continue;
        }
        r.Parse(p, [&] { cfg.designs.push_back(ParseDesignKind(d[i].get<std::string>())); });
      }
    }
  }
  if (doc.contains("estimators")) {
    const json& d = doc.at("estimators");
    cfg.estimators.clear();
    if (!d.is_array()) {
      r.errs.push_back("estimators: expected an array");
    } else {
      for (std::size_t i = 0; i < d.size(); ++i) {
        const std::string p = "estimators[" + std::to_string(i) + "]";
        if (!d[i].is_string()) {
          r.errs.push_back(p + ": expected a string");
          continue;
        }
        r.Parse(p, [&] { cfg.estimators.push_back(ParseEstimatorId(d[i].get<std::string>())); });
      }
    }
  }
  std::string ps;
  r.Get(doc, "ps_kind", "", ps);
  if (!ps.empty()) r.Parse("ps_kind", [&] { cfg.ps_kind = ParsePropensityKind(ps); });

  cfg.placebo.ps_kind = cfg.ps_kind;
  cfg.placebo.latent_error = DefaultLatentError(cfg.ps_kind);
  if (doc.contains("placebo") && r.Object(doc.at("placebo"), "placebo")) {
    const json& pl = doc.at("placebo");
    r.Keys(pl, "placebo.", {"lambda", "ps_kind", "latent_error"});
    r.Get(pl, "lambda", "placebo.", cfg.placebo.lambda);
    std::string kind, latent;
    r.Get(pl, "ps_kind", "placebo.", kind);
    r.Get(pl, "latent_error", "placebo.", latent);
    if (!kind.empty()) {
      r.Parse("placebo.ps_kind", [&] {
        cfg.placebo.ps_kind = ParsePropensityKind(kind);
        cfg.placebo.latent_error = DefaultLatentError(cfg.placebo.ps_kind);
      });
    }
    if (!latent.empty()) {
      r.Parse("placebo.latent_error",
              [&] { cfg.placebo.latent_error = ParseLatentError(latent); });
    }
  }
  if (doc.contains("bandwidth_grid") && r.Object(doc.at("bandwidth_grid"), "bandwidth_grid")) {
    const json& g = doc.at("bandwidth_grid");
    r.Keys(g, "bandwidth_grid.", {"base", "factor", "count"});
    r.Get(g, "base", "bandwidth_grid.", cfg.grid.base);
    r.Get(g, "factor", "bandwidth_grid.", cfg.grid.factor);
    r.Get(g, "count", "bandwidth_grid.", cfg.grid.count);
  }
  r.GetOpt(doc, "bandwidth", "", cfg.bandwidth);
  if (doc.contains("sequential_schema")) {
    cfg.sequential_schema = ReadVariables(r, doc.at("sequential_schema"), "sequential_schema");
  }
  r.Get(doc, "seed", "", cfg.master_seed);
  r.Get(doc, "workers", "", cfg.workers);
  r.Get(doc, "output_dir", "", cfg.output_dir);
  r.Get(doc, "calibration_samples", "", cfg.calibration_samples);
  r.Get(doc, "failure_budget", "", cfg.failure_budget);
  r.Get(doc, "write_replicates", "", cfg.write_replicates);

  std::vector<std::string> errs = r.errs;
  if (errs.empty()) {
    cfg.Validate();
  } else {
    // Also run the semantic checks so every problem shows up in one pass.
    try {
      cfg.Validate();
    } catch (const Error& e) {
      std::istringstream lines(e.what());
      std::string line;
      std::getline(lines, line);  // header
      while (std::getline(lines, line)) errs.push_back(line.substr(line.find_first_not_of(' ')));
    }
    std::string msg = "invalid config:";
    for (const auto& e : errs) msg += "\n  " + e;
    Fail(ErrorKind::kValidation, msg);
  }
  return cfg;
}

RunConfig LoadConfig(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kIo, "cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ParseConfig(ss.str());
}

std::string ConfigToJson(const RunConfig& cfg) {
  json j;
  if (cfg.scenario) {
    const ScenarioSpec& s = *cfg.scenario;
    j["source"]["scenario"] = {
        {"id", static_cast<int>(s.id)},
        {"n", s.n},
        {"x_dist",
         {{"mean", s.x_dist.mean}, {"sd", s.x_dist.sd}, {"lower", s.x_dist.lower},
          {"upper", s.x_dist.upper}}},
        {"ps_intercept", s.ps_intercept},
        {"ps_slope", s.ps_slope},
        {"beta0", s.beta0},
        {"beta1", s.beta1},
        {"beta_x", s.beta_x},
        {"beta_interaction", s.beta_interaction},
        {"sigma0", s.sigma0},
        {"sigma1", s.sigma1}};
  }
  if (cfg.dataset) {
    const DatasetSource& d = *cfg.dataset;
    json covs = json::array();
    for (const auto& c : d.schema.covariates) {
      covs.push_back({{"name", c.name}, {"kind", VariableKindName(c.kind)}});
    }
    json ds = {{"path", d.path},
               {"outcome", d.schema.outcome},
               {"treatment", d.schema.treatment},
               {"covariates", covs},
               {"sequential_order", d.schema.sequential_order},
               {"truth_att", d.truth_att}};
    if (d.subsample_treated) {
      ds["subsample"] = {{"n_treated", *d.subsample_treated},
                         {"n_control", *d.subsample_control}};
    }
    j["source"]["dataset"] = ds;
  }
  j["n_samples"] = cfg.n_samples;
  j["n_reps"] = cfg.n_reps;
  j["truth_samples"] = cfg.TruthSamples();
  json designs = json::array();
  for (auto d : cfg.designs) designs.push_back(DesignName(d));
  j["designs"] = designs;
  json est = json::array();
  for (auto e : cfg.estimators) est.push_back(EstimatorName(e));
  j["estimators"] = est;
  j["ps_kind"] = PropensityKindName(cfg.ps_kind);
  j["placebo"] = {{"lambda", cfg.placebo.lambda},
                  {"ps_kind", PropensityKindName(cfg.placebo.ps_kind)},
                  {"latent_error", LatentErrorName(cfg.placebo.latent_error)}};
  j["bandwidth_grid"] = {
      {"base", cfg.grid.base}, {"factor", cfg.grid.factor}, {"count", cfg.grid.count}};
  j["bandwidth"] = cfg.bandwidth ? json(*cfg.bandwidth) : json(nullptr);
  json seq = json::array();
  for (const auto& v : cfg.sequential_schema) {
    seq.push_back({{"name", v.name}, {"kind", VariableKindName(v.kind)}});
  }
  j["sequential_schema"] = seq;
  j["seed"] = cfg.master_seed;
  j["calibration_samples"] = cfg.calibration_samples;
  j["failure_budget"] = cfg.failure_budget;
  j["write_replicates"] = cfg.write_replicates;
  return j.dump(2);
}

int ResolveWorkers(int configured) {
  if (const char* env = std::getenv("EMCS_BENCH_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<int>(v);
  }
  if (configured > 0) return configured;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace emcs
