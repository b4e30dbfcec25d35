#include "sample.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

#include "error.hpp"
#include "normal.hpp"

namespace emcs {

Sample::Sample(Eigen::VectorXd y, Eigen::VectorXd d, Eigen::MatrixXd x,
               std::vector<std::string> covariate_names)
    : y_(std::move(y)), d_(std::move(d)), x_(std::move(x)),
      names_(std::move(covariate_names)) {
  if (d_.size() != y_.size() || x_.rows() != y_.size()) {
    Fail(ErrorKind::kInvalidArgument, "sample: y, d and x row counts differ");
  }
  if (!names_.empty() && static_cast<Eigen::Index>(names_.size()) != x_.cols()) {
    Fail(ErrorKind::kInvalidArgument, "sample: covariate name count mismatch");
  }
  if (names_.empty()) {
    for (Eigen::Index j = 0; j < x_.cols(); ++j) {
      names_.push_back(x_.cols() == 1 ? "x" : "x" + std::to_string(j + 1));
    }
  }
  for (Eigen::Index i = 0; i < d_.size(); ++i) {
    if (d_[i] != 0.0 && d_[i] != 1.0) {
      Fail(ErrorKind::kInvalidArgument,
           "sample: treatment must be 0/1 (row " + std::to_string(i) + ")");
    }
    n_treated_ += d_[i] == 1.0 ? 1 : 0;
  }
  if (!y_.allFinite() || !x_.allFinite()) {
    Fail(ErrorKind::kInvalidArgument, "sample: non-finite entries");
  }
  if (n_treated_ < 2 || size() - n_treated_ < 2) {
    Fail(ErrorKind::kDegenerateSample,
         "sample: need at least 2 treated and 2 control units (have " +
             std::to_string(n_treated_) + " treated, " +
             std::to_string(size() - n_treated_) + " control)");
  }
}

std::vector<Eigen::Index> Sample::TreatedRows() const {
  std::vector<Eigen::Index> rows;
  rows.reserve(static_cast<std::size_t>(n_treated_));
  for (Eigen::Index i = 0; i < size(); ++i) {
    if (treated(i)) rows.push_back(i);
  }
  return rows;
}

std::vector<Eigen::Index> Sample::ControlRows() const {
  std::vector<Eigen::Index> rows;
  rows.reserve(static_cast<std::size_t>(control_count()));
  for (Eigen::Index i = 0; i < size(); ++i) {
    if (!treated(i)) rows.push_back(i);
  }
  return rows;
}

Sample Sample::Rows(const std::vector<Eigen::Index>& rows) const {
  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::VectorXd y(n), d(n);
  Eigen::MatrixXd x(n, x_.cols());
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index i = rows[static_cast<std::size_t>(k)];
    y[k] = y_[i];
    d[k] = d_[i];
    x.row(k) = x_.row(i);
  }
  return Sample(std::move(y), std::move(d), std::move(x), names_);
}

Sample Sample::WithOutcome(Eigen::VectorXd y) const {
  return Sample(std::move(y), d_, x_, names_);
}

const char* ProvenanceName(TruthProvenance p) {
  switch (p) {
    case TruthProvenance::kAnalytic: return "analytic";
    case TruthProvenance::kSimulatedMean: return "simulated_mean";
    case TruthProvenance::kZeroByConstruction: return "zero_by_construction";
    case TruthProvenance::kModelCoefficient: return "model_coefficient";
    case TruthProvenance::kSattOfReplicate: return "satt_of_replicate";
    case TruthProvenance::kUserSupplied: return "user_supplied";
    case TruthProvenance::kCentredOnPointEstimates:
      return "centred_on_point_estimates";
  }
  return "unknown";
}

void TruncatedNormalSpec::Validate() const {
  if (!(sd > 0.0) || !std::isfinite(sd) || !std::isfinite(mean)) {
    Fail(ErrorKind::kValidation, "truncated normal: sd must be finite and > 0");
  }
  if (!(lower < upper)) {
    Fail(ErrorKind::kValidation, "truncated normal: lower must be < upper");
  }
}

double DrawTruncatedNormal(const TruncatedNormalSpec& spec, RngStream& rng) {
  const double a = (spec.lower - spec.mean) / spec.sd;
  const double b = (spec.upper - spec.mean) / spec.sd;
  const double u = rng.Uniform();
  double z;
  if (a >= 0.0) {
    // Whole interval in the upper tail: work with survival probabilities.
    const double sa = NormalSf(a);
    const double sb = NormalSf(b);
    z = -NormalQuantile(sa - u * (sa - sb));
  } else {
    const double fa = NormalCdf(a);
    const double fb = NormalCdf(b);
    z = NormalQuantile(fa + u * (fb - fa));
  }
  z = std::clamp(z, a, b);
  return std::clamp(spec.mean + spec.sd * z, spec.lower, spec.upper);
}

double TruncatedNormalMean(const TruncatedNormalSpec& spec) {
  const double a = (spec.lower - spec.mean) / spec.sd;
  const double b = (spec.upper - spec.mean) / spec.sd;
  const double mass = a >= 0.0 ? NormalSf(a) - NormalSf(b)
                               : NormalCdf(b) - NormalCdf(a);
  return spec.mean + spec.sd * (NormalPdf(a) - NormalPdf(b)) / mass;
}

void ScenarioSpec::Validate() const {
  std::ostringstream problems;
  auto note = [&](const std::string& msg) { problems << "\n  - " << msg; };
  if (n < 4) note("n must be at least 4");
  if (!(x_dist.sd > 0.0)) note("x_dist.sd must be > 0");
  if (!(x_dist.lower < x_dist.upper)) note("x_dist.lower must be < upper");
  if (!(sigma0 >= 0.0) || !(sigma1 >= 0.0)) note("error SDs must be >= 0");
  // The support endpoints may touch 0 or 1 (the stylized design has
  // e(-4) = 0 and e(6) = 1); the interior must be strictly inside.
  constexpr double kSlack = 1e-12;
  const double e_lo = Propensity(x_dist.lower);
  const double e_hi = Propensity(x_dist.upper);
  const double e_mid = Propensity(0.5 * (x_dist.lower + x_dist.upper));
  if (e_lo < -kSlack || e_lo > 1.0 + kSlack || e_hi < -kSlack ||
      e_hi > 1.0 + kSlack || !(e_mid > 0.0 && e_mid < 1.0) ||
      (ps_slope == 0.0 && !(ps_intercept > 0.0 && ps_intercept < 1.0))) {
    note("propensity ps_intercept + ps_slope*x must lie in (0,1) on the covariate support");
  }
  switch (id) {
    case ScenarioId::kS1:
      if (sigma0 != sigma1) note("S1 requires sigma0 == sigma1");
      if (beta_interaction != 0.0) note("S1 requires beta_interaction == 0");
      break;
    case ScenarioId::kS2:
      if (sigma0 == sigma1) note("S2 requires sigma1 != sigma0");
      if (beta_interaction != 0.0) note("S2 requires beta_interaction == 0");
      break;
    case ScenarioId::kS3:
      if (sigma0 != sigma1) note("S3 requires sigma0 == sigma1");
      if (beta_interaction == 0.0) note("S3 requires beta_interaction != 0");
      break;
  }
  const std::string text = problems.str();
  if (!text.empty()) Fail(ErrorKind::kValidation, "invalid scenario spec:" + text);
}

ScenarioSpec ScenarioSpec::Scenario1() {
  ScenarioSpec s;
  s.id = ScenarioId::kS1;
  s.sigma0 = 0.5;
  s.sigma1 = 0.5;
  return s;
}

ScenarioSpec ScenarioSpec::Scenario2() { return ScenarioSpec{}; }

ScenarioSpec ScenarioSpec::Scenario3() {
  ScenarioSpec s;
  s.id = ScenarioId::kS3;
  s.sigma0 = 0.5;
  s.sigma1 = 0.5;
  s.beta_interaction = 0.5;
  return s;
}

ScenarioSpec ScenarioSpec::ById(ScenarioId id) {
  switch (id) {
    case ScenarioId::kS1: return Scenario1();
    case ScenarioId::kS2: return Scenario2();
    case ScenarioId::kS3: return Scenario3();
  }
  Fail(ErrorKind::kInvalidArgument, "unknown scenario id");
}

namespace {

constexpr int kMaxRegenerations = 100;

}  // namespace

Sample GenerateScenarioSample(const ScenarioSpec& spec, RngStream& rng) {
  spec.Validate();
  const Eigen::Index n = spec.n;
  Eigen::VectorXd y(n), d(n);
  Eigen::MatrixXd x(n, 1);
  for (int attempt = 0; attempt <= kMaxRegenerations; ++attempt) {
    Eigen::Index treated = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double xi = DrawTruncatedNormal(spec.x_dist, rng);
      const double u = rng.Uniform();
      const double di = spec.Propensity(xi) > u ? 1.0 : 0.0;
      const double sigma = di == 1.0 ? spec.sigma1 : spec.sigma0;
      const double eps = sigma * rng.Normal();
      x(i, 0) = xi;
      d[i] = di;
      y[i] = spec.beta0 + spec.beta1 * di + spec.beta_x * xi +
             spec.beta_interaction * xi * di + eps;
      treated += di == 1.0 ? 1 : 0;
    }
    if (treated >= 2 && n - treated >= 2) return Sample(y, d, x);
  }
  Fail(ErrorKind::kDegenerateSample,
       "scenario sample: degenerate treatment arm after " +
           std::to_string(kMaxRegenerations) + " regenerations");
}

TruthValue ScenarioTrueAtt(const ScenarioSpec& spec, int n_calibration_samples,
                           RngStream& rng) {
  if (spec.beta_interaction == 0.0) {
    return {spec.beta1, TruthProvenance::kAnalytic};
  }
  if (n_calibration_samples < 1) {
    Fail(ErrorKind::kInvalidArgument, "calibration sample count must be >= 1");
  }
  double sum_x = 0.0;
  double count = 0.0;
  for (int s = 0; s < n_calibration_samples; ++s) {
    RngStream child = rng.Child(static_cast<std::uint64_t>(s));
    const Sample sample = GenerateScenarioSample(spec, child);
    for (Eigen::Index i = 0; i < sample.size(); ++i) {
      if (sample.treated(i)) {
        sum_x += sample.x()(i, 0);
        count += 1.0;
      }
    }
  }
  return {spec.beta1 + spec.beta_interaction * (sum_x / count),
          TruthProvenance::kSimulatedMean};
}

namespace {

// First `k` entries of a partial Fisher-Yates shuffle.
std::vector<Eigen::Index> DrawWithoutReplacement(std::vector<Eigen::Index> pool,
                                                 Eigen::Index k,
                                                 RngStream& rng) {
  const auto m = pool.size();
  for (std::size_t i = 0; i < static_cast<std::size_t>(k); ++i) {
    const auto j = i + static_cast<std::size_t>(rng.Index(m - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(static_cast<std::size_t>(k));
  return pool;
}

}  // namespace

Sample Subsample(const Sample& population, Eigen::Index n_treated,
                 Eigen::Index n_control, RngStream& rng) {
  if (n_treated > population.treated_count() ||
      n_control > population.control_count()) {
    Fail(ErrorKind::kInsufficientUnits,
         "subsample: requested " + std::to_string(n_treated) + " treated / " +
             std::to_string(n_control) + " control but population has " +
             std::to_string(population.treated_count()) + " / " +
             std::to_string(population.control_count()));
  }
  if (n_treated < 0 || n_control < 0) {
    Fail(ErrorKind::kInvalidArgument, "subsample: negative arm size");
  }
  auto rows = DrawWithoutReplacement(population.TreatedRows(), n_treated, rng);
  auto controls = DrawWithoutReplacement(population.ControlRows(), n_control, rng);
  rows.insert(rows.end(), controls.begin(), controls.end());
  return population.Rows(rows);
}

}  // namespace emcs
