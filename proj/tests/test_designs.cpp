#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "designs.hpp"
#include "error.hpp"
#include "estimators.hpp"
#include "metrics.hpp"
#include "oracles.hpp"
#include "rng.hpp"

using namespace emcs;

namespace {

Sample ScenarioSample(const ScenarioSpec& spec, std::uint64_t seed, std::uint64_t idx = 0) {
  RngStream r(seed, Purpose::kOriginalSample, idx);
  return GenerateScenarioSample(spec, r);
}

Sample Noiseless(int n, std::uint64_t seed) {
  auto spec = ScenarioSpec::Scenario1();
  spec.sigma0 = spec.sigma1 = 0.0;
  spec.n = n;
  return ScenarioSample(spec, seed);
}

double Correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double ma = a.mean(), mb = b.mean();
  const double cov = ((a.array() - ma) * (b.array() - mb)).sum();
  return cov / std::sqrt((a.array() - ma).square().sum() * (b.array() - mb).square().sum());
}

// Sample with named covariates.
Sample Named(const Eigen::VectorXd& y, const Eigen::VectorXd& d, const Eigen::MatrixXd& x,
             std::vector<std::string> names) {
  return Sample(y, d, x, std::move(names));
}

}  // namespace

TEST_CASE("design names round-trip") {
  for (auto k : {DesignKind::kPlacebo, DesignKind::kStructuredStylized,
                 DesignKind::kStructuredSequential, DesignKind::kBootstrap, DesignKind::kRandom}) {
    CHECK(ParseDesignKind(DesignName(k)) == k);
  }
  CHECK_THROWS_AS(ParseDesignKind("jackknife"), Error);
  CHECK(DefaultLatentError(PropensityKind::kLogit) == LatentError::kLogistic);
  CHECK(DefaultLatentError(PropensityKind::kLinearProbability) == LatentError::kUniformComplement);
}

TEST_CASE("placebo replicate structure") {
  const Sample original = ScenarioSample(ScenarioSpec::Scenario2(), 1);
  std::set<std::pair<double, double>> controls;
  for (auto i : original.ControlRows()) controls.insert({original.y()[i], original.x()(i, 0)});
  const auto k = std::llround(original.treated_fraction() * static_cast<double>(original.control_count()));

  for (auto kind : {PropensityKind::kLinearProbability, PropensityKind::kLogit}) {
    PlaceboConfig cfg{1.0, kind, DefaultLatentError(kind)};
    const PlaceboSetup setup = PreparePlacebo(original, cfg);
    for (int rep = 0; rep < 50; ++rep) {
      RngStream r(1, Purpose::kPlacebo, 0, static_cast<std::uint64_t>(rep));
      const auto rp = PlaceboReplicate(setup, r);
      CHECK(rp.sample.size() == original.control_count());
      CHECK(rp.sample.treated_count() == k);
      CHECK(rp.truth.att == 0.0);
      CHECK(rp.truth.provenance == TruthProvenance::kZeroByConstruction);
      for (Eigen::Index i = 0; i < rp.sample.size(); ++i) {
        REQUIRE(controls.count({rp.sample.y()[i], rp.sample.x()(i, 0)}) == 1);
      }
    }
  }
}

TEST_CASE("placebo selection strength") {
  auto spec = ScenarioSpec::Scenario1();
  spec.n = 300;
  const Sample original = ScenarioSample(spec, 2);
  std::vector<double> null_corr, strong_corr;
  const PlaceboSetup null_setup = PreparePlacebo(original, {0.0, PropensityKind::kLinearProbability, LatentError::kUniformComplement});
  const PlaceboSetup strong_setup = PreparePlacebo(original, {1.0, PropensityKind::kLinearProbability, LatentError::kUniformComplement});
  for (int rep = 0; rep < 10000; ++rep) {
    RngStream a(2, Purpose::kPlacebo, 0, static_cast<std::uint64_t>(rep));
    RngStream b(2, Purpose::kPlacebo, 1, static_cast<std::uint64_t>(rep));
    const auto r0 = PlaceboReplicate(null_setup, a);
    const auto r1 = PlaceboReplicate(strong_setup, b);
    null_corr.push_back(Correlation(r0.sample.d(), r0.sample.x().col(0)));
    strong_corr.push_back(Correlation(r1.sample.d(), r1.sample.x().col(0)));
  }
  CHECK(std::abs(oracle::Mean(null_corr)) <= 3 * oracle::Se(null_corr));
  CHECK(oracle::Mean(strong_corr) > 10 * oracle::Se(strong_corr));
}

TEST_CASE("placebo rejects a calibration that empties an arm") {
  // 1000 treated, 2 controls: k = round(1000/1002 * 2) = 2 = n0.
  const int n = 1002;
  Eigen::VectorXd y = Eigen::VectorXd::LinSpaced(n, 0, 1);
  Eigen::VectorXd d = Eigen::VectorXd::Ones(n);
  d[0] = d[1] = 0;
  Eigen::MatrixXd x = Eigen::VectorXd::LinSpaced(n, -1, 1);
  const Sample s(y, d, x);
  try {
    PreparePlacebo(s, {});
    FAIL("expected degenerate error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kDegenerateSample);
  }
}

TEST_CASE("structured stylized fit on noiseless data") {
  const Sample s = Noiseless(500, 3);
  const auto m = FitStructuredStylized(s);
  CHECK(m.delta0 == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(m.delta_d == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(m.delta_x == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(m.residual_var == kResidualVarianceFloor);
  CHECK(m.n1 == s.treated_count());
  CHECK(m.n0 == s.control_count());

  for (int rep = 0; rep < 20; ++rep) {
    RngStream r(3, Purpose::kStructuredStylized, 0, static_cast<std::uint64_t>(rep));
    const auto rp = StructuredReplicateStylized(m, r);
    CHECK(rp.truth.att == m.delta_d);
    CHECK(rp.truth.provenance == TruthProvenance::kModelCoefficient);
    CHECK(std::abs(EstimateOls(rp.sample).value - m.delta_d) <= 1e-6);
  }
}

TEST_CASE("structured stylized fit against closed forms") {
  const Sample s = ScenarioSample(ScenarioSpec::Scenario2(), 4);
  const auto m = FitStructuredStylized(s);
  std::vector<double> x1, x0;
  for (Eigen::Index i = 0; i < s.size(); ++i) (s.treated(i) ? x1 : x0).push_back(s.x()(i, 0));
  CHECK(m.x_mean[1] == doctest::Approx(oracle::Mean(x1)));
  CHECK(m.x_var[1] == doctest::Approx(oracle::Var(x1)));
  CHECK(m.x_mean[0] == doctest::Approx(oracle::Mean(x0)));
  CHECK(m.x_var[0] == doctest::Approx(oracle::Var(x0)));
  CHECK(m.x_support[1].lo == *std::min_element(x1.begin(), x1.end()));
  CHECK(m.x_support[0].hi == *std::max_element(x0.begin(), x0.end()));
  // One pooled variance although the arms differ (.25 vs 2.25).
  CHECK(m.residual_var > 0.5);
  CHECK(m.residual_var < 2.0);
}

namespace {

// Treated/control ratio of mean squared deviations from the model mean.
double ArmVarianceRatio(const StructuredStylizedModel& m, int reps, bool check_support) {
  double ss[2] = {0, 0}, cnt[2] = {0, 0};
  for (int rep = 0; rep < reps; ++rep) {
    RngStream r(5, Purpose::kStructuredStylized, 0, static_cast<std::uint64_t>(rep));
    const auto rp = StructuredReplicateStylized(m, r);
    REQUIRE(rp.sample.treated_count() == m.n1);
    REQUIRE(rp.sample.control_count() == m.n0);
    for (Eigen::Index i = 0; i < rp.sample.size(); ++i) {
      const int arm = rp.sample.treated(i) ? 1 : 0;
      const double xi = rp.sample.x()(i, 0);
      if (check_support) {
        REQUIRE(m.x_support[arm].Contains(xi));
        REQUIRE(m.y_support[arm].Contains(rp.sample.y()[i]));
      }
      const double resid = rp.sample.y()[i] - (m.delta0 + m.delta_d * arm + m.delta_x * xi);
      ss[arm] += resid * resid;
      cnt[arm] += 1;
    }
  }
  return (ss[1] / cnt[1]) / (ss[0] / cnt[0]);
}

}  // namespace

TEST_CASE("structured stylized replicates are homoskedastic across arms") {
  const Sample s = ScenarioSample(ScenarioSpec::Scenario2(), 5);
  const auto m = FitStructuredStylized(s);
  // With the source's 9:1 variance ratio, the fitted model uses one variance.
  // Outcome clipping to the narrow control support trims control noise a
  // little, so the clipped ratio sits slightly above 1.
  const double clipped = ArmVarianceRatio(m, 10000, true);
  INFO("clipped ratio = ", clipped);
  CHECK(clipped >= 0.9);
  CHECK(clipped <= 1.25);

  auto open = m;
  for (auto& iv : open.y_support) iv = {-1e300, 1e300};
  const double unclipped = ArmVarianceRatio(open, 10000, false);
  INFO("unclipped ratio = ", unclipped);
  CHECK(unclipped >= 0.9);
  CHECK(unclipped <= 1.1);
}

TEST_CASE("structured stylized ignores the interaction") {
  const Sample s = ScenarioSample(ScenarioSpec::Scenario3(), 6);
  const auto m = FitStructuredStylized(s);
  // The model carries one slope; replicates have parallel arms.
  RngStream r(6, Purpose::kStructuredStylized, 0, 0);
  const auto rp = StructuredReplicateStylized(m, r);
  CHECK(rp.truth.att == m.delta_d);
  Eigen::MatrixXd two(s.size(), 2);
  two << s.x(), s.x();
  CHECK_THROWS_AS(FitStructuredStylized(Sample(s.y(), s.d(), two)), Error);
}

TEST_CASE("sequential fit: independent binary covariate") {
  std::vector<double> slopes;
  for (int rep = 0; rep < 200; ++rep) {
    RngStream r(7, Purpose::kTest, static_cast<std::uint64_t>(rep));
    const int n = 400;
    Eigen::VectorXd y(n), d(n);
    Eigen::MatrixXd x(n, 2);
    for (int i = 0; i < n; ++i) {
      d[i] = i % 2;
      x(i, 0) = r.Normal();
      x(i, 1) = r.Uniform() < 0.4 ? 1 : 0;
      y[i] = x(i, 0) + r.Normal();
    }
    const auto m = FitStructuredSequential(Named(y, d, x, {"age", "married"}),
                                           {{"age", VariableKind::kContinuous},
                                            {"married", VariableKind::kBinary}});
    REQUIRE(m.conditionals.size() == 2);
    REQUIRE(m.conditionals[1].coefficients.size() == 3);  // [1, D, age]
    slopes.push_back(m.conditionals[1].coefficients[2]);
  }
  CHECK(std::abs(oracle::Mean(slopes)) <= 3 * oracle::Se(slopes));
}

TEST_CASE("sequential fit: outcome model exact on noiseless data") {
  RngStream r(8, Purpose::kTest, 0);
  const int n = 300;
  Eigen::VectorXd y(n), d(n);
  Eigen::MatrixXd x(n, 2);
  for (int i = 0; i < n; ++i) {
    d[i] = i % 3 == 0;
    x(i, 0) = r.Normal();
    x(i, 1) = r.Uniform() < 0.5 ? 1 : 0;
    y[i] = d[i] ? 1 + 2 * x(i, 0) - x(i, 1) : 0.5 - 0.3 * x(i, 0) + 0.7 * x(i, 1);
  }
  const auto m = FitStructuredSequential(Named(y, d, x, {"a", "b"}),
                                         {{"b", VariableKind::kBinary}, {"a", VariableKind::kContinuous}});
  CHECK((m.delta1 - Eigen::Vector3d(1, 2, -1)).norm() < 1e-10);
  CHECK((m.delta0 - Eigen::Vector3d(0.5, -0.3, 0.7)).norm() < 1e-10);
  CHECK(m.outcome_var[0] == kResidualVarianceFloor);
  // Schema order drives the conditionals; columns keep their place.
  CHECK(m.conditionals[0].column == 1);
  CHECK(m.conditionals[1].column == 0);

  for (int rep = 0; rep < 100; ++rep) {
    RngStream g(8, Purpose::kStructuredSequential, 0, static_cast<std::uint64_t>(rep));
    const auto rp = StructuredReplicateSequential(m, g);
    CHECK(rp.truth.provenance == TruthProvenance::kSattOfReplicate);
    // SATT oracle: mean over treated of [1,X](delta1 - delta0).
    double sum = 0;
    for (Eigen::Index i = 0; i < rp.sample.size(); ++i) {
      if (!rp.sample.treated(i)) continue;
      const double a = rp.sample.x()(i, 0), b = rp.sample.x()(i, 1);
      REQUIRE((b == 0.0 || b == 1.0));
      REQUIRE(m.conditionals[1].support[1].Contains(a));
      sum += (1 - 0.5) + (2 + 0.3) * a + (-1 - 0.7) * b;
    }
    CHECK(rp.truth.att == doctest::Approx(sum / static_cast<double>(rp.sample.treated_count())).epsilon(1e-9));
  }
}

TEST_CASE("sequential fit validation") {
  Eigen::VectorXd y = Eigen::VectorXd::LinSpaced(6, 0, 1);
  Eigen::VectorXd d(6);
  d << 1, 1, 1, 0, 0, 0;
  Eigen::MatrixXd x(6, 1);
  x << 0, 1, 2, 0, 1, 0;
  const Sample s = Named(y, d, x, {"kids"});
  CHECK_THROWS_AS(FitStructuredSequential(s, {{"kids", VariableKind::kBinary}}), Error);
  CHECK_THROWS_AS(FitStructuredSequential(s, {{"age", VariableKind::kContinuous}}), Error);
  CHECK_THROWS_AS(FitStructuredSequential(s, {}), Error);
}

TEST_CASE("sequential replicates reproduce covariate correlation") {
  RngStream r(9, Purpose::kTest, 0);
  const int n = 2000;
  Eigen::VectorXd y(n), d(n);
  Eigen::MatrixXd x(n, 2);
  for (int i = 0; i < n; ++i) {
    d[i] = r.Uniform() < 0.3;
    x(i, 0) = r.Normal();
    x(i, 1) = 0.9 * x(i, 0) + std::sqrt(1 - 0.81) * r.Normal();
    y[i] = x(i, 0) + x(i, 1) + d[i] + r.Normal();
  }
  const Sample s = Named(y, d, x, {"u", "v"});
  const double target = Correlation(x.col(0), x.col(1));
  const auto m = FitStructuredSequential(s, {{"u", VariableKind::kContinuous}, {"v", VariableKind::kContinuous}});
  double su = 0, sv = 0, suu = 0, svv = 0, suv = 0, cnt = 0;
  for (int rep = 0; rep < 10000; ++rep) {
    RngStream g(9, Purpose::kStructuredSequential, 0, static_cast<std::uint64_t>(rep));
    const auto rp = StructuredReplicateSequential(m, g);
    const double u = rp.sample.x()(rep % n, 0), v = rp.sample.x()(rep % n, 1);
    su += u; sv += v; suu += u * u; svv += v * v; suv += u * v; cnt += 1;
  }
  const double cov = suv / cnt - su * sv / cnt / cnt;
  const double corr = cov / std::sqrt((suu / cnt - su * su / cnt / cnt) * (svv / cnt - sv * sv / cnt / cnt));
  CHECK(std::abs(corr - target) < 0.05);
}

TEST_CASE("sequential: equal arm outcome models give zero truth") {
  RngStream r(10, Purpose::kTest, 0);
  const int n = 200;
  Eigen::VectorXd y(n), d(n);
  Eigen::MatrixXd x(n, 1);
  for (int i = 0; i < n; ++i) {
    d[i] = i % 2;
    x(i, 0) = r.Normal();
    y[i] = 1 + x(i, 0);
  }
  const auto m = FitStructuredSequential(Sample(y, d, x), {{"x", VariableKind::kContinuous}});
  for (int rep = 0; rep < 20; ++rep) {
    RngStream g(10, Purpose::kStructuredSequential, 0, static_cast<std::uint64_t>(rep));
    CHECK(std::abs(StructuredReplicateSequential(m, g).truth.att) < 1e-10);
  }
}

TEST_CASE("bootstrap replicates") {
  const Sample s = ScenarioSample(ScenarioSpec::Scenario1(), 11);
  std::vector<double> counts(static_cast<std::size_t>(s.size()), 0.0);
  // Tag rows through the outcome to count appearances.
  const Sample tagged = s.WithOutcome(Eigen::VectorXd::LinSpaced(s.size(), 0, static_cast<double>(s.size() - 1)));
  const int reps = 10000;
  for (int rep = 0; rep < reps; ++rep) {
    RngStream r(11, Purpose::kBootstrap, 0, static_cast<std::uint64_t>(rep));
    const Sample b = BootstrapReplicate(tagged, r);
    REQUIRE(b.size() == s.size());
    for (Eigen::Index i = 0; i < b.size(); ++i) counts[static_cast<std::size_t>(b.y()[i])] += 1;
  }
  // Each row's mean count is 1 with variance (1 - 1/n)/reps.
  const double se = std::sqrt((1 - 1.0 / static_cast<double>(s.size())) / reps);
  int outside = 0;
  for (double c : counts) outside += std::abs(c / reps - 1) > 3 * se ? 1 : 0;
  CHECK(outside <= static_cast<int>(0.01 * static_cast<double>(s.size())));  // ~0.27% expected

  // One unique row per arm, duplicated.
  Eigen::VectorXd y(40), d(40);
  Eigen::MatrixXd x(40, 1);
  for (int i = 0; i < 40; ++i) {
    d[i] = i % 2;
    y[i] = d[i] ? 5 : 2;
    x(i, 0) = d[i] ? 1 : 0;
  }
  const Sample dup(y, d, x);
  RngStream r(11, Purpose::kBootstrap, 1, 0);
  const Sample b = BootstrapReplicate(dup, r);
  CHECK(EstimateIpw(b, PropensityKind::kLogit).value == doctest::Approx(3.0));
  CHECK(EstimateNnMatching(b, PropensityKind::kLogit).value == doctest::Approx(3.0));
}

TEST_CASE("random rankings") {
  std::vector<int> first(7, 0);
  RngStream r(12, Purpose::kRandomRanking, 0);
  const int draws = 100000;
  std::vector<double> taus;
  std::vector<int> fixed{3, 1, 4, 0, 6, 2, 5};
  for (int i = 0; i < draws; ++i) {
    const auto perm = RandomRanking(7, r);
    ++first[static_cast<std::size_t>(perm.front())];
    taus.push_back(KendallsTau(fixed, perm));
  }
  const double p = 1.0 / 7, se = std::sqrt(p * (1 - p) / draws);
  for (int c : first) CHECK(std::abs(c / static_cast<double>(draws) - p) <= 3 * se);
  CHECK(std::abs(oracle::Mean(taus)) <= 3 * oracle::Se(taus));

  int identity = 0;
  for (int i = 0; i < draws; ++i) identity += RandomRanking(2, r).front() == 0 ? 1 : 0;
  CHECK(std::abs(identity / static_cast<double>(draws) - 0.5) <= 3 * std::sqrt(0.25 / draws));
  CHECK_THROWS_AS(RandomRanking(1, r), Error);
}

TEST_CASE("designs are deterministic under fixed paths") {
  const Sample s = ScenarioSample(ScenarioSpec::Scenario2(), 13);
  const auto setup = PreparePlacebo(s, {});
  const auto model = FitStructuredStylized(s);
  RngStream a(13, Purpose::kPlacebo, 0, 4), b(13, Purpose::kPlacebo, 0, 4);
  CHECK(PlaceboReplicate(setup, a).sample.d() == PlaceboReplicate(setup, b).sample.d());
  RngStream c(13, Purpose::kStructuredStylized, 0, 4), e(13, Purpose::kStructuredStylized, 0, 4);
  CHECK(StructuredReplicateStylized(model, c).sample.y() == StructuredReplicateStylized(model, e).sample.y());
  RngStream f(13, Purpose::kBootstrap, 0, 4), g(13, Purpose::kBootstrap, 0, 4);
  CHECK(BootstrapReplicate(s, f).y() == BootstrapReplicate(s, g).y());
}
