#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "error.hpp"
#include "least_squares.hpp"
#include "oracles.hpp"
#include "rng.hpp"
#include "sample.hpp"

using namespace emcs;

namespace {

ErrorKind KindOf(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an emcs::Error");
  return ErrorKind::kInvalidArgument;
}

}  // namespace

TEST_CASE("rng streams are a pure function of seed and path") {
  RngStream a(42, Purpose::kPlacebo, 3, 7);
  RngStream b(42, Purpose::kPlacebo, 3, 7);
  for (int i = 0; i < 1000; ++i) CHECK(a.Next() == b.Next());

  RngStream c(42, Purpose::kPlacebo, 3, 8);
  RngStream d(43, Purpose::kPlacebo, 3, 7);
  RngStream e(42, Purpose::kBootstrap, 3, 7);
  RngStream ref(42, Purpose::kPlacebo, 3, 7);
  const auto first = ref.Next();
  CHECK(c.Next() != first);
  CHECK(d.Next() != first);
  CHECK(e.Next() != first);
}

TEST_CASE("child streams do not consume the parent") {
  RngStream a(1, Purpose::kTest, 0);
  RngStream b(1, Purpose::kTest, 0);
  RngStream child = a.Child(5);
  (void)child.Next();
  CHECK(a.Next() == b.Next());
  CHECK(a.Child(5).path() == std::vector<std::uint64_t>{99, 0, 0, 5});
}

TEST_CASE("distinct paths look independent") {
  // Correlation between paired uniforms of neighbouring paths.
  const int n = 200000;
  RngStream a(7, Purpose::kTest, 0);
  RngStream b(7, Purpose::kTest, 1);
  double sab = 0, sa = 0, sb = 0, saa = 0, sbb = 0;
  for (int i = 0; i < n; ++i) {
    const double u = a.Uniform(), v = b.Uniform();
    sa += u; sb += v; sab += u * v; saa += u * u; sbb += v * v;
  }
  const double cov = sab / n - (sa / n) * (sb / n);
  const double corr = cov / std::sqrt((saa / n - sa * sa / n / n) * (sbb / n - sb * sb / n / n));
  CHECK(std::abs(corr) < 4.0 / std::sqrt(n));
}

TEST_CASE("uniform, normal, logistic and index draws") {
  RngStream r(11, Purpose::kTest, 2);
  std::vector<double> u, z, l;
  for (int i = 0; i < 200000; ++i) {
    u.push_back(r.Uniform());
    z.push_back(r.Normal());
    l.push_back(r.Logistic());
  }
  CHECK(*std::min_element(u.begin(), u.end()) > 0.0);
  CHECK(*std::max_element(u.begin(), u.end()) < 1.0);
  CHECK(std::abs(oracle::Mean(u) - 0.5) < 4 * oracle::Se(u));
  CHECK(std::abs(oracle::Mean(z)) < 4 * oracle::Se(z));
  CHECK(oracle::Var(z) == doctest::Approx(1.0).epsilon(0.02));
  CHECK(oracle::Var(l) == doctest::Approx(std::numbers::pi * std::numbers::pi / 3).epsilon(0.03));

  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[static_cast<std::size_t>(r.Index(7))];
  for (int c : counts) CHECK(std::abs(c - 10000) < 4 * std::sqrt(10000 * 6.0 / 7.0));
}

TEST_CASE("truncated normal with negligible truncation") {
  RngStream r(1, Purpose::kTest, 10);
  const TruncatedNormalSpec spec{0, 1, -38, 38};
  std::vector<double> v;
  for (int i = 0; i < 1000000; ++i) v.push_back(DrawTruncatedNormal(spec, r));
  CHECK(std::abs(oracle::Mean(v)) < 4e-3);
  CHECK(std::abs(oracle::Var(v) - 1.0) < 0.01);
}

TEST_CASE("half-normal mean") {
  RngStream r(1, Purpose::kTest, 11);
  const TruncatedNormalSpec spec{0, 1, 0, 8};
  std::vector<double> v;
  for (int i = 0; i < 1000000; ++i) v.push_back(DrawTruncatedNormal(spec, r));
  const double expected = oracle::Pdf(0) / (1 - oracle::Cdf(0));
  CHECK(expected == doctest::Approx(std::sqrt(2 / std::numbers::pi)));
  CHECK(std::abs(oracle::Mean(v) - expected) < 0.01 * expected);
  CHECK(*std::min_element(v.begin(), v.end()) >= 0.0);
  CHECK(TruncatedNormalMean(spec) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("scenario covariates stay inside the truncation bounds") {
  RngStream r(1, Purpose::kTest, 12);
  const TruncatedNormalSpec spec{0, 1, -4, 6};
  double lo = 1e9, hi = -1e9;
  for (int i = 0; i < 500000; ++i) {
    const double x = DrawTruncatedNormal(spec, r);
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  CHECK(lo >= -4.0);
  CHECK(hi <= 6.0);
  // Far tails: an interval entirely above the mean, and one far below.
  const TruncatedNormalSpec upper{0, 1, 5, 6};
  const TruncatedNormalSpec lower{0, 1, -9, -8};
  for (int i = 0; i < 10000; ++i) {
    const double a = DrawTruncatedNormal(upper, r);
    const double b = DrawTruncatedNormal(lower, r);
    REQUIRE(a >= 5.0);
    REQUIRE(a <= 6.0);
    REQUIRE(b >= -9.0);
    REQUIRE(b <= -8.0);
  }
  CHECK(TruncatedNormalMean(upper) == doctest::Approx(oracle::TruncatedMean(5, 6)).epsilon(1e-9));
}

TEST_CASE("scenario sample treated fraction matches the integrated propensity") {
  const auto spec = ScenarioSpec::Scenario2();
  const double p = 0.4 + 0.1 * oracle::TruncatedMean(-4, 6);
  std::vector<double> fractions;
  for (int s = 0; s < 500; ++s) {
    RngStream r(2024, Purpose::kOriginalSample, static_cast<std::uint64_t>(s));
    fractions.push_back(GenerateScenarioSample(spec, r).treated_fraction());
  }
  CHECK(std::abs(oracle::Mean(fractions) - p) < 0.01);
  CHECK(std::abs(oracle::Mean(fractions) - p) < 3 * oracle::Se(fractions));
}

TEST_CASE("treated fraction consistency holds for every scenario") {
  const double p = 0.4 + 0.1 * oracle::TruncatedMean(-4, 6);
  for (auto id : {ScenarioId::kS1, ScenarioId::kS2, ScenarioId::kS3}) {
    std::vector<double> fractions;
    for (int s = 0; s < 200; ++s) {
      RngStream r(5, Purpose::kOriginalSample, static_cast<std::uint64_t>(s));
      fractions.push_back(GenerateScenarioSample(ScenarioSpec::ById(id), r).treated_fraction());
    }
    CHECK(std::abs(oracle::Mean(fractions) - p) < 3 * oracle::Se(fractions));
  }
}

TEST_CASE("noiseless scenario data recovers the coefficients") {
  auto spec = ScenarioSpec::Scenario1();
  spec.sigma0 = spec.sigma1 = 0.0;
  RngStream r(3, Purpose::kTest, 0);
  const Sample s = GenerateScenarioSample(spec, r);
  Eigen::MatrixXd design(s.size(), 3);
  design << Eigen::VectorXd::Ones(s.size()), s.d(), s.x();
  const Eigen::VectorXd b = SolveLeastSquares(design, s.y());
  CHECK(b[0] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(b[1] == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(b[2] == doctest::Approx(0.5).epsilon(1e-10));
}

TEST_CASE("scenario 2 residual variances by arm") {
  const auto spec = ScenarioSpec::Scenario2();
  std::vector<double> r1, r0;
  for (int s = 0; s < 100; ++s) {
    RngStream r(9, Purpose::kOriginalSample, static_cast<std::uint64_t>(s));
    const Sample smp = GenerateScenarioSample(spec, r);
    for (Eigen::Index i = 0; i < smp.size(); ++i) {
      const double mean = 3 + 0.5 * smp.d()[i] + 0.5 * smp.x()(i, 0);
      (smp.treated(i) ? r1 : r0).push_back(smp.y()[i] - mean);
    }
  }
  CHECK(std::abs(oracle::Var(r1) / 2.25 - 1) < 0.05);
  CHECK(std::abs(oracle::Var(r0) / 0.25 - 1) < 0.05);
}

TEST_CASE("scenario 3 sample estimand uses the treated covariate mean") {
  const auto spec = ScenarioSpec::Scenario3();
  RngStream r(4, Purpose::kOriginalSample, 0);
  const Sample s = GenerateScenarioSample(spec, r);
  // Noise-free unit effects are .5 + .5 x for every treated unit.
  double sum = 0;
  for (auto i : s.TreatedRows()) sum += 0.5 + 0.5 * s.x()(i, 0);
  const double satt = sum / static_cast<double>(s.treated_count());
  double mean_x = 0;
  for (auto i : s.TreatedRows()) mean_x += s.x()(i, 0);
  mean_x /= static_cast<double>(s.treated_count());
  CHECK(satt == doctest::Approx(0.5 + 0.5 * mean_x));
}

TEST_CASE("scenario truths") {
  RngStream r(1, Purpose::kTruthCalibration, 0);
  const auto t2 = ScenarioTrueAtt(ScenarioSpec::Scenario2(), 1000, r);
  CHECK(t2.att == 0.5);
  CHECK(t2.provenance == TruthProvenance::kAnalytic);

  const auto t3 = ScenarioTrueAtt(ScenarioSpec::Scenario3(), 1000, r);
  CHECK(std::abs(t3.att - 0.625) <= 0.01);
  CHECK(t3.provenance == TruthProvenance::kSimulatedMean);
  // Population value: E[X|D=1] = E[X e(X)] / E[e(X)].
  const double z = oracle::Cdf(6) - oracle::Cdf(-4);
  auto f = [&](double x) { return oracle::Pdf(x) / z; };
  const double ex_e = oracle::Simpson([&](double x) { return x * (0.4 + 0.1 * x) * f(x); }, -4, 6);
  const double e_e = oracle::Simpson([&](double x) { return (0.4 + 0.1 * x) * f(x); }, -4, 6);
  CHECK(std::abs(t3.att - (0.5 + 0.5 * ex_e / e_e)) < 0.003);

  auto zero = ScenarioSpec::Scenario1();
  zero.beta1 = 0.0;
  CHECK(ScenarioTrueAtt(zero, 10, r).att == 0.0);
}

TEST_CASE("scenario spec validation") {
  auto bad = ScenarioSpec::Scenario2();
  bad.ps_slope = 0.3;  // e(6) = 2.2
  CHECK(KindOf([&] { bad.Validate(); }) == ErrorKind::kValidation);

  auto s1 = ScenarioSpec::Scenario1();
  s1.sigma1 = 1.0;
  s1.beta_interaction = 0.2;
  try {
    s1.Validate();
    FAIL("expected validation error");
  } catch (const Error& e) {
    const std::string what = e.what();
    CHECK(what.find("sigma0 == sigma1") != std::string::npos);
    CHECK(what.find("beta_interaction == 0") != std::string::npos);
  }
  auto s3 = ScenarioSpec::Scenario3();
  s3.beta_interaction = 0.0;
  CHECK(KindOf([&] { s3.Validate(); }) == ErrorKind::kValidation);
  CHECK_NOTHROW(ScenarioSpec::Scenario1().Validate());
  CHECK_NOTHROW(ScenarioSpec::Scenario2().Validate());
  CHECK_NOTHROW(ScenarioSpec::Scenario3().Validate());
}

TEST_CASE("sample invariants") {
  Eigen::VectorXd y(4), d(4);
  Eigen::MatrixXd x(4, 1);
  y << 1, 2, 3, 4;
  x << 0, 1, 2, 3;
  d << 1, 0, 0, 0;
  CHECK(KindOf([&] { Sample(y, d, x); }) == ErrorKind::kDegenerateSample);
  d << 1, 1, 1, 1;
  CHECK(KindOf([&] { Sample(y, d, x); }) == ErrorKind::kDegenerateSample);
  d << 1, 2, 0, 0;
  CHECK(KindOf([&] { Sample(y, d, x); }) == ErrorKind::kInvalidArgument);
  d << 1, 1, 0, 0;
  y[2] = std::nan("");
  CHECK(KindOf([&] { Sample(y, d, x); }) == ErrorKind::kInvalidArgument);
}

TEST_CASE("subsample within arms") {
  ScenarioSpec spec = ScenarioSpec::Scenario1();
  spec.n = 2000;
  RngStream g(1, Purpose::kOriginalSample, 0);
  Sample pop = GenerateScenarioSample(spec, g);
  // Build a population with exactly 185 treated and 1900+ controls.
  std::vector<Eigen::Index> rows;
  auto treated = pop.TreatedRows();
  auto controls = pop.ControlRows();
  REQUIRE(treated.size() >= 185);
  REQUIRE(controls.size() >= 1100);
  rows.assign(treated.begin(), treated.begin() + 185);
  for (int rep = 0; rep < 2; ++rep) rows.insert(rows.end(), controls.begin(), controls.begin() + 1000);
  const Sample population = pop.Rows(rows);

  RngStream r(1, Purpose::kSubsample, 0);
  const Sample sub = Subsample(population, 100, 1900, r);
  CHECK(sub.treated_count() == 100);
  CHECK(sub.control_count() == 1900);
  CHECK(sub.covariate_count() == 1);

  RngStream r2(1, Purpose::kSubsample, 1);
  const Sample full = Subsample(population, 185, 2000, r2);
  std::multiset<std::pair<double, double>> a, b;
  for (Eigen::Index i = 0; i < population.size(); ++i) a.insert({population.y()[i], population.x()(i, 0)});
  for (Eigen::Index i = 0; i < full.size(); ++i) b.insert({full.y()[i], full.x()(i, 0)});
  CHECK(a == b);

  RngStream r3(1, Purpose::kSubsample, 2);
  CHECK(KindOf([&] { Subsample(population, 186, 10, r3); }) == ErrorKind::kInsufficientUnits);
}

TEST_CASE("generation is deterministic for a fixed path") {
  const auto spec = ScenarioSpec::Scenario2();
  RngStream a(77, Purpose::kOriginalSample, 4);
  RngStream b(77, Purpose::kOriginalSample, 4);
  const Sample s1 = GenerateScenarioSample(spec, a);
  const Sample s2 = GenerateScenarioSample(spec, b);
  CHECK(s1.y() == s2.y());
  CHECK(s1.d() == s2.d());
  CHECK(s1.x() == s2.x());
}
