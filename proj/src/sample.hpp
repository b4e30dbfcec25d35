#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rng.hpp"

namespace emcs {

// One dataset: outcome, binary treatment, covariates (n x d_x).
// Construction enforces at least two units per arm and finite entries.
class Sample {
 public:
  Sample(Eigen::VectorXd y, Eigen::VectorXd d, Eigen::MatrixXd x,
         std::vector<std::string> covariate_names = {});

  Eigen::Index size() const { return y_.size(); }
  Eigen::Index covariate_count() const { return x_.cols(); }
  Eigen::Index treated_count() const { return n_treated_; }
  Eigen::Index control_count() const { return size() - n_treated_; }

  const Eigen::VectorXd& y() const { return y_; }
  const Eigen::VectorXd& d() const { return d_; }
  const Eigen::MatrixXd& x() const { return x_; }
  const std::vector<std::string>& covariate_names() const { return names_; }

  bool treated(Eigen::Index i) const { return d_[i] != 0.0; }
  double treated_fraction() const {
    return static_cast<double>(n_treated_) / static_cast<double>(size());
  }

  // Row indices of each arm in ascending order.
  std::vector<Eigen::Index> TreatedRows() const;
  std::vector<Eigen::Index> ControlRows() const;

  // New sample built from the listed rows (repeats allowed).
  Sample Rows(const std::vector<Eigen::Index>& rows) const;
  Sample WithOutcome(Eigen::VectorXd y) const;

 private:
  Eigen::VectorXd y_;
  Eigen::VectorXd d_;
  Eigen::MatrixXd x_;
  std::vector<std::string> names_;
  Eigen::Index n_treated_ = 0;
};

enum class TruthProvenance {
  kAnalytic,
  kSimulatedMean,
  kZeroByConstruction,
  kModelCoefficient,
  kSattOfReplicate,
  kUserSupplied,
  kCentredOnPointEstimates,
};

const char* ProvenanceName(TruthProvenance p);

struct TruthValue {
  double att = 0.0;
  TruthProvenance provenance = TruthProvenance::kAnalytic;
};

struct TruncatedNormalSpec {
  double mean = 0.0;
  double sd = 1.0;
  double lower = -1.0;
  double upper = 1.0;

  void Validate() const;
};

double DrawTruncatedNormal(const TruncatedNormalSpec& spec, RngStream& rng);

// Mean of the truncated normal, closed form.
double TruncatedNormalMean(const TruncatedNormalSpec& spec);

enum class ScenarioId { kS1 = 1, kS2 = 2, kS3 = 3 };

// Stylized scalar-covariate DGP:
//   X ~ truncated normal, D = 1[ps_intercept + ps_slope*X > U],
//   Y = beta0 + beta1*D + beta_x*X + beta_interaction*X*D + sigma_D * eps.
struct ScenarioSpec {
  ScenarioId id = ScenarioId::kS2;
  int n = 1000;
  TruncatedNormalSpec x_dist{0.0, 1.0, -4.0, 6.0};
  double ps_intercept = 0.4;
  double ps_slope = 0.1;
  double beta0 = 3.0;
  double beta1 = 0.5;
  double beta_x = 0.5;
  double beta_interaction = 0.0;
  double sigma0 = 0.5;
  double sigma1 = 1.5;

  double Propensity(double x) const { return ps_intercept + ps_slope * x; }

  // Throws kValidation listing every violated invariant.
  void Validate() const;

  static ScenarioSpec Scenario1();
  static ScenarioSpec Scenario2();
  static ScenarioSpec Scenario3();
  static ScenarioSpec ById(ScenarioId id);
};

Sample GenerateScenarioSample(const ScenarioSpec& spec, RngStream& rng);

inline constexpr int kDefaultCalibrationSamples = 1000;

TruthValue ScenarioTrueAtt(const ScenarioSpec& spec, int n_calibration_samples,
                           RngStream& rng);

// Draws without replacement within each arm.
Sample Subsample(const Sample& population, Eigen::Index n_treated,
                 Eigen::Index n_control, RngStream& rng);

}  // namespace emcs
