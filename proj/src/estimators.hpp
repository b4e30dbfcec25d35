#pragma once

#include <array>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "propensity.hpp"
#include "sample.hpp"

namespace emcs {

// Stable ordinals; rankings and report rows use this order.
enum class EstimatorId {
  kOls = 0,
  kOaxacaBlinder = 1,
  kIpw = 2,
  kIpwra = 3,
  kKernelMatch = 4,
  kNnMatch = 5,
  kNnMatchBiasAdj = 6,
};

inline constexpr int kEstimatorCount = 7;
inline constexpr std::array<EstimatorId, kEstimatorCount> kAllEstimators = {
    EstimatorId::kOls,         EstimatorId::kOaxacaBlinder, EstimatorId::kIpw,
    EstimatorId::kIpwra,       EstimatorId::kKernelMatch,   EstimatorId::kNnMatch,
    EstimatorId::kNnMatchBiasAdj};

const char* EstimatorName(EstimatorId id);
EstimatorId ParseEstimatorId(std::string_view name);
bool UsesPropensity(EstimatorId id);

enum class EstimateStatus { kOk, kDegenerateFallback };

struct Estimate {
  EstimatorId estimator = EstimatorId::kOls;
  double value = 0.0;
  std::optional<PropensityKind> ps_kind;
  std::optional<double> bandwidth;
  std::optional<Eigen::Index> n_matched;
  EstimateStatus status = EstimateStatus::kOk;
};

struct BandwidthGrid {
  double base = 0.005;
  double factor = 1.25;
  int count = 15;

  void Validate() const;
  // base * factor^(g-1), g = 1..count.
  std::vector<double> Values() const;
};

// Regression of Y on [1, D, X]; the coefficient on D.
Estimate EstimateOls(const Sample& sample);

// Control-arm regression of Y on [1, X], imputed onto the treated.
Estimate EstimateOaxacaBlinder(const Sample& sample);

// Hajek-normalized ATT weighting of controls by e/(1-e).
Estimate EstimateIpw(const Sample& sample, PropensityKind kind);
Estimate IpwFromScores(const Sample& sample, const Eigen::VectorXd& scores);

// Control regression on [1, X] weighted by e/(1-e); mean treated residual.
Estimate EstimateIpwra(const Sample& sample, PropensityKind kind);
// `outcome_covariates` replaces X in the outcome regression (zero columns
// gives an intercept-only model).
Estimate IpwraFromScores(const Sample& sample, const Eigen::VectorXd& scores,
                         const Eigen::MatrixXd& outcome_covariates);

// Leave-one-out CV over the grid for uniform-kernel regression of control
// outcomes on the propensity score. Ties go to the smallest bandwidth.
double SelectBandwidthLoocv(const Sample& sample, PropensityKind kind,
                            const BandwidthGrid& grid);
double LoocvBandwidthFromScores(const Sample& sample,
                                const Eigen::VectorXd& scores,
                                const BandwidthGrid& grid);
// The CV objective for one bandwidth (exposed for tests).
double LoocvScore(const Sample& sample, const Eigen::VectorXd& scores,
                  double bandwidth);

Estimate EstimateKernelMatching(const Sample& sample, PropensityKind kind,
                                double bandwidth);
Estimate KernelMatchingFromScores(const Sample& sample,
                                  const Eigen::VectorXd& scores,
                                  double bandwidth);

inline constexpr double kNnTieTolerance = 1e-12;

// Single nearest neighbour on the score, with replacement; equidistant
// controls (within kNnTieTolerance) are averaged.
Estimate EstimateNnMatching(const Sample& sample, PropensityKind kind);
Estimate NnMatchingFromScores(const Sample& sample,
                              const Eigen::VectorXd& scores);

// As above plus the regression correction mu0(X_i) - mu0(X_match), with mu0
// fitted on all controls.
Estimate EstimateNnBiasAdjusted(const Sample& sample, PropensityKind kind);
Estimate NnBiasAdjustedFromScores(const Sample& sample,
                                  const Eigen::VectorXd& scores);

struct EstimatorSettings {
  PropensityKind ps_kind = PropensityKind::kLogit;
  BandwidthGrid grid;
  // Kernel-matching bandwidth; selected by LOO-CV when absent.
  std::optional<double> bandwidth;
};

// Runs the requested estimators on one sample, fitting the propensity model
// once and sharing it across the score-based estimators.
std::vector<Estimate> EstimateAll(const Sample& sample,
                                  const std::vector<EstimatorId>& ids,
                                  const EstimatorSettings& settings);

}  // namespace emcs
