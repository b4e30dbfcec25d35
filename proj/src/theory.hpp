#pragma once

#include <array>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "sample.hpp"

namespace emcs {

// Two estimators with joint normal sampling distribution
// N((theta1, theta2), Sigma / n) for a parameter whose true value is theta0.
struct GaussianPair {
  double theta0 = 0.0;
  std::array<double, 2> means{};
  std::array<double, 2> sigma_sq{};
  double sigma12 = 0.0;  // carried for completeness; MSE ignores it
  double n = 1.0;

  void Validate() const;
};

// The same pair as simulated by an EMCS with pseudo-truth theta0_tilde and
// simulated sample size a_n.
struct EmcsGaussian {
  double theta0_tilde = 0.0;
  std::array<double, 2> means_tilde{};
  std::array<double, 2> sigma_sq_tilde{};
  double sigma12_tilde = 0.0;
  double a_n = 1.0;

  void Validate() const;
};

// (theta_j - theta0)^2 + sigma_j^2 / n, j in {1, 2}.
double GaussianMse(const GaussianPair& pair, int j);
double EmcsMse(const EmcsGaussian& emcs, int j);

// Index (1 or 2) of the strictly smaller MSE; kNoStrictPreference on a tie.
int TrueBest(const GaussianPair& pair);
int EmcsBest(const EmcsGaussian& emcs);
// 1 when the EMCS picks the truly better estimator, else 0.
int EmcsValidityIndicator(const GaussianPair& pair, const EmcsGaussian& emcs);

// Conditional moments of the propensity score among the treated.
struct PropensityMoments {
  double p_treat = 0.5;  // Pr(D = 1)
  double m_inv = 2.0;    // E[1/(1-e) | D=1]
  double m_sq = 0.25;    // E[(1-e)^2 | D=1]
  double m_lin = 0.5;    // E[1-e | D=1]
  double m_prod = 0.25;  // E[e(1-e) | D=1]

  // Positivity, p in (0,1), and both Jensen inequalities (relative slack
  // `tol`).
  void Validate(double tol = 1e-12) const;
};

// Moments of the degenerate propensity e(X) = p.
PropensityMoments ConstantPropensityMoments(double p);

struct DgpTheorySpec {
  double c = 1.0;  // Var(Y(1)|X) / Var(Y(0)|X)
  double sigma_eps_sq = 1.0;
  PropensityMoments moments;

  void Validate() const;
};

// Efficiency bound of the ATT, (s^2/p)[c - 1 + E(1/(1-e)|D=1)].
double SebAtt(const DgpTheorySpec& spec);

// One node of a D=1-conditional quadrature rule for the general bound.
struct ConditionalNode {
  double weight = 0.0;  // mass under X | D=1; weights sum to 1
  double propensity = 0.0;
  double var1 = 0.0;    // Var(Y(1) | X)
  double var0 = 0.0;    // Var(Y(0) | X)
  double effect = 0.0;  // tau(X)
};

// (1/p) E[Var1 + e/(1-e) Var0 + (tau - ATT)^2 | D=1], ATT = E[tau | D=1].
double SebAttGeneral(std::span<const ConditionalNode> nodes, double p_treat);

// Asymptotic variance of the OLS coefficient on D under the linear DGP.
double OlsAvar(const DgpTheorySpec& spec);

struct Deltas {
  double delta1 = 0.0;  // E[1/(1-e)|D=1] - 1/E[1-e|D=1]
  double delta2 = 0.0;  // E[(1-e)^2|D=1]/E[1-e|D=1]^2 - 1
};

Deltas ComputeDeltas(const PropensityMoments& m);
// delta1/delta2 + 1; kUndefined when the propensity is degenerate.
double CThreshold(const PropensityMoments& m);

struct PlaceboVariancePair {
  double ipw = 0.0;  // sigma_tilde_1^2
  double ols = 0.0;  // sigma_tilde_2^2
};

// Homoskedastic (c = 1) variances of the two estimators in the placebo world.
PlaceboVariancePair PlaceboVariances(const PropensityMoments& placebo_moments,
                                     double sigma_eps_sq, double p_treat_tilde);

inline constexpr int kDefaultQuadratureNodes = 256;

// Gauss-Legendre nodes and weights on [lo, hi].
std::pair<std::vector<double>, std::vector<double>> GaussLegendre(int n, double lo,
                                                                  double hi);

// Quadrature of the scenario's propensity moments against the truncated
// normal covariate density.
PropensityMoments PropensityMomentsForScenario(const ScenarioSpec& spec,
                                               int n_nodes = kDefaultQuadratureNodes);

// Moments in the placebo world: covariates from the control distribution,
// placebo propensity e(x) + shift with the shift calibrated so the placebo
// treated share equals Pr(D=1). kUndefined if the shifted propensity leaves
// (0,1) on the support.
PropensityMoments PlaceboMomentsForScenario(const ScenarioSpec& spec,
                                            int n_nodes = kDefaultQuadratureNodes);

struct ScenarioTheory {
  PropensityMoments moments;
  double c = 1.0;
  double sigma_eps_sq = 1.0;
  double sigma1_sq = 0.0;  // efficiency bound (IPW)
  double sigma2_sq = 0.0;  // OLS
  Deltas deltas;
  std::optional<double> c_threshold;
  PlaceboVariancePair placebo;
};

// Closed forms for a scenario; c defaults to (sigma1/sigma0)^2. Placebo
// variances use the scenario's own moments with p_tilde = Pr(D=1).
ScenarioTheory EvaluateScenarioTheory(const ScenarioSpec& spec,
                                      std::optional<double> c = std::nullopt,
                                      int n_nodes = kDefaultQuadratureNodes);

}  // namespace emcs
