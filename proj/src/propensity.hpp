#pragma once

#include <string_view>

#include <Eigen/Dense>

#include "sample.hpp"

namespace emcs {

enum class PropensityKind { kLinearProbability, kLogit };

const char* PropensityKindName(PropensityKind kind);
PropensityKind ParsePropensityKind(std::string_view name);

inline constexpr double kPropensityClamp = 1e-6;

struct PropensityModel {
  PropensityKind kind = PropensityKind::kLinearProbability;
  Eigen::VectorXd coefficients;  // intercept first
  bool converged = true;
  int iterations = 0;

  // Index on the model's own scale: probability for the linear model, log-odds
  // for the logit.
  Eigen::VectorXd LinearPredictor(const Eigen::MatrixXd& x) const;
  // Fitted probabilities clamped to [kPropensityClamp, 1 - kPropensityClamp].
  Eigen::VectorXd Predict(const Eigen::MatrixXd& x) const;
};

PropensityModel FitLinearPropensity(const Sample& sample);
PropensityModel FitLogitPropensity(const Sample& sample);
PropensityModel FitPropensity(const Sample& sample, PropensityKind kind);

struct LogitFit {
  Eigen::VectorXd coefficients;
  bool converged = false;
  int iterations = 0;
};

inline constexpr int kLogitMaxIterations = 50;
inline constexpr double kLogitScoreTolerance = 1e-8;
// Fitted probabilities closer than this to 0 or 1 flag separation.
inline constexpr double kSeparationEdge = 1e-10;

// Newton-Raphson maximum likelihood for P(y=1|a) = 1/(1+exp(-a'b)) with
// step halving whenever the log-likelihood would decrease. Under separation
// the last iterate is returned with converged = false.
LogitFit FitLogit(const Eigen::MatrixXd& design, const Eigen::VectorXd& y);

double Sigmoid(double eta);

}  // namespace emcs
