#include "propensity.hpp"

#include <cmath>
#include <string>

#include "error.hpp"
#include "least_squares.hpp"

namespace emcs {

const char* PropensityKindName(PropensityKind kind) {
  return kind == PropensityKind::kLogit ? "logit" : "linear_probability";
}

PropensityKind ParsePropensityKind(std::string_view name) {
  if (name == "logit") return PropensityKind::kLogit;
  if (name == "linear_probability" || name == "linear") {
    return PropensityKind::kLinearProbability;
  }
  Fail(ErrorKind::kValidation,
       "unknown propensity kind '" + std::string(name) + "'");
}

double Sigmoid(double eta) {
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

Eigen::VectorXd PropensityModel::LinearPredictor(const Eigen::MatrixXd& x) const {
  return WithIntercept(x) * coefficients;
}

Eigen::VectorXd PropensityModel::Predict(const Eigen::MatrixXd& x) const {
  Eigen::VectorXd p = LinearPredictor(x);
  if (kind == PropensityKind::kLogit) {
    p = p.unaryExpr([](double eta) { return Sigmoid(eta); });
  }
  return p.array().max(kPropensityClamp).min(1.0 - kPropensityClamp);
}

PropensityModel FitLinearPropensity(const Sample& sample) {
  PropensityModel model;
  model.kind = PropensityKind::kLinearProbability;
  model.coefficients = SolveLeastSquares(WithIntercept(sample.x()), sample.d());
  model.converged = true;
  model.iterations = 1;
  return model;
}

namespace {

// log(1 + exp(eta)) without overflow.
double Softplus(double eta) {
  return eta > 0.0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
}

double LogLikelihood(const Eigen::MatrixXd& a, const Eigen::VectorXd& y,
                     const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = a * beta;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    ll += y[i] * eta[i] - Softplus(eta[i]);
  }
  return ll;
}

}  // namespace

LogitFit FitLogit(const Eigen::MatrixXd& design, const Eigen::VectorXd& y) {
  if (design.rows() != y.size()) {
    Fail(ErrorKind::kInvalidArgument, "logit: row count mismatch");
  }
  LogitFit fit;
  fit.coefficients = Eigen::VectorXd::Zero(design.cols());
  double ll = LogLikelihood(design, y, fit.coefficients);
  for (int iter = 0; iter <= kLogitMaxIterations; ++iter) {
    const Eigen::VectorXd p =
        (design * fit.coefficients).unaryExpr([](double e) { return Sigmoid(e); });
    const Eigen::VectorXd score = design.transpose() * (y - p);
    fit.iterations = iter;
    if (score.cwiseAbs().maxCoeff() < kLogitScoreTolerance) {
      // A vanishing score with probabilities pinned at 0 or 1 is the
      // signature of (quasi-)separation, not of an interior optimum.
      const double edge = p.minCoeff() < 1.0 - p.maxCoeff() ? p.minCoeff() : 1.0 - p.maxCoeff();
      fit.converged = edge > kSeparationEdge;
      return fit;
    }
    if (iter == kLogitMaxIterations) break;
    const Eigen::VectorXd w = p.array() * (1.0 - p.array());
    const Eigen::MatrixXd info =
        design.transpose() * (design.array().colwise() * w.array()).matrix();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        ldlt.vectorD().minCoeff() <= 1e-300) {
      break;  // Information matrix singular: fitted probabilities saturated.
    }
    const Eigen::VectorXd step = ldlt.solve(score);
    if (!step.allFinite()) break;
    // Near the optimum the gain falls below rounding in the summed
    // log-likelihood; treat such differences as no decrease.
    const double slack = 1e-12 * (1.0 + std::abs(ll));
    double t = 1.0;
    bool improved = false;
    for (int halving = 0; halving < 40; ++halving, t *= 0.5) {
      const Eigen::VectorXd candidate = fit.coefficients + t * step;
      const double cand_ll = LogLikelihood(design, y, candidate);
      if (std::isfinite(cand_ll) && cand_ll >= ll - slack) {
        fit.coefficients = candidate;
        ll = std::max(ll, cand_ll);
        improved = true;
        break;
      }
    }
    if (!improved) break;
  }
  fit.converged = false;
  return fit;
}

PropensityModel FitLogitPropensity(const Sample& sample) {
  const LogitFit fit = FitLogit(WithIntercept(sample.x()), sample.d());
  PropensityModel model;
  model.kind = PropensityKind::kLogit;
  model.coefficients = fit.coefficients;
  model.converged = fit.converged;
  model.iterations = fit.iterations;
  return model;
}

PropensityModel FitPropensity(const Sample& sample, PropensityKind kind) {
  return kind == PropensityKind::kLogit ? FitLogitPropensity(sample)
                                        : FitLinearPropensity(sample);
}

}  // namespace emcs
