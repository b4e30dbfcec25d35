#pragma once

#include <optional>

#include <Eigen/Dense>

namespace emcs {

inline constexpr double kRankTolerance = 1e-10;

// Minimizes sum_i w_i (y_i - a_i' b)^2 by column-pivoted QR.
// Throws ErrorKind::kRankDeficient when the design is rank deficient at
// relative pivot tolerance kRankTolerance, or kInvalidArgument on shape errors
// or negative weights.
Eigen::VectorXd SolveLeastSquares(
    const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
    const std::optional<Eigen::VectorXd>& weights = std::nullopt);

// [1, X] design matrix.
Eigen::MatrixXd WithIntercept(const Eigen::MatrixXd& x);

}  // namespace emcs
