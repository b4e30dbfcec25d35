#include "least_squares.hpp"

#include "error.hpp"

namespace emcs {

Eigen::VectorXd SolveLeastSquares(const Eigen::MatrixXd& design,
                                  const Eigen::VectorXd& response,
                                  const std::optional<Eigen::VectorXd>& weights) {
  if (design.rows() != response.size()) {
    Fail(ErrorKind::kInvalidArgument, "least squares: row count mismatch");
  }
  if (design.rows() < design.cols() || design.cols() == 0) {
    Fail(ErrorKind::kRankDeficient,
         "least squares: fewer rows than columns");
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr;
  qr.setThreshold(kRankTolerance);
  if (weights) {
    if (weights->size() != design.rows() || (weights->array() < 0.0).any()) {
      Fail(ErrorKind::kInvalidArgument,
           "least squares: weights must be non-negative, one per row");
    }
    const Eigen::ArrayXd root = weights->array().sqrt();
    qr.compute(design.array().colwise() * root);
    if (qr.rank() < design.cols()) {
      Fail(ErrorKind::kRankDeficient, "least squares: rank-deficient design");
    }
    return qr.solve((response.array() * root).matrix());
  }
  qr.compute(design);
  if (qr.rank() < design.cols()) {
    Fail(ErrorKind::kRankDeficient, "least squares: rank-deficient design");
  }
  return qr.solve(response);
}

Eigen::MatrixXd WithIntercept(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd a(x.rows(), x.cols() + 1);
  a.col(0).setOnes();
  a.rightCols(x.cols()) = x;
  return a;
}

}  // namespace emcs
