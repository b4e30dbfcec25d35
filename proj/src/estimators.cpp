#include "estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "error.hpp"
#include "least_squares.hpp"

namespace emcs {

const char* EstimatorName(EstimatorId id) {
  switch (id) {
    case EstimatorId::kOls: return "OLS";
    case EstimatorId::kOaxacaBlinder: return "OaxacaBlinder";
    case EstimatorId::kIpw: return "IPW";
    case EstimatorId::kIpwra: return "IPWRA";
    case EstimatorId::kKernelMatch: return "KernelMatch";
    case EstimatorId::kNnMatch: return "NNMatch";
    case EstimatorId::kNnMatchBiasAdj: return "NNMatchBiasAdj";
  }
  return "unknown";
}

EstimatorId ParseEstimatorId(std::string_view name) {
  for (EstimatorId id : kAllEstimators) {
    if (name == EstimatorName(id)) return id;
  }
  Fail(ErrorKind::kValidation, "unknown estimator '" + std::string(name) + "'");
}

bool UsesPropensity(EstimatorId id) {
  return id != EstimatorId::kOls && id != EstimatorId::kOaxacaBlinder;
}

void BandwidthGrid::Validate() const {
  if (!(base > 0.0) || !(factor > 1.0) || count < 1) {
    Fail(ErrorKind::kValidation,
         "bandwidth grid: need base > 0, factor > 1, count >= 1");
  }
}

std::vector<double> BandwidthGrid::Values() const {
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(count));
  for (int g = 0; g < count; ++g) values.push_back(base * std::pow(factor, g));
  return values;
}

namespace {

double ArmMean(const Sample& s, bool treated_arm) {
  double sum = 0.0;
  Eigen::Index n = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s.treated(i) == treated_arm) {
      sum += s.y()[i];
      ++n;
    }
  }
  return sum / static_cast<double>(n);
}

Eigen::MatrixXd SelectRows(const Eigen::MatrixXd& m,
                           const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.row(static_cast<Eigen::Index>(k)) = m.row(rows[k]);
  }
  return out;
}

Eigen::VectorXd SelectRows(const Eigen::VectorXd& v,
                           const std::vector<Eigen::Index>& rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out[static_cast<Eigen::Index>(k)] = v[rows[k]];
  }
  return out;
}

// Control-arm coefficients of Y on [1, covariates], optionally weighted.
Eigen::VectorXd ControlRegression(const Sample& s, const Eigen::MatrixXd& covariates,
                                  const std::optional<Eigen::VectorXd>& weights) {
  const auto rows = s.ControlRows();
  const Eigen::MatrixXd design = WithIntercept(SelectRows(covariates, rows));
  const Eigen::VectorXd response = SelectRows(s.y(), rows);
  if (weights) return SolveLeastSquares(design, response, SelectRows(*weights, rows));
  return SolveLeastSquares(design, response);
}

Estimate Make(EstimatorId id, double value) {
  Estimate e;
  e.estimator = id;
  e.value = value;
  return e;
}

// Controls sorted by score with prefix sums of Y (and optionally of a
// second per-control quantity) for O(log n) window averages.
class SortedControls {
 public:
  SortedControls(const Sample& s, const Eigen::VectorXd& scores,
                 const Eigen::VectorXd* extra = nullptr) {
    auto rows = s.ControlRows();
    std::sort(rows.begin(), rows.end(), [&](Eigen::Index a, Eigen::Index b) {
      if (scores[a] != scores[b]) return scores[a] < scores[b];
      return s.y()[a] < s.y()[b];
    });
    score_.reserve(rows.size());
    y_sum_.assign(rows.size() + 1, 0.0);
    extra_sum_.assign(rows.size() + 1, 0.0);
    for (std::size_t k = 0; k < rows.size(); ++k) {
      score_.push_back(scores[rows[k]]);
      y_sum_[k + 1] = y_sum_[k] + s.y()[rows[k]];
      if (extra) extra_sum_[k + 1] = extra_sum_[k] + (*extra)[rows[k]];
    }
  }

  std::size_t size() const { return score_.size(); }
  const std::vector<double>& scores() const { return score_; }

  // [lo, hi) of controls with |score - center| <= radius. The set is
  // contiguous because rounded subtraction is monotone.
  std::pair<std::size_t, std::size_t> Window(double center, double radius) const {
    auto lo = std::partition_point(score_.begin(), score_.end(), [&](double v) {
      return v < center && center - v > radius;
    });
    auto hi = std::partition_point(lo, score_.end(), [&](double v) {
      return v <= center || v - center <= radius;
    });
    return {static_cast<std::size_t>(lo - score_.begin()),
            static_cast<std::size_t>(hi - score_.begin())};
  }

  // Distance to the nearest control.
  double NearestDistance(double center) const {
    auto it = std::lower_bound(score_.begin(), score_.end(), center);
    double best = std::numeric_limits<double>::infinity();
    if (it != score_.end()) best = *it - center;
    if (it != score_.begin()) best = std::min(best, center - *(it - 1));
    return best;
  }

  double YSum(std::size_t lo, std::size_t hi) const { return y_sum_[hi] - y_sum_[lo]; }
  double ExtraSum(std::size_t lo, std::size_t hi) const {
    return extra_sum_[hi] - extra_sum_[lo];
  }
  double YTotal() const { return y_sum_.back(); }

 private:
  std::vector<double> score_;
  std::vector<double> y_sum_;
  std::vector<double> extra_sum_;
};

void CheckScores(const Sample& s, const Eigen::VectorXd& scores) {
  if (scores.size() != s.size()) {
    Fail(ErrorKind::kInvalidArgument, "propensity scores: length mismatch");
  }
}

}  // namespace

Estimate EstimateOls(const Sample& sample) {
  Eigen::MatrixXd design(sample.size(), sample.covariate_count() + 2);
  design.col(0).setOnes();
  design.col(1) = sample.d();
  design.rightCols(sample.covariate_count()) = sample.x();
  const Eigen::VectorXd beta = SolveLeastSquares(design, sample.y());
  return Make(EstimatorId::kOls, beta[1]);
}

Estimate EstimateOaxacaBlinder(const Sample& sample) {
  const Eigen::VectorXd beta0 = ControlRegression(sample, sample.x(), std::nullopt);
  const auto treated = sample.TreatedRows();
  const Eigen::VectorXd imputed =
      WithIntercept(SelectRows(sample.x(), treated)) * beta0;
  const double value = ArmMean(sample, true) - imputed.mean();
  return Make(EstimatorId::kOaxacaBlinder, value);
}

Estimate IpwFromScores(const Sample& sample, const Eigen::VectorXd& scores) {
  CheckScores(sample, scores);
  double wy = 0.0;
  double w = 0.0;
  for (Eigen::Index i = 0; i < sample.size(); ++i) {
    if (sample.treated(i)) continue;
    const double wi = scores[i] / (1.0 - scores[i]);
    wy += wi * sample.y()[i];
    w += wi;
  }
  Estimate e = Make(EstimatorId::kIpw, ArmMean(sample, true) - wy / w);
  if (!(w > 0.0) || !std::isfinite(e.value)) {
    e.status = EstimateStatus::kDegenerateFallback;
  }
  return e;
}

Estimate EstimateIpw(const Sample& sample, PropensityKind kind) {
  Estimate e = IpwFromScores(sample, FitPropensity(sample, kind).Predict(sample.x()));
  e.ps_kind = kind;
  return e;
}

Estimate IpwraFromScores(const Sample& sample, const Eigen::VectorXd& scores,
                         const Eigen::MatrixXd& outcome_covariates) {
  CheckScores(sample, scores);
  const Eigen::VectorXd weights = scores.array() / (1.0 - scores.array());
  const Eigen::VectorXd beta0 = ControlRegression(sample, outcome_covariates, weights);
  const auto treated = sample.TreatedRows();
  const Eigen::VectorXd fitted =
      WithIntercept(SelectRows(outcome_covariates, treated)) * beta0;
  const double value = SelectRows(sample.y(), treated).mean() - fitted.mean();
  return Make(EstimatorId::kIpwra, value);
}

Estimate EstimateIpwra(const Sample& sample, PropensityKind kind) {
  Estimate e = IpwraFromScores(
      sample, FitPropensity(sample, kind).Predict(sample.x()), sample.x());
  e.ps_kind = kind;
  return e;
}

double LoocvScore(const Sample& sample, const Eigen::VectorXd& scores,
                  double bandwidth) {
  CheckScores(sample, scores);
  const SortedControls controls(sample, scores);
  const double grand_mean = controls.YTotal() / static_cast<double>(controls.size());
  double total = 0.0;
  for (Eigen::Index i = 0; i < sample.size(); ++i) {
    if (sample.treated(i)) continue;
    const auto [lo, hi] = controls.Window(scores[i], bandwidth);
    const double yi = sample.y()[i];
    const std::size_t others = hi - lo - 1;  // the window always contains i
    double err;
    if (others >= 1) {
      const double prediction =
          (controls.YSum(lo, hi) - yi) / static_cast<double>(others);
      err = yi - prediction;
    } else {
      err = yi - grand_mean;
    }
    total += err * err;
  }
  return total / static_cast<double>(controls.size());
}

double LoocvBandwidthFromScores(const Sample& sample, const Eigen::VectorXd& scores,
                                const BandwidthGrid& grid) {
  grid.Validate();
  if (sample.control_count() < 3) {
    Fail(ErrorKind::kInvalidArgument, "bandwidth CV needs at least 3 controls");
  }
  double best_h = 0.0;
  double best_score = std::numeric_limits<double>::infinity();
  for (double h : grid.Values()) {
    const double score = LoocvScore(sample, scores, h);
    if (score < best_score) {
      best_score = score;
      best_h = h;
    }
  }
  return best_h;
}

double SelectBandwidthLoocv(const Sample& sample, PropensityKind kind,
                            const BandwidthGrid& grid) {
  return LoocvBandwidthFromScores(
      sample, FitPropensity(sample, kind).Predict(sample.x()), grid);
}

Estimate KernelMatchingFromScores(const Sample& sample,
                                  const Eigen::VectorXd& scores, double bandwidth) {
  CheckScores(sample, scores);
  if (!(bandwidth > 0.0)) {
    Fail(ErrorKind::kInvalidArgument, "kernel matching: bandwidth must be > 0");
  }
  const SortedControls controls(sample, scores);
  double total = 0.0;
  Eigen::Index matched = 0;
  for (Eigen::Index i = 0; i < sample.size(); ++i) {
    if (!sample.treated(i)) continue;
    const auto [lo, hi] = controls.Window(scores[i], bandwidth);
    if (hi == lo) continue;
    total += sample.y()[i] - controls.YSum(lo, hi) / static_cast<double>(hi - lo);
    ++matched;
  }
  Estimate e = Make(EstimatorId::kKernelMatch,
                    matched > 0 ? total / static_cast<double>(matched)
                                : std::numeric_limits<double>::quiet_NaN());
  e.bandwidth = bandwidth;
  e.n_matched = matched;
  if (matched == 0) e.status = EstimateStatus::kDegenerateFallback;
  return e;
}

Estimate EstimateKernelMatching(const Sample& sample, PropensityKind kind,
                                double bandwidth) {
  Estimate e = KernelMatchingFromScores(
      sample, FitPropensity(sample, kind).Predict(sample.x()), bandwidth);
  e.ps_kind = kind;
  return e;
}

namespace {

// Mean over treated of (Y_i - Ybar_match(i) - (mu_i - mubar_match(i))); mu is
// null for plain matching.
Estimate NearestNeighbour(EstimatorId id, const Sample& sample,
                          const Eigen::VectorXd& scores, const Eigen::VectorXd* mu) {
  CheckScores(sample, scores);
  const SortedControls controls(sample, scores, mu);
  double total = 0.0;
  Eigen::Index matched = 0;
  for (Eigen::Index i = 0; i < sample.size(); ++i) {
    if (!sample.treated(i)) continue;
    const double nearest = controls.NearestDistance(scores[i]);
    const auto [lo, hi] = controls.Window(scores[i], nearest + kNnTieTolerance);
    const double k = static_cast<double>(hi - lo);
    double contribution = sample.y()[i] - controls.YSum(lo, hi) / k;
    if (mu) contribution -= (*mu)[i] - controls.ExtraSum(lo, hi) / k;
    total += contribution;
    ++matched;
  }
  Estimate e = Make(id, total / static_cast<double>(matched));
  e.n_matched = matched;
  return e;
}

}  // namespace

Estimate NnMatchingFromScores(const Sample& sample, const Eigen::VectorXd& scores) {
  return NearestNeighbour(EstimatorId::kNnMatch, sample, scores, nullptr);
}

Estimate EstimateNnMatching(const Sample& sample, PropensityKind kind) {
  Estimate e = NnMatchingFromScores(sample, FitPropensity(sample, kind).Predict(sample.x()));
  e.ps_kind = kind;
  return e;
}

Estimate NnBiasAdjustedFromScores(const Sample& sample, const Eigen::VectorXd& scores) {
  const Eigen::VectorXd beta0 = ControlRegression(sample, sample.x(), std::nullopt);
  const Eigen::VectorXd mu = WithIntercept(sample.x()) * beta0;
  return NearestNeighbour(EstimatorId::kNnMatchBiasAdj, sample, scores, &mu);
}

Estimate EstimateNnBiasAdjusted(const Sample& sample, PropensityKind kind) {
  Estimate e =
      NnBiasAdjustedFromScores(sample, FitPropensity(sample, kind).Predict(sample.x()));
  e.ps_kind = kind;
  return e;
}

std::vector<Estimate> EstimateAll(const Sample& sample,
                                  const std::vector<EstimatorId>& ids,
                                  const EstimatorSettings& settings) {
  std::optional<Eigen::VectorXd> scores;
  auto ps = [&]() -> const Eigen::VectorXd& {
    if (!scores) scores = FitPropensity(sample, settings.ps_kind).Predict(sample.x());
    return *scores;
  };
  std::vector<Estimate> out;
  out.reserve(ids.size());
  for (EstimatorId id : ids) {
    Estimate e;
    switch (id) {
      case EstimatorId::kOls: e = EstimateOls(sample); break;
      case EstimatorId::kOaxacaBlinder: e = EstimateOaxacaBlinder(sample); break;
      case EstimatorId::kIpw: e = IpwFromScores(sample, ps()); break;
      case EstimatorId::kIpwra: e = IpwraFromScores(sample, ps(), sample.x()); break;
      case EstimatorId::kKernelMatch: {
        const double h = settings.bandwidth
                             ? *settings.bandwidth
                             : LoocvBandwidthFromScores(sample, ps(), settings.grid);
        e = KernelMatchingFromScores(sample, ps(), h);
        break;
      }
      case EstimatorId::kNnMatch: e = NnMatchingFromScores(sample, ps()); break;
      case EstimatorId::kNnMatchBiasAdj: e = NnBiasAdjustedFromScores(sample, ps()); break;
    }
    if (UsesPropensity(id)) e.ps_kind = settings.ps_kind;
    out.push_back(e);
  }
  return out;
}

}  // namespace emcs
