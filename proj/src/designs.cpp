#include "designs.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include "error.hpp"
#include "least_squares.hpp"

namespace emcs {

const char* DesignName(DesignKind kind) {
  switch (kind) {
    case DesignKind::kPlacebo: return "placebo";
    case DesignKind::kStructuredStylized: return "structured_stylized";
    case DesignKind::kStructuredSequential: return "structured_sequential";
    case DesignKind::kBootstrap: return "bootstrap";
    case DesignKind::kRandom: return "random";
  }
  return "unknown";
}

DesignKind ParseDesignKind(std::string_view name) {
  for (auto k : {DesignKind::kPlacebo, DesignKind::kStructuredStylized,
                 DesignKind::kStructuredSequential, DesignKind::kBootstrap,
                 DesignKind::kRandom}) {
    if (name == DesignName(k)) return k;
  }
  Fail(ErrorKind::kValidation, "unknown design '" + std::string(name) + "'");
}

const char* LatentErrorName(LatentError e) {
  return e == LatentError::kLogistic ? "logistic" : "uniform_complement";
}

LatentError ParseLatentError(std::string_view name) {
  if (name == "logistic") return LatentError::kLogistic;
  if (name == "uniform_complement") return LatentError::kUniformComplement;
  Fail(ErrorKind::kValidation, "unknown latent error '" + std::string(name) + "'");
}

LatentError DefaultLatentError(PropensityKind kind) {
  return kind == PropensityKind::kLogit ? LatentError::kLogistic
                                        : LatentError::kUniformComplement;
}

const char* VariableKindName(VariableKind kind) {
  return kind == VariableKind::kBinary ? "binary" : "continuous";
}

VariableKind ParseVariableKind(std::string_view name) {
  if (name == "binary") return VariableKind::kBinary;
  if (name == "continuous") return VariableKind::kContinuous;
  Fail(ErrorKind::kValidation, "unknown variable kind '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------

PlaceboSetup PreparePlacebo(const Sample& original, const PlaceboConfig& cfg) {
  if (!std::isfinite(cfg.lambda)) {
    Fail(ErrorKind::kInvalidArgument, "placebo: lambda must be finite");
  }
  const PropensityModel model = FitPropensity(original, cfg.ps_kind);
  Eigen::VectorXd index = model.LinearPredictor(original.x());
  index.array() -= index.mean();

  const Eigen::Index n0 = original.control_count();
  const auto k = static_cast<Eigen::Index>(
      std::llround(original.treated_fraction() * static_cast<double>(n0)));
  if (k <= 0 || k >= n0) {
    Fail(ErrorKind::kDegenerateSample,
         "placebo: calibrated treated count " + std::to_string(k) +
             " leaves an empty arm (n0 = " + std::to_string(n0) + ")");
  }
  return PlaceboSetup{original, original.ControlRows(), std::move(index), k, cfg};
}

DesignReplicate PlaceboReplicate(const PlaceboSetup& setup, RngStream& rng) {
  const auto n0 = static_cast<Eigen::Index>(setup.control_rows.size());
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(n0));
  for (auto& r : rows) {
    r = setup.control_rows[static_cast<std::size_t>(rng.Index(static_cast<std::uint64_t>(n0)))];
  }
  std::vector<std::pair<double, Eigen::Index>> latent(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const double eps = setup.config.latent_error == LatentError::kLogistic
                           ? rng.Logistic()
                           : -rng.Uniform();
    latent[k] = {setup.config.lambda * setup.centred_index[rows[k]] + eps,
                 static_cast<Eigen::Index>(k)};
  }
  // Exact calibration: the k largest latent indices are placebo-treated.
  const auto k = static_cast<std::size_t>(setup.placebo_treated);
  std::nth_element(latent.begin(), latent.begin() + static_cast<std::ptrdiff_t>(k),
                   latent.end(), std::greater<>());
  const Sample& src = setup.original;
  Eigen::VectorXd y(n0), d = Eigen::VectorXd::Zero(n0);
  Eigen::MatrixXd x(n0, src.covariate_count());
  for (std::size_t j = 0; j < rows.size(); ++j) {
    y[static_cast<Eigen::Index>(j)] = src.y()[rows[j]];
    x.row(static_cast<Eigen::Index>(j)) = src.x().row(rows[j]);
  }
  for (std::size_t j = 0; j < k; ++j) d[latent[j].second] = 1.0;
  return {Sample(std::move(y), std::move(d), std::move(x), src.covariate_names()),
          {0.0, TruthProvenance::kZeroByConstruction}};
}

DesignReplicate PlaceboReplicate(const Sample& original, const PlaceboConfig& cfg,
                                 RngStream& rng) {
  return PlaceboReplicate(PreparePlacebo(original, cfg), rng);
}

// ---------------------------------------------------------------------------

namespace {

Interval SupportOf(const std::vector<double>& v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return {*lo, *hi};
}

double SampleVariance(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double e : v) ss += (e - mean) * (e - mean);
  return v.size() > 1 ? ss / (n - 1.0) : 0.0;
}

// RSS / (n - p), floored.
double ResidualVariance(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                        const Eigen::VectorXd& beta) {
  const double rss = (y - design * beta).squaredNorm();
  const double dof = static_cast<double>(design.rows() - design.cols());
  return std::max(dof > 0.0 ? rss / dof : 0.0, kResidualVarianceFloor);
}

}  // namespace

StructuredStylizedModel FitStructuredStylized(const Sample& original) {
  if (original.covariate_count() != 1) {
    Fail(ErrorKind::kInvalidArgument,
         "structured_stylized: requires exactly one covariate");
  }
  StructuredStylizedModel m;
  std::array<std::vector<double>, 2> xs, ys;
  for (Eigen::Index i = 0; i < original.size(); ++i) {
    const int arm = original.treated(i) ? 1 : 0;
    xs[arm].push_back(original.x()(i, 0));
    ys[arm].push_back(original.y()[i]);
  }
  for (int arm = 0; arm < 2; ++arm) {
    m.x_mean[arm] = std::accumulate(xs[arm].begin(), xs[arm].end(), 0.0) /
                    static_cast<double>(xs[arm].size());
    m.x_var[arm] = SampleVariance(xs[arm]);
    m.x_support[arm] = SupportOf(xs[arm]);
    m.y_support[arm] = SupportOf(ys[arm]);
  }
  Eigen::MatrixXd design(original.size(), 3);
  design.col(0).setOnes();
  design.col(1) = original.d();
  design.col(2) = original.x().col(0);
  const Eigen::VectorXd beta = SolveLeastSquares(design, original.y());
  m.delta0 = beta[0];
  m.delta_d = beta[1];
  m.delta_x = beta[2];
  m.residual_var = ResidualVariance(design, original.y(), beta);
  m.n1 = original.treated_count();
  m.n0 = original.control_count();
  return m;
}

DesignReplicate StructuredReplicateStylized(const StructuredStylizedModel& model,
                                            RngStream& rng) {
  const Eigen::Index n = model.n1 + model.n0;
  Eigen::VectorXd y(n), d(n);
  Eigen::MatrixXd x(n, 1);
  const double resid_sd = std::sqrt(model.residual_var);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int arm = i < model.n1 ? 1 : 0;
    const double xi = model.x_support[arm].Clip(
        model.x_mean[arm] + std::sqrt(model.x_var[arm]) * rng.Normal());
    const double mean = model.delta0 + model.delta_d * arm + model.delta_x * xi;
    d[i] = arm;
    x(i, 0) = xi;
    y[i] = model.y_support[arm].Clip(mean + resid_sd * rng.Normal());
  }
  return {Sample(std::move(y), std::move(d), std::move(x)),
          {model.delta_d, TruthProvenance::kModelCoefficient}};
}

// ---------------------------------------------------------------------------

SequentialStructuredModel FitStructuredSequential(
    const Sample& original, const std::vector<VariableSpec>& schema) {
  const auto& names = original.covariate_names();
  if (schema.size() != names.size()) {
    Fail(ErrorKind::kInvalidArgument,
         "structured_sequential: schema must list every covariate exactly once");
  }
  SequentialStructuredModel m;
  m.column_names = names;
  m.n1 = original.treated_count();
  m.n0 = original.control_count();
  const Eigen::Index n = original.size();

  // Predecessor matrix grows as [1, D, v_1, ..., v_k].
  Eigen::MatrixXd parents(n, 2 + static_cast<Eigen::Index>(schema.size()));
  parents.col(0).setOnes();
  parents.col(1) = original.d();
  std::vector<bool> seen(names.size(), false);
  for (std::size_t k = 0; k < schema.size(); ++k) {
    const auto it = std::find(names.begin(), names.end(), schema[k].name);
    if (it == names.end()) {
      Fail(ErrorKind::kInvalidArgument,
           "structured_sequential: unknown column '" + schema[k].name + "'");
    }
    const auto col = static_cast<Eigen::Index>(it - names.begin());
    if (seen[static_cast<std::size_t>(col)]) {
      Fail(ErrorKind::kInvalidArgument,
           "structured_sequential: duplicate column '" + schema[k].name + "'");
    }
    seen[static_cast<std::size_t>(col)] = true;

    ConditionalModel cm;
    cm.variable = schema[k];
    cm.column = col;
    const Eigen::VectorXd v = original.x().col(col);
    const Eigen::MatrixXd design = parents.leftCols(2 + static_cast<Eigen::Index>(k));
    if (schema[k].kind == VariableKind::kBinary) {
      for (Eigen::Index i = 0; i < n; ++i) {
        if (v[i] != 0.0 && v[i] != 1.0) {
          Fail(ErrorKind::kInvalidArgument,
               "structured_sequential: binary column '" + schema[k].name +
                   "' has non-binary value at row " + std::to_string(i));
        }
      }
      cm.coefficients = FitLogit(design, v).coefficients;
    } else {
      cm.coefficients = SolveLeastSquares(design, v);
      cm.residual_var = ResidualVariance(design, v, cm.coefficients);
    }
    for (int arm = 0; arm < 2; ++arm) {
      std::vector<double> vals;
      for (Eigen::Index i = 0; i < n; ++i) {
        if ((original.treated(i) ? 1 : 0) == arm) vals.push_back(v[i]);
      }
      cm.support[arm] = SupportOf(vals);
    }
    parents.col(2 + static_cast<Eigen::Index>(k)) = v;
    m.conditionals.push_back(std::move(cm));
  }

  // Outcome: separate linear model per arm on [1, X] (original column order).
  const Eigen::MatrixXd full = WithIntercept(original.x());
  for (int arm = 0; arm < 2; ++arm) {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < n; ++i) {
      if ((original.treated(i) ? 1 : 0) == arm) rows.push_back(i);
    }
    Eigen::MatrixXd a(static_cast<Eigen::Index>(rows.size()), full.cols());
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
    std::vector<double> ys;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      a.row(static_cast<Eigen::Index>(r)) = full.row(rows[r]);
      y[static_cast<Eigen::Index>(r)] = original.y()[rows[r]];
      ys.push_back(original.y()[rows[r]]);
    }
    const Eigen::VectorXd beta = SolveLeastSquares(a, y);
    m.outcome_var[arm] = ResidualVariance(a, y, beta);
    m.y_support[arm] = SupportOf(ys);
    (arm == 0 ? m.delta0 : m.delta1) = beta;
  }
  return m;
}

DesignReplicate StructuredReplicateSequential(const SequentialStructuredModel& model,
                                              RngStream& rng) {
  const Eigen::Index n = model.n1 + model.n0;
  const auto p = static_cast<Eigen::Index>(model.column_names.size());
  Eigen::VectorXd y(n), d(n);
  Eigen::MatrixXd x(n, p);
  Eigen::VectorXd parents(2 + p);
  double satt_sum = 0.0;
  const Eigen::VectorXd effect = model.delta1 - model.delta0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int arm = i < model.n1 ? 1 : 0;
    d[i] = arm;
    parents[0] = 1.0;
    parents[1] = arm;
    for (std::size_t k = 0; k < model.conditionals.size(); ++k) {
      const ConditionalModel& cm = model.conditionals[k];
      const auto width = 2 + static_cast<Eigen::Index>(k);
      const double eta = parents.head(width).dot(cm.coefficients);
      double v;
      if (cm.variable.kind == VariableKind::kBinary) {
        v = rng.Uniform() < Sigmoid(eta) ? 1.0 : 0.0;
      } else {
        v = cm.support[arm].Clip(eta + std::sqrt(cm.residual_var) * rng.Normal());
      }
      parents[width] = v;
      x(i, cm.column) = v;
    }
    Eigen::VectorXd row(p + 1);
    row[0] = 1.0;
    row.tail(p) = x.row(i).transpose();
    const double mean = row.dot(arm == 1 ? model.delta1 : model.delta0);
    y[i] = model.y_support[arm].Clip(mean + std::sqrt(model.outcome_var[arm]) * rng.Normal());
    if (arm == 1) satt_sum += row.dot(effect);
  }
  const double satt = satt_sum / static_cast<double>(model.n1);
  return {Sample(std::move(y), std::move(d), std::move(x), model.column_names),
          {satt, TruthProvenance::kSattOfReplicate}};
}

// ---------------------------------------------------------------------------

Sample BootstrapReplicate(const Sample& original, RngStream& rng) {
  constexpr int kMaxRedraws = 100;
  const Eigen::Index n = original.size();
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
  for (int attempt = 0; attempt <= kMaxRedraws; ++attempt) {
    Eigen::Index treated = 0;
    for (auto& r : rows) {
      r = static_cast<Eigen::Index>(rng.Index(static_cast<std::uint64_t>(n)));
      treated += original.treated(r) ? 1 : 0;
    }
    if (treated >= 2 && n - treated >= 2) return original.Rows(rows);
  }
  Fail(ErrorKind::kDegenerateSample,
       "bootstrap: degenerate arm after " + std::to_string(kMaxRedraws) + " redraws");
}

std::vector<int> RandomRanking(int j_count, RngStream& rng) {
  if (j_count < 2) {
    Fail(ErrorKind::kInvalidArgument, "random ranking: need at least 2 estimators");
  }
  std::vector<int> perm(static_cast<std::size_t>(j_count));
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = perm.size() - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng.Index(i + 1));
    std::swap(perm[i], perm[j]);
  }
  return perm;
}

}  // namespace emcs
