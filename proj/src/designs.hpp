#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "propensity.hpp"
#include "rng.hpp"
#include "sample.hpp"

namespace emcs {

enum class DesignKind {
  kPlacebo = 0,
  kStructuredStylized = 1,
  kStructuredSequential = 2,
  kBootstrap = 3,
  kRandom = 4,
};

const char* DesignName(DesignKind kind);
DesignKind ParseDesignKind(std::string_view name);

struct DesignReplicate {
  Sample sample;
  TruthValue truth;
};

// ---------------------------------------------------------------------------
// Placebo design

enum class LatentError { kLogistic, kUniformComplement };

const char* LatentErrorName(LatentError e);
LatentError ParseLatentError(std::string_view name);
// logistic for logit propensity, uniform complement for the linear model.
LatentError DefaultLatentError(PropensityKind kind);

struct PlaceboConfig {
  double lambda = 1.0;
  PropensityKind ps_kind = PropensityKind::kLinearProbability;
  LatentError latent_error = LatentError::kUniformComplement;
};

// Everything a placebo replicate needs from the original sample. Computed
// once per original sample; each replicate only consumes randomness.
struct PlaceboSetup {
  Sample original;
  std::vector<Eigen::Index> control_rows;
  // Propensity index of each original row, centred at its sample mean.
  Eigen::VectorXd centred_index;
  Eigen::Index placebo_treated = 0;  // k = round(p_hat * n0)
  PlaceboConfig config;
};

PlaceboSetup PreparePlacebo(const Sample& original, const PlaceboConfig& cfg);
DesignReplicate PlaceboReplicate(const PlaceboSetup& setup, RngStream& rng);
DesignReplicate PlaceboReplicate(const Sample& original, const PlaceboConfig& cfg,
                                 RngStream& rng);

// ---------------------------------------------------------------------------
// Structured design, stylized (scalar covariate) variant

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double Clip(double v) const { return v < lo ? lo : (v > hi ? hi : v); }
  bool Contains(double v) const { return v >= lo && v <= hi; }
};

inline constexpr double kResidualVarianceFloor = 1e-12;

// Index 0 = control arm, 1 = treated arm.
struct StructuredStylizedModel {
  std::array<double, 2> x_mean{};
  std::array<double, 2> x_var{};
  std::array<Interval, 2> x_support{};
  double delta0 = 0.0;  // intercept
  double delta_d = 0.0;
  double delta_x = 0.0;
  double residual_var = 0.0;  // pooled across arms
  std::array<Interval, 2> y_support{};
  Eigen::Index n1 = 0;
  Eigen::Index n0 = 0;
};

StructuredStylizedModel FitStructuredStylized(const Sample& original);
DesignReplicate StructuredReplicateStylized(const StructuredStylizedModel& model,
                                            RngStream& rng);

// ---------------------------------------------------------------------------
// Structured design, sequential-conditional variant

enum class VariableKind { kBinary, kContinuous };

const char* VariableKindName(VariableKind kind);
VariableKind ParseVariableKind(std::string_view name);

struct VariableSpec {
  std::string name;
  VariableKind kind = VariableKind::kContinuous;
};

// Conditional model of one covariate given [1, D, predecessors].
struct ConditionalModel {
  VariableSpec variable;
  Eigen::Index column = 0;  // column in the sample's covariate matrix
  Eigen::VectorXd coefficients;
  double residual_var = 0.0;  // continuous only
  std::array<Interval, 2> support{};
};

struct SequentialStructuredModel {
  std::vector<ConditionalModel> conditionals;  // schema order
  std::vector<std::string> column_names;       // original column order
  Eigen::VectorXd delta0;  // control outcome coefficients on [1, X]
  Eigen::VectorXd delta1;  // treated outcome coefficients on [1, X]
  std::array<double, 2> outcome_var{};
  std::array<Interval, 2> y_support{};
  Eigen::Index n1 = 0;
  Eigen::Index n0 = 0;
};

SequentialStructuredModel FitStructuredSequential(
    const Sample& original, const std::vector<VariableSpec>& schema);
DesignReplicate StructuredReplicateSequential(const SequentialStructuredModel& model,
                                              RngStream& rng);

// ---------------------------------------------------------------------------
// Bootstrap and random ranking

Sample BootstrapReplicate(const Sample& original, RngStream& rng);

// Uniform random permutation of 0..j_count-1, best first.
std::vector<int> RandomRanking(int j_count, RngStream& rng);

}  // namespace emcs
