#include "theory.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <sstream>

#include "error.hpp"
#include "normal.hpp"

namespace emcs {

void GaussianPair::Validate() const {
  if (!(sigma_sq[0] >= 0.0) || !(sigma_sq[1] >= 0.0) ||
      sigma12 * sigma12 > sigma_sq[0] * sigma_sq[1] * (1.0 + 1e-12)) {
    Fail(ErrorKind::kInvalidArgument, "gaussian pair: covariance not PSD");
  }
  if (!(n >= 1.0)) Fail(ErrorKind::kInvalidArgument, "gaussian pair: n must be >= 1");
}

void EmcsGaussian::Validate() const {
  if (!(sigma_sq_tilde[0] >= 0.0) || !(sigma_sq_tilde[1] >= 0.0) ||
      sigma12_tilde * sigma12_tilde >
          sigma_sq_tilde[0] * sigma_sq_tilde[1] * (1.0 + 1e-12)) {
    Fail(ErrorKind::kInvalidArgument, "emcs gaussian: covariance not PSD");
  }
  if (!(a_n >= 1.0)) Fail(ErrorKind::kInvalidArgument, "emcs gaussian: a_n must be >= 1");
}

namespace {

void CheckIndex(int j) {
  if (j != 1 && j != 2) Fail(ErrorKind::kInvalidArgument, "estimator index must be 1 or 2");
}

int StrictArgmin(double mse1, double mse2) {
  if (mse1 == mse2) {
    Fail(ErrorKind::kNoStrictPreference, "equal MSEs: no strictly preferred estimator");
  }
  return mse1 < mse2 ? 1 : 2;
}

}  // namespace

double GaussianMse(const GaussianPair& pair, int j) {
  CheckIndex(j);
  const double bias = pair.means[j - 1] - pair.theta0;
  return bias * bias + pair.sigma_sq[j - 1] / pair.n;
}

double EmcsMse(const EmcsGaussian& emcs, int j) {
  CheckIndex(j);
  const double bias = emcs.means_tilde[j - 1] - emcs.theta0_tilde;
  return bias * bias + emcs.sigma_sq_tilde[j - 1] / emcs.a_n;
}

int TrueBest(const GaussianPair& pair) {
  pair.Validate();
  return StrictArgmin(GaussianMse(pair, 1), GaussianMse(pair, 2));
}

int EmcsBest(const EmcsGaussian& emcs) {
  emcs.Validate();
  return StrictArgmin(EmcsMse(emcs, 1), EmcsMse(emcs, 2));
}

int EmcsValidityIndicator(const GaussianPair& pair, const EmcsGaussian& emcs) {
  return TrueBest(pair) == EmcsBest(emcs) ? 1 : 0;
}

void PropensityMoments::Validate(double tol) const {
  std::ostringstream problems;
  if (!(p_treat > 0.0 && p_treat < 1.0)) problems << " p_treat not in (0,1);";
  if (!(m_inv > 0.0 && m_sq > 0.0 && m_lin > 0.0 && m_prod >= 0.0)) {
    problems << " moments must be positive;";
  }
  if (m_inv * m_lin < 1.0 - tol) problems << " m_inv < 1/m_lin (Jensen);";
  if (m_sq < m_lin * m_lin * (1.0 - tol)) problems << " m_sq < m_lin^2 (Jensen);";
  const std::string text = problems.str();
  if (!text.empty()) Fail(ErrorKind::kInvalidArgument, "propensity moments:" + text);
}

PropensityMoments ConstantPropensityMoments(double p) {
  return {p, 1.0 / (1.0 - p), (1.0 - p) * (1.0 - p), 1.0 - p, p * (1.0 - p)};
}

void DgpTheorySpec::Validate() const {
  if (!(c > 0.0) || !(sigma_eps_sq > 0.0)) {
    Fail(ErrorKind::kInvalidArgument, "theory spec: c and sigma_eps_sq must be > 0");
  }
  moments.Validate();
}

double SebAtt(const DgpTheorySpec& spec) {
  spec.Validate();
  const auto& m = spec.moments;
  return spec.sigma_eps_sq / m.p_treat * (spec.c - 1.0 + m.m_inv);
}

double SebAttGeneral(std::span<const ConditionalNode> nodes, double p_treat) {
  if (!(p_treat > 0.0 && p_treat < 1.0) || nodes.empty()) {
    Fail(ErrorKind::kInvalidArgument, "general SEB: invalid inputs");
  }
  double att = 0.0;
  for (const auto& node : nodes) att += node.weight * node.effect;
  double total = 0.0;
  for (const auto& node : nodes) {
    const double dev = node.effect - att;
    total += node.weight * (node.var1 +
                            node.propensity / (1.0 - node.propensity) * node.var0 +
                            dev * dev);
  }
  return total / p_treat;
}

double OlsAvar(const DgpTheorySpec& spec) {
  spec.Validate();
  const auto& m = spec.moments;
  const double lin_sq = m.m_lin * m.m_lin;
  return spec.sigma_eps_sq / m.p_treat * (spec.c * m.m_sq / lin_sq + m.m_prod / lin_sq);
}

Deltas ComputeDeltas(const PropensityMoments& m) {
  m.Validate();
  // Jensen makes both non-negative; clip rounding residue at zero.
  return {std::max(0.0, m.m_inv - 1.0 / m.m_lin),
          std::max(0.0, m.m_sq / (m.m_lin * m.m_lin) - 1.0)};
}

double CThreshold(const PropensityMoments& m) {
  const Deltas d = ComputeDeltas(m);
  if (!(d.delta2 > 1e-14)) {
    Fail(ErrorKind::kUndefined,
         "c threshold undefined: propensity is degenerate among the treated");
  }
  return d.delta1 / d.delta2 + 1.0;
}

PlaceboVariancePair PlaceboVariances(const PropensityMoments& placebo_moments,
                                     double sigma_eps_sq, double p_treat_tilde) {
  placebo_moments.Validate();
  if (!(p_treat_tilde > 0.0 && p_treat_tilde < 1.0) || !(sigma_eps_sq > 0.0)) {
    Fail(ErrorKind::kInvalidArgument, "placebo variances: invalid inputs");
  }
  const double scale = sigma_eps_sq / p_treat_tilde;
  PlaceboVariancePair v{scale * placebo_moments.m_inv, scale / placebo_moments.m_lin};
  // Jensen: E[1/(1-e)] >= 1/E[1-e].
  if (v.ipw < v.ols * (1.0 - 1e-12)) {
    Fail(ErrorKind::kUndefined, "placebo variances violate the Jensen ordering");
  }
  return v;
}

std::pair<std::vector<double>, std::vector<double>> GaussLegendre(int n, double lo,
                                                                  double hi) {
  if (n < 1 || !(lo < hi)) Fail(ErrorKind::kInvalidArgument, "gauss-legendre: bad rule");
  std::vector<double> nodes(static_cast<std::size_t>(n));
  std::vector<double> weights(static_cast<std::size_t>(n));
  const double mid = 0.5 * (hi + lo);
  const double half = 0.5 * (hi - lo);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    // Tricomi's initial guess, then Newton on P_n.
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double step = p0 / dp;
      z -= step;
      if (std::abs(step) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    const auto a = static_cast<std::size_t>(i);
    const auto b = static_cast<std::size_t>(n - 1 - i);
    nodes[a] = mid - half * z;
    nodes[b] = mid + half * z;
    weights[a] = weights[b] = half * w;
  }
  return {nodes, weights};
}

namespace {

// Integrates propensity moments of `prop` under density `dens` (unnormalized)
// on [lo, hi], conditioning on treatment.
PropensityMoments Integrate(const std::function<double(double)>& dens,
                            const std::function<double(double)>& prop, double lo,
                            double hi, int n_nodes) {
  const auto [x, w] = GaussLegendre(n_nodes, lo, hi);
  double mass = 0.0, treated = 0.0, inv = 0.0, sq = 0.0, lin = 0.0, prod = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double f = w[k] * dens(x[k]);
    const double e = prop(x[k]);
    mass += f;
    const double g = f * e;  // treated mass at this node
    treated += g;
    inv += g / (1.0 - e);
    sq += g * (1.0 - e) * (1.0 - e);
    lin += g * (1.0 - e);
    prod += g * e * (1.0 - e);
  }
  return {treated / mass, inv / treated, sq / treated, lin / treated, prod / treated};
}

std::function<double(double)> CovariateDensity(const ScenarioSpec& spec) {
  const auto& d = spec.x_dist;
  return [d](double x) { return NormalPdf((x - d.mean) / d.sd) / d.sd; };
}

}  // namespace

PropensityMoments PropensityMomentsForScenario(const ScenarioSpec& spec, int n_nodes) {
  spec.Validate();
  return Integrate(
      CovariateDensity(spec), [&](double x) { return spec.Propensity(x); },
      spec.x_dist.lower, spec.x_dist.upper, n_nodes);
}

PropensityMoments PlaceboMomentsForScenario(const ScenarioSpec& spec, int n_nodes) {
  const PropensityMoments original = PropensityMomentsForScenario(spec, n_nodes);
  const auto base = CovariateDensity(spec);
  auto control_density = [&](double x) { return base(x) * (1.0 - spec.Propensity(x)); };
  const double lo = spec.x_dist.lower;
  const double hi = spec.x_dist.upper;
  const double e_min = std::min(spec.Propensity(lo), spec.Propensity(hi));
  const double e_max = std::max(spec.Propensity(lo), spec.Propensity(hi));
  // The treated share among controls is increasing in the shift.
  auto share = [&](double shift) {
    return Integrate(control_density,
                     [&](double x) { return spec.Propensity(x) + shift; }, lo, hi,
                     n_nodes)
        .p_treat;
  };
  double a = -e_min;
  double b = 1.0 - e_max;
  if (!(a < b) || share(a) > original.p_treat || share(b) < original.p_treat) {
    Fail(ErrorKind::kUndefined,
         "placebo moments: shifted propensity cannot stay inside (0,1) on the support");
  }
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (a + b);
    (share(mid) < original.p_treat ? a : b) = mid;
  }
  const double shift = 0.5 * (a + b);
  if (spec.Propensity(lo) + shift >= 1.0 || spec.Propensity(hi) + shift >= 1.0) {
    Fail(ErrorKind::kUndefined, "placebo moments: shifted propensity reaches 1");
  }
  return Integrate(control_density,
                   [&](double x) { return spec.Propensity(x) + shift; }, lo, hi, n_nodes);
}

ScenarioTheory EvaluateScenarioTheory(const ScenarioSpec& spec, std::optional<double> c,
                                      int n_nodes) {
  ScenarioTheory t;
  t.moments = PropensityMomentsForScenario(spec, n_nodes);
  if (!(spec.sigma0 > 0.0)) {
    Fail(ErrorKind::kInvalidArgument, "theory: sigma0 must be > 0");
  }
  t.sigma_eps_sq = spec.sigma0 * spec.sigma0;
  t.c = c ? *c : (spec.sigma1 * spec.sigma1) / t.sigma_eps_sq;
  const DgpTheorySpec dgp{t.c, t.sigma_eps_sq, t.moments};
  t.sigma1_sq = SebAtt(dgp);
  t.sigma2_sq = OlsAvar(dgp);
  t.deltas = ComputeDeltas(t.moments);
  if (t.deltas.delta2 > 1e-14) t.c_threshold = CThreshold(t.moments);
  t.placebo = PlaceboVariances(t.moments, t.sigma_eps_sq, t.moments.p_treat);
  return t;
}

}  // namespace emcs
