#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "driftbench/core.hpp"

namespace driftbench {

/// Per-round realized and optimal losses of one sample path.
///
/// Gaps may be negative when the optimal value comes from a sampled oracle;
/// they are kept signed.
class RegretLedger {
 public:
  void record(std::size_t t, double realized_loss, double optimal_loss) {
    if (t != realized_.size() + 1) {
      throw UsageError("RegretLedger::record: expected round " +
                       std::to_string(realized_.size() + 1) + ", got " + std::to_string(t));
    }
    realized_.push_back(realized_loss);
    optimal_.push_back(optimal_loss);
    const double prev = cumulative_.empty() ? 0.0 : cumulative_.back();
    cumulative_.push_back(prev + (realized_loss - optimal_loss));
  }

  std::size_t rounds() const { return realized_.size(); }
  const std::vector<double>& realized() const { return realized_; }
  const std::vector<double>& optimal() const { return optimal_; }

  double gap(std::size_t t) const { return realized_.at(t - 1) - optimal_.at(t - 1); }

  /// Regret(T) = sum_{t <= T} (F_t(x_t) - F_t*)
  double regret(std::size_t t) const {
    if (t == 0) return 0.0;
    if (t > cumulative_.size()) throw UsageError("RegretLedger::regret: round not recorded");
    return cumulative_[t - 1];
  }

  double regret() const { return regret(rounds()); }

  /// (1/t) Regret(t) / Regret(1)
  double relative_regret(std::size_t t) const {
    const double first = regret(1);
    if (first == 0.0) throw std::domain_error("relative_regret: Regret(1) is zero");
    return regret(t) / (static_cast<double>(t) * first);
  }

  std::vector<double> relative_regret_series() const {
    std::vector<double> out(rounds());
    for (std::size_t t = 1; t <= rounds(); ++t) out[t - 1] = relative_regret(t);
    return out;
  }

 private:
  std::vector<double> realized_;
  std::vector<double> optimal_;
  std::vector<double> cumulative_;
};

/// Constants entering the regret bounds. Per-round lists have length T - 1.
struct BoundInputs {
  double mu = 1.0;
  double beta = 1.0;
  double K = 0.0;
  double gamma = 0.1;
  double initial_gap = 0.0;
  std::vector<double> J_values;
  std::vector<double> eta;
  std::vector<double> sigma_sq;
  double kappa = 0.0;       // corollary only
  double C_constant = 0.0;  // corollary only
};

namespace detail {

inline double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

inline double sum_squares(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

inline void require_positive_constants(const BoundInputs& in) {
  require(in.mu > 0.0 && in.beta > 0.0, "bound: mu and beta must be positive");
  require(in.gamma > 0.0, "bound: gamma must be positive");
  require(in.K >= 0.0 && in.initial_gap >= 0.0, "bound: K and initial_gap must be >= 0");
}

}  // namespace detail

/// zeta = gamma - gamma^2 beta / 2
inline double zeta(double gamma, double beta) { return gamma - 0.5 * gamma * gamma * beta; }

enum class BoundForm {
  kSimplified,    // final coefficient gamma beta / (2 mu)
  kUnsimplified,  // coefficient gamma^2 beta / (4 mu zeta), tighter when gamma <= 1/beta
};

/// Regret bound for online SGD under PL. With `enforce_range` the step must lie in
/// (0, min(1/beta, 1/(2 mu))); otherwise only zeta > 0 is required.
inline double theorem1_bound(const BoundInputs& in, BoundForm form = BoundForm::kSimplified,
                             bool enforce_range = true) {
  detail::require_positive_constants(in);
  const double limit = std::min(1.0 / in.beta, 1.0 / (2.0 * in.mu));
  if (enforce_range && !(in.gamma < limit)) {
    throw PreconditionError("theorem1_bound: gamma must lie in (0, min(1/beta, 1/(2 mu)))");
  }
  const double z = zeta(in.gamma, in.beta);
  if (!(z > 0.0)) throw PreconditionError("theorem1_bound: zeta must be positive");
  const double mu = in.mu;
  const double noise_coeff = form == BoundForm::kSimplified
                                 ? in.gamma * in.beta / (2.0 * mu)
                                 : in.gamma * in.gamma * in.beta / (4.0 * mu * z);
  return in.initial_gap / (2.0 * mu * z) + in.K / (mu * z) * detail::sum(in.eta) +
         detail::sum_squares(in.J_values) / (4.0 * mu * mu * z) +
         noise_coeff * detail::sum(in.sigma_sq);
}

/// Bound for the step gamma = Theta / sqrt(T), Theta = min(1/beta, 1/(2 mu)),
/// when every sigma_t <= sigma.
inline double theorem1_variance_bound(const BoundInputs& in, double sigma, std::size_t T) {
  detail::require(in.mu > 0.0 && in.beta > 0.0, "theorem1_variance_bound: mu and beta must be positive");
  detail::require(T >= 1, "theorem1_variance_bound: T must be >= 1");
  const double theta = std::min(1.0 / in.beta, 1.0 / (2.0 * in.mu));
  const double root_t = std::sqrt(static_cast<double>(T));
  const double m1 = in.initial_gap / (in.mu * theta) + sigma * sigma / (2.0 * in.mu);
  const double m2 = 2.0 * in.K / (in.mu * theta);
  const double m3 = 1.0 / (2.0 * in.mu * in.mu * theta);
  return m1 * root_t + m2 * root_t * detail::sum(in.eta) +
         m3 * root_t * detail::sum_squares(in.J_values);
}

/// Regret bound for online proximal SGD under the proximal PL condition, gamma in (0, 1/beta).
inline double theorem2_bound(const BoundInputs& in) {
  detail::require_positive_constants(in);
  if (!(in.gamma < 1.0 / in.beta)) {
    throw PreconditionError("theorem2_bound: gamma must lie in (0, 1/beta)");
  }
  const double mu = in.mu;
  const double g = in.gamma;
  return in.initial_gap / (2.0 * mu * g) + in.K / (mu * g) * detail::sum(in.eta) +
         detail::sum_squares(in.J_values) / (4.0 * mu * mu * g) +
         detail::sum(in.sigma_sq) / (4.0 * mu);
}

/// Regret bound for online SGD on the CVaR objective; C_constant is user supplied.
inline double corollary_cvar_bound(const BoundInputs& in, double zeta_value) {
  detail::require(in.kappa > 0.0, "corollary_cvar_bound: kappa must be positive");
  detail::require(zeta_value > 0.0, "corollary_cvar_bound: zeta must be positive");
  const double k = in.kappa;
  return in.initial_gap / (2.0 * k * zeta_value) +
         (in.K + in.C_constant / (4.0 * k)) / (k * zeta_value) * detail::sum(in.eta) +
         in.gamma * in.beta / (2.0 * k) * detail::sum(in.sigma_sq);
}

}  // namespace driftbench
