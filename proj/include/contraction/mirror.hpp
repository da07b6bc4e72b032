#pragma once

// Regression in lp through semi-inner-product duality and mirror descent on
// the dual coordinates.

#include "contraction/measures.hpp"

#include <functional>
#include <vector>

namespace contraction {

/// u -> ||u||_p^{2-p} |u_i|^{p-1} sgn(u_i), so that sum u*_i v_i = sip(u, v).
/// Zero maps to zero. Raises UnsupportedNorm unless 1 < p < inf.
Vec duality_map(const Vec& u, double p);

/// Inverse of duality_map: the same map with the conjugate exponent.
Vec inverse_duality(const Vec& u_star, double p);

struct Loss {
  std::function<double(double, double)> value;       // l(prediction, target)
  std::function<double(double, double)> derivative;  // dl / dprediction

  /// (pred - y)^2 / 2.
  static Loss squared();
  /// delta^2 (sqrt(1 + ((pred - y)/delta)^2) - 1).
  static Loss pseudo_huber(double delta);
};

struct RegressionProblem {
  std::vector<Vec> inputs;
  std::vector<double> targets;
  /// Finite kernel section K(x, .) as a coefficient vector.
  std::function<Vec(const Vec&)> features;
  Loss loss = Loss::squared();
  double p = 2.0;

  void validate() const;
  Index dim() const;
  /// Row i is duality_map(features(x_i)); predictions are sections * u.
  Mat sections() const;
};

/// u(x) = sip(K(x, .), u), linear in u.
double predict(const Vec& u, const Vec& section, double p);

struct RiskGradient {
  double risk = 0.0;
  Vec gradient;  // dual coordinates: sum_i l'(u(x_i), y_i) duality_map(K(x_i, .))
};

RiskGradient risk_and_gradient(const Vec& u, const RegressionProblem& prob);

struct MirrorOptions {
  double alpha = 1.0;
  double h = 0.1;
  std::size_t steps = 1000;
  /// Path points at which the rate of -H is measured.
  std::size_t rate_samples = 20;
  /// Constant weight on the dual space; empty means identity.
  Mat theta;
  std::uint64_t seed = 0;
};

struct MirrorReport {
  Vec u;
  Vec u_star;
  std::vector<double> risk;  // risk before each step and after the last
  double fitted_rate = 0.0;  // log-linear fit of the risk history
  /// sup along the path of M(-H), H = d DL / d u*, in the weighted lq norm.
  RateEstimate path_rate;
  /// 2 / sup ||H||_2: explicit Euler steps alpha h below it are stable.
  double step_threshold = 0.0;
  bool step_warning = false;  // the risk rose over 10 consecutive steps
  double gradient_norm = 0.0;
};

/// Explicit Euler on u*' = -alpha DL(u), u = inverse_duality(u*).
/// Raises ArgumentError for alpha < 0 or h <= 0.
MirrorReport mirror_descent_run(const RegressionProblem& prob, const Vec& u0,
                                const MirrorOptions& opts = {});

}  // namespace contraction
