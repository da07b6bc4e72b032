#pragma once

// Fixed-step integration and trajectory-based contraction certificates.

#include "contraction/spaces.hpp"
#include "contraction/types.hpp"

#include <span>
#include <utility>
#include <vector>

namespace contraction {

inline constexpr double kBlowUp = 1e100;

struct Trajectory {
  std::vector<double> times;
  std::vector<Vec> states;
  double step = 0.0;

  std::size_t size() const { return times.size(); }
  const Vec& final_state() const { return states.back(); }
  /// Raises ArgumentError unless times increase with uniform spacing.
  void validate() const;
};

/// Classical RK4 on [t0, t1]. The step is adjusted to (t1 - t0) / N with
/// N = max(1, round((t1 - t0) / h)) so the grid ends exactly at t1.
/// Raises DivergenceError once the state norm exceeds 1e100.
Trajectory integrate(const VectorField& f, const Vec& u0, double t0, double t1, double h);

struct VariationalTrajectory {
  Trajectory state;
  Trajectory perturbation;
};

/// Co-integrates u' = f(t, u) and du' = Df_t(u) du with the same RK4 stages.
VariationalTrajectory variational_flow(const VectorField& f, const Vec& u0, const Vec& du0,
                                       double t0, double t1, double h);

struct OvershootFit {
  double lambda = 0.0;
  double kappa = 1.0;
  double residual_rms = 0.0;
};

/// Least-squares fit of log d(t) = log kappa + lambda t. A kappa below 1 that
/// is within the fit noise of 1 is reported as 1.
OvershootFit overshoot_fit(std::span<const double> times, std::span<const double> distances);

struct CertificateOptions {
  double h = 1e-3;
  double tol_abs = 1e-6;
  double tol_rel = 1e-6;
};

struct CertificateResult {
  double claimed_lambda = 0.0;
  double claimed_kappa = 1.0;
  double max_violation = 0.0;
  double fitted_lambda = 0.0;
  double fitted_kappa = 1.0;
  bool pass = false;
  std::size_t pairs = 0;
  std::size_t checks = 0;
};

/// Integrates every pair and checks
///   ||u1(t) - u2(t)|| <= kappa e^{lambda (t - s)} ||u1(s) - u2(s)||
/// on grid pairs s <= t sampled with stride max(1, N / 50).
CertificateResult verify_contraction(const VectorField& f,
                                     const std::vector<std::pair<Vec, Vec>>& pairs,
                                     const NormSpec& spec, double lambda, double kappa,
                                     double t0, double t1, const CertificateOptions& opts = {});

/// Distances ||a(t_k) - b(t_k)|| in the spec norm for trajectories on one grid.
std::vector<double> pair_distances(const Trajectory& a, const Trajectory& b,
                                   const NormSpec& spec);

}  // namespace contraction
