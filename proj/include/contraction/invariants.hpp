#pragma once

// Certificates for contraction to subspaces, submanifolds, symmetric
// solutions and limit cycles.

#include "contraction/flows.hpp"
#include "contraction/measures.hpp"

#include <functional>
#include <optional>

namespace contraction {

struct SubspaceSpec {
  Mat P;
  Mat Q;

  /// Raises DimensionError for non-square P and ArgumentError when
  /// ||P^2 - P|| > 1e-10.
  static SubspaceSpec from_projection(Mat P);
};

/// Log-norm of the induced dynamics of dv = K du when d/dt (K du) = G du.
///
/// If G does not vanish on ker K (relative tolerance `leak_tol`) the
/// reduced dynamics are not closed and the rate is +inf. Otherwise the rate
/// is the log norm of L = G K^+ on Im K, in the spec norm.
RateEstimate projected_rate(const Mat& K, const Mat& G, const NormSpec& spec,
                            std::uint64_t seed = 0, double leak_tol = 1e-6);

/// M^Q(J): +inf when Q J P != 0 (relative tolerance 1e-6), otherwise the log
/// norm of Q J restricted to Im Q.
RateEstimate subspace_rate(const Mat& J, const SubspaceSpec& sub, const NormSpec& spec,
                           std::uint64_t seed = 0);

struct SubspaceReport {
  double invariance_residual = 0.0;  // sup ||Q f(t, P v)||
  double coupling_residual = 0.0;    // sup ||Q Df P||, nonzero forces rate +inf
  RateEstimate rate;                 // sup M^Q(Df)
  bool pass = false;
};

SubspaceReport subspace_certificate(const VectorField& f, const SubspaceSpec& sub,
                                    const DomainSampler& sampler, const NormSpec& spec,
                                    double t = 0.0, double tol = 1e-8);

struct ManifoldSpec {
  std::function<Vec(const Vec&)> phi;
  std::function<Mat(const Vec&)> dphi;  // finite-differenced when empty
  Index codomain_dim = 1;
  /// Optional angle parameterization of a loop-shaped zero set.
  std::function<Vec(double)> loop;

  Mat jacobian(const Vec& u) const;
  /// phi(u) = C u.
  static ManifoldSpec linear(Mat C);
};

/// Gauss-Newton projection onto phi = 0 (10 iterations, tol 1e-10).
/// Returns nullopt when the iteration does not reach the zero set.
std::optional<Vec> project_to_zero_set(const ManifoldSpec& man, const Vec& u0);

struct ManifoldReport {
  double tangency_residual = 0.0;  // sup ||Dphi(z) f(t, z)|| on zero-set samples
  double min_singular_value = 0.0;
  std::size_t zero_set_points = 0;
  /// Rate of the phi-dynamics d/dt Dphi du = (Dphi Df + D^2phi[f]) du.
  RateEstimate rate;
  /// The same quotient with the curvature term D^2phi[f] dropped.
  RateEstimate rate_without_curvature;
  bool pass = false;
};

/// Raises RegularityError if Dphi loses full row rank (sigma_min <= 1e-8) at
/// a projected zero-set sample.
ManifoldReport manifold_certificate(const VectorField& f, const ManifoldSpec& man,
                                    const DomainSampler& on_manifold,
                                    const DomainSampler& ambient, const NormSpec& spec,
                                    double t = 0.0, double tol = 1e-8);

struct SymmetrySpec {
  std::optional<Mat> T;
  std::function<Vec(const Vec&)> h;
  std::function<Mat(const Vec&)> dh;  // finite-differenced when empty
  std::function<Vec(const Vec&)> h_inv;

  static SymmetrySpec linear(Mat T);
  static SymmetrySpec diffeo(std::function<Vec(const Vec&)> h,
                             std::function<Mat(const Vec&)> dh = {},
                             std::function<Vec(const Vec&)> h_inv = {});
};

/// sup ||f(t, T u) - T f(t, u)|| (or ||f(t, h(u)) - Dh(u) f(t, u)||) over
/// samples. Raises SymmetryError for a singular T or a failed h roundtrip.
double equivariance_residual(const VectorField& f, const SymmetrySpec& sym,
                             const DomainSampler& sampler, double t = 0.0);

/// sup ||f(t, T u) - T f(t + delta_t, u)|| over samples u and times t in
/// [0, k delta_t). Raises SymmetryError unless ||T^k - I|| <= 1e-8.
double spatiotemporal_residual(const VectorField& f, const Mat& T, double delta_t, int order_k,
                               const DomainSampler& sampler, int time_samples = 16);

struct LimitCycleReport {
  double tangency_residual = 0.0;
  double periodicity_residual = 0.0;
  double min_speed = 0.0;
  RateEstimate rate;
  bool pass = false;
};

/// Loop points come from man.loop on a uniform angle grid; times from a
/// uniform grid on [0, period).
LimitCycleReport limit_cycle_certificate(const VectorField& g, const ManifoldSpec& man,
                                         double period, const DomainSampler& ambient,
                                         const NormSpec& spec, double tol = 1e-8,
                                         int loop_samples = 256, int time_samples = 8);

struct DecayReport {
  double fitted_rate = 0.0;
  double kappa = 1.0;
  std::size_t monotonicity_violations = 0;
  std::vector<double> times;
  std::vector<double> distances;
};

/// Log-linear fit of d(u(t), E) on the window [t_begin, t_end]. Distances are
/// clamped at 1e-300; if every distance is zero the rate is -inf.
DecayReport set_distance_decay(const Trajectory& traj,
                               const std::function<double(const Vec&)>& distance,
                               double t_begin = -kInf, double t_end = kInf);

}  // namespace contraction
