#pragma once

// Method-of-lines discretizations: grids, Laplacians, Sobolev rates,
// reaction-diffusion pattern analysis, conservation laws and fixed points.

#include "contraction/flows.hpp"
#include "contraction/invariants.hpp"
#include "contraction/measures.hpp"

#include <functional>
#include <string>
#include <vector>

namespace contraction {

enum class Boundary { dirichlet, neumann, periodic };

std::string to_string(Boundary bc);
Boundary boundary_from_string(const std::string& name);

/// Second-order differences everywhere, or the Fourier-spectral Laplacian on
/// periodic grids (exact on resolved trigonometric modes).
enum class LaplacianScheme { second_order, spectral };

/// Uniform grid on [0, L]^d, d in {1, 2}, with n points per axis.
///
/// Spacing: L/(n+1) for dirichlet (interior points), L/n for periodic and
/// L/(n-1) for neumann (vertex-centered, boundary points included).
struct Grid {
  int n = 3;
  int dim = 1;
  Boundary bc = Boundary::dirichlet;
  double length = 1.0;
  LaplacianScheme scheme = LaplacianScheme::second_order;

  static Grid line(int n, Boundary bc, double length = 1.0);
  static Grid square(int n, Boundary bc, double length = 1.0);

  void validate() const;
  double h() const;
  Index size() const;
  /// Axis coordinates of the n points.
  Vec axis() const;
  /// Coordinates of every point; column k is point k (x fastest).
  Mat points() const;
  /// Quadrature weights: h^d, with halved boundary weights for neumann.
  Vec weights() const;
  /// Norm whose l2 inner product is the quadrature one; the discrete
  /// Laplacian is self-adjoint in it for all three boundary conditions.
  NormSpec l2_norm() const;
  /// Samples a function of the coordinates on the grid.
  Vec sample(const std::function<double(const Vec&)>& fn) const;
};

Mat build_laplacian(const Grid& grid);

/// Forward difference along `axis` consistent with the boundary condition.
Mat forward_difference(const Grid& grid, int axis = 0);

/// Central first difference (skew-adjoint on periodic grids).
Mat central_difference(const Grid& grid);

struct SobolevSpec {
  int k = 1;
  double p = 2.0;

  /// Stacking [I; D^1; ...; D^k] with D^j the j-fold forward differences
  /// (all axis combinations on 2-D grids). Raises ArgumentError unless
  /// 0 <= k <= 4.
  NormSpec norm(const Grid& grid) const;
};

/// Projection onto grid constants (per component when `components` > 1),
/// orthogonal in the quadrature inner product.
SubspaceSpec constant_projection(const Grid& grid, int components = 1);

struct PoincareReport {
  RateEstimate rate;
  bool projected = false;
  bool degenerate = false;  // constants in the kernel and no projection
};

/// Log norm of the discrete Laplacian in `spec`, restricted to mass-zero
/// states when `mean_free` and the boundary condition admits constants.
PoincareReport poincare_rate(const Grid& grid, const NormSpec& spec, bool mean_free = true);
/// Same, in the grid's quadrature l2 norm.
PoincareReport poincare_rate(const Grid& grid, bool mean_free = true);

/// Pointwise reaction: component values at one grid point -> their rates.
using Reaction = std::function<Vec(double, const Vec&)>;

struct RdSystem {
  Grid grid;
  std::vector<double> alphas;
  Reaction reaction;  // empty means f = 0

  int components() const { return static_cast<int>(alphas.size()); }
  void validate() const;
  /// Method-of-lines field on the stacked state [u_1; ...; u_m].
  VectorField field() const;
  /// Jacobian of the reaction part alone at a stacked state.
  Mat reaction_jacobian(double t, const Vec& u) const;
  /// Block-diagonal diffusion operator diag(alpha_i Delta).
  Mat diffusion() const;
  /// Explicit-stepper stability limit h^2 / (2 d max alpha).
  double max_step() const;
};

struct RdResult {
  Trajectory trajectory;
  /// Quadrature mass of each component at every stored time.
  std::vector<Vec> mass;
};

/// RK4 method of lines. Raises StepSizeError (carrying the limit) when
/// h_t exceeds h^2 / (2 d max alpha).
RdResult rd_simulate(const RdSystem& sys, const Vec& u0, double t0, double t1, double h_t);

enum class PatternMode { suppression, excitation };

struct PatternOptions {
  double t_end = 0.2;
  double h_t = 0.0;  // 0 selects 0.9 of the stability limit
  double tol = 1e-8;
  double time = 0.0;
};

struct PatternReport {
  PatternMode mode = PatternMode::suppression;
  // Suppression: Q f(P v) = 0, then M^Q(f) against the diffusion gap.
  double invariance_residual = 0.0;
  double reaction_rate = 0.0;  // sup M^Q(Df)
  double laplacian_rate = 0.0; // M^Q(Delta) on mass-zero states
  double min_alpha = 0.0;
  bool rate_condition = false;          // M^Q(f) < min alpha |M^Q(Delta)|
  bool printed_rate_condition = false;  // M^Q(f) < M^Q(Delta)
  double predicted_rate = 0.0;          // M^Q(f) + min alpha M^Q(Delta)
  // Excitation conditions.
  std::vector<double> witness_residuals;  // ||f_i(u*, -u*) + alpha_i Delta u*||_inf
  double witness_mass = 0.0;              // ||Q u*||, zero when u* lies in Im Delta
  double excitation_rate_sum = 0.0;       // sum_i M(D_v f_i) on mass-zero states
  double excitation_bound = 0.0;          // (alpha_1 + alpha_2) |M(Delta)| on mass-zero states
  double excitation_bound_printed_q = 0.0;  // the same with Q onto constants
  // End-to-end simulation.
  double simulated_rate = 0.0;  // fitted decay of the monitored distance
  double mode1_growth = 0.0;    // |a_1(T)| / |a_1(0)| of the first Fourier mode
  double sync_distance_end = 0.0;
  double antisync_distance_end = 0.0;
  bool simulation_consistent = false;
  bool pass = false;
};

/// Suppression: P projects onto constants (zero-flux or periodic grids).
/// Excitation: two components, P projects onto Im(Delta); `witness` u* must be
/// nonzero (ArgumentError otherwise).
PatternReport pattern_report(const RdSystem& sys, const DomainSampler& sampler, PatternMode mode,
                             const Vec& witness = {}, const PatternOptions& opts = {});

/// Integral rate in the stacked Sobolev norm. With `mean_free` the rate is
/// taken on mass-zero states.
RateEstimate sobolev_rate(const VectorField& F, const Grid& grid, const SobolevSpec& sob,
                          const DomainSampler& sampler, bool mean_free = false);

/// Linearization A(u) v = -D (f'(u) v) of u_t + f(u)_x = 0 with central D.
std::function<Mat(const Vec&)> advection_linearization(const Grid& grid,
                                                       std::function<double(double)> flux_prime);

struct ConservationReport {
  RateEstimate rate;        // sup over mass-zero u of M_2(A(u)) on mass-zero v
  double skewness = 0.0;    // sup ||sym A(u)|| / ||A(u)||
  /// A(u) varies with u: smooth data steepen into shocks in finite time,
  /// outside the smooth-solution setting of the rate.
  bool nonlinear = false;
};

/// Requires a periodic grid; samples are projected to mass zero.
ConservationReport conservation_rate(const std::function<Mat(const Vec&)>& linearization,
                                     const Grid& grid, const DomainSampler& sampler);

struct ClawResult {
  Trajectory trajectory;
  std::vector<double> mass;
  double max_mass_drift = 0.0;
};

/// u_t = -D_c f(u) on a periodic grid with RK4.
ClawResult claw_simulate(const Grid& grid, const std::function<double(double)>& flux,
                         const Vec& u0, double t1, double h_t);

struct FixedPointOptions {
  double tol = 1e-10;
  double max_t = 100.0;
  double h_t = 0.0;  // 0 selects 2 / ||DF(u0)||_inf
  bool force = false;
};

struct FixedPointReport {
  Vec solution;
  RateEstimate rate;
  bool rate_sampled = false;
  bool converged = false;
  double residual = 0.0;
  double time = 0.0;
  std::vector<double> residual_times;
  std::vector<double> residual_history;
  double fitted_rate = 0.0;
};

/// Integrates u' = F(u) until ||F(u)||_inf <= tol. Raises CertificateRefused
/// when the measured rate is not negative, unless `force` is set.
FixedPointReport fixed_point_solve(const VectorField& F, const Vec& u0, const NormSpec& spec,
                                   const DomainSampler& sampler, const FixedPointOptions& opts = {});

/// CSV with columns x[, y], u1, ..., um for a stacked state.
std::string grid_csv(const Grid& grid, const Vec& state, int components = 1);

}  // namespace contraction
