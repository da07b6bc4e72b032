#pragma once

// Combination calculus: sums, feedback and feedforward interconnections,
// product norms, continuum mixtures, and the zero-diagonal unitary.

#include "contraction/measures.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace contraction {

using BlockFn = std::function<Mat(double, const Vec&)>;

/// Jacobian blocks J_ij(t, u) of an interconnection. `u` is the full state.
struct BlockSystem {
  std::vector<std::vector<BlockFn>> blocks;  // empty callback = zero block
  std::vector<Index> dims;
  double product_p = 2.0;
  /// Per-block norms; defaults to lp(product_p) for every block.
  std::vector<NormSpec> block_norms;

  Index total_dim() const;
  NormSpec block_norm(std::size_t i) const;
  void validate() const;
  /// Full Jacobian; raises DimensionError on a wrongly shaped block.
  Mat assemble(double t, const Vec& u) const;
  Mat block(std::size_t i, std::size_t j, double t, const Vec& u) const;

  static BlockSystem constant(const std::vector<std::vector<Mat>>& blocks, double product_p = 2.0);
};

/// (sum_i ||v_i||_{V_i}^p)^{1/p}.
double product_norm(const BlockSystem& sys, const Vec& v);

struct AdditiveReport {
  double rate1 = 0.0;
  double rate2 = 0.0;
  double bound = 0.0;   // sup_t alpha1(t) M1 + alpha2(t) M2
  RateEstimate direct;  // rate of alpha1 f1 + alpha2 f2
};

AdditiveReport additive_rate(const VectorField& f1, const VectorField& f2,
                             const std::function<double(double)>& alpha1,
                             const std::function<double(double)>& alpha2, const NormSpec& spec,
                             const DomainSampler& sampler, const std::vector<double>& times = {0.0});

struct FeedbackReport {
  double skew_residual = 0.0;  // sup ||J_ij + J_ji^T||_2 over i < j
  std::vector<double> block_rates;
  double max_block_rate = 0.0;
  RateEstimate composite;  // rate in the l2 product of the block norms
  double zero_range_residual = 0.0;
  /// Set when the coupling is skew and the norm is l2.
  std::optional<double> equivalence_gap;
};

/// `spec` must be a plain lp norm; it is used inside every block.
FeedbackReport feedback_certificate(const BlockSystem& sys, const NormSpec& spec,
                                    const DomainSampler& sampler, double t = 0.0);

struct ProductReport {
  std::vector<double> block_rates;
  double product_rate = 0.0;  // max_i block rate
  /// Rate of the assembled Jacobian in the product norm.
  RateEstimate direct;
  /// Worst fitted decay rate of frozen-state perturbations.
  double simulated_rate = 0.0;
  bool simulation_within_bound = false;
};

ProductReport product_lp_rate(const BlockSystem& sys, const DomainSampler& sampler,
                              double t = 0.0, double horizon = 1.0);

enum class FeedforwardFormula { printed, convolution };

/// Bound on the downstream distance of a stable cascade. `printed` evaluates the
/// (lambda1 + lambda2) denominator form as printed; `convolution` is the
/// variation-of-constants bound.
double feedforward_bound(double lambda1, double lambda2, double B, double d1_0, double d2_0,
                         double t, FeedforwardFormula formula);

struct CascadeCheck {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double coupling = 0.0;
  double max_excess = 0.0;  // sup_t ||du2(t)|| - bound(t)
  double printed_value_at_end = 0.0;
};

/// Simulates x1' = A1 x1, x2' = A2 x2 + C x1 from perturbation (d1, d2) and
/// compares ||x2(t)|| with the convolution bound.
CascadeCheck feedforward_check(const Mat& A1, const Mat& A2, const Mat& C, const Vec& d1,
                               const Vec& d2, double t1, const NormSpec& spec, double h = 1e-3);

struct Quadrature {
  std::vector<double> nodes;
  std::vector<double> weights;
  /// Composite trapezoid rule with n >= 2 uniform nodes.
  static Quadrature trapezoid(double a, double b, int n);
};

struct ContinuumFamily {
  Index dim = 0;
  std::function<Vec(double, double, const Vec&)> f;  // (t, x, u)
  /// Set for families linear in u: f(t, x, u) = A(x) u.
  std::function<Mat(double)> linear;
};

struct ContinuumReport {
  double pointwise_rate = -kInf;
  double weight_integral = 0.0;
  double bound = 0.0;
  RateEstimate direct;
};

/// Raises WeightError for a negative weight node or a non-positive integral.
ContinuumReport continuum_rate(const ContinuumFamily& family,
                               const std::function<double(double)>& phi, const Quadrature& quad,
                               const NormSpec& spec, const DomainSampler& sampler,
                               double t = 0.0);

/// Unitary U with diag(U* A U) = 0 for trace-free A. Raises ArgumentError if
/// |tr A| > tol ||A||.
CMat zero_diagonal_unitary(const CMat& A, double tol = 1e-8);

/// Unit v with v* A v = target, for target in the numerical range of A.
CVec numerical_range_vector(const CMat& A, std::complex<double> target);

}  // namespace contraction
