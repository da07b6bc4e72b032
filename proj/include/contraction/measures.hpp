#pragma once

// Logarithmic norms, SIP numerical ranges and contraction-rate functionals.

#include "contraction/spaces.hpp"
#include "contraction/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace contraction {

enum class RateKind { exact_closed_form, eigen_exact, sampled_lower_bound };

std::string to_string(RateKind kind);

/// A computed rate. `sampled_lower_bound` values come from finitely many
/// samples plus local ascent and under-estimate the true supremum.
struct RateEstimate {
  double value = 0.0;
  RateKind kind = RateKind::exact_closed_form;
  std::size_t samples = 0;
  std::size_t ascent_iters = 0;

  bool is_exact() const { return kind != RateKind::sampled_lower_bound; }
};

struct Box {
  Vec lo;
  Vec hi;
};

struct Sphere {
  Vec center;
  double radius = 1.0;
  bool surface = false;  // sample the sphere itself rather than the ball
};

struct PointList {
  std::vector<Vec> points;
};

/// Seeded sample source over a region of R^n. Identical seeds give
/// identical sequences.
struct DomainSampler {
  std::uint64_t seed = 0;
  std::variant<Box, Sphere, PointList> region;
  std::size_t count = 100;

  static DomainSampler box(Vec lo, Vec hi, std::size_t count, std::uint64_t seed = 0);
  static DomainSampler interval(double lo, double hi, std::size_t count,
                                std::uint64_t seed = 0);
  static DomainSampler ball(Vec center, double radius, std::size_t count,
                            std::uint64_t seed = 0);
  static DomainSampler sphere(Vec center, double radius, std::size_t count,
                              std::uint64_t seed = 0);
  static DomainSampler points(std::vector<Vec> pts);

  Index dim() const;
  std::vector<Vec> draw() const;
  /// Nearest point of the region (identity for point lists).
  Vec project(const Vec& x) const;
  /// A length scale of the region, used to size ascent steps.
  double scale() const;
  bool allows_ascent() const { return !std::holds_alternative<PointList>(region); }
};

/// Closed-form log norm for p in {1, 2, inf}: column sums, row sums, or the
/// top eigenvalue of the Hermitian part.
RateEstimate lognorm_closed(const Mat& A, double p);
RateEstimate lognorm_closed(const CMat& A, double p);

/// lim_{h->0+} (||I + hA|| - 1) / h in the spec norm, by Richardson
/// extrapolation over a shrinking-h ladder. Exact operator norms for
/// p in {1, inf}, an SVD for p = 2, sampled sphere maximization otherwise.
RateEstimate lognorm_limit(const Mat& A, const NormSpec& spec, std::uint64_t seed = 0);

/// sup over z != 0 of (Bz, A B z)_+ / ||Bz||^2 in the spec norm, i.e. the log
/// norm of A restricted to the column space of `basis`. Exact for p = 2 and
/// for p in {1, inf} on the full space; sampled otherwise.
RateEstimate restricted_lognorm(const Mat& A, const Mat& basis, const NormSpec& spec,
                                std::uint64_t seed = 0);

/// Log norm of A in an arbitrary spec.
RateEstimate lognorm(const Mat& A, const NormSpec& spec, std::uint64_t seed = 0);

/// Induced operator norm; exact for p in {1, 2, inf}.
double operator_norm(const Mat& A, const NormSpec& spec, std::uint64_t seed = 0);

/// sup_{u != v} (u - v, f(u) - f(v))_+ / ||u - v||^2.
RateEstimate integral_rate(const VectorField& f, const DomainSampler& sampler,
                           const NormSpec& spec, double t = 0.0);

/// sup_u M(Df(u)).
RateEstimate differential_rate(const VectorField& f, const DomainSampler& sampler,
                               const NormSpec& spec, double t = 0.0);

/// Weight Theta(t, u). `theta_dot`, when given, returns the total derivative
/// of Theta along the flow; otherwise it is finite-differenced.
struct WeightFamily {
  std::optional<Mat> constant;
  std::function<Mat(double, const Vec&)> theta;
  std::function<Mat(double, const Vec&)> theta_dot;

  static WeightFamily fixed(Mat theta);
  static WeightFamily varying(std::function<Mat(double, const Vec&)> theta,
                              std::function<Mat(double, const Vec&)> theta_dot = {});
  Mat at(double t, const Vec& u) const;
};

enum class WeightMode { constant, varying };

/// constant: M(Theta o f o Theta^{-1}). varying: sup_u M(G Theta^{-1}) with
/// G = Theta_dot + Theta Df. Raises ConditioningError if cond(Theta) > 1e12.
RateEstimate weighted_rate(const VectorField& f, const WeightFamily& weight,
                           const NormSpec& spec, WeightMode mode,
                           const DomainSampler& sampler, double t = 0.0);

/// Lp distance bound derived from an L2 contraction rate `lambda2` by Hoelder:
///   p < 2:  m(E)^{1/p - 1/2} e^{lambda2 t} d0
///   p > 2:  B^{1 - 2/p} (e^{lambda2 t} m(E)^{1/2 - 1/p} d0)^{2/p}
/// p = 2 returns e^{lambda2 t} d0. B is the Linf bound on the perturbation.
double lp_comparison_bound(double lambda2, double p, double measure_E,
                           std::optional<double> B, double t, double init_dist);

}  // namespace contraction
