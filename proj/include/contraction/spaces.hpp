#pragma once

// Norms and one-sided semi-inner products on weighted / stacked lp spaces.

#include "contraction/types.hpp"

#include <complex>
#include <functional>
#include <limits>
#include <span>
#include <vector>

namespace contraction {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Side { plus, minus };
enum class Field { real, complex };

/// Which norm a computation is carried out in.
///
/// The effective norm is ||S Theta v||_p where Theta is the optional square
/// weight and S = [I; D^1; ...; D^k] the optional Sobolev stacking operator
/// built from grid difference operators (pdelab supplies them). Build specs
/// through the factories, which run the invariant checks.
struct NormSpec {
  double p = 2.0;
  std::optional<Mat> weight;
  int sobolev_k = 0;
  Mat stack;  // empty unless sobolev_k > 0
  Field field = Field::real;

  static NormSpec lp(double p, Field field = Field::real);
  /// Raises ConditioningError when cond(theta) > 1e12.
  static NormSpec weighted(double p, Mat theta);
  /// `diffs` holds D^1 .. D^k; the stacking is [I; D^1; ...; D^k].
  static NormSpec sobolev(double p, const std::vector<Mat>& diffs);

  void validate() const;
  void validate_dimension(Index n) const;

  /// Maps v to the vector whose plain lp norm is the spec norm.
  Vec apply(const Vec& v) const;
  CVec apply(const CVec& v) const;

  /// Composite linear map v -> S Theta v, or nullopt for the plain norm.
  std::optional<Mat> transform() const;

  bool is_plain() const { return !weight && sobolev_k == 0; }
  bool has_closed_lognorm() const { return p == 1.0 || p == 2.0 || p == kInf; }
};

/// Condition number sigma_max / sigma_min of a square matrix.
double condition_number(const Mat& A);

double lp_norm(const Vec& v, double p);
double lp_norm(const CVec& v, double p);

double norm(const Vec& v, const NormSpec& spec);
double norm(const CVec& v, const NormSpec& spec);

/// Closed-form right/left semi-inner product (u, v)_{+/-} of the plain lp norm.
/// Raises DegenerateArgument when u = 0.
double sip_lp(const Vec& u, const Vec& v, double p, Side side = Side::plus);

/// Semi-inner product in the spec norm: (S Theta u, S Theta v)_{+/-}.
double sip(const Vec& u, const Vec& v, const NormSpec& spec, Side side = Side::plus);

/// Complex semi-inner product (u,v)_R + i (u, iv)_R for 1 < p < inf, where
/// (.,.)_R is the Gateaux SIP of the complex lp norm viewed as a real space.
/// Linear in the first argument, conjugate-linear in the second.
std::complex<double> complex_sip(const CVec& u, const CVec& v, const NormSpec& spec);

/// Real Gateaux SIP of the complex lp norm (realified space), 1 < p < inf.
double realified_sip(const CVec& u, const CVec& v, double p);

/// Gateaux SIP of an arbitrary norm, from one-sided difference quotients on
/// the ladder h = 1e-4 ... ~1e-9 with first-order Richardson extrapolation.
/// Used for norms without a closed form (product norms of blocks).
double numeric_sip(const std::function<double(const Vec&)>& norm_fn, const Vec& u,
                   const Vec& v, Side side = Side::plus);

/// Upper right Dini derivative of phi at t. Returns +inf when the
/// difference quotients diverge as h -> 0+.
double dini_plus(const std::function<double(double)>& phi, double t);

/// Dini derivative estimated from samples on a grid at `index`; uses the
/// one-sided second-order formula when two forward points are available.
double dini_plus(std::span<const double> times, std::span<const double> values,
                 std::size_t index);

}  // namespace contraction
