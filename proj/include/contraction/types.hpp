#pragma once

#include <Eigen/Dense>

#include <complex>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>

namespace contraction {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using Index = Eigen::Index;

//
// Error hierarchy. Every failure raised by the toolkit derives from Error so
// callers (the scenario runner in particular) can map them onto exit codes.
//
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class DegenerateArgument : public Error {
 public:
  using Error::Error;
};

class UnsupportedNorm : public Error {
 public:
  using Error::Error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

class ConditioningError : public Error {
 public:
  using Error::Error;
};

class WeightError : public Error {
 public:
  using Error::Error;
};

class SymmetryError : public Error {
 public:
  using Error::Error;
};

class StepSizeError : public Error {
 public:
  StepSizeError(const std::string& what, double suggested)
      : Error(what), suggested_step(suggested) {}
  double suggested_step;
};

class CertificateRefused : public Error {
 public:
  using Error::Error;
};

/// Raised when a vector field returns NaN/Inf; carries the offending state.
class EvaluationError : public Error {
 public:
  EvaluationError(const std::string& what, Vec point)
      : Error(what), point(std::move(point)) {}
  Vec point;
};

/// Raised when Dphi loses full row rank at a point of the zero set.
class RegularityError : public Error {
 public:
  RegularityError(const std::string& what, Vec point)
      : Error(what), point(std::move(point)) {}
  Vec point;
};

/// Raised by the integrators when the state norm exceeds the blow-up sentinel.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, double time)
      : Error(what), time(time) {}
  double time;
};

/// Throws DimensionError unless `v` has no NaN/Inf entries. DenseVector
/// construction in this library is just Eigen; this is the finiteness gate.
void require_finite(const Vec& v, const char* what);

/// A (possibly time-varying) vector field f(t, u) on R^n.
///
/// `jacobian` is optional; when absent, central differences at relative step
/// 1e-6 are used. `linear_part`/`offset` mark affine fields f(t,u) = A u + b,
/// for which rate functionals are computed exactly.
struct VectorField {
  using Fn = std::function<Vec(double, const Vec&)>;
  using JacFn = std::function<Mat(double, const Vec&)>;

  Index dim = 0;
  Fn f;
  JacFn jacobian;
  std::optional<Mat> linear_part;
  std::optional<Vec> offset;

  Vec operator()(double t, const Vec& u) const;

  /// Evaluates f and raises EvaluationError on non-finite output.
  Vec eval_checked(double t, const Vec& u) const;

  /// Analytic Jacobian if supplied, otherwise central differences.
  Mat jacobian_at(double t, const Vec& u) const;

  bool is_affine() const { return linear_part.has_value(); }

  static VectorField linear(Mat A);
  static VectorField affine(Mat A, Vec b);
  static VectorField autonomous(Index dim, std::function<Vec(const Vec&)> f,
                                std::function<Mat(const Vec&)> jac = {});
};

/// Central-difference Jacobian of `f` at `u`, column step 1e-6 * max(1, |u_j|).
Mat finite_difference_jacobian(const std::function<Vec(const Vec&)>& f,
                               const Vec& u);

}  // namespace contraction
