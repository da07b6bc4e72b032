#include "contraction/types.hpp"

#include <cmath>
#include <sstream>

namespace contraction {

void require_finite(const Vec& v, const char* what) {
  if (!v.allFinite()) {
    throw DimensionError(std::string(what) + ": non-finite entry");
  }
}

Vec VectorField::operator()(double t, const Vec& u) const { return f(t, u); }

Vec VectorField::eval_checked(double t, const Vec& u) const {
  Vec out = f(t, u);
  if (out.size() != u.size()) {
    throw DimensionError("vector field returned length " +
                         std::to_string(out.size()) + " for state of length " +
                         std::to_string(u.size()));
  }
  if (!out.allFinite()) {
    std::ostringstream msg;
    msg << "vector field is non-finite at t=" << t << ", u=["
        << u.transpose() << "]";
    throw EvaluationError(msg.str(), u);
  }
  return out;
}

Mat VectorField::jacobian_at(double t, const Vec& u) const {
  if (linear_part) return *linear_part;
  if (jacobian) return jacobian(t, u);
  return finite_difference_jacobian([&](const Vec& x) { return eval_checked(t, x); },
                                    u);
}

VectorField VectorField::linear(Mat A) {
  if (A.rows() != A.cols()) throw DimensionError("linear field needs a square matrix");
  VectorField field;
  field.dim = A.rows();
  field.f = [A](double, const Vec& u) -> Vec { return A * u; };
  field.linear_part = std::move(A);
  return field;
}

VectorField VectorField::affine(Mat A, Vec b) {
  if (A.rows() != A.cols() || b.size() != A.rows()) {
    throw DimensionError("affine field dimensions disagree");
  }
  VectorField field;
  field.dim = A.rows();
  field.f = [A, b](double, const Vec& u) -> Vec { return A * u + b; };
  field.linear_part = std::move(A);
  field.offset = std::move(b);
  return field;
}

VectorField VectorField::autonomous(Index dim, std::function<Vec(const Vec&)> f,
                                    std::function<Mat(const Vec&)> jac) {
  VectorField field;
  field.dim = dim;
  field.f = [f = std::move(f)](double, const Vec& u) { return f(u); };
  if (jac) {
    field.jacobian = [jac = std::move(jac)](double, const Vec& u) { return jac(u); };
  }
  return field;
}

Mat finite_difference_jacobian(const std::function<Vec(const Vec&)>& f,
                               const Vec& u) {
  const Index n = u.size();
  Mat J;
  Vec x = u;
  for (Index j = 0; j < n; ++j) {
    const double h = 1e-6 * std::max(1.0, std::abs(u[j]));
    x[j] = u[j] + h;
    Vec fp = f(x);
    x[j] = u[j] - h;
    Vec fm = f(x);
    x[j] = u[j];
    if (j == 0) J.resize(fp.size(), n);
    J.col(j) = (fp - fm) / (2.0 * h);
  }
  return J;
}

}  // namespace contraction
