#include "contraction/spaces.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <array>
#include <cmath>

namespace contraction {

namespace {

constexpr double kArgmaxRelTol = 1e-12;
constexpr double kZeroCoordTol = 1e-14;

double sgn(double x) { return (x > 0.0) - (x < 0.0); }

void check_exponent(double p) {
  if (!(p >= 1.0)) throw ArgumentError("norm exponent must satisfy p >= 1");
}

}  // namespace

NormSpec NormSpec::lp(double p, Field field) {
  NormSpec spec;
  spec.p = p;
  spec.field = field;
  spec.validate();
  return spec;
}

NormSpec NormSpec::weighted(double p, Mat theta) {
  NormSpec spec;
  spec.p = p;
  spec.weight = std::move(theta);
  spec.validate();
  return spec;
}

NormSpec NormSpec::sobolev(double p, const std::vector<Mat>& diffs) {
  NormSpec spec;
  spec.p = p;
  spec.sobolev_k = static_cast<int>(diffs.size());
  if (!diffs.empty()) {
    const Index n = diffs.front().cols();
    Index rows = n;
    for (const Mat& d : diffs) {
      if (d.cols() != n) throw DimensionError("difference operators must agree in column count");
      rows += d.rows();
    }
    spec.stack.resize(rows, n);
    spec.stack.topRows(n).setIdentity();
    Index at = n;
    for (const Mat& d : diffs) {
      spec.stack.middleRows(at, d.rows()) = d;
      at += d.rows();
    }
  }
  spec.validate();
  return spec;
}

void NormSpec::validate() const {
  check_exponent(p);
  if (weight) {
    if (weight->rows() != weight->cols()) throw DimensionError("weight must be square");
    if (!weight->allFinite()) throw DimensionError("weight has non-finite entries");
    const double cond = condition_number(*weight);
    if (!(cond <= 1e12)) {
      throw ConditioningError("weight is ill-conditioned (cond = " + std::to_string(cond) +
                              ")");
    }
  }
  if (sobolev_k < 0) throw ArgumentError("sobolev_k must be nonnegative");
  if (sobolev_k > 0 && stack.size() == 0) {
    throw ArgumentError("sobolev_k > 0 requires grid difference operators");
  }
}

void NormSpec::validate_dimension(Index n) const {
  if (weight && weight->cols() != n) {
    throw DimensionError("weight is " + std::to_string(weight->cols()) +
                         "-dimensional but vector has length " + std::to_string(n));
  }
  if (sobolev_k > 0 && stack.cols() != n) {
    throw DimensionError("Sobolev stacking dimension disagrees with vector length");
  }
}

Vec NormSpec::apply(const Vec& v) const {
  validate_dimension(v.size());
  Vec w = weight ? Vec(*weight * v) : v;
  if (sobolev_k > 0) return stack * w;
  return w;
}

CVec NormSpec::apply(const CVec& v) const {
  validate_dimension(v.size());
  CVec w = weight ? CVec(weight->cast<std::complex<double>>() * v) : v;
  if (sobolev_k > 0) return stack.cast<std::complex<double>>() * w;
  return w;
}

std::optional<Mat> NormSpec::transform() const {
  if (is_plain()) return std::nullopt;
  if (weight && sobolev_k > 0) return Mat(stack * *weight);
  if (weight) return *weight;
  return stack;
}

double condition_number(const Mat& A) {
  Eigen::JacobiSVD<Mat> svd(A);
  const auto& s = svd.singularValues();
  if (s.size() == 0) return 1.0;
  const double smin = s[s.size() - 1];
  if (smin == 0.0) return kInf;
  return s[0] / smin;
}

double lp_norm(const Vec& v, double p) {
  check_exponent(p);
  if (v.size() == 0) throw DimensionError("norm of an empty vector");
  const double scale = v.cwiseAbs().maxCoeff();
  if (p == kInf || scale == 0.0) return scale;
  if (p == 1.0) return v.cwiseAbs().sum();
  if (p == 2.0) return v.norm();
  double acc = 0.0;
  for (Index i = 0; i < v.size(); ++i) acc += std::pow(std::abs(v[i]) / scale, p);
  return scale * std::pow(acc, 1.0 / p);
}

double lp_norm(const CVec& v, double p) {
  return lp_norm(Vec(v.cwiseAbs()), p);
}

double norm(const Vec& v, const NormSpec& spec) { return lp_norm(spec.apply(v), spec.p); }

double norm(const CVec& v, const NormSpec& spec) { return lp_norm(spec.apply(v), spec.p); }

double sip_lp(const Vec& u, const Vec& v, double p, Side side) {
  check_exponent(p);
  if (u.size() != v.size()) throw DimensionError("semi-inner product of vectors of unequal length");
  const double nu = lp_norm(u, p);
  if (nu == 0.0) throw DegenerateArgument("semi-inner product (u, v) requires u != 0");

  if (p == 1.0) {
    double acc = 0.0;
    double free = 0.0;
    for (Index i = 0; i < u.size(); ++i) {
      if (std::abs(u[i]) <= kZeroCoordTol) {
        free += std::abs(v[i]);
      } else {
        acc += sgn(u[i]) * v[i];
      }
    }
    return nu * (side == Side::plus ? acc + free : acc - free);
  }

  if (p == kInf) {
    const double cutoff = nu * (1.0 - kArgmaxRelTol);
    double best = side == Side::plus ? -kInf : kInf;
    for (Index i = 0; i < u.size(); ++i) {
      if (std::abs(u[i]) < cutoff) continue;
      const double s = sgn(u[i]) * v[i];
      best = side == Side::plus ? std::max(best, s) : std::min(best, s);
    }
    return nu * best;
  }

  // ||u||^{2-p} sum |u_i|^{p-1} sgn(u_i) v_i, evaluated on u / ||u|| to stay
  // in range for large p.
  double acc = 0.0;
  for (Index i = 0; i < u.size(); ++i) {
    if (u[i] == 0.0) continue;
    acc += std::pow(std::abs(u[i]) / nu, p - 1.0) * sgn(u[i]) * v[i];
  }
  return nu * acc;
}

double sip(const Vec& u, const Vec& v, const NormSpec& spec, Side side) {
  if (u.size() != v.size()) throw DimensionError("semi-inner product of vectors of unequal length");
  if (spec.is_plain()) return sip_lp(u, v, spec.p, side);
  return sip_lp(spec.apply(u), spec.apply(v), spec.p, side);
}

double realified_sip(const CVec& u, const CVec& v, double p) {
  if (u.size() != v.size()) throw DimensionError("semi-inner product of vectors of unequal length");
  const double nu = lp_norm(u, p);
  if (nu == 0.0) throw DegenerateArgument("semi-inner product (u, v) requires u != 0");
  double acc = 0.0;
  for (Index i = 0; i < u.size(); ++i) {
    const double m = std::abs(u[i]);
    if (m == 0.0) continue;
    // |u_i|^{p-2} Re(conj(u_i) v_i) scaled by ||u||^{2-p}
    acc += std::pow(m / nu, p - 1.0) * (std::conj(u[i] / m) * v[i]).real();
  }
  return nu * acc;
}

std::complex<double> complex_sip(const CVec& u, const CVec& v, const NormSpec& spec) {
  spec.validate();
  if (!(spec.p > 1.0 && spec.p < kInf)) {
    throw UnsupportedNorm(
        "complex semi-inner product needs 1 < p < inf; the lp norm is not "
        "Gateaux-differentiable for p in {1, inf}");
  }
  const CVec a = spec.apply(u);
  const CVec b = spec.apply(v);
  const std::complex<double> i1(0.0, 1.0);
  return {realified_sip(a, b, spec.p), realified_sip(a, CVec(i1 * b), spec.p)};
}

double numeric_sip(const std::function<double(const Vec&)>& norm_fn, const Vec& u,
                   const Vec& v, Side side) {
  const double nu = norm_fn(u);
  if (nu == 0.0) throw DegenerateArgument("semi-inner product (u, v) requires u != 0");
  const double dir = side == Side::plus ? 1.0 : -1.0;
  const double scale = nu / std::max(norm_fn(v), 1e-300);

  constexpr int kLevels = 17;
  std::array<double, kLevels> q{};
  double h = 1e-4;
  for (int k = 0; k < kLevels; ++k, h *= 0.5) {
    const double step = dir * h * scale;
    q[k] = (norm_fn(u + step * v) - nu) / step;
  }
  // First-order Richardson; keep the extrapolant that is most stable.
  double best = 2.0 * q[1] - q[0];
  double best_jump = kInf;
  double prev = best;
  for (int k = 1; k + 1 < kLevels; ++k) {
    const double r = 2.0 * q[k + 1] - q[k];
    const double jump = std::abs(r - prev);
    if (jump < best_jump) {
      best_jump = jump;
      best = r;
    }
    prev = r;
  }
  return nu * best;
}

double dini_plus(const std::function<double(double)>& phi, double t) {
  const double base = phi(t);
  constexpr int kLevels = 20;
  std::array<double, kLevels> q{};
  double h = 1e-2 * std::max(1.0, std::abs(t));
  for (int k = 0; k < kLevels; ++k, h *= 0.5) q[k] = (phi(t + h) - base) / h;

  if (!std::isfinite(q[kLevels - 1])) return kInf;

  // Growth like h^{-a}: every late ratio above 1.2 and the quotient large.
  int growing = 0;
  for (int k = kLevels - 8; k < kLevels; ++k) {
    if (q[k] > 0.0 && q[k] > 1.2 * q[k - 1]) ++growing;
  }
  if (growing == 8 && q[kLevels - 1] > 1e3) return kInf;

  // Richardson on the finest quotients that are still free of cancellation.
  const int k = kLevels - 8;
  return 2.0 * q[k + 1] - q[k];
}

double dini_plus(std::span<const double> times, std::span<const double> values,
                 std::size_t index) {
  if (times.size() != values.size()) throw DimensionError("times/values length mismatch");
  if (index + 1 >= times.size()) throw ArgumentError("dini_plus needs a forward sample");
  const double h1 = times[index + 1] - times[index];
  const double q1 = (values[index + 1] - values[index]) / h1;
  if (index + 2 >= times.size()) return q1;
  const double h2 = times[index + 2] - times[index];
  const double q2 = (values[index + 2] - values[index]) / h2;
  // Extrapolate the forward quotient linearly in h to h = 0.
  return q1 + (q1 - q2) * h1 / (h2 - h1);
}

}  // namespace contraction
