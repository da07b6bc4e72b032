#include "contraction/couplings.hpp"

#include "contraction/detail/optimize.hpp"
#include "contraction/flows.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace contraction {

Index BlockSystem::total_dim() const {
  Index n = 0;
  for (Index d : dims) n += d;
  return n;
}

NormSpec BlockSystem::block_norm(std::size_t i) const {
  if (!block_norms.empty()) return block_norms.at(i);
  return NormSpec::lp(product_p);
}

void BlockSystem::validate() const {
  if (dims.empty()) throw DimensionError("block system has no blocks");
  if (blocks.size() != dims.size()) throw DimensionError("block grid size differs from dims");
  for (const auto& row : blocks) {
    if (row.size() != dims.size()) throw DimensionError("block grid is not square");
  }
  for (Index d : dims) {
    if (d <= 0) throw DimensionError("block dimensions must be positive");
  }
  if (!(product_p >= 1.0)) throw UnsupportedNorm("product exponent must lie in [1, inf]");
  if (!block_norms.empty()) {
    if (block_norms.size() != dims.size()) throw DimensionError("one norm per block required");
    for (std::size_t i = 0; i < dims.size(); ++i) block_norms[i].validate_dimension(dims[i]);
  }
}

Mat BlockSystem::block(std::size_t i, std::size_t j, double t, const Vec& u) const {
  if (!blocks[i][j]) return Mat::Zero(dims[i], dims[j]);
  Mat b = blocks[i][j](t, u);
  if (b.rows() != dims[i] || b.cols() != dims[j]) {
    throw DimensionError("block (" + std::to_string(i) + "," + std::to_string(j) +
                         ") has the wrong shape");
  }
  return b;
}

Mat BlockSystem::assemble(double t, const Vec& u) const {
  validate();
  const Index n = total_dim();
  Mat J(n, n);
  Index r = 0;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    Index c = 0;
    for (std::size_t j = 0; j < dims.size(); ++j) {
      J.block(r, c, dims[i], dims[j]) = block(i, j, t, u);
      c += dims[j];
    }
    r += dims[i];
  }
  return J;
}

BlockSystem BlockSystem::constant(const std::vector<std::vector<Mat>>& blocks, double product_p) {
  BlockSystem s;
  s.product_p = product_p;
  for (const auto& row : blocks) s.dims.push_back(row.empty() ? 0 : row.front().rows());
  for (const auto& row : blocks) {
    std::vector<BlockFn> fr;
    for (const Mat& m : row) fr.push_back([m](double, const Vec&) { return m; });
    s.blocks.push_back(std::move(fr));
  }
  s.validate();
  return s;
}

double product_norm(const BlockSystem& sys, const Vec& v) {
  if (v.size() != sys.total_dim()) throw DimensionError("vector does not match block dims");
  Vec parts(static_cast<Index>(sys.dims.size()));
  Index off = 0;
  for (std::size_t i = 0; i < sys.dims.size(); ++i) {
    parts[static_cast<Index>(i)] = norm(Vec(v.segment(off, sys.dims[i])), sys.block_norm(i));
    off += sys.dims[i];
  }
  return lp_norm(parts, sys.product_p);
}

namespace {

void merge(RateEstimate& acc, const RateEstimate& r) {
  if (!r.is_exact()) acc.kind = RateKind::sampled_lower_bound;
  else if (acc.kind == RateKind::exact_closed_form) acc.kind = r.kind;
  acc.value = std::max(acc.value, r.value);
  acc.samples += r.samples;
  acc.ascent_iters += r.ascent_iters;
}

RateEstimate empty_rate() { return {-kInf, RateKind::exact_closed_form, 0, 0}; }

bool uniform_lp(const BlockSystem& sys) {
  for (std::size_t i = 0; i < sys.dims.size(); ++i) {
    const NormSpec s = sys.block_norm(i);
    if (!s.is_plain() || s.p != sys.product_p) return false;
  }
  return true;
}

// Log norm of J in the product norm. Exact when the product collapses to a
// single lp norm, otherwise a sampled sphere maximization.
RateEstimate product_lognorm(const BlockSystem& sys, const Mat& J, std::uint64_t seed) {
  if (uniform_lp(sys)) return lognorm(J, NormSpec::lp(sys.product_p), seed);
  const auto nf = [&](const Vec& v) { return product_norm(sys, v); };
  const auto res = detail::maximize_on_sphere(
      [&](const Vec& v) {
        const double nv = nf(v);
        return numeric_sip(nf, v, J * v) / (nv * nv);
      },
      J.rows(), seed);
  return {res.value, RateKind::sampled_lower_bound, res.samples, res.iterations};
}

}  // namespace

AdditiveReport additive_rate(const VectorField& f1, const VectorField& f2,
                             const std::function<double(double)>& alpha1,
                             const std::function<double(double)>& alpha2, const NormSpec& spec,
                             const DomainSampler& sampler, const std::vector<double>& times) {
  if (times.empty()) throw ArgumentError("additive_rate needs at least one time");
  double inf_sum = kInf;
  for (double t : times) {
    const double a1 = alpha1(t), a2 = alpha2(t);
    if (!(a1 >= 0.0) || !(a2 >= 0.0)) throw WeightError("combination weights must be non-negative");
    inf_sum = std::min(inf_sum, a1 + a2);
  }
  if (!(inf_sum > 0.0)) throw WeightError("inf of alpha1 + alpha2 must be positive");

  AdditiveReport rep;
  rep.rate1 = rep.rate2 = rep.bound = -kInf;
  rep.direct = empty_rate();
  for (double t : times) {
    const double a1 = alpha1(t), a2 = alpha2(t);
    const double m1 = integral_rate(f1, sampler, spec, t).value;
    const double m2 = integral_rate(f2, sampler, spec, t).value;
    rep.rate1 = std::max(rep.rate1, m1);
    rep.rate2 = std::max(rep.rate2, m2);
    // A zero weight removes the component even when its rate is infinite.
    const double b = (a1 == 0.0 ? 0.0 : a1 * m1) + (a2 == 0.0 ? 0.0 : a2 * m2);
    rep.bound = std::max(rep.bound, b);

    VectorField sum;
    sum.dim = f1.dim;
    sum.f = [&f1, &f2, a1, a2](double s, const Vec& u) { return Vec(a1 * f1(s, u) + a2 * f2(s, u)); };
    if (f1.jacobian && f2.jacobian) {
      sum.jacobian = [&f1, &f2, a1, a2](double s, const Vec& u) {
        return Mat(a1 * f1.jacobian(s, u) + a2 * f2.jacobian(s, u));
      };
    }
    if (f1.is_affine() && f2.is_affine()) {
      sum.linear_part = Mat(a1 * *f1.linear_part + a2 * *f2.linear_part);
      const Index n = f1.linear_part->rows();
      sum.offset = Vec(a1 * f1.offset.value_or(Vec::Zero(n)) + a2 * f2.offset.value_or(Vec::Zero(n)));
    }
    merge(rep.direct, integral_rate(sum, sampler, spec, t));
  }
  return rep;
}

FeedbackReport feedback_certificate(const BlockSystem& sys_in, const NormSpec& spec,
                                    const DomainSampler& sampler, double t) {
  sys_in.validate();
  if (!spec.is_plain()) throw UnsupportedNorm("feedback certificate needs a plain lp block norm");
  BlockSystem sys = sys_in;
  sys.product_p = 2.0;
  sys.block_norms.assign(sys.dims.size(), spec);
  const std::size_t nb = sys.dims.size();
  if (sampler.dim() != sys.total_dim()) throw DimensionError("sampler does not match block dims");

  FeedbackReport rep;
  rep.block_rates.assign(nb, -kInf);
  rep.composite = empty_rate();
  const bool hilbert = spec.p == 2.0;
  for (const Vec& u : sampler.draw()) {
    const Mat J = sys.assemble(t, u);
    Mat F = J;
    Index r = 0;
    for (std::size_t i = 0; i < nb; ++i) {
      rep.block_rates[i] = std::max(rep.block_rates[i], lognorm(sys.block(i, i, t, u), spec).value);
      F.block(r, r, sys.dims[i], sys.dims[i]).setZero();
      for (std::size_t j = i + 1; j < nb; ++j) {
        const Mat s = sys.block(i, j, t, u) + sys.block(j, i, t, u).transpose();
        rep.skew_residual = std::max(rep.skew_residual, s.jacobiSvd().singularValues()[0]);
      }
      r += sys.dims[i];
    }
    merge(rep.composite, product_lognorm(sys, J, sampler.seed));
    double zr;
    if (hilbert) {
      const Mat S = 0.5 * (F + F.transpose());
      zr = Eigen::SelfAdjointEigenSolver<Mat>(S).eigenvalues().cwiseAbs().maxCoeff();
    } else {
      const auto nf = [&](const Vec& v) { return product_norm(sys, v); };
      const auto q = [&](const Vec& v, double sign) {
        const double nv = nf(v);
        return sign * numeric_sip(nf, v, F * v) / (nv * nv);
      };
      zr = std::max(detail::maximize_on_sphere([&](const Vec& v) { return q(v, 1.0); }, F.rows(), sampler.seed).value,
                    detail::maximize_on_sphere([&](const Vec& v) { return q(v, -1.0); }, F.rows(), sampler.seed).value);
    }
    rep.zero_range_residual = std::max(rep.zero_range_residual, zr);
  }
  rep.max_block_rate = *std::max_element(rep.block_rates.begin(), rep.block_rates.end());
  if (hilbert && rep.skew_residual <= 1e-10) {
    rep.equivalence_gap = std::abs(rep.composite.value - rep.max_block_rate);
  }
  return rep;
}

ProductReport product_lp_rate(const BlockSystem& sys, const DomainSampler& sampler, double t,
                              double horizon) {
  sys.validate();
  if (sampler.dim() != sys.total_dim()) throw DimensionError("sampler does not match block dims");
  if (!(horizon > 0.0)) throw ArgumentError("horizon must be positive");
  const std::size_t nb = sys.dims.size();
  ProductReport rep;
  rep.block_rates.assign(nb, -kInf);
  rep.direct = empty_rate();
  rep.simulated_rate = -kInf;
  rep.simulation_within_bound = true;

  const auto pts = sampler.draw();
  for (const Vec& u : pts) {
    for (std::size_t i = 0; i < nb; ++i) {
      rep.block_rates[i] =
          std::max(rep.block_rates[i], lognorm(sys.block(i, i, t, u), sys.block_norm(i), sampler.seed).value);
    }
    merge(rep.direct, product_lognorm(sys, sys.assemble(t, u), sampler.seed));
  }
  rep.product_rate = *std::max_element(rep.block_rates.begin(), rep.block_rates.end());

  // Frozen-state perturbation dynamics d' = J(t, u*) d from a few samples.
  std::mt19937_64 rng(sampler.seed ^ 0x5eedULL);
  std::normal_distribution<double> g;
  const std::size_t nsim = std::min<std::size_t>(pts.size(), 5);
  for (std::size_t s = 0; s < nsim; ++s) {
    const Mat J = sys.assemble(t, pts[s]);
    Vec d0(J.rows());
    for (Index k = 0; k < d0.size(); ++k) d0[k] = g(rng);
    const auto tr = integrate(VectorField::linear(J), d0, 0.0, horizon, 1e-3);
    std::vector<double> times, dist;
    for (std::size_t k = 0; k < tr.size(); k += 10) {
      times.push_back(tr.times[k]);
      dist.push_back(product_norm(sys, tr.states[k]));
    }
    for (std::size_t a = 0; a < dist.size(); ++a) {
      for (std::size_t b = a + 1; b < dist.size(); ++b) {
        const double bound = std::exp(rep.product_rate * (times[b] - times[a])) * dist[a];
        if (dist[b] > bound * (1.0 + 1e-6) + 1e-12) rep.simulation_within_bound = false;
      }
    }
    if (dist.back() > 0.0) rep.simulated_rate = std::max(rep.simulated_rate, overshoot_fit(times, dist).lambda);
  }
  return rep;
}

double feedforward_bound(double lambda1, double lambda2, double B, double d1_0, double d2_0,
                         double t, FeedforwardFormula formula) {
  if (!(lambda1 < 0.0) || !(lambda2 < 0.0)) throw ArgumentError("cascade rates must be negative");
  if (!(B >= 0.0)) throw ArgumentError("coupling bound must be non-negative");
  const double free = d2_0 * std::exp(lambda2 * t);
  if (B == 0.0) return free;
  if (formula == FeedforwardFormula::printed) {
    return free + B * d1_0 / (lambda1 + lambda2) * std::exp(lambda1 * t);
  }
  if (std::abs(lambda1 - lambda2) <= 1e-12 * std::max(1.0, std::abs(lambda1))) {
    return free + B * d1_0 * t * std::exp(lambda1 * t);
  }
  return free + B * d1_0 * (std::exp(lambda1 * t) - std::exp(lambda2 * t)) / (lambda1 - lambda2);
}

CascadeCheck feedforward_check(const Mat& A1, const Mat& A2, const Mat& C, const Vec& d1,
                               const Vec& d2, double t1, const NormSpec& spec, double h) {
  const Index n1 = A1.rows(), n2 = A2.rows();
  if (A1.cols() != n1 || A2.cols() != n2 || C.rows() != n2 || C.cols() != n1 ||
      d1.size() != n1 || d2.size() != n2) {
    throw DimensionError("cascade blocks have inconsistent shapes");
  }
  CascadeCheck out;
  out.lambda1 = lognorm(A1, spec).value;
  out.lambda2 = lognorm(A2, spec).value;
  Mat J = Mat::Zero(n1 + n2, n1 + n2);
  J.bottomLeftCorner(n2, n1) = C;
  // For a plain lp norm, ||[0 0; C 0]|| = ||C|| even when C is rectangular.
  if (spec.is_plain()) out.coupling = operator_norm(J, spec);
  else if (n1 == n2) out.coupling = operator_norm(C, spec);
  else throw UnsupportedNorm("a weighted cascade norm needs equal block sizes");
  J.topLeftCorner(n1, n1) = A1;
  J.bottomRightCorner(n2, n2) = A2;
  Vec x0(n1 + n2);
  x0 << d1, d2;
  const auto tr = integrate(VectorField::linear(J), x0, 0.0, t1, h);
  const double n10 = norm(d1, spec), n20 = norm(d2, spec);
  out.max_excess = -kInf;
  for (std::size_t k = 0; k < tr.size(); ++k) {
    const double b = feedforward_bound(out.lambda1, out.lambda2, out.coupling, n10, n20, tr.times[k],
                                       FeedforwardFormula::convolution);
    out.max_excess = std::max(out.max_excess, norm(Vec(tr.states[k].tail(n2)), spec) - b);
  }
  out.printed_value_at_end = feedforward_bound(out.lambda1, out.lambda2, out.coupling, n10, n20, t1,
                                             FeedforwardFormula::printed);
  return out;
}

Quadrature Quadrature::trapezoid(double a, double b, int n) {
  if (n < 2) throw ArgumentError("trapezoid rule needs at least 2 nodes");
  if (!(b > a)) throw ArgumentError("quadrature interval must satisfy a < b");
  Quadrature q;
  const double h = (b - a) / (n - 1);
  for (int i = 0; i < n; ++i) {
    q.nodes.push_back(a + i * h);
    q.weights.push_back(i == 0 || i == n - 1 ? 0.5 * h : h);
  }
  return q;
}

ContinuumReport continuum_rate(const ContinuumFamily& family,
                               const std::function<double(double)>& phi, const Quadrature& quad,
                               const NormSpec& spec, const DomainSampler& sampler, double t) {
  if (quad.nodes.size() != quad.weights.size() || quad.nodes.empty()) {
    throw ArgumentError("quadrature nodes and weights must be non-empty and match");
  }
  std::vector<double> w(quad.nodes.size());
  ContinuumReport rep;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double ph = phi(quad.nodes[i]);
    if (!(ph >= 0.0)) throw WeightError("continuum weight is negative at a node");
    w[i] = quad.weights[i] * ph;
    rep.weight_integral += w[i];
  }
  if (!(rep.weight_integral > 0.0)) throw WeightError("continuum weight integrates to zero");

  const auto slice = [&](double x) {
    if (family.linear) return VectorField::linear(family.linear(x));
    VectorField v;
    v.dim = family.dim;
    v.f = [&family, x](double s, const Vec& u) { return family.f(s, x, u); };
    return v;
  };
  for (double x : quad.nodes) {
    rep.pointwise_rate = std::max(rep.pointwise_rate, integral_rate(slice(x), sampler, spec, t).value);
  }
  rep.bound = rep.weight_integral * rep.pointwise_rate;

  VectorField combined;
  combined.dim = family.dim;
  if (family.linear) {
    Mat A = Mat::Zero(family.dim, family.dim);
    for (std::size_t i = 0; i < w.size(); ++i) A += w[i] * family.linear(quad.nodes[i]);
    combined = VectorField::linear(A);
  } else {
    combined.f = [&family, &quad, w](double s, const Vec& u) {
      Vec acc = Vec::Zero(u.size());
      for (std::size_t i = 0; i < w.size(); ++i) acc += w[i] * family.f(s, quad.nodes[i], u);
      return acc;
    };
  }
  rep.direct = integral_rate(combined, sampler, spec, t);
  return rep;
}

namespace {

using Cx = std::complex<double>;

// Unit v in span{x, y} with v* A v = (1 - s) x*Ax + s y*Ay, s in [0, 1].
CVec segment_vector(const CMat& A, const CVec& x, const CVec& y, double s) {
  const Cx a = x.dot(A * x), b = y.dot(A * y);
  const Cx d = b - a;
  if (s <= 0.0 || std::abs(d) <= 1e-15 * std::max(1.0, std::abs(a))) return x;
  if (s >= 1.0) return y;
  // Normalize so x maps to 0 and y to 1; then pick the phase psi making the
  // Rayleigh quotient of x + tau e^{i psi} y real for all tau.
  const CMat B = (A - a * CMat::Identity(A.rows(), A.cols())) / d;
  const Cx b12 = x.dot(B * y), b21 = y.dot(B * x);
  const double P = b12.imag() + b21.imag();
  const double Q = b12.real() - b21.real();
  const double psi = std::atan2(-P, Q);
  const Cx e = std::polar(1.0, psi);
  const double cc = (e * b12 + std::conj(e) * b21).real();
  const double gram = (e * x.dot(y)).real();
  // (1 - s) tau^2 + (cc - 2 s gram) tau - s = 0, take the non-negative root.
  const double qa = 1.0 - s, qb = cc - 2.0 * s * gram, qc = -s;
  const double disc = std::sqrt(std::max(0.0, qb * qb - 4.0 * qa * qc));
  const double tau = qb >= 0.0 ? (2.0 * -qc) / (qb + disc) : (-qb + disc) / (2.0 * qa);
  CVec v = x + tau * e * y;
  return v / v.norm();
}

struct Boundary {
  CVec x;
  Cx z;
};

Boundary boundary_point(const CMat& A, double theta) {
  const CMat R = std::polar(1.0, -theta) * A;
  const CMat H = 0.5 * (R + R.adjoint());
  Eigen::SelfAdjointEigenSolver<CMat> es(H);
  CVec x = es.eigenvectors().col(H.rows() - 1);
  return {x, x.dot(A * x)};
}

double cross(Cx a, Cx b) { return (std::conj(a) * b).imag(); }

}  // namespace

CVec numerical_range_vector(const CMat& A_in, Cx target) {
  const Index n = A_in.rows();
  if (A_in.cols() != n || n == 0) throw DimensionError("matrix must be square and non-empty");
  const CMat A = A_in - target * CMat::Identity(n, n);
  const double scale = std::max(A.norm(), 1e-300);
  const Boundary a = boundary_point(A, 0.0);
  if (std::abs(a.z) <= 1e-15 * scale || n == 1) {
    if (std::abs(a.z) > 1e-12 * scale) throw ArgumentError("target outside the numerical range");
    return a.x;
  }
  const double tiny = 1e-13 * scale * scale;
  // Boundary points move counterclockwise with theta; find where they cross
  // the ray opposite a.
  constexpr int kGrid = 32;
  const double two_pi = 2.0 * std::numbers::pi;
  Boundary prev = a;
  double prev_theta = 0.0;
  for (int j = 1; j <= kGrid; ++j) {
    const double th = two_pi * j / kGrid;
    const Boundary cur = j == kGrid ? a : boundary_point(A, th);
    const double c = cross(a.z, cur.z);
    if (j < kGrid && std::abs(c) <= tiny && (std::conj(a.z) * cur.z).real() < 0.0) {
      return segment_vector(A, a.x, cur.x, std::abs(a.z) / (std::abs(a.z) + std::abs(cur.z)));
    }
    const double cp = cross(a.z, prev.z);
    if (j > 1 && cp > 0.0 && c <= 0.0) {
      double lo = prev_theta, hi = th;
      Boundary blo = prev, bhi = cur;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        const Boundary bm = boundary_point(A, mid);
        if (cross(a.z, bm.z) > 0.0) {
          lo = mid;
          blo = bm;
        } else {
          hi = mid;
          bhi = bm;
        }
      }
      const double clo = cross(a.z, blo.z), chi = cross(a.z, bhi.z);
      const double s = clo / (clo - chi);
      const CVec w = segment_vector(A, blo.x, bhi.x, std::clamp(s, 0.0, 1.0));
      const Cx p = w.dot(A * w);
      if (!((std::conj(a.z) * p).real() < 0.0)) throw ArgumentError("target outside the numerical range");
      return segment_vector(A, a.x, w, std::abs(a.z) / (std::abs(a.z) + std::abs(p)));
    }
    prev = cur;
    prev_theta = th;
  }
  throw ArgumentError("target outside the numerical range");
}

CMat zero_diagonal_unitary(const CMat& A, double tol) {
  const Index n = A.rows();
  if (A.cols() != n || n == 0) throw DimensionError("matrix must be square and non-empty");
  if (std::abs(A.trace()) > tol * std::max(A.norm(), 1e-300)) {
    throw ArgumentError("zero-diagonal unitary requires a trace-free matrix");
  }
  CMat U = CMat::Identity(n, n);
  CMat B = A;
  for (Index k = 0; k + 1 < n; ++k) {
    const Index m = n - k;
    const CMat S = B.bottomRightCorner(m, m);
    const CVec v = numerical_range_vector(S, S.trace() / static_cast<double>(m));
    Eigen::HouseholderQR<CMat> qr(v);
    const CMat H = qr.householderQ() * CMat::Identity(m, m);
    CMat W = CMat::Identity(n, n);
    W.bottomRightCorner(m, m) = H;
    B = W.adjoint() * B * W;
    U = U * W;
  }
  return U;
}

}  // namespace contraction
