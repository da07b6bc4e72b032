#include "contraction/invariants.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace contraction {

SubspaceSpec SubspaceSpec::from_projection(Mat P) {
  if (P.rows() != P.cols()) throw DimensionError("projection must be square");
  if (!P.allFinite()) throw ArgumentError("projection has non-finite entries");
  if ((P * P - P).norm() > 1e-10) throw ArgumentError("P is not idempotent");
  SubspaceSpec s;
  s.Q = Mat::Identity(P.rows(), P.cols()) - P;
  s.P = std::move(P);
  return s;
}

RateEstimate projected_rate(const Mat& K, const Mat& G, const NormSpec& spec,
                            std::uint64_t seed, double leak_tol) {
  if (K.rows() != G.rows() || K.cols() != G.cols()) {
    throw DimensionError("K and G must have the same shape");
  }
  Eigen::JacobiSVD<Mat> svd(K, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec& s = svd.singularValues();
  if (s.size() == 0 || !(s[0] > 0.0)) throw DegenerateArgument("K is zero");
  Index r = 0;
  while (r < s.size() && s[r] > 1e-10 * s[0]) ++r;

  const Index n = K.cols(), m = K.rows();
  if (r < n) {
    const double leak = (G * svd.matrixV().rightCols(n - r)).norm();
    if (leak > leak_tol * std::max(1.0, G.norm())) return {kInf, RateKind::exact_closed_form};
  }
  const Mat Ur = svd.matrixU().leftCols(r);
  const Mat L = G * svd.matrixV().leftCols(r) * s.head(r).cwiseInverse().asDiagonal() * Ur.transpose();
  if (r == m) return lognorm(L, spec, seed);
  return restricted_lognorm(L, Ur, spec, seed);
}

namespace {

void merge(RateEstimate& acc, const RateEstimate& r) {
  if (!r.is_exact()) acc.kind = RateKind::sampled_lower_bound;
  else if (acc.kind == RateKind::exact_closed_form) acc.kind = r.kind;
  acc.value = std::max(acc.value, r.value);
  acc.samples += 1;
  acc.ascent_iters += r.ascent_iters;
}

RateEstimate empty_rate() { return {-kInf, RateKind::exact_closed_form, 0, 0}; }

Mat central_jacobian(const std::function<Vec(const Vec&)>& g, const Vec& u, double rel) {
  const Vec g0 = g(u);
  Mat J(g0.size(), u.size());
  for (Index j = 0; j < u.size(); ++j) {
    const double h = rel * std::max(1.0, std::abs(u[j]));
    Vec a = u, b = u;
    a[j] += h;
    b[j] -= h;
    J.col(j) = (g(a) - g(b)) / (2.0 * h);
  }
  return J;
}

// d/du [Dphi(u) f(t, u)] = Dphi Df + D^2phi[f].
Mat total_derivative(const VectorField& f, const ManifoldSpec& man, double t, const Vec& u) {
  const double rel = man.dphi ? 1e-6 : 1e-4;
  return central_jacobian([&](const Vec& x) { return Vec(man.jacobian(x) * f(t, x)); }, u, rel);
}

Mat range_basis(const Mat& Q) {
  Eigen::JacobiSVD<Mat> svd(Q, Eigen::ComputeFullU);
  const Vec& s = svd.singularValues();
  if (!(s[0] > 1e-14)) throw DegenerateArgument("Q = I - P is zero");
  Index r = 0;
  while (r < s.size() && s[r] > 1e-10 * s[0]) ++r;
  return svd.matrixU().leftCols(r);
}

double coupling_leak(const Mat& J, const SubspaceSpec& sub) { return (sub.Q * J * sub.P).norm(); }

RateEstimate reduced_subspace_rate(const Mat& J, const SubspaceSpec& sub, const Mat& basis,
                                   const NormSpec& spec, std::uint64_t seed) {
  if (coupling_leak(J, sub) > 1e-6 * std::max(1.0, J.norm())) return {kInf, RateKind::exact_closed_form};
  return restricted_lognorm(Mat(sub.Q * J), basis, spec, seed);
}

}  // namespace

RateEstimate subspace_rate(const Mat& J, const SubspaceSpec& sub, const NormSpec& spec,
                           std::uint64_t seed) {
  if (J.rows() != sub.P.rows() || J.cols() != sub.P.cols()) throw DimensionError("J and P differ in size");
  return reduced_subspace_rate(J, sub, range_basis(sub.Q), spec, seed);
}

SubspaceReport subspace_certificate(const VectorField& f, const SubspaceSpec& sub,
                                    const DomainSampler& sampler, const NormSpec& spec,
                                    double t, double tol) {
  const Index n = sub.P.rows();
  if (sampler.dim() != n || (f.dim != 0 && f.dim != n)) {
    throw DimensionError("sampler, field and projection dimensions differ");
  }
  spec.validate_dimension(n);
  const Mat basis = range_basis(sub.Q);

  SubspaceReport rep;
  rep.rate = empty_rate();
  for (const Vec& u : sampler.draw()) {
    const Vec v = sub.P * u;
    rep.invariance_residual = std::max(rep.invariance_residual, norm(Vec(sub.Q * f.eval_checked(t, v)), spec));
    const Mat J = f.jacobian_at(t, u);
    rep.coupling_residual = std::max(rep.coupling_residual, coupling_leak(J, sub));
    merge(rep.rate, reduced_subspace_rate(J, sub, basis, spec, sampler.seed));
  }
  rep.pass = rep.invariance_residual <= tol && rep.rate.value < 0.0;
  return rep;
}

Mat ManifoldSpec::jacobian(const Vec& u) const {
  if (dphi) return dphi(u);
  return finite_difference_jacobian(phi, u);
}

ManifoldSpec ManifoldSpec::linear(Mat C) {
  ManifoldSpec m;
  m.codomain_dim = C.rows();
  m.phi = [C](const Vec& u) { return Vec(C * u); };
  m.dphi = [C](const Vec&) { return C; };
  return m;
}

std::optional<Vec> project_to_zero_set(const ManifoldSpec& man, const Vec& u0) {
  Vec u = u0;
  for (int it = 0; it < 10; ++it) {
    const Vec r = man.phi(u);
    if (!r.allFinite()) return std::nullopt;
    if (r.norm() <= 1e-10) return u;
    const Mat D = man.jacobian(u);
    u -= D.completeOrthogonalDecomposition().solve(r);
  }
  if (man.phi(u).norm() <= 1e-10) return u;
  return std::nullopt;
}

ManifoldReport manifold_certificate(const VectorField& f, const ManifoldSpec& man,
                                    const DomainSampler& on_manifold,
                                    const DomainSampler& ambient, const NormSpec& spec,
                                    double t, double tol) {
  if (!man.phi) throw ArgumentError("manifold needs phi");
  const Index n = ambient.dim();
  if (on_manifold.dim() != n) throw DimensionError("sampler dimensions differ");

  ManifoldReport rep;
  rep.min_singular_value = kInf;
  for (const Vec& u : on_manifold.draw()) {
    const auto z = project_to_zero_set(man, u);
    if (!z) continue;
    const Mat D = man.jacobian(*z);
    if (D.rows() != man.codomain_dim || D.cols() != n) throw DimensionError("Dphi has wrong shape");
    const double smin = D.jacobiSvd().singularValues().tail(1)[0];
    if (D.rows() > n || !(smin > 1e-8)) throw RegularityError("Dphi is not of full row rank", *z);
    rep.min_singular_value = std::min(rep.min_singular_value, smin);
    rep.tangency_residual = std::max(rep.tangency_residual, lp_norm(Vec(D * f.eval_checked(t, *z)), spec.p));
    ++rep.zero_set_points;
  }
  if (rep.zero_set_points == 0) throw DegenerateArgument("no sample reached the zero set");

  const NormSpec reduced = NormSpec::lp(spec.p);
  rep.rate = empty_rate();
  rep.rate_without_curvature = empty_rate();
  for (const Vec& u : ambient.draw()) {
    const Mat K = man.jacobian(u);
    merge(rep.rate, projected_rate(K, total_derivative(f, man, t, u), reduced, ambient.seed, 1e-5));
    merge(rep.rate_without_curvature,
          projected_rate(K, Mat(K * f.jacobian_at(t, u)), reduced, ambient.seed, 1e-5));
  }
  rep.pass = rep.tangency_residual <= tol && rep.rate.value < 0.0;
  return rep;
}

SymmetrySpec SymmetrySpec::linear(Mat T) {
  SymmetrySpec s;
  s.T = std::move(T);
  return s;
}

SymmetrySpec SymmetrySpec::diffeo(std::function<Vec(const Vec&)> h,
                                  std::function<Mat(const Vec&)> dh,
                                  std::function<Vec(const Vec&)> h_inv) {
  SymmetrySpec s;
  s.h = std::move(h);
  s.dh = std::move(dh);
  s.h_inv = std::move(h_inv);
  return s;
}

namespace {

void check_invertible(const Mat& T) {
  if (T.rows() != T.cols()) throw DimensionError("symmetry matrix must be square");
  if (!(condition_number(T) <= 1e12)) throw SymmetryError("symmetry matrix is not invertible");
}

}  // namespace

double equivariance_residual(const VectorField& f, const SymmetrySpec& sym,
                             const DomainSampler& sampler, double t) {
  double worst = 0.0;
  if (sym.T) {
    const Mat& T = *sym.T;
    check_invertible(T);
    if (T.rows() != sampler.dim()) throw DimensionError("symmetry and sampler dimensions differ");
    for (const Vec& u : sampler.draw()) {
      worst = std::max(worst, (f.eval_checked(t, T * u) - T * f.eval_checked(t, u)).norm());
    }
    return worst;
  }
  if (!sym.h) throw ArgumentError("symmetry needs T or h");
  for (const Vec& u : sampler.draw()) {
    const Vec hu = sym.h(u);
    if (sym.h_inv && (sym.h_inv(hu) - u).norm() > 1e-8 * std::max(1.0, u.norm())) {
      throw SymmetryError("h_inv(h(u)) != u");
    }
    const Mat Dh = sym.dh ? sym.dh(u) : finite_difference_jacobian(sym.h, u);
    if (!(condition_number(Dh) <= 1e12)) throw SymmetryError("Dh is singular");
    worst = std::max(worst, (f.eval_checked(t, hu) - Dh * f.eval_checked(t, u)).norm());
  }
  return worst;
}

double spatiotemporal_residual(const VectorField& f, const Mat& T, double delta_t, int order_k,
                               const DomainSampler& sampler, int time_samples) {
  check_invertible(T);
  if (order_k < 1) throw ArgumentError("order k must be positive");
  if (time_samples < 1) throw ArgumentError("time_samples must be positive");
  Mat Tk = Mat::Identity(T.rows(), T.cols());
  for (int i = 0; i < order_k; ++i) Tk = T * Tk;
  if ((Tk - Mat::Identity(T.rows(), T.cols())).norm() > 1e-8) throw SymmetryError("T^k != I");
  double worst = 0.0;
  const auto pts = sampler.draw();
  for (int j = 0; j < time_samples; ++j) {
    const double t = order_k * delta_t * j / time_samples;
    for (const Vec& u : pts) {
      worst = std::max(worst, (f.eval_checked(t, T * u) - T * f.eval_checked(t + delta_t, u)).norm());
    }
  }
  return worst;
}

LimitCycleReport limit_cycle_certificate(const VectorField& g, const ManifoldSpec& man,
                                         double period, const DomainSampler& ambient,
                                         const NormSpec& spec, double tol, int loop_samples,
                                         int time_samples) {
  if (!man.loop) throw ArgumentError("limit cycle certificate needs a loop parameterization");
  if (!(period > 0.0)) throw ArgumentError("period must be positive");
  if (loop_samples < 1 || time_samples < 1) throw ArgumentError("sample counts must be positive");

  std::vector<Vec> loop;
  for (int k = 0; k < loop_samples; ++k) {
    const Vec z0 = man.loop(2.0 * std::numbers::pi * k / loop_samples);
    const auto z = project_to_zero_set(man, z0);
    if (!z) throw ArgumentError("loop point is not on the zero set");
    loop.push_back(*z);
  }

  LimitCycleReport rep;
  rep.min_speed = kInf;
  rep.rate = empty_rate();
  for (int j = 0; j < time_samples; ++j) {
    const double t = period * j / time_samples;
    for (const Vec& z : loop) {
      const Vec gz = g.eval_checked(t, z);
      const Mat D = man.jacobian(z);
      const double smin = D.jacobiSvd().singularValues().tail(1)[0];
      if (!(smin > 1e-8)) throw RegularityError("Dphi is not of full row rank", z);
      rep.tangency_residual = std::max(rep.tangency_residual, lp_norm(Vec(D * gz), spec.p));
      rep.periodicity_residual =
          std::max(rep.periodicity_residual, norm(Vec(gz - g.eval_checked(t + period, z)), spec));
      rep.min_speed = std::min(rep.min_speed, norm(gz, spec));
    }
    const NormSpec reduced = NormSpec::lp(spec.p);
    for (const Vec& u : ambient.draw()) {
      merge(rep.rate, projected_rate(man.jacobian(u), total_derivative(g, man, t, u), reduced,
                                     ambient.seed, 1e-5));
    }
  }
  rep.pass = rep.rate.value < 0.0 && rep.tangency_residual <= tol &&
             rep.periodicity_residual <= tol && rep.min_speed > tol;
  return rep;
}

DecayReport set_distance_decay(const Trajectory& traj,
                               const std::function<double(const Vec&)>& distance,
                               double t_begin, double t_end) {
  DecayReport rep;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const double t = traj.times[k];
    if (t < t_begin || t > t_end) continue;
    const double d = distance(traj.states[k]);
    if (!(d >= 0.0)) throw ArgumentError("distance must be non-negative and finite");
    rep.times.push_back(t);
    rep.distances.push_back(d);
  }
  if (rep.times.size() < 3) throw ArgumentError("decay fit needs at least 3 points in the window");
  for (std::size_t k = 1; k < rep.distances.size(); ++k) {
    if (rep.distances[k] > rep.distances[k - 1] * (1.0 + 1e-12)) ++rep.monotonicity_violations;
  }
  if (std::all_of(rep.distances.begin(), rep.distances.end(), [](double d) { return d == 0.0; })) {
    rep.fitted_rate = -kInf;
    rep.kappa = 1.0;
    return rep;
  }
  std::vector<double> clamped(rep.distances.size());
  std::transform(rep.distances.begin(), rep.distances.end(), clamped.begin(),
                 [](double d) { return std::max(d, 1e-300); });
  const auto fit = overshoot_fit(rep.times, clamped);
  rep.fitted_rate = fit.lambda;
  rep.kappa = fit.kappa;
  return rep;
}

}  // namespace contraction
