#include "contraction/measures.hpp"

#include "contraction/detail/optimize.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <random>

namespace contraction {

std::string to_string(RateKind kind) {
  switch (kind) {
    case RateKind::exact_closed_form: return "exact-closed-form";
    case RateKind::eigen_exact: return "eigen-exact";
    case RateKind::sampled_lower_bound: return "sampled-lower-bound";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Sampling

DomainSampler DomainSampler::box(Vec lo, Vec hi, std::size_t count, std::uint64_t seed) {
  if (lo.size() != hi.size()) throw DimensionError("box corners differ in dimension");
  if ((hi.array() < lo.array()).any()) throw ArgumentError("box has hi < lo");
  return {seed, Box{std::move(lo), std::move(hi)}, count};
}

DomainSampler DomainSampler::interval(double lo, double hi, std::size_t count,
                                      std::uint64_t seed) {
  return box(Vec::Constant(1, lo), Vec::Constant(1, hi), count, seed);
}

DomainSampler DomainSampler::ball(Vec center, double radius, std::size_t count,
                                  std::uint64_t seed) {
  if (!(radius > 0.0)) throw ArgumentError("ball radius must be positive");
  return {seed, Sphere{std::move(center), radius, false}, count};
}

DomainSampler DomainSampler::sphere(Vec center, double radius, std::size_t count,
                                    std::uint64_t seed) {
  if (!(radius > 0.0)) throw ArgumentError("sphere radius must be positive");
  return {seed, Sphere{std::move(center), radius, true}, count};
}

DomainSampler DomainSampler::points(std::vector<Vec> pts) {
  if (pts.empty()) throw ArgumentError("point list is empty");
  const std::size_t count = pts.size();
  return {0, PointList{std::move(pts)}, count};
}

Index DomainSampler::dim() const {
  if (const auto* b = std::get_if<Box>(&region)) return b->lo.size();
  if (const auto* s = std::get_if<Sphere>(&region)) return s->center.size();
  return std::get<PointList>(region).points.front().size();
}

std::vector<Vec> DomainSampler::draw() const {
  if (const auto* pl = std::get_if<PointList>(&region)) return pl->points;
  std::mt19937_64 rng(seed);
  const Index n = dim();
  std::vector<Vec> out;
  out.reserve(count);
  if (const auto* b = std::get_if<Box>(&region)) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (std::size_t k = 0; k < count; ++k) {
      Vec x(n);
      for (Index i = 0; i < n; ++i) x[i] = b->lo[i] + unif(rng) * (b->hi[i] - b->lo[i]);
      out.push_back(std::move(x));
    }
    return out;
  }
  const auto& s = std::get<Sphere>(region);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::size_t k = 0; k < count; ++k) {
    Vec d(n);
    for (Index i = 0; i < n; ++i) d[i] = gauss(rng);
    const double len = d.norm();
    if (len == 0.0) d.setUnit(0); else d /= len;
    const double r = s.surface ? s.radius
                               : s.radius * std::pow(unif(rng), 1.0 / static_cast<double>(n));
    out.push_back(s.center + r * d);
  }
  return out;
}

Vec DomainSampler::project(const Vec& x) const {
  if (const auto* b = std::get_if<Box>(&region)) return x.cwiseMax(b->lo).cwiseMin(b->hi);
  if (const auto* s = std::get_if<Sphere>(&region)) {
    const Vec d = x - s->center;
    const double len = d.norm();
    if (len == 0.0) return s->surface ? Vec(s->center + s->radius * Vec::Unit(x.size(), 0)) : x;
    if (s->surface || len > s->radius) return s->center + (s->radius / len) * d;
    return x;
  }
  return x;
}

double DomainSampler::scale() const {
  if (const auto* b = std::get_if<Box>(&region)) {
    const double w = (b->hi - b->lo).maxCoeff();
    return w > 0.0 ? w : 1.0;
  }
  if (const auto* s = std::get_if<Sphere>(&region)) return 2.0 * s->radius;
  double m = 0.0;
  for (const auto& p : std::get<PointList>(region).points) m = std::max(m, p.cwiseAbs().maxCoeff());
  return m > 0.0 ? m : 1.0;
}

// ---------------------------------------------------------------------------
// Closed forms

namespace {

void require_square(Index r, Index c) {
  if (r != c) throw DimensionError("log norm needs a square operator");
}

template <class M>
double column_measure(const M& A) {
  double best = -kInf;
  for (Index j = 0; j < A.cols(); ++j) {
    double s = std::real(A(j, j));
    for (Index i = 0; i < A.rows(); ++i)
      if (i != j) s += std::abs(A(i, j));
    best = std::max(best, s);
  }
  return best;
}

template <class M>
double row_measure(const M& A) {
  double best = -kInf;
  for (Index i = 0; i < A.rows(); ++i) {
    double s = std::real(A(i, i));
    for (Index j = 0; j < A.cols(); ++j)
      if (i != j) s += std::abs(A(i, j));
    best = std::max(best, s);
  }
  return best;
}

double sym_lambda_max(const Mat& S) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (S + S.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

// For the spec norm x -> ||T x||_p, returns a square matrix C and its
// inverse such that ||T x||_p = ||C x||_p (square weight, any p) or
// ||T x||_2 = ||C x||_2 (tall stack, p = 2). nullopt if no such reduction.
struct Reduction {
  Mat C;
  Mat Cinv;
};

std::optional<Reduction> reduce(const NormSpec& spec, Index n) {
  spec.validate_dimension(n);
  const auto T = spec.transform();
  if (!T) return Reduction{Mat::Identity(n, n), Mat::Identity(n, n)};
  if (T->rows() == T->cols()) {
    Eigen::PartialPivLU<Mat> lu(*T);
    return Reduction{*T, lu.inverse()};
  }
  if (spec.p != 2.0) return std::nullopt;
  Eigen::HouseholderQR<Mat> qr(*T);
  Mat R = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
  Mat Rinv = R.triangularView<Eigen::Upper>().solve(Mat::Identity(n, n));
  return Reduction{R, Rinv};
}

RateEstimate exact(double v, double p) {
  return {v, p == 2.0 ? RateKind::eigen_exact : RateKind::exact_closed_form, 0, 0};
}

double induced_norm_exact(const Mat& B, double p) {
  if (p == 1.0) return B.cwiseAbs().colwise().sum().maxCoeff();
  if (p == kInf) return B.cwiseAbs().rowwise().sum().maxCoeff();
  Eigen::JacobiSVD<Mat> svd(B);
  return svd.singularValues()[0];
}

// Neville-Richardson for a ladder h_k = h0 2^{-k} of a quantity with an
// asymptotic expansion in integer powers of h.
double richardson(const std::vector<double>& g, int order) {
  std::vector<double> t = g;
  const int K = static_cast<int>(g.size()) - 1;
  order = std::min(order, K);
  for (int j = 1; j <= order; ++j) {
    const double f = std::ldexp(1.0, j) - 1.0;
    for (int k = K; k >= j; --k) t[k] = t[k] + (t[k] - t[k - 1]) / f;
  }
  return t[K];
}

}  // namespace

RateEstimate lognorm_closed(const Mat& A, double p) {
  require_square(A.rows(), A.cols());
  if (A.size() == 0) throw DimensionError("log norm of an empty operator");
  if (p == 1.0) return exact(column_measure(A), p);
  if (p == kInf) return exact(row_measure(A), p);
  if (p == 2.0) return exact(sym_lambda_max(A), p);
  throw UnsupportedNorm("closed-form log norm exists only for p in {1, 2, inf}");
}

RateEstimate lognorm_closed(const CMat& A, double p) {
  require_square(A.rows(), A.cols());
  if (A.size() == 0) throw DimensionError("log norm of an empty operator");
  if (p == 1.0) return exact(column_measure(A), p);
  if (p == kInf) return exact(row_measure(A), p);
  if (p == 2.0) {
    Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (A + A.adjoint()), Eigen::EigenvaluesOnly);
    return exact(es.eigenvalues().maxCoeff(), p);
  }
  throw UnsupportedNorm("closed-form log norm exists only for p in {1, 2, inf}");
}

RateEstimate lognorm_limit(const Mat& A, const NormSpec& spec, std::uint64_t seed) {
  require_square(A.rows(), A.cols());
  spec.validate();
  const Index n = A.rows();
  const auto red = spec.has_closed_lognorm() ? reduce(spec, n) : std::nullopt;

  if (red) {
    const Mat B = red->C * A * red->Cinv;
    const Mat I = Mat::Identity(n, n);
    const double scale = std::max(1.0, B.cwiseAbs().maxCoeff());
    std::vector<double> g;
    double h = 1e-3 / scale;
    for (int k = 0; k < 7; ++k, h *= 0.5) {
      g.push_back((induced_norm_exact(I + h * B, spec.p) - 1.0) / h);
    }
    // Row/column sums are exactly affine in h once h is small; the p = 2
    // singular value is analytic in h.
    const double v = spec.p == 2.0 ? richardson(g, 4) : g.back();
    return {v, spec.p == 2.0 ? RateKind::eigen_exact : RateKind::exact_closed_form, g.size(), 0};
  }

  // General p: maximize the one-sided Gateaux quotient over the sphere.
  const auto norm_fn = [&](const Vec& x) { return norm(x, spec); };
  auto quotient = [&](const Vec& x) {
    const double nx = norm_fn(x);
    if (nx == 0.0) return -kInf;
    return numeric_sip(norm_fn, x, A * x) / (nx * nx);
  };
  const auto res = detail::maximize_on_sphere(quotient, n, seed);
  return {res.value, RateKind::sampled_lower_bound, res.samples, res.iterations};
}

RateEstimate restricted_lognorm(const Mat& A, const Mat& basis, const NormSpec& spec,
                                std::uint64_t seed) {
  require_square(A.rows(), A.cols());
  spec.validate();
  const Index n = A.rows();
  if (basis.rows() != n) throw DimensionError("basis rows must match operator dimension");
  const Index r = basis.cols();
  if (r == 0) throw DegenerateArgument("restriction to the zero subspace");

  const auto T = spec.transform();
  const Mat TB = T ? Mat(*T * basis) : basis;

  if (spec.p == 2.0) {
    Eigen::HouseholderQR<Mat> qr(TB);
    const Mat R = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
    const Mat Q = qr.householderQ() * Mat::Identity(TB.rows(), r);
    const Mat Rinv = R.triangularView<Eigen::Upper>().solve(Mat::Identity(r, r));
    const Mat TAB = T ? Mat(*T * A * basis) : Mat(A * basis);
    return exact(sym_lambda_max(Q.transpose() * TAB * Rinv), 2.0);
  }

  const bool full = r == n && basis.isIdentity(0.0);
  if (full && spec.has_closed_lognorm()) {
    if (auto red = reduce(spec, n)) return lognorm_closed(Mat(red->C * A * red->Cinv), spec.p);
  }
  // Span of signed coordinate vectors: the plain lp norm restricts to the
  // lp norm of the selected coordinates, so the closed form applies to the
  // compressed block.
  if (spec.is_plain() && spec.has_closed_lognorm()) {
    std::vector<Index> idx;
    Vec sign(r);
    bool coordinate = true;
    for (Index j = 0; j < r && coordinate; ++j) {
      Index at = -1;
      for (Index i = 0; i < n; ++i) {
        const double a = std::abs(basis(i, j));
        if (a <= 1e-14) continue;
        if (std::abs(a - 1.0) > 1e-14 || at >= 0) {
          coordinate = false;
          break;
        }
        at = i;
      }
      if (at < 0 || std::find(idx.begin(), idx.end(), at) != idx.end()) coordinate = false;
      if (coordinate) {
        idx.push_back(at);
        sign[j] = basis(at, j) > 0 ? 1.0 : -1.0;
      }
    }
    if (coordinate) {
      Mat block(r, r);
      for (Index a = 0; a < r; ++a)
        for (Index b = 0; b < r; ++b) block(a, b) = sign[a] * A(idx[a], idx[b]) * sign[b];
      return lognorm_closed(block, spec.p);
    }
  }

  auto quotient = [&](const Vec& z) {
    const Vec x = basis * z;
    const double nx = norm(x, spec);
    if (nx == 0.0) return -kInf;
    return sip(x, A * x, spec, Side::plus) / (nx * nx);
  };
  const auto res = detail::maximize_on_sphere(quotient, r, seed);
  return {res.value, RateKind::sampled_lower_bound, res.samples, res.iterations};
}

RateEstimate lognorm(const Mat& A, const NormSpec& spec, std::uint64_t seed) {
  require_square(A.rows(), A.cols());
  return restricted_lognorm(A, Mat::Identity(A.rows(), A.rows()), spec, seed);
}

double operator_norm(const Mat& A, const NormSpec& spec, std::uint64_t seed) {
  require_square(A.rows(), A.cols());
  spec.validate();
  if (spec.has_closed_lognorm()) {
    if (auto red = reduce(spec, A.rows())) {
      return induced_norm_exact(red->C * A * red->Cinv, spec.p);
    }
  }
  auto ratio = [&](const Vec& x) {
    const double nx = norm(x, spec);
    return nx == 0.0 ? 0.0 : norm(Vec(A * x), spec) / nx;
  };
  return detail::maximize_on_sphere(ratio, A.rows(), seed).value;
}

// ---------------------------------------------------------------------------
// Rate functionals

namespace {

Mat checked_jacobian(const VectorField& f, double t, const Vec& u) {
  Mat J = f.jacobian_at(t, u);
  if (J.rows() != u.size() || J.cols() != u.size()) {
    throw DimensionError("Jacobian has wrong shape");
  }
  if (!J.allFinite()) throw EvaluationError("Jacobian is non-finite", u);
  return J;
}

void check_sampler(const VectorField& f, const DomainSampler& sampler) {
  if (f.dim != 0 && sampler.dim() != f.dim) {
    throw DimensionError("sampler dimension disagrees with vector field");
  }
}

}  // namespace

RateEstimate integral_rate(const VectorField& f, const DomainSampler& sampler,
                           const NormSpec& spec, double t) {
  spec.validate();
  if (f.is_affine()) return lognorm(*f.linear_part, spec, sampler.seed);
  check_sampler(f, sampler);

  const auto pts = sampler.draw();
  const std::size_t N = pts.size();
  const Index n = sampler.dim();
  const double scale = sampler.scale();
  const double min_sep = 1e-8 * scale;

  auto quotient = [&](const Vec& u, const Vec& v) {
    const Vec d = u - v;
    const double nd = norm(d, spec);
    if (nd <= min_sep) return -kInf;
    const Vec df = f.eval_checked(t, u) - f.eval_checked(t, v);
    return sip(d, df, spec, Side::plus) / (nd * nd);
  };

  struct Pair {
    double q;
    Vec u, v;
  };
  std::vector<Pair> pairs;
  std::mt19937_64 rng(sampler.seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> gauss;
  auto add = [&](const Vec& u, const Vec& v) { pairs.push_back({quotient(u, v), u, v}); };

  for (std::size_t i = 0; i < N; ++i) {
    if (N > 1) add(pts[i], pts[(i + 1) % N]);
    if (N > 3) add(pts[i], pts[(i + N / 2) % N]);
    // Near-diagonal pair to resolve local slopes.
    Vec e(n);
    for (Index k = 0; k < n; ++k) e[k] = gauss(rng);
    e *= 1e-3 * scale / std::max(e.norm(), 1e-300);
    Vec v = sampler.project(pts[i] + e);
    if ((v - pts[i]).norm() <= min_sep) v = sampler.project(pts[i] - e);
    add(pts[i], v);
  }

  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.q > b.q; });
  double best = pairs.empty() ? -kInf : pairs.front().q;
  std::size_t samples = pairs.size();
  std::size_t iters = 0;

  if (sampler.allows_ascent()) {
    const std::size_t starts = std::min<std::size_t>(5, pairs.size());
    auto obj = [&](const Vec& z) { return quotient(z.head(n), z.tail(n)); };
    auto proj = [&](const Vec& z) {
      Vec out(2 * n);
      out << sampler.project(z.head(n)), sampler.project(z.tail(n));
      return out;
    };
    for (std::size_t s = 0; s < starts; ++s) {
      if (!std::isfinite(pairs[s].q)) continue;
      Vec z(2 * n);
      z << pairs[s].u, pairs[s].v;
      const auto res = detail::ascend(obj, z, 0.1 * scale, proj, 50, 1e-7 * scale);
      best = std::max(best, res.value);
      iters += res.iterations;
      samples += res.evaluations;
    }
  }
  return {best, RateKind::sampled_lower_bound, samples, iters};
}

RateEstimate differential_rate(const VectorField& f, const DomainSampler& sampler,
                               const NormSpec& spec, double t) {
  spec.validate();
  if (f.is_affine()) return lognorm(*f.linear_part, spec, sampler.seed);
  check_sampler(f, sampler);

  const auto pts = sampler.draw();
  auto rate_at = [&](const Vec& u) {
    return lognorm(checked_jacobian(f, t, u), spec, sampler.seed).value;
  };

  std::vector<std::pair<double, std::size_t>> vals;
  vals.reserve(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) vals.emplace_back(rate_at(pts[i]), i);
  std::sort(vals.begin(), vals.end(), [](auto& a, auto& b) { return a.first > b.first; });

  double best = vals.empty() ? -kInf : vals.front().first;
  std::size_t samples = vals.size();
  std::size_t iters = 0;
  // Inner sups for exotic p are themselves sampled; skip the outer ascent then.
  if (sampler.allows_ascent() && spec.has_closed_lognorm()) {
    const double scale = sampler.scale();
    auto proj = [&](const Vec& z) { return sampler.project(z); };
    for (std::size_t s = 0; s < std::min<std::size_t>(3, vals.size()); ++s) {
      const auto res = detail::ascend(rate_at, pts[vals[s].second], 0.1 * scale, proj, 50,
                                      1e-6 * scale);
      best = std::max(best, res.value);
      iters += res.iterations;
      samples += res.evaluations;
    }
  }
  return {best, RateKind::sampled_lower_bound, samples, iters};
}

WeightFamily WeightFamily::fixed(Mat theta) {
  WeightFamily w;
  w.constant = std::move(theta);
  return w;
}

WeightFamily WeightFamily::varying(std::function<Mat(double, const Vec&)> theta,
                                   std::function<Mat(double, const Vec&)> theta_dot) {
  WeightFamily w;
  w.theta = std::move(theta);
  w.theta_dot = std::move(theta_dot);
  return w;
}

Mat WeightFamily::at(double t, const Vec& u) const {
  if (constant) return *constant;
  if (!theta) throw ArgumentError("weight family has neither a constant nor a callback");
  return theta(t, u);
}

namespace {

void check_weight(const Mat& theta, Index n) {
  if (theta.rows() != n || theta.cols() != n) {
    throw DimensionError("weight must be " + std::to_string(n) + "x" + std::to_string(n));
  }
  const double c = condition_number(theta);
  if (!(c <= 1e12)) {
    throw ConditioningError("weight is ill-conditioned (cond = " + std::to_string(c) + ")");
  }
}

}  // namespace

RateEstimate weighted_rate(const VectorField& f, const WeightFamily& weight,
                           const NormSpec& spec, WeightMode mode,
                           const DomainSampler& sampler, double t) {
  spec.validate();
  const Index n = sampler.dim();

  if (mode == WeightMode::constant) {
    const Mat theta = weight.at(t, Vec::Zero(n));
    check_weight(theta, n);
    NormSpec ws = spec;
    ws.weight = spec.weight ? Mat(*spec.weight * theta) : theta;
    return integral_rate(f, sampler, ws, t);
  }

  const auto pts = sampler.draw();
  double best = -kInf;
  for (const auto& u : pts) {
    const Mat theta = weight.at(t, u);
    check_weight(theta, n);
    Mat theta_dot;
    if (weight.theta_dot) {
      theta_dot = weight.theta_dot(t, u);
    } else if (weight.constant) {
      theta_dot = Mat::Zero(n, n);
    } else {
      // Total derivative along the flow: d/ds Theta(t + s, u + s f(t, u)).
      const Vec fu = f.eval_checked(t, u);
      const double eps = 1e-6 * std::max(1.0, u.cwiseAbs().maxCoeff());
      theta_dot = (weight.theta(t + eps, u + eps * fu) - weight.theta(t - eps, u - eps * fu)) /
                  (2.0 * eps);
    }
    const Mat G = theta_dot + theta * checked_jacobian(f, t, u);
    const Mat L = theta.partialPivLu().solve(G.transpose()).transpose();  // G Theta^{-1}
    best = std::max(best, lognorm(L, spec, sampler.seed).value);
  }
  return {best, RateKind::sampled_lower_bound, pts.size(), 0};
}

double lp_comparison_bound(double lambda2, double p, double measure_E, std::optional<double> B,
                           double t, double init_dist) {
  if (!(p >= 1.0)) throw ArgumentError("p must satisfy p >= 1");
  const double l2 = std::exp(lambda2 * t) * init_dist;
  if (p == 2.0) return l2;
  if (!(measure_E > 0.0)) throw ArgumentError("measure of E must be positive");
  if (p < 2.0) return std::pow(measure_E, 1.0 / p - 0.5) * l2;
  if (!B) throw ArgumentError("p > 2 requires an L-infinity bound B");
  if (!(*B >= 0.0)) throw ArgumentError("B must be nonnegative");
  const double r = p == kInf ? 0.0 : 2.0 / p;
  const double m = p == kInf ? std::pow(measure_E, 0.5) : std::pow(measure_E, 0.5 - 1.0 / p);
  return std::pow(*B, 1.0 - r) * std::pow(l2 * m, r);
}

}  // namespace contraction
