#include "contraction/pdelab.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>

namespace contraction {

namespace {

constexpr double kPi = std::numbers::pi;

Mat kron(const Mat& A, const Mat& B) {
  Mat K(A.rows() * B.rows(), A.cols() * B.cols());
  for (Index i = 0; i < A.rows(); ++i)
    for (Index j = 0; j < A.cols(); ++j) K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
  return K;
}

Mat block_diag(const Mat& B, int copies) {
  Mat out = Mat::Zero(B.rows() * copies, B.cols() * copies);
  for (int c = 0; c < copies; ++c) out.block(c * B.rows(), c * B.cols(), B.rows(), B.cols()) = B;
  return out;
}

Grid line_of(const Grid& g) {
  Grid l = g;
  l.dim = 1;
  return l;
}

Mat laplacian_1d(const Grid& g) {
  const int n = g.n;
  const double h = g.h(), ih2 = 1.0 / (h * h);
  Mat L = Mat::Zero(n, n);
  if (g.bc == Boundary::periodic && g.scheme == LaplacianScheme::spectral) {
    // Real form of F^{-1} diag(-(2 pi k / L)^2) F; the Nyquist mode of an
    // even grid contributes its cosine only.
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int k = 1; 2 * k < n; ++k) {
          const double kap = 2 * kPi * k / g.length;
          s -= 2.0 * kap * kap * std::cos(2 * kPi * k * (i - j) / n);
        }
        if (n % 2 == 0) {
          const double kap = kPi * n / g.length;
          s -= kap * kap * ((i - j) % 2 == 0 ? 1.0 : -1.0);
        }
        L(i, j) = s / n;
      }
    }
    return L;
  }
  for (int i = 0; i < n; ++i) {
    L(i, i) = -2 * ih2;
    if (i > 0) L(i, i - 1) = ih2;
    if (i + 1 < n) L(i, i + 1) = ih2;
  }
  if (g.bc == Boundary::periodic) {
    L(0, n - 1) += ih2;
    L(n - 1, 0) += ih2;
  } else if (g.bc == Boundary::neumann) {
    // Mirrored ghost points u_{-1} = u_1 and u_n = u_{n-2}.
    L(0, 1) = 2 * ih2;
    L(n - 1, n - 2) = 2 * ih2;
  }
  return L;
}

Mat forward_1d(const Grid& g) {
  const int n = g.n;
  const double ih = 1.0 / g.h();
  Mat D = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    D(i, i) = -ih;
    if (i + 1 < n) D(i, i + 1) = ih;
  }
  if (g.bc == Boundary::periodic) D(n - 1, 0) = ih;
  if (g.bc == Boundary::neumann) D(n - 1, n - 1) = 0.0;  // zero flux through the right end
  return D;
}

Mat mass_zero_basis(const Vec& w) {
  // Orthonormal basis of {v : w^T v = 0}.
  Eigen::HouseholderQR<Mat> qr(Mat(w / w.norm()));
  const Mat Q = qr.householderQ() * Mat::Identity(w.size(), w.size());
  return Q.rightCols(w.size() - 1);
}

bool admits_constants(const Grid& g) { return g.bc != Boundary::dirichlet; }

}  // namespace

std::string to_string(Boundary bc) {
  switch (bc) {
    case Boundary::dirichlet: return "dirichlet";
    case Boundary::neumann: return "neumann";
    case Boundary::periodic: return "periodic";
  }
  return "?";
}

Boundary boundary_from_string(const std::string& name) {
  if (name == "dirichlet") return Boundary::dirichlet;
  if (name == "neumann") return Boundary::neumann;
  if (name == "periodic") return Boundary::periodic;
  throw ArgumentError("unknown boundary condition '" + name + "'");
}

Grid Grid::line(int n, Boundary bc, double length) {
  Grid g;
  g.n = n;
  g.bc = bc;
  g.length = length;
  g.validate();
  return g;
}

Grid Grid::square(int n, Boundary bc, double length) {
  Grid g = line(n, bc, length);
  g.dim = 2;
  return g;
}

void Grid::validate() const {
  if (n < 3) throw ArgumentError("grid needs n >= 3");
  if (dim != 1 && dim != 2) throw ArgumentError("grid dimension must be 1 or 2");
  if (!(length > 0.0)) throw ArgumentError("domain length must be positive");
  if (scheme == LaplacianScheme::spectral && bc != Boundary::periodic) {
    throw ArgumentError("the spectral Laplacian needs a periodic grid");
  }
}

double Grid::h() const {
  switch (bc) {
    case Boundary::dirichlet: return length / (n + 1);
    case Boundary::periodic: return length / n;
    case Boundary::neumann: return length / (n - 1);
  }
  return 0.0;
}

Index Grid::size() const { return dim == 1 ? n : static_cast<Index>(n) * n; }

Vec Grid::axis() const {
  Vec x(n);
  const double hh = h();
  for (int i = 0; i < n; ++i) x[i] = (bc == Boundary::dirichlet ? i + 1 : i) * hh;
  return x;
}

Mat Grid::points() const {
  const Vec x = axis();
  Mat P(dim, size());
  for (Index k = 0; k < size(); ++k) {
    P(0, k) = x[k % n];
    if (dim == 2) P(1, k) = x[k / n];
  }
  return P;
}

Vec Grid::weights() const {
  Vec w1 = Vec::Constant(n, h());
  if (bc == Boundary::neumann) {
    w1[0] *= 0.5;
    w1[n - 1] *= 0.5;
  }
  if (dim == 1) return w1;
  Vec w(size());
  for (Index k = 0; k < size(); ++k) w[k] = w1[k % n] * w1[k / n];
  return w;
}

NormSpec Grid::l2_norm() const {
  return NormSpec::weighted(2.0, Mat(weights().cwiseSqrt().asDiagonal()));
}

Vec Grid::sample(const std::function<double(const Vec&)>& fn) const {
  const Mat P = points();
  Vec out(size());
  for (Index k = 0; k < size(); ++k) out[k] = fn(Vec(P.col(k)));
  return out;
}

Mat build_laplacian(const Grid& grid) {
  grid.validate();
  const Mat L1 = laplacian_1d(line_of(grid));
  if (grid.dim == 1) return L1;
  const Mat I = Mat::Identity(grid.n, grid.n);
  return kron(I, L1) + kron(L1, I);
}

Mat forward_difference(const Grid& grid, int axis) {
  grid.validate();
  if (axis < 0 || axis >= grid.dim) throw ArgumentError("axis out of range");
  const Mat D1 = forward_1d(line_of(grid));
  if (grid.dim == 1) return D1;
  const Mat I = Mat::Identity(grid.n, grid.n);
  return axis == 0 ? kron(I, D1) : kron(D1, I);
}

Mat central_difference(const Grid& grid) {
  grid.validate();
  if (grid.dim != 1) throw ArgumentError("central difference is provided for 1-D grids");
  const int n = grid.n;
  const double c = 0.5 / grid.h();
  Mat D = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    if (i + 1 < n) D(i, i + 1) = c;
    if (i > 0) D(i, i - 1) = -c;
  }
  if (grid.bc == Boundary::periodic) {
    D(0, n - 1) = -c;
    D(n - 1, 0) = c;
  } else if (grid.bc == Boundary::neumann) {
    D.row(0).setZero();
    D.row(n - 1).setZero();
  }
  return D;
}

NormSpec SobolevSpec::norm(const Grid& grid) const {
  if (k < 0 || k > 4) throw ArgumentError("Sobolev order must lie in 0..4");
  if (k == 0) return NormSpec::lp(p);
  std::vector<Mat> first;
  for (int a = 0; a < grid.dim; ++a) first.push_back(forward_difference(grid, a));
  std::vector<Mat> words = first, diffs;
  for (int j = 1; j <= k; ++j) {
    if (j > 1) {
      std::vector<Mat> next;
      for (const Mat& d : first)
        for (const Mat& w : words) next.push_back(d * w);
      words = std::move(next);
    }
    Mat stacked(grid.size() * static_cast<Index>(words.size()), grid.size());
    for (std::size_t i = 0; i < words.size(); ++i) stacked.middleRows(grid.size() * static_cast<Index>(i), grid.size()) = words[i];
    diffs.push_back(std::move(stacked));
  }
  return NormSpec::sobolev(p, diffs);
}

SubspaceSpec constant_projection(const Grid& grid, int components) {
  if (components < 1) throw ArgumentError("components must be positive");
  const Vec w = grid.weights();
  const Mat P1 = Vec::Ones(w.size()) * w.transpose() / w.sum();
  return SubspaceSpec::from_projection(block_diag(P1, components));
}

PoincareReport poincare_rate(const Grid& grid, const NormSpec& spec, bool mean_free) {
  const Mat L = build_laplacian(grid);
  spec.validate_dimension(L.rows());
  PoincareReport rep;
  if (!admits_constants(grid)) {
    rep.rate = lognorm(L, spec);
  } else if (mean_free) {
    rep.rate = restricted_lognorm(L, mass_zero_basis(grid.weights()), spec);
    rep.projected = true;
  } else {
    rep.rate = lognorm(L, spec);
    rep.degenerate = true;
  }
  return rep;
}

PoincareReport poincare_rate(const Grid& grid, bool mean_free) {
  return poincare_rate(grid, grid.l2_norm(), mean_free);
}

void RdSystem::validate() const {
  grid.validate();
  if (alphas.empty()) throw ArgumentError("reaction-diffusion system needs at least one component");
  for (double a : alphas) {
    if (!(a > 0.0)) throw ArgumentError("diffusivities must be positive");
  }
}

Mat RdSystem::diffusion() const {
  validate();
  const Mat L = build_laplacian(grid);
  const Index N = L.rows();
  Mat D = Mat::Zero(N * components(), N * components());
  for (int c = 0; c < components(); ++c) D.block(c * N, c * N, N, N) = alphas[c] * L;
  return D;
}

double RdSystem::max_step() const {
  validate();
  const double h = grid.h(), amax = *std::max_element(alphas.begin(), alphas.end());
  double limit = h * h / (2.0 * grid.dim * amax);
  // The spectral symbol reaches (pi/h)^2 instead of 4/h^2.
  if (grid.scheme == LaplacianScheme::spectral) limit *= 4.0 / (kPi * kPi);
  return limit;
}

namespace {

Vec apply_reaction(const Reaction& f, double t, const Vec& u, Index N, int m) {
  Vec out = Vec::Zero(u.size());
  if (!f) return out;
  Vec local(m);
  for (Index k = 0; k < N; ++k) {
    for (int c = 0; c < m; ++c) local[c] = u[c * N + k];
    const Vec r = f(t, local);
    if (r.size() != m) throw DimensionError("reaction returned the wrong number of components");
    for (int c = 0; c < m; ++c) out[c * N + k] = r[c];
  }
  return out;
}

Mat local_jacobian(const Reaction& f, double t, const Vec& local) {
  return finite_difference_jacobian([&](const Vec& x) { return f(t, x); }, local);
}

}  // namespace

Mat RdSystem::reaction_jacobian(double t, const Vec& u) const {
  const Index N = grid.size();
  const int m = components();
  if (u.size() != N * m) throw DimensionError("state does not match the grid");
  Mat J = Mat::Zero(N * m, N * m);
  if (!reaction) return J;
  Vec local(m);
  for (Index k = 0; k < N; ++k) {
    for (int c = 0; c < m; ++c) local[c] = u[c * N + k];
    const Mat Jl = local_jacobian(reaction, t, local);
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b) J(a * N + k, b * N + k) = Jl(a, b);
  }
  return J;
}

VectorField RdSystem::field() const {
  const Mat D = diffusion();
  if (!reaction) return VectorField::linear(D);
  auto sparse = std::make_shared<Eigen::SparseMatrix<double>>(D.sparseView());
  const Index N = grid.size();
  const int m = components();
  VectorField F;
  F.dim = N * m;
  F.f = [sparse, f = reaction, N, m](double t, const Vec& u) {
    return Vec(*sparse * u + apply_reaction(f, t, u, N, m));
  };
  RdSystem self = *this;
  F.jacobian = [self, D](double t, const Vec& u) { return Mat(D + self.reaction_jacobian(t, u)); };
  return F;
}

RdResult rd_simulate(const RdSystem& sys, const Vec& u0, double t0, double t1, double h_t) {
  sys.validate();
  const Index N = sys.grid.size();
  const int m = sys.components();
  if (u0.size() != N * m) throw DimensionError("initial state does not match the grid");
  const double limit = sys.max_step();
  if (!(h_t > 0.0) || h_t > limit * (1.0 + 1e-12)) {
    std::ostringstream msg;
    msg << "time step " << h_t << " exceeds the explicit stability limit " << limit;
    throw StepSizeError(msg.str(), limit);
  }
  const double span = t1 - t0;
  const double steps = std::max(1.0, std::ceil(span / h_t - 1e-9));
  RdResult res;
  res.trajectory = integrate(sys.field(), u0, t0, t1, span / steps);
  const Vec w = sys.grid.weights();
  for (const Vec& u : res.trajectory.states) {
    Vec mass(m);
    for (int c = 0; c < m; ++c) mass[c] = w.dot(u.segment(c * N, N));
    res.mass.push_back(mass);
  }
  return res;
}

namespace {

// Amplitude of the first nonconstant mode along x of component 0.
double mode1_amplitude(const Grid& g, const Vec& u) {
  const Vec w = g.weights();
  const Mat P = g.points();
  const Vec v = u.head(g.size()).array() - w.dot(u.head(g.size())) / w.sum();
  const auto proj = [&](const std::function<double(double)>& phi) {
    double num = 0, den = 0;
    for (Index k = 0; k < g.size(); ++k) {
      const double p = phi(P(0, k));
      num += w[k] * v[k] * p;
      den += w[k] * p * p;
    }
    return num / den;
  };
  if (g.bc == Boundary::periodic) {
    const double a = proj([&](double x) { return std::sin(2 * kPi * x / g.length); });
    const double b = proj([&](double x) { return std::cos(2 * kPi * x / g.length); });
    return std::hypot(a, b);
  }
  return std::abs(proj([&](double x) { return std::cos(kPi * x / g.length); }));
}

double fitted_decay(const Trajectory& tr, const std::function<double(const Vec&)>& dist) {
  const std::size_t stride = std::max<std::size_t>(1, tr.size() / 200);
  std::vector<double> ts, ds;
  for (std::size_t k = 0; k < tr.size(); k += stride) {
    const double d = dist(tr.states[k]);
    if (d > 0.0) {
      ts.push_back(tr.times[k]);
      ds.push_back(d);
    }
  }
  if (ts.size() < 3) return -kInf;
  return overshoot_fit(ts, ds).lambda;
}

Vec seeded_noise(Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Vec v(n);
  for (Index i = 0; i < n; ++i) v[i] = g(rng);
  return v;
}

}  // namespace

PatternReport pattern_report(const RdSystem& sys, const DomainSampler& sampler, PatternMode mode,
                             const Vec& witness, const PatternOptions& opts) {
  sys.validate();
  const Grid& g = sys.grid;
  if (!admits_constants(g)) throw ArgumentError("pattern analysis needs zero-flux or periodic boundaries");
  const Index N = g.size();
  const int m = sys.components();
  if (sampler.dim() != N * m) throw DimensionError("sampler does not match the stacked state");

  PatternReport rep;
  rep.mode = mode;
  rep.min_alpha = *std::min_element(sys.alphas.begin(), sys.alphas.end());
  rep.laplacian_rate = poincare_rate(g).rate.value;
  const Vec w = g.weights();
  const NormSpec spec1 = g.l2_norm();
  const double h_t = opts.h_t > 0.0 ? opts.h_t : 0.9 * sys.max_step();
  const auto field = sys.field();

  if (mode == PatternMode::suppression) {
    const SubspaceSpec sub = constant_projection(g, m);
    const NormSpec spec = NormSpec::weighted(2.0, block_diag(Mat(w.cwiseSqrt().asDiagonal()), m));
    rep.reaction_rate = -kInf;
    for (const Vec& u : sampler.draw()) {
      const Vec Pv = sub.P * u;
      rep.invariance_residual =
          std::max(rep.invariance_residual, norm(Vec(sub.Q * field.eval_checked(opts.time, Pv)), spec));
      rep.reaction_rate = std::max(
          rep.reaction_rate, subspace_rate(sys.reaction_jacobian(opts.time, u), sub, spec, sampler.seed).value);
    }
    rep.rate_condition = rep.reaction_rate < rep.min_alpha * std::abs(rep.laplacian_rate);
    rep.printed_rate_condition = rep.reaction_rate < rep.laplacian_rate;
    rep.predicted_rate = rep.reaction_rate + rep.min_alpha * rep.laplacian_rate;

    // Perturbed homogeneous state with a visible first mode.
    const Vec first = g.sample([&](const Vec& x) {
      return g.bc == Boundary::periodic ? std::cos(2 * kPi * x[0] / g.length) : std::cos(kPi * x[0] / g.length);
    });
    Vec u0(N * m);
    const Vec noise = seeded_noise(N * m, sampler.seed);
    for (int c = 0; c < m; ++c) u0.segment(c * N, N) = Vec::Ones(N) + 0.1 * first + 0.01 * noise.segment(c * N, N);
    const auto res = rd_simulate(sys, u0, 0.0, opts.t_end, h_t);
    const auto dist = [&](const Vec& u) { return norm(Vec(sub.Q * u), spec); };
    rep.simulated_rate = fitted_decay(res.trajectory, dist);
    rep.mode1_growth = mode1_amplitude(g, res.trajectory.final_state()) / mode1_amplitude(g, u0);
    rep.simulation_consistent = !rep.rate_condition || rep.simulated_rate <= rep.predicted_rate + 1e-3;
    rep.pass = rep.invariance_residual <= opts.tol && rep.rate_condition && rep.simulation_consistent;
    return rep;
  }

  if (m != 2) throw ArgumentError("excitation analysis needs exactly two components");
  if (witness.size() != N) throw DimensionError("witness does not match the grid");
  if (!(witness.cwiseAbs().maxCoeff() > 0.0)) throw ArgumentError("excitation witness must be nonzero");
  if (!sys.reaction) throw ArgumentError("excitation analysis needs a reaction term");

  const Mat L = build_laplacian(g);
  const Vec Lw = L * witness;
  Vec pair(2 * N);
  pair << witness, -witness;
  const Vec fw = apply_reaction(sys.reaction, opts.time, pair, N, 2);
  for (int c = 0; c < 2; ++c) {
    rep.witness_residuals.push_back((fw.segment(c * N, N) + sys.alphas[c] * Lw).cwiseAbs().maxCoeff());
  }
  const SubspaceSpec consts = constant_projection(g, 1);
  rep.witness_mass = norm(Vec(consts.P * witness), spec1);

  // Response of f_i to v = u1 + u2 with u1 - u2 frozen: (d1 f_i + d2 f_i) / 2.
  double sum = 0.0;
  for (int c = 0; c < 2; ++c) {
    double worst = -kInf;
    for (const Vec& u : sampler.draw()) {
      Vec diag(N);
      Vec local(2);
      for (Index k = 0; k < N; ++k) {
        local << u[k], u[N + k];
        const Mat Jl = local_jacobian(sys.reaction, opts.time, local);
        diag[k] = 0.5 * (Jl(c, 0) + Jl(c, 1));
      }
      worst = std::max(worst, subspace_rate(Mat(diag.asDiagonal()), consts, spec1, sampler.seed).value);
    }
    sum += worst;
  }
  rep.excitation_rate_sum = sum;
  const double alpha_sum = sys.alphas[0] + sys.alphas[1];
  rep.excitation_bound = alpha_sum * std::abs(rep.laplacian_rate);
  const Mat ones = Vec::Ones(N).normalized();
  rep.excitation_bound_printed_q = alpha_sum * std::abs(restricted_lognorm(L, ones, spec1).value);
  rep.rate_condition = rep.excitation_rate_sum < rep.excitation_bound;
  rep.printed_rate_condition = rep.excitation_rate_sum < rep.excitation_bound_printed_q;

  Vec u0(2 * N);
  const Vec noise = seeded_noise(2 * N, sampler.seed);
  Vec pert = 1e-3 * noise.head(N);
  pert.array() -= w.dot(pert) / w.sum();
  u0 << witness + pert, -witness + 1e-3 * noise.tail(N);
  const auto res = rd_simulate(sys, u0, 0.0, opts.t_end, h_t);
  const auto sync = [&](const Vec& u) { return norm(Vec(u.head(N) + u.tail(N)), spec1); };
  const auto anti = [&](const Vec& u) { return norm(Vec(u.head(N) - u.tail(N)), spec1); };
  rep.simulated_rate = fitted_decay(res.trajectory, sync);
  rep.sync_distance_end = sync(res.trajectory.final_state());
  rep.antisync_distance_end = anti(res.trajectory.final_state());
  rep.mode1_growth = mode1_amplitude(g, res.trajectory.final_state()) / mode1_amplitude(g, u0);
  rep.simulation_consistent = rep.simulated_rate < 0.0 && rep.antisync_distance_end >= 0.1 * anti(u0);
  const bool witness_ok = std::all_of(rep.witness_residuals.begin(), rep.witness_residuals.end(),
                                      [&](double r) { return r <= opts.tol; }) &&
                          rep.witness_mass <= opts.tol;
  rep.pass = witness_ok && rep.rate_condition && rep.simulation_consistent;
  return rep;
}

RateEstimate sobolev_rate(const VectorField& F, const Grid& grid, const SobolevSpec& sob,
                          const DomainSampler& sampler, bool mean_free) {
  const NormSpec spec = sob.norm(grid);
  const bool restrict = mean_free && admits_constants(grid);
  if (F.is_affine()) {
    const Mat& A = *F.linear_part;
    if (A.rows() != grid.size()) throw DimensionError("field does not match the grid");
    if (restrict) return restricted_lognorm(A, mass_zero_basis(grid.weights()), spec, sampler.seed);
    return lognorm(A, spec, sampler.seed);
  }
  if (!restrict) return integral_rate(F, sampler, spec);
  const Vec w = grid.weights();
  std::vector<Vec> pts;
  for (Vec u : sampler.draw()) {
    u.array() -= w.dot(u) / w.sum();
    pts.push_back(std::move(u));
  }
  return integral_rate(F, DomainSampler::points(std::move(pts)), spec);
}

std::function<Mat(const Vec&)> advection_linearization(const Grid& grid,
                                                       std::function<double(double)> flux_prime) {
  const Mat D = central_difference(grid);
  return [D, fp = std::move(flux_prime)](const Vec& u) {
    Vec s(u.size());
    for (Index i = 0; i < u.size(); ++i) s[i] = fp(u[i]);
    return Mat(-D * s.asDiagonal());
  };
}

ConservationReport conservation_rate(const std::function<Mat(const Vec&)>& linearization,
                                     const Grid& grid, const DomainSampler& sampler) {
  grid.validate();
  if (grid.bc != Boundary::periodic) throw ArgumentError("conservation-law rates need a periodic grid");
  const Index N = grid.size();
  if (sampler.dim() != N) throw DimensionError("sampler does not match the grid");
  const Mat basis = mass_zero_basis(grid.weights());
  const Mat A0 = linearization(Vec::Zero(N));
  ConservationReport rep;
  rep.rate = {-kInf, RateKind::eigen_exact, 0, 0};
  for (Vec u : sampler.draw()) {
    u.array() -= u.mean();
    const Mat A = linearization(u);
    if (A.rows() != N || A.cols() != N) throw DimensionError("linearization has the wrong shape");
    const auto r = restricted_lognorm(A, basis, NormSpec::lp(2), sampler.seed);
    rep.rate.value = std::max(rep.rate.value, r.value);
    rep.rate.samples += 1;
    const double an = A.norm();
    if (an > 0.0) rep.skewness = std::max(rep.skewness, (0.5 * (A + A.transpose())).norm() / an);
    if ((A - A0).norm() > 1e-12 * std::max(1.0, A0.norm())) rep.nonlinear = true;
  }
  return rep;
}

ClawResult claw_simulate(const Grid& grid, const std::function<double(double)>& flux,
                         const Vec& u0, double t1, double h_t) {
  grid.validate();
  if (grid.bc != Boundary::periodic) throw ArgumentError("conservation-law simulation needs a periodic grid");
  if (u0.size() != grid.size()) throw DimensionError("initial state does not match the grid");
  const Mat D = central_difference(grid);
  auto sparse = std::make_shared<Eigen::SparseMatrix<double>>(D.sparseView());
  const auto F = VectorField::autonomous(grid.size(), [sparse, flux](const Vec& u) {
    Vec fu(u.size());
    for (Index i = 0; i < u.size(); ++i) fu[i] = flux(u[i]);
    return Vec(-(*sparse * fu));
  });
  ClawResult res;
  res.trajectory = integrate(F, u0, 0.0, t1, h_t);
  const Vec w = grid.weights();
  for (const Vec& u : res.trajectory.states) {
    res.mass.push_back(w.dot(u));
    res.max_mass_drift = std::max(res.max_mass_drift, std::abs(res.mass.back() - res.mass.front()));
  }
  return res;
}

FixedPointReport fixed_point_solve(const VectorField& F, const Vec& u0, const NormSpec& spec,
                                   const DomainSampler& sampler, const FixedPointOptions& opts) {
  require_finite(u0, "initial guess");
  FixedPointReport rep;
  rep.rate = F.is_affine() ? lognorm(*F.linear_part, spec, sampler.seed) : integral_rate(F, sampler, spec);
  rep.rate_sampled = !rep.rate.is_exact();
  if (!(rep.rate.value < 0.0) && !opts.force) {
    std::ostringstream msg;
    msg << "measured rate " << rep.rate.value << " is not negative; no contraction certificate";
    throw CertificateRefused(msg.str());
  }
  double h = opts.h_t;
  if (!(h > 0.0)) {
    const double jn = F.jacobian_at(0.0, u0).cwiseAbs().rowwise().sum().maxCoeff();
    h = jn > 0.0 ? 2.0 / jn : 0.1;
  }
  Vec u = u0;
  double t = 0.0;
  std::size_t step = 0;
  Vec k1 = F.eval_checked(0.0, u);
  while (true) {
    const double r = k1.cwiseAbs().maxCoeff();
    if (step % 100 == 0 || r <= opts.tol) {
      rep.residual_times.push_back(t);
      rep.residual_history.push_back(r);
    }
    rep.residual = r;
    if (r <= opts.tol) {
      rep.converged = true;
      break;
    }
    if (t >= opts.max_t) break;
    const Vec k2 = F.eval_checked(t, u + 0.5 * h * k1);
    const Vec k3 = F.eval_checked(t, u + 0.5 * h * k2);
    const Vec k4 = F.eval_checked(t, u + h * k3);
    u += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    t += h;
    ++step;
    if (!(u.cwiseAbs().maxCoeff() <= kBlowUp)) throw DivergenceError("fixed-point iteration diverged", t);
    k1 = F.eval_checked(t, u);
  }
  rep.solution = u;
  rep.time = t;
  std::vector<double> ts, rs;
  for (std::size_t i = 0; i < rep.residual_history.size(); ++i) {
    if (rep.residual_history[i] > 0.0) {
      ts.push_back(rep.residual_times[i]);
      rs.push_back(rep.residual_history[i]);
    }
  }
  rep.fitted_rate = ts.size() >= 3 ? overshoot_fit(ts, rs).lambda : 0.0;
  return rep;
}

std::string grid_csv(const Grid& grid, const Vec& state, int components) {
  if (components < 1 || state.size() != grid.size() * components) {
    throw DimensionError("state does not match the grid");
  }
  std::ostringstream out;
  out << (grid.dim == 1 ? "x" : "x,y");
  for (int c = 0; c < components; ++c) out << ",u" << (c + 1);
  out << '\n';
  const Mat P = grid.points();
  char buf[32];
  for (Index k = 0; k < grid.size(); ++k) {
    for (int d = 0; d < grid.dim; ++d) {
      std::snprintf(buf, sizeof buf, "%.17g", P(d, k));
      out << (d ? "," : "") << buf;
    }
    for (int c = 0; c < components; ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", state[c * grid.size() + k]);
      out << ',' << buf;
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace contraction
