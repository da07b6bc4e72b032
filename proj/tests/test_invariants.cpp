#include "contraction/invariants.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace contraction;

namespace {

constexpr double kPi = std::numbers::pi;

Mat e1_projection() {
  Mat P = Mat::Zero(2, 2);
  P(0, 0) = 1;
  return P;
}

// u' = u (1 - |u|^2) + omega R u with R the quarter rotation.
VectorField hopf(double omega, std::function<double(double)> amp = {}) {
  VectorField f;
  f.dim = 2;
  f.f = [omega, amp](double t, const Vec& u) {
    const double a = amp ? amp(t) : 1.0;
    Vec out = u * (1.0 - u.squaredNorm());
    out[0] += a * omega * u[1];
    out[1] -= a * omega * u[0];
    return out;
  };
  return f;
}

ManifoldSpec unit_circle() {
  ManifoldSpec m;
  m.phi = [](const Vec& u) { return Vec::Constant(1, u.squaredNorm() - 1.0); };
  m.dphi = [](const Vec& u) { return Mat(2.0 * u.transpose()); };
  m.loop = [](double th) { return Vec((Vec(2) << std::cos(th), std::sin(th)).finished()); };
  return m;
}

}  // namespace

TEST_CASE("projection validation") {
  CHECK_THROWS_AS(SubspaceSpec::from_projection(Mat::Ones(2, 2)), ArgumentError);
  CHECK_THROWS_AS(SubspaceSpec::from_projection(Mat::Zero(2, 3)), DimensionError);
  const auto s = SubspaceSpec::from_projection(e1_projection());
  CHECK((s.P + s.Q).isIdentity(0.0));
}

TEST_CASE("subspace certificate examples") {
  const auto box = DomainSampler::box(Vec::Constant(2, -1), Vec::Constant(2, 1), 20);
  const auto sub = SubspaceSpec::from_projection(e1_projection());
  for (double p : {1.0, 2.0, kInf}) {
    Mat A(2, 2);
    A << -1, 1, 0, -2;
    const auto ok = subspace_certificate(VectorField::linear(A), sub, box, NormSpec::lp(p));
    CHECK(ok.invariance_residual <= 1e-12);
    CHECK(ok.rate.value == doctest::Approx(-2.0));
    CHECK(ok.pass);

    A << -1, 0, 1, -2;
    const auto bad = subspace_certificate(VectorField::linear(A), sub, box, NormSpec::lp(p));
    CHECK(bad.invariance_residual > 0.0);
    CHECK_FALSE(bad.pass);
  }
  CHECK_THROWS_AS(subspace_certificate(VectorField::linear(-Mat::Identity(2, 2)),
                                       SubspaceSpec::from_projection(Mat::Identity(2, 2)), box,
                                       NormSpec::lp(2)),
                  DegenerateArgument);
}

TEST_CASE("coupling out of the subspace makes the rate infinite") {
  // Q J P != 0: Q du grows with P du, so no bound of the form M ||Q du|| exists.
  Mat A(2, 2);
  A << -1, 0, 1, -2;
  const auto box = DomainSampler::box(Vec::Constant(2, -1), Vec::Constant(2, 1), 5);
  const auto r = subspace_certificate(VectorField::linear(A),
                                      SubspaceSpec::from_projection(e1_projection()), box,
                                      NormSpec::lp(2));
  CHECK(r.coupling_residual == doctest::Approx(1.0));
  CHECK(r.rate.value == kInf);
}

TEST_CASE("subspace rate agrees with a brute-force restricted quotient") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    // Invariant coordinate plane {u3 = u4 = 0}: lower-left block zero.
    Mat A = oracle::random_mat(rng, 4);
    A.block(2, 0, 2, 2).setZero();
    Mat P = Mat::Zero(4, 4);
    P(0, 0) = P(1, 1) = 1;
    const auto sub = SubspaceSpec::from_projection(P);
    const auto pts = DomainSampler::points({Vec::Zero(4)});
    const double rate = subspace_certificate(VectorField::linear(A), sub, pts, NormSpec::lp(2)).rate.value;
    // Oracle: on span{e3, e4} the quotient <v, QAv> / |v|^2 over the circle.
    double best = -kInf;
    for (int i = 0; i < 20000; ++i) {
      const double x = 2 * kPi * i / 20000;
      Vec v = Vec::Zero(4);
      v[2] = std::cos(x);
      v[3] = std::sin(x);
      best = std::max(best, v.dot(A * v));
    }
    CHECK(std::abs(rate - best) <= 1e-5);
  }
}

TEST_CASE("projected rate reduces to the subspace rate for a linear phi") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    Mat A = oracle::random_mat(rng, 3);
    A.block(1, 0, 2, 1).setZero();  // span{e1} invariant
    Mat B(3, 2);
    B << 0, 0, 1, 0, 0, 1;  // orthonormal basis of Im Q
    const auto man = ManifoldSpec::linear(B.transpose());
    const auto box = DomainSampler::box(Vec::Constant(3, -1), Vec::Constant(3, 1), 5);
    const auto onm = DomainSampler::points({Vec::Unit(3, 0)});
    const auto mr = manifold_certificate(VectorField::linear(A), man, onm, box, NormSpec::lp(2));
    Mat P = Mat::Zero(3, 3);
    P(0, 0) = 1;
    const auto sr = subspace_certificate(VectorField::linear(A), SubspaceSpec::from_projection(P),
                                         box, NormSpec::lp(2));
    CHECK(mr.rate.value == doctest::Approx(sr.rate.value).epsilon(1e-8));
    CHECK(mr.rate_without_curvature.value == doctest::Approx(sr.rate.value).epsilon(1e-8));
    CHECK(mr.tangency_residual <= 1e-12);
  }
}

TEST_CASE("Hopf oscillator contracts to the unit circle") {
  const auto f = hopf(1.0);
  const auto man = unit_circle();
  const auto on = DomainSampler::sphere(Vec::Zero(2), 1.0, 64, 3);
  const auto near = DomainSampler::sphere(Vec::Zero(2), 1.0, 32, 4);
  const auto rep = manifold_certificate(f, man, on, near, NormSpec::lp(2));
  CHECK(rep.tangency_residual <= 1e-10);
  CHECK(rep.rate.value == doctest::Approx(-2.0).epsilon(1e-6));
  CHECK(rep.pass);
  // Without the curvature term the rotation leaks out of ker Dphi.
  CHECK(rep.rate_without_curvature.value == kInf);
  // Off the circle the rate is 2 - 4 r^2.
  const auto ring = DomainSampler::sphere(Vec::Zero(2), 1.2, 16, 5);
  CHECK(manifold_certificate(f, man, on, ring, NormSpec::lp(2)).rate.value ==
        doctest::Approx(2 - 4 * 1.44).epsilon(1e-6));
}

TEST_CASE("manifold certificate failures") {
  const auto man = unit_circle();
  const auto on = DomainSampler::sphere(Vec::Zero(2), 1.0, 16, 3);
  const auto away = VectorField::linear(-Mat::Identity(2, 2));
  const auto rep = manifold_certificate(away, man, on, on, NormSpec::lp(2));
  CHECK(rep.tangency_residual == doctest::Approx(2.0));
  CHECK_FALSE(rep.pass);

  ManifoldSpec cusp;  // phi = |u|^2 has Dphi = 0 on its zero set {0}
  cusp.phi = [](const Vec& u) { return Vec::Constant(1, u.squaredNorm()); };
  cusp.dphi = [](const Vec& u) { return Mat(2.0 * u.transpose()); };
  const auto origin = DomainSampler::points({Vec::Zero(2)});
  try {
    manifold_certificate(away, cusp, origin, origin, NormSpec::lp(2));
    FAIL("expected RegularityError");
  } catch (const RegularityError& e) {
    CHECK(e.point.norm() == 0.0);
  }
}

TEST_CASE("Newton projection onto the zero set") {
  const auto man = unit_circle();
  const auto z = project_to_zero_set(man, Vec::Constant(2, 3.0));
  REQUIRE(z);
  CHECK(std::abs(z->norm() - 1.0) <= 1e-10);
  CHECK((*z - Vec::Constant(2, std::sqrt(0.5))).norm() <= 1e-8);
}

TEST_CASE("finite-differenced Dphi gives the same Hopf rate") {
  auto man = unit_circle();
  man.dphi = {};
  const auto on = DomainSampler::sphere(Vec::Zero(2), 1.0, 16, 3);
  const auto rep = manifold_certificate(hopf(1.0), man, on, on, NormSpec::lp(2));
  CHECK(rep.rate.value == doctest::Approx(-2.0).epsilon(1e-4));
}

TEST_CASE("equivariance residuals") {
  // f(u) = -u + tanh(u) componentwise is odd and commutes with coordinate swaps.
  const auto f = VectorField::autonomous(3, [](const Vec& u) { return Vec(-u + u.array().tanh().matrix()); });
  const auto box = DomainSampler::box(Vec::Constant(3, -2), Vec::Constant(3, 2), 50);
  Mat swap = Mat::Zero(3, 3);
  swap(0, 1) = swap(1, 0) = swap(2, 2) = 1;
  CHECK(equivariance_residual(f, SymmetrySpec::linear(swap), box) <= 1e-15);
  CHECK(equivariance_residual(f, SymmetrySpec::linear(-Mat::Identity(3, 3)), box) <= 1e-15);
  CHECK(equivariance_residual(f, SymmetrySpec::linear(2 * Mat::Identity(3, 3)), box) > 0.1);
  CHECK_THROWS_AS(equivariance_residual(f, SymmetrySpec::linear(Mat::Zero(3, 3)), box), SymmetryError);

  // Rotation-equivariant Hopf under the diffeomorphism h = rotation by 0.3.
  const double c = std::cos(0.3), s = std::sin(0.3);
  const Mat R = (Mat(2, 2) << c, -s, s, c).finished();
  const auto rot = SymmetrySpec::diffeo([R](const Vec& u) { return Vec(R * u); }, {},
                                        [R](const Vec& u) { return Vec(R.transpose() * u); });
  const auto disk = DomainSampler::ball(Vec::Zero(2), 2.0, 50);
  CHECK(equivariance_residual(hopf(1.0), rot, disk) <= 1e-8);
  const auto bad_inv = SymmetrySpec::diffeo([R](const Vec& u) { return Vec(R * u); }, {},
                                            [](const Vec& u) { return u; });
  CHECK_THROWS_AS(equivariance_residual(hopf(1.0), bad_inv, disk), SymmetryError);
}

TEST_CASE("spatiotemporal symmetry of a rotating drive") {
  const int k = 5;
  const double T0 = 2.0;
  VectorField f;
  f.dim = 2;
  f.f = [T0](double t, const Vec& u) {
    const double a = -2 * kPi * t / T0;
    Vec drive(2);
    drive << std::cos(a), std::sin(a);
    return Vec(-u + drive);
  };
  const double th = 2 * kPi / k;
  const Mat T = (Mat(2, 2) << std::cos(th), -std::sin(th), std::sin(th), std::cos(th)).finished();
  const auto box = DomainSampler::box(Vec::Constant(2, -1), Vec::Constant(2, 1), 20);
  CHECK(spatiotemporal_residual(f, T, T0 / k, k, box) <= 1e-12);
  CHECK(spatiotemporal_residual(f, T, T0 / (2 * k), k, box) > 0.1);
  CHECK_THROWS_AS(spatiotemporal_residual(f, T, T0 / k, k - 1, box), SymmetryError);
}

TEST_CASE("limit cycle certificate") {
  const double w = 1.5;
  const auto near = DomainSampler::sphere(Vec::Zero(2), 1.0, 16, 2);
  const auto rep = limit_cycle_certificate(hopf(w), unit_circle(), 1.0, near, NormSpec::lp(2));
  CHECK(rep.pass);
  CHECK(rep.min_speed == doctest::Approx(w));
  CHECK(rep.tangency_residual <= 1e-10);
  CHECK(rep.periodicity_residual == 0.0);
  CHECK(rep.rate.value == doctest::Approx(-2.0).epsilon(1e-6));

  // A drive with a time-varying amplitude is not 1-periodic.
  const auto drifting = hopf(w, [](double t) { return 1.0 + 0.1 * t; });
  const auto bad = limit_cycle_certificate(drifting, unit_circle(), 1.0, near, NormSpec::lp(2));
  CHECK_FALSE(bad.pass);
  CHECK(bad.periodicity_residual > 0.1);

  // Without rotation the circle is a ring of equilibria, not a limit cycle.
  CHECK_FALSE(limit_cycle_certificate(hopf(0.0), unit_circle(), 1.0, near, NormSpec::lp(2)).pass);

  auto no_loop = unit_circle();
  no_loop.loop = {};
  CHECK_THROWS_AS(limit_cycle_certificate(hopf(w), no_loop, 1.0, near, NormSpec::lp(2)), ArgumentError);
}

TEST_CASE("distance decay to invariant sets") {
  // Periodic heat equation on 64 cells: distance to the constants decays at
  // the second Laplacian eigenvalue, close to -4 pi^2.
  const int n = 64;
  const double h = 1.0 / n;
  Mat L = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    L(i, i) = -2 / (h * h);
    L(i, (i + 1) % n) += 1 / (h * h);
    L(i, (i + n - 1) % n) += 1 / (h * h);
  }
  Vec u0(n);
  for (int i = 0; i < n; ++i) {
    const double x = (i + 0.5) * h;
    u0[i] = 1 + std::sin(2 * kPi * x) + 0.3 * std::cos(6 * kPi * x) + 0.1 * std::sin(10 * kPi * x);
  }
  const auto traj = integrate(VectorField::linear(L), u0, 0, 0.3, 1e-4);
  const auto dist = [](const Vec& u) { return (u.array() - u.mean()).matrix().norm(); };
  const auto heat = set_distance_decay(traj, dist, 0.05);
  CHECK(std::abs(heat.fitted_rate + 4 * kPi * kPi) <= 0.02 * 4 * kPi * kPi);
  CHECK(heat.monotonicity_violations == 0);

  const auto ht = integrate(hopf(1.0), (Vec(2) << 0.9, 0).finished(), 0, 5, 1e-3);
  const auto ring = set_distance_decay(ht, [](const Vec& u) { return std::abs(u.norm() - 1); });
  CHECK(std::abs(ring.fitted_rate + 2) <= 0.1);

  const auto zero = set_distance_decay(ht, [](const Vec&) { return 0.0; });
  CHECK(zero.fitted_rate == -kInf);
}
