#include "contraction/mirror.hpp"
#include "contraction/spaces.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace contraction;

namespace {

Vec poly3(const Vec& x) { return (Vec(3) << 1.0, x[0], x[0] * x[0]).finished(); }

// Five samples of a model that lies exactly in the span of the sections.
RegressionProblem consistent(double p) {
  RegressionProblem prob;
  prob.p = p;
  prob.features = poly3;
  const Vec truth = (Vec(3) << 0.5, -1.0, 0.25).finished();
  for (double x : {-1.0, -0.4, 0.1, 0.6, 1.0}) prob.inputs.push_back(Vec::Constant(1, x));
  const Mat S = [&] {
    RegressionProblem tmp = prob;
    tmp.targets.assign(prob.inputs.size(), 0.0);
    return tmp.sections();
  }();
  const Vec y = S * truth;
  prob.targets.assign(y.data(), y.data() + y.size());
  return prob;
}

}  // namespace

TEST_CASE("duality map closed forms") {
  std::mt19937_64 rng(1);
  const Vec u = oracle::random_vec(rng, 5);
  CHECK((duality_map(u, 2.0) - u).norm() == 0.0);
  const Vec d = duality_map((Vec(2) << 1.0, -2.0).finished(), 4.0);
  CHECK(d[0] == doctest::Approx(1.0 / std::sqrt(17.0)).epsilon(1e-14));
  CHECK(d[1] == doctest::Approx(-8.0 / std::sqrt(17.0)).epsilon(1e-14));
  CHECK(duality_map(Vec::Zero(3), 3.0).norm() == 0.0);
  const Vec e1 = (Vec(2) << 1.0, 0.0).finished();
  CHECK((inverse_duality(e1, 4.0) - e1).norm() < 1e-15);
  CHECK((duality_map(e1, 4.0) - e1).norm() < 1e-15);
  CHECK((inverse_duality(u, 2.0) - u).norm() == 0.0);
  for (double p : {1.0, kInf, 0.5}) {
    CHECK_THROWS_AS(duality_map(u, p), UnsupportedNorm);
    CHECK_THROWS_AS(inverse_duality(u, p), UnsupportedNorm);
  }
}

TEST_CASE("pairing identity and norm preservation") {
  std::mt19937_64 rng(2);
  for (double p : {1.5, 2.0, 3.0}) {
    const double q = p / (p - 1);
    for (int trial = 0; trial < 500; ++trial) {
      const Vec u = oracle::random_vec(rng, 6), v = oracle::random_vec(rng, 6);
      const Vec us = duality_map(u, p);
      CHECK(us.dot(v) == doctest::Approx(sip(u, v, NormSpec::lp(p))).epsilon(1e-9));
      CHECK(oracle::lp(us, q) == doctest::Approx(oracle::lp(u, p)).epsilon(1e-10));
    }
  }
}

TEST_CASE("duality roundtrip on many vectors") {
  std::mt19937_64 rng(3);
  double worst = 0.0;
  for (double p : {1.5, 3.0, 4.0}) {
    for (int trial = 0; trial < 10000 / 3 + 1; ++trial) {
      const Vec u = oracle::random_vec(rng, 8);
      worst = std::max(worst, (inverse_duality(duality_map(u, p), p) - u).norm() / u.norm());
    }
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("risk gradient") {
  SUBCASE("zero at the interpolant") {
    const auto prob = consistent(1.5);
    const Vec truth = (Vec(3) << 0.5, -1.0, 0.25).finished();
    const auto rg = risk_and_gradient(truth, prob);
    CHECK(rg.risk < 1e-28);
    CHECK(rg.gradient.norm() < 1e-14);
  }
  SUBCASE("single sample in the Hilbert case is least squares") {
    RegressionProblem prob;
    prob.features = poly3;
    prob.inputs = {Vec::Constant(1, 0.7)};
    prob.targets = {2.0};
    const Vec u = (Vec(3) << 0.3, 0.1, -0.2).finished();
    const Vec k = poly3(prob.inputs[0]);
    const auto rg = risk_and_gradient(u, prob);
    CHECK((rg.gradient - (k.dot(u) - 2.0) * k).norm() < 1e-15);
  }
  SUBCASE("central differences") {
    std::mt19937_64 rng(4);
    for (const Loss& loss : {Loss::squared(), Loss::pseudo_huber(0.3)}) {
      auto prob = consistent(1.5);
      prob.loss = loss;
      for (int trial = 0; trial < 10; ++trial) {
        const Vec u = oracle::random_vec(rng, 3);
        const Vec g = risk_and_gradient(u, prob).gradient;
        for (int i = 0; i < 3; ++i) {
          const double h = 1e-5;
          Vec a = u, b = u;
          a[i] += h;
          b[i] -= h;
          const double fd = (risk_and_gradient(a, prob).risk - risk_and_gradient(b, prob).risk) / (2 * h);
          CHECK(std::abs(fd - g[i]) <= 1e-5 * std::max(1.0, std::abs(g[i])));
        }
      }
    }
  }
}

TEST_CASE("mirror descent reaches the interpolant in l1.5") {
  const auto prob = consistent(1.5);
  MirrorOptions opts;
  opts.alpha = 1.0;
  opts.h = 0.1;
  opts.steps = 10000;
  std::mt19937_64 rng(5);
  std::vector<Vec> finals;
  for (int start = 0; start < 3; ++start) {
    const auto rep = mirror_descent_run(prob, oracle::random_vec(rng, 3), opts);
    CHECK(rep.risk.back() <= 1e-8);
    CHECK_FALSE(rep.step_warning);
    CHECK(rep.fitted_rate < 0.0);
    CHECK(rep.path_rate.value < 0.0);
    finals.push_back(rep.u);
  }
  for (const Vec& u : finals) CHECK((u - finals.front()).norm() < 1e-3);
}

TEST_CASE("p = 2 mirror descent is gradient descent") {
  auto prob = consistent(2.0);
  prob.targets[2] += 0.3;  // inconsistent: the minimum risk is positive
  MirrorOptions opts;
  opts.alpha = 0.7;
  opts.h = 0.1;
  opts.steps = 300;
  const Vec u0 = (Vec(3) << 0.2, 0.4, -0.1).finished();
  const auto rep = mirror_descent_run(prob, u0, opts);
  Vec u = u0;
  Mat K(5, 3);
  for (int i = 0; i < 5; ++i) K.row(i) = poly3(prob.inputs[i]).transpose();
  const Vec y = Eigen::Map<const Vec>(prob.targets.data(), 5);
  for (std::size_t k = 0; k < opts.steps; ++k) u -= opts.alpha * opts.h * K.transpose() * (K * u - y);
  CHECK((rep.u - u).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(rep.path_rate.is_exact());
}

TEST_CASE("descent matches the direct convex solve") {
  for (double p : {1.5, 2.0, 3.0}) {
    auto prob = consistent(p);
    prob.targets[1] -= 0.2;
    prob.targets[4] += 0.1;
    const Mat S = prob.sections();
    const Vec y = Eigen::Map<const Vec>(prob.targets.data(), 5);
    const Vec best = S.colPivHouseholderQr().solve(y);
    const double best_risk = 0.5 * (S * best - y).squaredNorm();
    MirrorOptions opts;
    opts.steps = 20000;
    opts.h = 0.05;
    const auto rep = mirror_descent_run(prob, Vec::Constant(3, 0.1), opts);
    CHECK(rep.risk.back() == doctest::Approx(best_risk).epsilon(1e-8));
    CHECK(rep.gradient_norm <= 1e-8);
    // Monotone at a step below the reported threshold.
    CHECK(opts.alpha * opts.h < rep.step_threshold);
    for (std::size_t k = 1; k < rep.risk.size(); ++k) CHECK(rep.risk[k] <= rep.risk[k - 1] + 1e-15);
  }
}

TEST_CASE("zero step and oversized step") {
  const auto prob = consistent(1.5);
  MirrorOptions opts;
  opts.alpha = 0.0;
  opts.steps = 50;
  const Vec u0 = (Vec(3) << 1.0, 2.0, -1.0).finished();
  const auto rep = mirror_descent_run(prob, u0, opts);
  CHECK((rep.u - u0).norm() < 1e-14);
  for (double r : rep.risk) CHECK(r == rep.risk.front());

  opts.alpha = 1.0;
  opts.h = 3.0;
  opts.steps = 40;
  auto prob2 = consistent(2.0);
  const auto bad = mirror_descent_run(prob2, u0, opts);
  CHECK(bad.step_warning);
  CHECK(opts.h > bad.step_threshold);

  opts.alpha = -1.0;
  CHECK_THROWS_AS(mirror_descent_run(prob, u0, opts), ArgumentError);
}

TEST_CASE("weighted dual norm for the path rate") {
  const auto prob = consistent(2.0);
  MirrorOptions opts;
  opts.steps = 100;
  opts.theta = Mat::Identity(3, 3) * 2.0;
  const auto a = mirror_descent_run(prob, Vec::Zero(3), opts);
  opts.theta = Mat();
  const auto b = mirror_descent_run(prob, Vec::Zero(3), opts);
  CHECK(a.path_rate.value == doctest::Approx(b.path_rate.value).epsilon(1e-9));
}
