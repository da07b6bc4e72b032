#include "contraction/mirror.hpp"

#include "contraction/flows.hpp"
#include "contraction/spaces.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace contraction {

namespace {

void check_interior(double p) {
  if (!(p > 1.0) || std::isinf(p)) {
    std::ostringstream msg;
    msg << "duality map needs 1 < p < inf (got " << p << "); it is multivalued otherwise";
    throw UnsupportedNorm(msg.str());
  }
}

double conjugate(double p) { return p / (p - 1.0); }

}  // namespace

Vec duality_map(const Vec& u, double p) {
  check_interior(p);
  if (p == 2.0) return u;
  const double nrm = lp_norm(u, p);
  if (nrm == 0.0) return Vec::Zero(u.size());
  const double scale = std::pow(nrm, 2.0 - p);
  Vec out(u.size());
  for (Index i = 0; i < u.size(); ++i) {
    const double a = std::abs(u[i]);
    out[i] = a == 0.0 ? 0.0 : std::copysign(scale * std::pow(a, p - 1.0), u[i]);
  }
  return out;
}

Vec inverse_duality(const Vec& u_star, double p) {
  check_interior(p);
  return duality_map(u_star, conjugate(p));
}

Loss Loss::squared() {
  return {[](double f, double y) { return 0.5 * (f - y) * (f - y); }, [](double f, double y) { return f - y; }};
}

Loss Loss::pseudo_huber(double delta) {
  if (!(delta > 0.0)) throw ArgumentError("pseudo-Huber scale must be positive");
  return {[delta](double f, double y) {
            const double r = (f - y) / delta;
            return delta * delta * (std::sqrt(1.0 + r * r) - 1.0);
          },
          [delta](double f, double y) {
            const double r = (f - y) / delta;
            return (f - y) / std::sqrt(1.0 + r * r);
          }};
}

void RegressionProblem::validate() const {
  check_interior(p);
  if (inputs.empty()) throw ArgumentError("regression needs at least one sample");
  if (inputs.size() != targets.size()) throw DimensionError("inputs and targets differ in length");
  if (!features) throw ArgumentError("regression needs a feature map");
  if (!loss.value || !loss.derivative) throw ArgumentError("loss needs a value and a derivative");
}

Index RegressionProblem::dim() const {
  validate();
  return features(inputs.front()).size();
}

Mat RegressionProblem::sections() const {
  const Index n = dim();
  Mat S(static_cast<Index>(inputs.size()), n);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Vec k = features(inputs[i]);
    if (k.size() != n) throw DimensionError("feature map returned vectors of different lengths");
    require_finite(k, "feature vector");
    S.row(static_cast<Index>(i)) = duality_map(k, p).transpose();
  }
  return S;
}

double predict(const Vec& u, const Vec& section, double p) {
  if (u.size() != section.size()) throw DimensionError("state and section differ in length");
  return duality_map(section, p).dot(u);
}

namespace {

RiskGradient risk_with(const Vec& u, const Mat& S, const RegressionProblem& prob) {
  RiskGradient out{0.0, Vec::Zero(u.size())};
  const Vec pred = S * u;
  for (Index i = 0; i < S.rows(); ++i) {
    const double y = prob.targets[static_cast<std::size_t>(i)];
    out.risk += prob.loss.value(pred[i], y);
    const double d = prob.loss.derivative(pred[i], y);
    if (!std::isfinite(d)) throw EvaluationError("loss derivative is not finite", u);
    out.gradient += d * S.row(i).transpose();
  }
  return out;
}

}  // namespace

RiskGradient risk_and_gradient(const Vec& u, const RegressionProblem& prob) {
  const Mat S = prob.sections();
  if (u.size() != S.cols()) throw DimensionError("state does not match the feature dimension");
  return risk_with(u, S, prob);
}

MirrorReport mirror_descent_run(const RegressionProblem& prob, const Vec& u0, const MirrorOptions& opts) {
  if (!(opts.alpha >= 0.0)) throw ArgumentError("step weight alpha must be non-negative");
  if (!(opts.h > 0.0)) throw ArgumentError("time step must be positive");
  const Mat S = prob.sections();
  const Index n = S.cols();
  if (u0.size() != n) throw DimensionError("initial state does not match the feature dimension");
  const double p = prob.p, q = conjugate(p);
  const NormSpec dual = opts.theta.size() ? NormSpec::weighted(q, opts.theta) : NormSpec::lp(q);

  MirrorReport rep;
  Vec u = u0;
  Vec us = duality_map(u0, p);
  const double step = opts.alpha * opts.h;
  const std::size_t every = std::max<std::size_t>(1, opts.steps / std::max<std::size_t>(1, opts.rate_samples));
  rep.path_rate = {-kInf, RateKind::exact_closed_form, 0, 0};
  double h_norm = 0.0;
  std::size_t rising = 0;

  const auto dual_gradient = [&](const Vec& s) { return risk_with(inverse_duality(s, p), S, prob).gradient; };
  for (std::size_t k = 0; k <= opts.steps; ++k) {
    const RiskGradient rg = risk_with(u, S, prob);
    if (!rep.risk.empty() && rg.risk > rep.risk.back()) {
      if (++rising >= 10) rep.step_warning = true;
    } else {
      rising = 0;
    }
    rep.risk.push_back(rg.risk);
    rep.gradient_norm = rg.gradient.norm();
    if (k % every == 0 || k == opts.steps) {
      const Mat H = finite_difference_jacobian(dual_gradient, us);
      const RateEstimate r = lognorm(Mat(-H), dual, opts.seed);
      if (r.value > rep.path_rate.value) rep.path_rate.value = r.value;
      if (!r.is_exact()) rep.path_rate.kind = r.kind;
      rep.path_rate.samples += 1;
      rep.path_rate.ascent_iters += r.ascent_iters;
      h_norm = std::max(h_norm, Eigen::JacobiSVD<Mat>(H).singularValues()(0));
    }
    if (k == opts.steps) break;
    us -= step * rg.gradient;
    u = inverse_duality(us, p);
    require_finite(u, "mirror descent iterate");
  }
  rep.u = u;
  rep.u_star = us;
  rep.step_threshold = h_norm > 0.0 ? 2.0 / h_norm : kInf;

  std::vector<double> ts, rs;
  for (std::size_t k = 0; k < rep.risk.size(); ++k) {
    if (rep.risk[k] > 0.0) {
      ts.push_back(static_cast<double>(k) * opts.h);
      rs.push_back(rep.risk[k]);
    }
  }
  rep.fitted_rate = ts.size() >= 3 ? overshoot_fit(ts, rs).lambda : 0.0;
  return rep;
}

}  // namespace contraction
