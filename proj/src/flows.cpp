#include "contraction/flows.hpp"

#include "contraction/detail/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace contraction {

void Trajectory::validate() const {
  if (times.size() != states.size()) throw ArgumentError("times/states length mismatch");
  for (std::size_t k = 1; k < times.size(); ++k) {
    const double dt = times[k] - times[k - 1];
    if (!(dt > 0.0)) throw ArgumentError("trajectory times must increase strictly");
    if (std::abs(dt - step) > 1e-12 * std::max(1.0, std::abs(times[k]))) {
      throw ArgumentError("trajectory spacing is not uniform");
    }
  }
}

namespace {

struct Grid {
  std::size_t steps;
  double h;
};

Grid make_grid(double t0, double t1, double h) {
  if (!(h > 0.0)) throw ArgumentError("step size must be positive");
  if (!(t1 >= t0)) throw ArgumentError("t_span must satisfy t0 <= t1");
  const double span = t1 - t0;
  const auto N = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(span / h)));
  return {N, span / static_cast<double>(N)};
}

void check_state(const Vec& u, double t) {
  const double n = u.allFinite() ? u.cwiseAbs().maxCoeff() : kInf;
  if (!(n <= kBlowUp)) {
    std::ostringstream msg;
    msg << "state norm exceeded " << kBlowUp << " at t=" << t;
    throw DivergenceError(msg.str(), t);
  }
}

Vec eval(const VectorField& f, double t, const Vec& u) {
  Vec out = f(t, u);
  if (out.size() != u.size()) throw DimensionError("vector field returned wrong length");
  return out;
}

}  // namespace

Trajectory integrate(const VectorField& f, const Vec& u0, double t0, double t1, double h) {
  require_finite(u0, "initial state");
  const Grid g = make_grid(t0, t1, h);
  Trajectory tr;
  tr.step = g.h;
  tr.times.reserve(g.steps + 1);
  tr.states.reserve(g.steps + 1);
  tr.times.push_back(t0);
  tr.states.push_back(u0);
  Vec u = u0;
  for (std::size_t k = 0; k < g.steps; ++k) {
    const double t = t0 + static_cast<double>(k) * g.h;
    const Vec k1 = eval(f, t, u);
    const Vec k2 = eval(f, t + 0.5 * g.h, u + 0.5 * g.h * k1);
    const Vec k3 = eval(f, t + 0.5 * g.h, u + 0.5 * g.h * k2);
    const Vec k4 = eval(f, t + g.h, u + g.h * k3);
    u += (g.h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    const double tn = t0 + static_cast<double>(k + 1) * g.h;
    check_state(u, tn);
    tr.times.push_back(tn);
    tr.states.push_back(u);
  }
  return tr;
}

VariationalTrajectory variational_flow(const VectorField& f, const Vec& u0, const Vec& du0,
                                       double t0, double t1, double h) {
  require_finite(u0, "initial state");
  require_finite(du0, "initial perturbation");
  if (u0.size() != du0.size()) throw DimensionError("state and perturbation lengths differ");
  const Grid g = make_grid(t0, t1, h);
  VariationalTrajectory out;
  out.state.step = out.perturbation.step = g.h;
  out.state.times.push_back(t0);
  out.state.states.push_back(u0);
  out.perturbation.states.push_back(du0);
  Vec u = u0, d = du0;
  for (std::size_t k = 0; k < g.steps; ++k) {
    const double t = t0 + static_cast<double>(k) * g.h, hh = 0.5 * g.h;
    const Vec k1 = eval(f, t, u);
    const Vec l1 = f.jacobian_at(t, u) * d;
    const Vec s2 = u + hh * k1;
    const Vec k2 = eval(f, t + hh, s2);
    const Vec l2 = f.jacobian_at(t + hh, s2) * (d + hh * l1);
    const Vec s3 = u + hh * k2;
    const Vec k3 = eval(f, t + hh, s3);
    const Vec l3 = f.jacobian_at(t + hh, s3) * (d + hh * l2);
    const Vec s4 = u + g.h * k3;
    const Vec k4 = eval(f, t + g.h, s4);
    const Vec l4 = f.jacobian_at(t + g.h, s4) * (d + g.h * l3);
    u += (g.h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    d += (g.h / 6.0) * (l1 + 2.0 * l2 + 2.0 * l3 + l4);
    const double tn = t0 + static_cast<double>(k + 1) * g.h;
    check_state(u, tn);
    check_state(d, tn);
    out.state.times.push_back(tn);
    out.state.states.push_back(u);
    out.perturbation.states.push_back(d);
  }
  out.perturbation.times = out.state.times;
  return out;
}

OvershootFit overshoot_fit(std::span<const double> times, std::span<const double> distances) {
  if (times.size() != distances.size()) throw DimensionError("times/distances length mismatch");
  if (times.size() < 3) throw ArgumentError("overshoot fit needs at least 3 points");
  const std::size_t n = times.size();
  double st = 0, sy = 0, stt = 0, sty = 0;
  std::vector<double> y(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (!(distances[k] > 0.0)) throw ArgumentError("overshoot fit needs positive distances");
    y[k] = std::log(distances[k]);
    st += times[k];
    sy += y[k];
  }
  const double tm = st / n, ym = sy / n;
  for (std::size_t k = 0; k < n; ++k) {
    stt += (times[k] - tm) * (times[k] - tm);
    sty += (times[k] - tm) * (y[k] - ym);
  }
  if (!(stt > 0.0)) throw ArgumentError("overshoot fit needs distinct times");
  OvershootFit fit;
  fit.lambda = sty / stt;
  const double intercept = ym - fit.lambda * tm;
  double ss = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double r = y[k] - intercept - fit.lambda * times[k];
    ss += r * r;
  }
  fit.residual_rms = std::sqrt(ss / n);
  fit.kappa = std::exp(intercept);
  if (fit.kappa < 1.0 && -intercept <= std::max(1e-9, 3.0 * fit.residual_rms)) fit.kappa = 1.0;
  return fit;
}

std::vector<double> pair_distances(const Trajectory& a, const Trajectory& b,
                                   const NormSpec& spec) {
  if (a.size() != b.size()) throw DimensionError("trajectories have different lengths");
  std::vector<double> d(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) d[k] = norm(Vec(a.states[k] - b.states[k]), spec);
  return d;
}

CertificateResult verify_contraction(const VectorField& f,
                                     const std::vector<std::pair<Vec, Vec>>& pairs,
                                     const NormSpec& spec, double lambda, double kappa,
                                     double t0, double t1, const CertificateOptions& opts) {
  spec.validate();
  if (!(kappa >= 1.0)) throw ArgumentError("kappa must satisfy kappa >= 1");
  if (pairs.empty()) throw ArgumentError("verify_contraction needs at least one pair");

  struct PairOutcome {
    double violation = -kInf;
    bool ok = true;
    std::size_t checks = 0;
    std::vector<double> times, dists;
  };
  std::vector<PairOutcome> outcomes(pairs.size());

  detail::parallel_for(pairs.size(), [&](std::size_t i) {
    const auto a = integrate(f, pairs[i].first, t0, t1, opts.h);
    const auto b = integrate(f, pairs[i].second, t0, t1, opts.h);
    const auto d = pair_distances(a, b, spec);
    const std::size_t N = d.size() - 1;
    const std::size_t stride = std::max<std::size_t>(1, N / 50);
    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k <= N; k += stride) idx.push_back(k);
    if (idx.back() != N) idx.push_back(N);

    PairOutcome& out = outcomes[i];
    for (std::size_t si = 0; si < idx.size(); ++si) {
      for (std::size_t ti = si; ti < idx.size(); ++ti) {
        const std::size_t s = idx[si], t = idx[ti];
        const double bound = kappa * std::exp(lambda * (a.times[t] - a.times[s])) * d[s];
        const double v = d[t] - bound;
        out.violation = std::max(out.violation, v);
        if (v > opts.tol_abs + opts.tol_rel * bound) out.ok = false;
        ++out.checks;
      }
    }
    const double d0 = d.front();
    for (std::size_t k : idx) {
      if (d[k] > 1e-300 * std::max(1.0, d0) && d0 > 0.0) {
        out.times.push_back(a.times[k]);
        out.dists.push_back(d[k] / d0);
      }
    }
  });

  CertificateResult res;
  res.claimed_lambda = lambda;
  res.claimed_kappa = kappa;
  res.pass = true;
  res.max_violation = -kInf;
  res.fitted_lambda = -kInf;
  res.fitted_kappa = 1.0;
  res.pairs = pairs.size();
  for (const auto& o : outcomes) {
    res.max_violation = std::max(res.max_violation, o.violation);
    res.pass = res.pass && o.ok;
    res.checks += o.checks;
    if (o.times.size() >= 3) {
      const auto fit = overshoot_fit(o.times, o.dists);
      res.fitted_lambda = std::max(res.fitted_lambda, fit.lambda);
      res.fitted_kappa = std::max(res.fitted_kappa, fit.kappa);
    }
  }
  return res;
}

}  // namespace contraction
