#include "contraction/detail/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

namespace contraction::detail {

AscentResult ascend(const std::function<double(const Vec&)>& obj, Vec start, double step,
                    const std::function<Vec(const Vec&)>& project, int max_iters,
                    double fd_step) {
  AscentResult res;
  res.point = project(start);
  res.value = obj(res.point);
  res.evaluations = 1;
  if (!std::isfinite(res.value)) return res;
  const Index n = res.point.size();
  Vec g(n);
  for (int it = 0; it < max_iters; ++it) {
    ++res.iterations;
    Vec x = res.point;
    for (Index i = 0; i < n; ++i) {
      x[i] = res.point[i] + fd_step;
      const double fp = obj(x);
      x[i] = res.point[i] - fd_step;
      const double fm = obj(x);
      x[i] = res.point[i];
      g[i] = (std::isfinite(fp) && std::isfinite(fm)) ? (fp - fm) / (2.0 * fd_step) : 0.0;
    }
    res.evaluations += 2 * static_cast<std::size_t>(n);
    const double gn = g.norm();
    if (!(gn > 0.0)) break;
    const Vec trial = project(res.point + (step / gn) * g);
    const double v = obj(trial);
    ++res.evaluations;
    if (std::isfinite(v) && v > res.value) {
      res.value = v;
      res.point = trial;
    } else {
      step *= 0.5;
    }
  }
  return res;
}

SphereResult maximize_on_sphere(const std::function<double(const Vec&)>& q, Index n,
                                std::uint64_t seed, int samples) {
  std::vector<Vec> dirs;
  dirs.reserve(static_cast<std::size_t>(samples + 2 * n));
  for (Index i = 0; i < n; ++i) {
    dirs.push_back(Vec::Unit(n, i));
    dirs.push_back(-Vec::Unit(n, i));
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  for (int k = 0; k < samples; ++k) {
    Vec d(n);
    for (Index i = 0; i < n; ++i) d[i] = gauss(rng);
    if (d.norm() == 0.0) continue;
    dirs.push_back(d.normalized());
  }

  std::vector<std::pair<double, std::size_t>> vals;
  vals.reserve(dirs.size());
  for (std::size_t k = 0; k < dirs.size(); ++k) vals.emplace_back(q(dirs[k]), k);
  std::sort(vals.begin(), vals.end(), [](auto& a, auto& b) { return a.first > b.first; });

  SphereResult out;
  out.value = vals.front().first;
  out.argmax = dirs[vals.front().second];
  out.samples = dirs.size();
  auto normalize = [](const Vec& x) {
    const double len = x.norm();
    return len > 0.0 ? Vec(x / len) : x;
  };
  for (std::size_t s = 0; s < std::min<std::size_t>(5, vals.size()); ++s) {
    const auto r = ascend(q, dirs[vals[s].second], 0.5, normalize, 50, 1e-6);
    out.iterations += r.iterations;
    out.samples += r.evaluations;
    if (r.value > out.value) {
      out.value = r.value;
      out.argmax = r.point;
    }
  }
  return out;
}

}  // namespace contraction::detail
