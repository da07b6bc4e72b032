#pragma once

// Small derivative-free maximizers shared by the sampled rate estimators.

#include "contraction/types.hpp"

#include <cstdint>
#include <functional>

namespace contraction::detail {

struct AscentResult {
  double value = 0.0;
  Vec point;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
};

/// Projected gradient ascent with central-difference gradients. A step is
/// accepted only if it improves the objective; otherwise the step halves.
AscentResult ascend(const std::function<double(const Vec&)>& obj, Vec start, double step,
                    const std::function<Vec(const Vec&)>& project, int max_iters,
                    double fd_step);

struct SphereResult {
  double value = 0.0;
  Vec argmax;
  std::size_t samples = 0;
  std::size_t iterations = 0;
};

/// Maximizes a degree-0 homogeneous function on R^n \ {0}: 200 seeded
/// Gaussian directions plus the signed coordinate vectors, then ascent from
/// the five best.
SphereResult maximize_on_sphere(const std::function<double(const Vec&)>& q, Index n,
                                std::uint64_t seed, int samples = 200);

}  // namespace contraction::detail
