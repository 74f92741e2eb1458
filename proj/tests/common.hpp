#pragma once

#include <cmath>
#include <vector>

#include "ruinsim/geometry.hpp"
#include "ruinsim/increments.hpp"
#include "ruinsim/kernel.hpp"

namespace testutil {

using namespace ruinsim;

inline IncrementModel canonical_model(double alpha = 2.5) {
  return IncrementModel(alpha, 1.0, SpectralMeasure({{{1.0, 0.0}, 1.0}}));
}

inline IncrementModel two_atom_model(double alpha = 2.5) {
  return IncrementModel(alpha, 1.0, SpectralMeasure({{{1.0, 0.0}, 0.6}, {{0.0, 1.0}, 0.4}}));
}

inline TargetSpec canonical_target() { return normalize_target({{1.0, 0.0}}, {1.0}); }

inline MixtureKernel canonical_kernel(double b, double theta = 0.99, double alpha = 2.5) {
  KernelParams p;
  p.theta = theta;
  return MixtureKernel(canonical_model(alpha), canonical_target(), b, p);
}

// Binomial standard error of a frequency.
inline double binom_se(double p, double n) { return std::sqrt(p * (1.0 - p) / n); }

}  // namespace testutil
