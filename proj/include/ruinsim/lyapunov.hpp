#pragma once

// Smoothed boundary functional rho_b (log-sum-exp of the affine pieces of
// r_b), the C^1 positive part d, the mollified value function
// H_b(s) = E d(rho_b(s + X)), the Lyapunov candidate g_b = min(c1 H_b^2, 1)
// and the one-step drift check J1 + J2 <= 1.

#include <cstddef>
#include <span>
#include <vector>

#include "ruinsim/common.hpp"
#include "ruinsim/geometry.hpp"
#include "ruinsim/increments.hpp"
#include "ruinsim/kernel.hpp"
#include "ruinsim/rng.hpp"

namespace ruinsim {

struct MollifierParams {
  double c0_tilde = 1.0;
  double delta0 = 1.0;
  double c1 = 3.1104;  ///< (1 + eps)^3 (1 + 4 eps) at eps = 0.2

  /// c0(b) = max(b^((3 - alpha) / 2), c0_tilde).
  double c0(double b, double alpha) const;

  void validate() const;
};

/// Constants tied to a tolerance eps: theta = 1/(1+eps)^2, c1 = (1+eps)^3 (1+4 eps).
struct TunedConstants {
  double theta;
  double c1;
};
TunedConstants tuned_constants(double eps);

double rho_b(const HalfSpaceSystem& system, double b, double c0, std::span<const double> s);

/// w_j(s) = exp((s^T v_j - a_j b) / c0) / sum_i exp((s^T v_i - a_i b) / c0).
Vec softmax_weights(const HalfSpaceSystem& system, double b, double c0, std::span<const double> s);

/// grad rho_b = sum_j w_j v_j.
Vec grad_rho(const HalfSpaceSystem& system, double b, double c0, std::span<const double> s);

/// Hessian of rho_b: (sum_j w_j v_j v_j^T - grad grad^T) / c0.
std::vector<Vec> hessian_rho(const HalfSpaceSystem& system, double b, double c0,
                             std::span<const double> s);

/// d(x) = 0 below -delta0, (x + delta0)^2 / (4 delta0) on |x| <= delta0, x above.
double d_mollify(double delta0, double x);
double d_prime(double delta0, double x);

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// n nominal increments drawn from one stream; reused across evaluations to
/// share randomness.
std::vector<Vec> draw_increments(const IncrementModel& model, std::size_t n, Rng& rng);

class Mollifier {
 public:
  Mollifier(IncrementModel model, HalfSpaceSystem system, double b, MollifierParams params);

  const IncrementModel& model() const { return model_; }
  const HalfSpaceSystem& system() const { return system_; }
  double b() const { return b_; }
  double c0() const { return c0_; }
  const MollifierParams& params() const { return params_; }

  double rho(std::span<const double> s) const { return rho_b(system_, b_, c0_, s); }

  /// Monte Carlo H_b over the supplied increments.
  Estimate H_mc(std::span<const double> s, std::span<const Vec> xs) const;

  /// Per-sample d(rho_b(s + x)) values (for paired comparisons).
  std::vector<double> H_samples(std::span<const double> s, std::span<const Vec> xs) const;

  /// Componentwise Monte Carlo gradient E d'(rho_b(s+X)) grad rho_b(s+X).
  std::vector<Estimate> grad_H_mc(std::span<const double> s, std::span<const Vec> xs) const;

  /// Deterministic H_b for the pure-radial model: per-atom 1-d quadrature
  /// split at the kinks of the integrand (relative tolerance 1e-8 or better).
  double H_quadrature(std::span<const double> s) const;

  /// g_b = min(c1 H_b^2, 1) with H_b from quadrature.
  double g(std::span<const double> s) const;

  /// Smallest r_b level at which g_b saturates along the ray {lambda u}, found
  /// by bisection on lambda.
  double saturation_level(std::span<const double> direction) const;

 private:
  IncrementModel model_;
  HalfSpaceSystem system_;
  double b_;
  MollifierParams params_;
  double c0_;
};

struct DriftResult {
  double J1 = 0.0;
  double J2 = 0.0;         ///< term entering the sum
  double J2_scaled = 0.0;  ///< (1 - p_b(s)) J2
  double sum = 0.0;
  double std_error = 0.0;
  double p = 0.0;
  double region_prob = 0.0;
  double g = 0.0;
};

/// Monte Carlo estimate of J1 + J2 at s. J1 uses conditional draws from the
/// jump region (exact, weighted by its probability); J2 uses nominal draws.
/// Throws PreconditionViolation unless r_b(s) <= -delta2 b, s is outside
/// b Gamma and g_b(s) < 1.
DriftResult drift_check(const MixtureKernel& kernel, const Mollifier& mollifier,
                        std::span<const double> s, std::size_t n_mc, Rng& rng);

/// True when s lies in {r_b(s) <= -delta2 b, s outside b Gamma}.
bool in_drift_region(const MixtureKernel& kernel, std::span<const double> s);

}  // namespace ruinsim
