#pragma once

// Asymptotic conditional laws: the time-to-ruin Z*, the jump-time law
// Z_{a,theta}, the overshoot Y*(z), and statistical comparisons of simulated
// conditioned paths against them.

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "ruinsim/common.hpp"
#include "ruinsim/geometry.hpp"
#include "ruinsim/increments.hpp"
#include "ruinsim/kernel.hpp"
#include "ruinsim/rng.hpp"

namespace ruinsim {

/// Grid defaults: log-spaced on [1e-3, 1e3] with 2000 points (t = 0 prepended).
struct GridSpec {
  double t_min = 1e-3;
  double t_max = 1e3;
  std::size_t points = 2000;
};

/// kappa(t) = mu{y : max_j (y^T v_j - a_j) > t}, its tail integral K(t), the
/// hazard h(t) = theta a^-alpha kappa(t) / K(t) and the survival
/// exp(-int_0^t h) = (K(t) / K(0))^(theta a^-alpha).
class HazardTable {
 public:
  HazardTable(const IncrementModel& model, const HalfSpaceSystem& system, double a = 1.0,
              double theta = 1.0, GridSpec grid = {});

  const Vec& t() const { return t_; }
  const Vec& kappa() const { return kappa_; }
  const Vec& tail_integral() const { return tail_; }
  const Vec& hazard() const { return hazard_; }
  const Vec& survival() const { return survival_; }
  double exponent() const { return exponent_; }

  /// Closed-form survival at any t >= 0.
  double survival_at(double t) const;
  double hazard_at(double t) const;
  double cdf(double t) const { return 1.0 - survival_at(t); }

  /// Survival obtained by trapezoid integration of the tabulated hazard.
  Vec trapezoid_survival() const;

  /// Inverse-CDF draw by bisection (tolerance 1e-8 in probability).
  double sample(Rng& rng) const;

 private:
  HalfSpaceProjection projection_;
  Vec offsets_;
  double exponent_;
  double tail0_;
  Vec t_, kappa_, tail_, hazard_, survival_;
};

/// Y*(z): mu restricted to {y : max_j (y^T v_j* - a_j*) >= z}, normalized.
class OvershootLaw {
 public:
  OvershootLaw(const IncrementModel& model, const HalfSpaceSystem& star, double z);

  double z() const { return z_; }
  /// Per-atom truncation radius; infinite when the atom never reaches the set.
  const Vec& radii() const { return rho_; }
  const Vec& weights() const { return weights_; }

  Vec sample(Rng& rng) const;

  /// (rho_k / r)^alpha for a radius r of atom k: uniform under the law.
  double radius_pit(std::size_t k, double r) const;

 private:
  IncrementModel model_;
  double z_;
  Vec rho_;
  Vec weights_;
  Vec cumulative_;
};

/// Atom index of an increment of the pure-radial model (largest cosine
/// between x - c and the atom directions) and its radius ||x - c||.
std::pair<std::size_t, double> decompose_increment(const IncrementModel& model,
                                                   std::span<const double> x);

struct KsResult {
  double statistic = 0.0;
  double critical = 0.0;
  double n = 0.0;
  bool pass = false;
};

struct LimitTestOptions {
  double level = 0.01;
  double u = 0.5;
  double lln_eps = 0.5;
  double lln_max_fraction = 0.2;
  std::uint64_t seed = 1;
  std::size_t min_paths = 1000;
};

struct LimitLawReport {
  double b = 0.0;
  std::size_t n_paths = 0;
  std::size_t n_conditioned = 0;
  double ess = 0.0;
  double t_max = 0.0;     ///< gamma / (2d): horizon unaffected by the b Gamma exit
  KsResult ks_T_zstar;    ///< weight-resampled T/b against Z*, both conditioned on t <= t_max
  KsResult ks_T_zat;      ///< raw T/b against Z_{a,theta}, both conditioned on t <= t_max
  KsResult ks_N;          ///< N_b/b against Z_{a,theta} on t <= t_max
  std::size_t ks_N_censored = 0;
  double chi2_overshoot = 0.0;
  double chi2_dof = 0.0;
  double chi2_critical = 0.0;
  bool overshoot_atoms_pass = true;
  KsResult overshoot_radius;  ///< PIT of the jump radius against uniform
  bool clt_applicable = false;
  std::vector<KsResult> ks_clt;
  double lln_fraction = 0.0;
  bool lln_pass = true;
  bool pass = false;  ///< ks_N, atom frequencies, and CLT or LLN
};

/// Runs the comparisons on raw mixture-kernel paths (states recorded).
/// Throws InsufficientSample below options.min_paths conditioned paths.
LimitLawReport limit_law_tests(const MixtureKernel& kernel, std::span<const PathRecord> paths,
                               const LimitTestOptions& options = {});

/// One-sample KS restricted to [0, t_max]; values above t_max (or infinite)
/// count only through F_n.
double ks_truncated(std::vector<double> sample, const HazardTable& law, double t_max);

/// One-sample KS of the values <= t_max against the law conditioned on
/// [0, t_max]; returns the number of values kept.
std::size_t ks_conditional(std::span<const double> sample, const HazardTable& law, double t_max,
                           double& statistic);

}  // namespace ruinsim
