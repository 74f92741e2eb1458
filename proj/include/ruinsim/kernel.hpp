#pragma once

// Approximating transition kernel for the walk conditioned on ruin: with
// probability p_b(s) the next increment is drawn conditionally on landing in
// the jump region A_{b,a}(s), otherwise from the nominal law. Paths run until
// the enlarged target bA or the drift-exit set b Gamma is reached.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "ruinsim/common.hpp"
#include "ruinsim/geometry.hpp"
#include "ruinsim/increments.hpp"
#include "ruinsim/rng.hpp"

namespace ruinsim {

struct KernelParams {
  double theta = 0.99;  ///< 0 is allowed as a diagnostic mode (nominal walk)
  double a = 0.99;
  double delta2 = 0.1;
  double max_step_factor = 10.0;

  /// Checks theta in [0, 1), a in (0, 1), delta2 in (0, min_j a_j), factor > 0.
  void validate(const HalfSpaceSystem& system) const;
};

enum class StopCause { HitA, HitGamma, HorizonOverflow };
enum class ValueStrategy { ExactRadial, AsymptoticKappa };
enum class StopTarget { Enlarged, Star };

const char* to_string(StopCause c);

struct PathRecord {
  std::vector<Vec> states;  ///< S_0..S_T, only when recording was requested
  std::vector<bool> jumped;        ///< per transition, recorded with states
  std::vector<double> log_khat;    ///< per transition, recorded with states
  StopCause stop_cause = StopCause::HitGamma;
  std::size_t steps = 0;               ///< T
  std::optional<std::size_t> n_jump;   ///< first n >= 1 whose transition was a jump
  double log_weight = 0.0;             ///< sum of log k-hat over the stopped path
  bool hit_astar = false;              ///< r_b*(S_T) > 0
  Vec terminal;                        ///< S_T
  Vec last_increment;                  ///< X_T

  /// exp(log_weight) on {HitA}, else 0.
  double weight() const;
};

/// min(theta P / v, 1) * I(r <= -delta2 b).
double mixture_probability(double theta, double region_prob, double value, double r,
                           double delta2, double b);

/// k-hat = {p I(inside) / P + (1 - p)}^-1. Throws InconsistentTransition when
/// p = 1 and the new state is outside the jump region.
double likelihood_ratio(double p, double region_prob, bool inside);

/// v_b(s) = E r_b(s + X)^+ for a fixed half-space system.
class ValueFunction {
 public:
  ValueFunction(const IncrementModel& model, const HalfSpaceSystem& system,
                ValueStrategy strategy);

  ValueStrategy strategy() const { return strategy_; }
  double operator()(double b, std::span<const double> s) const;

  /// Closed-form evaluation for the pure-radial model.
  double exact(double b, std::span<const double> s) const;

  /// b P(||X|| > b) int_0^inf kappa_a(t, s / b) dt.
  double asymptotic(double b, std::span<const double> s) const;

 private:
  HalfSpaceSystem system_;
  HalfSpaceProjection projection_;
  ValueStrategy strategy_;
};

/// Everything the kernel needs about one state, computed once so that the
/// sampler and the likelihood ratio see bit-identical values.
struct StateEval {
  Vec thresholds;
  double r = 0.0;
  double region_prob = 0.0;  ///< only filled when the indicator is on
  double value = 0.0;        ///< only filled when the indicator is on
  double p = 0.0;
};

struct StepResult {
  bool jumped = false;
  double log_khat = 0.0;
};

class MixtureKernel {
 public:
  MixtureKernel(IncrementModel model, TargetSpec spec, double b, KernelParams params,
                std::optional<ValueStrategy> strategy = std::nullopt);

  const IncrementModel& model() const { return model_; }
  const TargetSpec& spec() const { return spec_; }
  const HalfSpaceSystem& system() const { return system_; }
  const HalfSpaceSystem& star() const { return star_; }
  const HalfSpaceProjection& projection() const { return projection_; }
  const ValueFunction& value_function() const { return value_; }
  double b() const { return b_; }
  const KernelParams& params() const { return params_; }
  std::size_t horizon() const { return horizon_; }

  double v_b(std::span<const double> s) const { return value_(b_, s); }
  double region_prob(std::span<const double> s) const;
  double p_b(std::span<const double> s) const { return evaluate(s).p; }

  StateEval evaluate(std::span<const double> s) const;

  double khat(const StateEval& ev, std::span<const double> s0, std::span<const double> s1) const;
  double khat(std::span<const double> s0, std::span<const double> s1) const;

  /// One transition from s0 (requires r_b(s0) <= 0 and s0 outside b Gamma).
  StepResult step(const StateEval& ev, std::span<const double> s0, Rng& rng,
                  std::span<double> s1) const;
  StepResult step(std::span<const double> s0, Rng& rng, std::span<double> s1) const;

  /// Path from S_0 = 0 under the mixture kernel, stopped at T_bA, T_bGamma or
  /// the horizon.
  PathRecord simulate_path(Rng& rng, bool record_states = false) const;

  /// Nominal walk from 0 stopped at the chosen target, b Gamma or the horizon.
  PathRecord simulate_nominal(Rng& rng, StopTarget target = StopTarget::Enlarged,
                              bool record_states = false) const;

 private:
  IncrementModel model_;
  TargetSpec spec_;
  HalfSpaceSystem system_;
  HalfSpaceSystem star_;
  double b_;
  KernelParams params_;
  HalfSpaceProjection projection_;
  ValueFunction value_;
  std::size_t horizon_;
};

}  // namespace ruinsim
