#include "ruinsim/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ruinsim/envelope.hpp"

namespace ruinsim {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// E[(A + B R); r1 < R < r2] for R ~ Pareto(alpha, xm), xm <= r1 < r2 <= inf.
double pareto_partial(double A, double B, double r1, double r2, double alpha, double xm) {
  const double s1 = std::pow(xm / r1, alpha);
  const double s2 = std::isinf(r2) ? 0.0 : std::pow(xm / r2, alpha);
  const double m1 = std::pow(r1, 1.0 - alpha);
  const double m2 = std::isinf(r2) ? 0.0 : std::pow(r2, 1.0 - alpha);
  return A * (s1 - s2) + B * alpha * std::pow(xm, alpha) / (alpha - 1.0) * (m1 - m2);
}

}  // namespace

void KernelParams::validate(const HalfSpaceSystem& system) const {
  if (!(theta >= 0.0 && theta < 1.0)) throw ValidationError("kernel.theta must lie in [0, 1)");
  if (!(a > 0.0 && a < 1.0)) throw ValidationError("kernel.a must lie in (0, 1)");
  const double min_a = *std::min_element(system.offsets.begin(), system.offsets.end());
  if (!(delta2 > 0.0 && delta2 < min_a))
    throw ValidationError("kernel.delta2 must lie in (0, min_j a_j)");
  if (!(max_step_factor > 0.0)) throw ValidationError("kernel.max_step_factor must be positive");
}

const char* to_string(StopCause c) {
  switch (c) {
    case StopCause::HitA: return "HitA";
    case StopCause::HitGamma: return "HitGamma";
    case StopCause::HorizonOverflow: return "HorizonOverflow";
  }
  return "?";
}

double PathRecord::weight() const {
  return stop_cause == StopCause::HitA ? std::exp(log_weight) : 0.0;
}

double mixture_probability(double theta, double region_prob, double value, double r,
                           double delta2, double b) {
  if (!(r <= -delta2 * b) || theta == 0.0 || region_prob <= 0.0) return 0.0;
  if (!(value > 0.0)) return 1.0;
  return std::min(theta * region_prob / value, 1.0);
}

double likelihood_ratio(double p, double region_prob, bool inside) {
  if (p >= 1.0 && !inside)
    throw InconsistentTransition("p_b = 1 but the new state is outside the jump region");
  const double mix = inside ? p / region_prob + (1.0 - p) : (1.0 - p);
  return 1.0 / mix;
}

// ---------------------------------------------------------------------------

ValueFunction::ValueFunction(const IncrementModel& model, const HalfSpaceSystem& system,
                             ValueStrategy strategy)
    : system_(system), projection_(model, system.normals), strategy_(strategy) {
  if (strategy == ValueStrategy::ExactRadial && !model.pure_radial())
    throw ValidationError("exact value function requires the pure-radial model");
}

double ValueFunction::operator()(double b, std::span<const double> s) const {
  return strategy_ == ValueStrategy::ExactRadial ? exact(b, s) : asymptotic(b, s);
}

double ValueFunction::exact(double b, std::span<const double> s) const {
  const IncrementModel& model = projection_.model();
  const std::size_t m = system_.size();
  const double alpha = model.alpha();
  const double xm = model.xm();
  Vec intercepts(m), slopes(m);
  for (std::size_t j = 0; j < m; ++j)
    intercepts[j] = dot(s, system_.normals[j]) + projection_.shift(j) - system_.offsets[j] * b;

  double total = 0.0;
  for (std::size_t k = 0; k < projection_.num_atoms(); ++k) {
    for (std::size_t j = 0; j < m; ++j) slopes[j] = projection_.slope(k, j);
    double atom_value = 0.0;
    // r_b(s + c + r theta_k) is the upper envelope of these lines in r.
    for (const auto& piece : upper_envelope(intercepts, slopes, xm, kInf)) {
      double lo = piece.lo;
      double hi = piece.hi;
      const double A = piece.intercept;
      const double B = piece.slope;
      if (B > 0.0) {
        lo = std::max(lo, -A / B);
      } else if (B < 0.0) {
        hi = std::min(hi, -A / B);
      } else if (A <= 0.0) {
        continue;
      }
      if (!(hi > lo)) continue;
      atom_value += pareto_partial(A, B, lo, hi, alpha, xm);
    }
    total += model.spectral().atom(k).weight * atom_value;
  }
  return std::max(total, 0.0);
}

double ValueFunction::asymptotic(double b, std::span<const double> s) const {
  const std::size_t m = system_.size();
  Vec levels(m);
  for (std::size_t j = 0; j < m; ++j) levels[j] = system_.offsets[j] - dot(s, system_.normals[j]) / b;
  const IncrementModel& model = projection_.model();
  return b * model.norm_tail(b) * projection_.kappa_tail_integral(levels, 0.0);
}

// ---------------------------------------------------------------------------

MixtureKernel::MixtureKernel(IncrementModel model, TargetSpec spec, double b, KernelParams params,
                             std::optional<ValueStrategy> strategy)
    : model_(std::move(model)),
      spec_(std::move(spec)),
      system_(enlarge(spec_)),
      star_(spec_.star()),
      b_(b),
      params_(params),
      projection_(model_, system_.normals),
      value_(model_, system_,
             strategy.value_or(model_.pure_radial() ? ValueStrategy::ExactRadial
                                                    : ValueStrategy::AsymptoticKappa)),
      horizon_(static_cast<std::size_t>(std::ceil(params.max_step_factor * spec_.gamma * b))) {
  if (model_.dim() != spec_.dim()) throw ValidationError("model and target dimensions differ");
  if (!(b > 0.0)) throw ValidationError("scale b must be positive");
  params_.validate(system_);
}

double MixtureKernel::region_prob(std::span<const double> s) const {
  Vec u(system_.size());
  jump_thresholds(system_, b_, params_.a, s, u);
  return projection_.tail_union_prob(u);
}

StateEval MixtureKernel::evaluate(std::span<const double> s) const {
  StateEval ev;
  ev.r = system_.r(b_, s);
  ev.thresholds.resize(system_.size());
  jump_thresholds(system_, b_, params_.a, s, ev.thresholds);
  if (params_.theta == 0.0 || !(ev.r <= -params_.delta2 * b_)) return ev;
  ev.region_prob = projection_.tail_union_prob(ev.thresholds);
  ev.value = value_(b_, s);
  ev.p = mixture_probability(params_.theta, ev.region_prob, ev.value, ev.r, params_.delta2, b_);
  return ev;
}

double MixtureKernel::khat(const StateEval& ev, std::span<const double> s0,
                           std::span<const double> s1) const {
  if (ev.p == 0.0) return 1.0;
  bool inside = false;
  for (std::size_t j = 0; j < system_.size() && !inside; ++j) {
    double x = 0.0;
    for (std::size_t i = 0; i < s0.size(); ++i) x += (s1[i] - s0[i]) * system_.normals[j][i];
    inside = x > ev.thresholds[j];
  }
  return likelihood_ratio(ev.p, ev.region_prob, inside);
}

double MixtureKernel::khat(std::span<const double> s0, std::span<const double> s1) const {
  return khat(evaluate(s0), s0, s1);
}

StepResult MixtureKernel::step(const StateEval& ev, std::span<const double> s0, Rng& rng,
                               std::span<double> s1) const {
  StepResult res;
  const std::size_t d = s0.size();
  const bool jump = ev.p > 0.0 && rng.uniform() < ev.p;
  if (jump) {
    projection_.sample_conditional(ev.thresholds, rng, s1);
    res.jumped = true;
  } else {
    model_.sample(rng, s1);
  }
  // s1 currently holds the increment.
  bool inside = jump;
  if (ev.p > 0.0 && !jump) {
    for (std::size_t j = 0; j < system_.size() && !inside; ++j)
      inside = dot(s1, system_.normals[j]) > ev.thresholds[j];
  }
  for (std::size_t i = 0; i < d; ++i) s1[i] += s0[i];
  if (ev.p > 0.0) res.log_khat = std::log(likelihood_ratio(ev.p, ev.region_prob, inside));
  return res;
}

StepResult MixtureKernel::step(std::span<const double> s0, Rng& rng, std::span<double> s1) const {
  return step(evaluate(s0), s0, rng, s1);
}

PathRecord MixtureKernel::simulate_path(Rng& rng, bool record_states) const {
  const std::size_t d = model_.dim();
  PathRecord rec;
  Vec s(d, 0.0), next(d);
  if (record_states) rec.states.push_back(s);
  rec.last_increment.assign(d, 0.0);
  for (std::size_t n = 0;; ++n) {
    if (system_.r(b_, s) > 0.0) {
      rec.stop_cause = StopCause::HitA;
      break;
    }
    if (gamma_exit(spec_.gamma, b_, s)) {
      rec.stop_cause = StopCause::HitGamma;
      break;
    }
    if (n >= horizon_) {
      rec.stop_cause = StopCause::HorizonOverflow;
      break;
    }
    const StateEval ev = evaluate(s);
    const StepResult st = step(ev, s, rng, next);
    rec.log_weight += st.log_khat;
    if (st.jumped && !rec.n_jump) rec.n_jump = n + 1;
    for (std::size_t i = 0; i < d; ++i) rec.last_increment[i] = next[i] - s[i];
    std::swap(s, next);
    rec.steps = n + 1;
    if (record_states) {
      rec.states.push_back(s);
      rec.jumped.push_back(st.jumped);
      rec.log_khat.push_back(st.log_khat);
    }
  }
  rec.hit_astar = star_.r(b_, s) > 0.0;
  rec.terminal = std::move(s);
  return rec;
}

PathRecord MixtureKernel::simulate_nominal(Rng& rng, StopTarget target, bool record_states) const {
  const std::size_t d = model_.dim();
  const HalfSpaceSystem& stop_set = target == StopTarget::Enlarged ? system_ : star_;
  PathRecord rec;
  Vec s(d, 0.0), x(d);
  if (record_states) rec.states.push_back(s);
  rec.last_increment.assign(d, 0.0);
  for (std::size_t n = 0;; ++n) {
    if (stop_set.r(b_, s) > 0.0) {
      rec.stop_cause = StopCause::HitA;
      break;
    }
    if (gamma_exit(spec_.gamma, b_, s)) {
      rec.stop_cause = StopCause::HitGamma;
      break;
    }
    if (n >= horizon_) {
      rec.stop_cause = StopCause::HorizonOverflow;
      break;
    }
    model_.sample(rng, x);
    for (std::size_t i = 0; i < d; ++i) s[i] += x[i];
    rec.last_increment = x;
    rec.steps = n + 1;
    if (record_states) rec.states.push_back(s);
  }
  rec.hit_astar = star_.r(b_, s) > 0.0;
  rec.terminal = std::move(s);
  return rec;
}

}  // namespace ruinsim
