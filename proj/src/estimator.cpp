#include "ruinsim/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ruinsim/parallel.hpp"
#include "ruinsim/stats.hpp"

namespace ruinsim {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::size_t block_count(std::size_t n) { return (n + kPathBlock - 1) / kPathBlock; }

template <class Simulate>
WeightSums run_blocks(std::size_t n_paths, unsigned workers, Simulate&& simulate) {
  const std::size_t nb = block_count(n_paths);
  std::vector<WeightSums> partial(nb);
  parallel_blocks(nb, workers, [&](std::size_t blk) {
    const std::size_t lo = blk * kPathBlock;
    const std::size_t hi = std::min(n_paths, lo + kPathBlock);
    WeightSums& acc = partial[blk];
    for (std::size_t i = lo; i < hi; ++i) acc.add(simulate(i));
  });
  WeightSums total;
  for (const auto& p : partial) total.merge(p);
  return total;
}

}  // namespace

void WeightSums::add(const PathRecord& path) {
  ++n;
  if (path.stop_cause == StopCause::HorizonOverflow) ++overflow;
  if (path.stop_cause != StopCause::HitA) return;
  const double w = path.weight();
  ++hits;
  w1 += w;
  w2 += w * w;
  w3 += w * w * w;
  w4 += w * w * w * w;
  if (path.hit_astar) {
    ++hits_star;
    w1_star += w;
  }
}

void WeightSums::merge(const WeightSums& o) {
  n += o.n;
  hits += o.hits;
  hits_star += o.hits_star;
  overflow += o.overflow;
  w1 += o.w1;
  w2 += o.w2;
  w3 += o.w3;
  w4 += o.w4;
  w1_star += o.w1_star;
}

RuinEstimate summarize(const WeightSums& s) {
  RuinEstimate r;
  r.n_paths = s.n;
  r.n_hits = s.hits;
  r.n_overflow = s.overflow;
  if (s.n == 0) return r;
  const double n = static_cast<double>(s.n);
  r.overflow_frac = static_cast<double>(s.overflow) / n;
  r.p_hat = s.w1 / n;
  r.p_hat_star = s.w1_star / n;
  const double m2 = s.w2 / n;
  r.var_hat = s.n > 1 ? std::max(0.0, (s.w2 - n * r.p_hat * r.p_hat) / (n - 1.0)) : 0.0;
  if (r.p_hat > 0.0) {
    r.rel_err = std::sqrt(r.var_hat) / (r.p_hat * std::sqrt(n));
    r.m2_ratio = m2 / (r.p_hat * r.p_hat);
    r.tv_bound = std::sqrt(std::max(0.0, r.m2_ratio - 1.0));
    // Delta method for g(A, B) = A / B^2 with A = mean W^2, B = mean W.
    const double m3 = s.w3 / n, m4 = s.w4 / n, B = r.p_hat, A = m2;
    const double var_a = m4 - A * A;
    const double var_b = A - B * B;
    const double cov_ab = m3 - A * B;
    const double ga = 1.0 / (B * B);
    const double gb = -2.0 * A / (B * B * B);
    const double v = ga * ga * var_a + gb * gb * var_b + 2.0 * ga * gb * cov_ab;
    r.m2_ratio_se = std::sqrt(std::max(0.0, v) / n);
  } else {
    r.rel_err = r.m2_ratio = r.tv_bound = r.m2_ratio_se = kNaN;
  }
  return r;
}

RuinEstimate estimate_ruin(const MixtureKernel& kernel, std::size_t n_paths, std::uint64_t seed,
                           unsigned workers, bool abort_on_overflow) {
  if (n_paths < 2) throw ValidationError("n_paths must be at least 2");
  const WeightSums sums = run_blocks(n_paths, workers, [&](std::size_t i) {
    Rng rng = Rng::stream(seed, i);
    return kernel.simulate_path(rng);
  });
  RuinEstimate est = summarize(sums);
  if (abort_on_overflow && est.overflow_frac > kMaxOverflowFraction)
    throw AbortOverflow("horizon overflow fraction " + std::to_string(est.overflow_frac) +
                        " exceeds 1e-3");
  return est;
}

RuinEstimate crude_estimate(const MixtureKernel& kernel, std::size_t n_paths, std::uint64_t seed,
                            unsigned workers, StopTarget target) {
  if (n_paths < 2) throw ValidationError("n_paths must be at least 2");
  const WeightSums sums = run_blocks(n_paths, workers, [&](std::size_t i) {
    Rng rng = Rng::stream(seed, i);
    return kernel.simulate_nominal(rng, target);
  });
  return summarize(sums);
}

std::vector<PathRecord> simulate_paths(const MixtureKernel& kernel, std::size_t count,
                                       std::uint64_t seed, unsigned workers, bool record_states,
                                       std::size_t first) {
  std::vector<PathRecord> out(count);
  parallel_blocks(block_count(count), workers, [&](std::size_t blk) {
    const std::size_t lo = blk * kPathBlock;
    const std::size_t hi = std::min(count, lo + kPathBlock);
    for (std::size_t i = lo; i < hi; ++i) {
      Rng rng = Rng::stream(seed, first + i);
      out[i] = kernel.simulate_path(rng, record_states);
    }
  });
  return out;
}

std::vector<PathRecord> replay_paths(const MixtureKernel& kernel,
                                     std::span<const std::size_t> indices, std::uint64_t seed,
                                     unsigned workers, bool record_states) {
  std::vector<PathRecord> out(indices.size());
  parallel_blocks(block_count(indices.size()), workers, [&](std::size_t blk) {
    const std::size_t lo = blk * kPathBlock;
    const std::size_t hi = std::min(indices.size(), lo + kPathBlock);
    for (std::size_t i = lo; i < hi; ++i) {
      Rng rng = Rng::stream(seed, indices[i]);
      out[i] = kernel.simulate_path(rng, record_states);
    }
  });
  return out;
}

CrudeSample crude_conditional_sample(const MixtureKernel& kernel, std::size_t n_hits_wanted,
                                     std::uint64_t seed, unsigned workers, StopTarget target,
                                     bool record_states) {
  CrudeSample out;
  if (n_hits_wanted == 0) return out;
  const std::size_t round_blocks = std::max<std::size_t>(8, 4 * std::max(1u, workers));
  std::size_t next_block = 0;
  while (out.paths.size() < n_hits_wanted) {
    std::vector<std::vector<std::pair<std::size_t, PathRecord>>> found(round_blocks);
    parallel_blocks(round_blocks, workers, [&](std::size_t r) {
      const std::size_t lo = (next_block + r) * kPathBlock;
      for (std::size_t i = lo; i < lo + kPathBlock; ++i) {
        Rng rng = Rng::stream(seed, i);
        PathRecord p = kernel.simulate_nominal(rng, target, record_states);
        if (p.stop_cause == StopCause::HitA) found[r].emplace_back(i, std::move(p));
      }
    });
    for (std::size_t r = 0; r < round_blocks; ++r) {
      for (auto& [idx, path] : found[r]) {
        if (out.paths.size() == n_hits_wanted) break;
        out.indices.push_back(idx);
        out.paths.push_back(std::move(path));
        out.attempts = idx + 1;
      }
      if (out.paths.size() == n_hits_wanted) break;
    }
    next_block += round_blocks;
    if (out.paths.size() < n_hits_wanted) out.attempts = next_block * kPathBlock;
    if (out.paths.empty() && out.attempts >= kOraclePilot)
      throw InfeasibleOracle("no target hit in " + std::to_string(out.attempts) +
                             " nominal paths; hit frequency below 1e-6");
  }
  return out;
}

std::vector<TvRow> tv_diagnostic_curve(const IncrementModel& model, const TargetSpec& spec,
                                       const KernelParams& params, std::span<const double> b_list,
                                       std::size_t n_paths, std::uint64_t seed, unsigned workers) {
  std::vector<TvRow> rows;
  for (double b : b_list) {
    MixtureKernel kernel(model, spec, b, params);
    rows.push_back({b, estimate_ruin(kernel, n_paths, seed, workers)});
  }
  return rows;
}

const char* to_string(PathFunctional f) {
  switch (f) {
    case PathFunctional::TimeOverB: return "T/b";
    case PathFunctional::OvershootOverB: return "overshoot/b";
    case PathFunctional::JumpIndexOverB: return "N_b/b";
  }
  return "?";
}

double evaluate_functional(const PathRecord& path, PathFunctional f, const TargetSpec& spec,
                           double b) {
  switch (f) {
    case PathFunctional::TimeOverB:
      return static_cast<double>(path.steps) / b;
    case PathFunctional::OvershootOverB:
      return spec.star().r(b, path.terminal) / b;
    case PathFunctional::JumpIndexOverB:
      if (!path.n_jump) throw PreconditionViolation("path has no jump index");
      return static_cast<double>(*path.n_jump) / b;
  }
  return 0.0;
}

std::vector<std::size_t> resample_indices(std::span<const double> weights, std::size_t count,
                                          Rng& rng) {
  std::vector<double> cum(weights.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) cum[i] = (acc += weights[i]);
  if (!(acc > 0.0)) throw InsufficientSample("all weights are zero");
  std::vector<std::size_t> idx(count);
  for (auto& k : idx) {
    const double u = rng.uniform() * acc;
    k = std::min<std::size_t>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin(),
                              weights.size() - 1);
  }
  return idx;
}

double effective_sample_size(std::span<const double> weights) {
  double s1 = 0.0, s2 = 0.0;
  for (double w : weights) {
    s1 += w;
    s2 += w * w;
  }
  return s2 > 0.0 ? s1 * s1 / s2 : 0.0;
}

KsComparison conditional_law_distance(std::span<const PathRecord> weighted_paths,
                                      std::span<const PathRecord> reference_paths,
                                      PathFunctional f, const TargetSpec& spec, double b,
                                      std::uint64_t seed, double level) {
  std::vector<double> w;
  std::vector<double> values;
  for (const auto& p : weighted_paths) {
    const double wi = p.weight();
    if (wi <= 0.0) continue;
    w.push_back(wi);
    values.push_back(evaluate_functional(p, f, spec, b));
  }
  if (values.empty() || reference_paths.empty())
    throw InsufficientSample("both samples must be non-empty");

  const double ess = effective_sample_size(w);
  const std::size_t count = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(ess)));
  Rng rng(seed);
  std::vector<double> resampled;
  resampled.reserve(count);
  for (std::size_t k : resample_indices(w, count, rng)) resampled.push_back(values[k]);

  std::vector<double> ref;
  ref.reserve(reference_paths.size());
  for (const auto& p : reference_paths) ref.push_back(evaluate_functional(p, f, spec, b));

  KsComparison out;
  out.statistic = stats::ks_two_sample(resampled, ref);
  // Resampling adds a second multinomial layer: 1/n_eff = 1/ESS + 1/count.
  out.n_weighted_eff = 1.0 / (1.0 / ess + 1.0 / static_cast<double>(count));
  out.n_reference = static_cast<double>(ref.size());
  out.critical = stats::ks_critical_two(level, out.n_weighted_eff, out.n_reference);
  out.pass = out.statistic < out.critical;
  return out;
}

}  // namespace ruinsim
