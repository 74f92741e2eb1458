#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ruinsim/kernel.hpp"

namespace ruinsim {

/// Paths are grouped into fixed-size blocks of consecutive indices; per-block
/// partial sums are merged in block order, so results do not depend on the
/// number of workers.
inline constexpr std::size_t kPathBlock = 1024;

/// Overflow fraction above which a run is aborted.
inline constexpr double kMaxOverflowFraction = 1e-3;

struct WeightSums {
  std::size_t n = 0;
  std::size_t hits = 0;
  std::size_t hits_star = 0;
  std::size_t overflow = 0;
  double w1 = 0.0, w2 = 0.0, w3 = 0.0, w4 = 0.0;
  double w1_star = 0.0;

  void add(const PathRecord& path);
  void merge(const WeightSums& other);
};

struct RuinEstimate {
  std::size_t n_paths = 0;
  std::size_t n_hits = 0;
  std::size_t n_overflow = 0;
  double p_hat = 0.0;
  double p_hat_star = 0.0;  ///< biased-low proxy for P(T_bA* < inf)
  double var_hat = 0.0;
  double rel_err = 0.0;
  double m2_ratio = 0.0;
  double m2_ratio_se = 0.0;  ///< delta-method standard error of m2_ratio
  double tv_bound = 0.0;
  double overflow_frac = 0.0;
};

RuinEstimate summarize(const WeightSums& sums);

/// Importance-sampling estimate of P_0(T_bA <= T_bGamma) from n_paths paths
/// under the mixture kernel. Throws AbortOverflow when the overflow fraction
/// exceeds kMaxOverflowFraction (and abort_on_overflow is set).
RuinEstimate estimate_ruin(const MixtureKernel& kernel, std::size_t n_paths, std::uint64_t seed,
                           unsigned workers, bool abort_on_overflow = true);

/// Crude Monte Carlo frequency of {T_target <= T_bGamma} with the nominal walk,
/// using the same per-path streams as estimate_ruin.
RuinEstimate crude_estimate(const MixtureKernel& kernel, std::size_t n_paths, std::uint64_t seed,
                            unsigned workers, StopTarget target = StopTarget::Enlarged);

/// Mixture-kernel paths for indices [first, first + count).
std::vector<PathRecord> simulate_paths(const MixtureKernel& kernel, std::size_t count,
                                       std::uint64_t seed, unsigned workers,
                                       bool record_states = false, std::size_t first = 0);

/// Re-simulates selected path indices (same streams as simulate_paths).
std::vector<PathRecord> replay_paths(const MixtureKernel& kernel, std::span<const std::size_t> indices,
                                     std::uint64_t seed, unsigned workers, bool record_states);

struct CrudeSample {
  std::vector<PathRecord> paths;
  std::vector<std::size_t> indices;  ///< stream index of every accepted path
  std::size_t attempts = 0;

  double hit_frequency() const {
    return attempts ? static_cast<double>(paths.size()) / static_cast<double>(attempts) : 0.0;
  }
};

/// Pilot size after which a zero hit count is declared infeasible.
inline constexpr std::size_t kOraclePilot = 1'000'000;

/// Nominal paths conditioned, by rejection, on reaching the target before
/// b Gamma. Throws InfeasibleOracle when the pilot sees no hit.
CrudeSample crude_conditional_sample(const MixtureKernel& kernel, std::size_t n_hits_wanted,
                                     std::uint64_t seed, unsigned workers,
                                     StopTarget target = StopTarget::Star,
                                     bool record_states = false);

struct TvRow {
  double b;
  RuinEstimate estimate;
};

/// m2_ratio and tv_bound per scale b.
std::vector<TvRow> tv_diagnostic_curve(const IncrementModel& model, const TargetSpec& spec,
                                       const KernelParams& params, std::span<const double> b_list,
                                       std::size_t n_paths, std::uint64_t seed, unsigned workers);

enum class PathFunctional { TimeOverB, OvershootOverB, JumpIndexOverB };

const char* to_string(PathFunctional f);

/// T/b, max_j(S_T^T v_j* - a_j* b)/b, or N_b/b (throws when no jump occurred).
double evaluate_functional(const PathRecord& path, PathFunctional f, const TargetSpec& spec,
                           double b);

/// Multinomial resampling of `count` indices proportional to weights.
std::vector<std::size_t> resample_indices(std::span<const double> weights, std::size_t count,
                                          Rng& rng);

/// Effective sample size (sum w)^2 / sum w^2.
double effective_sample_size(std::span<const double> weights);

struct KsComparison {
  double statistic = 0.0;
  double critical = 0.0;  ///< at the requested level, with resampling-adjusted size
  double n_weighted_eff = 0.0;
  double n_reference = 0.0;
  bool pass = false;
};

/// Two-sample KS between mixture-kernel paths (resampled by weight) and a
/// reference conditional sample, on a scalar functional.
KsComparison conditional_law_distance(std::span<const PathRecord> weighted_paths,
                                      std::span<const PathRecord> reference_paths,
                                      PathFunctional f, const TargetSpec& spec, double b,
                                      std::uint64_t seed, double level = 0.01);

}  // namespace ruinsim
