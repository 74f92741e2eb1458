#pragma once

// JSON run configuration: parsing with strict schema checks, defaults, and an
// echo of the effective configuration.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ruinsim/geometry.hpp"
#include "ruinsim/increments.hpp"
#include "ruinsim/kernel.hpp"
#include "ruinsim/limits.hpp"
#include "ruinsim/lyapunov.hpp"

namespace ruinsim {

struct ModelConfig {
  double alpha = 2.5;
  double xm = 1.0;
  double body_radius = 0.0;
  std::vector<SpectralAtom> atoms;  ///< as given; normalized by build()

  IncrementModel build() const;
};

/// Target half-spaces as given, before scaling to eta^T v = -1.
struct TargetConfig {
  std::vector<Vec> directions;
  Vec offsets;
  double delta = 0.05;
  double beta = 0.0;  ///< filled with 10 max_j a_j* (scaled) when absent
  double gamma = 20.0;

  TargetSpec build() const;
};

struct MollifierConfig {
  double c0_tilde = 1.0;
  double delta0 = 1.0;
  double epsilon = 0.2;
  double c1 = 0.0;  ///< filled from epsilon when absent

  MollifierParams params() const { return {c0_tilde, delta0, c1}; }
};

struct SimConfig {
  double b = 5.0;
  std::vector<double> b_list;  ///< empty: {b}
  std::size_t n_paths = 10000;
  std::uint64_t seed = 1;
  unsigned workers = 1;
  std::string output_dir = "out";
  bool per_path_csv = false;
};

struct LyapunovConfig {
  std::vector<Vec> states;  ///< empty: default grid
  std::size_t n_mc = 20000;
  double theta = 0.0;       ///< filled with 1 / (1 + epsilon)^2 when absent
};

struct CrudeConfig {
  std::size_t n_hits = 2000;
  StopTarget target = StopTarget::Enlarged;
};

struct RunConfig {
  ModelConfig model;
  TargetConfig target_input;
  TargetSpec target;  ///< normalized
  KernelParams kernel;
  std::optional<ValueStrategy> value_strategy;  ///< empty: exact for pure-radial models
  MollifierConfig mollifier;
  SimConfig sim;
  LyapunovConfig lyapunov;
  LimitTestOptions limits;
  CrudeConfig crude;

  MixtureKernel kernel_at(double b) const;
  std::vector<double> scales() const;
};

/// Parses and validates. Throws SchemaError (with the field path) for
/// malformed JSON, duplicate or unknown keys and wrong types, and
/// ValidationError for violated invariants.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// Effective configuration with every default filled in (execution-only
/// settings sim.workers and sim.output_dir are omitted).
nlohmann::json effective_config(const RunConfig& cfg);

/// Default 20-state grid for the drift check at scale b: states
/// b (-tau + xi, -tau, ..., -tau), pushed along -1 until they enter the drift
/// region; states that cannot be placed are dropped.
std::vector<Vec> default_lyapunov_states(const RunConfig& cfg, double b);

}  // namespace ruinsim
