#pragma once

// Target sets as unions of half-spaces {y : y^T v_j > a_j b}, the enlargement
// used by the change of measure, per-state jump regions and the drift exit.

#include <cstddef>
#include <span>
#include <vector>

#include "ruinsim/common.hpp"

namespace ruinsim {

/// Union of half-spaces {y : y^T v_j > a_j}; scaled by b when evaluated.
struct HalfSpaceSystem {
  std::vector<Vec> normals;
  Vec offsets;

  std::size_t size() const { return normals.size(); }
  std::size_t dim() const { return normals.empty() ? 0 : normals.front().size(); }

  /// r_b(s) = max_j (s^T v_j - a_j b).
  double r(double b, std::span<const double> s) const;

  /// s in bA, strict.
  bool contains(double b, std::span<const double> s) const { return r(b, s) > 0.0; }
};

struct TargetSpec {
  std::vector<Vec> vstar;
  Vec astar;
  double delta = 0.05;
  double beta = 0.0;   ///< 0 means "10 * max astar" once normalized
  double gamma = 20.0;

  std::size_t dim() const { return vstar.front().size(); }
  HalfSpaceSystem star() const { return {vstar, astar}; }
};

/// Rescales each (v, a) by 1 / (-eta^T v) so that eta^T v = -1. Throws
/// DegenerateDirection when eta^T v >= 0. A non-positive beta defaults to
/// 10 * max_j a_j* after scaling.
TargetSpec normalize_target(std::vector<Vec> directions, Vec offsets, double delta = 0.05,
                            double beta = 0.0, double gamma = 20.0);

/// v_j*(delta) = (v_j* + delta eta / ||eta||^2) / (1 - delta).
Vec tilt_direction(std::span<const double> v, double delta);

/// 2m + d pairs: the original half-spaces, their tilted copies with the same
/// offsets, and the coordinate caps y_i >= beta.
HalfSpaceSystem enlarge(const TargetSpec& spec);

/// Region {s1 : max_j [(s1 - s0)^T v_j - a (a_j b - s0^T v_j)] > 0}, stored as
/// thresholds u_j = a (a_j b - s0^T v_j) on the increment x = s1 - s0.
class JumpRegion {
 public:
  JumpRegion(const HalfSpaceSystem& system, double b, double a, std::span<const double> s0);

  const Vec& thresholds() const { return thresholds_; }
  const Vec& base() const { return base_; }

  bool contains_increment(std::span<const double> x) const;
  bool contains_state(std::span<const double> s1) const;

 private:
  const HalfSpaceSystem* system_;
  Vec base_;
  Vec thresholds_;
};

/// Writes u_j = a (a_j b - s0^T v_j) into out.
void jump_thresholds(const HalfSpaceSystem& system, double b, double a,
                     std::span<const double> s0, std::span<double> out);

/// s in b Gamma, i.e. eta^T s >= gamma b (inclusive).
inline bool gamma_exit(double gamma, double b, std::span<const double> s) {
  return eta_dot(s) >= gamma * b;
}

}  // namespace ruinsim
