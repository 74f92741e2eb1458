#include "ruinsim/geometry.hpp"

#include <algorithm>
#include <limits>

namespace ruinsim {

double HalfSpaceSystem::r(double b, std::span<const double> s) const {
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < normals.size(); ++j)
    best = std::max(best, dot(s, normals[j]) - offsets[j] * b);
  return best;
}

TargetSpec normalize_target(std::vector<Vec> directions, Vec offsets, double delta, double beta,
                            double gamma) {
  if (directions.empty()) throw ValidationError("target needs at least one half-space");
  if (directions.size() != offsets.size())
    throw ValidationError("vstar and astar must have the same length");
  const std::size_t d = directions.front().size();
  for (std::size_t j = 0; j < directions.size(); ++j) {
    auto& v = directions[j];
    if (v.size() != d || d == 0) throw ValidationError("target directions have mixed dimensions");
    const double e = eta_dot(v);
    if (!(e < 0.0))
      throw DegenerateDirection("target direction " + std::to_string(j) +
                                " must satisfy eta^T v < 0 (eta = -1)");
    const double scale = 1.0 / (-e);
    for (auto& x : v) x *= scale;
    offsets[j] *= scale;
    if (!(offsets[j] > 0.0)) throw ValidationError("target offsets a_j* must be positive");
  }
  if (!(delta > 0.0 && delta < 1.0)) throw ValidationError("delta must lie in (0, 1)");
  if (!(gamma > 0.0)) throw ValidationError("gamma must be positive");
  if (beta <= 0.0) beta = 10.0 * *std::max_element(offsets.begin(), offsets.end());
  return TargetSpec{std::move(directions), std::move(offsets), delta, beta, gamma};
}

Vec tilt_direction(std::span<const double> v, double delta) {
  // eta = -1, ||eta||^2 = d.
  const double d = static_cast<double>(v.size());
  Vec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - delta / d) / (1.0 - delta);
  return out;
}

HalfSpaceSystem enlarge(const TargetSpec& spec) {
  const std::size_t m = spec.vstar.size();
  const std::size_t d = spec.dim();
  HalfSpaceSystem sys;
  sys.normals.reserve(2 * m + d);
  sys.offsets.reserve(2 * m + d);
  for (std::size_t j = 0; j < m; ++j) {
    sys.normals.push_back(spec.vstar[j]);
    sys.offsets.push_back(spec.astar[j]);
  }
  for (std::size_t j = 0; j < m; ++j) {
    sys.normals.push_back(tilt_direction(spec.vstar[j], spec.delta));
    sys.offsets.push_back(spec.astar[j]);
  }
  for (std::size_t i = 0; i < d; ++i) {
    Vec e(d, 0.0);
    e[i] = 1.0;
    sys.normals.push_back(std::move(e));
    sys.offsets.push_back(spec.beta);
  }
  return sys;
}

void jump_thresholds(const HalfSpaceSystem& system, double b, double a,
                     std::span<const double> s0, std::span<double> out) {
  for (std::size_t j = 0; j < system.size(); ++j)
    out[j] = a * (system.offsets[j] * b - dot(s0, system.normals[j]));
}

JumpRegion::JumpRegion(const HalfSpaceSystem& system, double b, double a,
                       std::span<const double> s0)
    : system_(&system), base_(s0.begin(), s0.end()), thresholds_(system.size()) {
  jump_thresholds(system, b, a, s0, thresholds_);
}

bool JumpRegion::contains_increment(std::span<const double> x) const {
  for (std::size_t j = 0; j < system_->size(); ++j)
    if (dot(x, system_->normals[j]) > thresholds_[j]) return true;
  return false;
}

bool JumpRegion::contains_state(std::span<const double> s1) const {
  Vec x(s1.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = s1[i] - base_[i];
  return contains_increment(x);
}

}  // namespace ruinsim
