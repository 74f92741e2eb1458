#pragma once

// Regularly varying increment law X = R * Theta + body_radius * U + c, with
// R ~ Pareto(alpha, xm), Theta drawn from a discrete spectral measure, U
// uniform on the unit ball, and c chosen so that E X = eta = (-1, ..., -1).

#include <cstddef>
#include <span>
#include <vector>

#include "ruinsim/common.hpp"
#include "ruinsim/rng.hpp"

namespace ruinsim {

struct SpectralAtom {
  Vec dir;
  double weight;
};

class SpectralMeasure {
 public:
  /// Directions are rescaled to unit length. Weights must be positive; they
  /// are renormalized to sum to one when `normalize_weights` is set.
  explicit SpectralMeasure(std::vector<SpectralAtom> atoms, bool normalize_weights = true);

  std::size_t size() const { return atoms_.size(); }
  std::size_t dim() const { return atoms_.front().dir.size(); }
  const SpectralAtom& atom(std::size_t k) const { return atoms_[k]; }
  const std::vector<SpectralAtom>& atoms() const { return atoms_; }

  Vec mean_direction() const;

  /// Atom index for a uniform variate u in [0, 1).
  std::size_t pick(double u) const;

 private:
  std::vector<SpectralAtom> atoms_;
  std::vector<double> cumulative_;
};

class IncrementModel {
 public:
  IncrementModel(double alpha, double xm, SpectralMeasure spectral, double body_radius = 0.0);

  std::size_t dim() const { return spectral_.dim(); }
  double alpha() const { return alpha_; }
  double xm() const { return xm_; }
  double body_radius() const { return body_radius_; }
  bool pure_radial() const { return body_radius_ == 0.0; }
  const SpectralMeasure& spectral() const { return spectral_; }
  const Vec& shift() const { return shift_; }

  /// E R = alpha xm / (alpha - 1).
  double mean_radius() const { return alpha_ * xm_ / (alpha_ - 1.0); }

  /// Slowly varying factor of P(||X|| > u) = L u^-alpha (1 + o(1)); here xm^alpha.
  double tail_constant() const { return tail_constant_; }

  /// Asymptotic norm tail xm^alpha u^-alpha.
  double norm_tail(double u) const;

  /// Pareto survival P(R > r).
  double radial_survival(double r) const;

  /// Inverse-CDF Pareto draw truncated to (lower, inf), lower >= xm.
  double sample_radius_above(double lower, Rng& rng) const;

  void sample(Rng& rng, std::span<double> out) const;
  Vec sample(Rng& rng) const;

  /// Uniform draw on the unit ball, written to out.
  void sample_ball(Rng& rng, std::span<double> out) const;

  /// Var(X); requires alpha > 2.
  std::vector<Vec> covariance() const;

 private:
  double alpha_;
  double xm_;
  double body_radius_;
  double tail_constant_;
  SpectralMeasure spectral_;
  Vec shift_;
};

/// The model projected onto a fixed list of half-space normals v_j. Holds the
/// per-atom slopes theta_k^T v_j and shifts c^T v_j, so that events of the
/// form {exists j: X^T v_j > u_j} are evaluated without touching vectors.
class HalfSpaceProjection {
 public:
  HalfSpaceProjection(const IncrementModel& model, std::vector<Vec> normals);

  const IncrementModel& model() const { return model_; }
  const std::vector<Vec>& normals() const { return normals_; }
  std::size_t num_normals() const { return normals_.size(); }
  std::size_t num_atoms() const { return model_.spectral().size(); }
  double slope(std::size_t k, std::size_t j) const { return slopes_[k * normals_.size() + j]; }
  double shift(std::size_t j) const { return shifts_[j]; }

  /// P(exists j: X^T v_j > u_j). Exact for the pure-radial model; the
  /// body-noise model averages the exact radial value over a fixed
  /// low-discrepancy node set on the unit ball.
  double tail_union_prob(std::span<const double> thresholds) const;

  /// One exact draw from Law(X | exists j: X^T v_j > u_j).
  /// Throws ZeroMassRegion when the event has probability zero.
  void sample_conditional(std::span<const double> thresholds, Rng& rng,
                          std::span<double> out) const;

  /// Limit measure kappa = sum_k phi_k max_j ((theta_k^T v_j)^+ / level_j)^alpha,
  /// normalized relative to P(||X|| > b). All levels must be positive.
  double kappa(std::span<const double> levels) const;

  /// int_{t0}^inf kappa(levels + t) dt, closed form per atom.
  double kappa_tail_integral(std::span<const double> levels, double t0 = 0.0) const;

  /// Radial part only: P(exists j: (R Theta + c)^T v_j > u_j).
  double radial_tail_prob(std::span<const double> thresholds) const;

 private:
  struct AtomEvent {
    double prob;   // P(R in set)
    double lower;  // event contains [xm, lower)
    double upper;  // event contains (upper, inf)
    bool all;
  };
  AtomEvent atom_event(std::size_t k, std::span<const double> thresholds) const;
  double sample_radius_in(const AtomEvent& ev, Rng& rng) const;
  void sample_radial_conditional(std::span<const double> thresholds, Rng& rng,
                                 std::span<double> out) const;

  IncrementModel model_;
  std::vector<Vec> normals_;
  std::vector<double> slopes_;
  std::vector<double> shifts_;
  std::vector<double> norms_;
  std::vector<Vec> ball_nodes_;
};

/// kappa(t, z) for the half-space system (normals, offsets):
/// mu{y : max_j (y^T v_j + z^T v_j - a_j) > t}. Throws DomainViolation when a
/// denominator -z^T v_j + a_j + t is not positive.
double kappa_polar(const IncrementModel& model, const std::vector<Vec>& normals,
                   std::span<const double> offsets, double t, std::span<const double> z);

}  // namespace ruinsim
