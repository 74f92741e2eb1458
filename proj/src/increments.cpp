#include "ruinsim/increments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ruinsim/envelope.hpp"

namespace ruinsim {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kBallNodes = 4096;

double radical_inverse(std::size_t i, unsigned base) {
  double inv = 1.0 / base;
  double f = inv;
  double r = 0.0;
  while (i > 0) {
    r += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return r;
}

// Halton points of [-1, 1]^d kept when inside the unit ball.
std::vector<Vec> ball_nodes(std::size_t d, std::size_t count) {
  static constexpr unsigned primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47};
  if (d > std::size(primes)) throw DomainViolation("body noise supported up to dimension 15");
  std::vector<Vec> nodes;
  nodes.reserve(count);
  Vec p(d);
  for (std::size_t i = 1; nodes.size() < count; ++i) {
    for (std::size_t c = 0; c < d; ++c) p[c] = 2.0 * radical_inverse(i, primes[c]) - 1.0;
    if (dot(p, p) <= 1.0) nodes.push_back(p);
  }
  return nodes;
}

}  // namespace

// ---------------------------------------------------------------------------

SpectralMeasure::SpectralMeasure(std::vector<SpectralAtom> atoms, bool normalize_weights)
    : atoms_(std::move(atoms)) {
  if (atoms_.empty()) throw ValidationError("spectral measure needs at least one atom");
  const std::size_t d = atoms_.front().dir.size();
  if (d == 0) throw ValidationError("spectral atom direction must be non-empty");
  double total = 0.0;
  for (auto& a : atoms_) {
    if (a.dir.size() != d) throw ValidationError("spectral atoms have mixed dimensions");
    const double n = norm2(a.dir);
    if (!(n > 0.0) || !std::isfinite(n)) throw ValidationError("spectral direction has zero norm");
    for (auto& x : a.dir) x /= n;
    if (!(a.weight > 0.0) || !std::isfinite(a.weight))
      throw ValidationError("spectral weights must be strictly positive");
    total += a.weight;
  }
  if (normalize_weights) {
    for (auto& a : atoms_) a.weight /= total;
  } else if (std::abs(total - 1.0) > 1e-12) {
    throw ValidationError("spectral weights must sum to 1");
  }
  cumulative_.resize(atoms_.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < atoms_.size(); ++k) cumulative_[k] = (acc += atoms_[k].weight);
  cumulative_.back() = 1.0;
}

Vec SpectralMeasure::mean_direction() const {
  Vec m(dim(), 0.0);
  for (const auto& a : atoms_)
    for (std::size_t i = 0; i < m.size(); ++i) m[i] += a.weight * a.dir[i];
  return m;
}

std::size_t SpectralMeasure::pick(double u) const {
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  return std::min<std::size_t>(it - cumulative_.begin(), atoms_.size() - 1);
}

// ---------------------------------------------------------------------------

IncrementModel::IncrementModel(double alpha, double xm, SpectralMeasure spectral,
                               double body_radius)
    : alpha_(alpha),
      xm_(xm),
      body_radius_(body_radius),
      tail_constant_(std::pow(xm, alpha)),
      spectral_(std::move(spectral)) {
  if (!(alpha > 1.0) || !std::isfinite(alpha)) throw ValidationError("tail index alpha must exceed 1");
  if (!(xm > 0.0) || !std::isfinite(xm)) throw ValidationError("Pareto scale xm must be positive");
  if (!(body_radius >= 0.0) || !std::isfinite(body_radius))
    throw ValidationError("body_radius must be non-negative");
  // c = eta - E[R] * mean direction; the body noise is centred.
  const Vec mean_dir = spectral_.mean_direction();
  shift_.resize(dim());
  for (std::size_t i = 0; i < dim(); ++i) shift_[i] = -1.0 - mean_radius() * mean_dir[i];
}

double IncrementModel::norm_tail(double u) const { return tail_constant_ * std::pow(u, -alpha_); }

double IncrementModel::radial_survival(double r) const {
  if (r <= xm_) return 1.0;
  if (std::isinf(r)) return 0.0;
  return std::pow(xm_ / r, alpha_);
}

double IncrementModel::sample_radius_above(double lower, Rng& rng) const {
  const double base = std::max(lower, xm_);
  return base * std::exp(-std::log(rng.uniform_pos()) / alpha_);
}

void IncrementModel::sample_ball(Rng& rng, std::span<double> out) const {
  double n2 = 0.0;
  for (auto& x : out) {
    x = rng.normal();
    n2 += x * x;
  }
  const double radius = std::pow(rng.uniform(), 1.0 / static_cast<double>(out.size()));
  const double scale = radius / std::sqrt(n2);
  for (auto& x : out) x *= scale;
}

void IncrementModel::sample(Rng& rng, std::span<double> out) const {
  const double r = xm_ * std::exp(-std::log(rng.uniform_pos()) / alpha_);
  const auto& theta = spectral_.atom(spectral_.size() == 1 ? 0 : spectral_.pick(rng.uniform())).dir;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = r * theta[i] + shift_[i];
  if (body_radius_ > 0.0) {
    Vec u(dim());
    sample_ball(rng, u);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += body_radius_ * u[i];
  }
}

Vec IncrementModel::sample(Rng& rng) const {
  Vec x(dim());
  sample(rng, x);
  return x;
}

std::vector<Vec> IncrementModel::covariance() const {
  if (!(alpha_ > 2.0)) throw DomainViolation("Var(X) is infinite for alpha <= 2");
  const std::size_t d = dim();
  const double er2 = alpha_ * xm_ * xm_ / (alpha_ - 2.0);
  const double er = mean_radius();
  const Vec mean_dir = spectral_.mean_direction();
  std::vector<Vec> cov(d, Vec(d, 0.0));
  for (const auto& a : spectral_.atoms())
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) cov[i][j] += er2 * a.weight * a.dir[i] * a.dir[j];
  const double ball = body_radius_ * body_radius_ / static_cast<double>(d + 2);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) cov[i][j] -= er * er * mean_dir[i] * mean_dir[j];
    cov[i][i] += ball;
  }
  return cov;
}

// ---------------------------------------------------------------------------

HalfSpaceProjection::HalfSpaceProjection(const IncrementModel& model, std::vector<Vec> normals)
    : model_(model), normals_(std::move(normals)) {
  const std::size_t k_atoms = model_.spectral().size();
  const std::size_t m = normals_.size();
  slopes_.resize(k_atoms * m);
  shifts_.resize(m);
  norms_.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    if (normals_[j].size() != model_.dim()) throw ValidationError("normal has wrong dimension");
    shifts_[j] = dot(model_.shift(), normals_[j]);
    norms_[j] = norm2(normals_[j]);
  }
  for (std::size_t k = 0; k < k_atoms; ++k)
    for (std::size_t j = 0; j < m; ++j)
      slopes_[k * m + j] = dot(model_.spectral().atom(k).dir, normals_[j]);
  if (!model_.pure_radial()) ball_nodes_ = ball_nodes(model_.dim(), kBallNodes);
}

HalfSpaceProjection::AtomEvent HalfSpaceProjection::atom_event(
    std::size_t k, std::span<const double> thresholds) const {
  const std::size_t m = normals_.size();
  AtomEvent ev{0.0, -kInf, kInf, false};
  for (std::size_t j = 0; j < m; ++j) {
    const double s = slopes_[k * m + j];
    const double gap = thresholds[j] - shifts_[j];
    if (s > 0.0) {
      ev.upper = std::min(ev.upper, gap / s);
    } else if (s < 0.0) {
      ev.lower = std::max(ev.lower, gap / s);
    } else if (gap < 0.0) {
      ev.all = true;
    }
  }
  const double xm = model_.xm();
  if (ev.all || ev.upper <= xm || ev.lower >= ev.upper) {
    ev.all = true;
    ev.prob = 1.0;
    return ev;
  }
  const double low_mass = ev.lower > xm ? 1.0 - model_.radial_survival(ev.lower) : 0.0;
  ev.prob = std::min(1.0, low_mass + model_.radial_survival(ev.upper));
  return ev;
}

double HalfSpaceProjection::radial_tail_prob(std::span<const double> thresholds) const {
  double p = 0.0;
  const auto& sp = model_.spectral();
  for (std::size_t k = 0; k < sp.size(); ++k) p += sp.atom(k).weight * atom_event(k, thresholds).prob;
  return std::clamp(p, 0.0, 1.0);
}

double HalfSpaceProjection::tail_union_prob(std::span<const double> thresholds) const {
  for (double u : thresholds)
    if (std::isnan(u)) throw DomainViolation("threshold is NaN");
  if (model_.pure_radial()) return radial_tail_prob(thresholds);

  const double eps = model_.body_radius();
  Vec shifted(thresholds.size());
  double acc = 0.0;
  for (const auto& node : ball_nodes_) {
    for (std::size_t j = 0; j < shifted.size(); ++j)
      shifted[j] = thresholds[j] - eps * dot(node, normals_[j]);
    acc += radial_tail_prob(shifted);
  }
  return std::clamp(acc / static_cast<double>(ball_nodes_.size()), 0.0, 1.0);
}

double HalfSpaceProjection::sample_radius_in(const AtomEvent& ev, Rng& rng) const {
  const double xm = model_.xm();
  const double alpha = model_.alpha();
  if (ev.all) return model_.sample_radius_above(xm, rng);
  const double low_mass = ev.lower > xm ? 1.0 - model_.radial_survival(ev.lower) : 0.0;
  const double high_mass = model_.radial_survival(ev.upper);
  if (rng.uniform() * (low_mass + high_mass) < low_mass) {
    // Inverse CDF of Pareto restricted to [xm, lower).
    const double v = rng.uniform() * low_mass;
    return xm * std::pow(1.0 - v, -1.0 / alpha);
  }
  return model_.sample_radius_above(ev.upper, rng);
}

void HalfSpaceProjection::sample_radial_conditional(std::span<const double> thresholds, Rng& rng,
                                                    std::span<double> out) const {
  const auto& sp = model_.spectral();
  const std::size_t k_atoms = sp.size();
  double total = 0.0;
  // Small fixed-size buffer; the atom count is tiny in practice.
  std::vector<AtomEvent> events(k_atoms);
  for (std::size_t k = 0; k < k_atoms; ++k) {
    events[k] = atom_event(k, thresholds);
    total += sp.atom(k).weight * events[k].prob;
  }
  if (!(total > 0.0)) throw ZeroMassRegion("conditioning event has probability zero");
  std::size_t k = 0;
  if (k_atoms > 1) {
    const double target = rng.uniform() * total;
    double acc = 0.0;
    std::size_t last_positive = 0;
    for (k = 0; k < k_atoms; ++k) {
      const double w = sp.atom(k).weight * events[k].prob;
      if (w <= 0.0) continue;
      last_positive = k;
      acc += w;
      if (target < acc) break;
    }
    if (k == k_atoms) k = last_positive;
  }
  const double r = sample_radius_in(events[k], rng);
  const auto& theta = sp.atom(k).dir;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = r * theta[i] + model_.shift()[i];
}

void HalfSpaceProjection::sample_conditional(std::span<const double> thresholds, Rng& rng,
                                             std::span<double> out) const {
  if (model_.pure_radial()) {
    sample_radial_conditional(thresholds, rng, out);
    return;
  }
  // Exact rejection over the body noise U. The acceptance probability is
  // P(radial event | U) / M with M the radial probability at the most
  // favourable shift of every threshold separately.
  const double eps = model_.body_radius();
  const std::size_t m = normals_.size();
  Vec best(m), shifted(m), u(model_.dim());
  for (std::size_t j = 0; j < m; ++j) best[j] = thresholds[j] - eps * norms_[j];
  const double bound = radial_tail_prob(best);
  if (!(bound > 0.0)) throw ZeroMassRegion("conditioning event has probability zero");
  for (;;) {
    model_.sample_ball(rng, u);
    for (std::size_t j = 0; j < m; ++j) shifted[j] = thresholds[j] - eps * dot(u, normals_[j]);
    const double p = radial_tail_prob(shifted);
    if (rng.uniform() * bound < p) {
      sample_radial_conditional(shifted, rng, out);
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += eps * u[i];
      return;
    }
  }
}

double HalfSpaceProjection::kappa(std::span<const double> levels) const {
  const std::size_t m = normals_.size();
  for (double l : levels)
    if (!(l > 0.0)) throw DomainViolation("kappa level must be positive");
  const auto& sp = model_.spectral();
  const double alpha = model_.alpha();
  double total = 0.0;
  for (std::size_t k = 0; k < sp.size(); ++k) {
    double best = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double s = slopes_[k * m + j];
      if (s > 0.0) best = std::max(best, s / levels[j]);
    }
    if (best > 0.0) total += sp.atom(k).weight * std::pow(best, alpha);
  }
  return total;
}

double HalfSpaceProjection::kappa_tail_integral(std::span<const double> levels, double t0) const {
  const std::size_t m = normals_.size();
  for (double l : levels)
    if (!(l + t0 > 0.0)) throw DomainViolation("kappa level must be positive");
  const auto& sp = model_.spectral();
  const double alpha = model_.alpha();
  std::vector<double> p, q;
  double total = 0.0;
  for (std::size_t k = 0; k < sp.size(); ++k) {
    p.clear();
    q.clear();
    for (std::size_t j = 0; j < m; ++j) {
      const double s = slopes_[k * m + j];
      if (s > 0.0) {
        p.push_back(levels[j] / s);
        q.push_back(1.0 / s);
      }
    }
    if (p.empty()) continue;
    // max_j (s_j / (L_j + t))^alpha = (min_j (L_j + t) / s_j)^-alpha.
    double atom_integral = 0.0;
    for (const auto& piece : lower_envelope(p, q, t0, kInf)) {
      const double lo = std::pow(piece.intercept + piece.slope * piece.lo, 1.0 - alpha);
      const double hi =
          std::isinf(piece.hi) ? 0.0 : std::pow(piece.intercept + piece.slope * piece.hi, 1.0 - alpha);
      atom_integral += (lo - hi) / (piece.slope * (alpha - 1.0));
    }
    total += sp.atom(k).weight * atom_integral;
  }
  return total;
}

double kappa_polar(const IncrementModel& model, const std::vector<Vec>& normals,
                   std::span<const double> offsets, double t, std::span<const double> z) {
  HalfSpaceProjection proj(model, normals);
  Vec levels(normals.size());
  for (std::size_t j = 0; j < normals.size(); ++j) {
    levels[j] = -dot(z, normals[j]) + offsets[j] + t;
    if (!(levels[j] > 0.0)) throw DomainViolation("-z^T v_j + a_j + t must be positive");
  }
  return proj.kappa(levels);
}

}  // namespace ruinsim
