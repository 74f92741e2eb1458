#include "ruinsim/limits.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ruinsim/estimator.hpp"
#include "ruinsim/stats.hpp"

namespace ruinsim {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

HazardTable::HazardTable(const IncrementModel& model, const HalfSpaceSystem& system, double a,
                         double theta, GridSpec grid)
    : projection_(model, system.normals), offsets_(system.offsets) {
  if (!(a > 0.0 && a <= 1.0)) throw ValidationError("contraction a must lie in (0, 1]");
  if (!(theta >= 0.0 && theta <= 1.0)) throw ValidationError("theta must lie in [0, 1]");
  if (!(grid.t_min > 0.0 && grid.t_max > grid.t_min && grid.points >= 2))
    throw ValidationError("invalid hazard grid");
  exponent_ = theta * std::pow(a, -model.alpha());
  tail0_ = projection_.kappa_tail_integral(offsets_, 0.0);
  if (!(tail0_ > 0.0)) throw ZeroMassRegion("limit measure of the target is zero");

  t_.push_back(0.0);
  const double step = std::log(grid.t_max / grid.t_min) / static_cast<double>(grid.points - 1);
  for (std::size_t i = 0; i < grid.points; ++i)
    t_.push_back(grid.t_min * std::exp(step * static_cast<double>(i)));
  t_.back() = grid.t_max;

  Vec levels(offsets_.size());
  for (double t : t_) {
    for (std::size_t j = 0; j < levels.size(); ++j) levels[j] = offsets_[j] + t;
    const double k = projection_.kappa(levels);
    const double tail = projection_.kappa_tail_integral(offsets_, t);
    kappa_.push_back(k);
    tail_.push_back(tail);
    hazard_.push_back(exponent_ * k / tail);
    survival_.push_back(std::exp(exponent_ * (std::log(tail) - std::log(tail0_))));
  }
}

double HazardTable::survival_at(double t) const {
  if (t <= 0.0) return 1.0;
  if (std::isinf(t)) return 0.0;
  const double tail = projection_.kappa_tail_integral(offsets_, t);
  return std::exp(exponent_ * (std::log(tail) - std::log(tail0_)));
}

double HazardTable::hazard_at(double t) const {
  Vec levels(offsets_.size());
  for (std::size_t j = 0; j < levels.size(); ++j) levels[j] = offsets_[j] + t;
  return exponent_ * projection_.kappa(levels) / projection_.kappa_tail_integral(offsets_, t);
}

Vec HazardTable::trapezoid_survival() const {
  Vec out(t_.size());
  double cum = 0.0;
  out[0] = 1.0;
  for (std::size_t i = 1; i < t_.size(); ++i) {
    cum += 0.5 * (hazard_[i - 1] + hazard_[i]) * (t_[i] - t_[i - 1]);
    out[i] = std::exp(-cum);
  }
  return out;
}

double HazardTable::sample(Rng& rng) const {
  const double u = rng.uniform_pos();
  if (u >= 1.0 || exponent_ == 0.0) return exponent_ == 0.0 ? kInf : 0.0;
  double lo = 0.0, hi = 1.0;
  while (survival_at(hi) > u) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) return kInf;
  }
  double s_lo = survival_at(lo), s_hi = survival_at(hi);
  while (s_lo - s_hi > 1e-8 && hi - lo > 1e-15 * hi) {
    const double mid = 0.5 * (lo + hi);
    const double s_mid = survival_at(mid);
    if (s_mid > u) {
      lo = mid;
      s_lo = s_mid;
    } else {
      hi = mid;
      s_hi = s_mid;
    }
  }
  return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------

OvershootLaw::OvershootLaw(const IncrementModel& model, const HalfSpaceSystem& star, double z)
    : model_(model), z_(z) {
  if (!(z >= 0.0)) throw ValidationError("overshoot level z must be non-negative");
  const auto& sp = model_.spectral();
  const double alpha = model_.alpha();
  double total = 0.0;
  for (std::size_t k = 0; k < sp.size(); ++k) {
    double rho = kInf;
    for (std::size_t j = 0; j < star.size(); ++j) {
      const double slope = dot(sp.atom(k).dir, star.normals[j]);
      if (slope > 0.0) rho = std::min(rho, (star.offsets[j] + z) / slope);
    }
    rho_.push_back(rho);
    const double w = std::isinf(rho) ? 0.0 : sp.atom(k).weight * std::pow(rho, -alpha);
    weights_.push_back(w);
    total += w;
  }
  if (!(total > 0.0)) throw ZeroMassRegion("no atom reaches the target");
  double acc = 0.0;
  for (auto& w : weights_) {
    w /= total;
    cumulative_.push_back(acc += w);
  }
}

Vec OvershootLaw::sample(Rng& rng) const {
  const double u = rng.uniform();
  std::size_t k = std::upper_bound(cumulative_.begin(), cumulative_.end(), u) - cumulative_.begin();
  k = std::min(k, cumulative_.size() - 1);
  while (weights_[k] == 0.0 && k > 0) --k;
  const double r = rho_[k] * std::pow(rng.uniform_pos(), -1.0 / model_.alpha());
  Vec y = model_.spectral().atom(k).dir;
  for (auto& c : y) c *= r;
  return y;
}

double OvershootLaw::radius_pit(std::size_t k, double r) const {
  return std::pow(rho_[k] / r, model_.alpha());
}

std::pair<std::size_t, double> decompose_increment(const IncrementModel& model,
                                                   std::span<const double> x) {
  Vec y(x.begin(), x.end());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= model.shift()[i];
  const double r = norm2(y);
  std::size_t best = 0;
  double best_dot = -kInf;
  for (std::size_t k = 0; k < model.spectral().size(); ++k) {
    const double c = dot(y, model.spectral().atom(k).dir);
    if (c > best_dot) {
      best_dot = c;
      best = k;
    }
  }
  return {best, r};
}

double ks_truncated(std::vector<double> sample, const HazardTable& law, double t_max) {
  if (sample.empty()) throw InsufficientSample("empty sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  std::size_t below = 0;
  for (std::size_t i = 0; i < sample.size() && sample[i] <= t_max; ++i) {
    const double f = law.cdf(sample[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    below = i + 1;
  }
  d = std::max(d, std::abs(static_cast<double>(below) / n - law.cdf(t_max)));
  return d;
}

std::size_t ks_conditional(std::span<const double> sample, const HazardTable& law, double t_max,
                           double& statistic) {
  std::vector<double> kept;
  for (double x : sample)
    if (x <= t_max) kept.push_back(x);
  const double mass = law.cdf(t_max);
  if (kept.empty() || !(mass > 0.0)) {
    statistic = 1.0;
    return kept.size();
  }
  statistic = stats::ks_one_sample(kept, [&](double t) { return std::min(law.cdf(t), mass) / mass; });
  return kept.size();
}

// ---------------------------------------------------------------------------

LimitLawReport limit_law_tests(const MixtureKernel& kernel, std::span<const PathRecord> paths,
                               const LimitTestOptions& opt) {
  const IncrementModel& model = kernel.model();
  const double b = kernel.b();
  const std::size_t d = model.dim();
  LimitLawReport rep;
  rep.b = b;
  rep.n_paths = paths.size();

  std::vector<const PathRecord*> hits;
  for (const auto& p : paths)
    if (p.stop_cause == StopCause::HitA) hits.push_back(&p);
  rep.n_conditioned = hits.size();
  if (hits.size() < opt.min_paths)
    throw InsufficientSample("only " + std::to_string(hits.size()) +
                             " conditioned paths; at least " + std::to_string(opt.min_paths) +
                             " required");

  const HazardTable zstar(model, kernel.star());
  const HazardTable zat(model, kernel.system(), kernel.params().a, kernel.params().theta);
  auto cdf_of = [](const HazardTable& h) { return [&h](double t) { return h.cdf(t); }; };

  // Paths leave b Gamma near T/b = gamma / d, so T/b is compared with the
  // reference laws conditioned on t <= gamma / (2d).
  rep.t_max = kernel.spec().gamma / (2.0 * static_cast<double>(d));

  // T/b against Z*, after resampling by weight.
  {
    std::vector<double> w, tb;
    for (const auto* p : hits) {
      w.push_back(p->weight());
      tb.push_back(static_cast<double>(p->steps) / b);
    }
    rep.ess = effective_sample_size(w);
    const std::size_t count =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(rep.ess)));
    Rng rng(opt.seed);
    std::vector<double> res;
    for (std::size_t k : resample_indices(w, count, rng)) res.push_back(tb[k]);
    const double n_eff = 1.0 / (1.0 / rep.ess + 1.0 / static_cast<double>(count));
    const std::size_t kept = ks_conditional(res, zstar, rep.t_max, rep.ks_T_zstar.statistic);
    rep.ks_T_zstar.n = n_eff * static_cast<double>(kept) / static_cast<double>(res.size());
    rep.ks_T_zstar.critical = stats::ks_critical(opt.level, rep.ks_T_zstar.n);
    rep.ks_T_zstar.pass = rep.ks_T_zstar.statistic < rep.ks_T_zstar.critical;

    rep.ks_T_zat.n = static_cast<double>(ks_conditional(tb, zat, rep.t_max, rep.ks_T_zat.statistic));
    rep.ks_T_zat.critical = stats::ks_critical(opt.level, rep.ks_T_zat.n);
    rep.ks_T_zat.pass = rep.ks_T_zat.statistic < rep.ks_T_zat.critical;
  }

  // N_b / b against Z_{a,theta} on t <= gamma / (2d), over all paths.
  {
    std::vector<double> nb;
    for (const auto& p : paths) {
      if (p.n_jump) {
        nb.push_back(static_cast<double>(*p.n_jump) / b);
      } else {
        if (static_cast<double>(p.steps) / b <= rep.t_max) ++rep.ks_N_censored;
        nb.push_back(kInf);
      }
    }
    rep.ks_N.statistic = ks_truncated(nb, zat, rep.t_max);
    rep.ks_N.n = static_cast<double>(nb.size());
    rep.ks_N.critical = stats::ks_critical(opt.level, rep.ks_N.n);
    rep.ks_N.pass = rep.ks_N.statistic < rep.ks_N.critical;
  }

  // Overshoot X_T / b against Y*(T / b).
  {
    const std::size_t atoms = model.spectral().size();
    Vec expected(atoms, 0.0), observed(atoms, 0.0);
    std::vector<double> pits;
    for (const auto* p : hits) {
      const OvershootLaw law(model, kernel.star(), static_cast<double>(p->steps) / b);
      const auto [k, r] = decompose_increment(model, p->last_increment);
      for (std::size_t q = 0; q < atoms; ++q) expected[q] += law.weights()[q];
      observed[k] += 1.0;
      if (!std::isinf(law.radii()[k])) pits.push_back(std::clamp(law.radius_pit(k, r / b), 0.0, 1.0));
    }
    double chi2 = 0.0;
    std::size_t cells = 0;
    bool stray = false;
    for (std::size_t q = 0; q < atoms; ++q) {
      if (expected[q] > 0.0) {
        chi2 += (observed[q] - expected[q]) * (observed[q] - expected[q]) / expected[q];
        ++cells;
      } else if (observed[q] > 0.0) {
        stray = true;
      }
    }
    rep.chi2_overshoot = chi2;
    rep.chi2_dof = cells > 0 ? static_cast<double>(cells - 1) : 0.0;
    if (rep.chi2_dof > 0.0) {
      rep.chi2_critical = stats::chi2_quantile(opt.level, rep.chi2_dof);
      rep.overshoot_atoms_pass = !stray && chi2 < rep.chi2_critical;
    } else {
      rep.chi2_critical = 0.0;
      rep.overshoot_atoms_pass = !stray;
    }
    if (!pits.empty()) {
      rep.overshoot_radius.statistic =
          stats::ks_one_sample(pits, [](double u) { return std::clamp(u, 0.0, 1.0); });
      rep.overshoot_radius.n = static_cast<double>(pits.size());
      rep.overshoot_radius.critical = stats::ks_critical(opt.level, rep.overshoot_radius.n);
      rep.overshoot_radius.pass = rep.overshoot_radius.statistic < rep.overshoot_radius.critical;
    }
  }

  // Path shape before the jump: CLT for alpha > 2, LLN otherwise.
  for (const auto* p : hits)
    if (p->states.size() != p->steps + 1)
      throw PreconditionViolation("limit-law tests need recorded path states");

  rep.clt_applicable = model.alpha() > 2.0;
  if (rep.clt_applicable) {
    const auto cov = model.covariance();
    std::vector<std::vector<double>> vals(d);
    for (const auto* p : hits) {
      const double T = static_cast<double>(p->steps);
      const auto k = static_cast<std::size_t>(std::floor(opt.u * T));
      const double scale = std::sqrt(opt.u * T);
      for (std::size_t i = 0; i < d; ++i)
        vals[i].push_back((p->states[k][i] + static_cast<double>(k)) / scale);
    }
    for (std::size_t i = 0; i < d; ++i) {
      KsResult r;
      r.n = static_cast<double>(vals[i].size());
      r.critical = stats::ks_critical(opt.level, r.n);
      if (cov[i][i] <= 1e-14) {
        double mx = 0.0;
        for (double v : vals[i]) mx = std::max(mx, std::abs(v));
        r.statistic = mx > 1e-9 ? 1.0 : 0.0;
      } else {
        const double sd = std::sqrt(cov[i][i]);
        r.statistic = stats::ks_one_sample(vals[i], [sd](double x) { return stats::normal_cdf(x, 0.0, sd); });
      }
      r.pass = r.statistic < r.critical;
      rep.ks_clt.push_back(r);
    }
  }

  {
    std::size_t exceed = 0;
    for (const auto* p : hits) {
      const double T = static_cast<double>(p->steps);
      double sup = 0.0;
      for (std::size_t n = 0; n < p->steps; ++n) {
        double acc = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
          const double e = (p->states[n][i] + static_cast<double>(n)) / T;
          acc += e * e;
        }
        sup = std::max(sup, std::sqrt(acc));
      }
      if (sup > opt.lln_eps) ++exceed;
    }
    rep.lln_fraction = static_cast<double>(exceed) / static_cast<double>(hits.size());
    rep.lln_pass = rep.lln_fraction <= opt.lln_max_fraction;
  }

  bool shape = rep.lln_pass;
  if (rep.clt_applicable)
    shape = std::all_of(rep.ks_clt.begin(), rep.ks_clt.end(), [](const KsResult& r) { return r.pass; });
  rep.pass = rep.ks_N.pass && rep.overshoot_atoms_pass && shape;
  return rep;
}

}  // namespace ruinsim
