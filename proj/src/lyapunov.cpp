#include "ruinsim/lyapunov.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <optional>

#include "ruinsim/envelope.hpp"
#include "ruinsim/stats.hpp"

namespace ruinsim {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kInnerSample = 20000;
using GaussKronrod = boost::math::quadrature::gauss_kronrod<double, 21>;

// Bisecting GK21 with a relative tolerance and an absolute floor.
template <class F>
double adaptive_gk(const F& f, double lo, double hi, double rel, double abs_floor, int depth) {
  double err = 0.0;
  const double v = GaussKronrod::integrate(f, lo, hi, 0, 0.0, &err);
  // Below ~1e-7 relative width, node rounding dominates the error estimate.
  if (depth == 0 || err <= std::max(rel * std::abs(v), abs_floor) ||
      hi - lo <= 1e-7 * std::abs(hi))
    return v;
  const double mid = 0.5 * (lo + hi);
  return adaptive_gk(f, lo, mid, rel, 0.5 * abs_floor, depth - 1) +
         adaptive_gk(f, mid, hi, rel, 0.5 * abs_floor, depth - 1);
}

double log_sum_exp_scaled(std::span<const double> terms, double c0) {
  const double mx = *std::max_element(terms.begin(), terms.end());
  double acc = 0.0;
  for (double t : terms) acc += std::exp((t - mx) / c0);
  return mx + c0 * std::log(acc);
}

}  // namespace

double MollifierParams::c0(double b, double alpha) const {
  return std::max(std::pow(b, (3.0 - alpha) / 2.0), c0_tilde);
}

void MollifierParams::validate() const {
  if (!(c0_tilde > 0.0)) throw ValidationError("mollifier.c0_tilde must be positive");
  if (!(delta0 > 0.0)) throw ValidationError("mollifier.delta0 must be positive");
  if (!(c1 > 1.0)) throw ValidationError("mollifier.c1 must exceed 1");
}

TunedConstants tuned_constants(double eps) {
  const double e1 = 1.0 + eps;
  return {1.0 / (e1 * e1), e1 * e1 * e1 * (1.0 + 4.0 * eps)};
}

double rho_b(const HalfSpaceSystem& system, double b, double c0, std::span<const double> s) {
  Vec terms(system.size());
  for (std::size_t j = 0; j < system.size(); ++j)
    terms[j] = dot(s, system.normals[j]) - system.offsets[j] * b;
  return log_sum_exp_scaled(terms, c0);
}

Vec softmax_weights(const HalfSpaceSystem& system, double b, double c0, std::span<const double> s) {
  Vec w(system.size());
  for (std::size_t j = 0; j < system.size(); ++j)
    w[j] = dot(s, system.normals[j]) - system.offsets[j] * b;
  const double mx = *std::max_element(w.begin(), w.end());
  double total = 0.0;
  for (auto& x : w) total += (x = std::exp((x - mx) / c0));
  for (auto& x : w) x /= total;
  return w;
}

Vec grad_rho(const HalfSpaceSystem& system, double b, double c0, std::span<const double> s) {
  const Vec w = softmax_weights(system, b, c0, s);
  Vec g(s.size(), 0.0);
  for (std::size_t j = 0; j < w.size(); ++j)
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += w[j] * system.normals[j][i];
  return g;
}

std::vector<Vec> hessian_rho(const HalfSpaceSystem& system, double b, double c0,
                             std::span<const double> s) {
  const Vec w = softmax_weights(system, b, c0, s);
  const std::size_t d = s.size();
  Vec g(d, 0.0);
  std::vector<Vec> h(d, Vec(d, 0.0));
  for (std::size_t j = 0; j < w.size(); ++j) {
    const Vec& v = system.normals[j];
    for (std::size_t i = 0; i < d; ++i) {
      g[i] += w[j] * v[i];
      for (std::size_t k = 0; k < d; ++k) h[i][k] += w[j] * v[i] * v[k];
    }
  }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t k = 0; k < d; ++k) h[i][k] = (h[i][k] - g[i] * g[k]) / c0;
  return h;
}

double d_mollify(double delta0, double x) {
  if (x <= -delta0) return 0.0;
  if (x >= delta0) return x;
  return (x + delta0) * (x + delta0) / (4.0 * delta0);
}

double d_prime(double delta0, double x) {
  if (x <= -delta0) return 0.0;
  if (x >= delta0) return 1.0;
  return (x + delta0) / (2.0 * delta0);
}

std::vector<Vec> draw_increments(const IncrementModel& model, std::size_t n, Rng& rng) {
  std::vector<Vec> xs(n, Vec(model.dim()));
  for (auto& x : xs) model.sample(rng, x);
  return xs;
}

// ---------------------------------------------------------------------------

Mollifier::Mollifier(IncrementModel model, HalfSpaceSystem system, double b,
                     MollifierParams params)
    : model_(std::move(model)),
      system_(std::move(system)),
      b_(b),
      params_(params),
      c0_(params.c0(b, model_.alpha())) {
  params_.validate();
}

std::vector<double> Mollifier::H_samples(std::span<const double> s, std::span<const Vec> xs) const {
  std::vector<double> out(xs.size());
  Vec y(s.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t c = 0; c < y.size(); ++c) y[c] = s[c] + xs[i][c];
    out[i] = d_mollify(params_.delta0, rho(y));
  }
  return out;
}

Estimate Mollifier::H_mc(std::span<const double> s, std::span<const Vec> xs) const {
  const auto vals = H_samples(s, xs);
  const auto ms = stats::mean_se(vals);
  return {ms.mean, ms.se};
}

std::vector<Estimate> Mollifier::grad_H_mc(std::span<const double> s,
                                           std::span<const Vec> xs) const {
  const std::size_t d = s.size();
  std::vector<std::vector<double>> comps(d, std::vector<double>(xs.size()));
  Vec y(d);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t c = 0; c < d; ++c) y[c] = s[c] + xs[i][c];
    const double dp = d_prime(params_.delta0, rho(y));
    const Vec g = dp > 0.0 ? grad_rho(system_, b_, c0_, y) : Vec(d, 0.0);
    for (std::size_t c = 0; c < d; ++c) comps[c][i] = dp * g[c];
  }
  std::vector<Estimate> out(d);
  for (std::size_t c = 0; c < d; ++c) {
    const auto ms = stats::mean_se(comps[c]);
    out[c] = {ms.mean, ms.se};
  }
  return out;
}

double Mollifier::H_quadrature(std::span<const double> s) const {
  if (!model_.pure_radial()) throw DomainViolation("H_b quadrature requires the pure-radial model");

  const std::size_t m = system_.size();
  const double alpha = model_.alpha();
  const double xm = model_.xm();
  const double delta0 = params_.delta0;
  const double spread = c0_ * std::log(static_cast<double>(m));
  const double zero_level = -delta0 - spread;

  Vec A(m), B(m), terms(m);
  for (std::size_t j = 0; j < m; ++j)
    A[j] = dot(s, system_.normals[j]) + dot(model_.shift(), system_.normals[j]) - system_.offsets[j] * b_;

  double total = 0.0;
  for (std::size_t k = 0; k < model_.spectral().size(); ++k) {
    const auto& theta = model_.spectral().atom(k).dir;
    for (std::size_t j = 0; j < m; ++j) B[j] = dot(theta, system_.normals[j]);

    auto rho_at = [&](double r) {
      for (std::size_t j = 0; j < m; ++j) terms[j] = A[j] + B[j] * r;
      return log_sum_exp_scaled(terms, c0_);
    };

    const auto pieces = upper_envelope(A, B, xm, kInf);
    std::vector<double> cuts{xm};
    for (const auto& p : pieces) {
      if (!std::isinf(p.hi)) cuts.push_back(p.hi);
      if (p.slope != 0.0) {
        for (double level : {zero_level, -delta0, delta0}) {
          const double r = (level - p.intercept) / p.slope;
          if (r > p.lo && r < p.hi) cuts.push_back(r);
        }
      }
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    // Exact locations where rho crosses +-delta0 (second-derivative jumps of d).
    std::vector<double> refined = cuts;
    const double far = std::max(1.0, cuts.back()) * 1e12;
    for (std::size_t c = 0; c < cuts.size(); ++c) {
      const double lo = cuts[c];
      const double hi = c + 1 < cuts.size() ? cuts[c + 1] : far;
      for (double level : {-delta0, delta0}) {
        double flo = rho_at(lo) - level;
        const double fhi = rho_at(hi) - level;
        if ((flo < 0.0) == (fhi < 0.0)) continue;
        double a = lo, bnd = hi;
        for (int it = 0; it < 200 && bnd - a > 1e-14 * std::max(1.0, std::abs(bnd)); ++it) {
          const double mid = 0.5 * (a + bnd);
          const double fm = rho_at(mid) - level;
          if ((fm < 0.0) == (flo < 0.0)) {
            a = mid;
            flo = fm;
          } else {
            bnd = mid;
          }
        }
        refined.push_back(0.5 * (a + bnd));
      }
    }
    std::sort(refined.begin(), refined.end());
    refined.erase(std::unique(refined.begin(), refined.end()), refined.end());

    // Asymptote of rho along the ray: the steepest lines plus a constant.
    const double top_slope = *std::max_element(B.begin(), B.end());
    double top_icpt = -kInf;
    for (std::size_t j = 0; j < m; ++j)
      if (B[j] == top_slope) top_icpt = std::max(top_icpt, A[j]);
    double tie_sum = 0.0;
    for (std::size_t j = 0; j < m; ++j)
      if (B[j] == top_slope) tie_sum += std::exp((A[j] - top_icpt) / c0_);
    const double asym_icpt = top_icpt + c0_ * std::log(tie_sum);
    auto asymptote = [&](double r) { return asym_icpt + top_slope * r; };

    const double dens = alpha * std::pow(xm, alpha);
    auto integrand = [&](double r) {
      return d_mollify(delta0, rho_at(r)) * dens * std::pow(r, -alpha - 1.0);
    };
    auto segment = [&](double lo, double hi) {
      // Slivers left by root refinement: adaptive refinement only chases roundoff.
      if (hi - lo <= 1e-9 * hi) return (hi - lo) * integrand(0.5 * (lo + hi));
      // Absolute floor: rounding of rho near the +-delta0 crossings bounds the
      // attainable accuracy at about 1e-13 delta0 per unit of mass.
      const double mass = model_.radial_survival(lo) - model_.radial_survival(hi);
      const double floor_tol = 1e-13 * delta0 * mass;
      return adaptive_gk(integrand, lo, hi, 1e-11, floor_tol, 12);
    };
    // int_R^inf d(asymptote) dF once rho has merged with its asymptote.
    auto closed_tail = [&](double R) -> std::optional<double> {
      const double L = asymptote(R);
      if (top_slope >= 0.0 && L >= delta0)
        return asym_icpt * model_.radial_survival(R) +
               top_slope * dens / (alpha - 1.0) * std::pow(R, 1.0 - alpha);
      if (top_slope <= 0.0 && L <= -delta0) return 0.0;
      if (top_slope == 0.0) return d_mollify(delta0, L) * model_.radial_survival(R);
      return std::nullopt;
    };

    double atom_total = 0.0;
    const double floor_level = -delta0 * (1.0 - 1e-9);
    for (std::size_t c = 0; c + 1 < refined.size(); ++c) {
      const double lo = refined[c], hi = refined[c + 1];
      // rho is convex in r, so it stays below -delta0 between two such points.
      if (rho_at(lo) <= floor_level && rho_at(hi) <= floor_level) continue;
      atom_total += segment(lo, hi);
    }
    // Unbounded piece: doubling chunks until rho is within rounding of its
    // asymptote, then the closed-form remainder.
    double R = refined.back();
    for (int chunk = 0; chunk < 400; ++chunk) {
      const double gap = std::abs(rho_at(R) - asymptote(R));
      if (gap <= 1e-13 * std::max(1.0, std::abs(asymptote(R)))) {
        if (const auto tail = closed_tail(R)) {
          atom_total += *tail;
          break;
        }
      }
      if (model_.radial_survival(R) == 0.0) break;
      atom_total += segment(R, 2.0 * R);
      R *= 2.0;
    }
    total += model_.spectral().atom(k).weight * atom_total;
  }
  return total;
}

double Mollifier::g(std::span<const double> s) const {
  double h;
  if (model_.pure_radial()) {
    h = H_quadrature(s);
  } else {
    static thread_local std::vector<Vec> inner;
    if (inner.size() != kInnerSample || inner.front().size() != model_.dim()) {
      Rng rng(0x6a09e667f3bcc909ULL);
      inner = draw_increments(model_, kInnerSample, rng);
    }
    h = H_mc(s, inner).value;
  }
  return std::min(params_.c1 * h * h, 1.0);
}

double Mollifier::saturation_level(std::span<const double> direction) const {
  Vec s(direction.size());
  auto g_at = [&](double lambda) {
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = lambda * direction[i];
    return g(s);
  };
  double hi = b_;
  int grow = 0;
  while (g_at(hi) < 1.0) {
    hi *= 2.0;
    if (++grow > 60) return kInf;
  }
  double lo = 0.0;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    (g_at(mid) < 1.0 ? lo : hi) = mid;
  }
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = hi * direction[i];
  return system_.r(b_, s);
}

// ---------------------------------------------------------------------------

bool in_drift_region(const MixtureKernel& kernel, std::span<const double> s) {
  const double b = kernel.b();
  return kernel.system().r(b, s) <= -kernel.params().delta2 * b &&
         !gamma_exit(kernel.spec().gamma, b, s);
}

DriftResult drift_check(const MixtureKernel& kernel, const Mollifier& mollifier,
                        std::span<const double> s, std::size_t n_mc, Rng& rng) {
  if (!in_drift_region(kernel, s))
    throw PreconditionViolation("state outside the drift region {r_b <= -delta2 b, not in b Gamma}");
  DriftResult res;
  res.g = mollifier.g(s);
  if (!(res.g < 1.0)) throw PreconditionViolation("g_b(s) = 1: Lyapunov function saturated");
  if (n_mc < 2) throw ValidationError("n_mc must be at least 2");

  const StateEval ev = kernel.evaluate(s);
  res.p = ev.p;
  res.region_prob = ev.region_prob;
  const std::size_t d = s.size();
  const auto& system = kernel.system();
  Vec x(d), y(d);

  // J1 = P E[g(s+X)/g(s) | region] * P / (p + (1 - p) P).
  std::vector<double> inside(n_mc);
  for (auto& val : inside) {
    kernel.projection().sample_conditional(ev.thresholds, rng, x);
    for (std::size_t i = 0; i < d; ++i) y[i] = s[i] + x[i];
    val = mollifier.g(y) / res.g;
  }
  const double P = ev.region_prob;
  const double factor = P > 0.0 ? P / (ev.p + (1.0 - ev.p) * P) : 0.0;
  const auto j1 = stats::mean_se(inside);
  res.J1 = P * j1.mean * factor;
  const double se1 = P * j1.se * factor;

  // (1 - p) J2 = E[g(s+X)/g(s); s+X outside the region].
  std::vector<double> outside(n_mc);
  for (auto& val : outside) {
    kernel.model().sample(rng, x);
    bool in_region = false;
    for (std::size_t j = 0; j < system.size() && !in_region; ++j)
      in_region = dot(x, system.normals[j]) > ev.thresholds[j];
    if (in_region) {
      val = 0.0;
      continue;
    }
    for (std::size_t i = 0; i < d; ++i) y[i] = s[i] + x[i];
    val = mollifier.g(y) / res.g;
  }
  const auto j2 = stats::mean_se(outside);
  res.J2_scaled = j2.mean;
  if (ev.p >= 1.0) {
    res.J2 = j2.mean > 0.0 ? kInf : 0.0;
    res.sum = res.J1 + res.J2;
    res.std_error = kInf;
    return res;
  }
  res.J2 = j2.mean / (1.0 - ev.p);
  const double se2 = j2.se / (1.0 - ev.p);
  res.sum = res.J1 + res.J2;
  res.std_error = std::sqrt(se1 * se1 + se2 * se2);
  return res;
}

}  // namespace ruinsim
