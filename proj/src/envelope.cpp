#include "ruinsim/envelope.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ruinsim {

std::vector<AffinePiece> upper_envelope(std::span<const double> intercepts,
                                        std::span<const double> slopes, double lo, double hi) {
  const std::size_t n = intercepts.size();
  std::vector<AffinePiece> out;
  if (n == 0 || !(hi > lo)) return out;

  std::vector<double> cuts{lo};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double ds = slopes[i] - slopes[j];
      if (ds == 0.0) continue;
      const double x = (intercepts[j] - intercepts[i]) / ds;
      if (x > lo && x < hi) cuts.push_back(x);
    }
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  cuts.push_back(hi);

  for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
    const double a = cuts[c];
    const double b = cuts[c + 1];
    const double probe = std::isinf(b) ? a + 1.0 + std::abs(a) : 0.5 * (a + b);
    std::size_t best = 0;
    double best_val = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      const double v = intercepts[j] + slopes[j] * probe;
      if (v > best_val) {
        best_val = v;
        best = j;
      }
    }
    if (!out.empty() && out.back().index == best) {
      out.back().hi = b;
    } else {
      out.push_back({a, b, intercepts[best], slopes[best], best});
    }
  }
  return out;
}

std::vector<AffinePiece> lower_envelope(std::span<const double> intercepts,
                                        std::span<const double> slopes, double lo, double hi) {
  std::vector<double> ni(intercepts.begin(), intercepts.end());
  std::vector<double> ns(slopes.begin(), slopes.end());
  for (auto& v : ni) v = -v;
  for (auto& v : ns) v = -v;
  auto pieces = upper_envelope(ni, ns, lo, hi);
  for (auto& p : pieces) {
    p.intercept = -p.intercept;
    p.slope = -p.slope;
  }
  return pieces;
}

}  // namespace ruinsim
