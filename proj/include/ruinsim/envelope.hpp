#pragma once

#include <span>
#include <vector>

namespace ruinsim {

/// One affine piece `intercept + slope * x` of a pointwise max (or min) of
/// lines, valid on [lo, hi]. `hi` may be +infinity.
struct AffinePiece {
  double lo;
  double hi;
  double intercept;
  double slope;
  std::size_t index;  ///< which input line is active
};

/// Upper envelope max_j (intercepts[j] + slopes[j] x) on [lo, hi].
std::vector<AffinePiece> upper_envelope(std::span<const double> intercepts,
                                        std::span<const double> slopes, double lo, double hi);

/// Lower envelope min_j (intercepts[j] + slopes[j] x) on [lo, hi].
std::vector<AffinePiece> lower_envelope(std::span<const double> intercepts,
                                        std::span<const double> slopes, double lo, double hi);

}  // namespace ruinsim
