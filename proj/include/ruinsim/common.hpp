#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ruinsim {

using Vec = std::vector<double>;

inline double dot(std::span<const double> x, std::span<const double> y) {
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
  return acc;
}

inline double norm2(std::span<const double> x) { return std::sqrt(dot(x, x)); }

/// eta^T s for the drift eta = -1 (all components).
inline double eta_dot(std::span<const double> s) {
  return -std::accumulate(s.begin(), s.end(), 0.0);
}

// Error hierarchy. Every failure the library reports derives from Error so
// the CLI can map it to exit status 1.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define RUINSIM_ERROR(Name)                  \
  struct Name : Error {                      \
    using Error::Error;                      \
  }

RUINSIM_ERROR(ZeroMassRegion);
RUINSIM_ERROR(DomainViolation);
RUINSIM_ERROR(InconsistentTransition);
RUINSIM_ERROR(AbortOverflow);
RUINSIM_ERROR(InfeasibleOracle);
RUINSIM_ERROR(PreconditionViolation);
RUINSIM_ERROR(InsufficientSample);
RUINSIM_ERROR(SchemaError);
RUINSIM_ERROR(ValidationError);

#undef RUINSIM_ERROR

/// A target direction violating eta^T v < 0; reported as a validation failure.
struct DegenerateDirection : ValidationError {
  using ValidationError::ValidationError;
};

}  // namespace ruinsim
