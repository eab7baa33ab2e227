#pragma once

#include <stdexcept>
#include <string>

namespace rdsens {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid user-supplied configuration (bad flags, malformed files, bad grids).
struct ConfigError : Error {
  using Error::Error;
};

/// Model data violates a structural invariant (shapes, domain membership,
/// inconsistent Jacobians, inapplicable estimator).
struct ModelError : Error {
  using Error::Error;
};

struct GeometryError : Error {
  using Error::Error;
};

/// A point handed to an active-set query lies outside the domain beyond tolerance.
struct PointOutsideDomain : GeometryError {
  using GeometryError::GeometryError;
};

/// The complementarity solve found no feasible active set.
struct NoFeasibleProjection : GeometryError {
  using GeometryError::GeometryError;
};

/// An active-set system was numerically rank deficient during projection.
struct RankDeficientActiveSet : GeometryError {
  using GeometryError::GeometryError;
};

/// The normal/direction system of an active set is numerically singular.
struct SingularActiveSystem : GeometryError {
  using GeometryError::GeometryError;
};

/// Diffusion matrix a = sigma*sigma^T not invertible where the likelihood
/// ratio weight needs it.
struct SingularDiffusion : Error {
  using Error::Error;
};

}  // namespace rdsens
