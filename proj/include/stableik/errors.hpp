#ifndef STABLEIK_ERRORS_HPP_
#define STABLEIK_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace stableik {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Unknown frame, end-effector, or joint name.
class LookupError : public Error {
public:
  using Error::Error;
};

/// Model with zero total mass or otherwise unusable geometry.
class DegenerateModelError : public Error {
public:
  using Error::Error;
};

/// ZMP denominator vanished (free fall or near it).
class DegenerateDynamicsError : public Error {
public:
  using Error::Error;
};

/// Contact points do not span a polygon.
class DegeneratePolygonError : public Error {
public:
  using Error::Error;
};

/// Pseudo-inverse requested at a singular configuration.
class SingularityError : public Error {
public:
  using Error::Error;
};

/// Matrix dimensions incompatible with the requested operation.
class ShapeError : public Error {
public:
  using Error::Error;
};

/// Batch statistics requested on a batch too small to provide them.
class StatisticsError : public Error {
public:
  using Error::Error;
};

/// Backward called with a cache that does not match the network state.
class CacheError : public Error {
public:
  using Error::Error;
};

/// step() on a finished or unstarted episode.
class EpisodeLifecycleError : public Error {
public:
  using Error::Error;
};

/// Rejection sampling could not find a valid configuration.
class ModelInfeasibleError : public Error {
public:
  using Error::Error;
};

/// Malformed input file; message carries the line number.
class ParseError : public Error {
public:
  using Error::Error;
};

/// Invalid or inconsistent configuration.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// Filesystem failure.
class IoError : public Error {
public:
  using Error::Error;
};

/// NaN or Inf encountered where training must stay finite.
class NumericalError : public Error {
public:
  using Error::Error;
};

}  // namespace stableik

#endif  // STABLEIK_ERRORS_HPP_
