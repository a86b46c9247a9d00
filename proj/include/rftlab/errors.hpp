#ifndef RFTLAB_ERRORS_HPP
#define RFTLAB_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace rftlab {

// Base class for all errors thrown by this library.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Invalid numeric argument (out-of-range probability, alpha, ratio, ...).
struct DomainError : Error {
  explicit DomainError(const std::string& what) : Error(what) {}
};

// Mismatched vector sizes.
struct ShapeError : Error {
  explicit ShapeError(const std::string& what) : Error(what) {}
};

// Empty input where at least one element is required.
struct EmptyInput : Error {
  explicit EmptyInput(const std::string& what) : Error(what) {}
};

// Policy/reference built from different model configurations.
struct ConfigMismatch : Error {
  explicit ConfigMismatch(const std::string& what) : Error(what) {}
};

// Fewer than two rollouts in a group.
struct GroupTooSmall : Error {
  explicit GroupTooSmall(const std::string& what) : Error(what) {}
};

// Rollouts sampled from a policy version other than the one being updated.
struct StaleRollouts : Error {
  explicit StaleRollouts(const std::string& what) : Error(what) {}
};

// Requested value outside the representable range of the inverse map.
struct OutOfRange : Error {
  explicit OutOfRange(const std::string& what) : Error(what) {}
};

// Root bracket failed to contain a sign change.
struct BracketError : Error {
  explicit BracketError(const std::string& what) : Error(what) {}
};

// Iteration cap reached before convergence.
struct NonConvergence : Error {
  explicit NonConvergence(const std::string& what) : Error(what) {}
};

// Rollout with no scoreable response.
struct EmptyResponse : Error {
  explicit EmptyResponse(const std::string& what) : Error(what) {}
};

// File or stream could not be read/written/parsed.
struct IoError : Error {
  explicit IoError(const std::string& what) : Error(what) {}
};

}  // namespace rftlab

#endif
