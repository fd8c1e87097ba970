#pragma once

#include <stdexcept>
#include <string>

namespace embctl {

struct NotSkewSymmetric : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NotSymmetric : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NonUnitAxis : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raised when an integration produces NaN/Inf or exceeds the divergence bound.
struct NonFiniteState : std::runtime_error {
  explicit NonFiniteState(double t_at, const std::string& what = "non-finite state")
      : std::runtime_error(what + " at t=" + std::to_string(t_at)), t(t_at) {}
  double t;
};

struct SingularWeight : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LostPositivity : std::runtime_error {
  explicit LostPositivity(double t_at)
      : std::runtime_error("Riccati P lost positive definiteness at t=" + std::to_string(t_at)),
        t(t_at) {}
  double t;
};

struct InvalidGainMatrix : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmptySampleSet : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OnManifoldSample : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DegenerateTrace : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConstructionFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Simulation left GL+(3) (det R <= 0); recoverable as a recorded abort.
struct DomainExit : std::runtime_error {
  explicit DomainExit(double t_at)
      : std::runtime_error("state left GL+(3) at t=" + std::to_string(t_at)), t(t_at) {}
  double t;
};

}  // namespace embctl
