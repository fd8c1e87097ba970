#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "embctl/errors.hpp"
#include "embctl/linalg.hpp"

namespace embctl {

/// Time-varying vector field on a flat state space.
struct FlowField {
  int dimension = 0;
  std::function<VecN(double, const VecN&)> rhs;
};

/// Uniformly sampled solution trace.
struct Trace {
  std::vector<double> times;
  std::vector<VecN> states;

  std::size_t size() const { return times.size(); }
  const VecN& front() const { return states.front(); }
  const VecN& back() const { return states.back(); }
};

// States beyond this norm abort integration (the extended dynamics off
// GL+(3) can blow up in finite time).
inline constexpr double kDivergenceBound = 1e9;

inline VecN rk4_step(const FlowField& f, double t, const VecN& x, double h) {
  const VecN k1 = f.rhs(t, x);
  const VecN k2 = f.rhs(t + 0.5 * h, x + 0.5 * h * k1);
  const VecN k3 = f.rhs(t + 0.5 * h, x + 0.5 * h * k2);
  const VecN k4 = f.rhs(t + h, x + h * k3);
  VecN out = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!out.allFinite() || !k1.allFinite() || !k4.allFinite()) {
    throw NonFiniteState(t);
  }
  return out;
}

/// Fixed-step RK4 over [t0, tf]; the trace holds every grid point including t0.
inline Trace integrate(const FlowField& f, double t0, const VecN& x0, double tf,
                       double h) {
  const auto n_steps =
      static_cast<std::size_t>(std::llround((tf - t0) / h));
  Trace tr;
  tr.times.reserve(n_steps + 1);
  tr.states.reserve(n_steps + 1);
  tr.times.push_back(t0);
  tr.states.push_back(x0);
  VecN x = x0;
  for (std::size_t i = 0; i < n_steps; ++i) {
    const double t = t0 + static_cast<double>(i) * h;
    x = rk4_step(f, t, x, h);
    if (x.norm() > kDivergenceBound) {
      throw NonFiniteState(t + h, "state norm exceeds divergence bound");
    }
    tr.times.push_back(t0 + static_cast<double>(i + 1) * h);
    tr.states.push_back(x);
  }
  return tr;
}

}  // namespace embctl
