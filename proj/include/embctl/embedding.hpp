#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include "embctl/errors.hpp"
#include "embctl/linalg.hpp"
#include "embctl/ode.hpp"

namespace embctl {

/// Control system on R^n whose constraint function V vanishes exactly on the
/// embedded manifold M = V^{-1}(0). Matrix-shaped states are flattened
/// row-major by the instantiating code.
struct EmbeddedSystem {
  int ambient_dim = 0;
  int control_dim = 0;
  int output_dim = 0;
  std::function<VecN(const VecN&, const VecN&)> ambient_field;   // X_e(x, u)
  std::function<double(const VecN&)> constraint_fn;              // V(x) >= 0
  std::function<VecN(const VecN&)> constraint_grad;              // grad V(x)
  std::function<VecN(const VecN&)> output_fn;                    // h(x)
};

struct CheckReport {
  bool pass = false;
  double worst = 0.0;  // residual / margin, meaning depends on the check
};

/// Corrected field X_e(x,u) - grad V(x); M becomes an attractive invariant set.
inline std::function<VecN(const VecN&, const VecN&)> extended_field(
    const EmbeddedSystem& sys) {
  return [&sys](const VecN& x, const VecN& u) -> VecN {
    return sys.ambient_field(x, u) - sys.constraint_grad(x);
  };
}

/// Max |<grad V(x), X_e(x,u)>| over the samples; the embedding construction
/// requires this to vanish identically.
inline CheckReport check_tangency(const EmbeddedSystem& sys,
                                  const std::vector<std::pair<VecN, VecN>>& samples,
                                  double tol) {
  double worst = 0.0;
  for (const auto& [x, u] : samples) {
    const double r = std::abs(sys.constraint_grad(x).dot(sys.ambient_field(x, u)));
    worst = std::max(worst, r);
  }
  return {worst <= tol, worst};
}

/// Sampled lower bound b = min ||grad V||^2 / V over the given sublevel
/// samples. b > 0 certifies the exponential-attractivity hypothesis on the
/// sampled set.
inline double estimate_decay_constant(const EmbeddedSystem& sys, double sublevel_r,
                                      const std::vector<VecN>& samples) {
  if (samples.empty()) throw EmptySampleSet("estimate_decay_constant: no samples");
  double b = std::numeric_limits<double>::infinity();
  for (const VecN& x : samples) {
    const double v = sys.constraint_fn(x);
    if (v < 1e-14) {
      throw OnManifoldSample("estimate_decay_constant: sample with V < 1e-14");
    }
    if (v >= sublevel_r) continue;
    b = std::min(b, sys.constraint_grad(x).squaredNorm() / v);
  }
  if (!std::isfinite(b)) {
    throw EmptySampleSet("estimate_decay_constant: no sample inside sublevel set");
  }
  return b;
}

/// Checks V(x(t)) <= V(x(0)) e^{-b t} (1 + slack) along the trace.
/// Returns the worst margin V(t) - bound(t) (negative means pass everywhere).
inline CheckReport verify_exponential_decay(const Trace& trace,
                                            const std::function<double(const VecN&)>& vfn,
                                            double b, double slack) {
  const double v0 = vfn(trace.front());
  const double t0 = trace.times.front();
  double worst = -std::numeric_limits<double>::infinity();
  bool pass = true;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const double bound = v0 * std::exp(-b * (trace.times[i] - t0)) * (1.0 + slack);
    const double margin = vfn(trace.states[i]) - bound;
    worst = std::max(worst, margin);
    if (margin > 0.0) pass = false;
  }
  return {pass, worst};
}

/// Central-difference validation of the supplied gradient. Returns the max
/// relative error (against the largest analytic component over the samples).
inline CheckReport gradient_check(const EmbeddedSystem& sys,
                                  const std::vector<VecN>& samples, double fd_step) {
  double worst = 0.0;
  for (const VecN& x : samples) {
    const VecN g = sys.constraint_grad(x);
    const double scale = std::max(g.cwiseAbs().maxCoeff(), 1e-12);
    for (int i = 0; i < x.size(); ++i) {
      VecN xp = x, xm = x;
      xp[i] += fd_step;
      xm[i] -= fd_step;
      const double fd = (sys.constraint_fn(xp) - sys.constraint_fn(xm)) / (2.0 * fd_step);
      worst = std::max(worst, std::abs(fd - g[i]) / scale);
    }
  }
  return {worst < 1e-5, worst};
}

}  // namespace embctl
