#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "embctl/errors.hpp"
#include "embctl/linalg.hpp"
#include "embctl/ode.hpp"

namespace embctl {

/// Linear time-varying model dx = A(t)x + B(t)u, y = C(t)x.
struct LtvModel {
  int state_dim = 0;
  int control_dim = 0;
  int output_dim = 0;
  std::function<MatN(double)> A;
  std::function<MatN(double)> B;
  std::function<MatN(double)> C;
  double bounded_A = 0.0;  // sup ||A(t)|| when known, 0 = unknown
};

/// Observer-gain schedule on a uniform time grid.
struct RiccatiSchedule {
  std::vector<double> times;
  std::vector<MatN> P;
  std::vector<MatN> L;  // L(t) = P(t) C^T(t) R^{-1}(t)
};

namespace detail {

// RK4 on the matrix ODE dX/ds = rhs(s, X). Signed step; stores every node
// when `store` is non-null.
inline MatN integrate_matrix_ode(const std::function<MatN(double, const MatN&)>& rhs,
                                 double s0, const MatN& x0, double s1, double h,
                                 std::vector<MatN>* store = nullptr) {
  const auto n_steps = static_cast<std::size_t>(
      std::llround(std::abs(s1 - s0) / h));
  const double hs = (s1 >= s0) ? h : -h;
  MatN x = x0;
  if (store) {
    store->clear();
    store->reserve(n_steps + 1);
    store->push_back(x);
  }
  for (std::size_t i = 0; i < n_steps; ++i) {
    const double s = s0 + static_cast<double>(i) * hs;
    const MatN k1 = rhs(s, x);
    const MatN k2 = rhs(s + 0.5 * hs, x + (0.5 * hs) * k1);
    const MatN k3 = rhs(s + 0.5 * hs, x + (0.5 * hs) * k2);
    const MatN k4 = rhs(s + hs, x + hs * k3);
    x = x + (hs / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!x.allFinite()) throw NonFiniteState(s + hs);
    if (store) store->push_back(x);
  }
  return x;
}

// Composite Simpson on uniformly sampled matrix values (even interval count).
inline MatN simpson(const std::vector<MatN>& f, double h) {
  MatN acc = f.front();
  const std::size_t n = f.size() - 1;  // intervals
  for (std::size_t i = 1; i < n; ++i) acc += ((i % 2 == 1) ? 4.0 : 2.0) * f[i];
  acc += f.back();
  return (h / 3.0) * acc;
}

}  // namespace detail

/// Transition matrix Phi(t, tau) of dx = A(t)x; works for either time order.
inline MatN transition_matrix(const LtvModel& m, double t, double tau, double h) {
  const MatN id = MatN::Identity(m.state_dim, m.state_dim);
  if (t == tau) return id;
  auto rhs = [&m](double s, const MatN& x) -> MatN { return m.A(s) * x; };
  return detail::integrate_matrix_ode(rhs, tau, id, t, h);
}

/// W(t, tbar) = int_t^tbar Phi(t,s) B(s) B^T(s) Phi^T(t,s) ds.
/// Psi(s) := Phi(t,s) solves dPsi/ds = -Psi A(s) forward from Psi(t) = I,
/// so one sweep plus Simpson quadrature suffices.
inline MatN controllability_gramian(const LtvModel& m, double t, double t_bar,
                                    double h) {
  auto n_iv = static_cast<std::size_t>(std::llround((t_bar - t) / h));
  if (n_iv % 2 == 1) ++n_iv;
  const double hq = (t_bar - t) / static_cast<double>(n_iv);
  auto rhs = [&m](double s, const MatN& x) -> MatN { return -x * m.A(s); };
  std::vector<MatN> psi;
  detail::integrate_matrix_ode(rhs, t, MatN::Identity(m.state_dim, m.state_dim),
                               t_bar, hq, &psi);
  std::vector<MatN> f(psi.size());
  for (std::size_t i = 0; i < psi.size(); ++i) {
    const MatN pb = psi[i] * m.B(t + static_cast<double>(i) * hq);
    f[i] = pb * pb.transpose();
  }
  return detail::simpson(f, hq);
}

/// V(t, tbar) = int_t^tbar Phi^T(s,t) C^T(s) C(s) Phi(s,t) ds.
inline MatN observability_gramian(const LtvModel& m, double t, double t_bar,
                                  double h) {
  auto n_iv = static_cast<std::size_t>(std::llround((t_bar - t) / h));
  if (n_iv % 2 == 1) ++n_iv;
  const double hq = (t_bar - t) / static_cast<double>(n_iv);
  auto rhs = [&m](double s, const MatN& x) -> MatN { return m.A(s) * x; };
  std::vector<MatN> phi;
  detail::integrate_matrix_ode(rhs, t, MatN::Identity(m.state_dim, m.state_dim),
                               t_bar, hq, &phi);
  std::vector<MatN> f(phi.size());
  for (std::size_t i = 0; i < phi.size(); ++i) {
    const MatN cp = m.C(t + static_cast<double>(i) * hq) * phi[i];
    f[i] = cp.transpose() * cp;
  }
  return detail::simpson(f, hq);
}

enum class GramianKind { Controllability, Observability };

/// Spectral certificate for uniform complete controllability/observability
/// over a finite grid of window placements.
struct UniformCompleteCertificate {
  GramianKind kind{};
  double alpha1 = 0.0;  // min over grid of lambda_min
  double alpha2 = 0.0;  // max over grid of lambda_max
  bool pass = false;
  // Boundedness of A(t) reduces the check to the
  // first inequality pair; otherwise the certificate is grid-limited anyway.
  bool used_bounded_A = false;
  std::size_t grid_points = 0;
};

inline UniformCompleteCertificate check_uniform_complete(
    const LtvModel& m, GramianKind which, double sigma,
    const std::vector<double>& t_grid, double h) {
  UniformCompleteCertificate cert;
  cert.kind = which;
  cert.grid_points = t_grid.size();
  cert.used_bounded_A = m.bounded_A > 0.0;
  double a1 = std::numeric_limits<double>::infinity();
  double a2 = -std::numeric_limits<double>::infinity();
  for (double t : t_grid) {
    const MatN g = (which == GramianKind::Controllability)
                       ? controllability_gramian(m, t, t + sigma, h)
                       : observability_gramian(m, t, t + sigma, h);
    const auto [lo, hi] = sym_eig_bounds(0.5 * (g + g.transpose()));
    a1 = std::min(a1, lo);
    a2 = std::max(a2, hi);
  }
  cert.alpha1 = a1;
  cert.alpha2 = a2;
  cert.pass = a1 > 0.0;
  return cert;
}

/// dP = P A^T + A P - P C^T R^{-1} C P + Q, symmetrized.
inline MatN riccati_rhs(const MatN& P, const MatN& A, const MatN& C,
                        const MatN& Rw, const MatN& Qw) {
  Eigen::FullPivLU<MatN> lu(Rw);
  if (!lu.isInvertible() ||
      lu.rcond() < 1e-12) {
    throw SingularWeight("riccati_rhs: R weight is singular or ill-conditioned");
  }
  const MatN pct = P * C.transpose();
  MatN d = P * A.transpose() + A * P - pct * lu.solve(C * P) + Qw;
  return 0.5 * (d + d.transpose());
}

/// Integrates the observer Riccati flow on the uniform grid [t0, tf] with
/// outer step h, producing P(t) and L(t) = P C^T R^{-1} per grid point.
///
/// The flow is stiff while P is far above its steady state (the quadratic
/// term scales like ||P||^2 ||C^T R^{-1} C||), so each outer step is advanced
/// with an internally refined RK4 whose substep count comes from a local
/// rate bound. The outer grid and the result are unchanged by this.
inline RiccatiSchedule integrate_riccati(const LtvModel& m, const MatN& P0,
                                         const std::function<MatN(double)>& Qw,
                                         const std::function<MatN(double)>& Rw,
                                         double t0, double tf, double h) {
  RiccatiSchedule sched;
  const auto n_steps = static_cast<std::size_t>(std::llround((tf - t0) / h));
  sched.times.reserve(n_steps + 1);
  sched.P.reserve(n_steps + 1);
  sched.L.reserve(n_steps + 1);

  auto push = [&](double t, const MatN& P) {
    sched.times.push_back(t);
    sched.P.push_back(P);
    const MatN R = Rw(t);
    sched.L.push_back(P * m.C(t).transpose() * R.inverse());
  };

  MatN P = 0.5 * (P0 + P0.transpose());
  push(t0, P);
  for (std::size_t i = 0; i < n_steps; ++i) {
    const double t = t0 + static_cast<double>(i) * h;
    // local stiffness bound -> substep count
    const MatN R0m = Rw(t);
    const double rate =
        2.0 * P.norm() * (m.C(t).transpose() * R0m.inverse() * m.C(t)).norm() +
        2.0 * m.A(t).norm();
    const int n_sub = std::clamp(static_cast<int>(std::ceil(h * rate / 0.5)), 1, 4000);
    const double hs = h / n_sub;
    for (int j = 0; j < n_sub; ++j) {
      const double ts = t + j * hs;
      auto f = [&](double s, const MatN& X) {
        return riccati_rhs(0.5 * (X + X.transpose()), m.A(s), m.C(s), Rw(s), Qw(s));
      };
      const MatN k1 = f(ts, P);
      const MatN k2 = f(ts + 0.5 * hs, P + (0.5 * hs) * k1);
      const MatN k3 = f(ts + 0.5 * hs, P + (0.5 * hs) * k2);
      const MatN k4 = f(ts + hs, P + hs * k3);
      P = P + (hs / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      P = 0.5 * (P + P.transpose());
      if (!P.allFinite()) throw NonFiniteState(ts + hs, "Riccati blow-up");
    }
    const double tn = t0 + static_cast<double>(i + 1) * h;
    if (sym_eig_bounds(P).first < 0.0) throw LostPositivity(tn);
    push(tn, P);
  }
  return sched;
}

/// [[A - B K, B K], [0, A - L C]]; the lower-left block is exactly zero.
inline MatN composite_matrix(const MatN& A, const MatN& B, const MatN& K,
                             const MatN& L, const MatN& C) {
  const auto n = A.rows();
  if (B.rows() != n || K.cols() != n || L.rows() != n || C.cols() != n ||
      B.cols() != K.rows() || L.cols() != C.rows()) {
    throw DimensionMismatch("composite_matrix: inconsistent block dimensions");
  }
  MatN out = MatN::Zero(2 * n, 2 * n);
  const MatN bk = B * K;
  out.topLeftCorner(n, n) = A - bk;
  out.topRightCorner(n, n) = bk;
  out.bottomRightCorner(n, n) = A - L * C;
  return out;
}

struct DecayFit {
  double rate = 0.0;  // slope of log||x|| vs t (negative = decay)
  double r2 = 0.0;
  bool clamped = false;  // some norms underflowed 1e-15
};

/// Least-squares exponential-rate fit of norm_fn along the final half of the
/// trace.
inline DecayFit decay_rate_fit(const Trace& trace,
                               const std::function<double(const VecN&)>& norm_fn) {
  if (trace.size() < 10) throw DegenerateTrace("decay_rate_fit: trace too short");
  DecayFit fit;
  const std::size_t start = trace.size() / 2;
  std::vector<double> ts, ys;
  for (std::size_t i = start; i < trace.size(); ++i) {
    double v = norm_fn(trace.states[i]);
    if (v < 1e-15) {
      v = 1e-15;
      fit.clamped = true;
    }
    ts.push_back(trace.times[i]);
    ys.push_back(std::log(v));
  }
  const auto n = static_cast<double>(ts.size());
  double st = 0, sy = 0, stt = 0, sty = 0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    st += ts[i];
    sy += ys[i];
    stt += ts[i] * ts[i];
    sty += ts[i] * ys[i];
  }
  const double denom = n * stt - st * st;
  fit.rate = (n * sty - st * sy) / denom;
  const double intercept = (sy - fit.rate * st) / n;
  double ss_res = 0, ss_tot = 0;
  const double mean = sy / n;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const double pred = fit.rate * ts[i] + intercept;
    ss_res += (ys[i] - pred) * (ys[i] - pred);
    ss_tot += (ys[i] - mean) * (ys[i] - mean);
  }
  fit.r2 = (ss_tot > 0.0) ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

}  // namespace embctl
