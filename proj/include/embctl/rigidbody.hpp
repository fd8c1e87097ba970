#pragma once

#include <cmath>
#include <functional>
#include <optional>

#include "embctl/embedding.hpp"
#include "embctl/errors.hpp"
#include "embctl/linalg.hpp"
#include "embctl/ltv.hpp"

namespace embctl::rigidbody {

struct InertiaMatrix {
  Mat3 I;
  Mat3 I_inv;

  static InertiaMatrix from_matrix(const Mat3& m) {
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
      throw ConstructionFailure("inertia matrix must be symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Mat3> es(m);
    if (es.eigenvalues().minCoeff() <= 0.0) {
      throw ConstructionFailure("inertia matrix must be positive definite");
    }
    return {m, m.inverse()};
  }

  static InertiaMatrix from_diagonal(const Vec3& d) {
    return from_matrix(d.asDiagonal());
  }
};

/// Ambient state (R, Omega) in R^{3x3} x R^3; R is not constrained to SO(3).
struct RigidBodyState {
  Mat3 R = Mat3::Identity();
  Vec3 Omega = Vec3::Zero();

  /// Row-major R followed by Omega.
  VecN flatten() const {
    VecN x(12);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) x[3 * i + j] = R(i, j);
    x.tail<3>() = Omega;
    return x;
  }

  static RigidBodyState unflatten(const VecN& x) {
    RigidBodyState s;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) s.R(i, j) = x[3 * i + j];
    s.Omega = x.tail<3>();
    return s;
  }
};

/// Time-parameterized reference (R0, Omega0, dOmega0, u0) on SO(3).
struct RigidReference {
  std::function<Mat3(double)> R0;
  std::function<Vec3(double)> Omega0;
  std::function<Vec3(double)> dOmega0;
  std::function<Vec3(double)> u0;
  std::optional<double> period;
};

struct ErrorCoords {
  Mat3 Zs = Mat3::Zero();
  Vec3 Zk_vee = Vec3::Zero();
  Vec3 dOmega = Vec3::Zero();
};

struct ControllerGains {
  double k_P = 0.0;
  Mat3 K_D = Mat3::Zero();
  double k_e = 0.0;

  void validate() const {
    if (k_P <= 0.0 || k_e <= 0.0) {
      throw ConstructionFailure("controller gains k_P, k_e must be positive");
    }
    if ((K_D - K_D.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
      throw ConstructionFailure("K_D must be symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Mat3> es(K_D);
    if (es.eigenvalues().minCoeff() <= 0.0) {
      throw ConstructionFailure("K_D must be positive definite");
    }
  }
};

struct StateDerivative {
  Mat3 R_dot;
  Vec3 Omega_dot;
};

/// Free rigid-body dynamics with control torque u.
inline StateDerivative dynamics(const RigidBodyState& s, const Vec3& u,
                                const InertiaMatrix& inertia) {
  StateDerivative d;
  d.R_dot = s.R * hat(s.Omega);
  d.Omega_dot = inertia.I_inv * ((inertia.I * s.Omega).cross(s.Omega) + u);
  return d;
}

inline double v_tilde(const Mat3& R, double k_e) {
  const Mat3 e = R.transpose() * R - Mat3::Identity();
  return 0.25 * k_e * e.squaredNorm();
}

/// grad_R of v_tilde; the Omega component of the gradient is zero.
inline Mat3 grad_v(const Mat3& R, double k_e) {
  return k_e * R * (R.transpose() * R - Mat3::Identity());
}

/// Dynamics extended off SO(3): the -k_e R (R^T R - I) correction makes
/// SO(3) x R^3 an exponentially attractive invariant manifold.
inline StateDerivative extended_dynamics(const RigidBodyState& s, const Vec3& u,
                                         const InertiaMatrix& inertia, double k_e) {
  StateDerivative d = dynamics(s, u, inertia);
  d.R_dot -= grad_v(s.R, k_e);
  return d;
}

/// The paper-independent parts of the simulation all work on flattened
/// vectors; this wraps the rigid body as a generic embedded system
/// (ambient dim 12, control dim 3, output dim 9).
inline EmbeddedSystem embedded_system(const InertiaMatrix& inertia, double k_e) {
  EmbeddedSystem sys;
  sys.ambient_dim = 12;
  sys.control_dim = 3;
  sys.output_dim = 9;
  sys.ambient_field = [inertia](const VecN& x, const VecN& u) -> VecN {
    const RigidBodyState s = RigidBodyState::unflatten(x);
    const StateDerivative d = dynamics(s, u, inertia);
    RigidBodyState out{d.R_dot, d.Omega_dot};
    return out.flatten();
  };
  sys.constraint_fn = [k_e](const VecN& x) {
    return v_tilde(RigidBodyState::unflatten(x).R, k_e);
  };
  sys.constraint_grad = [k_e](const VecN& x) -> VecN {
    const Mat3 g = grad_v(RigidBodyState::unflatten(x).R, k_e);
    RigidBodyState gs{g, Vec3::Zero()};
    return gs.flatten();
  };
  sys.output_fn = [](const VecN& x) { return x.head(9).eval(); };
  return sys;
}

inline Mat3 paper_inertia_diag() { return Vec3(3.0, 2.0, 1.0).asDiagonal(); }

namespace detail {

inline Mat3 paper_R0(double t) {
  const double c = std::cos(t), s = std::sin(t);
  Mat3 r;
  r << c * c, -s, c * s,
       s * s + c * c * s, c * c, c * s * s - c * s,
       c * s * s - c * s, c * s, c * c + s * s * s;
  return r;
}

inline Vec3 paper_Omega0(double t) {
  const double c = std::cos(t), s = std::sin(t);
  return {c * c - s, 1.0 - s, (1.0 + s) * c};
}

// hand-differentiated Omega0
inline Vec3 paper_dOmega0(double t) {
  const double c = std::cos(t), s = std::sin(t);
  return {-c * (2.0 * s + 1.0), -c, c * c - s - s * s};
}

inline Vec3 paper_u0(double t) {
  const double c = std::cos(t), s = std::sin(t);
  return {-(3.0 + 6.0 * s + c * c) * c,
          -2.0 * (2.0 + s) * c * s * s,
          -(2.0 * s - c * c) * s};
}

}  // namespace detail

/// Validates the reference invariants on a uniform grid over one period
/// (orthogonality of R0, the kinematic relation, and torque consistency).
inline void validate_reference(const RigidReference& ref, const InertiaMatrix& inertia,
                               double t0, double t1, int n_grid) {
  const double fd = 1e-6;
  for (int i = 0; i < n_grid; ++i) {
    const double t = t0 + (t1 - t0) * i / (n_grid - 1);
    const Mat3 R = ref.R0(t);
    if ((R.transpose() * R - Mat3::Identity()).norm() > 1e-9) {
      throw ConstructionFailure("reference R0 is not orthogonal");
    }
    const Mat3 Rdot_fd = (ref.R0(t + fd) - ref.R0(t - fd)) / (2.0 * fd);
    if ((Rdot_fd - R * hat(ref.Omega0(t))).norm() > 1e-5) {
      throw ConstructionFailure("reference violates dR0 = R0 hat(Omega0)");
    }
    const Vec3 O = ref.Omega0(t);
    const Vec3 u_chk = inertia.I * ref.dOmega0(t) - (inertia.I * O).cross(O);
    if ((u_chk - ref.u0(t)).norm() > 1e-9) {
      throw ConstructionFailure("reference u0 inconsistent with Euler equation");
    }
  }
}

/// The closed-form periodic reference trajectory used throughout; assumes
/// the diag(3,2,1) inertia.
inline RigidReference paper_reference() {
  RigidReference ref;
  ref.R0 = detail::paper_R0;
  ref.Omega0 = detail::paper_Omega0;
  ref.dOmega0 = detail::paper_dOmega0;
  ref.u0 = detail::paper_u0;
  ref.period = 2.0 * M_PI;
  validate_reference(ref, InertiaMatrix::from_matrix(paper_inertia_diag()), 0.0,
                     2.0 * M_PI, 1000);
  return ref;
}

/// Z = R0^T (R - R0) split into symmetric / skew parts plus velocity error.
inline ErrorCoords error_coords(const RigidBodyState& s, const RigidReference& ref,
                                double t) {
  const Mat3 R0 = ref.R0(t);
  const Mat3 Z = R0.transpose() * (s.R - R0);
  ErrorCoords ec;
  ec.Zs = sym(Z);
  const Mat3 Zk = skew(Z);
  ec.Zk_vee = Vec3(Zk(2, 1), Zk(0, 2), Zk(1, 0));
  ec.dOmega = s.Omega - ref.Omega0(t);
  return ec;
}

/// Output error split (dy_s, dy_k) from the measured rotation y = R.
/// Only dy_k feeds the observer.
inline std::pair<Mat3, Vec3> measured_outputs(const Mat3& y, const RigidReference& ref,
                                              double t) {
  const Mat3 R0 = ref.R0(t);
  const Mat3 Z = R0.transpose() * (y - R0);
  const Mat3 Zk = skew(Z);
  return {sym(Z), Vec3(Zk(2, 1), Zk(0, 2), Zk(1, 0))};
}

/// Reduced 6x6 LTV model of the (Z_k^vee, dOmega) error dynamics.
///   A(t) = [[-hat(Omega0), I], [0, I^-1 (hat(I Omega0) - hat(Omega0) I)]]
///   B = [0; I^-1],  C = [I 0]
inline LtvModel linearized_model(const RigidReference& ref,
                                 const InertiaMatrix& inertia) {
  LtvModel m;
  m.state_dim = 6;
  m.control_dim = 3;
  m.output_dim = 3;
  m.A = [ref, inertia](double t) -> MatN {
    const Vec3 O = ref.Omega0(t);
    MatN A = MatN::Zero(6, 6);
    A.topLeftCorner<3, 3>() = -hat(O);
    A.topRightCorner<3, 3>() = Mat3::Identity();
    A.bottomRightCorner<3, 3>() =
        inertia.I_inv * (hat(inertia.I * O) - hat(O) * inertia.I);
    return A;
  };
  m.B = [inertia](double) -> MatN {
    MatN B = MatN::Zero(6, 3);
    B.bottomRows<3>() = inertia.I_inv;
    return B;
  };
  m.C = [](double) -> MatN {
    MatN C = MatN::Zero(3, 6);
    C.leftCols<3>() = Mat3::Identity();
    return C;
  };
  // sup ||A(t)|| over one period (or a representative window if aperiodic)
  const double t_end = ref.period.value_or(2.0 * M_PI);
  double sup = 0.0;
  for (int i = 0; i <= 256; ++i) {
    sup = std::max(sup, m.A(t_end * i / 256.0).norm());
  }
  m.bounded_A = sup;
  return m;
}

/// dz_o = A z_o + B du - L (C z_o - dy_k). The innovation enters with a
/// minus sign; the plus-sign variant is unstable with L = P C^T R^{-1}.
inline VecN tracking_error_observer_rhs(const VecN& z_o, const Vec3& du,
                                        const Vec3& dy_k, const MatN& A,
                                        const MatN& B, const MatN& L) {
  const Vec3 innovation = z_o.head<3>() - dy_k;  // C z_o - dy_k with C = [I 0]
  return A * z_o + B * du - L * innovation;
}

inline Vec3 full_state_controller(const ErrorCoords& ec, const RigidReference& ref,
                                  double t, const InertiaMatrix& inertia,
                                  const ControllerGains& gains) {
  const Vec3 O0 = ref.Omega0(t);
  return ref.u0(t) - (inertia.I * ec.dOmega).cross(O0) -
         (inertia.I * O0).cross(ec.dOmega) -
         inertia.I * (gains.k_P * ec.Zk_vee + gains.K_D * ec.dOmega);
}

/// Same control law with the observer estimate z_o = (Zk_est, dOmega_est)
/// in place of the true error.
inline Vec3 observer_based_controller(const VecN& z_o, const RigidReference& ref,
                                      double t, const InertiaMatrix& inertia,
                                      const ControllerGains& gains) {
  ErrorCoords ec;
  ec.Zk_vee = z_o.head<3>();
  ec.dOmega = z_o.tail<3>();
  return full_state_controller(ec, ref, t, inertia, gains);
}

/// Effective linear gain K(t) with du = -K(t) z_o, used for composite
/// stability analysis of the closed loop.
inline MatN linearized_controller_gain(const RigidReference& ref, double t,
                                       const InertiaMatrix& inertia,
                                       const ControllerGains& gains) {
  const Vec3 O0 = ref.Omega0(t);
  MatN K(3, 6);
  K.leftCols<3>() = gains.k_P * inertia.I;
  K.rightCols<3>() = hat(inertia.I * O0) - hat(O0) * inertia.I + gains.K_D * inertia.I;
  return K;
}

/// Closed-form observer gain that needs no Riccati flow and no periodicity:
///   L1 = -hat(Omega0) + I^-1 (hat(I Omega0) - hat(Omega0) I) + M1
///   L2 = -(hat(dOmega0) + dL1) + (hat(Omega0)+L1)^2 - M1 (hat(Omega0)+L1) + M2
/// L1 is affine in Omega0, so dL1 only needs dOmega0.
inline MatN nonkalman_gain(const RigidReference& ref, double t,
                           const InertiaMatrix& inertia, const Mat3& M1,
                           const Mat3& M2) {
  for (const Mat3* m : {&M1, &M2}) {
    if ((*m - m->transpose()).cwiseAbs().maxCoeff() > 1e-12) {
      throw InvalidGainMatrix("M1/M2 must be symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Mat3> es(*m);
    if (es.eigenvalues().minCoeff() <= 0.0) {
      throw InvalidGainMatrix("M1/M2 must be positive definite");
    }
  }
  const Vec3 O0 = ref.Omega0(t);
  const Vec3 dO0 = ref.dOmega0(t);
  const Mat3 L1 = -hat(O0) + inertia.I_inv * (hat(inertia.I * O0) - hat(O0) * inertia.I) + M1;
  const Mat3 dL1 =
      -hat(dO0) + inertia.I_inv * (hat(inertia.I * dO0) - hat(dO0) * inertia.I);
  const Mat3 s = hat(O0) + L1;
  const Mat3 L2 = -(hat(dO0) + dL1) + s * s - M1 * s + M2;
  MatN L(6, 3);
  L.topRows<3>() = L1;
  L.bottomRows<3>() = L2;
  return L;
}

/// High-gain state observer realized in the reduced coordinates: the estimate
/// is (R_hat, Omega_hat) with innovation nu = Skew(R0^T (R_hat - y))^vee and
/// the reduced gain applied blockwise (L1 lifted through R0 hat(.)).
inline VecN nonlinear_state_observer_rhs(const VecN& xhat, const Vec3& u,
                                         const Mat3& y, const MatN& L, double t,
                                         const RigidReference& ref,
                                         const InertiaMatrix& inertia, double k_e) {
  const RigidBodyState sh = RigidBodyState::unflatten(xhat);
  const Mat3 R0 = ref.R0(t);
  const Mat3 zk = skew(R0.transpose() * (sh.R - y));
  const Vec3 nu(zk(2, 1), zk(0, 2), zk(1, 0));
  StateDerivative d = extended_dynamics(sh, u, inertia, k_e);
  d.R_dot -= R0 * hat(L.topRows<3>() * nu);
  d.Omega_dot -= L.bottomRows<3>() * nu;
  RigidBodyState out{d.R_dot, d.Omega_dot};
  return out.flatten();
}

}  // namespace embctl::rigidbody
