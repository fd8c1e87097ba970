#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "embctl/ltv.hpp"
#include "embctl/ode.hpp"

using namespace embctl;

namespace {

std::mt19937 rng(99);

LtvModel constant_model(const MatN& A, const MatN& B, const MatN& C) {
  LtvModel m;
  m.state_dim = static_cast<int>(A.rows());
  m.control_dim = static_cast<int>(B.cols());
  m.output_dim = static_cast<int>(C.rows());
  m.A = [A](double) { return A; };
  m.B = [B](double) { return B; };
  m.C = [C](double) { return C; };
  m.bounded_A = A.norm();
  return m;
}

MatN expm_series(const MatN& x) {
  MatN s = MatN::Identity(x.rows(), x.cols());
  MatN term = s;
  for (int i = 1; i <= 40; ++i) {
    term = term * x / static_cast<double>(i);
    s += term;
  }
  return s;
}

}  // namespace

TEST_CASE("transition matrix") {
  const auto m0 = constant_model(MatN::Zero(3, 3), MatN::Zero(3, 1), MatN::Zero(1, 3));
  CHECK((transition_matrix(m0, 2.0, 0.5, 1e-3) - MatN::Identity(3, 3)).norm() == 0.0);
  CHECK((transition_matrix(m0, 0.5, 0.5, 1e-3) - MatN::Identity(3, 3)).norm() == 0.0);

  std::normal_distribution<double> n(0.0, 0.5);
  const MatN A = MatN::NullaryExpr(4, 4, [&](int, int) { return n(rng); });
  const auto m = constant_model(A, MatN::Zero(4, 1), MatN::Zero(1, 4));
  for (double dt : {0.7, 2.0, 5.0}) {
    CHECK((transition_matrix(m, dt, 0.0, 1e-3) - expm_series(A * dt)).norm() < 1e-8);
  }
  // backwards in time: Phi(0, dt) = exp(-A dt)
  CHECK((transition_matrix(m, 0.0, 1.0, 1e-3) - expm_series(-A)).norm() < 1e-8);

  // cocycle on a genuinely time-varying model
  LtvModel tv = constant_model(A, MatN::Zero(4, 1), MatN::Zero(1, 4));
  tv.A = [&A](double t) -> MatN { return std::cos(t) * A; };
  const MatN p20 = transition_matrix(tv, 2.0, 0.0, 1e-3);
  const MatN p21 = transition_matrix(tv, 2.0, 0.7, 1e-3);
  const MatN p10 = transition_matrix(tv, 0.7, 0.0, 1e-3);
  CHECK((p20 - p21 * p10).norm() < 1e-7);
}

TEST_CASE("controllability gramian closed forms") {
  // B = 0 -> zero gramian
  const auto mz = constant_model(MatN::Zero(2, 2), MatN::Zero(2, 1), MatN::Zero(1, 2));
  CHECK(controllability_gramian(mz, 0.0, 1.0, 1e-3).norm() == 0.0);

  // scalar x' = u over [0, sigma]: W = sigma
  const auto ms = constant_model(MatN::Zero(1, 1), MatN::Ones(1, 1), MatN::Ones(1, 1));
  CHECK(controllability_gramian(ms, 0.0, 2.5, 1e-3)(0, 0) == Catch::Approx(2.5).epsilon(1e-10));

  // double integrator over [0,1]: Phi(0,tau) B = (-tau, 1)
  MatN A = MatN::Zero(2, 2);
  A(0, 1) = 1.0;
  MatN B = MatN::Zero(2, 1);
  B(1, 0) = 1.0;
  const auto md = constant_model(A, B, MatN::Zero(1, 2));
  const MatN W = controllability_gramian(md, 0.0, 1.0, 1e-3);
  MatN expected(2, 2);
  expected << 1.0 / 3.0, -0.5, -0.5, 1.0;
  CHECK((W - expected).norm() < 1e-10);

  // brute-force quadrature oracle at a fine grid
  const int N = 100000;
  MatN Wo = MatN::Zero(2, 2);
  for (int i = 0; i <= N; ++i) {
    const double tau = static_cast<double>(i) / N;
    Eigen::Vector2d pb(-tau, 1.0);
    const double w = (i == 0 || i == N) ? 0.5 : 1.0;  // trapezoid
    Wo += w * (pb * pb.transpose()) / N;
  }
  CHECK((W - Wo).norm() < 1e-8);
}

TEST_CASE("observability gramian closed forms") {
  const auto mz = constant_model(MatN::Zero(2, 2), MatN::Zero(2, 1), MatN::Zero(1, 2));
  CHECK(observability_gramian(mz, 0.0, 1.0, 1e-3).norm() == 0.0);

  // x' = 0, y = x scalar: V = sigma
  const auto ms = constant_model(MatN::Zero(1, 1), MatN::Zero(1, 1), MatN::Ones(1, 1));
  CHECK(observability_gramian(ms, 1.0, 1.0 + 3.25, 1e-3)(0, 0) ==
        Catch::Approx(3.25).epsilon(1e-10));
}

TEST_CASE("gramian symmetry and window monotonicity") {
  std::normal_distribution<double> n(0.0, 0.4);
  const MatN A = MatN::NullaryExpr(3, 3, [&](int, int) { return n(rng); });
  const MatN B = MatN::NullaryExpr(3, 2, [&](int, int) { return n(rng); });
  const auto m = constant_model(A, B, MatN::Identity(3, 3));

  const MatN W1 = controllability_gramian(m, 0.0, 1.0, 1e-3);
  const MatN W2 = controllability_gramian(m, 0.0, 2.0, 1e-3);
  CHECK((W1 - W1.transpose()).norm() <= 1e-10 * W1.norm());
  const auto [lo, hi] = sym_eig_bounds(0.5 * (W2 - W1 + (W2 - W1).transpose()));
  CHECK(lo > -1e-9);

  const MatN V1 = observability_gramian(m, 0.0, 1.0, 1e-3);
  CHECK((V1 - V1.transpose()).norm() <= 1e-10 * V1.norm());
}

TEST_CASE("uniform complete certification") {
  // scalar x' = u: W(t, t+1) = 1 for every window
  const auto ms = constant_model(MatN::Zero(1, 1), MatN::Ones(1, 1), MatN::Ones(1, 1));
  const auto cert = check_uniform_complete(ms, GramianKind::Controllability, 1.0,
                                           {0.0, 0.5, 1.0, 7.0}, 1e-3);
  CHECK(cert.pass);
  CHECK(cert.alpha1 == Catch::Approx(1.0).epsilon(1e-9));
  CHECK(cert.alpha2 == Catch::Approx(1.0).epsilon(1e-9));

  const auto mz = constant_model(MatN::Zero(2, 2), MatN::Zero(2, 1), MatN::Identity(2, 2));
  const auto certz =
      check_uniform_complete(mz, GramianKind::Controllability, 1.0, {0.0}, 1e-3);
  CHECK_FALSE(certz.pass);
  CHECK(certz.alpha1 == 0.0);
}

TEST_CASE("riccati_rhs") {
  const MatN Z6 = MatN::Zero(6, 6);
  CHECK(riccati_rhs(Z6, Z6, MatN::Zero(3, 6), MatN::Identity(3, 3), Z6).norm() == 0.0);

  // P = 0 -> dP = Q
  const MatN Q = 2.0 * MatN::Identity(6, 6);
  CHECK((riccati_rhs(Z6, Z6, MatN::Zero(3, 6), MatN::Identity(3, 3), Q) - Q).norm() == 0.0);

  // scalar: dp = 2 a p - p^2 c^2 / r + q; equilibrium p* = 1 for a=0,c=r=q=1
  MatN p(1, 1), a(1, 1), c(1, 1), r(1, 1), q(1, 1);
  p << 1.0;
  a << 0.0;
  c << 1.0;
  r << 1.0;
  q << 1.0;
  CHECK(std::abs(riccati_rhs(p, a, c, r, q)(0, 0)) < 1e-14);
  p << 2.0;
  CHECK(riccati_rhs(p, a, c, r, q)(0, 0) == Catch::Approx(-3.0));

  CHECK_THROWS_AS(riccati_rhs(p, a, c, MatN::Zero(1, 1), q), SingularWeight);
}

TEST_CASE("integrate_riccati scalar converges to the closed-form fixed point") {
  const auto m = constant_model(MatN::Zero(1, 1), MatN::Zero(1, 1), MatN::Ones(1, 1));
  auto Q = [](double) -> MatN { return MatN::Ones(1, 1); };
  auto R = [](double) -> MatN { return MatN::Ones(1, 1); };
  const auto sched =
      integrate_riccati(m, 100.0 * MatN::Ones(1, 1), Q, R, 0.0, 10.0, 1e-3);
  CHECK(std::abs(sched.P.back()(0, 0) - 1.0) < 1e-6);
  CHECK(std::abs(sched.L.back()(0, 0) - 1.0) < 1e-6);
  // ARE residual at the endpoint
  CHECK(std::abs(riccati_rhs(sched.P.back(), m.A(0), m.C(0), R(0), Q(0))(0, 0)) < 1e-6);
  // positivity held throughout
  for (const auto& P : sched.P) CHECK(P(0, 0) > 0.0);
}

TEST_CASE("integrate_riccati constant when flow is at rest") {
  const auto m = constant_model(MatN::Zero(2, 2), MatN::Zero(2, 1), MatN::Zero(1, 2));
  auto Q = [](double) -> MatN { return MatN::Zero(2, 2); };
  auto R = [](double) -> MatN { return MatN::Identity(1, 1); };
  const MatN P0 = 3.0 * MatN::Identity(2, 2);
  const auto sched = integrate_riccati(m, P0, Q, R, 0.0, 1.0, 1e-2);
  CHECK((sched.P.back() - P0).norm() < 1e-12);
}

TEST_CASE("composite_matrix structure") {
  std::normal_distribution<double> nd(0.0, 1.0);
  const MatN A = MatN::NullaryExpr(4, 4, [&](int, int) { return nd(rng); });
  const MatN B = MatN::NullaryExpr(4, 2, [&](int, int) { return nd(rng); });
  const MatN K = MatN::NullaryExpr(2, 4, [&](int, int) { return nd(rng); });
  const MatN L = MatN::NullaryExpr(4, 3, [&](int, int) { return nd(rng); });
  const MatN C = MatN::NullaryExpr(3, 4, [&](int, int) { return nd(rng); });

  const MatN M = composite_matrix(A, B, K, L, C);
  REQUIRE(M.rows() == 8);
  // lower-left block bit-exactly zero
  for (int i = 4; i < 8; ++i)
    for (int j = 0; j < 4; ++j) CHECK(M(i, j) == 0.0);
  CHECK((M.topLeftCorner(4, 4) - (A - B * K)).norm() == 0.0);
  CHECK((M.bottomRightCorner(4, 4) - (A - L * C)).norm() == 0.0);

  const MatN M0 = composite_matrix(A, B, MatN::Zero(2, 4), MatN::Zero(4, 3), C);
  CHECK((M0.topLeftCorner(4, 4) - A).norm() == 0.0);
  CHECK(M0.topRightCorner(4, 4).isZero(0.0));

  CHECK_THROWS_AS(composite_matrix(A, B, MatN::Zero(3, 4), L, C), DimensionMismatch);
}

TEST_CASE("composite of stable blocks with bounded coupling decays") {
  // x' = (A - BK) x + BK e, e' = (A - LC) e with both blocks stable
  MatN A(2, 2), B(2, 2), K(2, 2), L(2, 1), C(1, 2);
  A << 0, 1, -1, -0.2;
  B = MatN::Identity(2, 2);
  K << 1, 0, 0, 1;
  C << 1, 0;
  L << 2, 1;
  const MatN M = composite_matrix(A, B, K, L, C);

  FlowField f{4, [&M](double, const VecN& x) -> VecN { return M * x; }};
  VecN x0(4);
  x0 << 1, -1, 0.5, 2;
  const Trace tr = integrate(f, 0.0, x0, 30.0, 1e-2);
  const auto fit = decay_rate_fit(tr, [](const VecN& x) { return x.norm(); });
  CHECK(fit.rate < 0.0);
  CHECK(tr.back().norm() < 1e-3 * x0.norm());
}

TEST_CASE("decay_rate_fit") {
  Trace tr;
  for (int i = 0; i <= 1000; ++i) {
    const double t = 0.01 * i;
    tr.times.push_back(t);
    VecN v(1);
    v << std::exp(-2.0 * t);
    tr.states.push_back(v);
  }
  const auto fit = decay_rate_fit(tr, [](const VecN& x) { return x[0]; });
  CHECK(fit.rate == Catch::Approx(-2.0).epsilon(1e-6));
  CHECK(fit.r2 > 0.999);

  Trace flat;
  for (int i = 0; i < 100; ++i) {
    flat.times.push_back(0.1 * i);
    flat.states.push_back(VecN::Ones(1));
  }
  CHECK(std::abs(decay_rate_fit(flat, [](const VecN& x) { return x[0]; }).rate) < 1e-12);

  Trace shorttr;
  shorttr.times = {0.0, 1.0};
  shorttr.states = {VecN::Ones(1), VecN::Ones(1)};
  CHECK_THROWS_AS(decay_rate_fit(shorttr, [](const VecN& x) { return x[0]; }),
                  DegenerateTrace);

  // underflowing norms are clamped and flagged
  Trace tiny;
  for (int i = 0; i < 100; ++i) {
    tiny.times.push_back(0.1 * i);
    VecN v(1);
    v << std::exp(-10.0 * 0.1 * i);
    tiny.states.push_back(v);
  }
  CHECK(decay_rate_fit(tiny, [](const VecN& x) { return x[0]; }).clamped);
}
