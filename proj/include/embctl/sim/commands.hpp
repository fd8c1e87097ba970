#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "embctl/embedding.hpp"
#include "embctl/sim/config.hpp"
#include "embctl/sim/output.hpp"
#include "embctl/sim/runner.hpp"

namespace embctl::sim {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitDiverged = 2;

namespace detail {

inline Vec3 random_unit(std::mt19937& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v(n(rng), n(rng), n(rng));
  while (v.norm() < 1e-6) v = Vec3(n(rng), n(rng), n(rng));
  return v.normalized();
}

inline Mat3 random_rotation(std::mt19937& rng) {
  std::uniform_real_distribution<double> ang(0.0, M_PI);
  return rodrigues_exp(random_unit(rng), ang(rng));
}

// Perturbed GL+(3) point near SO(3).
inline Mat3 random_glp(std::mt19937& rng, double spread) {
  std::normal_distribution<double> n(0.0, spread);
  Mat3 d;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) d(i, j) = n(rng);
  Mat3 r = random_rotation(rng) + d;
  if (r.determinant() <= 0.0) r = random_rotation(rng);  // rare at small spread
  return r;
}

}  // namespace detail

inline int cmd_simulate(const Scenario& sc, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const RunRecord rec = run_scenario(sc);
  write_trace_csv(rec, out_dir + "/trace.csv");
  write_summary(rec, out_dir + "/summary.txt");
  if (rec.aborted) {
    std::cerr << "run aborted: " << rec.abort_reason << " at t=" << rec.abort_time
              << "\n";
    return kExitDiverged;
  }
  return kExitOk;
}

inline int cmd_reproduce_paper(const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const Scenario sc = paper_scenario();
  const RunRecord rec = run_scenario(sc);
  write_trace_csv(rec, out_dir + "/trace.csv");
  write_summary(rec, out_dir + "/summary.txt");
  write_errors_svg(rec, out_dir + "/errors.svg");
  std::printf("initial attitude tracking error |R(0) - R0(0)| = %.4f\n",
              rec.rows.front().dR_norm);
  const double tr0 = tracking_norm(rec.rows.front());
  const double trf = tracking_norm(rec.rows.back());
  std::printf("tracking error: %.6g -> %.6g (%.3g%% of initial)\n", tr0, trf,
              100.0 * trf / tr0);
  std::printf("observation error: %.6g -> %.6g (%.3g%% of initial)\n",
              rec.rows.front().eo_norm, rec.rows.back().eo_norm,
              100.0 * rec.rows.back().eo_norm / rec.rows.front().eo_norm);
  return rec.aborted ? kExitDiverged : kExitOk;
}

inline int cmd_gains(const Scenario& sc, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const auto cx = detail::make_context(sc);
  RiccatiSchedule sched;
  if (sc.observer == ObserverKind::NonKalman) {
    const auto n = static_cast<std::size_t>(std::llround((sc.tf - sc.t0) / sc.h));
    for (std::size_t i = 0; i <= n; ++i) {
      const double t = sc.t0 + static_cast<double>(i) * sc.h;
      sched.times.push_back(t);
      sched.P.push_back(MatN::Zero(6, 6));
      sched.L.push_back(
          rigidbody::nonkalman_gain(cx.ref, t, cx.inertia, sc.M1, sc.M2));
    }
  } else {
    auto Qw = [&sc](double) -> MatN { return sc.Q_scalar * MatN::Identity(6, 6); };
    auto Rw = [&sc](double) -> MatN { return sc.Rt_scalar * MatN::Identity(3, 3); };
    try {
      sched = integrate_riccati(cx.model, sc.P0_scalar * MatN::Identity(6, 6), Qw,
                                Rw, sc.t0, sc.tf, sc.h);
    } catch (const LostPositivity& e) {
      std::cerr << e.what() << "\n";
      return kExitDiverged;
    }
  }
  write_gains_csv(sched, out_dir + "/gains.csv");
  return kExitOk;
}

/// Numeric certification reports (key=value). `which` selects uco | ucc |
/// decay | gradient | tangency.
inline int cmd_certify(const Scenario& sc, const std::string& which,
                       const std::string& out_path) {
  const auto cx = detail::make_context(sc);
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot open " + out_path);
  std::mt19937 rng(20240517);
  bool pass = false;

  if (which == "uco" || which == "ucc") {
    const double sigma = cx.ref.period.value_or(2.0 * M_PI);
    std::vector<double> grid;
    for (int i = 0; i < 8; ++i) grid.push_back(sigma * i / 8.0);
    LtvModel m = cx.model;
    if (which == "ucc") {
      // the pair (A(t), I6) per the Q = 100 I factorization
      m.B = [](double) -> MatN { return MatN::Identity(6, 6); };
      m.control_dim = 6;
    }
    const auto cert = check_uniform_complete(
        m, which == "uco" ? GramianKind::Observability : GramianKind::Controllability,
        sigma, grid, sc.h);
    pass = cert.pass;
    out << "check=" << which << "\n";
    out << "sigma=" << sigma << "\n";
    out << "grid_points=" << cert.grid_points << "\n";
    out << "alpha1=" << cert.alpha1 << "\n";
    out << "alpha2=" << cert.alpha2 << "\n";
    out << "used_bounded_A=" << (cert.used_bounded_A ? "true" : "false") << "\n";
  } else if (which == "decay") {
    const auto sys = rigidbody::embedded_system(cx.inertia, sc.k_e);
    std::uniform_real_distribution<double> eps(1e-3, 0.1);
    std::vector<VecN> samples;
    for (int i = 0; i < 1000; ++i) {
      rigidbody::RigidBodyState s;
      s.R = (1.0 + eps(rng)) * detail::random_rotation(rng);
      samples.push_back(s.flatten());
    }
    const double sublevel = 1.0;
    const double b = estimate_decay_constant(sys, sublevel, samples);
    // open-loop extended flow from a conformal perturbation
    auto xf = extended_field(sys);
    FlowField f{12, [&xf](double, const VecN& x) { return xf(x, VecN::Zero(3)); }};
    rigidbody::RigidBodyState s0;
    s0.R = 1.05 * detail::random_rotation(rng);
    const Trace tr = integrate(f, 0.0, s0.flatten(), 5.0, 1e-3);
    const auto rep = verify_exponential_decay(tr, sys.constraint_fn, b, 0.05);
    pass = rep.pass;
    out << "check=decay\n";
    out << "b_hat=" << b << "\n";
    out << "worst_margin=" << rep.worst << "\n";
  } else if (which == "gradient") {
    const auto sys = rigidbody::embedded_system(cx.inertia, sc.k_e);
    std::vector<VecN> samples;
    for (int i = 0; i < 100; ++i) {
      rigidbody::RigidBodyState s;
      s.R = detail::random_glp(rng, 0.05);
      samples.push_back(s.flatten());
    }
    const auto rep = gradient_check(sys, samples, 1e-6);
    pass = rep.pass;
    out << "check=gradient\n";
    out << "max_rel_error=" << rep.worst << "\n";
  } else if (which == "tangency") {
    const auto sys = rigidbody::embedded_system(cx.inertia, sc.k_e);
    std::normal_distribution<double> nrm(0.0, 1.0);
    std::vector<std::pair<VecN, VecN>> samples;
    for (int i = 0; i < 100; ++i) {
      rigidbody::RigidBodyState s;
      s.R = detail::random_glp(rng, 0.05);
      s.Omega = Vec3(nrm(rng), nrm(rng), nrm(rng));
      VecN u(3);
      u << nrm(rng), nrm(rng), nrm(rng);
      samples.emplace_back(s.flatten(), u);
    }
    const auto rep = check_tangency(sys, samples, 1e-10);
    pass = rep.pass;
    out << "check=tangency\n";
    out << "max_residual=" << rep.worst << "\n";
  } else {
    throw ConfigError("unknown certification: " + which +
                      " (expected uco|ucc|decay|gradient|tangency)");
  }
  out << "pass=" << (pass ? "true" : "false") << "\n";
  return pass ? kExitOk : kExitDiverged;
}

}  // namespace embctl::sim
