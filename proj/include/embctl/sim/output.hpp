#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "embctl/errors.hpp"
#include "embctl/ltv.hpp"
#include "embctl/sim/runner.hpp"

namespace embctl::sim {

namespace detail {

inline std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

inline void write_trace_csv(const RunRecord& rec, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "t,dR_norm,dOmega_norm,eo_norm,Vtilde,orth_drift,u1,u2,u3,"
         "zo1,zo2,zo3,zo4,zo5,zo6\n";
  for (const auto& r : rec.rows) {
    out << detail::fmt17(r.t) << ',' << detail::fmt17(r.dR_norm) << ','
        << detail::fmt17(r.dOmega_norm) << ',' << detail::fmt17(r.eo_norm) << ','
        << detail::fmt17(r.v_tilde) << ',' << detail::fmt17(r.orth_drift);
    for (int i = 0; i < 3; ++i) out << ',' << detail::fmt17(r.u[i]);
    for (int i = 0; i < 6; ++i) out << ',' << detail::fmt17(r.z_o[i]);
    out << '\n';
  }
}

inline double tracking_norm(const RunRow& r) {
  return std::sqrt(r.dR_norm * r.dR_norm + r.dOmega_norm * r.dOmega_norm);
}

inline void write_summary(const RunRecord& rec, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  const auto& first = rec.rows.front();
  const auto& last = rec.rows.back();
  const double tr0 = tracking_norm(first);
  const double trf = tracking_norm(last);
  out << "aborted=" << (rec.aborted ? "true" : "false") << "\n";
  if (rec.aborted) {
    out << "abort_reason=" << rec.abort_reason << "\n";
    out << "abort_time=" << detail::fmt17(rec.abort_time) << "\n";
  }
  out << "initial_attitude_error=" << detail::fmt17(first.dR_norm) << "\n";
  out << "initial_tracking_error=" << detail::fmt17(tr0) << "\n";
  out << "final_tracking_error=" << detail::fmt17(trf) << "\n";
  out << "initial_observation_error=" << detail::fmt17(first.eo_norm) << "\n";
  out << "final_observation_error=" << detail::fmt17(last.eo_norm) << "\n";
  const bool tr_pass = tr0 > 0.0 && trf < 0.01 * tr0;
  const bool eo_pass = first.eo_norm > 0.0 && last.eo_norm < 0.01 * first.eo_norm;
  out << "tracking_below_1pct=" << (tr_pass ? "true" : "false") << "\n";
  out << "observation_below_1pct=" << (eo_pass ? "true" : "false") << "\n";
  out << "tracking_decay_rate=" << detail::fmt17(rec.tracking_rate) << "\n";
  out << "tracking_decay_r2=" << detail::fmt17(rec.tracking_r2) << "\n";
  out << "observation_decay_rate=" << detail::fmt17(rec.observation_rate) << "\n";
  out << "observation_decay_r2=" << detail::fmt17(rec.observation_r2) << "\n";
  out << "tracking_decay_pass="
      << ((rec.tracking_rate < 0.0 && rec.tracking_r2 > 0.95) ? "true" : "false")
      << "\n";
  out << "max_orth_drift="
      << detail::fmt17(std::max_element(rec.rows.begin(), rec.rows.end(),
                                        [](const RunRow& a, const RunRow& b) {
                                          return a.orth_drift < b.orth_drift;
                                        })
                           ->orth_drift)
      << "\n";
}

/// Minimal dependency-free log-scale SVG plot of the two error norms.
inline void write_errors_svg(const RunRecord& rec, const std::string& path) {
  const int W = 800, H = 500, ML = 70, MR = 20, MT = 20, MB = 50;
  const double t0 = rec.rows.front().t, t1 = rec.rows.back().t;
  const double floor_log = -8.0;
  double top_log = -8.0;
  for (const auto& r : rec.rows) {
    top_log = std::max(top_log, std::log10(std::max(tracking_norm(r), 1e-300)));
    top_log = std::max(top_log, std::log10(std::max(r.eo_norm, 1e-300)));
  }
  top_log = std::ceil(top_log);
  auto px = [&](double t) { return ML + (W - ML - MR) * (t - t0) / (t1 - t0); };
  auto py = [&](double v) {
    const double lv = std::clamp(std::log10(std::max(v, 1e-300)), floor_log, top_log);
    return MT + (H - MT - MB) * (top_log - lv) / (top_log - floor_log);
  };
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\""
      << H << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  // axes and decade gridlines
  out << "<line x1=\"" << ML << "\" y1=\"" << H - MB << "\" x2=\"" << W - MR
      << "\" y2=\"" << H - MB << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << ML << "\" y1=\"" << MT << "\" x2=\"" << ML << "\" y2=\""
      << H - MB << "\" stroke=\"black\"/>\n";
  for (int d = static_cast<int>(floor_log); d <= static_cast<int>(top_log); ++d) {
    const double y = py(std::pow(10.0, d));
    out << "<line x1=\"" << ML << "\" y1=\"" << y << "\" x2=\"" << W - MR
        << "\" y2=\"" << y << "\" stroke=\"#dddddd\"/>\n";
    out << "<text x=\"" << ML - 8 << "\" y=\"" << y + 4
        << "\" text-anchor=\"end\" font-size=\"12\">1e" << d << "</text>\n";
  }
  for (int i = 0; i <= 10; ++i) {
    const double t = t0 + (t1 - t0) * i / 10.0;
    out << "<text x=\"" << px(t) << "\" y=\"" << H - MB + 18
        << "\" text-anchor=\"middle\" font-size=\"12\">" << t << "</text>\n";
  }
  auto polyline = [&](auto value, const char* color) {
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < rec.rows.size(); ++i) {
      if (i % 10 == 0 || i + 1 == rec.rows.size()) {
        out << px(rec.rows[i].t) << ',' << py(value(rec.rows[i])) << ' ';
      }
    }
    out << "\"/>\n";
  };
  polyline([](const RunRow& r) { return tracking_norm(r); }, "#1f77b4");
  polyline([](const RunRow& r) { return r.eo_norm; }, "#d62728");
  out << "<text x=\"" << W - 240 << "\" y=\"" << MT + 16
      << "\" font-size=\"13\" fill=\"#1f77b4\">tracking error sqrt(|dR|^2+|dOmega|^2)</text>\n";
  out << "<text x=\"" << W - 240 << "\" y=\"" << MT + 34
      << "\" font-size=\"13\" fill=\"#d62728\">observation error |e_o|</text>\n";
  out << "<text x=\"" << (ML + W - MR) / 2 << "\" y=\"" << H - 12
      << "\" text-anchor=\"middle\" font-size=\"13\">t [s]</text>\n";
  out << "</svg>\n";
}

inline void write_gains_csv(const RiccatiSchedule& sched, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "t";
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 3; ++j) out << ",L" << i + 1 << j + 1;
  out << "\n";
  for (std::size_t k = 0; k < sched.times.size(); ++k) {
    out << detail::fmt17(sched.times[k]);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 3; ++j) out << ',' << detail::fmt17(sched.L[k](i, j));
    out << "\n";
  }
}

}  // namespace embctl::sim
