// Command-line harness: closed-loop simulation, the published experiment,
// certification reports, and offline gain schedules.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "embctl/sim/commands.hpp"

namespace fs = std::filesystem;
using namespace embctl;

int main(int argc, char** argv) {
  CLI::App app{"Observer-based tracking control on SO(3) via Euclidean embedding"};
  app.require_subcommand(0, 1);

  std::string batch_dir;
  app.add_option("--batch", batch_dir, "run every config in a directory");

  std::string sim_config, sim_out = "out";
  auto* sim = app.add_subcommand("simulate", "run a closed-loop scenario");
  sim->add_option("config", sim_config, "scenario config file")->required();
  sim->add_option("--out", sim_out, "output directory");

  std::string rp_out = "out";
  auto* rp = app.add_subcommand("reproduce-paper",
                                "run the published rigid-body experiment");
  rp->add_option("--out", rp_out, "output directory");

  std::string cert_config, cert_which, cert_out = "report.txt";
  auto* cert = app.add_subcommand("certify", "numeric certification checks");
  cert->add_option("config", cert_config, "scenario config file")->required();
  cert->add_option("which", cert_which, "uco|ucc|decay|gradient|tangency")->required();
  cert->add_option("--out", cert_out, "report file");

  std::string gains_config, gains_out = "out";
  auto* gains = app.add_subcommand("gains", "precompute the observer gain schedule");
  gains->add_option("config", gains_config, "scenario config file")->required();
  gains->add_option("--out", gains_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (!batch_dir.empty()) {
      int worst = sim::kExitOk;
      for (const auto& e : fs::directory_iterator(batch_dir)) {
        if (!e.is_regular_file()) continue;
        const auto p = e.path();
        if (p.extension() != ".toml" && p.extension() != ".cfg") continue;
        const auto sc = sim::scenario_from_config(sim::parse_config_file(p.string()));
        const std::string out = (p.parent_path() / p.stem()).string() + ".out";
        std::cout << p.filename().string() << " -> " << out << "\n";
        worst = std::max(worst, sim::cmd_simulate(sc, out));
      }
      return worst;
    }
    if (*sim) {
      const auto sc = sim::scenario_from_config(sim::parse_config_file(sim_config));
      return sim::cmd_simulate(sc, sim_out);
    }
    if (*rp) return sim::cmd_reproduce_paper(rp_out);
    if (*cert) {
      const auto sc = sim::scenario_from_config(sim::parse_config_file(cert_config));
      return sim::cmd_certify(sc, cert_which, cert_out);
    }
    if (*gains) {
      const auto sc = sim::scenario_from_config(sim::parse_config_file(gains_config));
      return sim::cmd_gains(sc, gains_out);
    }
    std::cout << app.help();
    return sim::kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return sim::kExitConfig;
  } catch (const NonFiniteState& e) {
    std::cerr << e.what() << "\n";
    return sim::kExitDiverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return sim::kExitDiverged;
  }
}
