#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "qprobe/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Ancilla-probe simulator for lattice currents"};
  app.require_subcommand(1);

  std::string config_path;
  qprobe::RunContext ctx;
  app.add_option("--config", config_path, "Path to the JSON run configuration")->required();
  app.add_option("--out", ctx.out_dir, "Output directory (default: current directory)");
  app.add_option("--threads", ctx.threads, "Worker threads (default: logical cores)");
  app.add_option("--seed", ctx.seed, "Random seed override (default: from config)");
  app.add_option("--format", ctx.format, "Output format: csv or json")
      ->check(CLI::IsMember({"csv", "json"}));

  auto* ground = app.add_subcommand("ground-state", "Ground state, currents, and variances");
  auto* probe = app.add_subcommand("probe", "Ancilla sweeps and current extraction per link");
  auto* scan = app.add_subcommand("phase-scan", "Chiral current / variance over a K-U grid");
  auto* ion = app.add_subcommand("trapped-ion", "Thermal-phonon spin-current extraction");
  auto* validate = app.add_subcommand("validate-config", "Check a config file and exit");

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate->parsed()) return qprobe::cmd_validate_config(config_path);
    const qprobe::RunConfig config = qprobe::load_config(config_path);
    if (ground->parsed()) return qprobe::cmd_ground_state(config, ctx);
    if (probe->parsed()) return qprobe::cmd_probe(config, ctx);
    if (scan->parsed()) return qprobe::cmd_phase_scan(config, ctx);
    if (ion->parsed()) return qprobe::cmd_trapped_ion(config, ctx);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
