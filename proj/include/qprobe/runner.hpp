#pragma once

#include <string>

#include "qprobe/config.hpp"

namespace qprobe {

struct RunContext {
  std::string out_dir = ".";
  int threads = 0;  // 0: logical cores
  unsigned seed = 0;  // 0: take the config's solver seed
  std::string format = "csv";  // csv | json
};

// Deterministic 17-significant-digit float formatting used for every numeric
// output, so identical runs produce byte-identical files.
std::string format_double(double v);

int cmd_ground_state(const RunConfig& config, const RunContext& ctx);
int cmd_probe(const RunConfig& config, const RunContext& ctx);
int cmd_phase_scan(const RunConfig& config, const RunContext& ctx);
int cmd_trapped_ion(const RunConfig& config, const RunContext& ctx);
int cmd_validate_config(const std::string& path);

}  // namespace qprobe
