#pragma once

#include <array>
#include <optional>
#include <string>

#include "qprobe/models.hpp"
#include "qprobe/probe.hpp"

namespace qprobe {

struct SolverConfig {
  double tol = 1e-10;
  unsigned seed = 1;
  int dense_threshold = 1024;
};

struct TriangleLink {
  int l1 = 0;
  int l2 = 1;
  Complex amplitude{1, 0};
};

struct ModelConfig {
  std::string type = "ladder";  // ladder | triangle | spin_ring
  int particles = 1;

  LadderSpec ladder;  // type == ladder

  // type == triangle
  int sites = 3;
  std::vector<TriangleLink> links;
  Statistics statistics = Statistics::Boson;
  int max_occupancy = ModeSpec::kUnbounded;
  double interaction = 0;
  double reference_scale = 1;

  // type == spin_ring (particles = number of down spins)
};

struct ProbeConfig {
  std::vector<std::array<int, 2>> links;  // empty: every lattice link
  bool global = false;
  std::string estimator = "antisym";  // p0 | ptilde | antisym
  bool variance = false;
  int fit_order = 4;
  SweepOptions sweep;
  std::optional<DetectionErrorModel> detection;
  int shots = 0;  // 0: exact probabilities
};

struct ScanConfig {
  std::vector<double> rung_hopping;
  std::vector<double> interaction;
};

struct IonConfig {
  double omega = 1;
  double temperature = 0;
  int n_max = -1;
  std::array<int, 2> link{0, 1};
  double eta = 0.1;
  double rabi = 1;
  double reference_rabi = 1;
  std::vector<int> channels{0};
};

struct RunConfig {
  int schema_version = 1;
  ModelConfig model;
  ProbeConfig probe;
  ScanConfig scan;
  IonConfig ion;
  SolverConfig solver;
};

// Parses and validates a config; unknown keys and non-finite numbers are
// rejected with the offending key named in the exception message.
RunConfig load_config(const std::string& path);
RunConfig parse_config_text(const std::string& text);

// Model construction from a validated config.
Model build_model(const ModelConfig& model);
HoppingTable model_hoppings(const ModelConfig& model);

}  // namespace qprobe
