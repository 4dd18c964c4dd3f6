#include "qprobe/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace qprobe {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw std::invalid_argument("config: " + where + ": " + what);
}

void check_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
  if (!obj.is_object()) fail(where, "expected an object");
  for (const auto& [key, value] : obj.items())
    if (allowed.count(key) == 0) fail(where, "unknown key '" + key + "'");
}

double get_finite(const json& obj, const std::string& where, const std::string& key,
                  double fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number()) fail(where, "'" + key + "' must be a number");
  const double v = obj[key].get<double>();
  if (!std::isfinite(v)) fail(where, "'" + key + "' must be finite");
  return v;
}

int get_int(const json& obj, const std::string& where, const std::string& key, int fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number_integer()) fail(where, "'" + key + "' must be an integer");
  return obj[key].get<int>();
}

bool get_bool(const json& obj, const std::string& where, const std::string& key, bool fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_boolean()) fail(where, "'" + key + "' must be a boolean");
  return obj[key].get<bool>();
}

std::string get_string(const json& obj, const std::string& where, const std::string& key,
                       const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_string()) fail(where, "'" + key + "' must be a string");
  return obj[key].get<std::string>();
}

Statistics parse_statistics(const std::string& s, const std::string& where) {
  if (s == "boson") return Statistics::Boson;
  if (s == "fermion") return Statistics::Fermion;
  if (s == "spin" || s == "hardcore") return Statistics::SpinHalf;
  fail(where, "'statistics' must be one of boson | fermion | hardcore");
}

ModelConfig parse_model(const json& obj) {
  check_keys(obj, "model",
             {"type", "particles", "rungs", "leg_hopping", "rung_hopping", "flux", "interaction",
              "periodic", "max_occupancy", "statistics", "sites", "links", "reference_scale"});
  ModelConfig m;
  m.type = get_string(obj, "model", "type", "ladder");
  if (m.type != "ladder" && m.type != "triangle" && m.type != "spin_ring")
    fail("model", "'type' must be one of ladder | triangle | spin_ring");
  m.particles = get_int(obj, "model", "particles", 1);
  if (m.particles < 1) fail("model", "'particles' must be >= 1");
  m.statistics = parse_statistics(get_string(obj, "model", "statistics", "boson"), "model");
  m.max_occupancy = get_int(obj, "model", "max_occupancy", ModeSpec::kUnbounded);
  m.interaction = get_finite(obj, "model", "interaction", 0.0);

  if (m.type == "ladder") {
    m.ladder.rungs = get_int(obj, "model", "rungs", 4);
    m.ladder.leg_hopping = get_finite(obj, "model", "leg_hopping", 1.0);
    m.ladder.rung_hopping = get_finite(obj, "model", "rung_hopping", 1.0);
    m.ladder.flux = get_finite(obj, "model", "flux", 0.0);
    m.ladder.interaction = m.interaction;
    m.ladder.periodic = get_bool(obj, "model", "periodic", false);
    m.ladder.max_occupancy = m.max_occupancy;
    m.ladder.statistics = m.statistics == Statistics::SpinHalf ? Statistics::Boson : m.statistics;
    if (m.statistics == Statistics::SpinHalf) m.ladder.max_occupancy = 1;
    m.ladder.validate();
  } else {
    m.sites = get_int(obj, "model", "sites", 3);
    if (m.sites < 2) fail("model", "'sites' must be >= 2");
    m.reference_scale = get_finite(obj, "model", "reference_scale", 1.0);
    if (!obj.contains("links")) fail("model", "'links' is required for this model type");
    if (!obj["links"].is_array()) fail("model", "'links' must be an array");
    for (const auto& entry : obj["links"]) {
      if (!entry.is_array() || (entry.size() != 3 && entry.size() != 4))
        fail("model", "each link must be [l1, l2, re] or [l1, l2, re, im]");
      TriangleLink link;
      link.l1 = entry[0].get<int>();
      link.l2 = entry[1].get<int>();
      const double re = entry[2].get<double>();
      const double im = entry.size() == 4 ? entry[3].get<double>() : 0.0;
      if (!std::isfinite(re) || !std::isfinite(im)) fail("model", "link amplitude must be finite");
      link.amplitude = Complex(re, im);
      m.links.push_back(link);
    }
  }
  return m;
}

GridPolicy parse_grid(const json& obj) {
  check_keys(obj, "probe.grid", {"s0", "ratio", "s_max", "p_floor", "max_points"});
  GridPolicy g;
  g.s0 = get_finite(obj, "probe.grid", "s0", g.s0);
  g.ratio = get_finite(obj, "probe.grid", "ratio", g.ratio);
  g.s_max = get_finite(obj, "probe.grid", "s_max", g.s_max);
  g.p_floor = get_finite(obj, "probe.grid", "p_floor", g.p_floor);
  g.max_points = get_int(obj, "probe.grid", "max_points", g.max_points);
  if (g.s0 <= 0 || g.ratio <= 1 || g.s_max <= g.s0 || g.max_points < 4)
    fail("probe.grid", "need s0 > 0, ratio > 1, s_max > s0, max_points >= 4");
  return g;
}

ProbeConfig parse_probe(const json& obj) {
  check_keys(obj, "probe",
             {"links", "global", "estimator", "variance", "fit_order", "dt", "truncation",
              "evolution", "window_linear", "window_quadratic", "grid", "detection", "shots"});
  ProbeConfig p;
  if (obj.contains("links")) {
    if (!obj["links"].is_array()) fail("probe", "'links' must be an array");
    for (const auto& entry : obj["links"]) {
      if (!entry.is_array() || entry.size() != 2) fail("probe", "each link must be [l1, l2]");
      p.links.push_back({entry[0].get<int>(), entry[1].get<int>()});
    }
  }
  p.global = get_bool(obj, "probe", "global", false);
  p.estimator = get_string(obj, "probe", "estimator", "antisym");
  if (p.estimator != "p0" && p.estimator != "ptilde" && p.estimator != "antisym")
    fail("probe", "'estimator' must be one of p0 | ptilde | antisym");
  p.variance = get_bool(obj, "probe", "variance", false);
  p.fit_order = get_int(obj, "probe", "fit_order", 4);
  if (p.fit_order != 2 && p.fit_order != 4) fail("probe", "'fit_order' must be 2 or 4");
  p.sweep.dt = get_finite(obj, "probe", "dt", p.sweep.dt);
  p.sweep.truncation = get_int(obj, "probe", "truncation", p.sweep.truncation);
  const std::string evol = get_string(obj, "probe", "evolution", "full");
  if (evol == "full")
    p.sweep.evolution = EvolutionMode::Full;
  else if (evol == "pulse_only")
    p.sweep.evolution = EvolutionMode::PulseOnly;
  else
    fail("probe", "'evolution' must be full | pulse_only");
  p.sweep.window_linear = get_finite(obj, "probe", "window_linear", p.sweep.window_linear);
  p.sweep.window_quadratic = get_finite(obj, "probe", "window_quadratic", p.sweep.window_quadratic);
  if (obj.contains("grid")) p.sweep.grid = parse_grid(obj["grid"]);
  if (obj.contains("detection")) {
    check_keys(obj["detection"], "probe.detection", {"alpha", "beta"});
    DetectionErrorModel d;
    d.alpha = get_finite(obj["detection"], "probe.detection", "alpha", 0.0);
    d.beta = get_finite(obj["detection"], "probe.detection", "beta", 0.0);
    d.validate();
    p.detection = d;
  }
  p.shots = get_int(obj, "probe", "shots", 0);
  if (p.shots < 0) fail("probe", "'shots' must be >= 0");
  return p;
}

std::vector<double> parse_number_list(const json& arr, const std::string& where) {
  if (!arr.is_array()) fail(where, "expected an array of numbers");
  std::vector<double> out;
  for (const auto& v : arr) {
    if (!v.is_number() || !std::isfinite(v.get<double>())) fail(where, "entries must be finite numbers");
    out.push_back(v.get<double>());
  }
  if (out.empty()) fail(where, "list must not be empty");
  return out;
}

ScanConfig parse_scan(const json& obj) {
  check_keys(obj, "scan", {"rung_hopping", "interaction"});
  ScanConfig s;
  if (obj.contains("rung_hopping"))
    s.rung_hopping = parse_number_list(obj["rung_hopping"], "scan.rung_hopping");
  if (obj.contains("interaction"))
    s.interaction = parse_number_list(obj["interaction"], "scan.interaction");
  return s;
}

IonConfig parse_ion(const json& obj) {
  check_keys(obj, "ion",
             {"omega", "temperature", "n_max", "link", "eta", "rabi", "reference_rabi",
              "channels"});
  IonConfig ion;
  if (!obj.contains("omega")) fail("ion", "'omega' is required");
  ion.omega = get_finite(obj, "ion", "omega", 1.0);
  if (ion.omega <= 0) fail("ion", "'omega' must be positive");
  ion.temperature = get_finite(obj, "ion", "temperature", 0.0);
  if (ion.temperature < 0) fail("ion", "'temperature' must be >= 0");
  ion.n_max = get_int(obj, "ion", "n_max", -1);
  if (obj.contains("link")) {
    if (!obj["link"].is_array() || obj["link"].size() != 2) fail("ion", "'link' must be [l1, l2]");
    ion.link = {obj["link"][0].get<int>(), obj["link"][1].get<int>()};
  }
  ion.eta = get_finite(obj, "ion", "eta", ion.eta);
  ion.rabi = get_finite(obj, "ion", "rabi", ion.rabi);
  ion.reference_rabi = get_finite(obj, "ion", "reference_rabi", ion.reference_rabi);
  if (obj.contains("channels")) {
    ion.channels.clear();
    for (const auto& c : obj["channels"]) {
      if (!c.is_number_integer() || c.get<int>() < 0) fail("ion", "'channels' must be non-negative integers");
      ion.channels.push_back(c.get<int>());
    }
  }
  return ion;
}

SolverConfig parse_solver(const json& obj) {
  check_keys(obj, "solver", {"tol", "seed", "dense_threshold"});
  SolverConfig s;
  s.tol = get_finite(obj, "solver", "tol", s.tol);
  if (s.tol <= 0) fail("solver", "'tol' must be positive");
  s.seed = static_cast<unsigned>(get_int(obj, "solver", "seed", 1));
  s.dense_threshold = get_int(obj, "solver", "dense_threshold", s.dense_threshold);
  return s;
}

RunConfig parse(const json& root) {
  check_keys(root, "top level", {"schema_version", "model", "probe", "scan", "ion", "solver"});
  RunConfig cfg;
  cfg.schema_version = get_int(root, "top level", "schema_version", 1);
  if (cfg.schema_version != 1) fail("top level", "unsupported schema_version");
  if (!root.contains("model")) fail("top level", "'model' section is required");
  cfg.model = parse_model(root["model"]);
  if (root.contains("probe")) cfg.probe = parse_probe(root["probe"]);
  if (root.contains("scan")) cfg.scan = parse_scan(root["scan"]);
  if (root.contains("ion")) cfg.ion = parse_ion(root["ion"]);
  if (root.contains("solver")) cfg.solver = parse_solver(root["solver"]);
  return cfg;
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: malformed JSON: ") + e.what());
  }
  return parse(root);
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

HoppingTable model_hoppings(const ModelConfig& model) {
  if (model.type == "ladder") return ladder_hoppings(model.ladder);
  HoppingTable t(model.sites);
  for (const auto& link : model.links) t.set(link.l1, link.l2, link.amplitude);
  return t;
}

Model build_model(const ModelConfig& model) {
  if (model.type == "ladder") return build_hh_ladder(model.ladder, model.particles);
  if (model.type == "spin_ring") return build_spin_xy(model_hoppings(model), nullptr, model.particles);
  PlaquetteSpec plaq;
  plaq.sites = {0, 1, 2};
  plaq.hoppings = model_hoppings(model);
  plaq.reference_scale = model.reference_scale;
  return build_triangle(plaq, model.particles, model.statistics,
                        model.statistics == Statistics::Boson ? model.max_occupancy : 1,
                        model.interaction);
}

}  // namespace qprobe
