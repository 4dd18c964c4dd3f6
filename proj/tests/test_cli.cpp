#include "doctest.h"

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

std::string cli_binary() {
  const char* env = std::getenv("QPROBE_CLI");
  REQUIRE(env != nullptr);
  return env;
}

struct RunResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

RunResult run_cli(const std::string& args, const fs::path& dir) {
  const fs::path log = dir / "cli_output.log";
  const std::string cmd = cli_binary() + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::ostringstream buf;
  buf << in.rdbuf();
  r.output = buf.str();
  return r;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("qprobe_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const fs::path path = dir / "config.json";
  std::ofstream out(path);
  out << text;
  return path;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, sep)) out.push_back(item);
  return out;
}

const std::string kLadderConfig = R"({
  "schema_version": 1,
  "model": {"type": "ladder", "rungs": 2, "rung_hopping": 1.5, "flux": 1.0,
            "statistics": "hardcore", "particles": 1},
  "probe": {"links": [[0, 1]], "estimator": "antisym"}
})";

}  // namespace

TEST_CASE("validate-config accepts a well-formed file") {
  const fs::path dir = fresh_dir("validate_ok");
  const fs::path cfg = write_config(dir, kLadderConfig);
  const RunResult r = run_cli("--config " + cfg.string() + " validate-config", dir);
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("config OK") != std::string::npos);
}

TEST_CASE("validate-config names unknown keys") {
  const fs::path dir = fresh_dir("validate_unknown");
  const fs::path cfg = write_config(dir, R"({
    "schema_version": 1,
    "model": {"type": "ladder", "rungs": 2, "fluxx": 1.0}
  })");
  const RunResult r = run_cli("--config " + cfg.string() + " validate-config", dir);
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("fluxx") != std::string::npos);
}

TEST_CASE("validate-config requires the phonon frequency for ion runs") {
  const fs::path dir = fresh_dir("validate_omega");
  const fs::path cfg = write_config(dir, R"({
    "schema_version": 1,
    "model": {"type": "spin_ring", "sites": 3, "particles": 1,
              "links": [[0, 1, 1.0], [1, 2, 1.0], [2, 0, 1.0]]},
    "ion": {"temperature": 0.5}
  })");
  const RunResult r = run_cli("--config " + cfg.string() + " validate-config", dir);
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("omega") != std::string::npos);
}

TEST_CASE("malformed JSON and missing files fail with a nonzero exit code") {
  const fs::path dir = fresh_dir("validate_bad");
  const fs::path cfg = write_config(dir, "{ not json");
  CHECK(run_cli("--config " + cfg.string() + " validate-config", dir).exit_code == 1);
  CHECK(run_cli("--config " + (dir / "absent.json").string() + " validate-config", dir).exit_code ==
        1);
}

TEST_CASE("ground-state reports zero currents at zero flux") {
  const fs::path dir = fresh_dir("gs_zero_flux");
  const fs::path cfg = write_config(dir, R"({
    "schema_version": 1,
    "model": {"type": "ladder", "rungs": 3, "rung_hopping": 1.25, "flux": 0.0,
              "statistics": "hardcore", "particles": 2}
  })");
  const RunResult r = run_cli("--config " + cfg.string() + " --out " + dir.string() +
                                  " ground-state",
                              dir);
  REQUIRE(r.exit_code == 0);
  const std::vector<std::string> rows = split(slurp(dir / "ground_state.csv"), '\n');
  REQUIRE(rows.size() > 1);
  CHECK(rows[0] == "l1,l2,magnitude,phase,current");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].empty()) continue;
    const std::vector<std::string> cols = split(rows[i], ',');
    REQUIRE(cols.size() == 5);
    CHECK(std::abs(std::stod(cols[4])) < 1e-8);
  }
}

TEST_CASE("ground-state summary carries full-precision floats") {
  const fs::path dir = fresh_dir("gs_precision");
  const fs::path cfg = write_config(dir, kLadderConfig);
  REQUIRE(run_cli("--config " + cfg.string() + " --out " + dir.string() + " ground-state", dir)
              .exit_code == 0);
  const std::string summary = slurp(dir / "ground_state_summary.csv");
  std::string energy_row;
  for (const std::string& row : split(summary, '\n'))
    if (row.rfind("energy,", 0) == 0) energy_row = row;
  REQUIRE_FALSE(energy_row.empty());
  // 17 significant digits on an irrational ground-state energy
  int digits = 0;
  for (char c : energy_row.substr(7))
    if (c >= '0' && c <= '9') ++digits;
  CHECK(digits >= 16);
}

TEST_CASE("json format writes a single schema-tagged document") {
  const fs::path dir = fresh_dir("gs_json");
  const fs::path cfg = write_config(dir, kLadderConfig);
  REQUIRE(run_cli("--config " + cfg.string() + " --out " + dir.string() +
                      " --format json ground-state",
                  dir)
              .exit_code == 0);
  const std::string doc = slurp(dir / "ground_state.json");
  CHECK(doc.find("\"schema_version\"") != std::string::npos);
  CHECK(doc.find("\"chiral_current\"") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "ground_state.csv"));
}

TEST_CASE("probe emits the sweep table and extraction record") {
  const fs::path dir = fresh_dir("probe_basic");
  const fs::path cfg = write_config(dir, kLadderConfig);
  const RunResult r = run_cli("--config " + cfg.string() + " --out " + dir.string() +
                                  " --threads 2 probe",
                              dir);
  REQUIRE(r.exit_code == 0);

  const std::vector<std::string> rows = split(slurp(dir / "probe_link_0_1.csv"), '\n');
  REQUIRE(rows.size() > 3);
  CHECK(rows[0] == "s,p0,p1,p2,ptilde,pred_linear,pred_quadratic");
  const std::vector<std::string> first = split(rows[1], ',');
  REQUIRE(first.size() == 7);
  CHECK(std::stod(first[0]) == 0.0);  // grid starts at the unperturbed point
  CHECK(std::stod(first[1]) == 1.0);

  const std::string doc = slurp(dir / "extractions.json");
  CHECK(doc.find("\"schema_version\"") != std::string::npos);
  CHECK(doc.find("\"value\"") != std::string::npos);
  CHECK(doc.find("\"exact_reference\"") != std::string::npos);
}

TEST_CASE("repeated runs with the same seed are byte-identical") {
  const fs::path dir1 = fresh_dir("det_a");
  const fs::path dir2 = fresh_dir("det_b");
  const fs::path cfg = write_config(dir1, kLadderConfig);
  for (const fs::path& dir : {dir1, dir2})
    REQUIRE(run_cli("--config " + cfg.string() + " --out " + dir.string() +
                        " --seed 7 probe",
                    dir)
                .exit_code == 0);
  CHECK(slurp(dir1 / "probe_link_0_1.csv") == slurp(dir2 / "probe_link_0_1.csv"));
  CHECK(slurp(dir1 / "extractions.json") == slurp(dir2 / "extractions.json"));
}

TEST_CASE("dimension budget from the environment rejects oversized runs") {
  const fs::path dir = fresh_dir("budget");
  const fs::path cfg = write_config(dir, kLadderConfig);
  const std::string cmd = "QPROBE_DIM_BUDGET=2 " + cli_binary() + " --config " + cfg.string() +
                          " --out " + dir.string() + " probe > " + (dir / "log").string() +
                          " 2>&1";
  const int status = std::system(cmd.c_str());
  CHECK(WEXITSTATUS(status) == 1);
  CHECK(slurp(dir / "log").find("budget") != std::string::npos);
}

TEST_CASE("trapped-ion run writes sweep, coefficients, and extractions") {
  const fs::path dir = fresh_dir("ion_run");
  const fs::path cfg = write_config(dir, R"({
    "schema_version": 1,
    "model": {"type": "spin_ring", "sites": 3, "particles": 1,
              "links": [[0, 1, 0.6967, 0.71736], [1, 2, 0.6967, 0.71736], [2, 0, 0.6967, 0.71736]]},
    "ion": {"omega": 1.0, "temperature": 0.5, "n_max": 4, "link": [0, 1], "channels": [0]}
  })");
  const RunResult r = run_cli("--config " + cfg.string() + " --out " + dir.string() +
                                  " trapped-ion",
                              dir);
  REQUIRE(r.exit_code == 0);
  const std::vector<std::string> sweep_rows = split(slurp(dir / "thermal_sweep.csv"), '\n');
  REQUIRE(sweep_rows.size() > 3);
  CHECK(sweep_rows[0].rfind("s,p0,", 0) == 0);
  const std::vector<std::string> coeff_rows = split(slurp(dir / "thermal_coefficients.csv"), '\n');
  CHECK(coeff_rows.size() >= 6);
  const std::string doc = slurp(dir / "ion_extractions.json");
  CHECK(doc.find("\"value\"") != std::string::npos);
  CHECK(doc.find("\"exact_reference\"") != std::string::npos);
}

TEST_CASE("unknown subcommands and missing flags are usage errors") {
  const fs::path dir = fresh_dir("usage");
  CHECK(run_cli("frobnicate", dir).exit_code != 0);
  CHECK(run_cli("probe", dir).exit_code != 0);  // --config is required
}
