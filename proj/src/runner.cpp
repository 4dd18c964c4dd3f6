#include "qprobe/runner.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <fstream>
#include <iostream>
#include <thread>

#include "json.hpp"
#include "qprobe/perturbation.hpp"
#include "qprobe/solver.hpp"
#include "qprobe/trapped_ion.hpp"

namespace qprobe {

namespace {

using nlohmann::json;

int effective_threads(const RunContext& ctx) {
  if (ctx.threads > 0) return ctx.threads;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

unsigned effective_seed(const RunConfig& config, const RunContext& ctx) {
  return ctx.seed != 0 ? ctx.seed : config.solver.seed;
}

void parallel_for(int n, int threads, const std::function<void(int)>& body) {
  if (n <= 0) return;
  const int workers = std::min(std::max(threads, 1), n);
  if (workers == 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

std::filesystem::path out_path(const RunContext& ctx, const std::string& name) {
  std::filesystem::create_directories(ctx.out_dir);
  return std::filesystem::path(ctx.out_dir) / name;
}

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& line : lines) out << line << '\n';
}

void write_json(const std::filesystem::path& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

std::string join_csv(const std::vector<std::string>& cells) {
  std::string line;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) line += ',';
    line += cells[i];
  }
  return line;
}

json extraction_to_json(const ExtractionResult& r) {
  json j{{"estimator", r.estimator},
         {"value", r.value},
         {"raw_slope", r.raw_slope},
         {"window", r.window_used},
         {"s_max", r.s_max_used},
         {"points", r.points_used},
         {"fit_order", r.fit_order},
         {"residual", r.residual},
         {"sweeps", r.sweeps_used},
         {"degenerate_caveat", r.degenerate_caveat}};
  if (r.exact_reference) {
    j["exact_reference"] = *r.exact_reference;
    j["relative_error"] = r.relative_error ? *r.relative_error : 0.0;
  }
  return j;
}

void attach_reference(ExtractionResult& r, double exact) {
  r.exact_reference = exact;
  const double denom = std::max(std::abs(exact), 1e-300);
  r.relative_error = std::abs(r.value - exact) / denom;
}

LinkCurrent model_link_current(const ModelConfig& model, const HoppingTable& hoppings, int l1,
                               int l2, const Basis& basis) {
  if (model.type == "spin_ring") return spin_current(hoppings, l1, l2, basis);
  return link_current(hoppings, l1, l2, basis);
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

int cmd_ground_state(const RunConfig& config, const RunContext& ctx) {
  const Model model = build_model(config.model);
  const GroundStateResult gs = ground_state(model.hamiltonian, config.solver.tol,
                                            effective_seed(config, ctx),
                                            config.solver.dense_threshold);

  std::vector<std::string> link_rows{"l1,l2,magnitude,phase,current"};
  json links_json = json::array();
  for (const auto& [l1, l2] : model.hoppings.links()) {
    if (model.hoppings.amplitude(l1, l2) == Complex(0)) continue;
    const LinkCurrent lc = model_link_current(config.model, model.hoppings, l1, l2, model.basis);
    const double j = std::real(expectation(gs.state, lc.op));
    link_rows.push_back(join_csv({std::to_string(l1), std::to_string(l2),
                                  format_double(lc.magnitude), format_double(lc.phase),
                                  format_double(j)}));
    links_json.push_back({{"l1", l1}, {"l2", l2}, {"magnitude", lc.magnitude},
                          {"phase", lc.phase}, {"current", j}});
  }

  json summary{{"schema_version", 1},
               {"energy", gs.energy},
               {"gap", gs.gap_estimate},
               {"residual", gs.residual},
               {"near_degenerate", gs.near_degenerate},
               {"dimension", model.basis.dimension()}};
  if (config.model.type == "ladder") {
    const SparseOperator jc = chiral_current(config.model.ladder, model.basis);
    summary["chiral_current"] = std::real(expectation(gs.state, jc));
    summary["mean_current_variance"] =
        mean_current_variance(gs.state, model.hoppings, model.basis);
  }

  if (ctx.format == "json") {
    summary["links"] = links_json;
    write_json(out_path(ctx, "ground_state.json"), summary);
  } else {
    write_lines(out_path(ctx, "ground_state.csv"), link_rows);
    std::vector<std::string> rows{"key,value"};
    for (const auto& [key, value] : summary.items()) {
      if (key == "links") continue;
      rows.push_back(key + "," +
                     (value.is_number_float() ? format_double(value.get<double>()) : value.dump()));
    }
    write_lines(out_path(ctx, "ground_state_summary.csv"), rows);
  }
  std::cout << "ground state: E = " << format_double(gs.energy)
            << ", dim = " << model.basis.dimension() << '\n';
  return 0;
}

namespace {

struct LinkJob {
  int l1 = 0, l2 = 0;
  json record;
  std::vector<std::string> csv_rows;
  std::string error;
};

FirstMomentEstimator estimator_from_name(const std::string& name) {
  if (name == "p0") return FirstMomentEstimator::P0;
  if (name == "ptilde") return FirstMomentEstimator::PTilde;
  return FirstMomentEstimator::Antisym;
}

double estimator_window(const ProbeConfig& probe) {
  return probe.estimator == "ptilde" ? probe.sweep.window_quadratic : probe.sweep.window_linear;
}

void transform_sweep(ProbeSweep& sweep, const ProbeConfig& probe, unsigned seed) {
  if (!probe.detection && probe.shots == 0) return;
  std::mt19937 rng(seed);
  auto apply = [&](std::vector<AncillaDistribution>& dists) {
    for (auto& d : dists) {
      if (probe.detection) d = apply_detection_errors(d, *probe.detection);
      if (probe.shots > 0) d = sample_shots(d, probe.shots, rng);
    }
  };
  apply(sweep.along);
  apply(sweep.against);
}

void run_link_job(LinkJob& job, const Model& model, const GroundStateResult& gs,
                  const RunConfig& config, unsigned seed) {
  const ProbeConfig& probe = config.probe;
  ProbeSweep sweep = sweep_link(gs.state, model.basis, model.hamiltonian_terms, model.hoppings,
                                job.l1, job.l2, probe.sweep, /*both_directions=*/true,
                                gs.near_degenerate);
  transform_sweep(sweep, probe, seed);

  // perturbative reference curves for the sweep file
  const LinkCurrent lc = link_current(model.hoppings, job.l1, job.l2, model.basis);
  const CouplingOperators ops = build_coupling_operators(
      model.basis,
      current_coupling(lc, model.basis, probe.sweep.dt, +1, probe.sweep.truncation,
                       probe.sweep.evolution));
  const double n1 = first_moment(gs.state, ops);

  job.csv_rows.push_back("s,p0,p1,p2,ptilde,pred_linear,pred_quadratic");
  for (std::size_t i = 0; i < sweep.s_grid.size(); ++i) {
    const double s = sweep.s_grid[i];
    const AncillaDistribution& d = sweep.along[i];
    const double p1 = d.p_single(0, 1);
    const double p2 = d.p_single(0, 2);
    const double ptilde = 1.0 - (p1 + 2.0 * p2) / (1.0 - 2.0 * s / 3.0);
    const JointPrediction pred = predict_joint(gs.state, ops, {s});
    job.csv_rows.push_back(join_csv({format_double(s), format_double(d.p0()), format_double(p1),
                                     format_double(p2), format_double(ptilde),
                                     format_double(1.0 - s * n1), format_double(pred.p0)}));
  }

  const double exact_j =
      std::real(expectation(gs.state, lc.op)) / lc.magnitude;  // <j>/|J|
  double density_sum = 0;
  density_sum += std::real(expectation(gs.state, number_operator(model.basis, job.l1)));
  density_sum += std::real(expectation(gs.state, number_operator(model.basis, job.l2)));

  ExtractionResult current = estimate_first_moment(sweep, estimator_from_name(probe.estimator),
                                                   estimator_window(probe), density_sum);
  if (probe.detection) {
    const double corrected = correct_detected_slope(current.raw_slope, *probe.detection);
    current.raw_slope = corrected;
    current.value = probe.estimator == "antisym" ? corrected : corrected - density_sum;
  }
  attach_reference(current, exact_j);
  job.record = {{"l1", job.l1}, {"l2", job.l2}, {"current", extraction_to_json(current)}};

  if (probe.variance) {
    // exact <(n1+n2)^2> aux input
    const SparseOperator num1 = number_operator(model.basis, job.l1);
    const SparseOperator num2 = number_operator(model.basis, job.l2);
    const Vector nv = num1.matrix * gs.state.amplitudes + num2.matrix * gs.state.amplitudes;
    const double density_sq = nv.squaredNorm();
    ExtractionResult var = estimate_variance(sweep, probe.fit_order,
                                             probe.fit_order == 4 ? probe.sweep.window_quadratic
                                                                  : probe.sweep.window_linear,
                                             density_sq, exact_j);
    const Vector jv = lc.op.matrix * gs.state.amplitudes;
    const double exact_var =
        (jv.squaredNorm() - std::pow(std::real(gs.state.amplitudes.dot(jv)), 2)) /
        (lc.magnitude * lc.magnitude);
    attach_reference(var, exact_var);
    job.record["variance"] = extraction_to_json(var);
  }
}

}  // namespace

int cmd_probe(const RunConfig& config, const RunContext& ctx) {
  const Model model = build_model(config.model);
  const GroundStateResult gs = ground_state(model.hamiltonian, config.solver.tol,
                                            effective_seed(config, ctx),
                                            config.solver.dense_threshold);

  std::vector<LinkJob> jobs;
  if (config.probe.links.empty()) {
    for (const auto& [l1, l2] : model.hoppings.links())
      if (model.hoppings.amplitude(l1, l2) != Complex(0)) jobs.push_back({l1, l2, {}, {}, {}});
  } else {
    for (const auto& link : config.probe.links) jobs.push_back({link[0], link[1], {}, {}, {}});
  }

  const unsigned seed = effective_seed(config, ctx);
  parallel_for(static_cast<int>(jobs.size()), effective_threads(ctx), [&](int i) {
    auto& job = jobs[static_cast<std::size_t>(i)];
    try {
      run_link_job(job, model, gs, config, seed + static_cast<unsigned>(i));
    } catch (const std::exception& e) {
      job.error = e.what();
    }
  });

  json extractions{{"schema_version", 1}, {"links", json::array()}};
  bool any_output = false;
  for (const auto& job : jobs) {
    if (!job.error.empty()) {
      extractions["links"].push_back(
          {{"l1", job.l1}, {"l2", job.l2}, {"error", job.error}});
      std::cerr << "link (" << job.l1 << ", " << job.l2 << "): " << job.error << '\n';
      continue;
    }
    any_output = true;
    write_lines(out_path(ctx, "probe_link_" + std::to_string(job.l1) + "_" +
                                  std::to_string(job.l2) + ".csv"),
                job.csv_rows);
    extractions["links"].push_back(job.record);
  }

  if (config.probe.global && config.model.type == "ladder") {
    try {
      GlobalProbeResult g = global_chiral_probe(gs.state, model.basis, model.hamiltonian_terms,
                                                config.model.ladder, config.probe.sweep);
      const SparseOperator jc = chiral_current(config.model.ladder, model.basis);
      attach_reference(g.current, std::real(expectation(gs.state, jc)));
      const Vector jv = jc.matrix * gs.state.amplitudes;
      attach_reference(g.variance, jv.squaredNorm() -
                                       std::pow(std::real(gs.state.amplitudes.dot(jv)), 2));
      extractions["global"] = {{"current", extraction_to_json(g.current)},
                               {"variance", extraction_to_json(g.variance)}};
      any_output = true;
    } catch (const std::exception& e) {
      extractions["global"] = {{"error", e.what()}};
      std::cerr << "global probe: " << e.what() << '\n';
    }
  }

  write_json(out_path(ctx, "extractions.json"), extractions);
  std::cout << "probe: " << jobs.size() << " link(s) processed\n";
  return any_output ? 0 : 1;
}

int cmd_phase_scan(const RunConfig& config, const RunContext& ctx) {
  if (config.model.type != "ladder") {
    std::cerr << "phase-scan: only the ladder model is supported\n";
    return 1;
  }
  std::vector<double> ks = config.scan.rung_hopping;
  if (ks.empty()) ks.push_back(config.model.ladder.rung_hopping);
  std::vector<double> us = config.scan.interaction;
  if (us.empty()) us.push_back(config.model.ladder.interaction);

  const int rows = static_cast<int>(ks.size());
  const int cols = static_cast<int>(us.size());
  const int cells = rows * cols;
  struct Cell {
    double exact_jc = std::nan("");
    double extracted_jc = std::nan("");
    double exact_var = std::nan("");
    double extracted_var = std::nan("");
    std::string error;
  };
  std::vector<Cell> grid(static_cast<std::size_t>(cells));

  const unsigned seed = effective_seed(config, ctx);
  parallel_for(cells, effective_threads(ctx), [&](int idx) {
    Cell& cell = grid[static_cast<std::size_t>(idx)];
    try {
      LadderSpec spec = config.model.ladder;
      spec.rung_hopping = ks[static_cast<std::size_t>(idx / cols)];
      spec.interaction = us[static_cast<std::size_t>(idx % cols)];
      const Model model = build_hh_ladder(spec, config.model.particles);
      const GroundStateResult gs = ground_state(model.hamiltonian, config.solver.tol, seed,
                                                config.solver.dense_threshold);
      const SparseOperator jc = chiral_current(spec, model.basis);
      cell.exact_jc = std::real(expectation(gs.state, jc));
      cell.exact_var = mean_current_variance(gs.state, model.hoppings, model.basis);

      // chiral current rebuilt from per-link probe extractions
      const int L = spec.rungs;
      const int n_links = spec.periodic ? L : L - 1;
      double jc_est = 0;
      double var_est = 0;
      int var_links = 0;
      for (int leg = 0; leg < 2; ++leg) {
        const double sign = leg == 0 ? 1.0 : -1.0;
        for (int k = 0; k < n_links; ++k) {
          const int l1 = spec.site(leg, k), l2 = spec.site(leg, (k + 1) % L);
          ProbeSweep sweep = sweep_link(gs.state, model.basis, model.hamiltonian_terms,
                                        model.hoppings, l1, l2, config.probe.sweep, true,
                                        gs.near_degenerate);
          const ExtractionResult est = estimate_first_moment(
              sweep, FirstMomentEstimator::Antisym, config.probe.sweep.window_linear, 0.0);
          jc_est += sign * est.value * sweep.link.magnitude / n_links;
          if (config.probe.variance) {
            const LinkCurrent lcur = link_current(model.hoppings, l1, l2, model.basis);
            const SparseOperator num1 = number_operator(model.basis, l1);
            const SparseOperator num2 = number_operator(model.basis, l2);
            const Vector nv =
                num1.matrix * gs.state.amplitudes + num2.matrix * gs.state.amplitudes;
            const double exact_j = std::real(expectation(gs.state, lcur.op)) / lcur.magnitude;
            const ExtractionResult var =
                estimate_variance(sweep, config.probe.fit_order,
                                  config.probe.fit_order == 4
                                      ? config.probe.sweep.window_quadratic
                                      : config.probe.sweep.window_linear,
                                  nv.squaredNorm(), exact_j);
            var_est += var.value;
            ++var_links;
          }
        }
      }
      cell.extracted_jc = jc_est;
      if (var_links > 0) cell.extracted_var = var_est / var_links;
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
  });

  auto write_matrix = [&](const std::string& name, auto getter) {
    std::vector<std::string> lines;
    std::vector<std::string> header{"rung_hopping"};
    for (double u : us) header.push_back("u_" + format_double(u));
    lines.push_back(join_csv(header));
    for (int r = 0; r < rows; ++r) {
      std::vector<std::string> row{format_double(ks[static_cast<std::size_t>(r)])};
      for (int c = 0; c < cols; ++c)
        row.push_back(format_double(getter(grid[static_cast<std::size_t>(r * cols + c)])));
      lines.push_back(join_csv(row));
    }
    write_lines(out_path(ctx, name), lines);
  };
  write_matrix("scan_exact_chiral_current.csv", [](const Cell& c) { return c.exact_jc; });
  write_matrix("scan_extracted_chiral_current.csv", [](const Cell& c) { return c.extracted_jc; });
  write_matrix("scan_exact_mean_current_variance.csv", [](const Cell& c) { return c.exact_var; });
  if (config.probe.variance)
    write_matrix("scan_extracted_mean_current_variance.csv",
                 [](const Cell& c) { return c.extracted_var; });

  std::vector<std::string> errors{"rung_hopping,interaction,reason"};
  int failures = 0;
  for (int idx = 0; idx < cells; ++idx) {
    const Cell& cell = grid[static_cast<std::size_t>(idx)];
    if (cell.error.empty()) continue;
    ++failures;
    errors.push_back(join_csv({format_double(ks[static_cast<std::size_t>(idx / cols)]),
                               format_double(us[static_cast<std::size_t>(idx % cols)]),
                               "\"" + cell.error + "\""}));
  }
  write_lines(out_path(ctx, "scan_errors.csv"), errors);
  std::cout << "phase scan: " << cells << " cell(s), " << failures << " failure(s)\n";
  return 0;
}

int cmd_trapped_ion(const RunConfig& config, const RunContext& ctx) {
  if (config.model.type != "spin_ring") {
    std::cerr << "trapped-ion: config must use the spin_ring model\n";
    return 1;
  }
  const Model model = build_model(config.model);
  const GroundStateResult gs = ground_state(model.hamiltonian, config.solver.tol,
                                            effective_seed(config, ctx),
                                            config.solver.dense_threshold);
  const IonConfig& ion = config.ion;
  const ThermalAncilla thermal =
      thermal_distribution(ion.omega, ion.temperature, ion.n_max);

  SidebandCoupling hardware;
  hardware.reference_rabi = ion.reference_rabi;
  hardware.ions = {{ion.link[0], ion.rabi, ion.eta, 0.0}, {ion.link[1], ion.rabi, ion.eta, 0.0}};

  const ThermalSweep sweep =
      thermal_sweep(gs.state, model.basis, model.hamiltonian_terms, model.hoppings, ion.link[0],
                    ion.link[1], hardware, thermal, config.probe.sweep);

  // P(n) data with the first-order predictions
  const CouplingOperators ops = build_coupling_operators(
      model.basis, ion_current_coupling(ion.link[0], ion.link[1], model.hoppings, hardware,
                                        config.probe.sweep.dt, +1, thermal.n_max + 2,
                                        config.probe.sweep.evolution));
  std::vector<std::string> header{"s"};
  for (int n = 0; n <= thermal.n_max; ++n) header.push_back("p" + std::to_string(n));
  for (int n = 0; n <= thermal.n_max; ++n) header.push_back("pred" + std::to_string(n));
  std::vector<std::string> rows{join_csv(header)};
  for (std::size_t i = 0; i < sweep.s_grid.size(); ++i) {
    std::vector<std::string> row{format_double(sweep.s_grid[i])};
    for (double p : sweep.along[i]) row.push_back(format_double(p));
    for (double p : predict_thermal_probabilities(gs.state, ops, thermal, sweep.s_grid[i]))
      row.push_back(format_double(p));
    rows.push_back(join_csv(row));
  }
  write_lines(out_path(ctx, "thermal_sweep.csv"), rows);

  std::vector<std::string> coeff_rows{"n,p_n,alpha_n,beta_n"};
  for (int n = 0; n <= thermal.n_max; ++n)
    coeff_rows.push_back(join_csv({std::to_string(n), format_double(thermal.pn(n)),
                                   format_double(alpha_coefficient(thermal, n)),
                                   format_double(beta_coefficient(thermal, n))}));
  write_lines(out_path(ctx, "thermal_coefficients.csv"), coeff_rows);

  const LinkCurrent lc = spin_current(model.hoppings, ion.link[0], ion.link[1], model.basis);
  const double exact_j = std::real(expectation(gs.state, lc.op)) / lc.magnitude;

  json doc{{"schema_version", 1},
           {"tail_mass", thermal.tail_mass},
           {"tail_warning", thermal.tail_warning},
           {"channels", json::array()}};
  for (int n : ion.channels) {
    try {
      ExtractionResult r = extract_spin_current(sweep, thermal, n, std::nullopt,
                                                config.probe.sweep.window_linear);
      attach_reference(r, exact_j);
      doc["channels"].push_back({{"n", n}, {"extraction", extraction_to_json(r)}});
    } catch (const std::exception& e) {
      doc["channels"].push_back({{"n", n}, {"error", e.what()}});
      std::cerr << "channel " << n << ": " << e.what() << '\n';
    }
  }
  write_json(out_path(ctx, "ion_extractions.json"), doc);
  std::cout << "trapped ion: " << ion.channels.size() << " channel(s) processed\n";
  return 0;
}

int cmd_validate_config(const std::string& path) {
  try {
    (void)load_config(path);
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return 1;
  }
  std::cout << "config OK\n";
  return 0;
}

}  // namespace qprobe
