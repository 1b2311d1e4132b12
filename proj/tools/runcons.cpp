// Command-line front end: generate supergraphs, tabulate theoretical rates,
// run Monte Carlo experiments, and sweep a parameter over a grid.

#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "runcons/montecarlo.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace runcons;

namespace {

// Auxiliary draws (spectral-r estimation) use stream indices far above the
// per-path range so they never collide with path streams.
constexpr std::uint64_t kAuxStreamOffset = std::uint64_t{1} << 31;
// Sweep grid point i shifts the stream index by i * 2^32.
constexpr std::uint64_t kSweepStride = std::uint64_t{1} << 32;

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw schema_error("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw schema_error(std::string("config is not valid JSON: ") + e.what());
  }
  return j;
}

void write_file(const fs::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << contents;
}

json parse_override_value(const std::string& text) {
  if (text == "true") return true;
  if (text == "false") return false;
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(text, &pos);
    if (pos == text.size()) return v;
  } catch (...) {
  }
  try {
    std::size_t pos = 0;
    const double v = std::stod(text, &pos);
    if (pos == text.size()) return v;
  } catch (...) {
  }
  return text;
}

void apply_overrides(json& cfg, const std::vector<std::string>& overrides) {
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw schema_error("override must look like key=value: " + kv);
    std::string path = kv.substr(0, eq);
    json* node = &cfg;
    std::size_t start = 0;
    for (;;) {
      const auto dot = path.find('.', start);
      const std::string key = path.substr(start, dot - start);
      if (key.empty()) throw schema_error("bad override key: " + kv);
      if (dot == std::string::npos) {
        (*node)[key] = parse_override_value(kv.substr(eq + 1));
        break;
      }
      node = &(*node)[key];
      start = dot + 1;
    }
  }
}

int cmd_graph_gen(int n, double radius, int target_m, double q,
                  std::uint64_t seed, int pendant, int anchor,
                  double q_pendant, double q_rest, double pendant_radius,
                  const std::string& output) {
  Supergraph g;
  json extra;
  extra["seed"] = seed;
  if (pendant > 0) {
    if (anchor <= 0) throw schema_error("--pendant requires --anchor");
    std::optional<double> rad;
    if (pendant_radius > 0.0) rad = pendant_radius;
    g = pendant_supergraph(n, pendant - 1, anchor - 1, q_pendant, q_rest,
                           RngSeed{seed, 0}, rad);
  } else if (target_m >= 0) {
    const GeometricFit fit =
        geometric_supergraph_target_edges(n, target_m, q, RngSeed{seed, 0});
    g = fit.graph;
    if (!fit.exact) {
      std::cerr << "graph-gen: target of " << target_m
                << " edges not reachable; closest achievable is "
                << fit.edge_count << " (radius " << fit.radius << ")\n";
      throw numeric_error("graph-gen: target edge count unreachable");
    }
    extra["radius"] = fit.radius;
    std::cout << "radius " << fit.radius << "\n";
  } else {
    g = geometric_supergraph(n, radius, q, RngSeed{seed, 0});
    extra["radius"] = radius;
  }
  json out_json = supergraph_to_json(g);
  out_json["generator"] = extra;
  write_file(output, out_json.dump(2) + "\n");
  const auto deg = g.degrees();
  int dmin = g.n ? deg[0] : 0, dmax = 0;
  double dsum = 0.0;
  for (int d : deg) {
    dmin = std::min(dmin, d);
    dmax = std::max(dmax, d);
    dsum += d;
  }
  std::cout << "n " << g.n << "\nm " << g.edge_count() << "\ndegrees min "
            << dmin << " mean " << dsum / std::max(1, g.n) << " max " << dmax
            << "\nwrote " << output << "\n";
  return 0;
}

std::vector<double> parse_grid(const json& sweep) {
  std::vector<double> grid;
  if (auto it = sweep.find("grid"); it != sweep.end()) {
    for (const auto& v : *it) grid.push_back(v.get<double>());
  } else {
    const double from = detail::require_field(sweep, "from").get<double>();
    const double to = detail::require_field(sweep, "to").get<double>();
    const int count = detail::require_field(sweep, "count").get<int>();
    if (count < 2) throw schema_error("sweep.count must be >= 2");
    for (int i = 0; i < count; ++i)
      grid.push_back(from + (to - from) * i / (count - 1));
  }
  if (grid.empty()) throw schema_error("sweep grid is empty");
  return grid;
}

int cmd_theory(const std::string& config_path, const std::string& output) {
  const json cfg = load_json(config_path);
  const json& sweep = detail::require_field(cfg, "sweep");
  const std::string variable =
      detail::require_field(sweep, "variable").get<std::string>();
  const std::vector<double> grid = parse_grid(sweep);

  std::ostringstream csv;
  csv << "# config_hash=" << hex64(fnv1a64(cfg.dump())) << "\n";
  if (variable == "p") {
    SwitchingFusionSpec spec{};
    if (auto it = cfg.find("switching"); it != cfg.end()) {
      const int n = detail::require_field(*it, "n").get<int>();
      if (it->contains("c_tot"))
        spec = SwitchingFusionSpec::from_c_tot(n, (*it)["c_tot"].get<double>(),
                                               0.5);
      else
        spec = SwitchingFusionSpec{n, detail::require_field(*it, "c_i")
                                          .get<double>(),
                                   0.5};
    } else if (auto mit = cfg.find("model"); mit != cfg.end()) {
      const ObservationModel model = model_from_json(*mit);
      const DerivedStats stats = derive_stats(model);
      if (!stats.c_i)
        throw schema_error(
            "theory: p sweep needs uncorrelated sensors (diagonal S)");
      const double lo = stats.c_i->minCoeff(), hi = stats.c_i->maxCoeff();
      if (hi - lo > 1e-9 * hi)
        throw schema_error(
            "theory: p sweep needs equal per-sensor Chernoff information");
      spec = SwitchingFusionSpec{stats.n, (*stats.c_i)[0], 0.5};
    } else {
      throw schema_error("theory: p sweep needs 'switching' or 'model'");
    }
    const double p_star = fusion_optimality_threshold(spec);
    std::cout << "p_star " << fmt_g(p_star) << "  (optimal for p >= p_star)\n"
              << "c_tot " << fmt_g(spec.c_tot()) << "  c_i " << fmt_g(spec.c_i)
              << "\n";
    csv << "p,r,rate_or_bound,regime,sufficient_met,necessary_met\n";
    for (double p : grid) {
      if (!(p >= 0.0 && p <= 1.0))
        throw schema_error("theory: p grid values must be in [0, 1]");
      spec.p = p;
      const RateResult res = phi_star(spec);
      const bool sufficient = res.regime == RateRegime::optimal;
      const bool necessary =
          p >= 1.0 || connectivity_necessary_condition(spec.c_tot(), spec.c_i, p);
      csv << fmt_g(p) << ',' << fmt_g(1.0 - p) << ',' << fmt_g(res.rate) << ','
          << to_string(res.regime) << ',' << (sufficient ? "true" : "false")
          << ',' << (necessary ? "true" : "false") << "\n";
    }
  } else if (variable == "r") {
    RateBoundInputs base{};
    if (auto it = cfg.find("rate_bound_inputs"); it != cfg.end()) {
      base = RateBoundInputs{detail::require_field(*it, "n").get<int>(),
                            detail::require_field(*it, "sigma_l2").get<double>(),
                            detail::require_field(*it, "m_l0").get<double>(),
                            detail::require_field(*it, "s_eta_norm")
                                .get<double>(),
                            detail::require_field(*it, "m_bar").get<double>(),
                            0.5};
    } else if (auto mit = cfg.find("model"); mit != cfg.end()) {
      const DerivedStats stats = derive_stats(model_from_json(*mit));
      base = RateBoundInputs::from_stats(stats, 0.5);
    } else {
      throw schema_error("theory: r sweep needs 'rate_bound_inputs' or 'model'");
    }
    const double threshold = base.sufficient_threshold();
    std::cout << "sufficient |log r| threshold " << fmt_g(threshold)
              << "  (r <= " << fmt_g(std::exp(-threshold)) << ")\n"
              << "c_tot " << fmt_g(base.c_tot()) << "  K "
              << fmt_g(base.k_ratio()) << "\n";
    csv << "r,rate_or_bound,regime,sufficient_met,necessary_met\n";
    for (double r : grid) {
      if (!(r >= 0.0 && r <= 1.0))
        throw schema_error("theory: r grid values must be in [0, 1]");
      base.r = r;
      const RateBound rb = spectral_rate_bound(base);
      csv << fmt_g(r) << ',' << fmt_g(rb.bound) << ','
          << (rb.optimal ? "optimal" : "suboptimal_branch") << ','
          << (rb.optimal ? "true" : "false") << ',' << "\n";
    }
  } else {
    throw schema_error("theory: sweep.variable must be 'p' or 'r'");
  }
  write_file(output, csv.str());
  std::cout << "wrote " << output << "\n";
  return 0;
}

struct SimulationResult {
  std::vector<ErrorCurve> curves;  // pooled first, then per-sensor
  std::vector<ComparisonRow> rows;
  RateReport theory;
  DerivedStats stats;
};

// Shared pipeline behind `simulate` and each sweep point: run the paths, fit
// rates over the configured window, and pair them with the matching theory
// value: the exact three-regime rate when the weight model is switching
// fusion over equal uncorrelated sensors, the spectral lower bound otherwise.
SimulationResult run_pipeline(const ExperimentConfig& cfg) {
  SimulationResult out{.curves = {}, .rows = {}, .theory = {},
                       .stats = derive_stats(cfg.model)};
  std::vector<ErrorCurve> per_sensor = run_experiment(cfg);
  out.curves.push_back(pooled_curve(per_sensor));
  for (auto& c : per_sensor) out.curves.push_back(std::move(c));

  bool theory_exact = false;
  std::optional<std::vector<double>> p_connect;
  const int n = cfg.model.size();
  if (const auto* sf = std::get_if<SwitchingFusion>(&cfg.weights)) {
    p_connect = std::vector<double>(n, sf->p);
  } else {
    std::vector<double> pc(n);
    for (int i = 0; i < n; ++i) pc[i] = connectivity_probability(cfg.weights, i);
    p_connect = std::move(pc);
  }

  const auto* sf = std::get_if<SwitchingFusion>(&cfg.weights);
  const bool equal_ci =
      out.stats.c_i && (out.stats.c_i->maxCoeff() - out.stats.c_i->minCoeff() <=
                        1e-9 * out.stats.c_i->maxCoeff());
  if (sf && equal_ci) {
    const SwitchingFusionSpec spec{n, (*out.stats.c_i)[0], sf->p};
    const RateResult res = phi_star(spec);
    out.theory.rate_or_bound = res.rate;
    out.theory.regime = res.regime;
    out.theory.sufficient_met = res.regime == RateRegime::optimal;
    out.theory.necessary_met =
        sf->p >= 1.0 || connectivity_necessary_condition(spec.c_tot(), spec.c_i, sf->p);
    theory_exact = true;
  } else {
    const SpectralEstimate rest = spectral_r(
        cfg.weights, cfg.r_samples, cfg.master_seed.offset(kAuxStreamOffset));
    const RateBoundInputs inp = RateBoundInputs::from_stats(out.stats, rest.r);
    const RateBound rb = spectral_rate_bound(inp);
    out.theory.rate_or_bound = rb.bound;
    out.theory.regime =
        rb.optimal ? RateRegime::optimal : RateRegime::suboptimal_branch;
    out.theory.sufficient_met = rb.optimal;
  }

  const int k_lo = cfg.fit_k_lo.value_or(std::max(1, cfg.k_max / 2));
  const int k_hi = cfg.fit_k_hi.value_or(cfg.k_max);
  std::vector<RateFit> fits;
  for (const auto& curve : out.curves) {
    try {
      fits.push_back(fit_decay_rate(curve, k_lo, k_hi));
    } catch (const insufficient_data_error&) {
      // curve decayed past Monte Carlo reach inside the window; no fit
    }
  }
  out.rows = compare_report(fits, out.theory, out.stats, p_connect,
                            theory_exact);
  return out;
}

void print_summary(const SimulationResult& res) {
  std::cout << "theory rate_or_bound " << fmt_g(res.theory.rate_or_bound)
            << " (" << to_string(res.theory.regime) << ", sufficient "
            << (res.theory.sufficient_met ? "yes" : "no")
            << "), centralized C_tot " << fmt_g(res.stats.c_tot) << "\n";
  for (const auto& row : res.rows) {
    std::cout << "sensor " << csv_sensor_id(row.sensor);
    if (row.empirical_rate)
      std::cout << " empirical " << fmt_g(*row.empirical_rate) << " +/- "
                << fmt_g(row.empirical_std_error.value_or(0.0));
    else
      std::cout << " empirical n/a";
    if (row.no_coop_rate)
      std::cout << " no-coop " << fmt_g(*row.no_coop_rate);
    if (row.pass) std::cout << (*row.pass ? "  [pass]" : "  [FAIL]");
    std::cout << "\n";
  }
}

int cmd_simulate(const std::string& config_path, const std::string& out_dir,
                 const std::vector<std::string>& overrides) {
  const auto t0 = std::chrono::steady_clock::now();
  json raw = load_json(config_path);
  apply_overrides(raw, overrides);
  const ExperimentConfig cfg = experiment_config_from_json(raw);
  const json canonical = experiment_config_to_json(cfg);
  const CsvMeta meta{cfg.master_seed.master_seed,
                     config_hash(cfg)};

  const SimulationResult res = run_pipeline(cfg);

  fs::create_directories(out_dir);
  {
    std::ostringstream os;
    write_curves_csv(os, res.curves, meta);
    write_file(fs::path(out_dir) / "curves.csv", os.str());
  }
  {
    std::ostringstream os;
    write_rates_csv(os, res.rows, meta);
    write_file(fs::path(out_dir) / "rates.csv", os.str());
  }
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  json manifest;
  manifest["config_hash"] = meta.config_hash;
  manifest["master_seed"] = cfg.master_seed.master_seed;
  manifest["stream_offset"] = cfg.master_seed.stream_index;
  manifest["wall_time_s"] = wall;
  manifest["outputs"] = {"curves.csv", "rates.csv"};
  manifest["config"] = canonical;
  write_file(fs::path(out_dir) / "manifest.json", manifest.dump(2) + "\n");

  print_summary(res);
  std::cout << "wall_time_s " << wall << "\nwrote " << out_dir << "\n";
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir,
              std::string variable, std::string grid_arg,
              const std::vector<std::string>& overrides) {
  const auto t0 = std::chrono::steady_clock::now();
  json raw = load_json(config_path);
  apply_overrides(raw, overrides);

  std::vector<double> grid;
  std::pair<int, int> pendant_edge{-1, -1};
  if (auto it = raw.find("sweep"); it != raw.end()) {
    if (variable.empty())
      variable = detail::require_field(*it, "variable").get<std::string>();
    if (grid_arg.empty()) grid = parse_grid(*it);
    if (auto eit = it->find("edge"); eit != it->end())
      pendant_edge = {(*eit)[0].get<int>() - 1, (*eit)[1].get<int>() - 1};
  }
  if (!grid_arg.empty()) {
    std::stringstream ss(grid_arg);
    std::string tok;
    while (std::getline(ss, tok, ',')) grid.push_back(std::stod(tok));
  }
  if (variable.empty()) throw schema_error("sweep: variable not given");
  if (grid.empty()) throw schema_error("sweep: grid is empty");
  raw.erase("sweep");

  fs::create_directories(out_dir);
  std::ostringstream rates;
  std::uint64_t master_seed = 0;
  std::string base_hash;
  json point_manifests = json::array();
  bool wrote_header = false;

  for (std::size_t i = 0; i < grid.size(); ++i) {
    json point = raw;
    const double value = grid[i];
    detail::require_field(point, "weights");
    if (variable == "p") {
      if (point["weights"].value("type", "") != "switching_fusion")
        throw schema_error("sweep: variable p needs switching_fusion weights");
      point["weights"]["p"] = value;
    } else if (variable == "q") {
      if (point["weights"].value("type", "") != "link_failure_metropolis")
        throw schema_error("sweep: variable q needs link_failure_metropolis");
      for (auto& e : point["weights"]["supergraph"]["edges"]) e[2] = value;
    } else if (variable == "q_pendant") {
      if (pendant_edge.first < 0)
        throw schema_error("sweep: q_pendant needs sweep.edge = [i, j]");
      bool found = false;
      for (auto& e : point["weights"]["supergraph"]["edges"]) {
        const int a = e[0].get<int>() - 1, b = e[1].get<int>() - 1;
        if ((a == pendant_edge.first && b == pendant_edge.second) ||
            (a == pendant_edge.second && b == pendant_edge.first)) {
          e[2] = value;
          found = true;
        }
      }
      if (!found) throw schema_error("sweep: named edge not in supergraph");
    } else {
      throw schema_error("sweep: variable must be q, p, or q_pendant");
    }
    const std::uint64_t base_offset =
        raw.value("stream_offset", std::uint64_t{0});
    point["stream_offset"] = base_offset + i * kSweepStride;

    const ExperimentConfig cfg = experiment_config_from_json(point);
    const json canonical = experiment_config_to_json(cfg);
    const CsvMeta meta{cfg.master_seed.master_seed,
                       config_hash(cfg)};
    master_seed = cfg.master_seed.master_seed;
    if (i == 0) base_hash = meta.config_hash;

    const SimulationResult res = run_pipeline(cfg);
    {
      char name[64];
      std::snprintf(name, sizeof(name), "point%02zu_curves.csv", i);
      std::ostringstream os;
      write_curves_csv(os, res.curves, meta);
      write_file(fs::path(out_dir) / name, os.str());
      point_manifests.push_back({{"value", value},
                                 {"config_hash", meta.config_hash},
                                 {"curves", name}});
    }
    if (!wrote_header) {
      rates << "# master_seed=" << master_seed << "\n";
      rates << "# config_hash=" << meta.config_hash << "\n";
      rates << variable
            << ",sensor,empirical_rate,stderr,theory_rate,regime,"
               "sufficient_met,necessary_met\n";
      wrote_header = true;
    }
    for (const auto& row : res.rows) {
      rates << fmt_g(value) << ',' << csv_sensor_id(row.sensor) << ',';
      if (row.empirical_rate) rates << fmt_g(*row.empirical_rate);
      rates << ',';
      if (row.empirical_std_error) rates << fmt_g(*row.empirical_std_error);
      rates << ',' << fmt_g(row.theory_rate) << ',' << to_string(row.regime)
            << ',' << (row.sufficient_met ? "true" : "false") << ',';
      if (row.necessary_met) rates << (*row.necessary_met ? "true" : "false");
      rates << "\n";
    }
    std::cout << variable << " = " << value << " done\n";
  }
  write_file(fs::path(out_dir) / "rates.csv", rates.str());
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  json manifest;
  manifest["variable"] = variable;
  manifest["grid"] = grid;
  manifest["master_seed"] = master_seed;
  manifest["config_hash"] = base_hash;
  manifest["wall_time_s"] = wall;
  manifest["points"] = point_manifests;
  write_file(fs::path(out_dir) / "manifest.json", manifest.dump(2) + "\n");
  std::cout << "wall_time_s " << wall << "\nwrote " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"distributed detection over random networks: simulation and "
               "rate analysis"};
  app.require_subcommand(1);

  auto* graph = app.add_subcommand("graph-gen", "generate a supergraph JSON");
  int n = 0, target_m = -1, pendant = 0, anchor = 0;
  double radius = 0.0, q = 1.0, q_pendant = 0.05, q_rest = 0.8;
  double pendant_radius = 0.0;
  std::uint64_t seed = 0;
  std::string output = "supergraph.json";
  graph->add_option("--n", n, "node count")->required();
  graph->add_option("--radius", radius, "connection radius");
  graph->add_option("--target-m", target_m, "bisect radius to this edge count");
  graph->add_option("--q", q, "formation probability for all edges");
  graph->add_option("--seed", seed, "rng seed");
  graph->add_option("--pendant", pendant, "pendant node id (1-based)");
  graph->add_option("--anchor", anchor, "anchor node id (1-based)");
  graph->add_option("--q-pendant", q_pendant, "pendant link probability");
  graph->add_option("--q-rest", q_rest, "probability of the remaining links");
  graph->add_option("--pendant-radius", pendant_radius,
                    "radius of the base graph (default: connectivity radius)");
  graph->add_option("-o,--output", output, "output file");

  auto* theory = app.add_subcommand("theory", "tabulate rates over a grid");
  std::string theory_config, theory_out = "theory.csv";
  theory->add_option("--config", theory_config)->required();
  theory->add_option("-o,--output", theory_out, "output CSV");

  auto* simulate = app.add_subcommand("simulate", "run a Monte Carlo experiment");
  std::string sim_config, sim_out;
  std::vector<std::string> sim_set;
  int sim_workers = 0;
  simulate->add_option("--config", sim_config)->required();
  simulate->add_option("--out", sim_out, "output directory")->required();
  simulate->add_option("--set", sim_set, "config override key=value");
  simulate->add_option("--workers", sim_workers, "worker threads override");

  auto* sweep = app.add_subcommand("sweep", "simulate over a parameter grid");
  std::string sweep_config, sweep_out, sweep_var, sweep_grid;
  std::vector<std::string> sweep_set;
  int sweep_workers = 0;
  sweep->add_option("--config", sweep_config)->required();
  sweep->add_option("--out", sweep_out, "output directory")->required();
  sweep->add_option("--variable", sweep_var, "q, p, or q_pendant");
  sweep->add_option("--grid", sweep_grid, "comma-separated values");
  sweep->add_option("--set", sweep_set, "config override key=value");
  sweep->add_option("--workers", sweep_workers, "worker threads override");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*graph)
      return cmd_graph_gen(n, radius, target_m, q, seed, pendant, anchor,
                           q_pendant, q_rest, pendant_radius, output);
    if (*theory) return cmd_theory(theory_config, theory_out);
    if (*simulate) {
      if (sim_workers > 0)
        sim_set.push_back("workers=" + std::to_string(sim_workers));
      return cmd_simulate(sim_config, sim_out, sim_set);
    }
    if (*sweep) {
      if (sweep_workers > 0)
        sweep_set.push_back("workers=" + std::to_string(sweep_workers));
      return cmd_sweep(sweep_config, sweep_out, sweep_var, sweep_grid,
                       sweep_set);
    }
  } catch (const schema_error& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return 2;
  } catch (const numeric_error& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
