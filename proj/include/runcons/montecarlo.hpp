#pragma once

#include <atomic>
#include <cstdio>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "runcons/detectors.hpp"
#include "runcons/network.hpp"
#include "runcons/theory.hpp"

namespace runcons {

// Score-based 95% binomial interval.
struct WilsonInterval {
  double low = 0.0;
  double high = 0.0;
};

inline WilsonInterval wilson_interval(long successes, long trials,
                                      double z = 1.959963984540054) {
  if (trials < 1)
    throw std::invalid_argument("wilson_interval: trials >= 1 required");
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half =
      z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  WilsonInterval ci{std::max(0.0, center - half), std::min(1.0, center + half)};
  if (successes == 0) ci.low = 0.0;
  if (successes == trials) ci.high = 1.0;
  return ci;
}

struct CurvePoint {
  int k = 0;
  double p_hat = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  long n_errors = 0;
  long n_paths = 0;
};

struct ErrorCurve {
  int sensor = 0;  // 0-based; -1 marks the across-sensor average
  std::vector<CurvePoint> points;
};

struct ExperimentConfig {
  ExperimentConfig(ObservationModel model_, WeightModel weights_)
      : model(std::move(model_)), weights(std::move(weights_)) {}

  ObservationModel model;
  WeightModel weights;
  int paths_per_hypothesis = 20000;
  int k_max = 0;
  std::vector<int> checkpoints;
  RngSeed master_seed;
  std::vector<int> record_sensors;  // 0-based; empty = all
  bool estimate_both_hypotheses = false;
  int workers = 1;
  std::size_t memory_budget_bytes = std::size_t{1} << 30;
  // Reporting knobs carried with the experiment definition.
  std::optional<int> fit_k_lo;
  std::optional<int> fit_k_hi;
  int r_samples = 10000;
};

inline std::vector<int> recorded_sensors(const ExperimentConfig& cfg) {
  if (!cfg.record_sensors.empty()) return cfg.record_sensors;
  std::vector<int> all(cfg.model.size());
  for (int i = 0; i < cfg.model.size(); ++i) all[i] = i;
  return all;
}

inline void validate_config(const ExperimentConfig& cfg) {
  if (cfg.paths_per_hypothesis < 100)
    throw schema_error("config: paths_per_hypothesis must be >= 100");
  if (cfg.k_max < 1) throw schema_error("config: k_max must be >= 1");
  if (cfg.checkpoints.empty())
    throw schema_error("config: checkpoints must be nonempty");
  int prev = 0;
  for (int k : cfg.checkpoints) {
    if (k <= prev || k > cfg.k_max)
      throw schema_error(
          "config: checkpoints must be strictly increasing within [1, k_max]");
    prev = k;
  }
  if (weight_model_size(cfg.weights) != cfg.model.size())
    throw schema_error("config: weight model size differs from model size");
  if (cfg.workers < 1) throw schema_error("config: workers must be >= 1");
  std::vector<bool> seen(cfg.model.size(), false);
  for (int s : cfg.record_sensors) {
    if (s < 0 || s >= cfg.model.size())
      throw schema_error("config: record_sensors entry out of range");
    if (seen[s]) throw schema_error("config: record_sensors entry repeated");
    seen[s] = true;
  }
  const std::size_t n_rec = recorded_sensors(cfg).size();
  const std::size_t counters =
      2 * cfg.checkpoints.size() * n_rec * sizeof(long) *
      (static_cast<std::size_t>(cfg.workers) + 1);
  const std::size_t workspace = static_cast<std::size_t>(cfg.workers) *
                                static_cast<std::size_t>(cfg.model.size()) *
                                4 * sizeof(double);
  if (counters + workspace > cfg.memory_budget_bytes)
    throw schema_error("config: experiment exceeds the memory budget");
}

// Runs the experiment and returns one error curve per recorded sensor.
// Default mode draws paths under H0 only and reports alpha, which equals the
// equal-prior Bayes error by the alpha = beta symmetry. The flag switches to
// a two-hypothesis estimate (needed for unequal priors).
//
// Paths own disjoint streams indexed by path number, and results accumulate
// through integer counters, so the output is bit-identical for any worker
// count.
inline std::vector<ErrorCurve> run_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);
  const DerivedStats stats = derive_stats(cfg.model);
  const EtaSampler eta(stats);
  const std::vector<int> sensors = recorded_sensors(cfg);
  const std::size_t n_rec = sensors.size();
  const std::size_t n_cp = cfg.checkpoints.size();
  const long paths = cfg.paths_per_hypothesis;
  const long total = cfg.estimate_both_hypotheses ? 2 * paths : paths;
  const int n = cfg.model.size();

  std::vector<long> counts0(n_cp * n_rec, 0), counts1(n_cp * n_rec, 0);
  std::atomic<long> next{0};
  std::mutex merge_mutex;
  constexpr long kChunk = 64;

  auto body = [&]() {
    WeightSampler sampler(cfg.weights);
    Vector x(n), y(n), z(n), e(n);
    std::vector<long> local0(n_cp * n_rec, 0), local1(n_cp * n_rec, 0);
    const auto record = [&](int hyp, std::size_t cp, const Vector& state) {
      auto& local = hyp == 0 ? local0 : local1;
      for (std::size_t si = 0; si < n_rec; ++si) {
        const double xi = state[sensors[si]];
        const bool err = hyp == 0 ? xi > 0.0 : xi <= 0.0;
        local[cp * n_rec + si] += err ? 1 : 0;
      }
    };
    for (;;) {
      const long begin = next.fetch_add(kChunk);
      if (begin >= total) break;
      const long end = std::min(begin + kChunk, total);
      for (long idx = begin; idx < end; ++idx) {
        const int hyp = idx < paths ? 0 : 1;
        SplitStream rng(cfg.master_seed.offset(static_cast<std::uint64_t>(idx)));
        eta.sample(hyp, rng, z, x);
        std::size_t cp = 0;
        if (cfg.checkpoints[0] == 1) record(hyp, cp++, x);
        for (long k = 1; k < cfg.k_max; ++k) {
          sampler.sample_apply(rng, x, y);
          eta.sample(hyp, rng, z, e);
          const double a = static_cast<double>(k) / (k + 1);
          const double b = 1.0 / (k + 1);
          x = a * y + b * e;
          if (cp < n_cp && k + 1 == cfg.checkpoints[cp]) record(hyp, cp++, x);
        }
      }
    }
    std::scoped_lock lock(merge_mutex);
    for (std::size_t i = 0; i < counts0.size(); ++i) {
      counts0[i] += local0[i];
      counts1[i] += local1[i];
    }
  };

  if (cfg.workers == 1) {
    body();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(cfg.workers);
    for (int w = 0; w < cfg.workers; ++w) pool.emplace_back(body);
    for (auto& t : pool) t.join();
  }

  std::vector<ErrorCurve> curves(n_rec);
  for (std::size_t si = 0; si < n_rec; ++si) {
    curves[si].sensor = sensors[si];
    curves[si].points.resize(n_cp);
    for (std::size_t cp = 0; cp < n_cp; ++cp) {
      CurvePoint& pt = curves[si].points[cp];
      pt.k = cfg.checkpoints[cp];
      const long e0 = counts0[cp * n_rec + si];
      if (!cfg.estimate_both_hypotheses) {
        pt.n_errors = e0;
        pt.n_paths = paths;
        pt.p_hat = static_cast<double>(e0) / paths;
        const auto ci = wilson_interval(e0, paths);
        pt.ci_low = ci.low;
        pt.ci_high = ci.high;
      } else {
        const long e1 = counts1[cp * n_rec + si];
        const double alpha = static_cast<double>(e0) / paths;
        const double beta = static_cast<double>(e1) / paths;
        const double p0 = cfg.model.prior_h0();
        pt.n_errors = e0 + e1;
        pt.n_paths = 2 * paths;
        pt.p_hat = p0 * alpha + (1.0 - p0) * beta;
        const double var = p0 * p0 * alpha * (1.0 - alpha) / paths +
                           (1.0 - p0) * (1.0 - p0) * beta * (1.0 - beta) / paths;
        const double half = 1.959963984540054 * std::sqrt(var);
        pt.ci_low = std::max(0.0, pt.p_hat - half);
        pt.ci_high = std::min(1.0, pt.p_hat + half);
      }
    }
  }
  return curves;
}

// Across-sensor average curve (the quantity the error-vs-k plots track).
inline ErrorCurve pooled_curve(const std::vector<ErrorCurve>& curves) {
  if (curves.empty())
    throw std::invalid_argument("pooled_curve: no curves given");
  ErrorCurve pooled;
  pooled.sensor = -1;
  pooled.points = curves[0].points;
  for (auto& pt : pooled.points) {
    pt.n_errors = 0;
    pt.n_paths = 0;
    pt.p_hat = 0.0;
  }
  for (const auto& c : curves) {
    if (c.points.size() != pooled.points.size())
      throw std::invalid_argument("pooled_curve: mismatched checkpoints");
    for (std::size_t i = 0; i < c.points.size(); ++i) {
      pooled.points[i].n_errors += c.points[i].n_errors;
      pooled.points[i].n_paths += c.points[i].n_paths;
      pooled.points[i].p_hat += c.points[i].p_hat;
    }
  }
  for (auto& pt : pooled.points) {
    pt.p_hat /= static_cast<double>(curves.size());
    const auto ci = wilson_interval(pt.n_errors, pt.n_paths);
    pt.ci_low = ci.low;
    pt.ci_high = ci.high;
  }
  return pooled;
}

enum class RateFitMethod { regression_slope, endpoint };

struct RateFit {
  int sensor = 0;
  double fitted_rate = 0.0;
  int k_lo = 0;
  int k_hi = 0;
  double std_error = 0.0;
  RateFitMethod method = RateFitMethod::regression_slope;
};

// Slope of -log p_hat against k over the window. Checkpoints with fewer than
// 10 errors are dropped: below that the point estimate is too noisy on a log
// scale to inform a rate.
inline RateFit fit_decay_rate(const ErrorCurve& curve, int k_lo, int k_hi,
                              RateFitMethod method =
                                  RateFitMethod::regression_slope) {
  std::vector<double> ks, ys;
  for (const auto& pt : curve.points) {
    if (pt.k < k_lo || pt.k > k_hi) continue;
    if (pt.n_errors < 10 || pt.p_hat >= 1.0) continue;
    ks.push_back(static_cast<double>(pt.k));
    ys.push_back(-std::log(pt.p_hat));
  }
  const std::size_t m = ks.size();
  if (m < 3)
    throw insufficient_data_error(
        "fit_decay_rate: fewer than 3 usable checkpoints in window");
  RateFit fit;
  fit.sensor = curve.sensor;
  fit.k_lo = k_lo;
  fit.k_hi = k_hi;
  fit.method = method;
  if (method == RateFitMethod::endpoint) {
    fit.fitted_rate = (ys.back() - ys.front()) / (ks.back() - ks.front());
    fit.std_error = 0.0;
    return fit;
  }
  double k_mean = 0.0, y_mean = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    k_mean += ks[i];
    y_mean += ys[i];
  }
  k_mean /= m;
  y_mean /= m;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    sxx += (ks[i] - k_mean) * (ks[i] - k_mean);
    sxy += (ks[i] - k_mean) * (ys[i] - y_mean);
  }
  fit.fitted_rate = sxy / sxx;
  double rss = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double resid =
        ys[i] - y_mean - fit.fitted_rate * (ks[i] - k_mean);
    rss += resid * resid;
  }
  fit.std_error = std::sqrt(rss / static_cast<double>(m - 2) / sxx);
  return fit;
}

struct ComparisonRow {
  int sensor = -1;  // -1 = across-sensor average
  std::optional<double> empirical_rate;
  std::optional<double> empirical_std_error;
  double theory_rate = 0.0;
  RateRegime regime = RateRegime::optimal;
  bool sufficient_met = false;
  std::optional<bool> necessary_met;
  double centralized_rate = 0.0;           // C_tot
  std::optional<double> no_coop_rate;      // C_i, diagonal S only
  std::optional<double> rate_upper_bound;  // C_i + |log(1-P_i)|
  std::optional<bool> pass;
};

// Side-by-side table of empirical rates against the theoretical rate (or
// bound) plus the centralized / no-cooperation baselines. With no fits the
// theory row passes through unchanged.
inline std::vector<ComparisonRow> compare_report(
    const std::vector<RateFit>& fits, const RateReport& theory,
    const DerivedStats& stats,
    const std::optional<std::vector<double>>& p_connect = {},
    bool theory_is_exact = false) {
  std::vector<ComparisonRow> rows;
  const auto fill_common = [&](ComparisonRow& row) {
    row.theory_rate = theory.rate_or_bound;
    row.regime = theory.regime;
    row.sufficient_met = theory.sufficient_met;
    row.necessary_met = theory.necessary_met;
    row.centralized_rate = stats.c_tot;
  };
  if (fits.empty()) {
    ComparisonRow row;
    fill_common(row);
    row.empirical_rate = theory.empirical_rate;
    rows.push_back(row);
    return rows;
  }
  for (const auto& fit : fits) {
    ComparisonRow row;
    fill_common(row);
    row.sensor = fit.sensor;
    row.empirical_rate = fit.fitted_rate;
    row.empirical_std_error = fit.std_error;
    if (fit.sensor >= 0 && stats.c_i) {
      const double ci = (*stats.c_i)[fit.sensor];
      row.no_coop_rate = ci;
      if (p_connect) {
        const double pi = (*p_connect)[fit.sensor];
        row.necessary_met = connectivity_necessary_condition(stats.c_tot, ci, pi);
        if (pi < 1.0) row.rate_upper_bound = ci - std::log1p(-pi);
      }
    }
    const double two_se = 2.0 * fit.std_error;
    if (theory_is_exact || theory.regime == RateRegime::optimal) {
      row.pass = std::abs(fit.fitted_rate - theory.rate_or_bound) <=
                 0.2 * theory.rate_or_bound;
    } else {
      bool ok = fit.fitted_rate >= theory.rate_or_bound - two_se;
      if (row.rate_upper_bound)
        ok = ok && fit.fitted_rate <= *row.rate_upper_bound + two_se;
      row.pass = ok;
    }
    rows.push_back(row);
  }
  return rows;
}

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

inline std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(v));
  return buf;
}

struct CsvMeta {
  std::uint64_t master_seed = 0;
  std::string config_hash;
};

inline void write_csv_preamble(std::ostream& os, const CsvMeta& meta) {
  os << "# master_seed=" << meta.master_seed << "\n";
  if (!meta.config_hash.empty())
    os << "# config_hash=" << meta.config_hash << "\n";
}

// Sensor ids are 1-based on disk; 0 is the across-sensor average.
inline int csv_sensor_id(int sensor) { return sensor + 1; }

inline void write_curves_csv(std::ostream& os,
                             const std::vector<ErrorCurve>& curves,
                             const CsvMeta& meta) {
  write_csv_preamble(os, meta);
  os << "sensor,k,p_hat,ci_low,ci_high,n_errors,n_paths\n";
  for (const auto& c : curves)
    for (const auto& pt : c.points)
      os << csv_sensor_id(c.sensor) << ',' << pt.k << ',' << fmt_g(pt.p_hat)
         << ',' << fmt_g(pt.ci_low) << ',' << fmt_g(pt.ci_high) << ','
         << pt.n_errors << ',' << pt.n_paths << "\n";
}

inline void write_rates_csv(std::ostream& os,
                            const std::vector<ComparisonRow>& rows,
                            const CsvMeta& meta) {
  write_csv_preamble(os, meta);
  os << "sensor,empirical_rate,stderr,theory_rate,regime,sufficient_met,"
        "necessary_met\n";
  for (const auto& row : rows) {
    os << csv_sensor_id(row.sensor) << ',';
    if (row.empirical_rate) os << fmt_g(*row.empirical_rate);
    os << ',';
    if (row.empirical_std_error) os << fmt_g(*row.empirical_std_error);
    os << ',' << fmt_g(row.theory_rate) << ',' << to_string(row.regime) << ','
       << (row.sufficient_met ? "true" : "false") << ',';
    if (row.necessary_met) os << (*row.necessary_met ? "true" : "false");
    os << "\n";
  }
}

inline nlohmann::json experiment_config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["model"] = model_to_json(cfg.model);
  j["weights"] = weight_model_to_json(cfg.weights);
  j["paths_per_hypothesis"] = cfg.paths_per_hypothesis;
  j["k_max"] = cfg.k_max;
  j["checkpoints"] = cfg.checkpoints;
  j["master_seed"] = cfg.master_seed.master_seed;
  j["stream_offset"] = cfg.master_seed.stream_index;
  nlohmann::json sensors = nlohmann::json::array();
  for (int s : cfg.record_sensors) sensors.push_back(s + 1);
  j["record_sensors"] =
      cfg.record_sensors.empty() ? nlohmann::json("all") : sensors;
  j["estimate_both_hypotheses"] = cfg.estimate_both_hypotheses;
  j["workers"] = cfg.workers;
  j["memory_budget_bytes"] = cfg.memory_budget_bytes;
  if (cfg.fit_k_lo) j["fit_window"]["k_lo"] = *cfg.fit_k_lo;
  if (cfg.fit_k_hi) j["fit_window"]["k_hi"] = *cfg.fit_k_hi;
  j["r_samples"] = cfg.r_samples;
  return j;
}

// Hash of the experiment definition. Execution details (worker count,
// memory budget) do not change any output byte and stay out of the hash.
inline std::string config_hash(const ExperimentConfig& cfg) {
  nlohmann::json j = experiment_config_to_json(cfg);
  j.erase("workers");
  j.erase("memory_budget_bytes");
  return hex64(fnv1a64(j.dump()));
}

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  ExperimentConfig cfg{model_from_json(detail::require_field(j, "model")),
                       weight_model_from_json(
                           detail::require_field(j, "weights"))};
  cfg.paths_per_hypothesis = j.value("paths_per_hypothesis", 20000);
  cfg.k_max = detail::require_field(j, "k_max").get<int>();
  const auto& cps = detail::require_field(j, "checkpoints");
  if (cps.is_array()) {
    for (const auto& v : cps) cfg.checkpoints.push_back(v.get<int>());
  } else if (cps.is_object()) {
    const int from = detail::require_field(cps, "from").get<int>();
    const int to = detail::require_field(cps, "to").get<int>();
    const int step = detail::require_field(cps, "step").get<int>();
    if (step < 1) throw schema_error("checkpoints.step must be >= 1");
    for (int k = from; k <= to; k += step) cfg.checkpoints.push_back(k);
  } else {
    throw schema_error("checkpoints must be an array or {from, to, step}");
  }
  cfg.master_seed.master_seed =
      detail::require_field(j, "master_seed").get<std::uint64_t>();
  cfg.master_seed.stream_index = j.value("stream_offset", std::uint64_t{0});
  if (auto it = j.find("record_sensors"); it != j.end() && !it->is_string()) {
    for (const auto& v : *it) {
      const int s = v.get<int>() - 1;  // 1-based on disk
      cfg.record_sensors.push_back(s);
    }
  }
  cfg.estimate_both_hypotheses = j.value("estimate_both_hypotheses", false);
  cfg.workers = j.value("workers", 1);
  cfg.memory_budget_bytes =
      j.value("memory_budget_bytes", std::size_t{1} << 30);
  if (auto it = j.find("fit_window"); it != j.end()) {
    cfg.fit_k_lo = detail::require_field(*it, "k_lo").get<int>();
    cfg.fit_k_hi = detail::require_field(*it, "k_hi").get<int>();
  }
  cfg.r_samples = j.value("r_samples", 10000);
  validate_config(cfg);
  return cfg;
}

}  // namespace runcons
