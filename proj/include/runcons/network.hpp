#pragma once

#include <algorithm>
#include <cmath>
#include <iostream>
#include <json.hpp>
#include <numbers>
#include <optional>
#include <set>
#include <utility>
#include <variant>
#include <vector>

#include "runcons/errors.hpp"
#include "runcons/json_util.hpp"
#include "runcons/linalg.hpp"
#include "runcons/rng.hpp"

namespace runcons {

// The supergraph collects every link with positive formation probability.
// Node indices are 0-based in code; serialized files use 1-based ids.
struct SupergraphEdge {
  int i = 0;  // i < j
  int j = 0;
  double q = 1.0;  // formation probability, in (0, 1]
};

struct Supergraph {
  int n = 0;
  std::vector<SupergraphEdge> edges;

  int edge_count() const { return static_cast<int>(edges.size()); }

  std::vector<int> degrees() const {
    std::vector<int> deg(n, 0);
    for (const auto& e : edges) {
      ++deg[e.i];
      ++deg[e.j];
    }
    return deg;
  }
};

inline void validate_supergraph(const Supergraph& g) {
  if (g.n < 1) throw std::invalid_argument("Supergraph: n >= 1 required");
  std::set<std::pair<int, int>> seen;
  for (const auto& e : g.edges) {
    if (e.i < 0 || e.j < 0 || e.i >= g.n || e.j >= g.n)
      throw std::invalid_argument("Supergraph: edge endpoint out of range");
    if (e.i >= e.j)
      throw std::invalid_argument("Supergraph: edges must satisfy i < j");
    if (!(e.q > 0.0 && e.q <= 1.0))
      throw std::invalid_argument(
          "Supergraph: formation probability must be in (0, 1]");
    if (!seen.insert({e.i, e.j}).second)
      throw std::invalid_argument("Supergraph: duplicate edge");
  }
}

// N points uniform on the unit square; an edge joins every pair closer than
// `radius`. All edges get the same formation probability. An empty edge set
// is legal; the caller may reject it.
inline Supergraph geometric_supergraph(int n, double radius, double uniform_q,
                                       RngSeed seed) {
  if (n < 2) throw std::invalid_argument("geometric_supergraph: n >= 2");
  if (!(radius >= 0.0))
    throw std::invalid_argument("geometric_supergraph: radius >= 0");
  if (!(uniform_q > 0.0 && uniform_q <= 1.0))
    throw std::invalid_argument("geometric_supergraph: q must be in (0, 1]");
  SplitStream rng(seed);
  std::vector<double> px(n), py(n);
  for (int i = 0; i < n; ++i) {
    px[i] = rng.next_unit();
    py[i] = rng.next_unit();
  }
  Supergraph g{n, {}};
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double dx = px[i] - px[j];
      const double dy = py[i] - py[j];
      if (std::sqrt(dx * dx + dy * dy) < radius)
        g.edges.push_back({i, j, uniform_q});
    }
  validate_supergraph(g);
  return g;
}

struct GeometricFit {
  Supergraph graph;
  double radius = 0.0;
  int edge_count = 0;
  bool exact = false;  // whether the target edge count was hit exactly
};

// Bisect the connection radius on a fixed point draw until the edge count
// hits target_m (or the closest achievable count; ties can make an exact hit
// impossible). The returned graph equals geometric_supergraph(n, radius, q,
// seed) for the reported radius.
inline GeometricFit geometric_supergraph_target_edges(int n, int target_m,
                                                      double q, RngSeed seed) {
  if (n < 2) throw std::invalid_argument("geometric_supergraph: n >= 2");
  const long max_m = static_cast<long>(n) * (n - 1) / 2;
  if (target_m < 0 || target_m > max_m)
    throw std::invalid_argument(
        "geometric_supergraph: target edge count out of range");
  SplitStream rng(seed);
  std::vector<double> px(n), py(n);
  for (int i = 0; i < n; ++i) {
    px[i] = rng.next_unit();
    py[i] = rng.next_unit();
  }
  const auto count = [&](double radius) {
    int m = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        const double dx = px[i] - px[j];
        const double dy = py[i] - py[j];
        if (std::sqrt(dx * dx + dy * dy) < radius) ++m;
      }
    return m;
  };
  double lo = 0.0, hi = std::numbers::sqrt2 * 1.0000001;
  for (int iter = 0; iter < 80 && hi - lo > 1e-14; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (count(mid) < target_m)
      lo = mid;
    else
      hi = mid;
  }
  const double radius = hi;
  const int achieved = count(radius);
  Supergraph g{n, {}};
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double dx = px[i] - px[j];
      const double dy = py[i] - py[j];
      if (std::sqrt(dx * dx + dy * dy) < radius) g.edges.push_back({i, j, q});
    }
  validate_supergraph(g);
  return {std::move(g), radius, achieved, achieved == target_m};
}

// Geometric supergraph on all nodes except `pendant`, then the pendant node
// attached to `anchor` through a single edge. The base radius defaults to the
// usual geometric-graph connectivity radius sqrt(2 ln m / m).
inline Supergraph pendant_supergraph(int n, int pendant, int anchor,
                                     double q_pendant, double q_rest,
                                     RngSeed seed,
                                     std::optional<double> radius = {}) {
  if (n < 3) throw std::invalid_argument("pendant_supergraph: n >= 3");
  if (pendant < 0 || pendant >= n || anchor < 0 || anchor >= n)
    throw std::invalid_argument("pendant_supergraph: node index out of range");
  if (pendant == anchor)
    throw std::invalid_argument("pendant_supergraph: pendant == anchor");
  if (!(q_pendant > 0.0 && q_pendant <= 1.0))
    throw std::invalid_argument("pendant_supergraph: q_pendant must be in (0,1]");
  const int m = n - 1;
  const double base_radius =
      radius.value_or(std::sqrt(2.0 * std::log(static_cast<double>(m)) / m));
  Supergraph base = geometric_supergraph(m, base_radius, q_rest, seed);
  // relabel: base node b maps to b for b < pendant, b+1 otherwise
  Supergraph g{n, {}};
  for (const auto& e : base.edges) {
    int a = e.i < pendant ? e.i : e.i + 1;
    int b = e.j < pendant ? e.j : e.j + 1;
    if (a > b) std::swap(a, b);
    g.edges.push_back({a, b, q_rest});
  }
  g.edges.push_back({std::min(pendant, anchor), std::max(pendant, anchor),
                     q_pendant});
  validate_supergraph(g);
  return g;
}

// W(k) = J with probability p, W(k) = I otherwise.
struct SwitchingFusion {
  int n = 0;
  double p = 0.0;
};

// Each supergraph edge is online independently with its own q; online links
// get Metropolis weights 1/(1 + max(d_i, d_j)) from the realized degrees.
struct LinkFailureMetropolis {
  Supergraph graph;
};

using WeightModel = std::variant<SwitchingFusion, LinkFailureMetropolis>;

inline void validate_weight_model(const WeightModel& model) {
  if (const auto* sf = std::get_if<SwitchingFusion>(&model)) {
    if (sf->n < 2) throw std::invalid_argument("SwitchingFusion: n >= 2");
    if (!(sf->p >= 0.0 && sf->p <= 1.0))
      throw std::invalid_argument("SwitchingFusion: p must be in [0, 1]");
  } else {
    validate_supergraph(std::get<LinkFailureMetropolis>(model).graph);
  }
}

inline int weight_model_size(const WeightModel& model) {
  if (const auto* sf = std::get_if<SwitchingFusion>(&model)) return sf->n;
  return std::get<LinkFailureMetropolis>(model).graph.n;
}

struct WeightSample {
  Matrix w;

  // Assumption on W(k): symmetric, stochastic, nonnegative.
  bool satisfies_invariants(double tol = 1e-12) const {
    if (w.rows() != w.cols()) return false;
    if (!is_symmetric(w, tol)) return false;
    if (w.minCoeff() < -tol) return false;
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      if (std::abs(w.row(i).sum() - 1.0) > tol * w.cols()) return false;
    return true;
  }
};

// Draws W(k) repeatedly without allocating; the Monte Carlo engine applies
// W to a vector directly, never forming the dense matrix.
class WeightSampler {
 public:
  explicit WeightSampler(WeightModel model) : model_(std::move(model)) {
    validate_weight_model(model_);
    if (const auto* lf = std::get_if<LinkFailureMetropolis>(&model_)) {
      degree_.assign(lf->graph.n, 0);
      online_.assign(lf->graph.edges.size(), 0);
    }
  }

  int size() const { return weight_model_size(model_); }

  // out = W(k) x for a fresh draw of W(k).
  void sample_apply(SplitStream& rng, const Vector& x, Vector& out) {
    if (const auto* sf = std::get_if<SwitchingFusion>(&model_)) {
      if (rng.next_bernoulli(sf->p))
        out.setConstant(x.mean());
      else
        out = x;
      return;
    }
    const auto& graph = std::get<LinkFailureMetropolis>(model_).graph;
    draw_pattern(rng, graph);
    out = x;
    for (std::size_t m = 0; m < graph.edges.size(); ++m) {
      if (!online_[m]) continue;
      const auto& e = graph.edges[m];
      const double w = 1.0 / (1.0 + std::max(degree_[e.i], degree_[e.j]));
      out[e.i] += w * (x[e.j] - x[e.i]);
      out[e.j] += w * (x[e.i] - x[e.j]);
    }
  }

  // Dense draw, same randomness layout as sample_apply.
  void sample_dense(SplitStream& rng, Matrix& w) {
    const int n = size();
    if (const auto* sf = std::get_if<SwitchingFusion>(&model_)) {
      if (rng.next_bernoulli(sf->p))
        w = Matrix::Constant(n, n, 1.0 / n);
      else
        w = Matrix::Identity(n, n);
      return;
    }
    const auto& graph = std::get<LinkFailureMetropolis>(model_).graph;
    draw_pattern(rng, graph);
    w = Matrix::Identity(n, n);
    for (std::size_t m = 0; m < graph.edges.size(); ++m) {
      if (!online_[m]) continue;
      const auto& e = graph.edges[m];
      const double wij = 1.0 / (1.0 + std::max(degree_[e.i], degree_[e.j]));
      w(e.i, e.j) = wij;
      w(e.j, e.i) = wij;
      w(e.i, e.i) -= wij;
      w(e.j, e.j) -= wij;
    }
  }

 private:
  void draw_pattern(SplitStream& rng, const Supergraph& graph) {
    std::fill(degree_.begin(), degree_.end(), 0);
    for (std::size_t m = 0; m < graph.edges.size(); ++m) {
      online_[m] = rng.next_bernoulli(graph.edges[m].q) ? 1 : 0;
      if (online_[m]) {
        ++degree_[graph.edges[m].i];
        ++degree_[graph.edges[m].j];
      }
    }
  }

  WeightModel model_;
  std::vector<int> degree_;
  std::vector<char> online_;
};

inline WeightSample sample_weight(const WeightModel& model, RngSeed seed) {
  WeightSampler sampler(model);
  SplitStream rng(seed);
  WeightSample sample;
  sampler.sample_dense(rng, sample.w);
  return sample;
}

struct SpectralEstimate {
  double r = 0.0;
  double standard_error = 0.0;
};

// Monte Carlo estimate of r = lambda_2(E[W^2]); the standard error comes from
// a split-half jackknife.
inline SpectralEstimate spectral_r_mc(const WeightModel& model, int n_samples,
                                      RngSeed seed) {
  if (n_samples < 1)
    throw std::invalid_argument("spectral_r_mc: n_samples >= 1");
  WeightSampler sampler(model);
  SplitStream rng(seed);
  const int n = sampler.size();
  Matrix w(n, n);
  Matrix sum_a = Matrix::Zero(n, n);
  Matrix sum_b = Matrix::Zero(n, n);
  const int half = n_samples / 2;
  for (int s = 0; s < n_samples; ++s) {
    sampler.sample_dense(rng, w);
    if (s < half)
      sum_a.noalias() += w * w;
    else
      sum_b.noalias() += w * w;
  }
  const double r = lambda2((sum_a + sum_b) / n_samples);
  double se = 0.0;
  if (half >= 1 && n_samples - half >= 1 && n_samples >= 2) {
    const double ra = lambda2(sum_a / half);
    const double rb = lambda2(sum_b / (n_samples - half));
    se = 0.5 * std::abs(ra - rb);
  }
  return {r, se};
}

// r for the weight model. Switching fusion admits the closed form
// E[W^2] = pJ + (1-p)I, hence r = 1 - p exactly; the link-failure model has
// no tractable closed form and is estimated by sampling.
inline SpectralEstimate spectral_r(const WeightModel& model, int n_samples,
                                   RngSeed seed) {
  if (const auto* sf = std::get_if<SwitchingFusion>(&model))
    return {1.0 - sf->p, 0.0};
  return spectral_r_mc(model, n_samples, seed);
}

// P_i: probability that sensor i sees at least one online neighbor in one
// step. Independent links make this 1 - prod(1 - q_e) over incident edges.
// For switching fusion the only connecting event is W = J, so P_i = p.
inline double connectivity_probability(const WeightModel& model, int sensor) {
  const int n = weight_model_size(model);
  if (sensor < 0 || sensor >= n)
    throw std::invalid_argument("connectivity_probability: sensor out of range");
  if (const auto* sf = std::get_if<SwitchingFusion>(&model)) return sf->p;
  const auto& graph = std::get<LinkFailureMetropolis>(model).graph;
  double prod_offline = 1.0;
  bool any = false;
  for (const auto& e : graph.edges) {
    if (e.i == sensor || e.j == sensor) {
      any = true;
      prod_offline *= 1.0 - e.q;
    }
  }
  if (!any) {
    std::cerr << "connectivity_probability: sensor " << sensor + 1
              << " has no incident supergraph edges\n";
    return 0.0;
  }
  return 1.0 - prod_offline;
}

inline nlohmann::json supergraph_to_json(const Supergraph& g) {
  nlohmann::json j;
  j["n"] = g.n;
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : g.edges)
    edges.push_back({e.i + 1, e.j + 1, e.q});  // 1-based on disk
  j["edges"] = std::move(edges);
  return j;
}

inline Supergraph supergraph_from_json(const nlohmann::json& j) {
  auto n_it = j.find("n");
  if (n_it == j.end()) throw schema_error("missing field: supergraph.n");
  Supergraph g{n_it->get<int>(), {}};
  auto e_it = j.find("edges");
  if (e_it == j.end()) throw schema_error("missing field: supergraph.edges");
  for (const auto& row : *e_it) {
    if (!row.is_array() || row.size() != 3)
      throw schema_error("supergraph.edges entries must be [i, j, q]");
    g.edges.push_back(
        {row[0].get<int>() - 1, row[1].get<int>() - 1, row[2].get<double>()});
  }
  try {
    validate_supergraph(g);
  } catch (const std::invalid_argument& e) {
    throw schema_error(std::string("supergraph: ") + e.what());
  }
  return g;
}

inline nlohmann::json weight_model_to_json(const WeightModel& model) {
  nlohmann::json j;
  if (const auto* sf = std::get_if<SwitchingFusion>(&model)) {
    j["type"] = "switching_fusion";
    j["n"] = sf->n;
    j["p"] = sf->p;
  } else {
    j["type"] = "link_failure_metropolis";
    j["supergraph"] =
        supergraph_to_json(std::get<LinkFailureMetropolis>(model).graph);
  }
  return j;
}

inline WeightModel weight_model_from_json(const nlohmann::json& j) {
  const std::string type = detail::require_field(j, "type").get<std::string>();
  if (type == "switching_fusion") {
    SwitchingFusion sf{detail::require_field(j, "n").get<int>(),
                       detail::require_field(j, "p").get<double>()};
    try {
      validate_weight_model(sf);
    } catch (const std::invalid_argument& e) {
      throw schema_error(std::string("weights: ") + e.what());
    }
    return sf;
  }
  if (type == "link_failure_metropolis") {
    return LinkFailureMetropolis{
        supergraph_from_json(detail::require_field(j, "supergraph"))};
  }
  throw schema_error("weights.type must be switching_fusion or "
                     "link_failure_metropolis");
}

}  // namespace runcons
