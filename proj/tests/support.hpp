#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "holon/data.hpp"
#include "holon/learner.hpp"
#include "holon/presets.hpp"
#include "holon/sim.hpp"

namespace holon {

// Readable gtest failure output for parameter vectors.
inline void PrintTo(const ParamVector& p, std::ostream* os) {
  *os << '[';
  for (std::size_t k = 0; k < p.size(); ++k) *os << (k ? ", " : "") << p[k];
  *os << ']';
}

inline void PrintTo(const HolonId& id, std::ostream* os) { *os << to_string(id); }

}  // namespace holon

namespace holon::testing {

inline std::vector<Dataset> blob_shards(std::size_t n, std::size_t per_shard,
                                        std::size_t dim, std::size_t classes,
                                        std::uint64_t seed) {
  std::vector<Dataset> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::mt19937_64 rng(seed * 1000 + i);
    out.push_back(
        synthetic_classification(per_shard, dim, classes, 3.0, 1.0, rng).data);
  }
  return out;
}

inline std::map<std::string, Dataset> by_ref(const std::vector<Dataset>& d) {
  std::map<std::string, Dataset> out;
  for (std::size_t i = 0; i < d.size(); ++i) out[std::to_string(i)] = d[i];
  return out;
}

inline SimulationInputs inputs_for(HolarchySpec spec, const ModelSpec& model,
                                   const std::vector<Dataset>& shards,
                                   const ParamVector& theta0,
                                   const TrainingConfig& cfg,
                                   std::uint64_t rounds) {
  SimulationInputs in;
  in.spec = std::make_shared<const HolarchySpec>(std::move(spec));
  in.model = model;
  in.shards = by_ref(shards);
  in.theta0 = theta0;
  in.training = cfg;
  in.runtime.budget = rounds;
  in.record_events = true;
  return in;
}

/// Events of one holon and kind, in order.
inline std::vector<RuntimeEvent> events_of(const RunResult& r,
                                           const HolonId& id, EventKind kind) {
  std::vector<RuntimeEvent> out;
  for (const auto& e : r.events) {
    if (e.holon == id && e.kind == kind) out.push_back(e);
  }
  return out;
}

inline ParamVector random_params(std::size_t dim, std::mt19937_64& rng,
                                 double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  ParamVector p(dim);
  for (auto& v : p) v = g(rng);
  return p;
}

}  // namespace holon::testing

namespace holon::testing {

/// Central finite differences of the mean loss.
inline ParamVector fd_gradient(const ModelSpec& model, const ParamVector& theta,
                               const Dataset& data, double h = 1e-6) {
  ParamVector g(theta.size());
  ParamVector probe = theta;
  for (std::size_t k = 0; k < theta.size(); ++k) {
    probe[k] = theta[k] + h;
    const double up = loss(model, probe, data);
    probe[k] = theta[k] - h;
    const double down = loss(model, probe, data);
    probe[k] = theta[k];
    g[k] = (up - down) / (2.0 * h);
  }
  return g;
}

inline double norm(const ParamVector& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

/// ||a - b|| / max(||a||, ||b||, floor).
inline double relative_error(const ParamVector& a, const ParamVector& b,
                             double floor = 1e-8) {
  ParamVector d(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) d[k] = a[k] - b[k];
  return norm(d) / std::max({norm(a), norm(b), floor});
}

/// Random batch for a gradient check: rows and labels fitting model.
inline Dataset random_batch(const ModelSpec& model, std::size_t rows,
                            std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> x(rows * model.input_dim), y(rows);
  for (auto& v : x) v = g(rng);
  if (model.classifier()) {
    for (auto& v : y) v = static_cast<double>(rng() % model.output_dim);
    return Dataset(model.input_dim, std::move(x), std::move(y),
                   model.output_dim);
  }
  for (auto& v : y) v = g(rng);
  return Dataset(model.input_dim, std::move(x), std::move(y));
}

/// Least-squares solution with bias via the normal equations, solved by
/// Gaussian elimination with partial pivoting. Returns weights then bias.
inline ParamVector normal_equations(const Dataset& data) {
  const std::size_t p = data.input_dim() + 1;
  std::vector<std::vector<double>> a(p, std::vector<double>(p + 1, 0.0));
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::vector<double> z(data.row(i).begin(), data.row(i).end());
    z.push_back(1.0);
    for (std::size_t r = 0; r < p; ++r) {
      for (std::size_t c = 0; c < p; ++c) a[r][c] += z[r] * z[c];
      a[r][p] += z[r] * data.label(i);
    }
  }
  for (std::size_t col = 0; col < p; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < p; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    }
    std::swap(a[col], a[piv]);
    for (std::size_t r = 0; r < p; ++r) {
      if (r == col) continue;
      const double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c <= p; ++c) a[r][c] -= f * a[col][c];
    }
  }
  ParamVector out(p);
  for (std::size_t r = 0; r < p; ++r) out[r] = a[r][p] / a[r][r];
  return out;
}

}  // namespace holon::testing
