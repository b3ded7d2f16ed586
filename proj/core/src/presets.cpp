#include "holon/presets.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <numeric>

#include "holon/error.hpp"

namespace holon {

namespace {

HolonId id(std::uint32_t level, std::size_t index) {
  return HolonId{level, static_cast<std::uint32_t>(index)};
}

void add_holon(HolarchySpec& spec, HolonId holon, HolonKind kind,
               std::optional<HolonId> parent, bool initiator = false) {
  HolonRecord r;
  r.id = holon;
  r.kind = kind;
  r.parent = parent;
  r.initiator = initiator;
  spec.add(std::move(r));
}

void add_terminal(HolarchySpec& spec, HolonId holon, HolonId parent,
                  std::size_t data_index) {
  HolonRecord r;
  r.id = holon;
  r.kind = HolonKind::Terminal;
  r.parent = parent;
  r.dataset_ref = std::to_string(data_index);
  spec.add(std::move(r));
}

bool connected(std::size_t n, const std::vector<IndexEdge>& edges) {
  if (n == 0) return false;
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&parent](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::size_t components = n;
  for (auto [a, b] : edges) {
    auto ra = find(a);
    auto rb = find(b);
    if (ra != rb) {
      parent[ra] = rb;
      --components;
    }
  }
  return components == 1;
}

void check_edges(std::size_t n, const std::vector<IndexEdge>& edges) {
  for (auto [a, b] : edges) {
    if (a >= n || b >= n) {
      throw TopologyError("edge endpoint out of range");
    }
  }
}

std::vector<Edge> terminal_edges(std::uint32_t level,
                                 const std::vector<IndexEdge>& edges) {
  std::vector<Edge> out;
  out.reserve(edges.size());
  for (auto [a, b] : edges) out.emplace_back(id(level, a + 1), id(level, b + 1));
  return out;
}

std::vector<Edge> complete_between(const std::vector<HolonId>& holons) {
  std::vector<Edge> out;
  for (std::size_t i = 0; i < holons.size(); ++i) {
    for (std::size_t j = i + 1; j < holons.size(); ++j) {
      out.emplace_back(holons[i], holons[j]);
    }
  }
  return out;
}

// Edges of the shared terminal graph with both ends inside group.
std::vector<IndexEdge> restrict_to(const std::vector<IndexEdge>& edges,
                                   const std::vector<std::size_t>& group) {
  std::vector<IndexEdge> out;
  auto inside = [&group](std::size_t v) {
    return std::find(group.begin(), group.end(), v) != group.end();
  };
  for (const auto& e : edges) {
    if (inside(e.first) && inside(e.second)) out.push_back(e);
  }
  return out;
}

// Attaches the 10 experiment terminals at `level` under the group heads,
// one head per group, with each group's slice of the terminal graph.
void attach_groups(HolarchySpec& spec, std::uint32_t level,
                   const std::vector<HolonId>& group_heads) {
  const auto edges = experiment_terminal_edges();
  const auto groups = experiment_groups();
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (auto t : groups[g]) {
      add_terminal(spec, id(level, t + 1), group_heads[g], t);
    }
  }
  spec.link_children();
  for (std::size_t g = 0; g < groups.size(); ++g) {
    spec.set_graph({group_heads[g],
                    terminal_edges(level, restrict_to(edges, groups[g]))});
  }
}

void require_valid(const HolarchySpec& spec) {
  auto violations = validate(spec);
  if (!violations.empty()) {
    throw TopologyError("preset is invalid: " + violations.front().message);
  }
}

std::size_t parse_count(std::string_view text, std::string_view name) {
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || value == 0) {
    throw ConfigError("bad count '" + std::string(text) + "' in preset " +
                      std::string(name));
  }
  return value;
}

ParamVector weighted_mean(const std::vector<const ParamVector*>& models,
                          const std::vector<double>& weights) {
  ParamVector out(models.front()->size());
  double total = 0.0;
  for (double w : weights) total += w;
  for (std::size_t j = 0; j < models.size(); ++j) {
    for (std::size_t k = 0; k < out.size(); ++k) {
      out[k] += weights[j] * (*models[j])[k];
    }
  }
  for (auto& v : out) v /= total;
  return out;
}

ParamVector train_client(const ModelSpec& model, const ParamVector& theta,
                         const Dataset& data, const TrainingConfig& cfg,
                         std::size_t client, std::size_t round) {
  std::mt19937_64 rng(derive_seed(cfg.seed, client, round));
  return train_local(model, theta, data, cfg, rng);
}

}  // namespace

std::vector<IndexEdge> ring_edges(std::size_t n) {
  std::vector<IndexEdge> out;
  if (n < 2) return out;
  if (n == 2) return {{0, 1}};
  for (std::size_t i = 0; i < n; ++i) out.emplace_back(i, (i + 1) % n);
  return out;
}

std::vector<IndexEdge> complete_edges(std::size_t n) {
  std::vector<IndexEdge> out;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) out.emplace_back(i, j);
  }
  return out;
}

HolarchySpec build_fedavg(std::size_t n) {
  if (n == 0) throw TopologyError("fedavg needs at least one terminal");
  HolarchySpec spec;
  const HolonId root = id(0, 1);
  add_holon(spec, root, HolonKind::NonTerminal, std::nullopt);
  spec.set_root(root);
  for (std::size_t i = 0; i < n; ++i) add_terminal(spec, id(1, i + 1), root, i);
  spec.link_children();
  return spec;
}

HolarchySpec build_p2p(std::size_t n, const std::vector<IndexEdge>& edges) {
  if (n == 0) throw TopologyError("p2p needs at least one terminal");
  check_edges(n, edges);
  if (!connected(n, edges)) {
    throw TopologyError("p2p communication graph is not connected");
  }
  HolarchySpec spec;
  const HolonId root = id(0, 1);
  add_holon(spec, root, HolonKind::NonTerminal, std::nullopt, true);
  spec.set_root(root);
  for (std::size_t i = 0; i < n; ++i) add_terminal(spec, id(1, i + 1), root, i);
  spec.link_children();
  spec.set_graph({root, terminal_edges(1, edges)});
  require_valid(spec);
  return spec;
}

HolarchySpec build_hfl(std::size_t m, std::size_t k) {
  if (m == 0 || k == 0) throw TopologyError("hfl needs m, k >= 1");
  HolarchySpec spec;
  const HolonId root = id(0, 1);
  add_holon(spec, root, HolonKind::NonTerminal, std::nullopt);
  spec.set_root(root);
  for (std::size_t e = 0; e < m; ++e) {
    add_holon(spec, id(1, e + 1), HolonKind::NonTerminal, root);
  }
  for (std::size_t e = 0; e < m; ++e) {
    for (std::size_t c = 0; c < k; ++c) {
      const std::size_t t = e * k + c;
      add_terminal(spec, id(2, t + 1), id(1, e + 1), t);
    }
  }
  spec.link_children();
  return spec;
}

std::vector<IndexEdge> experiment_terminal_edges() {
  auto edges = ring_edges(10);
  edges.emplace_back(0, 3);
  edges.emplace_back(4, 6);
  edges.emplace_back(7, 9);
  return edges;
}

std::vector<std::vector<std::size_t>> experiment_groups() {
  return {{0, 1, 2, 3}, {4, 5, 6}, {7, 8, 9}};
}

HolarchySpec build_experiment(ExperimentPreset preset) {
  HolarchySpec spec;
  const HolonId root = id(0, 1);
  switch (preset) {
    case ExperimentPreset::HoAL1P:
      return build_p2p(10, experiment_terminal_edges());
    case ExperimentPreset::HoAL2L: {
      add_holon(spec, root, HolonKind::NonTerminal, std::nullopt);
      std::vector<HolonId> heads{id(1, 1), id(1, 2), id(1, 3)};
      for (const auto& h : heads) add_holon(spec, h, HolonKind::NonTerminal, root);
      spec.set_root(root);
      attach_groups(spec, 2, heads);
      spec.set_graph({root, complete_between(heads)});
      break;
    }
    case ExperimentPreset::HoAL3L: {
      add_holon(spec, root, HolonKind::NonTerminal, std::nullopt);
      std::vector<HolonId> upper{id(1, 1), id(1, 2)};
      for (const auto& h : upper) add_holon(spec, h, HolonKind::NonTerminal, root);
      std::vector<HolonId> lower{id(2, 1), id(2, 2), id(2, 3)};
      add_holon(spec, lower[0], HolonKind::NonTerminal, upper[0]);
      add_holon(spec, lower[1], HolonKind::NonTerminal, upper[0]);
      add_holon(spec, lower[2], HolonKind::NonTerminal, upper[1]);
      spec.set_root(root);
      attach_groups(spec, 3, lower);
      spec.set_graph({root, complete_between(upper)});
      spec.set_graph({upper[0], complete_between({lower[0], lower[1]})});
      break;
    }
    case ExperimentPreset::HoAL4L: {
      add_holon(spec, root, HolonKind::NonTerminal, std::nullopt);
      std::vector<HolonId> top{id(1, 1), id(1, 2)};
      for (const auto& h : top) add_holon(spec, h, HolonKind::NonTerminal, root);
      std::vector<HolonId> mid{id(2, 1), id(2, 2)};
      add_holon(spec, mid[0], HolonKind::NonTerminal, top[0]);
      add_holon(spec, mid[1], HolonKind::NonTerminal, top[1]);
      std::vector<HolonId> low{id(3, 1), id(3, 2), id(3, 3)};
      add_holon(spec, low[0], HolonKind::NonTerminal, mid[0]);
      add_holon(spec, low[1], HolonKind::NonTerminal, mid[0]);
      add_holon(spec, low[2], HolonKind::NonTerminal, mid[1]);
      spec.set_root(root);
      attach_groups(spec, 4, low);
      spec.set_graph({root, complete_between(top)});
      spec.set_graph({mid[0], complete_between({low[0], low[1]})});
      break;
    }
  }
  require_valid(spec);
  return spec;
}

HolarchySpec build_preset(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (lower == "hoal1p") return build_experiment(ExperimentPreset::HoAL1P);
  if (lower == "hoal2l") return build_experiment(ExperimentPreset::HoAL2L);
  if (lower == "hoal3l") return build_experiment(ExperimentPreset::HoAL3L);
  if (lower == "hoal4l") return build_experiment(ExperimentPreset::HoAL4L);

  const auto colon = lower.find(':');
  if (colon == std::string::npos) {
    throw ConfigError("unknown preset '" + std::string(name) + "'");
  }
  const std::string_view family = std::string_view(lower).substr(0, colon);
  const std::string_view arg = std::string_view(lower).substr(colon + 1);
  if (family == "fedavg") return build_fedavg(parse_count(arg, name));
  if (family == "p2p-ring") {
    const auto n = parse_count(arg, name);
    return build_p2p(n, ring_edges(n));
  }
  if (family == "p2p-complete") {
    const auto n = parse_count(arg, name);
    return build_p2p(n, complete_edges(n));
  }
  if (family == "hfl") {
    const auto x = arg.find('x');
    if (x == std::string_view::npos) {
      throw ConfigError("hfl preset needs <m>x<k>, got '" + std::string(arg) +
                        "'");
    }
    return build_hfl(parse_count(arg.substr(0, x), name),
                     parse_count(arg.substr(x + 1), name));
  }
  throw ConfigError("unknown preset '" + std::string(name) + "'");
}

std::vector<std::string> canonical_preset_names() {
  return {"fedavg:4",     "fedavg:10", "p2p-ring:4", "p2p-ring:10",
          "p2p-complete:4", "hfl:2x3", "hoal1p",     "hoal2l",
          "hoal3l",       "hoal4l"};
}

FedAvgTrace fedavg_oracle(const ModelSpec& model,
                          const std::vector<Dataset>& datasets,
                          const ParamVector& theta0, const TrainingConfig& cfg,
                          std::size_t rounds) {
  FedAvgTrace trace;
  trace.globals.push_back(theta0);
  std::vector<double> sizes;
  for (const auto& d : datasets) sizes.push_back(static_cast<double>(d.size()));
  for (std::size_t r = 1; r <= rounds; ++r) {
    std::vector<ParamVector> local;
    for (std::size_t i = 0; i < datasets.size(); ++i) {
      local.push_back(
          train_client(model, trace.globals.back(), datasets[i], cfg, i, r));
    }
    std::vector<const ParamVector*> ptrs;
    for (const auto& p : local) ptrs.push_back(&p);
    trace.globals.push_back(weighted_mean(ptrs, sizes));
    trace.clients.push_back(std::move(local));
  }
  return trace;
}

HflTrace hfl_oracle(const ModelSpec& model, std::size_t m, std::size_t k,
                    const std::vector<Dataset>& datasets,
                    const ParamVector& theta0, const TrainingConfig& cfg,
                    std::size_t rounds, std::size_t edge_period) {
  if (datasets.size() != m * k) {
    throw DataError("hfl oracle needs m * k datasets");
  }
  if (edge_period == 0) throw ConfigError("edge period must be >= 1");
  HflTrace trace;
  std::vector<ParamVector> edge_models(m, theta0);
  std::vector<double> edge_sizes(m, 0.0);
  for (std::size_t c = 0; c < m * k; ++c) {
    edge_sizes[c / k] += static_cast<double>(datasets[c].size());
  }
  for (std::size_t r = 1; r <= rounds; ++r) {
    std::vector<ParamVector> clients;
    for (std::size_t c = 0; c < m * k; ++c) {
      clients.push_back(
          train_client(model, edge_models[c / k], datasets[c], cfg, c, r));
    }
    for (std::size_t e = 0; e < m; ++e) {
      std::vector<const ParamVector*> ptrs;
      std::vector<double> weights;
      for (std::size_t c = e * k; c < (e + 1) * k; ++c) {
        ptrs.push_back(&clients[c]);
        weights.push_back(static_cast<double>(datasets[c].size()));
      }
      edge_models[e] = weighted_mean(ptrs, weights);
    }
    trace.edges.push_back(edge_models);
    trace.clients.push_back(std::move(clients));
    if (r % edge_period == 0 || r == rounds) {
      std::vector<const ParamVector*> ptrs;
      for (const auto& e : edge_models) ptrs.push_back(&e);
      ParamVector cloud = weighted_mean(ptrs, edge_sizes);
      trace.cloud.push_back(cloud);
      trace.cloud_rounds.push_back(r);
      if (r < rounds) std::fill(edge_models.begin(), edge_models.end(), cloud);
    }
  }
  return trace;
}

GossipTrace gossip_oracle(const ModelSpec& model,
                          const std::vector<IndexEdge>& edges,
                          const std::vector<Dataset>& datasets,
                          const std::vector<ParamVector>& initial,
                          const TrainingConfig& cfg, std::size_t rounds) {
  const std::size_t n = datasets.size();
  if (initial.size() != n) throw DataError("one initial model per node");
  check_edges(n, edges);
  std::vector<std::vector<std::size_t>> adj(n);
  for (auto [a, b] : edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  GossipTrace trace;
  std::vector<ParamVector> models = initial;
  for (std::size_t r = 1; r <= rounds; ++r) {
    std::vector<ParamVector> trained;
    for (std::size_t i = 0; i < n; ++i) {
      trained.push_back(train_client(model, models[i], datasets[i], cfg, i, r));
    }
    std::vector<ParamVector> mixed;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<const ParamVector*> ptrs{&trained[i]};
      std::vector<double> weights{static_cast<double>(datasets[i].size())};
      for (auto j : adj[i]) {
        ptrs.push_back(&trained[j]);
        weights.push_back(static_cast<double>(datasets[j].size()));
      }
      mixed.push_back(weighted_mean(ptrs, weights));
    }
    models = mixed;
    trace.trained.push_back(std::move(trained));
    trace.mixed.push_back(std::move(mixed));
  }
  return trace;
}

}  // namespace holon
