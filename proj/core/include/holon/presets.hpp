#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "holon/holarchy.hpp"
#include "holon/learner.hpp"

namespace holon {

/// Edge between terminals by 0-based position. Terminal i is the holon
/// with index i + 1 on the deepest level and owns dataset "i".
using IndexEdge = std::pair<std::size_t, std::size_t>;

std::vector<IndexEdge> ring_edges(std::size_t n);
std::vector<IndexEdge> complete_edges(std::size_t n);

/// Root 0.1 over terminals 1.1..1.n with an empty graph.
HolarchySpec build_fedavg(std::size_t n);

/// Initiator root 0.1 over terminals 1.1..1.n linked by edges. Throws
/// TopologyError unless the graph is connected.
HolarchySpec build_p2p(std::size_t n, const std::vector<IndexEdge>& edges);

/// Root, m heads 1.1..1.m, and k terminals per head (2.1..2.(m*k), grouped
/// head by head). All graphs are empty.
HolarchySpec build_hfl(std::size_t m, std::size_t k);

enum class ExperimentPreset { HoAL1P, HoAL2L, HoAL3L, HoAL4L };

/// Ring of 10 with chords 0-3, 4-6, 7-9: the terminal graph every
/// experiment preset shares.
std::vector<IndexEdge> experiment_terminal_edges();

/// Terminal groups {0..3}, {4..6}, {7..9} used by the multi-level presets.
std::vector<std::vector<std::size_t>> experiment_groups();

HolarchySpec build_experiment(ExperimentPreset preset);

/// fedavg:<n>, p2p-ring:<n>, p2p-complete:<n>, hfl:<m>x<k>, hoal1p,
/// hoal2l, hoal3l, hoal4l. Throws ConfigError for anything else.
HolarchySpec build_preset(std::string_view name);

/// Names accepted by build_preset that have a golden config file.
std::vector<std::string> canonical_preset_names();

// Sequential reference implementations. Client i trains with an rng seeded
// by derive_seed(cfg.seed, i, round), rounds counted from 1.

struct FedAvgTrace {
  // globals[0] = theta0, globals[r] = global model after round r.
  std::vector<ParamVector> globals;
  // clients[r - 1][i] = client i's model after local training in round r.
  std::vector<std::vector<ParamVector>> clients;
};

FedAvgTrace fedavg_oracle(const ModelSpec& model,
                          const std::vector<Dataset>& datasets,
                          const ParamVector& theta0, const TrainingConfig& cfg,
                          std::size_t rounds);

struct HflTrace {
  // clients[r - 1][c], clients ordered head by head.
  std::vector<std::vector<ParamVector>> clients;
  // edges[r - 1][e] = edge e's average of its clients in round r.
  std::vector<std::vector<ParamVector>> edges;
  // Cloud averages in the order they happen (every edge_period rounds and
  // after the last round).
  std::vector<ParamVector> cloud;
  std::vector<std::size_t> cloud_rounds;
};

HflTrace hfl_oracle(const ModelSpec& model, std::size_t m, std::size_t k,
                    const std::vector<Dataset>& datasets,
                    const ParamVector& theta0, const TrainingConfig& cfg,
                    std::size_t rounds, std::size_t edge_period = 2);

struct GossipTrace {
  // trained[r - 1][i]: node i after local training in round r.
  std::vector<std::vector<ParamVector>> trained;
  // mixed[r - 1][i]: size-weighted average of node i and its neighbors'
  // trained models, the starting point of round r + 1.
  std::vector<std::vector<ParamVector>> mixed;
};

GossipTrace gossip_oracle(const ModelSpec& model,
                          const std::vector<IndexEdge>& edges,
                          const std::vector<Dataset>& datasets,
                          const std::vector<ParamVector>& initial,
                          const TrainingConfig& cfg, std::size_t rounds);

}  // namespace holon
