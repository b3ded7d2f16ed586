#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "holon/data.hpp"
#include "holon/holarchy.hpp"
#include "holon/learner.hpp"
#include "holon/protocol.hpp"
#include "holon/scheduler.hpp"

namespace holon {

/// One terminal holon's state after one round of local training.
struct MetricsRecord {
  HolonId holon;
  std::uint64_t round = 0;
  double train_loss = 0.0;
  // NaN for regression models.
  double test_accuracy = 0.0;
  // Seconds since the run started; 0 in deterministic mode.
  double wall_time_s = 0.0;

  friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
};

struct SimulationInputs {
  std::shared_ptr<const HolarchySpec> spec;
  ModelSpec model;
  // Terminal data keyed by dataset_ref.
  std::map<std::string, Dataset> shards;
  std::optional<Dataset> test_set;
  ParamVector theta0;
  TrainingConfig training;
  RuntimeOptions runtime;
  ExecutionMode mode = ExecutionMode::Deterministic;
  bool record_events = false;
  DeterministicOptions deterministic;
  ConcurrentOptions concurrent;
};

struct RunResult {
  // Sorted by holon, then round.
  std::vector<MetricsRecord> records;
  SchedulerStats stats;
  // Per holon in declaration order, each holon's events in the order they
  // happened. Filled only when record_events is set.
  std::vector<RuntimeEvent> events;
  std::map<HolonId, ParamVector> final_models;
};

/// Terminal i (in declaration order) trains in round r with an rng seeded
/// by derive_seed(training.seed, i, r). Throws TopologyError for an invalid
/// spec and ConfigError for missing shards.
RunResult simulate(const SimulationInputs& inputs);

enum class DataSource { Synthetic, Idx };
enum class PartitionKind { Iid, EqNiid, UeqNiid };

struct ExperimentConfig {
  // Exactly one of preset / config_path.
  std::string preset;
  std::string config_path;

  ModelKind model = ModelKind::LogisticRegression;
  std::vector<std::size_t> hidden{32};
  Activation activation = Activation::Relu;

  DataSource source = DataSource::Synthetic;
  std::string idx_images;
  std::string idx_labels;
  // Synthetic data shape.
  std::size_t samples = 2000;
  std::size_t features = 8;
  std::size_t classes = 10;
  double noise = 0.0;
  double separation = 3.0;
  // Share of the data held out as the common test set (classifiers only).
  double test_fraction = 0.2;

  PartitionKind partition = PartitionKind::Iid;
  EqNiidScheme eqniid;

  TrainingConfig training;
  std::uint64_t rounds = 200;
  std::uint64_t local_budget = 2;
  std::uint64_t seed = 0;
  ExecutionMode mode = ExecutionMode::Deterministic;
  SuperiorPolicy superior_policy = SuperiorPolicy::Replace;
  bool sync_mode = true;

  std::string out;
};

/// Throws ConfigError describing the first problem found.
void check_config(const ExperimentConfig& cfg);

/// Builds the data, partition and initial model from cfg and runs the
/// simulation. Writes the metrics CSV when cfg.out is set.
RunResult run(const ExperimentConfig& cfg);

/// Prepares the simulation without running it.
SimulationInputs prepare(const ExperimentConfig& cfg);

struct RoundSummary {
  std::uint64_t round = 0;
  double mean_train_loss = 0.0;
  double mean_test_accuracy = 0.0;
  std::size_t holons = 0;
};

/// Per-round means over terminal holons, ordered by round. Throws
/// ConfigError on empty input.
std::vector<RoundSummary> summarize(const std::vector<MetricsRecord>& records);

/// CSV text: header then one row per record, ordered by holon then round.
/// Doubles use the shortest round-trip representation.
std::string metrics_csv(const std::vector<MetricsRecord>& records);

/// Throws ConfigError if the file cannot be written.
void emit_metrics(const std::vector<MetricsRecord>& records,
                  const std::string& path);

/// Inverse of metrics_csv. Throws ParseError on malformed input.
std::vector<MetricsRecord> parse_metrics_csv(const std::string& text);

std::string to_string(ExecutionMode mode);

}  // namespace holon
