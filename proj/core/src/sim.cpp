#include "holon/sim.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "holon/error.hpp"
#include "holon/presets.hpp"

namespace holon {

namespace {

// Seed streams for run(); terminal training uses streams 0..n-1 with
// rounds >= 1, so round 0 never collides.
constexpr std::uint64_t kDataStream = 0x10000;
constexpr std::uint64_t kSplitStream = 0x10001;
constexpr std::uint64_t kPartitionStream = 0x10002;
constexpr std::uint64_t kInitStream = 0x10003;

template <typename T>
class Channel {
 public:
  void push(T value) {
    {
      std::lock_guard lock(mutex_);
      queue_.push_back(std::move(value));
    }
    cv_.notify_one();
  }

  void close() {
    {
      std::lock_guard lock(mutex_);
      closed_ = true;
    }
    cv_.notify_all();
  }

  // False once closed and drained.
  bool pop(T& out) {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [this] { return closed_ || !queue_.empty(); });
    if (queue_.empty()) return false;
    out = std::move(queue_.front());
    queue_.pop_front();
    return true;
  }

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<T> queue_;
  bool closed_ = false;
};

bool record_order(const MetricsRecord& a, const MetricsRecord& b) {
  if (a.holon != b.holon) return a.holon < b.holon;
  return a.round < b.round;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

std::string to_string(ExecutionMode mode) {
  return mode == ExecutionMode::Deterministic ? "det" : "conc";
}

RunResult simulate(const SimulationInputs& inputs) {
  if (!inputs.spec) throw ConfigError("simulation needs a holarchy");
  const HolarchySpec& spec = *inputs.spec;
  auto violations = validate(spec);
  if (!violations.empty()) {
    throw TopologyError("invalid holarchy: " + violations.front().message);
  }
  check_model(inputs.model);
  if (inputs.theta0.size() != param_count(inputs.model)) {
    throw DimensionError("initial model has " +
                         std::to_string(inputs.theta0.size()) +
                         " parameters, model needs " +
                         std::to_string(param_count(inputs.model)));
  }

  std::map<HolonId, std::size_t> sizes;
  std::map<HolonId, const Dataset*> data;
  for (const auto& t : spec.terminals()) {
    const auto& ref = spec.record(t).dataset_ref;
    auto it = ref ? inputs.shards.find(*ref) : inputs.shards.end();
    if (it == inputs.shards.end()) {
      throw ConfigError("no data for terminal " + to_string(t));
    }
    if (it->second.empty()) {
      throw ConfigError("terminal " + to_string(t) + " has an empty shard");
    }
    sizes[t] = it->second.size();
    data[t] = &it->second;
  }

  const bool concurrent = inputs.mode == ExecutionMode::Concurrent;
  const bool with_accuracy = inputs.model.classifier() && inputs.test_set;
  const auto start_time = std::chrono::steady_clock::now();
  Channel<MetricsRecord> channel;
  std::vector<MetricsRecord> records;
  std::thread collector;
  if (concurrent) {
    collector = std::thread([&channel, &records] {
      MetricsRecord r;
      while (channel.pop(r)) records.push_back(r);
    });
  }

  auto shared = inputs.spec;
  std::vector<std::vector<RuntimeEvent>> events(spec.size());
  std::vector<HolonRuntime> holons;
  holons.reserve(spec.size());
  std::size_t terminal_index = 0;
  for (std::size_t pos = 0; pos < spec.declaration_order().size(); ++pos) {
    const HolonId h = spec.declaration_order()[pos];
    TrainFn train;
    double weight = 0.0;
    if (spec.record(h).terminal()) {
      const Dataset* shard = data.at(h);
      const std::uint64_t stream = terminal_index++;
      weight = static_cast<double>(shard->size());
      train = [&, shard, stream, h](const ParamVector& theta,
                                    std::uint64_t round) {
        std::mt19937_64 rng(derive_seed(inputs.training.seed, stream, round));
        ParamVector trained =
            train_local(inputs.model, theta, *shard, inputs.training, rng);
        MetricsRecord rec;
        rec.holon = h;
        rec.round = round;
        rec.train_loss = loss(inputs.model, trained, *shard);
        rec.test_accuracy =
            with_accuracy ? evaluate(inputs.model, trained, *inputs.test_set)
                          : std::numeric_limits<double>::quiet_NaN();
        if (concurrent) {
          rec.wall_time_s = std::chrono::duration<double>(
                                std::chrono::steady_clock::now() - start_time)
                                .count();
          channel.push(rec);
        } else {
          records.push_back(rec);
        }
        return trained;
      };
    } else {
      weight = static_cast<double>(aggregate_data_size(spec, h, sizes));
    }
    holons.emplace_back(shared, h, inputs.runtime, inputs.theta0, weight,
                        std::move(train));
    if (inputs.record_events) {
      auto* sink = &events[pos];
      holons.back().set_observer(
          [sink](const RuntimeEvent& e) { sink->push_back(e); });
    }
  }

  RunResult result;
  try {
    result.stats = concurrent ? run_concurrent(holons, inputs.concurrent)
                              : run_deterministic(holons, inputs.deterministic);
  } catch (...) {
    if (concurrent) {
      channel.close();
      collector.join();
    }
    throw;
  }
  if (concurrent) {
    channel.close();
    collector.join();
  }

  std::sort(records.begin(), records.end(), record_order);
  result.records = std::move(records);
  for (auto& per_holon : events) {
    for (auto& e : per_holon) result.events.push_back(std::move(e));
  }
  for (const auto& h : holons) result.final_models.emplace(h.id(), h.theta());
  return result;
}

void check_config(const ExperimentConfig& cfg) {
  if (cfg.preset.empty() == cfg.config_path.empty()) {
    throw ConfigError("give exactly one of a preset or a config file");
  }
  if (!cfg.config_path.empty() && !std::ifstream(cfg.config_path)) {
    throw ConfigError("config file '" + cfg.config_path + "' not found");
  }
  if (cfg.rounds == 0) throw ConfigError("rounds must be >= 1");
  if (cfg.local_budget == 0) throw ConfigError("local budget must be >= 1");
  if (cfg.training.epochs_per_round == 0) {
    throw ConfigError("epochs must be >= 1");
  }
  if (cfg.training.batch_size == 0) throw ConfigError("batch size must be >= 1");
  if (!(cfg.training.learning_rate >= 0.0) ||
      !std::isfinite(cfg.training.learning_rate)) {
    throw ConfigError("learning rate must be finite and >= 0");
  }
  if (!(cfg.test_fraction >= 0.0 && cfg.test_fraction < 1.0)) {
    throw ConfigError("test fraction must be in [0, 1)");
  }
  if (cfg.source == DataSource::Idx) {
    if (cfg.model == ModelKind::LinearRegression) {
      throw ConfigError("IDX data needs a classifier model");
    }
    for (const auto* path : {&cfg.idx_images, &cfg.idx_labels}) {
      if (path->empty() || !std::ifstream(*path)) {
        throw ConfigError("IDX file '" + *path + "' not found");
      }
    }
  } else {
    if (cfg.samples == 0 || cfg.features == 0) {
      throw ConfigError("synthetic data needs samples and features >= 1");
    }
    if (cfg.model != ModelKind::LinearRegression && cfg.classes < 2) {
      throw ConfigError("classification needs at least 2 classes");
    }
  }
  if (cfg.model == ModelKind::LinearRegression &&
      cfg.partition == PartitionKind::EqNiid) {
    throw ConfigError("EqNIID partitioning needs class labels");
  }
  if (cfg.model == ModelKind::Mlp && cfg.hidden.empty()) {
    throw ConfigError("an MLP needs at least one hidden layer");
  }
}

SimulationInputs prepare(const ExperimentConfig& cfg) {
  check_config(cfg);
  SimulationInputs in;
  auto spec = std::make_shared<HolarchySpec>(
      cfg.preset.empty() ? load_holarchy(cfg.config_path)
                         : build_preset(cfg.preset));
  auto violations = validate(*spec);
  if (!violations.empty()) {
    throw ConfigError("invalid holarchy: " + violations.front().message);
  }
  in.spec = spec;

  Dataset pool;
  if (cfg.source == DataSource::Idx) {
    pool = load_idx(cfg.idx_images, cfg.idx_labels);
  } else {
    std::mt19937_64 rng(derive_seed(cfg.seed, kDataStream, 0));
    if (cfg.model == ModelKind::LinearRegression) {
      pool = synthetic_regression(cfg.samples, cfg.features, cfg.noise, rng)
                 .data;
    } else {
      pool = synthetic_classification(cfg.samples, cfg.features, cfg.classes,
                                      cfg.separation, 1.0, rng)
                 .data;
    }
  }

  switch (cfg.model) {
    case ModelKind::LinearRegression:
      in.model = ModelSpec::linear(pool.input_dim());
      break;
    case ModelKind::LogisticRegression:
      in.model = ModelSpec::logistic(pool.input_dim(), pool.num_classes());
      break;
    case ModelKind::Mlp: {
      std::vector<std::size_t> layers{pool.input_dim()};
      layers.insert(layers.end(), cfg.hidden.begin(), cfg.hidden.end());
      layers.push_back(pool.num_classes());
      in.model = ModelSpec::mlp(layers, cfg.activation);
      break;
    }
  }

  Dataset train = pool;
  if (in.model.classifier() && cfg.test_fraction > 0.0) {
    const auto test_count = static_cast<std::size_t>(
        std::llround(cfg.test_fraction * static_cast<double>(pool.size())));
    std::mt19937_64 rng(derive_seed(cfg.seed, kSplitStream, 0));
    auto [tr, te] = train_test_split(pool, test_count, rng);
    train = std::move(tr);
    in.test_set = std::move(te);
  }

  std::vector<std::string> refs;
  for (const auto& h : spec->declaration_order()) {
    const auto& rec = spec->record(h);
    if (rec.terminal() && rec.dataset_ref &&
        std::find(refs.begin(), refs.end(), *rec.dataset_ref) == refs.end()) {
      refs.push_back(*rec.dataset_ref);
    }
  }
  PartitionScheme scheme = IidScheme{};
  if (cfg.partition == PartitionKind::EqNiid) scheme = cfg.eqniid;
  if (cfg.partition == PartitionKind::UeqNiid) scheme = UeqNiidScheme{};
  std::mt19937_64 prng(derive_seed(cfg.seed, kPartitionStream, 0));
  auto shards = partition(train, scheme, refs.size(), prng);
  for (std::size_t i = 0; i < refs.size(); ++i) {
    in.shards.emplace(refs[i], std::move(shards[i].data));
  }

  std::mt19937_64 irng(derive_seed(cfg.seed, kInitStream, 0));
  in.theta0 = initial_params(in.model, irng);
  in.training = cfg.training;
  in.training.seed = cfg.seed;
  in.runtime.budget = cfg.rounds;
  in.runtime.local_budget = cfg.local_budget;
  in.runtime.sync_mode = cfg.sync_mode;
  in.runtime.superior_policy = cfg.superior_policy;
  in.mode = cfg.mode;
  return in;
}

RunResult run(const ExperimentConfig& cfg) {
  auto result = simulate(prepare(cfg));
  if (!result.stats.terminated) {
    throw ProtocolError("simulation did not terminate: " +
                        result.stats.failure);
  }
  if (!cfg.out.empty()) emit_metrics(result.records, cfg.out);
  return result;
}

std::vector<RoundSummary> summarize(const std::vector<MetricsRecord>& records) {
  if (records.empty()) throw ConfigError("no records to summarize");
  std::map<std::uint64_t, RoundSummary> by_round;
  for (const auto& r : records) {
    auto& s = by_round[r.round];
    s.round = r.round;
    s.mean_train_loss += r.train_loss;
    s.mean_test_accuracy += r.test_accuracy;
    ++s.holons;
  }
  std::vector<RoundSummary> out;
  for (auto& [round, s] : by_round) {
    s.mean_train_loss /= static_cast<double>(s.holons);
    s.mean_test_accuracy /= static_cast<double>(s.holons);
    out.push_back(s);
  }
  return out;
}

std::string metrics_csv(const std::vector<MetricsRecord>& records) {
  auto sorted = records;
  std::stable_sort(sorted.begin(), sorted.end(), record_order);
  std::string out =
      "holon_level,holon_index,round,train_loss,test_accuracy,wall_time_s\n";
  for (const auto& r : sorted) {
    out += std::to_string(r.holon.level) + ',' +
           std::to_string(r.holon.index) + ',' + std::to_string(r.round) +
           ',' + format_double(r.train_loss) + ',' +
           format_double(r.test_accuracy) + ',' +
           format_double(r.wall_time_s) + '\n';
  }
  return out;
}

void emit_metrics(const std::vector<MetricsRecord>& records,
                  const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write metrics to '" + path + "'");
  out << metrics_csv(records);
  if (!out) throw ConfigError("failed writing metrics to '" + path + "'");
}

namespace {

template <typename T>
T parse_field(std::string_view text, std::size_t line, std::size_t column) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ParseError(line, column, "bad field '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

std::vector<MetricsRecord> parse_metrics_csv(const std::string& text) {
  std::istringstream in(text);
  std::string row;
  std::vector<MetricsRecord> out;
  std::size_t line = 0;
  while (std::getline(in, row)) {
    ++line;
    if (line == 1) {
      if (row != "holon_level,holon_index,round,train_loss,test_accuracy,"
                 "wall_time_s") {
        throw ParseError(1, 1, "unexpected metrics header");
      }
      continue;
    }
    if (row.empty()) continue;
    std::vector<std::string_view> fields;
    std::vector<std::size_t> columns;
    std::string_view rest(row);
    std::size_t col = 1;
    while (true) {
      auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      columns.push_back(col);
      if (comma == std::string_view::npos) break;
      col += comma + 1;
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() != 6) {
      throw ParseError(line, 1, "expected 6 fields, got " +
                                    std::to_string(fields.size()));
    }
    MetricsRecord r;
    r.holon.level = parse_field<std::uint32_t>(fields[0], line, columns[0]);
    r.holon.index = parse_field<std::uint32_t>(fields[1], line, columns[1]);
    r.round = parse_field<std::uint64_t>(fields[2], line, columns[2]);
    r.train_loss = parse_field<double>(fields[3], line, columns[3]);
    r.test_accuracy = parse_field<double>(fields[4], line, columns[4]);
    r.wall_time_s = parse_field<double>(fields[5], line, columns[5]);
    out.push_back(r);
  }
  if (line == 0) throw ParseError(1, 1, "missing metrics header");
  return out;
}

}  // namespace holon
