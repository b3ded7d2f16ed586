// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <string>

#include "holon/presets.hpp"
#include "holon/scheduler.hpp"
#include "holon/sim.hpp"
#include "support.hpp"

namespace holon {
namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::vector<ParamVector> collecting_aggregations(const RunResult& r,
                                                 const HolonId& id) {
  std::vector<ParamVector> out;
  for (const auto& e : testing::events_of(r, id, EventKind::Aggregated)) {
    if (e.phase == Phase::Collecting) out.push_back(e.theta);
  }
  return out;
}

const ModelSpec kBlobModel = ModelSpec::logistic(2, 2);
const TrainingConfig kBlobTraining{.batch_size = 20, .learning_rate = 0.1,
                                   .epochs_per_round = 2};

Outcome fedavg_equivalence() {
  Outcome o;
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    auto shards = testing::blob_shards(4, 200, 2, 2, seed);
    auto cfg = kBlobTraining;
    cfg.seed = seed;
    ParamVector theta0(param_count(kBlobModel));
    auto oracle = fedavg_oracle(kBlobModel, shards, theta0, cfg, 5);
    auto result = simulate(
        testing::inputs_for(build_fedavg(4), kBlobModel, shards, theta0, cfg, 5));
    o.require(result.stats.terminated, "run did not terminate");
    auto globals = collecting_aggregations(result, {0, 1});
    o.require(globals.size() == 5, "expected 5 global aggregations");
    for (std::size_t r = 0; r < std::min<std::size_t>(globals.size(), 5); ++r) {
      worst = std::max(worst, max_abs_diff(globals[r], oracle.globals[r + 1]));
    }
  }
  const double elapsed = seconds_since(t0);
  o.require(worst <= 1e-9, "max diff " + fmt(worst));
  o.require(elapsed < 10.0, "took " + fmt(elapsed) + " s");
  if (o.pass) o.detail = "max diff " + fmt(worst) + ", " + fmt(elapsed) + " s";
  return o;
}

Outcome hfl_equivalence() {
  Outcome o;
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (std::uint64_t seed : {1, 2, 3}) {
    auto shards = testing::blob_shards(6, 120, 2, 2, seed);
    auto cfg = kBlobTraining;
    cfg.seed = seed;
    ParamVector theta0(param_count(kBlobModel));
    auto oracle = hfl_oracle(kBlobModel, 2, 3, shards, theta0, cfg, 6, 2);
    auto in = testing::inputs_for(build_hfl(2, 3), kBlobModel, shards, theta0,
                                  cfg, 6);
    in.runtime.local_budget = 2;
    auto result = simulate(in);
    o.require(result.stats.terminated, "run did not terminate");
    for (std::uint32_t e = 0; e < 2; ++e) {
      auto edges = collecting_aggregations(result, {1, e + 1});
      o.require(edges.size() == 6, "expected 6 edge aggregations");
      for (std::size_t r = 0; r < std::min<std::size_t>(edges.size(), 6); ++r) {
        worst = std::max(worst, max_abs_diff(edges[r], oracle.edges[r][e]));
      }
    }
    auto cloud = collecting_aggregations(result, {0, 1});
    o.require(cloud.size() == oracle.cloud.size(), "cloud count differs");
    for (std::size_t c = 0; c < std::min(cloud.size(), oracle.cloud.size()); ++c) {
      worst = std::max(worst, max_abs_diff(cloud[c], oracle.cloud[c]));
    }
  }
  const double elapsed = seconds_since(t0);
  o.require(worst <= 1e-9, "max diff " + fmt(worst));
  o.require(elapsed < 10.0, "took " + fmt(elapsed) + " s");
  if (o.pass) o.detail = "max diff " + fmt(worst) + ", " + fmt(elapsed) + " s";
  return o;
}

Outcome gossip_equivalence() {
  Outcome o;
  double worst = 0.0;
  for (std::uint64_t seed : {1, 2, 3}) {
    auto shards = testing::blob_shards(4, 100, 2, 2, seed);
    auto cfg = kBlobTraining;
    cfg.seed = seed;
    ParamVector theta0(param_count(kBlobModel));
    auto oracle = gossip_oracle(kBlobModel, ring_edges(4), shards,
                                std::vector<ParamVector>(4, theta0), cfg, 4);
    auto result = simulate(testing::inputs_for(
        build_p2p(4, ring_edges(4)), kBlobModel, shards, theta0, cfg, 4));
    o.require(result.stats.terminated, "run did not terminate");
    for (std::uint32_t i = 0; i < 4; ++i) {
      auto agg = testing::events_of(result, {1, i + 1}, EventKind::Aggregated);
      auto trained = testing::events_of(result, {1, i + 1}, EventKind::Trained);
      o.require(agg.size() == 4 && trained.size() == 4, "event count");
      if (agg.size() != 4 || trained.size() != 4) continue;
      for (std::size_t r = 1; r <= 4; ++r) {
        worst = std::max(worst, max_abs_diff(trained[r - 1].theta,
                                             oracle.trained[r - 1][i]));
        if (r >= 2) {
          worst = std::max(worst, max_abs_diff(agg[r - 1].theta,
                                               oracle.mixed[r - 2][i]));
        }
      }
    }
  }
  o.require(worst <= 1e-9, "ring max diff " + fmt(worst));

  // Consensus on K4 without learning: distinct starting models, equal sizes.
  std::mt19937_64 rng(42);
  std::vector<ParamVector> init;
  for (int i = 0; i < 4; ++i) init.push_back(testing::random_params(6, rng));
  auto shards = testing::blob_shards(4, 50, 2, 2, 9);
  auto frozen = kBlobTraining;
  frozen.learning_rate = 0.0;
  auto trace = gossip_oracle(kBlobModel, complete_edges(4), shards, init, frozen, 1);
  double spread = 0.0;
  for (const auto& a : trace.mixed[0]) {
    for (const auto& b : trace.mixed[0]) spread = std::max(spread, max_abs_diff(a, b));
  }

  // The same through the runtime: each terminal's first local step yields
  // its own starting model, later steps leave the model alone.
  auto spec = std::make_shared<const HolarchySpec>(build_p2p(4, complete_edges(4)));
  RuntimeOptions opts;
  opts.budget = 2;
  std::vector<HolonRuntime> holons;
  std::vector<RuntimeEvent> events;
  std::size_t t = 0;
  for (const auto& id : spec->declaration_order()) {
    if (spec->record(id).terminal()) {
      const auto start = init[t++];
      holons.emplace_back(spec, id, opts, ParamVector(6), 1.0,
                          [start](const ParamVector& theta, std::uint64_t round) {
                            return round == 1 ? start : theta;
                          });
    } else {
      holons.emplace_back(spec, id, opts, ParamVector(6), 4.0);
    }
    holons.back().set_observer([&events](const RuntimeEvent& e) { events.push_back(e); });
  }
  auto stats = run_deterministic(holons);
  o.require(stats.terminated, "K4 run did not terminate");
  std::vector<ParamVector> mixed;
  for (const auto& e : events) {
    if (e.kind == EventKind::Aggregated && e.round == 2 &&
        spec->record(e.holon).terminal()) {
      mixed.push_back(e.theta);
    }
  }
  o.require(mixed.size() == 4, "K4 mixing events missing");
  for (const auto& a : mixed) {
    for (const auto& b : mixed) spread = std::max(spread, max_abs_diff(a, b));
  }
  o.require(spread <= 1e-12, "consensus spread " + fmt(spread));
  if (o.pass) {
    o.detail = "ring max diff " + fmt(worst) + ", K4 spread " + fmt(spread);
  }
  return o;
}

// Sequential weighted mean in long double, the reference for Eq. 12.
std::vector<long double> reference_mean(const AssembledContribution& ac) {
  std::vector<long double> out(ac.dim(), 0.0L);
  long double total = 0.0L;
  for (std::size_t j = 0; j < ac.columns(); ++j) {
    total += ac.weights()[j];
    for (std::size_t k = 0; k < ac.dim(); ++k) {
      out[k] += static_cast<long double>(ac.weights()[j]) * ac.column(j)[k];
    }
  }
  for (auto& v : out) v /= total;
  return out;
}

double relative_gap(const ParamVector& a, const ParamVector& b) {
  return testing::relative_error(a, b, 1e-300);
}

Outcome aggregation_properties() {
  Outcome o;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> weight(0.01, 1000.0);
  std::normal_distribution<double> value(0.0, 5.0);
  double worst_scale = 0.0, worst_perm = 0.0, worst_ref = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t dim = 1 + rng() % 12;
    const std::size_t cols = 1 + rng() % 9;
    std::vector<double> theta(dim * cols), w(cols);
    for (auto& v : theta) v = value(rng);
    for (auto& v : w) v = weight(rng);
    const auto avg = weighted_average(AssembledContribution(dim, theta, w));

    for (std::size_t k = 0; k < dim; ++k) {
      double lo = INFINITY, hi = -INFINITY;
      for (std::size_t j = 0; j < cols; ++j) {
        lo = std::min(lo, theta[j * dim + k]);
        hi = std::max(hi, theta[j * dim + k]);
      }
      const double slack = 1e-12 * std::max(std::abs(lo), std::abs(hi));
      o.require(avg[k] >= lo - slack && avg[k] <= hi + slack,
                "convexity broken in trial " + std::to_string(trial));
    }

    const double c = std::exp(std::uniform_real_distribution<double>(-10, 10)(rng));
    auto scaled_w = w;
    for (auto& v : scaled_w) v *= c;
    worst_scale = std::max(
        worst_scale,
        relative_gap(avg, weighted_average(AssembledContribution(dim, theta, scaled_w))));

    std::vector<std::size_t> perm(cols);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> ptheta(dim * cols), pw(cols);
    for (std::size_t j = 0; j < cols; ++j) {
      pw[j] = w[perm[j]];
      std::copy_n(theta.begin() + perm[j] * dim, dim, ptheta.begin() + j * dim);
    }
    worst_perm = std::max(
        worst_perm,
        relative_gap(avg, weighted_average(AssembledContribution(dim, ptheta, pw))));

    auto ref = reference_mean(AssembledContribution(dim, theta, w));
    ParamVector refd(dim);
    for (std::size_t k = 0; k < dim; ++k) refd[k] = static_cast<double>(ref[k]);
    worst_ref = std::max(worst_ref, relative_gap(avg, refd));
  }
  o.require(worst_scale <= 1e-12, "scale gap " + fmt(worst_scale));
  o.require(worst_perm <= 1e-12, "permutation gap " + fmt(worst_perm));
  o.require(worst_ref <= 1e-12, "reference gap " + fmt(worst_ref));
  if (o.pass) {
    o.detail = "scale " + fmt(worst_scale) + ", permutation " + fmt(worst_perm);
  }
  return o;
}

Outcome gradient_checks() {
  Outcome o;
  std::mt19937_64 rng(77);
  double worst = 0.0;
  for (const auto& model :
       {ModelSpec::linear(5), ModelSpec::logistic(5, 4),
        ModelSpec::mlp({5, 8, 4}, Activation::Relu),
        ModelSpec::mlp({5, 6, 6, 4}, Activation::Tanh)}) {
    for (int draw = 0; draw < 100; ++draw) {
      auto data = testing::random_batch(model, 1 + rng() % 16, rng);
      auto theta = testing::random_params(param_count(model), rng, 0.5);
      const double err = testing::relative_error(
          gradient(model, theta, data), testing::fd_gradient(model, theta, data));
      worst = std::max(worst, err);
    }
  }
  o.require(worst <= 1e-5, "worst relative error " + fmt(worst));
  if (o.pass) o.detail = "worst relative error " + fmt(worst);
  return o;
}

Dataset pooled(const std::map<std::string, Dataset>& shards) {
  std::vector<double> x, y;
  std::size_t dim = 0;
  for (const auto& [ref, d] : shards) {
    dim = d.input_dim();
    x.insert(x.end(), d.features().begin(), d.features().end());
    y.insert(y.end(), d.labels().begin(), d.labels().end());
  }
  return Dataset(dim, std::move(x), std::move(y));
}

Outcome convex_convergence() {
  Outcome o;
  const auto t0 = Clock::now();
  ExperimentConfig cfg;
  cfg.preset = "hoal2l";
  cfg.model = ModelKind::LinearRegression;
  cfg.samples = 2000;
  cfg.features = 8;
  cfg.noise = 0.0;
  cfg.rounds = 100;
  cfg.training = {.batch_size = 32, .learning_rate = 0.05, .epochs_per_round = 1};
  cfg.seed = 3;
  auto in = prepare(cfg);
  auto result = simulate(in);
  o.require(result.stats.terminated, "run did not terminate");
  auto summary = summarize(result.records);
  const double final_loss = summary.back().mean_train_loss;
  o.require(summary.back().round == 100, "last round missing");
  o.require(final_loss < 1e-4, "final mean loss " + fmt(final_loss));

  const auto solution = testing::normal_equations(pooled(in.shards));
  const double gap = max_abs_diff(result.final_models.at(in.spec->root()), solution);
  o.require(gap <= 1e-3, "root model gap " + fmt(gap));
  const double elapsed = seconds_since(t0);
  o.require(elapsed < 60.0, "took " + fmt(elapsed) + " s");
  if (o.pass) {
    o.detail = "loss " + fmt(final_loss) + ", gap " + fmt(gap) + ", " +
               fmt(elapsed) + " s";
  }
  return o;
}

Outcome digits_trend() {
  Outcome o;
  const auto t0 = Clock::now();
  const std::string dir = std::string(HOLON_SOURCE_DIR) + "/data/digits/";
  std::map<std::string, double> mean_acc;
  for (const auto* preset : {"hoal1p", "hoal2l", "hoal3l", "hoal4l"}) {
    double sum = 0.0;
    for (std::uint64_t seed : {0, 1, 2}) {
      ExperimentConfig cfg;
      cfg.preset = preset;
      cfg.source = DataSource::Idx;
      cfg.idx_images = dir + "digits-images-idx3-ubyte";
      cfg.idx_labels = dir + "digits-labels-idx1-ubyte";
      cfg.model = ModelKind::LogisticRegression;
      cfg.rounds = 50;
      cfg.training = {.batch_size = 16, .learning_rate = 0.1, .epochs_per_round = 1};
      cfg.seed = seed;
      auto summary = summarize(run(cfg).records);
      sum += summary.back().mean_test_accuracy;
    }
    mean_acc[preset] = sum / 3.0;
  }
  const double base = mean_acc["hoal1p"];
  for (const auto* preset : {"hoal2l", "hoal3l", "hoal4l"}) {
    o.require(mean_acc[preset] >= base - 0.02,
              std::string(preset) + " " + fmt(mean_acc[preset]) + " vs 1P " +
                  fmt(base));
  }
  const double elapsed = seconds_since(t0);
  o.require(elapsed < 600.0, "took " + fmt(elapsed) + " s");
  if (o.pass) {
    o.detail = "1P " + fmt(base) + ", 2L " + fmt(mean_acc["hoal2l"]) + ", 3L " +
               fmt(mean_acc["hoal3l"]) + ", 4L " + fmt(mean_acc["hoal4l"]) +
               ", " + fmt(elapsed) + " s";
  }
  return o;
}

bool pairwise_disjoint(const std::vector<Shard>& shards) {
  std::set<std::size_t> seen;
  std::size_t total = 0;
  for (const auto& s : shards) {
    seen.insert(s.indices.begin(), s.indices.end());
    total += s.indices.size();
  }
  return seen.size() == total;
}

Outcome partition_contracts() {
  Outcome o;
  std::mt19937_64 data_rng(5);
  auto pool = synthetic_classification(6000, 4, 10, 3.0, 1.0, data_rng).data;
  for (std::uint64_t seed : {1, 2, 3}) {
    std::mt19937_64 rng(seed);
    auto eq = partition(pool, EqNiidScheme{2, 500}, 10, rng);
    o.require(eq.size() == 10, "EqNIID shard count");
    for (const auto& s : eq) {
      std::set<std::size_t> labels;
      for (std::size_t i = 0; i < s.data.size(); ++i) labels.insert(s.data.class_of(i));
      o.require(labels.size() == 2, "EqNIID labels per shard");
      o.require(s.data.size() == 500, "EqNIID samples per shard");
      for (std::size_t i = 0; i < s.indices.size(); ++i) {
        o.require(pool.label(s.indices[i]) == s.data.label(i), "shard rows");
      }
    }
    o.require(pairwise_disjoint(eq), "EqNIID shards overlap");

    auto ueq = partition(pool, UeqNiidScheme{}, 10, rng);
    const auto profile = linear_size_profile(pool.size(), 10);
    for (std::size_t i = 0; i < ueq.size(); ++i) {
      o.require(ueq[i].data.size() == profile[i], "UEqNIID size off profile");
    }
    o.require(pairwise_disjoint(ueq), "UEqNIID shards overlap");

    auto iid = partition(pool, IidScheme{}, 10, rng);
    o.require(pairwise_disjoint(iid), "IID shards overlap");
  }
  if (o.pass) o.detail = "EqNIID(2, 500) x 10, UEqNIID and IID over 3 seeds";
  return o;
}

ExperimentConfig small_run(const std::string& preset) {
  ExperimentConfig cfg;
  cfg.preset = preset;
  cfg.samples = 1000;
  cfg.features = 4;
  cfg.classes = 4;
  cfg.rounds = 8;
  cfg.training = {.batch_size = 16, .learning_rate = 0.1, .epochs_per_round = 1};
  cfg.seed = 17;
  return cfg;
}

Outcome determinism() {
  Outcome o;
  for (const auto& preset : canonical_preset_names()) {
    auto cfg = small_run(preset);
    const auto a = metrics_csv(run(cfg).records);
    const auto b = metrics_csv(run(cfg).records);
    o.require(a == b, preset + " CSVs differ");
  }
  if (o.pass) o.detail = std::to_string(canonical_preset_names().size()) + " presets";
  return o;
}

Outcome protocol_safety() {
  Outcome o;
  std::uint64_t messages = 0;
  for (const auto& preset : canonical_preset_names()) {
    for (auto mode : {ExecutionMode::Deterministic, ExecutionMode::Concurrent}) {
      auto in = prepare(small_run(preset));
      in.mode = mode;
      in.deterministic.max_events = 1'000'000;
      in.concurrent.idle_timeout = std::chrono::seconds(30);
      const auto stats = simulate(in).stats;
      const auto tag = preset + " " + to_string(mode);
      o.require(stats.terminated, tag + ": " + stats.failure);
      o.require(stats.emitted_after_stop == 0, tag + ": emission after stop");
      o.require(stats.delivered == stats.emitted, tag + ": delivered != emitted");
      messages += stats.emitted;
    }
  }
  if (o.pass) o.detail = std::to_string(messages) + " messages, all delivered";
  return o;
}

}  // namespace
}  // namespace holon

int main() {
  using holon::Outcome;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 fedavg equivalence", holon::fedavg_equivalence},
      {"2 hfl equivalence", holon::hfl_equivalence},
      {"3 gossip equivalence and consensus", holon::gossip_equivalence},
      {"4 aggregation properties", holon::aggregation_properties},
      {"5 gradient checks", holon::gradient_checks},
      {"6 convex convergence", holon::convex_convergence},
      {"7 digits multi-level trend", holon::digits_trend},
      {"8 partition contracts", holon::partition_contracts},
      {"9 deterministic csv", holon::determinism},
      {"10 protocol safety", holon::protocol_safety},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failures += !o.pass;
    std::printf("%s %s (%s)\n", o.pass ? "PASS" : "FAIL", name.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
