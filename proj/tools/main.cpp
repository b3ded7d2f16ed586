// holon: run holarchy simulations and inspect topology configs.

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <string>

#include "holon/error.hpp"
#include "holon/presets.hpp"
#include "holon/sim.hpp"

namespace {

const std::map<std::string, holon::ModelKind> kModels{
    {"linear", holon::ModelKind::LinearRegression},
    {"logistic", holon::ModelKind::LogisticRegression},
    {"mlp", holon::ModelKind::Mlp}};

const std::map<std::string, holon::PartitionKind> kPartitions{
    {"iid", holon::PartitionKind::Iid},
    {"eqniid", holon::PartitionKind::EqNiid},
    {"ueqniid", holon::PartitionKind::UeqNiid}};

const std::map<std::string, holon::ExecutionMode> kModes{
    {"det", holon::ExecutionMode::Deterministic},
    {"conc", holon::ExecutionMode::Concurrent}};

const std::map<std::string, holon::Activation> kActivations{
    {"relu", holon::Activation::Relu}, {"tanh", holon::Activation::Tanh}};

const std::map<std::string, holon::SuperiorPolicy> kPolicies{
    {"replace", holon::SuperiorPolicy::Replace},
    {"weighted", holon::SuperiorPolicy::Weighted}};

void print_summary(const holon::RunResult& result, std::ostream& os) {
  const auto summary = holon::summarize(result.records);
  const auto& last = summary.back();
  os << "rounds: " << summary.size() << ", records: " << result.records.size()
     << "\nfinal mean train loss: " << last.mean_train_loss
     << "\nfinal mean test accuracy: " << last.mean_test_accuracy
     << "\nmessages emitted: " << result.stats.emitted
     << ", delivered: " << result.stats.delivered << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Holarchy learning simulator"};
  app.require_subcommand(1);

  holon::ExperimentConfig cfg;
  std::string model = "logistic";
  std::string partition = "iid";
  std::string mode = "det";
  std::string activation = "relu";
  std::string policy = "replace";
  bool no_sync = false;
  bool quiet = false;

  auto* run = app.add_subcommand("run", "Run a simulation and write metrics");
  auto* source = run->add_option_group("topology");
  source->add_option("--preset", cfg.preset,
                     "fedavg:<n>, p2p-ring:<n>, p2p-complete:<n>, "
                     "hfl:<m>x<k>, hoal1p, hoal2l, hoal3l, hoal4l");
  source->add_option("--config", cfg.config_path, "Holarchy config file");
  source->require_option(1);
  run->add_option("--model", model, "linear, logistic or mlp")
      ->check(CLI::IsMember(kModels));
  run->add_option("--hidden", cfg.hidden, "MLP hidden layer sizes");
  run->add_option("--activation", activation, "MLP activation: relu or tanh")
      ->check(CLI::IsMember(kActivations));
  run->add_option("--partition", partition, "iid, eqniid or ueqniid")
      ->check(CLI::IsMember(kPartitions));
  run->add_option("--labels-per-holon", cfg.eqniid.labels_per_holon,
                  "EqNIID labels per shard");
  run->add_option("--samples-per-holon", cfg.eqniid.samples_per_holon,
                  "EqNIID samples per shard");
  run->add_option("--rounds", cfg.rounds, "Terminal round budget");
  run->add_option("--local-budget", cfg.local_budget,
                  "Aggregations a head runs before reporting upward");
  run->add_option("--epochs", cfg.training.epochs_per_round,
                  "Local epochs per round");
  run->add_option("--batch", cfg.training.batch_size, "Mini-batch size");
  run->add_option("--lr", cfg.training.learning_rate, "Learning rate");
  run->add_option("--seed", cfg.seed, "Base seed");
  run->add_option("--mode", mode, "det or conc")->check(CLI::IsMember(kModes));
  run->add_option("--policy", policy,
                  "How a superior's model enters aggregation: replace or "
                  "weighted")
      ->check(CLI::IsMember(kPolicies));
  run->add_flag("--no-sync", no_sync,
                "Do not forward superior models to neighbors");
  run->add_option("--samples", cfg.samples, "Synthetic sample count");
  run->add_option("--features", cfg.features, "Synthetic feature count");
  run->add_option("--classes", cfg.classes, "Synthetic class count");
  run->add_option("--noise", cfg.noise, "Regression label noise stddev");
  run->add_option("--test-fraction", cfg.test_fraction,
                  "Held-out share for the common test set");
  auto* images = run->add_option("--idx-images", cfg.idx_images,
                                 "IDX image file (replaces synthetic data)");
  run->add_option("--idx-labels", cfg.idx_labels, "IDX label file")
      ->needs(images);
  images->needs(run->get_option("--idx-labels"));
  run->add_option("--out", cfg.out, "Metrics CSV path");
  run->add_flag("-q,--quiet", quiet, "Print nothing on success");

  std::string preset_name;
  auto* preset = app.add_subcommand("preset", "Print a preset's config text");
  preset->add_option("name", preset_name)->required();

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "Check a holarchy config");
  validate->add_option("file", validate_path)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      cfg.model = kModels.at(model);
      cfg.partition = kPartitions.at(partition);
      cfg.mode = kModes.at(mode);
      cfg.activation = kActivations.at(activation);
      cfg.superior_policy = kPolicies.at(policy);
      cfg.sync_mode = !no_sync;
      if (!cfg.idx_images.empty()) cfg.source = holon::DataSource::Idx;
      const auto result = holon::run(cfg);
      if (!quiet) print_summary(result, std::cout);
    } else if (*preset) {
      std::cout << holon::to_config_text(holon::build_preset(preset_name));
    } else if (*validate) {
      const auto spec = holon::load_holarchy(validate_path);
      const auto violations = holon::validate(spec);
      for (const auto& v : violations) std::cerr << v.message << '\n';
      if (!violations.empty()) return 1;
      std::cout << validate_path << ": " << spec.size() << " holons, "
                << spec.terminals().size() << " terminals, depth "
                << spec.depth() << '\n';
    }
  } catch (const holon::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
