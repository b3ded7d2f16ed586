#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "holon/aggregation.hpp"
#include "holon/data.hpp"

namespace holon {

enum class ModelKind { LinearRegression, LogisticRegression, Mlp };
enum class Activation { Relu, Tanh };

/// The model every holon shares. Parameters are flattened layer by layer,
/// each layer as a row-major (out x in) weight matrix followed by its bias.
struct ModelSpec {
  ModelKind kind = ModelKind::LogisticRegression;
  std::size_t input_dim = 1;
  std::size_t output_dim = 1;
  std::vector<std::size_t> hidden;  // MLP only
  Activation activation = Activation::Relu;

  static ModelSpec linear(std::size_t input_dim);
  static ModelSpec logistic(std::size_t input_dim, std::size_t classes);
  static ModelSpec mlp(std::vector<std::size_t> layer_sizes,
                       Activation act = Activation::Relu);

  bool classifier() const { return kind != ModelKind::LinearRegression; }
  /// [input, hidden..., output].
  std::vector<std::size_t> layer_sizes() const;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

std::string to_string(ModelKind kind);

struct TrainingConfig {
  std::size_t batch_size = 32;
  double learning_rate = 0.01;
  std::size_t epochs_per_round = 5;
  std::uint64_t seed = 0;
};

/// Throws ConfigError if the spec is malformed.
void check_model(const ModelSpec& spec);

std::size_t param_count(const ModelSpec& spec);

/// Mean per-sample loss: squared error for linear regression, softmax
/// cross-entropy for classifiers.
double loss(const ModelSpec& spec, const ParamVector& theta,
            const Dataset& data);

/// Mean gradient of loss over the whole dataset.
ParamVector gradient(const ModelSpec& spec, const ParamVector& theta,
                     const Dataset& data);

/// Mean gradient over the rows listed in `batch`, summed in the given order.
ParamVector gradient(const ModelSpec& spec, const ParamVector& theta,
                     const Dataset& data, std::span<const std::size_t> batch);

/// epochs_per_round passes of mini-batch SGD with a fixed learning rate.
/// Each epoch reshuffles with rng; the last short batch is kept. Rows within
/// a batch are visited in ascending order.
ParamVector train_local(const ModelSpec& spec, ParamVector theta,
                        const Dataset& data, const TrainingConfig& cfg,
                        std::mt19937_64& rng);

/// Fraction of rows whose argmax prediction equals the label. Ties go to
/// the lowest class index.
double evaluate(const ModelSpec& spec, const ParamVector& theta,
                const Dataset& test);

/// Predicted class of one row (ties to the lowest index).
std::size_t predict_class(const ModelSpec& spec, const ParamVector& theta,
                          std::span<const double> row);

/// Common initial parameters: zeros for linear/logistic models, scaled
/// uniform weights and zero biases for MLPs.
ParamVector initial_params(const ModelSpec& spec, std::mt19937_64& rng);

/// Independent stream seed for (base seed, stream id, round).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream,
                          std::uint64_t round);

}  // namespace holon
