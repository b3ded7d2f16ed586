#include "holon/learner.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "holon/error.hpp"

namespace holon {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;

ModelSpec ModelSpec::linear(std::size_t input_dim) {
  return {ModelKind::LinearRegression, input_dim, 1, {}, Activation::Relu};
}

ModelSpec ModelSpec::logistic(std::size_t input_dim, std::size_t classes) {
  return {ModelKind::LogisticRegression, input_dim, classes, {},
          Activation::Relu};
}

ModelSpec ModelSpec::mlp(std::vector<std::size_t> layer_sizes,
                         Activation act) {
  if (layer_sizes.size() < 2) {
    throw ConfigError("an MLP needs at least input and output sizes");
  }
  ModelSpec spec;
  spec.kind = ModelKind::Mlp;
  spec.input_dim = layer_sizes.front();
  spec.output_dim = layer_sizes.back();
  spec.hidden.assign(layer_sizes.begin() + 1, layer_sizes.end() - 1);
  spec.activation = act;
  return spec;
}

std::vector<std::size_t> ModelSpec::layer_sizes() const {
  std::vector<std::size_t> sizes{input_dim};
  if (kind == ModelKind::Mlp) {
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  }
  sizes.push_back(output_dim);
  return sizes;
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::LinearRegression:
      return "linear";
    case ModelKind::LogisticRegression:
      return "logistic";
    case ModelKind::Mlp:
      return "mlp";
  }
  return "unknown";
}

void check_model(const ModelSpec& spec) {
  if (spec.input_dim == 0) throw ConfigError("model input_dim must be >= 1");
  switch (spec.kind) {
    case ModelKind::LinearRegression:
      if (spec.output_dim != 1) {
        throw ConfigError("linear regression has a single output");
      }
      break;
    case ModelKind::LogisticRegression:
    case ModelKind::Mlp:
      if (spec.output_dim < 2) {
        throw ConfigError("a classifier needs at least 2 classes");
      }
      break;
  }
  for (auto h : spec.hidden) {
    if (h == 0) throw ConfigError("hidden layer of width 0");
  }
}

std::size_t param_count(const ModelSpec& spec) {
  auto sizes = spec.layer_sizes();
  std::size_t total = 0;
  for (std::size_t l = 1; l < sizes.size(); ++l) {
    total += sizes[l] * sizes[l - 1] + sizes[l];
  }
  return total;
}

namespace {

// Forward/backward over the flat parameter layout.
class Network {
 public:
  explicit Network(const ModelSpec& spec)
      : spec_(spec), sizes_(spec.layer_sizes()) {
    std::size_t off = 0;
    for (std::size_t l = 1; l < sizes_.size(); ++l) {
      weight_off_.push_back(off);
      off += sizes_[l] * sizes_[l - 1];
      bias_off_.push_back(off);
      off += sizes_[l];
    }
    pre_.resize(sizes_.size());
    act_.resize(sizes_.size());
  }

  std::size_t layers() const { return sizes_.size() - 1; }

  // Returns the output pre-activations (logits or the regression output).
  const Eigen::VectorXd& forward(const double* theta,
                                 std::span<const double> x) {
    act_[0] = ConstVectorMap(x.data(), static_cast<Eigen::Index>(x.size()));
    for (std::size_t l = 1; l <= layers(); ++l) {
      pre_[l] = weight(theta, l) * act_[l - 1] + bias(theta, l);
      if (l < layers()) {
        act_[l] = activate(pre_[l]);
      } else {
        act_[l] = pre_[l];
      }
    }
    return pre_[layers()];
  }

  // Loss of the last forward pass; fills dout with dloss/doutput.
  double output_loss(double label, Eigen::VectorXd* dout) const {
    const auto& z = pre_[layers()];
    if (!spec_.classifier()) {
      const double r = z[0] - label;
      if (dout) *dout = Eigen::VectorXd::Constant(1, 2.0 * r);
      return r * r;
    }
    const auto y = static_cast<Eigen::Index>(label);
    const double m = z.maxCoeff();
    Eigen::VectorXd e = (z.array() - m).exp();
    const double sum = e.sum();
    if (dout) {
      *dout = e / sum;
      (*dout)[y] -= 1.0;
    }
    return m + std::log(sum) - z[y];
  }

  // Accumulates the gradient of the last forward pass into grad.
  void backward(const double* theta, Eigen::VectorXd delta, double* grad) {
    for (std::size_t l = layers(); l >= 1; --l) {
      const auto rows = static_cast<Eigen::Index>(sizes_[l]);
      const auto cols = static_cast<Eigen::Index>(sizes_[l - 1]);
      MatrixMap gw(grad + weight_off_[l - 1], rows, cols);
      VectorMap gb(grad + bias_off_[l - 1], rows);
      gw.noalias() += delta * act_[l - 1].transpose();
      gb += delta;
      if (l > 1) {
        Eigen::VectorXd back = weight(theta, l).transpose() * delta;
        delta = back.cwiseProduct(activate_grad(pre_[l - 1]));
      }
    }
  }

 private:
  ConstMatrixMap weight(const double* theta, std::size_t l) const {
    return ConstMatrixMap(theta + weight_off_[l - 1],
                          static_cast<Eigen::Index>(sizes_[l]),
                          static_cast<Eigen::Index>(sizes_[l - 1]));
  }
  ConstVectorMap bias(const double* theta, std::size_t l) const {
    return ConstVectorMap(theta + bias_off_[l - 1],
                          static_cast<Eigen::Index>(sizes_[l]));
  }

  Eigen::VectorXd activate(const Eigen::VectorXd& z) const {
    if (spec_.activation == Activation::Tanh) return z.array().tanh();
    return z.cwiseMax(0.0);
  }
  Eigen::VectorXd activate_grad(const Eigen::VectorXd& z) const {
    if (spec_.activation == Activation::Tanh) {
      return 1.0 - z.array().tanh().square();
    }
    return (z.array() > 0.0).cast<double>();
  }

  const ModelSpec& spec_;
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> weight_off_;
  std::vector<std::size_t> bias_off_;
  std::vector<Eigen::VectorXd> pre_;
  std::vector<Eigen::VectorXd> act_;
};

void check_inputs(const ModelSpec& spec, const ParamVector& theta,
                  const Dataset& data) {
  const auto d = param_count(spec);
  if (theta.size() != d) {
    throw DimensionError("parameter vector has " +
                         std::to_string(theta.size()) + " entries, model has " +
                         std::to_string(d));
  }
  if (data.empty()) throw DataError("empty dataset");
  if (data.input_dim() != spec.input_dim) {
    throw DimensionError("dataset rows have width " +
                         std::to_string(data.input_dim()) +
                         ", model expects " + std::to_string(spec.input_dim));
  }
  if (spec.classifier() && data.num_classes() > spec.output_dim) {
    throw DimensionError("dataset has " + std::to_string(data.num_classes()) +
                         " classes, model outputs " +
                         std::to_string(spec.output_dim));
  }
  if (spec.classifier() && !data.classification()) {
    throw DataError("classifier given a regression dataset");
  }
}

}  // namespace

double loss(const ModelSpec& spec, const ParamVector& theta,
            const Dataset& data) {
  check_inputs(spec, theta, data);
  Network net(spec);
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    net.forward(theta.data(), data.row(i));
    total += net.output_loss(data.label(i), nullptr);
  }
  return total / static_cast<double>(data.size());
}

ParamVector gradient(const ModelSpec& spec, const ParamVector& theta,
                     const Dataset& data, std::span<const std::size_t> batch) {
  check_inputs(spec, theta, data);
  if (batch.empty()) throw DataError("empty batch");
  Network net(spec);
  ParamVector grad(theta.size(), 0.0);
  Eigen::VectorXd dout;
  for (auto i : batch) {
    if (i >= data.size()) throw DataError("batch index out of range");
    net.forward(theta.data(), data.row(i));
    net.output_loss(data.label(i), &dout);
    net.backward(theta.data(), dout, grad.data());
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (auto& g : grad) g *= inv;
  return grad;
}

ParamVector gradient(const ModelSpec& spec, const ParamVector& theta,
                     const Dataset& data) {
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return gradient(spec, theta, data, all);
}

ParamVector train_local(const ModelSpec& spec, ParamVector theta,
                        const Dataset& data, const TrainingConfig& cfg,
                        std::mt19937_64& rng) {
  check_inputs(spec, theta, data);
  if (cfg.batch_size == 0 || cfg.epochs_per_round == 0) {
    throw ConfigError("batch_size and epochs_per_round must be >= 1");
  }
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<std::size_t> batch;
  for (std::size_t epoch = 0; epoch < cfg.epochs_per_round; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      batch.assign(order.begin() + start, order.begin() + stop);
      std::sort(batch.begin(), batch.end());
      auto g = gradient(spec, theta, data, batch);
      for (std::size_t k = 0; k < theta.size(); ++k) {
        theta[k] -= cfg.learning_rate * g[k];
      }
    }
  }
  return theta;
}

std::size_t predict_class(const ModelSpec& spec, const ParamVector& theta,
                          std::span<const double> row) {
  Network net(spec);
  const auto& z = net.forward(theta.data(), row);
  std::size_t best = 0;
  for (Eigen::Index c = 1; c < z.size(); ++c) {
    if (z[c] > z[static_cast<Eigen::Index>(best)]) {
      best = static_cast<std::size_t>(c);
    }
  }
  return best;
}

double evaluate(const ModelSpec& spec, const ParamVector& theta,
                const Dataset& test) {
  if (!spec.classifier()) {
    throw ConfigError("accuracy is undefined for a regression model");
  }
  check_inputs(spec, theta, test);
  Network net(spec);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto& z = net.forward(theta.data(), test.row(i));
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < z.size(); ++c) {
      if (z[c] > z[best]) best = c;
    }
    if (static_cast<std::size_t>(best) == test.class_of(i)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

ParamVector initial_params(const ModelSpec& spec, std::mt19937_64& rng) {
  check_model(spec);
  ParamVector theta(param_count(spec), 0.0);
  if (spec.kind != ModelKind::Mlp) return theta;
  auto sizes = spec.layer_sizes();
  std::size_t off = 0;
  for (std::size_t l = 1; l < sizes.size(); ++l) {
    const double limit =
        std::sqrt(6.0 / static_cast<double>(sizes[l] + sizes[l - 1]));
    std::uniform_real_distribution<double> uni(-limit, limit);
    for (std::size_t k = 0; k < sizes[l] * sizes[l - 1]; ++k) {
      theta[off + k] = uni(rng);
    }
    off += sizes[l] * sizes[l - 1] + sizes[l];
  }
  return theta;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream,
                          std::uint64_t round) {
  // splitmix64 finalizer over a mix of the three inputs.
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(base) ^ stream) ^ round);
}

}  // namespace holon
