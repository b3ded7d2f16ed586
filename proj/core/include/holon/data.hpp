#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "holon/aggregation.hpp"

namespace holon {

/// Row-major feature matrix plus one label per row. Labels hold class
/// indices (as doubles) when num_classes > 0, real targets otherwise.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::size_t input_dim, std::vector<double> features,
          std::vector<double> labels, std::size_t num_classes = 0);

  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }
  std::size_t input_dim() const { return input_dim_; }
  std::size_t num_classes() const { return num_classes_; }
  bool classification() const { return num_classes_ > 0; }

  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(features_).subspan(i * input_dim_,
                                                      input_dim_);
  }
  double label(std::size_t i) const { return labels_[i]; }
  std::size_t class_of(std::size_t i) const {
    return static_cast<std::size_t>(labels_[i]);
  }

  const std::vector<double>& features() const { return features_; }
  const std::vector<double>& labels() const { return labels_; }

  /// Rows at the given indices, in the given order.
  Dataset subset(std::span<const std::size_t> indices) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  std::size_t input_dim_ = 0;
  std::size_t num_classes_ = 0;
  std::vector<double> features_;
  std::vector<double> labels_;
};

struct IidScheme {};
struct EqNiidScheme {
  std::size_t labels_per_holon = 2;
  std::size_t samples_per_holon = 500;
};
struct UeqNiidScheme {
  // Shard sizes; empty means linearly increasing sizes 1:2:...:n scaled to
  // the whole dataset.
  std::vector<std::size_t> sizes;
};
using PartitionScheme = std::variant<IidScheme, EqNiidScheme, UeqNiidScheme>;

/// A partition shard keeps the source row indices so disjointness can be
/// checked against the source.
struct Shard {
  std::vector<std::size_t> indices;
  Dataset data;
};

/// Splits data into n_holons disjoint shards. Throws DataError when the
/// source cannot satisfy the scheme.
std::vector<Shard> partition(const Dataset& data, const PartitionScheme& scheme,
                             std::size_t n_holons, std::mt19937_64& rng);

/// 1:2:...:n size profile summing to total (remainder to the last shards).
std::vector<std::size_t> linear_size_profile(std::size_t total,
                                             std::size_t n_holons);

struct RegressionData {
  Dataset data;
  // Weights (row-major, output 1) then bias, as laid out by the learner.
  ParamVector truth;
};

struct ClassificationData {
  Dataset data;
  // num_classes x dim, row-major.
  std::vector<double> centers;
};

/// y = w*.x + b* + noise, x ~ N(0, I).
RegressionData synthetic_regression(std::size_t n, std::size_t dim,
                                    double noise_stddev, std::mt19937_64& rng);

/// Gaussian blobs: class c is centered at centers[c] with unit-scaled
/// spread. Labels cycle through the classes so class counts differ by at
/// most one.
ClassificationData synthetic_classification(std::size_t n, std::size_t dim,
                                            std::size_t num_classes,
                                            double separation, double spread,
                                            std::mt19937_64& rng);

/// Loads an IDX image file (magic 0x00000803) and label file (0x00000801).
/// Pixels are scaled to [0, 1]. The dataset has 10 classes, or more if a
/// label of 10 or above appears.
Dataset load_idx(const std::string& images_path,
                 const std::string& labels_path);

/// In-memory variant of load_idx.
Dataset parse_idx(std::span<const std::uint8_t> images,
                  std::span<const std::uint8_t> labels);

/// Splits off the last `test_count` rows after a seeded shuffle.
std::pair<Dataset, Dataset> train_test_split(const Dataset& data,
                                             std::size_t test_count,
                                             std::mt19937_64& rng);

}  // namespace holon
