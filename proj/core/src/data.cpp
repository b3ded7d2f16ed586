#include "holon/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>

#include "holon/error.hpp"

namespace holon {

Dataset::Dataset(std::size_t input_dim, std::vector<double> features,
                 std::vector<double> labels, std::size_t num_classes)
    : input_dim_(input_dim),
      num_classes_(num_classes),
      features_(std::move(features)),
      labels_(std::move(labels)) {
  if (features_.size() != input_dim_ * labels_.size()) {
    throw DataError("dataset has " + std::to_string(features_.size()) +
                    " feature values for " + std::to_string(labels_.size()) +
                    " rows of width " + std::to_string(input_dim_));
  }
  if (num_classes_ > 0) {
    for (double y : labels_) {
      if (y < 0 || y >= static_cast<double>(num_classes_) ||
          y != std::floor(y)) {
        throw DataError("class label " + std::to_string(y) +
                        " outside [0, " + std::to_string(num_classes_) + ")");
      }
    }
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  std::vector<double> feats;
  std::vector<double> labs;
  feats.reserve(indices.size() * input_dim_);
  labs.reserve(indices.size());
  for (auto i : indices) {
    if (i >= size()) throw DataError("row index out of range");
    auto r = row(i);
    feats.insert(feats.end(), r.begin(), r.end());
    labs.push_back(labels_[i]);
  }
  return Dataset(input_dim_, std::move(feats), std::move(labs), num_classes_);
}

std::vector<std::size_t> linear_size_profile(std::size_t total,
                                             std::size_t n_holons) {
  if (n_holons == 0) throw DataError("size profile for zero holons");
  const std::size_t denom = n_holons * (n_holons + 1) / 2;
  std::vector<std::size_t> sizes(n_holons);
  std::size_t used = 0;
  for (std::size_t i = 0; i < n_holons; ++i) {
    sizes[i] = total * (i + 1) / denom;
    used += sizes[i];
  }
  for (std::size_t r = 0; r < total - used; ++r) {
    ++sizes[n_holons - 1 - r];
  }
  return sizes;
}

namespace {

std::vector<std::size_t> shuffled_indices(std::size_t n,
                                          std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

Shard make_shard(const Dataset& data, std::vector<std::size_t> indices) {
  Shard s;
  s.data = data.subset(indices);
  s.indices = std::move(indices);
  return s;
}

std::vector<Shard> partition_iid(const Dataset& data, std::size_t n,
                                 std::mt19937_64& rng) {
  if (data.size() < n) {
    throw DataError("IID partition needs at least " + std::to_string(n) +
                    " samples, have " + std::to_string(data.size()));
  }
  auto idx = shuffled_indices(data.size(), rng);
  std::vector<Shard> out;
  const std::size_t base = data.size() / n;
  const std::size_t extra = data.size() % n;
  std::size_t pos = 0;
  for (std::size_t h = 0; h < n; ++h) {
    std::size_t len = base + (h < extra ? 1 : 0);
    out.push_back(make_shard(
        data, std::vector<std::size_t>(idx.begin() + pos,
                                       idx.begin() + pos + len)));
    pos += len;
  }
  return out;
}

std::vector<Shard> partition_eq_niid(const Dataset& data,
                                     const EqNiidScheme& scheme, std::size_t n,
                                     std::mt19937_64& rng) {
  if (!data.classification()) {
    throw DataError("EqNIID partition needs a classification dataset");
  }
  const std::size_t classes = data.num_classes();
  const std::size_t per = scheme.labels_per_holon;
  if (per == 0 || per > classes) {
    throw DataError("EqNIID labels_per_holon must be in [1, " +
                    std::to_string(classes) + "]");
  }
  if (scheme.samples_per_holon < per) {
    throw DataError("EqNIID needs at least one sample per label");
  }
  std::vector<std::vector<std::size_t>> pools(classes);
  for (auto i : shuffled_indices(data.size(), rng)) {
    pools[data.class_of(i)].push_back(i);
  }
  std::vector<std::size_t> cursor(classes, 0);
  std::vector<Shard> out;
  for (std::size_t h = 0; h < n; ++h) {
    std::vector<std::size_t> idx;
    for (std::size_t j = 0; j < per; ++j) {
      const std::size_t label = (h * per + j) % classes;
      const std::size_t take = scheme.samples_per_holon / per +
                               (j < scheme.samples_per_holon % per ? 1 : 0);
      auto& pool = pools[label];
      if (cursor[label] + take > pool.size()) {
        throw DataError("EqNIID: class " + std::to_string(label) + " has " +
                        std::to_string(pool.size()) +
                        " samples, not enough for holon " +
                        std::to_string(h));
      }
      idx.insert(idx.end(), pool.begin() + cursor[label],
                 pool.begin() + cursor[label] + take);
      cursor[label] += take;
    }
    out.push_back(make_shard(data, std::move(idx)));
  }
  return out;
}

std::vector<Shard> partition_ueq_niid(const Dataset& data,
                                      const UeqNiidScheme& scheme,
                                      std::size_t n, std::mt19937_64& rng) {
  auto sizes =
      scheme.sizes.empty() ? linear_size_profile(data.size(), n) : scheme.sizes;
  if (sizes.size() != n) {
    throw DataError("UEqNIID profile has " + std::to_string(sizes.size()) +
                    " entries for " + std::to_string(n) + " holons");
  }
  const std::size_t needed = std::accumulate(sizes.begin(), sizes.end(),
                                             std::size_t{0});
  if (needed > data.size()) {
    throw DataError("UEqNIID profile needs " + std::to_string(needed) +
                    " samples, have " + std::to_string(data.size()));
  }
  auto idx = shuffled_indices(data.size(), rng);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return data.label(a) < data.label(b);
  });
  std::vector<Shard> out;
  std::size_t pos = 0;
  for (auto len : sizes) {
    out.push_back(make_shard(
        data, std::vector<std::size_t>(idx.begin() + pos,
                                       idx.begin() + pos + len)));
    pos += len;
  }
  return out;
}

}  // namespace

std::vector<Shard> partition(const Dataset& data, const PartitionScheme& scheme,
                             std::size_t n_holons, std::mt19937_64& rng) {
  if (n_holons == 0) throw DataError("partition into zero holons");
  if (std::holds_alternative<IidScheme>(scheme)) {
    return partition_iid(data, n_holons, rng);
  }
  if (const auto* eq = std::get_if<EqNiidScheme>(&scheme)) {
    return partition_eq_niid(data, *eq, n_holons, rng);
  }
  return partition_ueq_niid(data, std::get<UeqNiidScheme>(scheme), n_holons,
                            rng);
}

RegressionData synthetic_regression(std::size_t n, std::size_t dim,
                                    double noise_stddev, std::mt19937_64& rng) {
  if (n == 0 || dim == 0) throw DataError("synthetic data needs n, dim >= 1");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  ParamVector truth(dim + 1);
  for (std::size_t k = 0; k <= dim; ++k) truth[k] = coef(rng);

  std::vector<double> feats(n * dim);
  std::vector<double> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    double y = truth[dim];
    for (std::size_t k = 0; k < dim; ++k) {
      double x = normal(rng);
      feats[i * dim + k] = x;
      y += truth[k] * x;
    }
    if (noise_stddev > 0.0) y += noise_stddev * normal(rng);
    labels[i] = y;
  }
  return {Dataset(dim, std::move(feats), std::move(labels)), std::move(truth)};
}

ClassificationData synthetic_classification(std::size_t n, std::size_t dim,
                                            std::size_t num_classes,
                                            double separation, double spread,
                                            std::mt19937_64& rng) {
  if (n == 0 || dim == 0) throw DataError("synthetic data needs n, dim >= 1");
  if (num_classes < 2) throw DataError("classification needs >= 2 classes");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> centers(num_classes * dim);
  for (auto& c : centers) c = separation * normal(rng);

  std::vector<double> feats(n * dim);
  std::vector<double> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % num_classes;
    for (std::size_t k = 0; k < dim; ++k) {
      feats[i * dim + k] = centers[c * dim + k] + spread * normal(rng);
    }
    labels[i] = static_cast<double>(c);
  }
  return {Dataset(dim, std::move(feats), std::move(labels), num_classes),
          std::move(centers)};
}

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t at) {
  return (std::uint32_t{bytes[at]} << 24) |
         (std::uint32_t{bytes[at + 1]} << 16) |
         (std::uint32_t{bytes[at + 2]} << 8) | std::uint32_t{bytes[at + 3]};
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>());
}

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

}  // namespace

Dataset parse_idx(std::span<const std::uint8_t> images,
                  std::span<const std::uint8_t> labels) {
  if (images.size() < 16) throw DataError("IDX images: truncated header");
  if (labels.size() < 8) throw DataError("IDX labels: truncated header");
  if (read_be32(images, 0) != kImagesMagic) {
    throw DataError("IDX images: bad magic");
  }
  if (read_be32(labels, 0) != kLabelsMagic) {
    throw DataError("IDX labels: bad magic");
  }
  const std::size_t count = read_be32(images, 4);
  const std::size_t rows = read_be32(images, 8);
  const std::size_t cols = read_be32(images, 12);
  const std::size_t label_count = read_be32(labels, 4);
  if (count != label_count) {
    throw DataError("IDX: " + std::to_string(count) + " images but " +
                    std::to_string(label_count) + " labels");
  }
  const std::size_t pixels = rows * cols;
  if (images.size() < 16 + count * pixels) {
    throw DataError("IDX images: truncated body");
  }
  if (labels.size() < 8 + count) throw DataError("IDX labels: truncated body");

  std::vector<double> feats(count * pixels);
  for (std::size_t i = 0; i < feats.size(); ++i) {
    feats[i] = images[16 + i] / 255.0;
  }
  std::vector<double> labs(count);
  // Digit label files: ten classes unless a larger label shows up.
  std::size_t classes = 10;
  for (std::size_t i = 0; i < count; ++i) {
    labs[i] = labels[8 + i];
    classes = std::max<std::size_t>(classes, labels[8 + i] + 1u);
  }
  return Dataset(pixels, std::move(feats), std::move(labs), classes);
}

Dataset load_idx(const std::string& images_path,
                 const std::string& labels_path) {
  auto images = read_file(images_path);
  auto labels = read_file(labels_path);
  return parse_idx(images, labels);
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& data,
                                             std::size_t test_count,
                                             std::mt19937_64& rng) {
  if (test_count >= data.size()) {
    throw DataError("test split of " + std::to_string(test_count) +
                    " leaves no training data");
  }
  auto idx = shuffled_indices(data.size(), rng);
  std::span<const std::size_t> all(idx);
  auto train = all.first(data.size() - test_count);
  auto test = all.last(test_count);
  return {data.subset(train), data.subset(test)};
}

}  // namespace holon
