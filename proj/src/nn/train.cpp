#include "rpm/nn/train.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include <fmt/format.h>

namespace rpm::nn {

void TrainConfig::validate() const {
  if (epochs < 1) throw DatasetError("epochs must be at least 1");
  if (batch_size < 2) throw DatasetError("batch_size must be at least 2");
  if (!(learning_rate > 0.0)) throw DatasetError("learning_rate must be positive");
  if (momentum < 0.0 || momentum >= 1.0) throw DatasetError("momentum must be in [0, 1)");
}

void Sgd::step(Model& model, const Gradients& gradients) {
  auto params = model.parameters();
  std::vector<std::span<double>> trainable;
  for (auto& p : params) {
    if (p.trainable) trainable.push_back(p.values);
  }
  if (gradients.params.size() != trainable.size()) {
    throw ShapeError(fmt::format("{} gradients for {} parameters", gradients.params.size(), trainable.size()));
  }
  if (velocity_.empty()) {
    for (const auto& p : trainable) velocity_.emplace_back(p.size(), 0.0);
  }
  for (std::size_t i = 0; i < trainable.size(); ++i) {
    if (gradients.params[i].size() != trainable[i].size() || velocity_[i].size() != trainable[i].size()) {
      throw ShapeError(fmt::format("gradient {} has {} values, parameter has {}", i, gradients.params[i].size(),
                                   trainable[i].size()));
    }
    auto& v = velocity_[i];
    const auto& g = gradients.params[i];
    for (std::size_t k = 0; k < v.size(); ++k) {
      v[k] = momentum_ * v[k] - lr_ * g[k];
      trainable[i][k] += v[k];
    }
  }
}

void Dataset::add(std::span<const double> sample, std::size_t label) {
  if (stride_ == 0) stride_ = element_count(sample_shape_);
  if (sample.size() != stride_) {
    throw ShapeError(fmt::format("sample of {} values, dataset shape {}", sample.size(), to_string(sample_shape_)));
  }
  data_.insert(data_.end(), sample.begin(), sample.end());
  labels_.push_back(label);
}

std::span<const double> Dataset::sample(std::size_t i) const {
  if (i >= labels_.size()) throw DatasetError("sample index out of range");
  return {data_.data() + i * stride_, stride_};
}

Tensor Dataset::batch(std::span<const std::size_t> indices) const {
  Shape shape{indices.size()};
  shape.insert(shape.end(), sample_shape_.begin(), sample_shape_.end());
  Tensor t(shape);
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const auto s = sample(indices[b]);
    std::copy(s.begin(), s.end(), t.values.begin() + static_cast<std::ptrdiff_t>(b * stride_));
  }
  return t;
}

Split split_dataset(std::span<const std::size_t> labels, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw DatasetError("train fraction must be in (0, 1)");
  std::map<std::size_t, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < labels.size(); ++i) by_label[labels[i]].push_back(i);
  for (const auto& [label, rows] : by_label) {
    if (rows.size() < 2) throw DatasetError(fmt::format("label {} has fewer than 2 samples", label));
  }

  // Largest-remainder apportionment of round(fraction * N) training slots.
  const auto target = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(labels.size())));
  struct Share {
    std::size_t label;
    std::size_t count;
    double remainder;
  };
  std::vector<Share> shares;
  std::size_t assigned = 0;
  for (const auto& [label, rows] : by_label) {
    const double exact = train_fraction * static_cast<double>(rows.size());
    const auto base = static_cast<std::size_t>(std::floor(exact));
    shares.push_back({label, base, exact - static_cast<double>(base)});
    assigned += base;
  }
  std::vector<std::size_t> order(shares.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return shares[a].remainder > shares[b].remainder; });
  for (std::size_t k = 0; assigned < target && k < order.size(); ++k, ++assigned) ++shares[order[k]].count;

  std::mt19937_64 rng(seed);
  Split split;
  for (const Share& share : shares) {
    auto rows = by_label[share.label];
    std::shuffle(rows.begin(), rows.end(), rng);
    const std::size_t n_train = std::clamp<std::size_t>(share.count, 1, rows.size() - 1);
    split.train.insert(split.train.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.validation.insert(split.validation.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_train), rows.end());
  }
  std::shuffle(split.train.begin(), split.train.end(), rng);
  std::shuffle(split.validation.begin(), split.validation.end(), rng);
  return split;
}

TrainHistory train(Model& model, const Dataset& data, std::span<const std::size_t> rows, const TrainConfig& config) {
  config.validate();
  if (rows.size() < 2) throw DatasetError("training needs at least two samples");
  Sgd optimizer(config);
  std::mt19937_64 rng(config.seed ^ 0x9E3779B97F4A7C15ull);
  std::vector<std::size_t> order(rows.begin(), rows.end());
  TrainHistory history;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t start = 0;
    while (start < order.size()) {
      std::size_t end = std::min(order.size(), start + config.batch_size);
      if (order.size() - end == 1) end = order.size();
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      std::vector<std::size_t> labels(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) labels[i] = data.label(idx[i]);

      model.forward(data.batch(idx), Mode::Train);
      loss_sum += model.loss(labels) * static_cast<double>(idx.size());
      optimizer.step(model, model.backward(labels, false));
      start = end;
    }
    history.epoch_loss.push_back(loss_sum / static_cast<double>(order.size()));
  }
  return history;
}

std::vector<std::size_t> predict_labels(const Model& model, const Dataset& data, std::span<const std::size_t> rows) {
  constexpr std::size_t kChunk = 64;
  std::vector<std::size_t> out;
  out.reserve(rows.size());
  for (std::size_t start = 0; start < rows.size(); start += kChunk) {
    const auto idx = rows.subspan(start, std::min(kChunk, rows.size() - start));
    const Tensor probs = model.predict(data.batch(idx));
    const std::size_t k = probs.dim(1);
    for (std::size_t b = 0; b < idx.size(); ++b) {
      const auto first = probs.values.begin() + static_cast<std::ptrdiff_t>(b * k);
      out.push_back(static_cast<std::size_t>(std::max_element(first, first + static_cast<std::ptrdiff_t>(k)) - first));
    }
  }
  return out;
}

double accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> labels) {
  if (labels.empty()) throw DatasetError("accuracy of an empty dataset");
  if (predicted.size() != labels.size()) throw ShapeError("prediction count differs from label count");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predicted[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double evaluate_accuracy(const Model& model, const Dataset& data, std::span<const std::size_t> rows) {
  if (rows.empty()) throw DatasetError("accuracy of an empty dataset");
  const auto predicted = predict_labels(model, data, rows);
  std::vector<std::size_t> labels(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) labels[i] = data.label(rows[i]);
  return accuracy(predicted, labels);
}

double evaluate_accuracy(const Model& model, const Dataset& data) {
  std::vector<std::size_t> rows(data.size());
  std::iota(rows.begin(), rows.end(), 0);
  return evaluate_accuracy(model, data, rows);
}

std::vector<std::vector<std::size_t>> confusion_matrix(std::span<const std::size_t> predicted,
                                                       std::span<const std::size_t> labels, std::size_t n_classes) {
  if (predicted.size() != labels.size()) throw ShapeError("prediction count differs from label count");
  std::vector<std::vector<std::size_t>> m(n_classes, std::vector<std::size_t>(n_classes, 0));
  for (std::size_t i = 0; i < labels.size(); ++i) ++m.at(labels[i]).at(predicted[i]);
  return m;
}

}  // namespace rpm::nn
