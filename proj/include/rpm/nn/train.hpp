#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rpm/nn/model.hpp"

namespace rpm::nn {

class DatasetError : public Error {
 public:
  using Error::Error;
};

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::uint64_t seed = 0;

  void validate() const;
};

/// SGD with classical momentum: v = momentum * v - lr * g; p += v.
class Sgd {
 public:
  Sgd(double learning_rate, double momentum) : lr_(learning_rate), momentum_(momentum) {}
  explicit Sgd(const TrainConfig& config) : Sgd(config.learning_rate, config.momentum) {}

  /// Throws ShapeError when gradients do not line up with the model's
  /// trainable parameters.
  void step(Model& model, const Gradients& gradients);

 private:
  double lr_;
  double momentum_;
  std::vector<std::vector<double>> velocity_;
};

/// Samples of one fixed shape (C, H, W) stored contiguously, with labels.
class Dataset {
 public:
  explicit Dataset(Shape sample_shape) : sample_shape_(std::move(sample_shape)) {}

  void add(std::span<const double> sample, std::size_t label);

  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }
  const Shape& sample_shape() const { return sample_shape_; }
  std::span<const std::size_t> labels() const { return labels_; }
  std::size_t label(std::size_t i) const { return labels_.at(i); }
  std::span<const double> sample(std::size_t i) const;

  /// (N, C, H, W) batch of the given rows.
  Tensor batch(std::span<const std::size_t> indices) const;

 private:
  Shape sample_shape_;
  std::size_t stride_ = 0;
  std::vector<double> data_;
  std::vector<std::size_t> labels_;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// Stratified, seeded split. round(fraction * N) samples go to training,
/// apportioned across labels by largest remainder so every label is within one
/// sample of its exact share; each label keeps at least one sample per side.
/// Throws DatasetError when a label has fewer than two samples.
Split split_dataset(std::span<const std::size_t> labels, double train_fraction, std::uint64_t seed);

struct TrainHistory {
  std::vector<double> epoch_loss;
};

/// Mini-batch training over the given rows; batches are reshuffled every epoch
/// from the config seed. A trailing batch of one sample joins the previous
/// batch so batch normalization always sees at least two samples.
TrainHistory train(Model& model, const Dataset& data, std::span<const std::size_t> rows, const TrainConfig& config);

/// Argmax class per row, computed in Eval mode.
std::vector<std::size_t> predict_labels(const Model& model, const Dataset& data, std::span<const std::size_t> rows);

/// Match rate of predictions against labels. Throws DatasetError when empty.
double accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> labels);

double evaluate_accuracy(const Model& model, const Dataset& data, std::span<const std::size_t> rows);
double evaluate_accuracy(const Model& model, const Dataset& data);

/// counts[true][predicted]
std::vector<std::vector<std::size_t>> confusion_matrix(std::span<const std::size_t> predicted,
                                                       std::span<const std::size_t> labels, std::size_t n_classes);

}  // namespace rpm::nn
