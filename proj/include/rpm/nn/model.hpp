#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rpm/nn/layers.hpp"

namespace rpm::nn {

/// Block classifier: each block is Conv(3x3 valid) -> MaxPool(2x2) -> BatchNorm,
/// followed by Flatten and a softmax Dense layer.
struct Architecture {
  std::size_t in_channels = 1;
  std::size_t in_height = 40;
  std::size_t in_width = 98;
  std::vector<std::size_t> block_channels = {8, 16, 32};
  std::size_t kernel = 3;
  std::size_t n_classes = 2;

  /// Spatial (channels, height, width) after each block; throws ShapeError
  /// if a block does not fit.
  std::vector<Shape> block_output_shapes() const;
  std::size_t flattened_size() const;
  void validate() const;

  bool operator==(const Architecture&) const = default;
};

/// One parameter gradient per trainable parameter, in parameters() order, plus
/// the gradient of the loss with respect to the input batch.
struct Gradients {
  std::vector<std::vector<double>> params;
  Tensor input;
};

struct ParamView {
  std::string name;
  std::span<double> values;
  bool trainable = true;
};

class Model {
 public:
  Model(Architecture arch, std::uint64_t seed);

  const Architecture& architecture() const { return arch_; }

  /// Class probabilities (N, n_classes). Caches activations for backward().
  /// Train mode updates the batch-norm running statistics.
  Tensor forward(const Tensor& batch, Mode mode);

  /// Eval-mode probabilities without touching any model state; safe to call
  /// concurrently on a shared const Model.
  Tensor predict(const Tensor& batch) const;

  /// Mean cross-entropy of the cached forward pass against labels.
  double loss(std::span<const std::size_t> labels) const;

  /// Reverse-mode gradients of the mean cross-entropy of the cached forward
  /// pass. Throws StateError when no forward pass is cached.
  Gradients backward(std::span<const std::size_t> labels, bool want_input_grad = true);

  /// Every stored parameter in declaration order: per block conv.weight,
  /// conv.bias, bn.gamma, bn.beta, bn.running_mean, bn.running_var; then
  /// dense.weight, dense.bias. Running statistics are not trainable.
  std::vector<ParamView> parameters();
  std::vector<std::span<const double>> parameter_values() const;

  std::size_t trainable_count() const;

 private:
  struct Block {
    Tensor kernel;
    std::vector<double> bias;
    BatchNormParams norm;
  };

  struct BlockCache {
    Tensor input;
    Tensor conv_out;
    PoolResult pool;
    BatchNormCache norm;
  };

  Tensor to_flat(const Tensor& t) const;

  Architecture arch_;
  std::vector<Block> blocks_;
  Tensor dense_weights_;
  std::vector<double> dense_bias_;

  std::vector<BlockCache> cache_;
  Shape input_shape_;
  Tensor flat_cache_;
  Tensor probs_cache_;
  bool cached_ = false;
};

/// Forward in the given mode then backward, for one batch.
Gradients compute_gradients(Model& model, const Tensor& batch, std::span<const std::size_t> labels,
                            Mode mode = Mode::Train);

}  // namespace rpm::nn
