#pragma once

// Forward and backward kernels of the layer types. Each backward takes the
// upstream gradient and returns gradients for the layer input and parameters.

#include <cstddef>
#include <span>
#include <vector>

#include "rpm/nn/tensor.hpp"

namespace rpm::nn {

class DegenerateBatchError : public Error {
 public:
  using Error::Error;
};

class LabelError : public Error {
 public:
  using Error::Error;
};

enum class Mode { Train, Eval };

// Convolution: valid cross-correlation, stride 1.
// input (N, Cin, H, W), kernel (Cout, Cin, KH, KW), bias (Cout).
Tensor conv2d_forward(const Tensor& input, const Tensor& kernel, std::span<const double> bias);

struct ConvGradients {
  Tensor input;  // empty when not requested
  Tensor kernel;
  std::vector<double> bias;
};

ConvGradients conv2d_backward(const Tensor& input, const Tensor& kernel, const Tensor& grad_output,
                              bool want_input_grad = true);

// 2x2 max pooling with stride 2. A trailing odd row or column is dropped.
struct PoolResult {
  Tensor output;
  std::vector<std::size_t> argmax;  // flat input index for each output element
};

PoolResult maxpool_forward(const Tensor& input);
Tensor maxpool_backward(const Tensor& grad_output, std::span<const std::size_t> argmax, const Shape& input_shape);

// Per-channel batch normalization.
struct BatchNormParams {
  std::vector<double> gamma;
  std::vector<double> beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double eps = 1e-5;
  double momentum = 0.9;

  explicit BatchNormParams(std::size_t channels = 0)
      : gamma(channels, 1.0), beta(channels, 0.0), running_mean(channels, 0.0), running_var(channels, 1.0) {}
  std::size_t channels() const { return gamma.size(); }
};

struct BatchNormCache {
  Mode mode = Mode::Eval;
  Tensor normalized;  // x-hat
  std::vector<double> inv_std;
};

/// Train mode normalizes with batch statistics and folds them into the running
/// statistics (running = momentum * running + (1 - momentum) * batch). Eval mode
/// uses the running statistics. Throws DegenerateBatchError in Train mode when
/// the batch holds a single sample.
Tensor batchnorm_forward(const Tensor& input, BatchNormParams& params, Mode mode, BatchNormCache* cache = nullptr);

/// Eval-mode forward that leaves params untouched.
Tensor batchnorm_inference(const Tensor& input, const BatchNormParams& params);

struct BatchNormGradients {
  Tensor input;
  std::vector<double> gamma;
  std::vector<double> beta;
};

BatchNormGradients batchnorm_backward(const Tensor& grad_output, const BatchNormParams& params,
                                      const BatchNormCache& cache);

// Dense layer over (N, F) input; weights (K, F), bias (K).
Tensor dense_forward(const Tensor& input, const Tensor& weights, std::span<const double> bias);

struct DenseGradients {
  Tensor input;
  Tensor weights;
  std::vector<double> bias;
};

DenseGradients dense_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_logits);

/// Row-wise softmax with max subtraction.
Tensor softmax(const Tensor& logits);

/// softmax(dense_forward(...)).
Tensor dense_softmax_forward(const Tensor& input, const Tensor& weights, std::span<const double> bias);

inline constexpr double kProbabilityClamp = 1e-12;

/// -log(max(probs[label], 1e-12)). Throws LabelError for an out-of-range label.
double cross_entropy_loss(std::span<const double> probs, std::size_t label);

/// Gradient of the cross-entropy of softmax(logits) with respect to the logits.
std::vector<double> cross_entropy_logit_gradient(std::span<const double> probs, std::size_t label);

}  // namespace rpm::nn
