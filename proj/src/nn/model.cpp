#include "rpm/nn/model.hpp"

#include <cmath>
#include <random>

#include <fmt/format.h>

namespace rpm::nn {

std::vector<Shape> Architecture::block_output_shapes() const {
  std::vector<Shape> shapes;
  std::size_t h = in_height, w = in_width;
  for (std::size_t b = 0; b < block_channels.size(); ++b) {
    if (h < kernel || w < kernel) {
      throw ShapeError(fmt::format("block {} input {}x{} smaller than kernel {}", b, h, w, kernel));
    }
    h = h - kernel + 1;
    w = w - kernel + 1;
    if (h < 2 || w < 2) throw ShapeError(fmt::format("block {} conv output {}x{} too small to pool", b, h, w));
    h /= 2;
    w /= 2;
    shapes.push_back({block_channels[b], h, w});
  }
  return shapes;
}

std::size_t Architecture::flattened_size() const {
  const auto shapes = block_output_shapes();
  if (shapes.empty()) return in_channels * in_height * in_width;
  return element_count(shapes.back());
}

void Architecture::validate() const {
  if (in_channels == 0 || kernel == 0) throw ShapeError("architecture has zero-sized dimension");
  if (n_classes < 2) throw ShapeError("need at least two classes");
  for (auto c : block_channels) {
    if (c == 0) throw ShapeError("block with zero channels");
  }
  (void)block_output_shapes();
}

Model::Model(Architecture arch, std::uint64_t seed) : arch_(std::move(arch)) {
  arch_.validate();
  std::mt19937_64 rng(seed);
  std::size_t cin = arch_.in_channels;
  for (std::size_t cout : arch_.block_channels) {
    Block block;
    block.kernel = Tensor({cout, cin, arch_.kernel, arch_.kernel});
    const double fan_in = static_cast<double>(cin * arch_.kernel * arch_.kernel);
    std::uniform_real_distribution<double> u(-std::sqrt(6.0 / fan_in), std::sqrt(6.0 / fan_in));
    for (auto& v : block.kernel.values) v = u(rng);
    block.bias.assign(cout, 0.0);
    block.norm = BatchNormParams(cout);
    blocks_.push_back(std::move(block));
    cin = cout;
  }
  const std::size_t features = arch_.flattened_size();
  dense_weights_ = Tensor({arch_.n_classes, features});
  const double limit = std::sqrt(6.0 / static_cast<double>(features + arch_.n_classes));
  std::uniform_real_distribution<double> u(-limit, limit);
  for (auto& v : dense_weights_.values) v = u(rng);
  dense_bias_.assign(arch_.n_classes, 0.0);
}

Tensor Model::to_flat(const Tensor& t) const {
  const std::size_t n = t.dim(0);
  return Tensor({n, t.size() / n}, t.values);
}

Tensor Model::forward(const Tensor& batch, Mode mode) {
  require_rank(batch, 4, "model input");
  if (batch.dim(1) != arch_.in_channels || batch.dim(2) != arch_.in_height || batch.dim(3) != arch_.in_width) {
    throw ShapeError(fmt::format("model expects (N, {}, {}, {}), got {}", arch_.in_channels, arch_.in_height,
                                 arch_.in_width, to_string(batch.shape)));
  }
  cached_ = false;
  input_shape_ = batch.shape;
  cache_.assign(blocks_.size(), BlockCache{});
  Tensor x = batch;
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    BlockCache& c = cache_[b];
    c.input = std::move(x);
    c.conv_out = conv2d_forward(c.input, blocks_[b].kernel, blocks_[b].bias);
    c.pool = maxpool_forward(c.conv_out);
    x = batchnorm_forward(c.pool.output, blocks_[b].norm, mode, &c.norm);
  }
  flat_cache_ = to_flat(x);
  probs_cache_ = dense_softmax_forward(flat_cache_, dense_weights_, dense_bias_);
  cached_ = true;
  return probs_cache_;
}

Tensor Model::predict(const Tensor& batch) const {
  require_rank(batch, 4, "model input");
  Tensor x = batch;
  for (const Block& block : blocks_) {
    x = batchnorm_inference(maxpool_forward(conv2d_forward(x, block.kernel, block.bias)).output, block.norm);
  }
  return dense_softmax_forward(to_flat(x), dense_weights_, dense_bias_);
}

double Model::loss(std::span<const std::size_t> labels) const {
  if (!cached_) throw StateError("loss requested before forward");
  const std::size_t n = probs_cache_.dim(0), k = probs_cache_.dim(1);
  if (labels.size() != n) throw ShapeError("label count differs from batch size");
  double total = 0.0;
  for (std::size_t b = 0; b < n; ++b) {
    total += cross_entropy_loss(std::span(probs_cache_.values).subspan(b * k, k), labels[b]);
  }
  return total / static_cast<double>(n);
}

Gradients Model::backward(std::span<const std::size_t> labels, bool want_input_grad) {
  if (!cached_) throw StateError("backward called before forward");
  const std::size_t n = probs_cache_.dim(0), k = probs_cache_.dim(1);
  if (labels.size() != n) throw ShapeError("label count differs from batch size");

  Tensor dlogits({n, k});
  for (std::size_t b = 0; b < n; ++b) {
    const auto g = cross_entropy_logit_gradient(std::span(probs_cache_.values).subspan(b * k, k), labels[b]);
    for (std::size_t o = 0; o < k; ++o) dlogits.values[b * k + o] = g[o] / static_cast<double>(n);
  }

  DenseGradients dense = dense_backward(flat_cache_, dense_weights_, dlogits);
  const Shape& last = cache_.empty() ? input_shape_ : cache_.back().pool.output.shape;
  Tensor dx(last, std::move(dense.input.values));

  std::vector<std::vector<double>> per_block(blocks_.size() * 4);
  for (std::size_t bi = blocks_.size(); bi-- > 0;) {
    const Block& block = blocks_[bi];
    const BlockCache& c = cache_[bi];
    BatchNormGradients norm = batchnorm_backward(dx, block.norm, c.norm);
    Tensor dconv = maxpool_backward(norm.input, c.pool.argmax, c.conv_out.shape);
    ConvGradients conv = conv2d_backward(c.input, block.kernel, dconv, bi > 0 || want_input_grad);
    per_block[bi * 4 + 0] = std::move(conv.kernel.values);
    per_block[bi * 4 + 1] = std::move(conv.bias);
    per_block[bi * 4 + 2] = std::move(norm.gamma);
    per_block[bi * 4 + 3] = std::move(norm.beta);
    dx = std::move(conv.input);
  }

  Gradients g;
  g.params = std::move(per_block);
  g.params.push_back(std::move(dense.weights.values));
  g.params.push_back(std::move(dense.bias));
  if (want_input_grad) g.input = std::move(dx);
  return g;
}

std::vector<ParamView> Model::parameters() {
  std::vector<ParamView> out;
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    Block& block = blocks_[b];
    const auto prefix = fmt::format("block{}.", b);
    out.push_back({prefix + "conv.weight", block.kernel.values, true});
    out.push_back({prefix + "conv.bias", block.bias, true});
    out.push_back({prefix + "bn.gamma", block.norm.gamma, true});
    out.push_back({prefix + "bn.beta", block.norm.beta, true});
    out.push_back({prefix + "bn.running_mean", block.norm.running_mean, false});
    out.push_back({prefix + "bn.running_var", block.norm.running_var, false});
  }
  out.push_back({"dense.weight", dense_weights_.values, true});
  out.push_back({"dense.bias", dense_bias_, true});
  return out;
}

std::vector<std::span<const double>> Model::parameter_values() const {
  std::vector<std::span<const double>> out;
  for (const Block& block : blocks_) {
    out.emplace_back(block.kernel.values);
    out.emplace_back(block.bias);
    out.emplace_back(block.norm.gamma);
    out.emplace_back(block.norm.beta);
    out.emplace_back(block.norm.running_mean);
    out.emplace_back(block.norm.running_var);
  }
  out.emplace_back(dense_weights_.values);
  out.emplace_back(dense_bias_);
  return out;
}

std::size_t Model::trainable_count() const { return blocks_.size() * 4 + 2; }

Gradients compute_gradients(Model& model, const Tensor& batch, std::span<const std::size_t> labels, Mode mode) {
  model.forward(batch, mode);
  return model.backward(labels);
}

}  // namespace rpm::nn
