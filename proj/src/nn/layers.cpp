#include "rpm/nn/layers.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace rpm::nn {

std::string to_string(const Shape& shape) { return fmt::format("({})", fmt::join(shape, ", ")); }

Tensor::Tensor(Shape s, std::vector<double> v) : shape(std::move(s)), values(std::move(v)) {
  if (values.size() != element_count(shape)) {
    throw ShapeError(fmt::format("{} values for shape {}", values.size(), nn::to_string(shape)));
  }
}

bool Tensor::all_finite() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw ShapeError(fmt::format("{} expects rank {}, got shape {}", what, rank, to_string(t.shape)));
  }
}

Tensor conv2d_forward(const Tensor& input, const Tensor& kernel, std::span<const double> bias) {
  require_rank(input, 4, "conv2d input");
  require_rank(kernel, 4, "conv2d kernel");
  const std::size_t n = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t cout = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  if (kernel.dim(1) != cin) {
    throw ShapeError(fmt::format("kernel {} does not match input {}", to_string(kernel.shape), to_string(input.shape)));
  }
  if (bias.size() != cout) throw ShapeError("conv2d bias length differs from output channels");
  if (h < kh || w < kw) throw ShapeError("conv2d input smaller than kernel");
  const std::size_t oh = h - kh + 1, ow = w - kw + 1;

  Tensor out({n, cout, oh, ow});
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t co = 0; co < cout; ++co) {
      double* dst = &out.at(b, co, 0, 0);
      std::fill_n(dst, oh * ow, bias[co]);
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const double* src = &input.at(b, ci, 0, 0);
        for (std::size_t i = 0; i < kh; ++i) {
          for (std::size_t j = 0; j < kw; ++j) {
            const double wt = kernel.at(co, ci, i, j);
            for (std::size_t y = 0; y < oh; ++y) {
              const double* in_row = src + (y + i) * w + j;
              double* out_row = dst + y * ow;
              for (std::size_t x = 0; x < ow; ++x) out_row[x] += wt * in_row[x];
            }
          }
        }
      }
    }
  }
  return out;
}

ConvGradients conv2d_backward(const Tensor& input, const Tensor& kernel, const Tensor& grad_output,
                              bool want_input_grad) {
  const std::size_t n = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t cout = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  const std::size_t oh = h - kh + 1, ow = w - kw + 1;
  if (grad_output.shape != Shape{n, cout, oh, ow}) throw ShapeError("conv2d gradient shape mismatch");

  ConvGradients g;
  g.kernel = Tensor(kernel.shape);
  g.bias.assign(cout, 0.0);
  if (want_input_grad) g.input = Tensor(input.shape);

  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t co = 0; co < cout; ++co) {
      const double* dy = &grad_output.at(b, co, 0, 0);
      double db = 0.0;
      for (std::size_t k = 0; k < oh * ow; ++k) db += dy[k];
      g.bias[co] += db;
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const double* src = &input.at(b, ci, 0, 0);
        double* dx = want_input_grad ? &g.input.at(b, ci, 0, 0) : nullptr;
        for (std::size_t i = 0; i < kh; ++i) {
          for (std::size_t j = 0; j < kw; ++j) {
            const double wt = kernel.at(co, ci, i, j);
            double acc = 0.0;
            for (std::size_t y = 0; y < oh; ++y) {
              const double* in_row = src + (y + i) * w + j;
              const double* dy_row = dy + y * ow;
              for (std::size_t x = 0; x < ow; ++x) acc += dy_row[x] * in_row[x];
              if (dx) {
                double* dx_row = dx + (y + i) * w + j;
                for (std::size_t x = 0; x < ow; ++x) dx_row[x] += wt * dy_row[x];
              }
            }
            g.kernel.at(co, ci, i, j) += acc;
          }
        }
      }
    }
  }
  return g;
}

PoolResult maxpool_forward(const Tensor& input) {
  require_rank(input, 4, "maxpool input");
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  if (h < 2 || w < 2) throw ShapeError(fmt::format("maxpool needs spatial dims >= 2, got {}", to_string(input.shape)));
  const std::size_t oh = h / 2, ow = w / 2;

  PoolResult r;
  r.output = Tensor({n, c, oh, ow});
  r.argmax.resize(r.output.size());
  std::size_t out_idx = 0;
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t base = (b * c + ch) * h * w;
      for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
          std::size_t best = base + 2 * y * w + 2 * x;
          for (std::size_t dy = 0; dy < 2; ++dy) {
            for (std::size_t dx = 0; dx < 2; ++dx) {
              const std::size_t idx = base + (2 * y + dy) * w + 2 * x + dx;
              if (input.values[idx] > input.values[best]) best = idx;
            }
          }
          r.output.values[out_idx] = input.values[best];
          r.argmax[out_idx] = best;
          ++out_idx;
        }
      }
    }
  }
  return r;
}

Tensor maxpool_backward(const Tensor& grad_output, std::span<const std::size_t> argmax, const Shape& input_shape) {
  if (argmax.size() != grad_output.size()) throw ShapeError("maxpool argmax does not match gradient");
  Tensor dx(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) dx.values[argmax[i]] += grad_output.values[i];
  return dx;
}

namespace {

void check_bn(const Tensor& input, const BatchNormParams& params) {
  require_rank(input, 4, "batchnorm input");
  if (input.dim(1) != params.channels()) throw ShapeError("batchnorm channel count mismatch");
}

Tensor normalize(const Tensor& input, std::span<const double> mean, std::span<const double> inv_std,
                 const BatchNormParams& params, Tensor* normalized) {
  const std::size_t n = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
  Tensor out(input.shape);
  if (normalized) *normalized = Tensor(input.shape);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t base = (b * c + ch) * hw;
      for (std::size_t k = 0; k < hw; ++k) {
        const double xhat = (input.values[base + k] - mean[ch]) * inv_std[ch];
        if (normalized) normalized->values[base + k] = xhat;
        out.values[base + k] = params.gamma[ch] * xhat + params.beta[ch];
      }
    }
  }
  return out;
}

}  // namespace

Tensor batchnorm_inference(const Tensor& input, const BatchNormParams& params) {
  check_bn(input, params);
  std::vector<double> inv_std(params.channels());
  for (std::size_t ch = 0; ch < inv_std.size(); ++ch) inv_std[ch] = 1.0 / std::sqrt(params.running_var[ch] + params.eps);
  return normalize(input, params.running_mean, inv_std, params, nullptr);
}

Tensor batchnorm_forward(const Tensor& input, BatchNormParams& params, Mode mode, BatchNormCache* cache) {
  check_bn(input, params);
  const std::size_t n = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
  std::vector<double> mean(c, 0.0), var(c, 0.0), inv_std(c);

  if (mode == Mode::Train) {
    if (n < 2) throw DegenerateBatchError("batch normalization in training needs at least 2 samples");
    const double count = static_cast<double>(n * hw);
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double* x = input.values.data() + (b * c + ch) * hw;
        for (std::size_t k = 0; k < hw; ++k) mean[ch] += x[k];
      }
    }
    for (auto& m : mean) m /= count;
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double* x = input.values.data() + (b * c + ch) * hw;
        for (std::size_t k = 0; k < hw; ++k) var[ch] += (x[k] - mean[ch]) * (x[k] - mean[ch]);
      }
    }
    for (auto& v : var) v /= count;
    for (std::size_t ch = 0; ch < c; ++ch) {
      params.running_mean[ch] = params.momentum * params.running_mean[ch] + (1.0 - params.momentum) * mean[ch];
      params.running_var[ch] = params.momentum * params.running_var[ch] + (1.0 - params.momentum) * var[ch];
    }
  } else {
    mean = params.running_mean;
    var = params.running_var;
  }
  for (std::size_t ch = 0; ch < c; ++ch) inv_std[ch] = 1.0 / std::sqrt(var[ch] + params.eps);

  if (!cache) return normalize(input, mean, inv_std, params, nullptr);
  cache->mode = mode;
  cache->inv_std = inv_std;
  return normalize(input, mean, inv_std, params, &cache->normalized);
}

BatchNormGradients batchnorm_backward(const Tensor& grad_output, const BatchNormParams& params,
                                      const BatchNormCache& cache) {
  if (grad_output.shape != cache.normalized.shape) throw ShapeError("batchnorm gradient shape mismatch");
  const std::size_t n = grad_output.dim(0), c = grad_output.dim(1), hw = grad_output.dim(2) * grad_output.dim(3);
  BatchNormGradients g;
  g.gamma.assign(c, 0.0);
  g.beta.assign(c, 0.0);
  g.input = Tensor(grad_output.shape);

  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t base = (b * c + ch) * hw;
      for (std::size_t k = 0; k < hw; ++k) {
        g.gamma[ch] += grad_output.values[base + k] * cache.normalized.values[base + k];
        g.beta[ch] += grad_output.values[base + k];
      }
    }
  }

  if (cache.mode == Mode::Eval) {
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        const std::size_t base = (b * c + ch) * hw;
        const double scale = params.gamma[ch] * cache.inv_std[ch];
        for (std::size_t k = 0; k < hw; ++k) g.input.values[base + k] = grad_output.values[base + k] * scale;
      }
    }
    return g;
  }

  // dx = gamma * inv_std / m * (m * dy - sum(dy) - xhat * sum(dy * xhat))
  const double m = static_cast<double>(n * hw);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t base = (b * c + ch) * hw;
      const double scale = params.gamma[ch] * cache.inv_std[ch] / m;
      for (std::size_t k = 0; k < hw; ++k) {
        g.input.values[base + k] = scale * (m * grad_output.values[base + k] - g.beta[ch] -
                                            cache.normalized.values[base + k] * g.gamma[ch]);
      }
    }
  }
  return g;
}

Tensor dense_forward(const Tensor& input, const Tensor& weights, std::span<const double> bias) {
  require_rank(input, 2, "dense input");
  require_rank(weights, 2, "dense weights");
  const std::size_t n = input.dim(0), f = input.dim(1), k = weights.dim(0);
  if (weights.dim(1) != f) {
    throw ShapeError(fmt::format("dense weights {} do not match input {}", to_string(weights.shape),
                                 to_string(input.shape)));
  }
  if (bias.size() != k) throw ShapeError("dense bias length differs from output size");
  Tensor out({n, k});
  for (std::size_t b = 0; b < n; ++b) {
    const double* x = input.values.data() + b * f;
    for (std::size_t o = 0; o < k; ++o) {
      const double* wr = weights.values.data() + o * f;
      double acc = bias[o];
      for (std::size_t i = 0; i < f; ++i) acc += wr[i] * x[i];
      out.values[b * k + o] = acc;
    }
  }
  return out;
}

DenseGradients dense_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_logits) {
  const std::size_t n = input.dim(0), f = input.dim(1), k = weights.dim(0);
  if (grad_logits.shape != Shape{n, k}) throw ShapeError("dense gradient shape mismatch");
  DenseGradients g;
  g.input = Tensor(input.shape);
  g.weights = Tensor(weights.shape);
  g.bias.assign(k, 0.0);
  for (std::size_t b = 0; b < n; ++b) {
    const double* x = input.values.data() + b * f;
    double* dx = g.input.values.data() + b * f;
    for (std::size_t o = 0; o < k; ++o) {
      const double d = grad_logits.values[b * k + o];
      g.bias[o] += d;
      const double* wr = weights.values.data() + o * f;
      double* dw = g.weights.values.data() + o * f;
      for (std::size_t i = 0; i < f; ++i) {
        dw[i] += d * x[i];
        dx[i] += d * wr[i];
      }
    }
  }
  return g;
}

Tensor softmax(const Tensor& logits) {
  require_rank(logits, 2, "softmax input");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  Tensor out(logits.shape);
  for (std::size_t b = 0; b < n; ++b) {
    const double* z = logits.values.data() + b * k;
    double* p = out.values.data() + b * k;
    const double top = *std::max_element(z, z + k);
    double sum = 0.0;
    for (std::size_t o = 0; o < k; ++o) {
      p[o] = std::exp(z[o] - top);
      sum += p[o];
    }
    for (std::size_t o = 0; o < k; ++o) p[o] /= sum;
  }
  return out;
}

Tensor dense_softmax_forward(const Tensor& input, const Tensor& weights, std::span<const double> bias) {
  return softmax(dense_forward(input, weights, bias));
}

double cross_entropy_loss(std::span<const double> probs, std::size_t label) {
  if (label >= probs.size()) throw LabelError(fmt::format("label {} outside {} classes", label, probs.size()));
  return -std::log(std::max(probs[label], kProbabilityClamp));
}

std::vector<double> cross_entropy_logit_gradient(std::span<const double> probs, std::size_t label) {
  if (label >= probs.size()) throw LabelError(fmt::format("label {} outside {} classes", label, probs.size()));
  std::vector<double> g(probs.begin(), probs.end());
  g[label] -= 1.0;
  return g;
}

}  // namespace rpm::nn
