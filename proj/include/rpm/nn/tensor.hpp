#pragma once

#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "rpm/domain/types.hpp"

namespace rpm::nn {

class ShapeError : public Error {
 public:
  using Error::Error;
};

class StateError : public Error {
 public:
  using Error::Error;
};

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);

inline std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

/// Dense row-major tensor of doubles. Convolutional layers use the batch
/// layout (N, C, H, W); dense layers use (N, F).
struct Tensor {
  Shape shape;
  std::vector<double> values;

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0) : shape(std::move(s)), values(element_count(shape), fill) {}
  Tensor(Shape s, std::vector<double> v);

  std::size_t rank() const { return shape.size(); }
  std::size_t size() const { return values.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }

  double& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return values[((n * shape[1] + c) * shape[2] + h) * shape[3] + w];
  }
  const double& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return values[((n * shape[1] + c) * shape[2] + h) * shape[3] + w];
  }

  bool all_finite() const;

  bool operator==(const Tensor&) const = default;
};

/// Throws ShapeError unless t has the given rank.
void require_rank(const Tensor& t, std::size_t rank, const char* what);

}  // namespace rpm::nn
