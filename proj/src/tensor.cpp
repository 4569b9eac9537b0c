#include "kbdial/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace kbdial {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t element_count(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor shape has no dimensions");
  std::size_t n = 1;
  for (auto d : shape) {
    if (d == 0) throw DimensionError("zero dimension in shape " + shape_string(shape));
    n *= d;
  }
  return n;
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (element_count(shape_) != data_.size()) {
    throw DimensionError("shape " + shape_string(shape_) + " does not match " +
                         std::to_string(data_.size()) + " values");
  }
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::initializer_list<double> values) {
  return Tensor({rows, cols}, std::vector<double>(values));
}

Tensor Tensor::column(std::span<const double> values) {
  return Tensor({values.size(), 1}, std::vector<double>(values.begin(), values.end()));
}

std::size_t Tensor::rows() const {
  if (shape_.size() > 2) throw DimensionError("matrix view of rank-" + std::to_string(shape_.size()) + " tensor");
  return shape_.empty() ? 0 : shape_[0];
}

std::size_t Tensor::cols() const {
  if (shape_.size() > 2) throw DimensionError("matrix view of rank-" + std::to_string(shape_.size()) + " tensor");
  return shape_.size() == 2 ? shape_[1] : (shape_.empty() ? 0 : 1);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace kbdial
