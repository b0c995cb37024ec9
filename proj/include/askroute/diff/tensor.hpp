#pragma once

#include <cstddef>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace askroute::diff {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline ShapeError shape_mismatch(const std::string& op, const Shape& a, const Shape& b) {
  return ShapeError(op + ": shape mismatch " + shape_string(a) + " vs " + shape_string(b));
}

/// Dense row-major tensor. Owns its values and, once requested, a gradient
/// buffer of the same shape.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, bool requires_grad = false)
      : shape_(std::move(shape)), values_(numel(shape_), T{0}), requires_grad_(requires_grad) {}

  Tensor(Shape shape, std::vector<T> values, bool requires_grad = false)
      : shape_(std::move(shape)), values_(std::move(values)), requires_grad_(requires_grad) {
    if (values_.size() != numel(shape_)) {
      throw ShapeError("tensor: " + std::to_string(values_.size()) + " values for shape " +
                       shape_string(shape_));
    }
  }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return values_.size(); }

  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }
  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool flag) { requires_grad_ = flag; }

  bool has_grad() const { return !grad_.empty(); }
  std::span<T> grad() {
    if (grad_.empty()) grad_.assign(values_.size(), T{0});
    return grad_;
  }
  std::span<const T> grad() const { return grad_; }
  void clear_grad() { grad_.clear(); }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_, requires_grad_);
    for (std::size_t i = 0; i < values_.size(); ++i) out[i] = static_cast<U>(values_[i]);
    return out;
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.values_ == b.values_;
  }

 private:
  Shape shape_;
  std::vector<T> values_;
  bool requires_grad_ = false;
  std::vector<T> grad_;
};

}  // namespace askroute::diff
