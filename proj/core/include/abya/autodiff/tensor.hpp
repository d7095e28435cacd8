#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace abya::ad {

using Shape = std::vector<std::size_t>;

inline std::size_t element_count(const Shape& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string to_string(const Shape& dims) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i != 0) os << ", ";
    os << dims[i];
  }
  os << ']';
  return os.str();
}

/// Raised when an operation receives operands whose dimensions do not fit.
class DimensionError : public std::invalid_argument {
 public:
  DimensionError(const std::string& op, const Shape& lhs, const Shape& rhs)
      : std::invalid_argument(op + ": dimension mismatch " + to_string(lhs) + " vs " +
                              to_string(rhs)) {}
  explicit DimensionError(const std::string& message) : std::invalid_argument(message) {}
};

/// Dense row-major tensor. A rank-0 shape is not used; scalars have dims {1}.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape dims, T fill = T{0})
      : dims_(std::move(dims)), data_(element_count(dims_), fill) {
    validate_dims();
  }

  Tensor(Shape dims, std::vector<T> data) : dims_(std::move(dims)), data_(std::move(data)) {
    validate_dims();
    if (element_count(dims_) != data_.size()) {
      throw DimensionError("tensor of shape " + to_string(dims_) + " given " +
                           std::to_string(data_.size()) + " values");
    }
  }

  static Tensor scalar(T value) { return Tensor({1}, std::vector<T>{value}); }

  const Shape& dims() const { return dims_; }
  std::size_t rank() const { return dims_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T item() const {
    if (data_.size() != 1) {
      throw DimensionError("item() on tensor of shape " + to_string(dims_));
    }
    return data_[0];
  }

  template <typename U>
  Tensor<U> cast() const {
    return Tensor<U>(dims_, std::vector<U>(data_.begin(), data_.end()));
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.dims_ == b.dims_ && a.data_ == b.data_;
  }

 private:
  void validate_dims() const {
    for (std::size_t d : dims_) {
      if (d == 0) throw DimensionError("zero-length dimension in " + to_string(dims_));
    }
  }

  Shape dims_;
  std::vector<T> data_;
};

}  // namespace abya::ad
