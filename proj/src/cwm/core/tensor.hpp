#pragma once

#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "cwm/core/scalar.hpp"

namespace cwm {

using Shape = std::vector<index_t>;

index_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major tensor with value semantics.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, real fill = real(0));
  Tensor(Shape shape, std::vector<real> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor scalar(real v) { return Tensor(Shape{1}, v); }

  const Shape& shape() const noexcept { return shape_; }
  int rank() const noexcept { return static_cast<int>(shape_.size()); }
  /// Size of dimension `i`; negative indices count from the back.
  index_t dim(int i) const;
  index_t numel() const noexcept { return static_cast<index_t>(data_.size()); }
  bool empty() const noexcept { return data_.empty(); }

  real* data() noexcept { return data_.data(); }
  const real* data() const noexcept { return data_.data(); }
  std::span<real> values() noexcept { return data_; }
  std::span<const real> values() const noexcept { return data_; }
  std::vector<real>& storage() noexcept { return data_; }
  const std::vector<real>& storage() const noexcept { return data_; }

  real& operator[](index_t i) { return data_[static_cast<size_t>(i)]; }
  real operator[](index_t i) const { return data_[static_cast<size_t>(i)]; }

  /// Same data, new shape with equal element count.
  Tensor reshaped(Shape shape) const&;
  Tensor reshaped(Shape shape) &&;

  void fill(real v);
  bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }
  bool all_finite() const noexcept;

  /// Elementwise accumulate; shapes must match.
  Tensor& operator+=(const Tensor& other);

 private:
  Shape shape_;
  std::vector<real> data_;
};

bool bitwise_equal(const Tensor& a, const Tensor& b);
real max_abs_diff(const Tensor& a, const Tensor& b);
real l2_norm(const Tensor& t);

}  // namespace cwm
