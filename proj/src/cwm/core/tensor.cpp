#include "cwm/core/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "cwm/core/error.hpp"

namespace cwm {

index_t shape_numel(const Shape& shape) {
  index_t n = 1;
  for (index_t d : shape) {
    if (d < 0) throw_runtime("negative dimension in shape " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
  os << ')';
  return os.str();
}

Tensor::Tensor(Shape shape, real fill)
    : shape_(std::move(shape)), data_(static_cast<size_t>(shape_numel(shape_)), fill) {}

Tensor::Tensor(Shape shape, std::vector<real> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (static_cast<index_t>(data_.size()) != shape_numel(shape_))
    throw_runtime("tensor data size " + std::to_string(data_.size()) + " does not match shape " +
                  shape_str(shape_));
}

index_t Tensor::dim(int i) const {
  const int r = rank();
  if (i < 0) i += r;
  if (i < 0 || i >= r) throw_runtime("dimension index out of range for shape " + shape_str(shape_));
  return shape_[static_cast<size_t>(i)];
}

Tensor Tensor::reshaped(Shape shape) const& {
  Tensor out = *this;
  return std::move(out).reshaped(std::move(shape));
}

Tensor Tensor::reshaped(Shape shape) && {
  if (shape_numel(shape) != numel())
    throw_runtime("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  shape_ = std::move(shape);
  return std::move(*this);
}

void Tensor::fill(real v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](real v) { return std::isfinite(v); });
}

Tensor& Tensor::operator+=(const Tensor& other) {
  if (numel() != other.numel())
    throw_runtime("accumulate shape mismatch " + shape_str(shape_) + " vs " + shape_str(other.shape_));
  real* dst = data_.data();
  const real* src = other.data();
  const size_t n = data_.size();
  for (size_t i = 0; i < n; ++i) dst[i] += src[i];
  return *this;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         (a.numel() == 0 ||
          std::memcmp(a.data(), b.data(), static_cast<size_t>(a.numel()) * sizeof(real)) == 0);
}

real max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.numel() != b.numel()) throw_runtime("max_abs_diff size mismatch");
  real m = 0;
  for (index_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

real l2_norm(const Tensor& t) {
  double s = 0;
  for (real v : t.values()) s += double(v) * double(v);
  return static_cast<real>(std::sqrt(s));
}

}  // namespace cwm
