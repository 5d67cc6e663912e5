#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "volseg/error.hpp"

namespace volseg::microseg {

using Real = double;

/// (batch, channels, x, y, z); x is the fastest-varying axis in memory.
struct Dims5 {
  std::size_t n = 1, c = 1, x = 1, y = 1, z = 1;

  std::size_t spatial() const { return x * y * z; }
  std::size_t count() const { return n * c * spatial(); }
  bool operator==(const Dims5&) const = default;
};

std::string to_string(const Dims5& d);

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Dims5 dims, Real fill = 0) : dims_(dims), data_(dims.count(), fill) {}
  Tensor(Dims5 dims, std::vector<Real> values);

  const Dims5& dims() const { return dims_; }
  std::size_t size() const { return data_.size(); }

  Real* data() { return data_.data(); }
  const Real* data() const { return data_.data(); }
  std::vector<Real>& values() { return data_; }
  const std::vector<Real>& values() const { return data_; }

  Real& operator[](std::size_t i) { return data_[i]; }
  Real operator[](std::size_t i) const { return data_[i]; }

  /// Start of the (batch, channel) spatial block.
  Real* channel(std::size_t b, std::size_t ch) { return data_.data() + (b * dims_.c + ch) * dims_.spatial(); }
  const Real* channel(std::size_t b, std::size_t ch) const {
    return data_.data() + (b * dims_.c + ch) * dims_.spatial();
  }

  void fill(Real v);
  bool all_finite() const;

  bool operator==(const Tensor&) const = default;

 private:
  Dims5 dims_{};
  std::vector<Real> data_ = std::vector<Real>(1);
};

/// A learnable tensor and its accumulated gradient.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;

  Param() = default;
  Param(std::string name_, Tensor value_)
      : name(std::move(name_)), value(std::move(value_)), grad(value.dims()) {}

  void zero_grad() { grad.fill(0); }
};

}  // namespace volseg::microseg
