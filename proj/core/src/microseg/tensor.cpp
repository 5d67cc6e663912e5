#include "volseg/microseg/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace volseg::microseg {

std::string to_string(const Dims5& d) {
  return "(" + std::to_string(d.n) + "," + std::to_string(d.c) + "," + std::to_string(d.x) + "," +
         std::to_string(d.y) + "," + std::to_string(d.z) + ")";
}

Tensor::Tensor(Dims5 dims, std::vector<Real> values) : dims_(dims), data_(std::move(values)) {
  if (data_.size() != dims_.count())
    fail(Errc::ShapeMismatch, "tensor data length does not match dims " + to_string(dims_));
}

void Tensor::fill(Real v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](Real v) { return std::isfinite(v); });
}

}  // namespace volseg::microseg
