#pragma once

// Small row-major 2-d double tensor. Everything in the network is expressed
// as (rows x cols); scalars are 1x1 and vectors are Nx1 or 1xC.

#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <vector>

namespace hvt {

struct Tensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(std::size_t r, std::size_t c) : rows(r), cols(c), v(r * c, 0.0) {}
  Tensor(std::size_t r, std::size_t c, std::vector<double> data)
      : rows(r), cols(c), v(std::move(data)) {
    if (v.size() != rows * cols) throw std::invalid_argument("tensor data size mismatch");
  }

  static Tensor zeros(std::size_t r, std::size_t c) { return Tensor(r, c); }
  static Tensor full(std::size_t r, std::size_t c, double x) {
    Tensor t(r, c);
    for (auto& e : t.v) e = x;
    return t;
  }
  static Tensor row(std::initializer_list<double> xs) {
    return Tensor(1, xs.size(), std::vector<double>(xs));
  }
  static Tensor col(std::initializer_list<double> xs) {
    return Tensor(xs.size(), 1, std::vector<double>(xs));
  }

  std::size_t numel() const { return rows * cols; }
  double* data() { return v.data(); }
  const double* data() const { return v.data(); }
  double& at(std::size_t r, std::size_t c) { return v[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
};

}  // namespace hvt
