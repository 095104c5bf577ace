#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "navgen/error.hpp"

namespace navgen {

// Dense row-major array of 64-bit floats. Rank 1 (vector) and rank 2
// (matrix) cover the whole model; scalars are length-1 vectors.
struct Array {
  std::vector<size_t> shape;
  std::vector<double> data;

  Array() = default;

  static Array zeros(std::vector<size_t> s) {
    Array a;
    size_t n = 1;
    for (size_t d : s) n *= d;
    a.shape = std::move(s);
    a.data.assign(n, 0.0);
    return a;
  }
  static Array scalar(double v) {
    Array a = zeros({1});
    a.data[0] = v;
    return a;
  }
  static Array vec(std::vector<double> v) {
    Array a;
    a.shape = {v.size()};
    a.data = std::move(v);
    return a;
  }
  static Array mat(size_t r, size_t c) { return zeros({r, c}); }

  size_t numel() const { return data.size(); }
  size_t rank() const { return shape.size(); }
  size_t rows() const { return shape.at(0); }
  size_t cols() const { return shape.at(1); }
  bool is_scalar() const { return numel() == 1; }
  bool is_vector() const { return rank() == 1; }
  bool is_matrix() const { return rank() == 2; }

  double& at(size_t i) { return data[i]; }
  double at(size_t i) const { return data[i]; }
  double& at(size_t i, size_t j) { return data[i * cols() + j]; }
  double at(size_t i, size_t j) const { return data[i * cols() + j]; }

  bool same_shape(const Array& o) const { return shape == o.shape; }

  std::string shape_str() const {
    std::string s = "(";
    for (size_t i = 0; i < shape.size(); ++i) {
      if (i) s += "x";
      s += std::to_string(shape[i]);
    }
    return s + ")";
  }
};

}  // namespace navgen
