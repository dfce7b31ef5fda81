#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "tga/error.hpp"

namespace tga {

// Dense row-major tensor of rank 1 or 2. Matrices use [rows][cols] layout;
// a matrix mapping R^in -> R^out is stored as [out, in].
template <class S>
struct Tensor {
  std::vector<uint32_t> dims;
  std::vector<S> data;

  Tensor() = default;

  explicit Tensor(uint32_t n) : dims{n}, data(n, S(0)) {}

  Tensor(uint32_t rows, uint32_t cols)
      : dims{rows, cols}, data(static_cast<size_t>(rows) * cols, S(0)) {}

  size_t size() const { return data.size(); }
  uint32_t rows() const { return dims.empty() ? 0 : dims[0]; }
  uint32_t cols() const { return dims.size() < 2 ? 1 : dims[1]; }

  S& operator[](size_t i) { return data[i]; }
  const S& operator[](size_t i) const { return data[i]; }

  S& at(size_t r, size_t c) { return data[r * cols() + c]; }
  const S& at(size_t r, size_t c) const { return data[r * cols() + c]; }

  void fill(S v) {
    for (auto& x : data) x = v;
  }

  template <class T>
  Tensor<T> cast() const {
    Tensor<T> out;
    out.dims = dims;
    out.data.resize(data.size());
    for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<T>(data[i]);
    return out;
  }
};

template <class S>
inline void check_same_shape(const Tensor<S>& a, const Tensor<S>& b,
                             const std::string& what) {
  if (a.dims != b.dims) throw NumericError("shape mismatch in " + what);
}

}  // namespace tga
