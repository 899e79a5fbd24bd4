#ifndef SIGSPP_TENSOR_HPP_
#define SIGSPP_TENSOR_HPP_

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "sigspp/errors.hpp"

namespace sigspp {

// Rank-4 array in (batch, channels, height, width) order, contiguous
// row-major storage. Carrier for activations, gradients and conv weights
// (filters, in_channels, kh, kw).
template <typename T>
class Tensor4 {
public:
  Tensor4() = default;

  Tensor4(int n, int c, int h, int w) : n_(n), c_(c), h_(h), w_(w) {
    if (n < 0 || c < 0 || h < 0 || w < 0) {
      throw ShapeError("Tensor4: negative dimension");
    }
    data_.assign(static_cast<std::size_t>(n) * c * h * w, T(0));
  }

  int batch() const { return n_; }
  int channels() const { return c_; }
  int height() const { return h_; }
  int width() const { return w_; }
  std::array<int, 4> dims() const { return {n_, c_, h_, w_}; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator()(int n, int c, int h, int w) {
    return data_[index(n, c, h, w)];
  }
  const T& operator()(int n, int c, int h, int w) const {
    return data_[index(n, c, h, w)];
  }

  T& flat(std::size_t i) { return data_[i]; }
  const T& flat(std::size_t i) const { return data_[i]; }

  std::size_t index(int n, int c, int h, int w) const {
    return ((static_cast<std::size_t>(n) * c_ + c) * h_ + h) * w_ + w;
  }

  bool same_shape(const Tensor4& other) const {
    return n_ == other.n_ && c_ == other.c_ && h_ == other.h_ && w_ == other.w_;
  }

  bool all_finite() const {
    for (const T& v : data_) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

  void fill(T value) { data_.assign(data_.size(), value); }

  std::string shape_string() const {
    return "(" + std::to_string(n_) + "," + std::to_string(c_) + "," +
           std::to_string(h_) + "," + std::to_string(w_) + ")";
  }

  template <typename U>
  Tensor4<U> cast() const {
    Tensor4<U> out(n_, c_, h_, w_);
    for (std::size_t i = 0; i < data_.size(); ++i) {
      out.flat(i) = static_cast<U>(data_[i]);
    }
    return out;
  }

private:
  int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
  std::vector<T> data_;
};

}  // namespace sigspp

#endif  // SIGSPP_TENSOR_HPP_
