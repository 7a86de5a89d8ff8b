// Copyright (c) 2026 gpnerf authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <initializer_list>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace gpnerf {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define GPNERF_CHECK(cond, msg)                                    \
  do {                                                             \
    if (!(cond)) throw ::gpnerf::Error(std::string("check failed: ") + msg); \
  } while (0)

/// Dense row-major tensor of doubles. Storage is shared between copies;
/// ops always allocate fresh outputs, so aliasing only matters for code
/// that writes through data() (initializers, the optimizer).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    buf_ = std::make_shared<std::vector<double>>(count(shape_), 0.0);
  }
  Tensor(std::vector<int> shape, double fill) : Tensor(std::move(shape)) {
    for (auto& v : *buf_) v = fill;
  }

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int> shape, double v) { return Tensor(std::move(shape), v); }
  static Tensor scalar(double v) { return Tensor({1}, v); }
  static Tensor from(std::vector<int> shape, std::vector<double> values) {
    Tensor t;
    GPNERF_CHECK(count(shape) == (int64_t)values.size(), "Tensor::from size mismatch");
    t.shape_ = std::move(shape);
    t.buf_ = std::make_shared<std::vector<double>>(std::move(values));
    return t;
  }

  bool defined() const { return buf_ != nullptr; }
  const std::vector<int>& shape() const { return shape_; }
  int dim(int i) const { return shape_.at(i); }
  int rank() const { return (int)shape_.size(); }
  int64_t numel() const { return buf_ ? (int64_t)buf_->size() : 0; }

  double* data() { return buf_->data(); }
  const double* data() const { return buf_->data(); }

  double& operator[](int64_t i) { return (*buf_)[i]; }
  double operator[](int64_t i) const { return (*buf_)[i]; }

  double& at(std::initializer_list<int> idx) { return (*buf_)[offset(idx)]; }
  double at(std::initializer_list<int> idx) const { return (*buf_)[offset(idx)]; }

  Tensor clone() const {
    Tensor t;
    t.shape_ = shape_;
    t.buf_ = std::make_shared<std::vector<double>>(*buf_);
    return t;
  }

  /// Same storage, new shape (element count must match).
  Tensor reshaped(std::vector<int> shape) const {
    GPNERF_CHECK(count(shape) == numel(), "reshape element count mismatch");
    Tensor t;
    t.shape_ = std::move(shape);
    t.buf_ = buf_;
    return t;
  }

  void fill(double v) {
    for (auto& x : *buf_) x = v;
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  static int64_t count(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) {
      GPNERF_CHECK(d >= 0, "negative dim");
      n *= d;
    }
    return n;
  }

  std::string shape_str() const {
    std::string s = "[";
    for (size_t i = 0; i < shape_.size(); ++i) s += (i ? "," : "") + std::to_string(shape_[i]);
    return s + "]";
  }

 private:
  int64_t offset(std::initializer_list<int> idx) const {
    GPNERF_CHECK((int)idx.size() == rank(), "index rank mismatch");
    int64_t off = 0;
    int i = 0;
    for (int v : idx) {
      off = off * shape_[i] + v;
      ++i;
    }
    return off;
  }

  std::vector<int> shape_;
  std::shared_ptr<std::vector<double>> buf_;
};

/// Mask / label companion buffers (no gradients, no arithmetic).
template <typename T>
class Array {
 public:
  Array() = default;
  explicit Array(std::vector<int> shape) : shape_(std::move(shape)) {
    buf_ = std::make_shared<std::vector<T>>(Tensor::count(shape_), T(0));
  }
  static Array from(std::vector<int> shape, std::vector<T> values) {
    Array a;
    GPNERF_CHECK(Tensor::count(shape) == (int64_t)values.size(), "Array::from size mismatch");
    a.shape_ = std::move(shape);
    a.buf_ = std::make_shared<std::vector<T>>(std::move(values));
    return a;
  }
  bool defined() const { return buf_ != nullptr; }
  const std::vector<int>& shape() const { return shape_; }
  int dim(int i) const { return shape_.at(i); }
  int64_t numel() const { return buf_ ? (int64_t)buf_->size() : 0; }
  T* data() { return buf_->data(); }
  const T* data() const { return buf_->data(); }
  T& operator[](int64_t i) { return (*buf_)[i]; }
  T operator[](int64_t i) const { return (*buf_)[i]; }

 private:
  std::vector<int> shape_;
  std::shared_ptr<std::vector<T>> buf_;
};

using MaskArray = Array<uint8_t>;
using LabelArray = Array<int32_t>;

}  // namespace gpnerf
