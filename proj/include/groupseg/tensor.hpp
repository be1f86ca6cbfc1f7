// Copyright (c) 2026 The groupseg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <initializer_list>
#include <iosfwd>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace groupseg {

using Shape = std::vector<std::size_t>;

/// Cache-line aligned storage. Vectorized kernels peel unaligned leading
/// elements, so alignment must not depend on where the heap placed a buffer
/// or results would differ in the last bits from run to run.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};
  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}
  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }
  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept {
    return true;
  }
};

using DoubleBuffer = std::vector<double, AlignedAllocator<double>>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles with an optional gradient accumulator.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double value);
  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor from_rows(const std::vector<std::vector<double>>& rows);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  /// Leading dimension; 1 for scalars.
  std::size_t rows() const;
  /// Product of the trailing dimensions; 1 for rank < 2.
  std::size_t cols() const;

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }

  double item() const;
  std::span<const double> row(std::size_t r) const;
  std::span<double> row(std::size_t r);

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool on) { requires_grad_ = on; }

  bool has_grad() const { return !values_.empty() && grad_.size() == values_.size(); }
  /// Allocates a zeroed gradient if none is present.
  std::span<double> ensure_grad();
  std::span<const double> grad() const { return grad_; }
  std::span<double> grad() { return grad_; }
  void clear_grad() { grad_.clear(); }

  bool all_finite() const;

 private:
  Shape shape_;
  DoubleBuffer values_;
  DoubleBuffer grad_;
  bool requires_grad_ = false;
};

bool all_finite(std::span<const double> values);

/// Plain-text dump: a shape line ("shape d0 d1 ...") then one value per line.
void dump_tensor(std::ostream& out, const Tensor& t);
Tensor read_tensor_dump(std::istream& in);

}  // namespace groupseg
