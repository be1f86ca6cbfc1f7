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

#include "groupseg/tensor.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "groupseg/error.hpp"

namespace groupseg {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), values_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(values.begin(), values.end()) {
  if (shape_size(shape_) != values_.size()) {
    throw ValidationError("tensor shape " + shape_string(shape_) + " does not match " +
                          std::to_string(values_.size()) + " values");
  }
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, std::vector<double>{value}); }

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, double fill) { return Tensor(Shape{rows, cols}, fill); }

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> v;
  v.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ValidationError("ragged rows in Tensor::from_rows");
    v.insert(v.end(), row.begin(), row.end());
  }
  return Tensor(Shape{r, c}, std::move(v));
}

Tensor Tensor::from_rows(const std::vector<std::vector<double>>& rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.front().size() : 0;
  std::vector<double> v;
  v.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ValidationError("ragged rows in Tensor::from_rows");
    v.insert(v.end(), row.begin(), row.end());
  }
  return Tensor(Shape{r, c}, std::move(v));
}

std::size_t Tensor::rows() const { return shape_.empty() ? 1 : shape_[0]; }

std::size_t Tensor::cols() const {
  std::size_t c = 1;
  for (std::size_t i = 1; i < shape_.size(); ++i) c *= shape_[i];
  return c;
}

double Tensor::item() const {
  if (values_.size() != 1) throw ValidationError("item() on tensor of shape " + shape_string(shape_));
  return values_[0];
}

std::span<const double> Tensor::row(std::size_t r) const {
  return std::span<const double>(values_).subspan(r * cols(), cols());
}

std::span<double> Tensor::row(std::size_t r) { return std::span<double>(values_).subspan(r * cols(), cols()); }

std::span<double> Tensor::ensure_grad() {
  if (grad_.size() != values_.size()) grad_.assign(values_.size(), 0.0);
  return grad_;
}

bool Tensor::all_finite() const { return groupseg::all_finite(values_) && groupseg::all_finite(grad_); }

bool all_finite(std::span<const double> values) {
  // v·0 is NaN exactly when v is NaN or ±Inf; the sum keeps the loop branch-free.
  double acc = 0.0;
  for (double v : values) acc += v * 0.0;
  return acc == 0.0;
}

void dump_tensor(std::ostream& out, const Tensor& t) {
  out << "shape";
  for (auto d : t.shape()) out << ' ' << d;
  out << '\n';
  char buf[40];
  for (double v : t.values()) {
    std::snprintf(buf, sizeof buf, "%.17g\n", v);
    out << buf;
  }
}

Tensor read_tensor_dump(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("tensor dump: missing shape line");
  std::istringstream header(line);
  std::string tag;
  header >> tag;
  if (tag != "shape") throw ValidationError("tensor dump: expected 'shape', got '" + tag + "'");
  Shape shape;
  std::size_t d;
  while (header >> d) shape.push_back(d);
  std::vector<double> values(shape_size(shape));
  for (auto& v : values) {
    if (!(in >> v)) throw ValidationError("tensor dump: truncated values");
  }
  in >> std::ws;
  return Tensor(std::move(shape), std::move(values));
}

}  // namespace groupseg
