// Copyright 2026 The p2pfl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "p2pfl/errors.hpp"

namespace p2pfl {

// One tensor in a flattened parameter vector, stored row-major.
struct TensorShape {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const { return rows * cols; }
  bool operator==(const TensorShape&) const = default;
};

using Layout = std::vector<TensorShape>;

inline std::size_t layout_size(const Layout& layout) {
  std::size_t n = 0;
  for (const auto& t : layout) n += t.size();
  return n;
}

// Flat model parameters plus the layout that fixes the flattening order. This
// is the unit nodes exchange: models, model deltas and gradients all use it.
class ParamVector {
 public:
  ParamVector() = default;

  explicit ParamVector(Layout layout)
      : layout_(std::move(layout)), values_(layout_size(layout_), 0.0) {}

  ParamVector(Layout layout, std::vector<double> values)
      : layout_(std::move(layout)), values_(std::move(values)) {
    if (values_.size() != layout_size(layout_)) {
      throw InvalidArgument("ParamVector: " + std::to_string(values_.size()) +
                            " values do not match layout size " +
                            std::to_string(layout_size(layout_)));
    }
  }

  const Layout& layout() const { return layout_; }
  std::size_t size() const { return values_.size(); }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  // Offset of tensor `index` inside values().
  std::size_t offset(std::size_t index) const {
    std::size_t off = 0;
    for (std::size_t i = 0; i < index; ++i) off += layout_[i].size();
    return off;
  }

  std::span<double> tensor(std::size_t index) {
    return values().subspan(offset(index), layout_[index].size());
  }
  std::span<const double> tensor(std::size_t index) const {
    return values().subspan(offset(index), layout_[index].size());
  }

  bool same_layout(const ParamVector& other) const {
    return layout_ == other.layout_;
  }

  bool all_finite() const {
    for (double v : values_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  double norm() const {
    double s = 0.0;
    for (double v : values_) s += v * v;
    return std::sqrt(s);
  }

  ParamVector& operator+=(const ParamVector& other) {
    require_same_layout(other, "operator+=");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other[i];
    return *this;
  }

  ParamVector& operator-=(const ParamVector& other) {
    require_same_layout(other, "operator-=");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other[i];
    return *this;
  }

  ParamVector& operator*=(double s) {
    for (double& v : values_) v *= s;
    return *this;
  }

  void require_same_layout(const ParamVector& other, const char* what) const {
    if (!same_layout(other)) {
      throw InvalidArgument(std::string(what) + ": parameter layout mismatch");
    }
  }

  bool operator==(const ParamVector&) const = default;

 private:
  Layout layout_;
  std::vector<double> values_;
};

inline ParamVector operator+(ParamVector a, const ParamVector& b) {
  a += b;
  return a;
}
inline ParamVector operator-(ParamVector a, const ParamVector& b) {
  a -= b;
  return a;
}
inline ParamVector operator*(ParamVector a, double s) {
  a *= s;
  return a;
}

}  // namespace p2pfl
