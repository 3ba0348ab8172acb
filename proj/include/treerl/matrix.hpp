// Copyright 2026 The treerl Authors. All rights reserved.
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

#ifndef TREERL_MATRIX_HPP_
#define TREERL_MATRIX_HPP_

#include <cstddef>
#include <vector>

namespace treerl {

// Row-major dense matrix of doubles. Just enough linear algebra for
// linear-softmax policies and their gradients.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

  double& At(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double At(int r, int c) const {
    return data[static_cast<size_t>(r) * cols + c];
  }

  void SetZero() { std::fill(data.begin(), data.end(), 0.0); }

  bool SameShape(const Matrix& other) const {
    return rows == other.rows && cols == other.cols;
  }
};

}  // namespace treerl

#endif  // TREERL_MATRIX_HPP_
