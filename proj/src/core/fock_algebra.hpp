// Copyright 2025 The pfermion Authors
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

#include <Eigen/Sparse>
#include <complex>
#include <string>
#include <vector>

namespace pfermion {

using cplx = std::complex<double>;
using SparseMatrix = Eigen::SparseMatrix<cplx, Eigen::ColMajor>;
using DenseMatrix = Eigen::MatrixXcd;

inline constexpr int kDefaultModeCap = 16;

// Mode order fixes the Jordan-Wigner strings; bit i of a Fock index is mode i.
struct FockSpaceLayout {
    std::vector<std::string> labels;
    int system_modes = 0;
    int cap = kDefaultModeCap;

    FockSpaceLayout() = default;
    FockSpaceLayout(std::vector<std::string> labels, int system_modes, int cap = kDefaultModeCap);

    int size() const { return int(labels.size()); }
    std::size_t dimension() const { return std::size_t(1) << labels.size(); }
    int index_of(const std::string& label) const;
    void validate() const;
};

enum class Parity { Even, Odd, Mixed };

const char* parity_name(Parity p);

struct FockOperator {
    SparseMatrix matrix;
    Parity parity = Parity::Mixed;
};

FockOperator annihilation(int mode, const FockSpaceLayout& layout);
FockOperator creation(int mode, const FockSpaceLayout& layout);
FockOperator number(int mode, const FockSpaceLayout& layout);
FockOperator parity_operator(const FockSpaceLayout& layout);
FockOperator identity(const FockSpaceLayout& layout);

Parity classify_parity(const SparseMatrix& op, double tol = 1e-12);

struct ParityParts {
    SparseMatrix even;
    SparseMatrix odd;
};
ParityParts parity_decompose(const SparseMatrix& op);

// Column-stacked superoperators: vec(A X B) = (B^T kron A) vec(X).
SparseMatrix superop_left(const SparseMatrix& a);
SparseMatrix superop_right(const SparseMatrix& b);
// X -> O (P X P) O^dagger
SparseMatrix superop_parity_sandwich(const SparseMatrix& o);

Eigen::VectorXcd vec(const DenseMatrix& x);
DenseMatrix unvec(const Eigen::VectorXcd& v, Eigen::Index dim);

}  // namespace pfermion
