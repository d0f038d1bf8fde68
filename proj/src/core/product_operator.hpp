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

#include <Eigen/Dense>
#include <vector>

#include "fock_algebra.hpp"

namespace pfermion {

using Local2 = Eigen::Matrix2cd;

// coefficient * (factor_0 kron ... kron factor_{N-1}) in the Jordan-Wigner qubit picture
struct ProductOperator {
    cplx coefficient = 1.0;
    std::vector<Local2> factors;

    int modes() const { return int(factors.size()); }
    bool is_odd() const;
};

class OperatorSum {
public:
    explicit OperatorSum(int modes = 0) : modes_(modes) {}

    static OperatorSum identity(int modes);
    static OperatorSum annihilation(int mode, int modes);
    static OperatorSum creation(int mode, int modes);
    static OperatorSum number(int mode, int modes);
    // Dense matrix on the first k modes (bit i = mode i), identity elsewhere.
    static OperatorSum from_leading_matrix(const DenseMatrix& m, int modes);

    int modes() const { return modes_; }
    const std::vector<ProductOperator>& terms() const { return terms_; }
    bool empty() const { return terms_.empty(); }

    void add(const ProductOperator& p);
    OperatorSum& operator+=(const OperatorSum& o);
    OperatorSum operator+(const OperatorSum& o) const;
    OperatorSum operator*(const OperatorSum& o) const;
    OperatorSum operator*(cplx s) const;
    OperatorSum adjoint() const;
    // Merge terms with identical factors and drop zeros.
    OperatorSum simplified() const;

    Parity parity() const;
    SparseMatrix to_sparse() const;

private:
    int modes_;
    std::vector<ProductOperator> terms_;
};

}  // namespace pfermion
