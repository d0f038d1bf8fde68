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
#include <Eigen/Sparse>
#include <cstdint>
#include <utility>
#include <vector>

#include "product_operator.hpp"

namespace pfermion {

// Per-mode operator basis {I, Z, |1><0|, |0><1|} (local index l = 0..3), each element scaled by a weight.
// I and Z weights depend on the parity of the odd factors on later modes (string parity):
// even string: (1, wz); odd string: (wz, 1). Coherences carry wc.
struct LocalScaling {
    double wz = 1.0;
    double wc = 1.0;
};

LocalScaling scaling_for_occupation(cplx occupation);

using Local4 = Eigen::Matrix4cd;  // column = input local index

// coefficient * tensor product of local superoperator factors (identity elsewhere)
struct SuperTerm {
    cplx coefficient = 1.0;
    std::vector<std::pair<int, Local4>> factors;
};

enum Sector : int { kEven = 0, kOdd = 1 };

// Operator space of N modes split into even and odd operator-parity sectors.
class OperatorSpace {
public:
    OperatorSpace() = default;
    explicit OperatorSpace(std::vector<LocalScaling> scaling);

    int modes() const { return int(scaling_.size()); }
    const std::vector<LocalScaling>& scaling() const { return scaling_; }
    std::size_t sector_dimension() const { return std::size_t(1) << (2 * modes() - 1); }

    // Global index: local index of mode j in bits 2j, 2j+1.
    std::uint64_t decode(std::size_t position, int sector) const;
    std::size_t encode(std::uint64_t g) const;
    static int sector_of(std::uint64_t g);
    static int local_index(std::uint64_t g, int mode) { return int((g >> (2 * mode)) & 3u); }

    static bool string_odd(std::uint64_t g, int mode);
    double local_weight(int l, int mode, bool string_odd) const;
    double weight(std::uint64_t g) const;  // product of local weights
    static Local2 pauli(int l);            // unscaled basis element

    // Unscaled local factors in the Pauli basis.
    static Local4 left(const Local2& a);
    static Local4 right(const Local2& a);
    // Closed-form local dissipator pieces: D = G (A + B kron S_{k>j})
    static Local4 dissipator_local(cplx occupation);
    static Local4 dissipator_string_part(cplx occupation);
    static Local4 parity_sign();

    std::vector<SuperTerm> left_terms(const OperatorSum& op, cplx scale = 1.0) const;
    std::vector<SuperTerm> right_terms(const OperatorSum& op, cplx scale = 1.0) const;

    SparseMatrix assemble(const std::vector<SuperTerm>& terms, int sector) const;
    Eigen::VectorXcd apply(const std::vector<SuperTerm>& terms, const Eigen::VectorXcd& x, int sector_in,
                           int sector_out) const;

    // f with Tr[op x] = f^T x for x in the given sector.
    Eigen::VectorXcd trace_functional(const OperatorSum& op, int sector) const;
    double trace_weight() const;  // Tr of the all-identity basis element

    // Coefficients of a product state prod_j m_j (each m_j a 2x2 matrix).
    Eigen::VectorXcd product_state(const std::vector<Local2>& factors, int sector) const;
    // Coefficients of a dense operator on all modes (bit j = mode j).
    std::pair<Eigen::VectorXcd, Eigen::VectorXcd> from_dense(const DenseMatrix& x) const;
    DenseMatrix to_dense(const Eigen::VectorXcd& even, const Eigen::VectorXcd& odd) const;
    // Partial trace over modes >= keep (the leading modes are retained).
    DenseMatrix reduced(const Eigen::VectorXcd& even, const Eigen::VectorXcd& odd, int keep) const;

private:
    std::vector<LocalScaling> scaling_;
};

}  // namespace pfermion
