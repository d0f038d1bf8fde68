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

#include "fock_algebra.hpp"

#include <unsupported/Eigen/KroneckerProduct>
#include <bit>
#include <set>

#include "error.hpp"

namespace pfermion {

namespace {

SparseMatrix diagonal_parity(std::size_t dim) {
    SparseMatrix p{Eigen::Index(dim), Eigen::Index(dim)};
    p.reserve(Eigen::VectorXi::Constant(Eigen::Index(dim), 1));
    for (std::size_t i = 0; i < dim; ++i) {
        p.insert(Eigen::Index(i), Eigen::Index(i)) = (std::popcount(i) % 2) ? -1.0 : 1.0;
    }
    p.makeCompressed();
    return p;
}

void require_power_of_two(const SparseMatrix& m) {
    const auto n = std::size_t(m.rows());
    if (m.rows() != m.cols() || n == 0 || (n & (n - 1)) != 0) {
        fail(ErrorCode::DimensionMismatch, "operator must be square with dimension 2^N");
    }
}

}  // namespace

FockSpaceLayout::FockSpaceLayout(std::vector<std::string> l, int sys, int c)
    : labels(std::move(l)), system_modes(sys), cap(c) {
    validate();
}

int FockSpaceLayout::index_of(const std::string& label) const {
    for (int i = 0; i < size(); ++i) {
        if (labels[i] == label) return i;
    }
    fail(ErrorCode::IndexOutOfRange, "unknown mode label '" + label + "'");
}

void FockSpaceLayout::validate() const {
    std::set<std::string> seen(labels.begin(), labels.end());
    if (seen.size() != labels.size()) fail(ErrorCode::LayoutMismatch, "mode labels must be unique");
    if (system_modes < 0 || system_modes > size()) fail(ErrorCode::LayoutMismatch, "invalid system mode count");
    if (size() > cap) {
        fail(ErrorCode::LayoutMismatch,
             "mode count " + std::to_string(size()) + " exceeds the cap " + std::to_string(cap));
    }
}

const char* parity_name(Parity p) {
    switch (p) {
        case Parity::Even: return "even";
        case Parity::Odd: return "odd";
        case Parity::Mixed: return "mixed";
    }
    return "mixed";
}

FockOperator annihilation(int mode, const FockSpaceLayout& layout) {
    if (mode < 0 || mode >= layout.size()) {
        fail(ErrorCode::IndexOutOfRange, "mode index " + std::to_string(mode) + " out of range");
    }
    const std::size_t dim = layout.dimension();
    const std::size_t bit = std::size_t(1) << mode;
    const std::size_t below = bit - 1;
    std::vector<Eigen::Triplet<cplx>> trips;
    trips.reserve(dim / 2);
    for (std::size_t col = 0; col < dim; ++col) {
        if (!(col & bit)) continue;
        const double sign = (std::popcount(col & below) % 2) ? -1.0 : 1.0;
        trips.emplace_back(Eigen::Index(col ^ bit), Eigen::Index(col), sign);
    }
    FockOperator op;
    op.matrix.resize(Eigen::Index(dim), Eigen::Index(dim));
    op.matrix.setFromTriplets(trips.begin(), trips.end());
    op.parity = Parity::Odd;
    return op;
}

FockOperator creation(int mode, const FockSpaceLayout& layout) {
    FockOperator op = annihilation(mode, layout);
    op.matrix = SparseMatrix(op.matrix.adjoint());
    return op;
}

FockOperator number(int mode, const FockSpaceLayout& layout) {
    FockOperator op;
    op.matrix = creation(mode, layout).matrix * annihilation(mode, layout).matrix;
    op.parity = Parity::Even;
    return op;
}

FockOperator parity_operator(const FockSpaceLayout& layout) {
    return {diagonal_parity(layout.dimension()), Parity::Even};
}

FockOperator identity(const FockSpaceLayout& layout) {
    SparseMatrix id(Eigen::Index(layout.dimension()), Eigen::Index(layout.dimension()));
    id.setIdentity();
    return {id, Parity::Even};
}

Parity classify_parity(const SparseMatrix& op, double tol) {
    require_power_of_two(op);
    bool even = true, odd = true;
    for (Eigen::Index k = 0; k < op.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator it(op, k); it; ++it) {
            if (std::abs(it.value()) <= tol) continue;
            const bool flips = (std::popcount(std::size_t(it.row()) ^ std::size_t(it.col())) % 2) != 0;
            if (flips) even = false;
            else odd = false;
        }
    }
    if (even) return Parity::Even;
    if (odd) return Parity::Odd;
    return Parity::Mixed;
}

ParityParts parity_decompose(const SparseMatrix& op) {
    require_power_of_two(op);
    const SparseMatrix p = diagonal_parity(std::size_t(op.rows()));
    const SparseMatrix conj = p * op * p;
    return {0.5 * (op + conj), 0.5 * (op - conj)};
}

SparseMatrix superop_left(const SparseMatrix& a) {
    require_power_of_two(a);
    SparseMatrix id(a.rows(), a.cols());
    id.setIdentity();
    return Eigen::kroneckerProduct(id, a);
}

SparseMatrix superop_right(const SparseMatrix& b) {
    require_power_of_two(b);
    SparseMatrix id(b.rows(), b.cols());
    id.setIdentity();
    return Eigen::kroneckerProduct(SparseMatrix(b.transpose()), id);
}

SparseMatrix superop_parity_sandwich(const SparseMatrix& o) {
    require_power_of_two(o);
    const SparseMatrix p = diagonal_parity(std::size_t(o.rows()));
    const SparseMatrix left = o * p;
    const SparseMatrix right = p * SparseMatrix(o.adjoint());
    return superop_left(left) * superop_right(right);
}

Eigen::VectorXcd vec(const DenseMatrix& x) {
    return Eigen::Map<const Eigen::VectorXcd>(x.data(), x.size());
}

DenseMatrix unvec(const Eigen::VectorXcd& v, Eigen::Index dim) {
    if (v.size() != dim * dim) fail(ErrorCode::DimensionMismatch, "vector length must be dim^2");
    return Eigen::Map<const DenseMatrix>(v.data(), dim, dim);
}

}  // namespace pfermion
