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

#include "product_operator.hpp"

#include <map>

#include "error.hpp"

namespace pfermion {

namespace {

enum class LocalParity { Zero, Even, Odd, Mixed };

LocalParity local_parity(const Local2& m) {
    const bool diag = m(0, 0) != 0.0 || m(1, 1) != 0.0;
    const bool off = m(0, 1) != 0.0 || m(1, 0) != 0.0;
    if (diag && off) return LocalParity::Mixed;
    if (off) return LocalParity::Odd;
    if (diag) return LocalParity::Even;
    return LocalParity::Zero;
}

Local2 lowering() {
    Local2 a = Local2::Zero();
    a(0, 1) = 1.0;
    return a;
}

Local2 pauli_z() {
    Local2 z = Local2::Zero();
    z(0, 0) = 1.0;
    z(1, 1) = -1.0;
    return z;
}

std::vector<double> key_of(const ProductOperator& p) {
    std::vector<double> k;
    k.reserve(8 * p.factors.size());
    for (const auto& f : p.factors) {
        for (int i = 0; i < 4; ++i) {
            k.push_back(f.data()[i].real());
            k.push_back(f.data()[i].imag());
        }
    }
    return k;
}

}  // namespace

bool ProductOperator::is_odd() const {
    int odd = 0;
    for (const auto& f : factors) {
        if (local_parity(f) == LocalParity::Odd) ++odd;
    }
    return odd % 2 == 1;
}

OperatorSum OperatorSum::identity(int modes) {
    OperatorSum s(modes);
    s.terms_.push_back({1.0, std::vector<Local2>(modes, Local2::Identity())});
    return s;
}

OperatorSum OperatorSum::annihilation(int mode, int modes) {
    if (mode < 0 || mode >= modes) fail(ErrorCode::IndexOutOfRange, "mode index out of range");
    ProductOperator p{1.0, std::vector<Local2>(modes, Local2::Identity())};
    for (int k = 0; k < mode; ++k) p.factors[k] = pauli_z();
    p.factors[mode] = lowering();
    OperatorSum s(modes);
    s.terms_.push_back(p);
    return s;
}

OperatorSum OperatorSum::creation(int mode, int modes) { return annihilation(mode, modes).adjoint(); }

OperatorSum OperatorSum::number(int mode, int modes) {
    if (mode < 0 || mode >= modes) fail(ErrorCode::IndexOutOfRange, "mode index out of range");
    ProductOperator p{1.0, std::vector<Local2>(modes, Local2::Identity())};
    p.factors[mode] = Local2::Zero();
    p.factors[mode](1, 1) = 1.0;
    OperatorSum s(modes);
    s.terms_.push_back(p);
    return s;
}

OperatorSum OperatorSum::from_leading_matrix(const DenseMatrix& m, int modes) {
    const Eigen::Index dim = m.rows();
    int k = 0;
    while ((Eigen::Index(1) << k) < dim) ++k;
    if (m.cols() != dim || (Eigen::Index(1) << k) != dim || k > modes) {
        fail(ErrorCode::DimensionMismatch, "matrix must be 2^k x 2^k with k not exceeding the mode count");
    }
    OperatorSum s(modes);
    for (Eigen::Index a = 0; a < dim; ++a) {
        for (Eigen::Index b = 0; b < dim; ++b) {
            if (m(a, b) == 0.0) continue;
            ProductOperator p{m(a, b), std::vector<Local2>(modes, Local2::Identity())};
            for (int j = 0; j < k; ++j) {
                p.factors[j] = Local2::Zero();
                p.factors[j]((a >> j) & 1, (b >> j) & 1) = 1.0;
            }
            s.terms_.push_back(p);
        }
    }
    return s;
}

void OperatorSum::add(const ProductOperator& p) {
    if (p.modes() != modes_) fail(ErrorCode::DimensionMismatch, "product operator mode count mismatch");
    terms_.push_back(p);
}

OperatorSum& OperatorSum::operator+=(const OperatorSum& o) {
    if (o.modes_ != modes_) fail(ErrorCode::DimensionMismatch, "operator mode count mismatch");
    terms_.insert(terms_.end(), o.terms_.begin(), o.terms_.end());
    return *this;
}

OperatorSum OperatorSum::operator+(const OperatorSum& o) const {
    OperatorSum s = *this;
    s += o;
    return s;
}

OperatorSum OperatorSum::operator*(const OperatorSum& o) const {
    if (o.modes_ != modes_) fail(ErrorCode::DimensionMismatch, "operator mode count mismatch");
    OperatorSum s(modes_);
    for (const auto& a : terms_) {
        for (const auto& b : o.terms_) {
            ProductOperator p{a.coefficient * b.coefficient, std::vector<Local2>(modes_)};
            bool zero = false;
            for (int j = 0; j < modes_; ++j) {
                p.factors[j] = a.factors[j] * b.factors[j];
                if (p.factors[j].isZero(0.0)) zero = true;
            }
            if (!zero) s.terms_.push_back(p);
        }
    }
    return s.simplified();
}

OperatorSum OperatorSum::operator*(cplx c) const {
    OperatorSum s = *this;
    for (auto& t : s.terms_) t.coefficient *= c;
    return s;
}

OperatorSum OperatorSum::adjoint() const {
    OperatorSum s = *this;
    for (auto& t : s.terms_) {
        t.coefficient = std::conj(t.coefficient);
        for (auto& f : t.factors) f = f.adjoint().eval();
    }
    return s;
}

OperatorSum OperatorSum::simplified() const {
    OperatorSum s(modes_);
    std::map<std::vector<double>, std::size_t> index;
    for (const auto& t : terms_) {
        auto key = key_of(t);
        auto it = index.find(key);
        if (it == index.end()) {
            index.emplace(std::move(key), s.terms_.size());
            s.terms_.push_back(t);
        } else {
            s.terms_[it->second].coefficient += t.coefficient;
        }
    }
    std::erase_if(s.terms_, [](const ProductOperator& p) { return p.coefficient == 0.0; });
    return s;
}

Parity OperatorSum::parity() const {
    bool even = false, odd = false;
    for (const auto& t : terms_) {
        int n_odd = 0;
        for (const auto& f : t.factors) {
            const auto lp = local_parity(f);
            if (lp == LocalParity::Mixed) return Parity::Mixed;
            if (lp == LocalParity::Odd) ++n_odd;
        }
        (n_odd % 2 ? odd : even) = true;
    }
    if (odd && even) return Parity::Mixed;
    return odd ? Parity::Odd : Parity::Even;
}

SparseMatrix OperatorSum::to_sparse() const {
    const std::size_t dim = std::size_t(1) << modes_;
    std::vector<Eigen::Triplet<cplx>> trips;
    for (const auto& t : terms_) {
        for (std::size_t col = 0; col < dim; ++col) {
            std::vector<std::pair<std::size_t, cplx>> out{{0, t.coefficient}};
            for (int j = 0; j < modes_ && !out.empty(); ++j) {
                const int b = int((col >> j) & 1);
                std::vector<std::pair<std::size_t, cplx>> next;
                for (int a = 0; a < 2; ++a) {
                    const cplx v = t.factors[j](a, b);
                    if (v == 0.0) continue;
                    for (const auto& [row, c] : out) next.emplace_back(row | (std::size_t(a) << j), c * v);
                }
                out.swap(next);
            }
            for (const auto& [row, c] : out) trips.emplace_back(Eigen::Index(row), Eigen::Index(col), c);
        }
    }
    SparseMatrix m{Eigen::Index(dim), Eigen::Index(dim)};
    m.setFromTriplets(trips.begin(), trips.end());
    m.prune(cplx(0.0));
    return m;
}

}  // namespace pfermion
