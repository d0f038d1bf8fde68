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

#include "operator_space.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "error.hpp"

namespace pfermion {

namespace {

struct Entry {
    std::uint64_t g;
    cplx value;
};

// Nonzero outputs of each local column.
struct LocalColumns {
    int mode;
    std::array<std::array<std::pair<int, cplx>, 4>, 4> out;
    std::array<int, 4> count{};
};

LocalColumns compile(int mode, const Local4& m) {
    LocalColumns c;
    c.mode = mode;
    for (int in = 0; in < 4; ++in) {
        for (int o = 0; o < 4; ++o) {
            if (m(o, in) != 0.0) c.out[in][c.count[in]++] = {o, m(o, in)};
        }
    }
    return c;
}

struct CompiledTerm {
    cplx coefficient;
    std::vector<LocalColumns> factors;
};

std::vector<CompiledTerm> compile_terms(const std::vector<SuperTerm>& terms, int modes) {
    std::vector<CompiledTerm> out;
    out.reserve(terms.size());
    for (const auto& t : terms) {
        CompiledTerm c{t.coefficient, {}};
        for (const auto& [mode, m] : t.factors) {
            if (mode < 0 || mode >= modes) fail(ErrorCode::IndexOutOfRange, "superoperator factor mode out of range");
            c.factors.push_back(compile(mode, m));
        }
        std::sort(c.factors.begin(), c.factors.end(),
                  [](const LocalColumns& a, const LocalColumns& b) { return a.mode < b.mode; });
        out.push_back(std::move(c));
    }
    return out;
}

// Append the image of basis element g under one compiled term.
void expand(const CompiledTerm& t, std::uint64_t g, cplx scale, std::vector<Entry>& sink) {
    const std::size_t start = sink.size();
    sink.push_back({g, t.coefficient * scale});
    for (const auto& f : t.factors) {
        const int shift = 2 * f.mode;
        const int l = int((g >> shift) & 3u);
        const int n = f.count[l];
        const std::size_t end = sink.size();
        if (n == 0) {
            sink.resize(start);
            return;
        }
        for (std::size_t i = start; i < end; ++i) {
            const Entry e = sink[i];
            const std::uint64_t cleared = e.g & ~(std::uint64_t(3) << shift);
            sink[i] = {cleared | (std::uint64_t(f.out[l][0].first) << shift), e.value * f.out[l][0].second};
            for (int k = 1; k < n; ++k) {
                sink.push_back({cleared | (std::uint64_t(f.out[l][k].first) << shift), e.value * f.out[l][k].second});
            }
        }
    }
}

}  // namespace

LocalScaling scaling_for_occupation(cplx n) {
    LocalScaling s;
    s.wz = std::max(1.0, std::abs(1.0 - 2.0 * n));
    s.wc = std::max(1.0, std::sqrt(std::abs(n)));
    return s;
}

OperatorSpace::OperatorSpace(std::vector<LocalScaling> scaling) : scaling_(std::move(scaling)) {
    if (scaling_.empty()) fail(ErrorCode::InvalidArgument, "operator space needs at least one mode");
    if (scaling_.size() > 31) fail(ErrorCode::InvalidArgument, "too many modes for the operator space");
    for (const auto& s : scaling_) {
        if (!(s.wz > 0.0) || !(s.wc > 0.0)) fail(ErrorCode::InvalidArgument, "basis weights must be positive");
    }
}

std::uint64_t OperatorSpace::decode(std::size_t p, int sector) const {
    const int N = modes();
    std::uint64_t g = 0;
    int parity = 0;
    for (int j = 0; j < N; ++j) {
        std::uint64_t low = (p >> j) & 1u;
        std::uint64_t odd;
        if (j < N - 1) {
            odd = (p >> (N + j)) & 1u;
            parity ^= int(odd);
        } else {
            odd = std::uint64_t(parity ^ sector);
        }
        g |= (low | (odd << 1)) << (2 * j);
    }
    return g;
}

std::size_t OperatorSpace::encode(std::uint64_t g) const {
    const int N = modes();
    std::size_t p = 0;
    for (int j = 0; j < N; ++j) {
        const std::uint64_t l = (g >> (2 * j)) & 3u;
        p |= std::size_t(l & 1u) << j;
        if (j < N - 1) p |= std::size_t(l >> 1) << (N + j);
    }
    return p;
}

int OperatorSpace::sector_of(std::uint64_t g) {
    std::uint64_t odd = (g >> 1) & 0x5555555555555555ull;
    return std::popcount(odd) & 1;
}

bool OperatorSpace::string_odd(std::uint64_t g, int mode) {
    const std::uint64_t later = (g >> (2 * mode + 2)) >> 1;
    return std::popcount(later & 0x5555555555555555ull) & 1;
}

double OperatorSpace::local_weight(int l, int mode, bool odd) const {
    const auto& s = scaling_[mode];
    switch (l) {
        case 0: return odd ? s.wz : 1.0;
        case 1: return odd ? 1.0 : s.wz;
        default: return s.wc;
    }
}

double OperatorSpace::weight(std::uint64_t g) const {
    double w = 1.0;
    bool odd = false;
    for (int j = modes() - 1; j >= 0; --j) {
        const int l = local_index(g, j);
        w *= local_weight(l, j, odd);
        if (l >= 2) odd = !odd;
    }
    return w;
}

Local2 OperatorSpace::pauli(int l) {
    Local2 m = Local2::Zero();
    switch (l) {
        case 0: m(0, 0) = 1.0; m(1, 1) = 1.0; break;
        case 1: m(0, 0) = 1.0; m(1, 1) = -1.0; break;
        case 2: m(1, 0) = 1.0; break;
        default: m(0, 1) = 1.0; break;
    }
    return m;
}

Local4 OperatorSpace::left(const Local2& a) {
    const cplx a00 = a(0, 0), a01 = a(0, 1), a10 = a(1, 0), a11 = a(1, 1);
    const cplx sp = 0.5 * (a00 + a11), sm = 0.5 * (a00 - a11);
    Local4 s;
    // columns: image of I, Z, |1><0|, |0><1|
    s << sp, sm, 0.5 * a01, 0.5 * a10,
         sm, sp, 0.5 * a01, -0.5 * a10,
         a10, a10, a11, 0.0,
         a01, -a01, 0.0, a00;
    return s;
}

Local4 OperatorSpace::right(const Local2& a) {
    const cplx a00 = a(0, 0), a01 = a(0, 1), a10 = a(1, 0), a11 = a(1, 1);
    const cplx sp = 0.5 * (a00 + a11), sm = 0.5 * (a00 - a11);
    Local4 s;
    s << sp, sm, 0.5 * a01, 0.5 * a10,
         sm, sp, -0.5 * a01, 0.5 * a10,
         a10, -a10, a00, 0.0,
         a01, a01, 0.0, a11;
    return s;
}

Local4 OperatorSpace::dissipator_local(cplx n) {
    const cplx q = 1.0 - 2.0 * n;
    Local4 s = Local4::Zero();
    s(0, 0) = -1.0;
    s(1, 0) = q;
    s(0, 1) = q;
    s(1, 1) = -1.0;
    s(2, 2) = -1.0;
    s(3, 3) = -1.0;
    return s;
}

Local4 OperatorSpace::dissipator_string_part(cplx n) {
    const cplx q = 1.0 - 2.0 * n;
    Local4 s = Local4::Zero();
    s(0, 0) = 1.0;
    s(1, 0) = q;
    s(0, 1) = -q;
    s(1, 1) = -1.0;
    return s;
}

Local4 OperatorSpace::parity_sign() {
    Local4 s = Local4::Zero();
    s(0, 0) = 1.0;
    s(1, 1) = 1.0;
    s(2, 2) = -1.0;
    s(3, 3) = -1.0;
    return s;
}

std::vector<SuperTerm> OperatorSpace::left_terms(const OperatorSum& op, cplx scale) const {
    if (op.modes() != modes()) fail(ErrorCode::DimensionMismatch, "operator does not match the operator space");
    std::vector<SuperTerm> out;
    for (const auto& t : op.terms()) {
        SuperTerm s{t.coefficient * scale, {}};
        for (int j = 0; j < modes(); ++j) {
            if (t.factors[j] != Local2::Identity()) s.factors.emplace_back(j, left(t.factors[j]));
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<SuperTerm> OperatorSpace::right_terms(const OperatorSum& op, cplx scale) const {
    if (op.modes() != modes()) fail(ErrorCode::DimensionMismatch, "operator does not match the operator space");
    std::vector<SuperTerm> out;
    for (const auto& t : op.terms()) {
        SuperTerm s{t.coefficient * scale, {}};
        for (int j = 0; j < modes(); ++j) {
            if (t.factors[j] != Local2::Identity()) s.factors.emplace_back(j, right(t.factors[j]));
        }
        out.push_back(std::move(s));
    }
    return out;
}

SparseMatrix OperatorSpace::assemble(const std::vector<SuperTerm>& terms, int sector) const {
    const auto compiled = compile_terms(terms, modes());
    const std::size_t dim = sector_dimension();
    SparseMatrix m{Eigen::Index(dim), Eigen::Index(dim)};
    std::vector<Entry> col;
    std::vector<std::pair<std::size_t, cplx>> rows;
    std::vector<Eigen::Index> nnz_per_col(dim);
    std::vector<std::vector<std::pair<std::size_t, cplx>>> chunks;
    // two passes: count then fill, so the matrix is built in compressed order
    std::vector<Eigen::Index> outer(dim + 1, 0);
    std::vector<Eigen::Index> inner;
    std::vector<cplx> values;
    for (std::size_t p = 0; p < dim; ++p) {
        const std::uint64_t g = decode(p, sector);
        const double w_in = weight(g);
        col.clear();
        for (const auto& t : compiled) expand(t, g, 1.0, col);
        rows.clear();
        for (const auto& e : col) {
            if (sector_of(e.g) != sector) fail(ErrorCode::ParityViolation, "superoperator term changes operator parity");
            rows.emplace_back(encode(e.g), e.value * (w_in / weight(e.g)));
        }
        std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        std::size_t i = 0;
        while (i < rows.size()) {
            const std::size_t r = rows[i].first;
            cplx v = rows[i].second;
            std::size_t j = i + 1;
            while (j < rows.size() && rows[j].first == r) v += rows[j++].second;
            if (v != 0.0) {
                inner.push_back(Eigen::Index(r));
                values.push_back(v);
            }
            i = j;
        }
        outer[p + 1] = Eigen::Index(inner.size());
    }
    m.resizeNonZeros(Eigen::Index(inner.size()));
    std::copy(outer.begin(), outer.end(), m.outerIndexPtr());
    std::copy(inner.begin(), inner.end(), m.innerIndexPtr());
    std::copy(values.begin(), values.end(), m.valuePtr());
    m.finalize();
    return m;
}

Eigen::VectorXcd OperatorSpace::apply(const std::vector<SuperTerm>& terms, const Eigen::VectorXcd& x, int sector_in,
                                      int sector_out) const {
    if (std::size_t(x.size()) != sector_dimension()) fail(ErrorCode::DimensionMismatch, "state has wrong dimension");
    const auto compiled = compile_terms(terms, modes());
    Eigen::VectorXcd y = Eigen::VectorXcd::Zero(Eigen::Index(sector_dimension()));
    std::vector<Entry> col;
    for (std::size_t p = 0; p < sector_dimension(); ++p) {
        if (x[Eigen::Index(p)] == 0.0) continue;
        const std::uint64_t g = decode(p, sector_in);
        const double w_in = weight(g);
        col.clear();
        for (const auto& t : compiled) expand(t, g, x[Eigen::Index(p)], col);
        for (const auto& e : col) {
            if (sector_of(e.g) != sector_out) fail(ErrorCode::ParityViolation, "superoperator maps outside the target sector");
            y[Eigen::Index(encode(e.g))] += e.value * (w_in / weight(e.g));
        }
    }
    return y;
}

double OperatorSpace::trace_weight() const { return std::ldexp(1.0, modes()); }

Eigen::VectorXcd OperatorSpace::trace_functional(const OperatorSum& op, int sector) const {
    if (op.modes() != modes()) fail(ErrorCode::DimensionMismatch, "operator does not match the operator space");
    Eigen::VectorXcd f = Eigen::VectorXcd::Zero(Eigen::Index(sector_dimension()));
    for (const auto& t : op.terms()) {
        std::vector<Entry> acc{{0, t.coefficient}};
        for (int j = 0; j < modes() && !acc.empty(); ++j) {
            const Local2& o = t.factors[j];
            const cplx tau[4] = {o(0, 0) + o(1, 1), o(0, 0) - o(1, 1), o(0, 1), o(1, 0)};
            std::vector<Entry> next;
            for (const auto& e : acc) {
                for (int l = 0; l < 4; ++l) {
                    if (tau[l] != 0.0) next.push_back({e.g | (std::uint64_t(l) << (2 * j)), e.value * tau[l]});
                }
            }
            acc.swap(next);
        }
        for (const auto& e : acc) {
            if (sector_of(e.g) == sector) f[Eigen::Index(encode(e.g))] += e.value * weight(e.g);
        }
    }
    return f;
}

Eigen::VectorXcd OperatorSpace::product_state(const std::vector<Local2>& factors, int sector) const {
    if (int(factors.size()) != modes()) fail(ErrorCode::DimensionMismatch, "product state factor count mismatch");
    std::vector<Entry> acc{{0, 1.0}};
    for (int j = 0; j < modes(); ++j) {
        const Local2& m = factors[j];
        const cplx c[4] = {0.5 * (m(0, 0) + m(1, 1)), 0.5 * (m(0, 0) - m(1, 1)), m(1, 0), m(0, 1)};
        std::vector<Entry> next;
        for (const auto& e : acc) {
            for (int l = 0; l < 4; ++l) {
                if (c[l] != 0.0) next.push_back({e.g | (std::uint64_t(l) << (2 * j)), e.value * c[l]});
            }
        }
        acc.swap(next);
    }
    Eigen::VectorXcd x = Eigen::VectorXcd::Zero(Eigen::Index(sector_dimension()));
    for (const auto& e : acc) {
        if (sector_of(e.g) == sector) x[Eigen::Index(encode(e.g))] += e.value / weight(e.g);
    }
    return x;
}

std::pair<Eigen::VectorXcd, Eigen::VectorXcd> OperatorSpace::from_dense(const DenseMatrix& x) const {
    const Eigen::Index dim = Eigen::Index(1) << modes();
    if (x.rows() != dim || x.cols() != dim) fail(ErrorCode::DimensionMismatch, "dense operator has wrong dimension");
    std::pair<Eigen::VectorXcd, Eigen::VectorXcd> out{Eigen::VectorXcd::Zero(Eigen::Index(sector_dimension())),
                                                      Eigen::VectorXcd::Zero(Eigen::Index(sector_dimension()))};
    for (Eigen::Index a = 0; a < dim; ++a) {
        for (Eigen::Index b = 0; b < dim; ++b) {
            if (x(a, b) == 0.0) continue;
            std::vector<Local2> f(modes(), Local2::Zero());
            for (int j = 0; j < modes(); ++j) f[j]((a >> j) & 1, (b >> j) & 1) = 1.0;
            out.first += x(a, b) * product_state(f, kEven);
            out.second += x(a, b) * product_state(f, kOdd);
        }
    }
    return out;
}

DenseMatrix OperatorSpace::to_dense(const Eigen::VectorXcd& even, const Eigen::VectorXcd& odd) const {
    const Eigen::Index dim = Eigen::Index(1) << modes();
    DenseMatrix x = DenseMatrix::Zero(dim, dim);
    for (int sector : {kEven, kOdd}) {
        const Eigen::VectorXcd& v = sector == kEven ? even : odd;
        if (v.size() == 0) continue;
        for (std::size_t p = 0; p < sector_dimension(); ++p) {
            if (v[Eigen::Index(p)] == 0.0) continue;
            const std::uint64_t g = decode(p, sector);
            const cplx c = v[Eigen::Index(p)] * weight(g);
            std::vector<std::pair<std::pair<Eigen::Index, Eigen::Index>, cplx>> acc{{{0, 0}, c}};
            for (int j = 0; j < modes(); ++j) {
                const Local2 b = pauli(local_index(g, j));
                decltype(acc) next;
                for (const auto& [rc, val] : acc) {
                    for (int r = 0; r < 2; ++r) {
                        for (int s = 0; s < 2; ++s) {
                            if (b(r, s) != 0.0) {
                                next.push_back({{rc.first | (Eigen::Index(r) << j), rc.second | (Eigen::Index(s) << j)},
                                                val * b(r, s)});
                            }
                        }
                    }
                }
                acc.swap(next);
            }
            for (const auto& [rc, val] : acc) x(rc.first, rc.second) += val;
        }
    }
    return x;
}

DenseMatrix OperatorSpace::reduced(const Eigen::VectorXcd& even, const Eigen::VectorXcd& odd, int keep) const {
    if (keep < 1 || keep > modes()) fail(ErrorCode::IndexOutOfRange, "invalid number of retained modes");
    const Eigen::Index dim = Eigen::Index(1) << keep;
    DenseMatrix x = DenseMatrix::Zero(dim, dim);
    const double traced = std::ldexp(1.0, modes() - keep);
    // enumerate local indices of the retained modes; traced modes carry I
    const std::uint64_t combos = std::uint64_t(1) << (2 * keep);
    for (std::uint64_t g = 0; g < combos; ++g) {
        const int sector = sector_of(g);
        const Eigen::VectorXcd& v = sector == kEven ? even : odd;
        if (v.size() == 0) continue;
        const cplx c = v[Eigen::Index(encode(g))] * traced * weight(g);
        if (c == 0.0) continue;
        std::vector<std::pair<std::pair<Eigen::Index, Eigen::Index>, cplx>> acc{{{0, 0}, c}};
        for (int j = 0; j < keep; ++j) {
            const Local2 b = pauli(local_index(g, j));
            decltype(acc) next;
            for (const auto& [rc, val] : acc) {
                for (int r = 0; r < 2; ++r) {
                    for (int s = 0; s < 2; ++s) {
                        if (b(r, s) != 0.0) {
                            next.push_back({{rc.first | (Eigen::Index(r) << j), rc.second | (Eigen::Index(s) << j)},
                                            val * b(r, s)});
                        }
                    }
                }
            }
            acc.swap(next);
        }
        for (const auto& [rc, val] : acc) x(rc.first, rc.second) += val;
    }
    return x;
}

}  // namespace pfermion
