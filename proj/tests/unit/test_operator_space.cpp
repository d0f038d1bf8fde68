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

#include <doctest.h>

#include <random>

#include "error.hpp"
#include "lindblad_engine.hpp"
#include "oracles.hpp"

using namespace pfermion;

namespace {

DenseMatrix random_matrix(Eigen::Index dim, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    DenseMatrix m(dim, dim);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = cplx(g(rng), g(rng));
    return m;
}

Eigen::VectorXcd random_vector(Eigen::Index n, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    Eigen::VectorXcd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = cplx(g(rng), g(rng));
    return v;
}

OperatorSpace scaled_space(int n) {
    std::vector<LocalScaling> s;
    for (int j = 0; j < n; ++j) s.push_back({1.0 + 2.5 * j, 1.0 + 0.5 * j});
    return OperatorSpace(s);
}

double max_abs(const DenseMatrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("sector indexing round trip") {
    for (int n = 1; n <= 5; ++n) {
        const OperatorSpace sp{std::vector<LocalScaling>(std::size_t(n))};
        CHECK(sp.sector_dimension() == (std::size_t(1) << (2 * n - 1)));
        for (int sector : {kEven, kOdd}) {
            for (std::size_t p = 0; p < sp.sector_dimension(); ++p) {
                const auto g = sp.decode(p, sector);
                REQUIRE(OperatorSpace::sector_of(g) == sector);
                REQUIRE(sp.encode(g) == p);
            }
        }
        CHECK(sp.decode(0, kEven) == 0);
    }
}

TEST_CASE("basis weights follow the later-mode string parity") {
    const OperatorSpace sp({{3.0, 2.0}, {5.0, 7.0}});
    // mode 0 identity, mode 1 coherence: odd string for mode 0
    const std::uint64_t g = 0u | (2u << 2);
    CHECK(OperatorSpace::string_odd(g, 0));
    CHECK(!OperatorSpace::string_odd(g, 1));
    CHECK(sp.weight(g) == doctest::Approx(3.0 * 7.0));
    CHECK(sp.weight(1u) == doctest::Approx(3.0));
    CHECK(sp.weight(0u) == 1.0);
}

TEST_CASE("dense conversion and product states") {
    std::mt19937_64 rng(3);
    const auto sp = scaled_space(3);
    const DenseMatrix x = random_matrix(8, rng);
    const auto [e, o] = sp.from_dense(x);
    CHECK(max_abs(sp.to_dense(e, o) - x) < 1e-12);
    std::vector<Local2> f;
    DenseMatrix prod = DenseMatrix::Ones(1, 1);
    for (int j = 0; j < 3; ++j) {
        f.push_back(random_matrix(2, rng));
        DenseMatrix next(prod.rows() * 2, prod.cols() * 2);
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) next.block(a * prod.rows(), b * prod.cols(), prod.rows(), prod.cols()) = f[j](a, b) * prod;
        prod = next;
    }
    const DenseMatrix back = sp.to_dense(sp.product_state(f, kEven), sp.product_state(f, kOdd));
    CHECK(max_abs(back - prod) < 1e-12);
    const DenseMatrix red = sp.reduced(e, o, 1);
    DenseMatrix expected = DenseMatrix::Zero(2, 2);
    for (Eigen::Index a = 0; a < 8; ++a)
        for (Eigen::Index b = 0; b < 8; ++b)
            if ((a >> 1) == (b >> 1)) expected(a & 1, b & 1) += x(a, b);
    CHECK(max_abs(red - expected) < 1e-12);
}

TEST_CASE("left and right multiplication and trace functionals") {
    std::mt19937_64 rng(5);
    const auto sp = scaled_space(3);
    const DenseMatrix a = random_matrix(8, rng);
    const DenseMatrix x = random_matrix(8, rng);
    const auto op = OperatorSum::from_leading_matrix(a, 3);
    CHECK(max_abs(DenseMatrix(op.to_sparse()) - a) < 1e-14);
    const auto [xe, xo] = sp.from_dense(x);
    for (int parity = 0; parity < 2; ++parity) {
        // split the operator by parity so each piece maps sectors consistently
        const SparseMatrix part = parity == 0 ? parity_decompose(a.sparseView()).even : parity_decompose(a.sparseView()).odd;
        const auto po = OperatorSum::from_leading_matrix(DenseMatrix(part), 3);
        const int flip = parity;
        const auto le = sp.apply(sp.left_terms(po), xe, kEven, kEven ^ flip);
        const auto lo = sp.apply(sp.left_terms(po), xo, kOdd, kOdd ^ flip);
        const DenseMatrix l = flip ? sp.to_dense(lo, le) : sp.to_dense(le, lo);
        CHECK(max_abs(l - DenseMatrix(part) * x) < 1e-11);
        const auto re = sp.apply(sp.right_terms(po), xe, kEven, kEven ^ flip);
        const auto ro = sp.apply(sp.right_terms(po), xo, kOdd, kOdd ^ flip);
        const DenseMatrix r = flip ? sp.to_dense(ro, re) : sp.to_dense(re, ro);
        CHECK(max_abs(r - x * DenseMatrix(part)) < 1e-11);
    }
    const cplx tr = (sp.trace_functional(op, kEven).transpose() * xe)(0) + (sp.trace_functional(op, kOdd).transpose() * xo)(0);
    CHECK(std::abs(tr - (a * x).trace()) < 1e-11);
    CHECK(sp.trace_weight() == 8.0);
}

TEST_CASE("assembled matrix agrees with matrix-free application") {
    std::mt19937_64 rng(9);
    const auto sp = scaled_space(3);
    const DenseMatrix h = random_matrix(8, rng);
    const auto terms = sp.left_terms(OperatorSum::from_leading_matrix(parity_decompose(h.sparseView()).even, 3));
    for (int sector : {kEven, kOdd}) {
        const SparseMatrix m = sp.assemble(terms, sector);
        const auto v = random_vector(Eigen::Index(sp.sector_dimension()), rng);
        CHECK((m * v - sp.apply(terms, v, sector, sector)).cwiseAbs().maxCoeff() < 1e-12);
    }
    const auto odd_terms = sp.left_terms(OperatorSum::annihilation(1, 3));
    CHECK_THROWS_AS(sp.assemble(odd_terms, kEven), Error);
}

TEST_CASE("engine generator matches the column-stacked dense generator") {
    std::mt19937_64 rng(13);
    const LorentzianBathSpec spec{1.0, 2.5, 0.3, 5.0};
    struct Case {
        const char* name;
        std::vector<PseudoFermionMode> modes;
    };
    PseudoFermionMode physical;
    physical.occupation = 0.3;
    physical.coupling = 0.8;
    physical.coupling_sq = 0.64;
    physical.frequency = 0.4;
    physical.damping = 1.1;
    PseudoFermionMode other = physical;
    other.occupation = 0.9;
    other.frequency = -0.7;
    other.damping = 0.35;
    const auto pair = matsubara_modes_two(spec, 1, 40.0, 1.0);
    const auto quad = matsubara_modes_four(spec, 1);
    std::vector<Case> cases{{"physical", {physical, other}},
                            {"two-mode pair", {pair[0], pair[1]}},
                            {"four-mode block", {quad[0], quad[1], quad[2]}}};
    for (const auto& c : cases) {
        CAPTURE(std::string(c.name));
        PseudoFermionBath bath;
        bath.modes = c.modes;
        const auto system = SystemSpec::single_level(0.7);
        const AugmentedModel model(system, {bath});
        CHECK(model.trace_row_norm() == 0.0);
        const DenseMatrix ld = DenseMatrix(oracles::dense_liouvillian(system, {bath}));
        const Eigen::Index dim = Eigen::Index(1) << model.modes();
        const auto& sp = model.space();
        const auto xe = random_vector(Eigen::Index(sp.sector_dimension()), rng);
        const auto xo = random_vector(Eigen::Index(sp.sector_dimension()), rng);
        const DenseMatrix x = sp.to_dense(xe, xo);
        const DenseMatrix expected = unvec(ld * vec(x), dim);
        const DenseMatrix got = sp.to_dense(model.generator(kEven) * xe, model.generator(kOdd) * xo);
        CHECK(max_abs(got - expected) < 1e-10 * std::max(1.0, max_abs(expected)));
        const DenseMatrix h = DenseMatrix(oracles::dense_hamiltonian(system, {bath}));
        CHECK(max_abs(DenseMatrix(model.hamiltonian().to_sparse()) - h) < 1e-13);
    }
}
