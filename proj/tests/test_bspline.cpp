#include "martspline/bspline.hpp"
#include "martspline/quadrature.hpp"

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include <cmath>

using namespace martspline;

namespace {

Partition1D random_partition(int atoms, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> w(atoms);
    double s = 0;
    for (auto& v : w) s += (v = rng.uniform(0.05, 1.0));
    std::vector<double> bp{0.0};
    for (double v : w) bp.push_back(bp.back() + v / s);
    bp.back() = 1.0;
    return Partition1D(bp);
}

}  // namespace

TEST(Quadrature, GaussLegendreExactForDegree2gMinus1) {
    for (int g = 1; g <= 10; ++g) {
        GaussLegendre gl(g);
        for (int p = 0; p <= 2 * g - 1; ++p) {
            double s = 0;
            for (int q = 0; q < g; ++q) s += gl.weight(q, -0.3, 1.7) * std::pow(gl.node(q, -0.3, 1.7), p);
            double exact = (std::pow(1.7, p + 1) - std::pow(-0.3, p + 1)) / (p + 1);
            EXPECT_NEAR(s, exact, 1e-12 * std::max(1.0, std::abs(exact))) << "g=" << g << " p=" << p;
        }
    }
}

TEST(Quadrature, ChebyshevLobattoIncludesEndpoints) {
    auto x = chebyshev_lobatto(8, 0.2, 0.6);
    ASSERT_EQ(x.size(), 8u);
    EXPECT_DOUBLE_EQ(*std::min_element(x.begin(), x.end()), 0.2);
    EXPECT_DOUBLE_EQ(*std::max_element(x.begin(), x.end()), 0.6);
}

TEST(BSpline, DimensionIsAtomsPlusOrderMinusOne) {
    auto p = random_partition(7, 1);
    for (int k = 1; k <= 6; ++k) EXPECT_EQ(SplineSpace1D(p, k).dim(), 7 + k - 1);
    EXPECT_THROW(SplineSpace1D(p, 0), std::invalid_argument);
    EXPECT_THROW(SplineSpace1D(p, kMaxOrder + 1), std::invalid_argument);
}

TEST(BSpline, OrderOneIsIndicator) {
    auto p = random_partition(5, 2);
    SplineSpace1D s(p, 1);
    for (int j = 0; j < 5; ++j) {
        auto ab = s.eval_basis(0.5 * (p.atom(j).lo + p.atom(j).hi));
        EXPECT_EQ(ab.first, j);
        ASSERT_EQ(ab.count, 1);
        EXPECT_DOUBLE_EQ(ab.values[0], 1.0);
    }
}

TEST(BSpline, OrderTwoAreHats) {
    auto p = random_partition(6, 3);
    SplineSpace1D s(p, 2);
    const auto& t = p.breakpoints();
    Rng rng(4);
    for (int r = 0; r < 300; ++r) {
        double x = rng.uniform();
        int j = p.locate(x);
        auto ab = s.eval_basis(x);
        double lam = (x - t[j]) / (t[j + 1] - t[j]);
        EXPECT_EQ(ab.first, j);
        EXPECT_NEAR(ab.values[0], 1 - lam, 1e-14);
        EXPECT_NEAR(ab.values[1], lam, 1e-14);
    }
}

TEST(BSpline, PartitionOfUnityAndNonnegativity) {
    for (int k = 1; k <= 8; ++k) {
        SplineSpace1D s(random_partition(9, 10 + k), k);
        Rng rng(k);
        for (int r = 0; r < 2000; ++r) {
            auto ab = s.eval_basis(rng.uniform());
            double sum = 0;
            for (int t = 0; t < ab.count; ++t) {
                sum += ab.values[t];
                EXPECT_GE(ab.values[t], -1e-14);
            }
            EXPECT_NEAR(sum, 1.0, 1e-12);
        }
    }
}

TEST(BSpline, ReproducesPolynomialsOfDegreeBelowOrder) {
    // least squares fit of x^p on sample points is exact when p < k
    auto p = random_partition(6, 7);
    for (int k = 2; k <= 5; ++k) {
        SplineSpace1D s(p, k);
        const int n = s.dim();
        const int m = 200;
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, n);
        Eigen::VectorXd b(m);
        for (int r = 0; r < m; ++r) {
            double x = (r + 0.5) / m;
            auto ab = s.eval_basis(x);
            for (int t = 0; t < ab.count; ++t) A(r, ab.first + t) = ab.values[t];
            b(r) = std::pow(x, k - 1);
        }
        Eigen::VectorXd c = A.colPivHouseholderQr().solve(b);
        EXPECT_LT((A * c - b).lpNorm<Eigen::Infinity>(), 1e-10) << "k=" << k;
    }
}

TEST(BSpline, SupportMatchesNonzeroSet) {
    auto p = random_partition(8, 5);
    SplineSpace1D s(p, 3);
    for (int i = 0; i < s.dim(); ++i) {
        auto [a, b] = s.support_atoms(i);
        for (int j = 0; j < 8; ++j) {
            double x = 0.5 * (p.atom(j).lo + p.atom(j).hi);
            auto ab = s.eval_basis(x);
            bool active = i >= ab.first && i < ab.first + ab.count && ab.values[i - ab.first] > 0;
            EXPECT_EQ(active, j >= a && j <= b) << i << " " << j;
        }
    }
}

TEST(BSpline, IntegralsOfBasisAreKnotSpanOverOrder) {
    auto p = random_partition(7, 8);
    for (int k = 1; k <= 5; ++k) {
        SplineSpace1D s(p, k);
        auto I = integrate_against(s, [](double) { return 1.0; }, k);
        const auto& t = s.knot_vector().knots;
        for (int i = 0; i < s.dim(); ++i) EXPECT_NEAR(I[i], (t[i + k] - t[i]) / k, 1e-14);
    }
}

TEST(TensorSpline, EvaluatesAsProduct) {
    SplineSpace1D a(random_partition(4, 1), 2), b(random_partition(3, 2), 3);
    TensorSpline ts({a, b}, 1);
    Rng rng(3);
    for (auto& c : ts.coeffs()) c = rng.uniform(-1, 1);
    for (int r = 0; r < 50; ++r) {
        Point x{rng.uniform(), rng.uniform()};
        auto A = a.eval_basis(x[0]);
        auto B = b.eval_basis(x[1]);
        double v = 0;
        for (int i = 0; i < A.count; ++i)
            for (int j = 0; j < B.count; ++j)
                v += ts.coeffs()[(A.first + i) * b.dim() + B.first + j] * A.values[i] * B.values[j];
        EXPECT_NEAR(ts.evaluate(x)[0], v, 1e-14);
    }
}

TEST(TensorSpline, JsonRoundTrip) {
    SplineSpace1D a(random_partition(4, 1), 2), b(random_partition(3, 2), 3);
    TensorSpline ts({a, b}, 2);
    for (std::size_t i = 0; i < ts.coeffs().size(); ++i) ts.coeffs()[i] = 0.1 * i;
    auto back = spline_from_json(to_json(ts));
    EXPECT_EQ(back.coeffs(), ts.coeffs());
    EXPECT_EQ(back.shape(), ts.shape());
}
