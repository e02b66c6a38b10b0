#include "martspline/measures.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace martspline;

namespace {

TensorFiltration dyadic(int d, int depth) {
    FiltrationSpec s;
    s.d = d;
    s.depth = depth;
    s.rules = {AxisRule{}};
    return build_filtration(s);
}

}  // namespace

TEST(Measures, PolynomialDensityIsIntegratedExactly) {
    HybridMeasure th(2, 1);
    th.set_density(scalar_function([](std::span<const double> x) { return x[0] * x[0] * x[1]; }, 3), 2);
    Rect r{{{0.1, 0.5}, {0.2, 0.7}}};
    double exact = (std::pow(0.5, 3) - std::pow(0.1, 3)) / 3 * (0.49 - 0.04) / 2;
    EXPECT_NEAR(measure_of_atom(th, r)[0], exact, 1e-15);
}

TEST(Measures, DiracOnBoundaryFollowsHalfOpenConvention) {
    HybridMeasure th(1, 1);
    th.add_dirac({0.5}, {3.0});
    EXPECT_EQ(measure_of_atom(th, Rect{{{0.0, 0.5}}})[0], 3.0);
    EXPECT_EQ(measure_of_atom(th, Rect{{{0.5, 1.0}}})[0], 0.0);
    EXPECT_EQ(measure_of_atom(th, Rect{{{0.5, 1.0}}}, true)[0], 3.0);
}

TEST(Measures, SetMeasureCountsSharedFaceMassOnce) {
    auto F = dyadic(2, 1);
    HybridMeasure th(2, 1);
    th.add_dirac({0.5, 0.5}, {1.0});
    AtomSet all = AtomSet(1, F.shape(1));
    for (std::size_t f = 0; f < all.universe(); ++f) all.insert_flat(f);
    EXPECT_EQ(measure_of_set(th, F, all, true)[0], 1.0);
    EXPECT_EQ(measure_of_set(th, F, all, false)[0], 1.0);
}

TEST(Measures, LevelMassesAreAdditiveAcrossLevels) {
    auto F = dyadic(2, 4);
    HybridMeasure th(2, 1);
    th.set_density(scalar_function([](std::span<const double> x) { return 1 + std::sin(3 * x[0]) * x[1]; }), 6);
    th.add_dirac({0.3, 0.8}, {0.5});
    auto m = level_masses(th, F, 4);
    for (int n = 1; n <= 4; ++n) {
        double s = 0;
        for (double v : m[n - 1]) s += v;
        EXPECT_NEAR(s, m[0][0] + m[0][1] + m[0][2] + m[0][3], 1e-13);
    }
    // each coarse atom equals the direct measure of its rectangle
    for (std::size_t f = 0; f < F.atom_count(2); ++f)
        EXPECT_NEAR(m[1][f], measure_of_atom(th, F.atom_rect(2, F.unflat(2, f)))[0], 1e-9);
}

TEST(Measures, LevelMassesRejectSignedMeasure) {
    auto F = dyadic(1, 2);
    HybridMeasure th(1, 1);
    th.set_density(scalar_function([](std::span<const double> x) { return x[0] - 0.9; }, 1), 2);
    EXPECT_THROW(level_masses(th, F, 2), std::invalid_argument);
}

TEST(Measures, SupportOutsideDomainIsRejected) {
    HybridMeasure th(1, 1);
    th.add_dirac({1.5}, {1.0});
    EXPECT_THROW(th.check_support(Rect{{{0.0, 1.0}}}), std::domain_error);
}

TEST(Measures, TotalVariationOfVectorMeasure) {
    auto F = dyadic(1, 3);
    HybridMeasure th(1, 2);
    VectorFunction g{2, [](std::span<const double>, std::span<double> out) {
                         out[0] = 3.0;
                         out[1] = -4.0;
                     }, 0};
    th.set_density(g, 2);
    th.add_dirac({0.25}, {0.0, 2.0});
    auto tv = total_variation(th, F, 3);
    EXPECT_NEAR(tv.exact, 5.0 + 2.0, 1e-14);
    EXPECT_LE(tv.partition_sum, tv.exact + 1e-14);
}

TEST(Measures, LebesgueDecompositionAndWitness) {
    auto F = dyadic(1, 10);
    HybridMeasure th(1, 1);
    th.set_density(scalar_function([](std::span<const double>) { return 1.0; }, 0), 1);
    th.add_dirac({0.3}, {2.0});
    auto [ac, sing] = lebesgue_parts(th);
    EXPECT_TRUE(ac.has_density());
    EXPECT_TRUE(ac.diracs().empty());
    EXPECT_FALSE(sing.has_density());
    EXPECT_EQ(sing.diracs().size(), 1u);
    auto w = singular_witness(th, F, 10);
    EXPECT_EQ(w.size(), 1u);
    EXPECT_EQ(measure_of_set(sing, F, w)[0], 2.0);
}
