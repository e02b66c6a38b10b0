#include "martspline/sequence.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace martspline;

namespace {

TensorFiltration make(int d, int depth, AxisRule r, std::uint64_t seed = 0) {
    FiltrationSpec s;
    s.d = d;
    s.depth = depth;
    s.rules = {r};
    s.seed = seed;
    return build_filtration(s);
}

AxisRule random_rule() {
    AxisRule r;
    r.kind = RefinementRule::RandomAtomBisect;
    r.probability = 0.6;
    return r;
}

}  // namespace

TEST(Sequence, FunctionSequenceIsMartingale) {
    for (int d = 1; d <= 2; ++d)
        for (int k = 1; k <= 4; ++k) {
            auto F = make(d, d == 1 ? 8 : 5, random_rule(), 30 + k);
            auto f = scalar_function([](std::span<const double> x) {
                double v = 1;
                for (double c : x) v *= std::cos(3 * c) + 0.3 * c;
                return v;
            });
            auto seq = make_sequence(F, f, std::vector<int>(d, k), F.depth());
            auto pts = probe_points(F, 40, 5);
            EXPECT_LE(verify_martingale_property(F, seq, pts), 1e-9) << d << " " << k;
        }
}

TEST(Sequence, MeasureSequenceMatchesDirectProjection) {
    auto F = make(2, 5, random_rule(), 3);
    HybridMeasure nu(2, 1);
    // degree 2 density: 4-point quadrature is exact on every route
    nu.set_density(scalar_function([](std::span<const double> x) { return 1 + x[0] * x[1] - x[1] * x[1]; }, 2), 4);
    nu.add_dirac({0.37, 0.81}, {1.5});
    auto seq = make_sequence(F, nu, {2, 3}, 5);
    auto pts = probe_points(F, 50, 9);
    for (int n = 1; n <= 5; ++n) {
        auto direct = TensorProjector(F, n, {2, 3}).project_measure(nu);
        for (const auto& y : pts) EXPECT_NEAR(seq.at(n).evaluate(y)[0], direct.evaluate(y)[0], 1e-10);
    }
    EXPECT_LE(verify_martingale_property(F, seq, pts), 1e-9);
}

TEST(Sequence, SmoothFunctionConvergesOnDyadic) {
    auto F = make(1, 8, AxisRule{});
    auto f = scalar_function([](std::span<const double> x) { return std::sin(4 * x[0]); });
    auto seq = make_sequence(F, f, {3}, 8);
    auto cp = convergence_probe(seq, reference_from(f), probe_points(F, 100, 1), 1e-3);
    EXPECT_EQ(cp.fraction_converged, 1.0);
    EXPECT_GT(cp.median_rate, 2.0);
}

TEST(Sequence, ProbePointsAvoidBreakpoints) {
    auto F = make(2, 6, random_rule(), 4);
    for (const auto& y : probe_points(F, 200, 2))
        for (int l = 0; l < 2; ++l)
            for (double t : F.partition(6, l).breakpoints()) EXPECT_GT(std::abs(y[l] - t), 1e-9);
}

TEST(VSets, FrozenHalfIsDetected) {
    AxisRule r;
    r.kind = RefinementRule::FrozenOnSubinterval;
    r.frozen = {{0.5, 1.0}};
    auto F = make(1, 8, r);
    auto rep = detect_v_sets(F.axis(0), 1e-3);
    ASSERT_EQ(rep.intervals.size(), 1u);
    EXPECT_DOUBLE_EQ(rep.intervals[0].span.lo, 0.5);
    EXPECT_DOUBLE_EQ(rep.intervals[0].span.hi, 1.0);
    EXPECT_TRUE(rep.intervals[0].left_accumulates);
    EXPECT_FALSE(rep.intervals[0].right_accumulates);
    EXPECT_FALSE(rep.note.empty());
}

TEST(VSets, DenseFiltrationHasNone) {
    auto F = make(1, 12, AxisRule{});
    EXPECT_TRUE(detect_v_sets(F.axis(0), 1e-3).intervals.empty());
}

TEST(LimitDual, ConstantFiltrationIsExact) {
    Partition1D p({0, 0.2, 0.45, 0.7, 1.0});
    Filtration1D F1(std::vector<Partition1D>(5, p));
    std::vector<double> ys{0.1, 0.5, 0.93};
    for (int r = 0; r <= 3; ++r) {
        auto t = limit_dual_table(F1, {0.0, 1.0}, 2, r, ys);
        EXPECT_EQ(t.first_level, 1);
        EXPECT_EQ(t.final_delta, 0.0);
        GramSystem gs(SplineSpace1D(p, 2));
        for (std::size_t q = 0; q < ys.size(); ++q) EXPECT_NEAR(t.values.back()[q], gs.dual_eval(r, ys[q]), 1e-15);
    }
    EXPECT_THROW(limit_dual_table(F1, {0.0, 1.0}, 2, 9, ys), std::invalid_argument);
    EXPECT_THROW(limit_dual_table(F1, {0.0, 0.45}, 2, 0, {0.5}), std::invalid_argument);
}

TEST(LimitDual, TargetedFamilyConvergesFastAwayFromAccumulation) {
    AxisRule r;
    r.kind = RefinementRule::PointTargeted;
    r.targets = {0.0};
    auto F = make(1, 14, r);
    auto t = limit_dual_table(F.axis(0), {0.5, 1.0}, 2, 0, {0.6, 0.8, 0.95}, Anchor::Right);
    EXPECT_LT(t.final_delta, 1e-8);
    EXPECT_TRUE(t.decay_ok);
    for (std::size_t i = 3; i < t.deltas.size(); ++i) EXPECT_LE(t.deltas[i], t.deltas[i - 1] * 1.0001);
}
