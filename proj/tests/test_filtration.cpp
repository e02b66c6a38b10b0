#include "martspline/filtration.hpp"

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

TensorFiltration random_filtration(int d, int depth, std::uint64_t seed) {
    FiltrationSpec s;
    s.d = d;
    s.depth = depth;
    AxisRule r;
    r.kind = RefinementRule::RandomAtomBisect;
    r.probability = 0.6;
    s.rules = {r};
    s.seed = seed;
    return build_filtration(s);
}

}  // namespace

TEST(Partition, LocateUsesHalfOpenAtoms) {
    Partition1D p({0.0, 0.25, 0.5, 1.0});
    EXPECT_EQ(p.locate(0.25), 0);
    EXPECT_EQ(p.locate(0.2500001), 1);
    EXPECT_EQ(p.locate(1.0), 2);
    EXPECT_THROW(p.locate(0.0), std::domain_error);
    EXPECT_EQ(p.locate_closed(0.0), 0);
    EXPECT_THROW(p.locate(1.5), std::domain_error);
}

TEST(Filtration, RejectsNonNestedLevels) {
    std::vector<Partition1D> lv{Partition1D({0, 0.5, 1}), Partition1D({0, 0.25, 1})};
    EXPECT_THROW(Filtration1D{lv}, std::invalid_argument);
    auto f = Filtration1D::unchecked(lv);
    TensorFiltration F({f});
    auto chk = check_nested(F);
    EXPECT_FALSE(chk.nested);
    EXPECT_EQ(chk.level, 2);
    EXPECT_DOUBLE_EQ(chk.missing, 0.5);
}

TEST(Filtration, UniformDyadicCounts) {
    auto F = dyadic(2, 5);
    for (int n = 1; n <= 5; ++n) {
        EXPECT_EQ(F.partition(n, 0).atom_count(), 1 << n);
        EXPECT_EQ(F.atom_count(n), std::size_t(1) << (2 * n));
    }
    EXPECT_TRUE(check_nested(F).nested);
}

TEST(Filtration, RandomRuleIsNestedAndSeeded) {
    auto a = random_filtration(2, 8, 42);
    auto b = random_filtration(2, 8, 42);
    auto c = random_filtration(2, 8, 43);
    EXPECT_TRUE(check_nested(a).nested);
    EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
    EXPECT_NE(to_json(a).dump(), to_json(c).dump());
}

TEST(Filtration, FrozenRegionKeepsItsBreakpoints) {
    FiltrationSpec s;
    s.depth = 8;
    AxisRule r;
    r.kind = RefinementRule::FrozenOnSubinterval;
    r.frozen = {{0.5, 1.0}};
    s.rules = {r};
    auto F = build_filtration(s);
    for (int n = 1; n <= 8; ++n)
        for (double t : F.partition(n, 0).breakpoints()) EXPECT_FALSE(t > 0.5 && t < 1.0);
    EXPECT_GT(F.partition(8, 0).atom_count(), F.partition(1, 0).atom_count());
}

TEST(Filtration, TargetedRuleRefinesOnlyNearTarget) {
    FiltrationSpec s;
    s.depth = 6;
    AxisRule r;
    r.kind = RefinementRule::PointTargeted;
    r.targets = {0.0};
    s.rules = {r};
    auto F = build_filtration(s);
    const auto& p = F.partition(6, 0);
    EXPECT_EQ(p.atom_count(), 7);
    EXPECT_DOUBLE_EQ(p.atom(0).hi, 1.0 / 64);
}

TEST(Filtration, FlatIndexRoundTripRowMajor) {
    auto F = random_filtration(3, 4, 7);
    const int n = 4;
    auto shape = F.shape(n);
    for (std::size_t f = 0; f < F.atom_count(n); ++f) EXPECT_EQ(F.flat(n, F.unflat(n, f)), f);
    AtomIndex last{{shape[0] - 1, shape[1] - 1, 0}};
    EXPECT_EQ(F.flat(n, last), (std::size_t(shape[0] - 1) * shape[1] + shape[1] - 1) * shape[2]);
}

TEST(Filtration, AtomOfContainsPoint) {
    auto F = random_filtration(2, 6, 3);
    Rng rng(11);
    for (int t = 0; t < 200; ++t) {
        Point x{rng.uniform(), rng.uniform()};
        for (int n = 1; n <= 6; ++n) {
            auto [i, r] = atom_of(F, n, x);
            EXPECT_TRUE(rect_contains(r, x));
            EXPECT_TRUE(F.valid_index(n, i));
        }
    }
}

TEST(Filtration, AtomDistanceIsL1InIndexSteps) {
    auto F = dyadic(2, 3);
    EXPECT_EQ(atom_distance(F, 3, AtomIndex{{0, 0}}, AtomIndex{{3, 5}}), 8);
    EXPECT_EQ(atom_distance(F, 3, AtomIndex{{2, 2}}, AtomIndex{{2, 2}}), 0);
}

TEST(Filtration, DistanceTransformMatchesBruteForce) {
    std::vector<int> shape{5, 7, 3};
    Rng rng(5);
    std::vector<std::uint8_t> mask(5 * 7 * 3, 0);
    for (auto& m : mask) m = rng.uniform() < 0.1;
    mask[17] = 1;
    auto dist = l1_distance_transform(shape, mask);
    auto coord = [&](std::size_t f) {
        return std::array<int, 3>{int(f / 21), int(f / 3 % 7), int(f % 3)};
    };
    for (std::size_t f = 0; f < mask.size(); ++f) {
        int best = kUnreachable;
        for (std::size_t g = 0; g < mask.size(); ++g)
            if (mask[g]) {
                auto a = coord(f), b = coord(g);
                best = std::min(best, std::abs(a[0] - b[0]) + std::abs(a[1] - b[1]) + std::abs(a[2] - b[2]));
            }
        EXPECT_EQ(dist[f], best);
    }
}

TEST(Filtration, NeighborhoodCountsOnGrid) {
    auto F = dyadic(2, 4);
    Point x{0.5 + 1e-3, 0.5 + 1e-3};
    EXPECT_EQ(neighborhood(F, 4, x, 0).size(), 1u);
    EXPECT_EQ(neighborhood(F, 4, x, 1).size(), 5u);
    EXPECT_EQ(neighborhood(F, 4, x, 2).size(), 13u);
}

TEST(Filtration, AncestorMapPointsToContainingAtom) {
    auto F = random_filtration(1, 7, 9);
    auto anc = ancestor_map(F, 3, 7);
    const auto& fine = F.partition(7, 0);
    const auto& coarse = F.partition(3, 0);
    for (int j = 0; j < fine.atom_count(); ++j) {
        auto c = coarse.atom(anc[0][j]);
        EXPECT_LE(c.lo, fine.atom(j).lo);
        EXPECT_GE(c.hi, fine.atom(j).hi);
    }
}

TEST(Filtration, JsonRoundTrip) {
    auto F = random_filtration(2, 5, 21);
    auto G = filtration_from_json(to_json(F));
    EXPECT_EQ(to_json(G).dump(), to_json(F).dump());
    for (int n = 1; n <= 5; ++n)
        for (int l = 0; l < 2; ++l) EXPECT_EQ(G.partition(n, l), F.partition(n, l));
}

TEST(AtomSet, MembershipAndSubsets) {
    AtomSet a(2, {4, 4}), b(2, {4, 4});
    a.insert(AtomIndex{{1, 2}});
    b.insert(AtomIndex{{1, 2}});
    b.insert(AtomIndex{{3, 3}});
    EXPECT_EQ(a.size(), 1u);
    EXPECT_TRUE(a.subset_of(b));
    EXPECT_FALSE(b.subset_of(a));
    EXPECT_TRUE(b.contains(AtomIndex{{3, 3}}));
    EXPECT_EQ(b.members().size(), 2u);
}
