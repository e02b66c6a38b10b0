/**
 * @file sequence.hpp
 * @brief Martingale spline sequences, convergence probes and the machinery for
 *        filtrations that stop refining somewhere (V-sets, limit duals).
 */
#pragma once

#include "martspline/filtration.hpp"
#include "martspline/maximal.hpp"
#include "martspline/measures.hpp"
#include "martspline/projector.hpp"
#include "martspline/random.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace martspline {

/// g_n for n = 1..N_max: P_n f for a function source, Σ_i ∫N_i dν · N*_i for a measure.
struct MartingaleSplineSequence {
    std::vector<int> orders;
    std::vector<TensorSpline> splines;  ///< splines[n-1] = g_n
    int value_dim = 1;

    int depth() const { return static_cast<int>(splines.size()); }
    const TensorSpline& at(int n) const { return splines.at(static_cast<std::size_t>(n - 1)); }
};

inline MartingaleSplineSequence make_sequence(const TensorFiltration& F, const VectorFunction& f,
                                              const std::vector<int>& k, int n_max, int g = 0) {
    if (n_max < 1 || n_max > F.depth()) throw std::invalid_argument("make_sequence: invalid depth");
    MartingaleSplineSequence s{k, {}, f.m};
    for (int n = 1; n <= n_max; ++n) s.splines.push_back(TensorProjector(F, n, k).project_function(f, g));
    return s;
}

inline MartingaleSplineSequence make_sequence(const TensorFiltration& F, const HybridMeasure& nu,
                                              const std::vector<int>& k, int n_max) {
    if (n_max < 1 || n_max > F.depth()) throw std::invalid_argument("make_sequence: invalid depth");
    // The density moments are quadrature sums on the level-n_max atoms; coarser levels use
    // P_n ν = P_n P_{n+1} ν, applied exactly, so every level sees the same discrete functional.
    MartingaleSplineSequence s{k, {}, nu.value_dim()};
    std::vector<TensorSpline> down;
    down.push_back(TensorProjector(F, n_max, k).project_measure(nu));
    for (int n = n_max - 1; n >= 1; --n) down.push_back(TensorProjector(F, n, k).project_spline(down.back()));
    s.splines.assign(std::make_move_iterator(down.rbegin()), std::make_move_iterator(down.rend()));
    return s;
}

/// Uniform points in I^d, redrawn when a coordinate is within `gap` of a breakpoint
/// of the deepest level (which holds the breakpoints of every level).
inline std::vector<Point> probe_points(const TensorFiltration& F, int count, std::uint64_t seed, double gap = 1e-9) {
    Rng rng(seed);
    const int d = F.dim();
    const int N = F.depth();
    std::vector<Point> pts;
    pts.reserve(static_cast<std::size_t>(count));
    while (static_cast<int>(pts.size()) < count) {
        Point x(static_cast<std::size_t>(d));
        bool ok = true;
        for (int l = 0; l < d; ++l) {
            Interval I = F.axis(l).domain();
            x[l] = rng.uniform(I.lo, I.hi);
            const auto& bp = F.partition(N, l).breakpoints();
            auto it = std::lower_bound(bp.begin(), bp.end(), x[l]);
            if (it != bp.end() && *it - x[l] < gap) ok = false;
            if (it != bp.begin() && x[l] - *(it - 1) < gap) ok = false;
        }
        if (ok) pts.push_back(std::move(x));
    }
    return pts;
}

/// max over n and probes of ‖P_n g_{n+1}(y) − g_n(y)‖, with P_n applied exactly.
inline double verify_martingale_property(const TensorFiltration& F, const MartingaleSplineSequence& seq,
                                         const std::vector<Point>& probes) {
    if (seq.depth() < 2) throw std::invalid_argument("verify_martingale_property: need at least two levels");
    double worst = 0.0;
    for (int n = 1; n < seq.depth(); ++n) {
        TensorProjector P(F, n, seq.orders);
        TensorSpline h = P.project_spline(seq.at(n + 1));
        std::vector<double> a(static_cast<std::size_t>(seq.value_dim)), b(a.size());
        for (const auto& y : probes) {
            h.evaluate(y, a);
            seq.at(n).evaluate(y, b);
            double e = 0.0;
            for (std::size_t c = 0; c < a.size(); ++c) e += (a[c] - b[c]) * (a[c] - b[c]);
            worst = std::max(worst, std::sqrt(e));
        }
    }
    return worst;
}

struct ConvergenceProbe {
    std::vector<Point> points;
    std::vector<std::vector<double>> errors;  ///< errors[p][n-1] = ‖g_n(y_p) − ref(y_p)‖
    double tolerance = 0.0;
    double fraction_converged = 0.0;          ///< share of points with final error < tolerance
    double max_final_error = 0.0;
    double median_rate = 0.0;                 ///< median per-level log2 decay of the error over the last levels
};

using Reference = std::function<std::vector<double>(std::span<const double>)>;

inline ConvergenceProbe convergence_probe(const MartingaleSplineSequence& seq, const Reference& ref,
                                          std::vector<Point> points, double tolerance) {
    ConvergenceProbe cp;
    cp.points = std::move(points);
    cp.tolerance = tolerance;
    std::vector<double> rates;
    std::size_t ok = 0;
    for (const auto& y : cp.points) {
        auto r = ref(y);
        std::vector<double> e;
        for (int n = 1; n <= seq.depth(); ++n) {
            auto v = seq.at(n).evaluate(y);
            double s = 0.0;
            for (std::size_t c = 0; c < v.size(); ++c) s += (v[c] - r[c]) * (v[c] - r[c]);
            e.push_back(std::sqrt(s));
        }
        double fin = e.back();
        if (fin < tolerance) ++ok;
        cp.max_final_error = std::max(cp.max_final_error, fin);
        int span = std::min(3, seq.depth() - 1);
        if (span >= 1 && e[e.size() - 1 - span] > 0.0 && fin > 0.0)
            rates.push_back(std::log2(e[e.size() - 1 - span] / fin) / span);
        cp.errors.push_back(std::move(e));
    }
    cp.fraction_converged = cp.points.empty() ? 1.0 : static_cast<double>(ok) / cp.points.size();
    if (!rates.empty()) {
        std::nth_element(rates.begin(), rates.begin() + rates.size() / 2, rates.end());
        cp.median_rate = rates[rates.size() / 2];
    }
    return cp;
}

inline Reference reference_from(const VectorFunction& f) {
    return [f](std::span<const double> x) { return f(x); };
}

inline Reference reference_from(const TensorSpline& s) {
    return [&s](std::span<const double> x) { return s.evaluate(x); };
}

// ---------------------------------------------------------------------------
// V-sets

struct VInterval {
    Interval span;
    int first_atom = 0;          ///< atom positions on the deepest level
    int last_atom = 0;
    bool left_accumulates = false;   ///< breakpoints approach the left endpoint from outside V
    bool right_accumulates = false;
    bool ambiguous = false;          ///< some atom width within a factor 2 of the tolerance
};

struct VSetReport {
    std::vector<VInterval> intervals;
    double tolerance = 0.0;
    int level = 0;
    /// Finite runs only see which atoms have stopped refining so far.
    std::string note = "classification by tolerance on a finite filtration: frozen so far, not frozen forever";
};

/// Atoms of the deepest level that persisted from the previous level and are at
/// least `tolerance` wide are frozen; maximal runs of frozen atoms are V-intervals.
inline VSetReport detect_v_sets(const Filtration1D& F1, double tolerance) {
    const int N = F1.depth();
    const auto& last = F1.level(N);
    VSetReport rep;
    rep.tolerance = tolerance;
    rep.level = N;
    const int atoms = last.atom_count();
    std::vector<char> frozen(static_cast<std::size_t>(atoms), 0);
    std::vector<char> near(static_cast<std::size_t>(atoms), 0);
    for (int j = 0; j < atoms; ++j) {
        Interval a = last.atom(j);
        bool persisted = true;
        if (N > 1) {
            const auto& prev = F1.level(N - 1);
            int jp = prev.locate(a.hi);
            persisted = prev.atom(jp).lo == a.lo && prev.atom(jp).hi == a.hi;
        }
        frozen[j] = persisted && a.length() >= tolerance;
        near[j] = a.length() >= 0.5 * tolerance && a.length() <= 2.0 * tolerance;
    }
    int j = 0;
    while (j < atoms) {
        if (!frozen[j]) { ++j; continue; }
        int e = j;
        while (e + 1 < atoms && frozen[e + 1]) ++e;
        VInterval v;
        v.span = {last.atom(j).lo, last.atom(e).hi};
        v.first_atom = j;
        v.last_atom = e;
        v.left_accumulates = j > 0;
        v.right_accumulates = e + 1 < atoms;
        for (int r = std::max(0, j - 1); r <= std::min(atoms - 1, e + 1); ++r)
            if (near[r]) v.ambiguous = true;
        rep.intervals.push_back(v);
        j = e + 1;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Limit dual B-splines

/// Which end of V the basis index r counts from. A V endpoint that is a fixed
/// breakpoint (not approached by others) keeps the index meaningful across levels.
enum class Anchor { Left, Right };

struct LimitDualTable {
    int r = 0;                      ///< basis index counted from the anchored end of V
    Anchor anchor = Anchor::Left;
    int first_level = 0;            ///< first level at which V is resolved
    std::vector<double> probes;
    std::vector<std::vector<double>> values;  ///< values[n - first_level][p] = N*_{n, anchor_n + r}(y_p)
    std::vector<double> deltas;     ///< deltas[n - first_level] = max_p |values_n − values_{n-1}| (0 for the first)
    double final_delta = 0.0;
    bool decay_ok = true;           ///< |N̄*(y)|·|conv| ≤ Ĉ q̂^{distance} at the deepest level
    double decay_worst_ratio = 0.0; ///< max of |N̄*(y)|·|conv| / (Ĉ q̂^distance)
    double C_hat = 0.0;
    double q_hat = 0.0;
};

/// Position of breakpoint x in p, or -1.
inline int breakpoint_position(const Partition1D& p, double x) {
    const auto& bp = p.breakpoints();
    auto it = std::find(bp.begin(), bp.end(), x);
    return it == bp.end() ? -1 : static_cast<int>(it - bp.begin());
}

inline int atoms_in(const Partition1D& p, const Interval& V) {
    int c = 0;
    for (int j = 0; j < p.atom_count(); ++j)
        if (V.lo <= p.atom(j).lo && p.atom(j).hi <= V.hi) ++c;
    return c;
}

inline LimitDualTable limit_dual_table(const Filtration1D& F1, const Interval& V, int k, int r,
                                       const std::vector<double>& probes, Anchor anchor = Anchor::Left) {
    LimitDualTable t;
    t.r = r;
    t.anchor = anchor;
    t.probes = probes;
    for (double y : probes)
        if (!V.contains(y)) throw std::invalid_argument("limit_dual_table: probe outside V");
    const int N = F1.depth();
    int first = 0;
    const double end = anchor == Anchor::Left ? V.lo : V.hi;
    // first level where the anchor is a breakpoint and the r-th basis from it exists
    auto index_at = [&](const Partition1D& p) {
        const int pos = breakpoint_position(p, end);
        if (pos < 0) return -1;
        const int i = anchor == Anchor::Left ? pos + r : pos + k - 2 - r;
        return i >= 0 && i < p.atom_count() + k - 1 ? i : -1;
    };
    for (int n = 1; n <= N; ++n)
        if (index_at(F1.level(n)) >= 0) { first = n; break; }
    if (first == 0) throw std::invalid_argument("limit_dual_table: V is never resolved by the filtration");
    t.first_level = first;
    const auto& lastp = F1.level(N);
    const int atoms_in_V = atoms_in(lastp, V);
    if (r < 0 || r > atoms_in_V + k - 2) throw std::invalid_argument("limit_dual_table: basis never meets V");

    for (int n = first; n <= N; ++n) {
        const auto& p = F1.level(n);
        GramSystem gs(SplineSpace1D(p, k));
        // Left: the first basis meeting the atom right of V.lo; Right: the last
        // basis meeting the atom left of V.hi.
        const int i = index_at(p);
        if (i < 0) throw std::invalid_argument("limit_dual_table: basis index out of range");
        auto coef = gs.dual_coefficients(i);
        std::vector<double> vals;
        for (double y : probes) vals.push_back(gs.space().evaluate(coef, y));
        double delta = 0.0;
        if (!t.values.empty())
            for (std::size_t q = 0; q < vals.size(); ++q) delta = std::max(delta, std::abs(vals[q] - t.values.back()[q]));
        t.deltas.push_back(delta);
        t.values.push_back(std::move(vals));
        if (n == N) {
            // decay check against the deepest level's fitted constants
            if (gs.dim() >= 2 * k) {
                auto prof = decay_profile(gs);
                t.C_hat = prof.C_hat;
                t.q_hat = prof.q_hat;
                auto [e0, e1] = gs.space().support_atoms(i);
                const auto& bp = p.breakpoints();
                for (std::size_t q = 0; q < probes.size(); ++q) {
                    int j = p.locate(probes[q]);
                    int s = j < e0 ? e0 - j : (j > e1 ? j - e1 : 0);
                    double conv = bp[std::max(j, e1) + 1] - bp[std::min(j, e0)];
                    double lhs = std::abs(t.values.back()[q]) * conv;
                    double rhs = prof.C_hat * qpow(prof.q_hat, s);
                    double ratio = rhs > 0.0 ? lhs / rhs : (lhs > 0.0 ? INFINITY : 0.0);
                    t.decay_worst_ratio = std::max(t.decay_worst_ratio, ratio);
                    if (ratio > 1.0 + 1e-9) t.decay_ok = false;
                }
            }
        }
    }
    t.final_delta = t.deltas.back();
    return t;
}

}  // namespace martspline
