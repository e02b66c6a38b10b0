/**
 * @file maximal.hpp
 * @brief Level sums Σ_A b_n(q, θ, A, x), the maximal operator M_K and the
 *        covering bound for its superlevel sets.
 *
 * Every level sum is constant on the atoms of its level, so M_K θ truncated at
 * N_max is constant on the atoms of level N_max and superlevel volumes are sums
 * of atom volumes. Level sums are computed with the separable kernel
 * q^{|i-j|} / hull(i, j) applied one axis at a time.
 */
#pragma once

#include "martspline/filtration.hpp"
#include "martspline/measures.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace martspline {

/// q^s with 0^0 = 1.
inline double qpow(double q, int s) { return s == 0 ? 1.0 : std::pow(q, static_cast<double>(s)); }

/// |conv(A_i ∪ A_j)| at level n.
inline double conv_volume(const TensorFiltration& F, int n, const AtomIndex& i, const AtomIndex& j) {
    double v = 1.0;
    for (int l = 0; l < F.dim(); ++l) {
        const auto& bp = F.partition(n, l).breakpoints();
        v *= bp[std::max(i[l], j[l]) + 1] - bp[std::min(i[l], j[l])];
    }
    return v;
}

inline void check_q(double q) {
    if (!(q >= 0.0 && q < 1.0)) throw std::invalid_argument("q must lie in [0, 1)");
}

/// b_n(q, θ, A, x) = q^{d_n(A, A_n(x))} θ(A) / |conv(A ∪ A_n(x))|.
inline double b_term(double q, const HybridMeasure& theta, const TensorFiltration& F, int n, const AtomIndex& A,
                     std::span<const double> x, bool closed = false) {
    check_q(q);
    if (theta.value_dim() != 1) throw std::invalid_argument("b_term: scalar measure required");
    F.check_level(n);
    if (!F.valid_index(n, A)) throw std::out_of_range("b_term: atom index out of range");
    double mass = measure_of_atom(theta, F.atom_rect(n, A), closed)[0];
    if (mass < 0.0) throw std::invalid_argument("b_term: negative measure (use the variation measure)");
    AtomIndex ax = atom_index_of(F, n, x);
    return qpow(q, l1_distance(A, ax)) * mass / conv_volume(F, n, A, ax);
}

/// Σ over level-n atoms of b_n, by direct enumeration.
inline double level_sum(double q, const HybridMeasure& theta, const TensorFiltration& F, int n,
                        std::span<const double> x, bool closed = false) {
    double s = 0.0;
    for (std::size_t f = 0; f < F.atom_count(n); ++f) s += b_term(q, theta, F, n, F.unflat(n, f), x, closed);
    return s;
}

/// Level sums at every level-n atom from the atom masses (flat, level n).
inline std::vector<double> level_sums_from_masses(double q, const TensorFiltration& F, int n,
                                                  std::span<const double> masses) {
    check_q(q);
    const int d = F.dim();
    auto shape = F.shape(n);
    std::vector<double> cur(masses.begin(), masses.end());
    for (double v : cur)
        if (v < 0.0) throw std::invalid_argument("level sums: negative atom mass");
    for (int l = 0; l < d; ++l) {
        const auto& bp = F.partition(n, l).breakpoints();
        const int N = shape[l];
        std::vector<double> K(static_cast<std::size_t>(N) * N, 0.0);
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) {
                int s = std::abs(i - j);
                if (q == 0.0 && s > 0) continue;
                K[static_cast<std::size_t>(i) * N + j] = qpow(q, s) / (bp[std::max(i, j) + 1] - bp[std::min(i, j)]);
            }
        std::size_t outer = 1, inner = 1;
        for (int a = 0; a < l; ++a) outer *= static_cast<std::size_t>(shape[a]);
        for (int a = l + 1; a < d; ++a) inner *= static_cast<std::size_t>(shape[a]);
        std::vector<double> next(cur.size(), 0.0);
        for (std::size_t o = 0; o < outer; ++o)
            for (int i = 0; i < N; ++i) {
                double* t = next.data() + (o * N + i) * inner;
                for (int j = 0; j < N; ++j) {
                    double kij = K[static_cast<std::size_t>(i) * N + j];
                    if (kij == 0.0) continue;
                    const double* s = cur.data() + (o * N + j) * inner;
                    for (std::size_t r = 0; r < inner; ++r) t[r] += kij * s[r];
                }
            }
        cur = std::move(next);
    }
    return cur;
}

/// max over n ∈ [K, N_max] of the level sums, one value per level-N_max atom.
struct MaximalField {
    int K = 1;
    int n_max = 1;
    double q = 0.0;
    std::vector<int> shape;       ///< level-N_max atom grid
    std::vector<double> values;   ///< flat, level N_max
    std::vector<double> volumes;  ///< atom volumes, flat, level N_max
};

inline std::vector<double> atom_volumes(const TensorFiltration& F, int n) {
    std::vector<double> v(F.atom_count(n));
    for (std::size_t f = 0; f < v.size(); ++f) v[f] = volume(F.atom_rect(n, F.unflat(n, f)));
    return v;
}

/// Flat index at level n of the ancestor of each level-`finest` atom.
inline std::vector<std::size_t> ancestor_flat(const TensorFiltration& F, int n, int finest) {
    auto anc = ancestor_map(F, n, finest);
    auto fshape = F.shape(finest);
    auto cshape = F.shape(n);
    const int d = F.dim();
    std::vector<std::size_t> out(F.atom_count(finest));
    for (std::size_t f = 0; f < out.size(); ++f) {
        std::size_t r = f, cf = 0, mult = 1;
        for (int l = d - 1; l >= 0; --l) {
            int j = static_cast<int>(r % static_cast<std::size_t>(fshape[l]));
            r /= static_cast<std::size_t>(fshape[l]);
            cf += static_cast<std::size_t>(anc[l][j]) * mult;
            mult *= static_cast<std::size_t>(cshape[l]);
        }
        out[f] = cf;
    }
    return out;
}

/// Field from precomputed per-level masses (masses[n-1] flat at level n).
inline MaximalField maximal_field_from_masses(double q, const TensorFiltration& F, int K, int n_max,
                                              const std::vector<std::vector<double>>& masses) {
    if (K < 1 || n_max < K || n_max > F.depth()) throw std::invalid_argument("maximal_field: invalid level range");
    if (static_cast<int>(masses.size()) < n_max) throw std::invalid_argument("maximal_field: missing level masses");
    MaximalField mf;
    mf.K = K;
    mf.n_max = n_max;
    mf.q = q;
    mf.shape = F.shape(n_max);
    mf.volumes = atom_volumes(F, n_max);
    mf.values.assign(F.atom_count(n_max), 0.0);
    for (int n = K; n <= n_max; ++n) {
        auto sums = level_sums_from_masses(q, F, n, masses[static_cast<std::size_t>(n - 1)]);
        auto anc = ancestor_flat(F, n, n_max);
        for (std::size_t f = 0; f < mf.values.size(); ++f) mf.values[f] = std::max(mf.values[f], sums[anc[f]]);
    }
    return mf;
}

inline MaximalField maximal_field(double q, const HybridMeasure& theta, const TensorFiltration& F, int K, int n_max,
                                  bool closed = false) {
    if (K < 1 || n_max < K || n_max > F.depth()) throw std::invalid_argument("maximal_field: invalid level range");
    return maximal_field_from_masses(q, F, K, n_max, level_masses(theta, F, n_max, closed));
}

/// |{M > t}|, optionally restricted to a union of atoms of a coarser level (mask).
inline double superlevel_measure(const MaximalField& mf, double t, const std::vector<std::uint8_t>* restrict_to = nullptr) {
    if (!(t > 0.0)) throw std::invalid_argument("superlevel_measure: t must be positive");
    double v = 0.0;
    for (std::size_t f = 0; f < mf.values.size(); ++f)
        if (mf.values[f] > t && (!restrict_to || (*restrict_to)[f])) v += mf.volumes[f];
    return v;
}

/// Mask on level-`finest` atoms of the atoms contained in a level-n AtomSet.
inline std::vector<std::uint8_t> refine_mask(const TensorFiltration& F, const AtomSet& S, int finest) {
    auto anc = ancestor_flat(F, S.level(), finest);
    std::vector<std::uint8_t> m(anc.size());
    for (std::size_t f = 0; f < anc.size(); ++f) m[f] = S.contains_flat(anc[f]);
    return m;
}

// ---------------------------------------------------------------------------
// Covering bound

/// Σ_s ρ^s (s+1)^{d-1} θ(A_{K,s}(B)) with ρ = √q: partial sum up to the cutoff
/// plus a rigorous bound on the remaining tail.
struct SeriesValue {
    double partial = 0.0;
    double tail = 0.0;
    int cutoff = 0;
    double total() const { return partial + tail; }
};

/// Bound on Σ_{s>s0} ρ^s (s+1)^{d-1} through the term ratio, which decreases in s.
inline double geometric_poly_tail(double rho, int d, int s0) {
    if (rho == 0.0) return 0.0;
    int s = s0 + 1;
    auto term = [&](int u) { return std::pow(rho, u) * std::pow(u + 1.0, d - 1); };
    // advance until the ratio bound is below 1
    double r = rho * std::pow((s + 2.0) / (s + 1.0), d - 1);
    double acc = 0.0;
    while (r >= 1.0) {
        acc += term(s);
        ++s;
        r = rho * std::pow((s + 2.0) / (s + 1.0), d - 1);
    }
    return acc + term(s) / (1.0 - r);
}

/// Σ_{s=0}^∞ ρ^s (s+1)^{d-1} computed with the same cutoff rule.
inline double geometric_poly_sum(double rho, int d, double rel = 1e-12) {
    double partial = 0.0;
    int s = 0;
    while (true) {
        partial += std::pow(rho, s) * std::pow(s + 1.0, d - 1);
        double tail = geometric_poly_tail(rho, d, s);
        if (tail < rel * partial) return partial + tail;
        ++s;
    }
}

/// Series on the right of the covering bound for B a union of level-K atoms
/// and θ given by its level-K atom masses.
inline SeriesValue covering_series(const TensorFiltration& F, const AtomSet& B, std::span<const double> masses_K, double q,
                             double rel = 1e-12) {
    check_q(q);
    const int K = B.level();
    F.check_level(K);
    if (B.shape() != F.shape(K)) throw std::invalid_argument("covering_series: atom set does not match level");
    if (masses_K.size() != B.universe()) throw std::invalid_argument("covering_series: mass vector does not match level");
    const int d = F.dim();
    const double rho = std::sqrt(q);
    auto dist = l1_distance_transform(B.shape(), B.mask());
    int maxd = 0;
    bool any = false;
    for (int v : dist)
        if (v < kUnreachable) { maxd = std::max(maxd, v); any = true; }
    SeriesValue sv;
    if (!any) return sv;  // B empty
    std::vector<double> by_dist(static_cast<std::size_t>(maxd) + 1, 0.0);
    double total = 0.0;
    for (std::size_t f = 0; f < dist.size(); ++f) {
        by_dist[dist[f]] += masses_K[f];
        total += masses_K[f];
    }
    double cum = 0.0;
    int s = 0;
    while (true) {
        if (s <= maxd) cum += by_dist[s];
        double term = qpow(rho, s) * std::pow(s + 1.0, d - 1) * cum;
        sv.partial += term;
        if (s >= maxd) {
            double tail = total * geometric_poly_tail(rho, d, s);
            if (tail <= rel * sv.partial || sv.partial == 0.0) {
                sv.tail = tail;
                sv.cutoff = s;
                return sv;
            }
        }
        ++s;
    }
}

/// Proof constant 2^d c with c = (2/(1-√q))^d.
inline double covering_constant(double q, int d) {
    check_q(q);
    return std::pow(2.0, d) * std::pow(2.0 / (1.0 - std::sqrt(q)), d);
}

struct WeakTypeRow {
    double t = 0.0;
    double lhs = 0.0;
    double rhs = 0.0;
    double ratio = 0.0;
};

struct WeakTypeReport {
    std::vector<WeakTypeRow> rows;
    double constant = 0.0;  ///< 2^d (2/(1-√q))^d
    SeriesValue series;
    double max_ratio = 0.0;
    bool pass = true;
};

/// |B ∩ {M_K θ > t}| against (2^d c / t) · series for every t in the grid.
inline WeakTypeReport verify_covering_bound(const TensorFiltration& F, const HybridMeasure& theta, double q, int K,
                                            int n_max, const AtomSet& B, std::span<const double> t_grid) {
    if (B.level() != K) throw std::invalid_argument("verify_covering_bound: B must be a level-K atom set");
    auto masses = level_masses(theta, F, n_max);
    auto mf = maximal_field_from_masses(q, F, K, n_max, masses);
    auto mask = refine_mask(F, B, n_max);
    WeakTypeReport rep;
    rep.constant = covering_constant(q, F.dim());
    rep.series = covering_series(F, B, masses[static_cast<std::size_t>(K - 1)], q);
    for (double t : t_grid) {
        WeakTypeRow row;
        row.t = t;
        row.lhs = superlevel_measure(mf, t, &mask);
        row.rhs = rep.constant * rep.series.total() / t;
        row.ratio = row.rhs > 0.0 ? row.lhs / row.rhs : (row.lhs > 0.0 ? INFINITY : 0.0);
        rep.max_ratio = std::max(rep.max_ratio, row.ratio);
        if (!(row.lhs <= row.rhs)) rep.pass = false;
        rep.rows.push_back(row);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Hardy–Littlewood baseline (d = 1)

/// sup over breakpoint-delimited intervals (t_l, t_r] ⊇ atom j of the average of f,
/// with f given by its masses on the atoms of partition p.
inline std::vector<double> hl_maximal(const Partition1D& p, std::span<const double> masses) {
    const int N = p.atom_count();
    if (static_cast<int>(masses.size()) != N) throw std::invalid_argument("hl_maximal: mass count mismatch");
    const auto& t = p.breakpoints();
    std::vector<double> cum(static_cast<std::size_t>(N) + 1, 0.0);
    for (int j = 0; j < N; ++j) cum[j + 1] = cum[j] + masses[j];
    std::vector<double> field(static_cast<std::size_t>(N), 0.0), suf(static_cast<std::size_t>(N) + 2);
    for (int l = 0; l < N; ++l) {
        // suf[r] = max over r' >= r of avg(l, r')
        suf[N + 1] = -INFINITY;
        for (int r = N; r > l; --r) suf[r] = std::max(suf[r + 1], (cum[r] - cum[l]) / (t[r] - t[l]));
        for (int j = l; j < N; ++j) field[j] = std::max(field[j], suf[j + 1]);
    }
    return field;
}

inline std::vector<double> hl_maximal(const TensorFiltration& F, int n, std::span<const double> masses) {
    if (F.dim() != 1) throw std::invalid_argument("hl_maximal: only d = 1 is supported");
    return hl_maximal(F.partition(n, 0), masses);
}

// ---------------------------------------------------------------------------
// Restricted bound (shrunken set inside D)

struct RestrictedReport {
    bool found_K = false;
    int K = 0;
    int R = 0;
    double theta_D = 0.0;
    double epsilon = 0.0;
    bool theta_D_ok = false;
    double volume_D_minus_B = 0.0;
    double lhs = 0.0;        ///< |B ∩ {M_K θ > t}|, which contains B ∩ L_t
    double bound = 0.0;      ///< (2^d c/t)[Σ_{s≤R} ρ^s(s+1)^{d-1} θ(D) + Σ_{s>R} ρ^s(s+1)^{d-1} θ(I^d)]
    double set_lhs = 0.0;  ///< |D ∩ {M_K θ > t}|
    double set_bound = 0.0;  ///< ε/t + bound
    bool pass = false;
};

/// D is a union of atoms of its level; θ a nonnegative scalar measure. R is the
/// smallest integer with Σ_{s>R} ρ^s (s+1)^{d-1} θ(I^d) ≤ ε; B consists of the
/// level-K atoms inside D at ℓ¹ distance > R from the complement of D, and K is
/// the first level at which |D \ B| ≤ ε/t.
inline RestrictedReport restricted_limsup_bound(const TensorFiltration& F, const HybridMeasure& theta, const AtomSet& D,
                                                double epsilon, double t, double q, int n_max) {
    check_q(q);
    if (!(t > 0.0)) throw std::invalid_argument("restricted_limsup_bound: t must be positive");
    const int d = F.dim();
    const int nD = D.level();
    if (n_max < nD || n_max > F.depth()) throw std::invalid_argument("restricted_limsup_bound: invalid level range");
    RestrictedReport rep;
    rep.epsilon = epsilon;
    auto masses = level_masses(theta, F, n_max);
    const auto& mD = masses[static_cast<std::size_t>(nD - 1)];
    double total = 0.0;
    for (std::size_t f = 0; f < mD.size(); ++f) {
        total += mD[f];
        if (D.contains_flat(f)) rep.theta_D += mD[f];
    }
    rep.theta_D_ok = rep.theta_D <= epsilon;
    const double rho = std::sqrt(q);
    int R = 0;
    while (total * geometric_poly_tail(rho, d, R) > epsilon) ++R;
    rep.R = R;
    double head = 0.0;
    for (int s = 0; s <= R; ++s) head += qpow(rho, s) * std::pow(s + 1.0, d - 1);
    const double C = covering_constant(q, d);
    rep.bound = C / t * (head * rep.theta_D + geometric_poly_tail(rho, d, R) * total);
    rep.set_bound = epsilon / t + rep.bound;

    double volD = 0.0;
    for (std::size_t f = 0; f < D.universe(); ++f)
        if (D.contains_flat(f)) volD += volume(F.atom_rect(nD, F.unflat(nD, f)));

    for (int K = nD; K <= n_max; ++K) {
        AtomSet DK(K, F.shape(K));
        auto anc = ancestor_flat(F, nD, K);
        std::vector<std::uint8_t> outside(anc.size());
        for (std::size_t f = 0; f < anc.size(); ++f) {
            DK.mask()[f] = D.contains_flat(anc[f]);
            outside[f] = !DK.mask()[f];
        }
        auto dist = l1_distance_transform(F.shape(K), outside);
        AtomSet B(K, F.shape(K));
        double volB = 0.0;
        for (std::size_t f = 0; f < anc.size(); ++f)
            if (DK.mask()[f] && dist[f] > R) {
                B.insert_flat(f);
                volB += volume(F.atom_rect(K, F.unflat(K, f)));
            }
        rep.K = K;
        rep.volume_D_minus_B = volD - volB;
        if (rep.volume_D_minus_B <= epsilon / t) {
            rep.found_K = true;
            auto mf = maximal_field_from_masses(q, F, K, n_max, masses);
            auto maskB = refine_mask(F, B, n_max);
            auto maskD = refine_mask(F, D, n_max);
            rep.lhs = superlevel_measure(mf, t, &maskB);
            rep.set_lhs = superlevel_measure(mf, t, &maskD);
            break;
        }
    }
    rep.pass = rep.found_K && rep.theta_D_ok && rep.lhs <= rep.bound && rep.set_lhs <= rep.set_bound;
    return rep;
}

}  // namespace martspline
