/**
 * @file measures.hpp
 * @brief Finitely additive ℝ^m-valued measures on the atom algebra.
 *
 * A HybridMeasure is an integrable density plus a finite list of point
 * masses, so the split into an absolutely continuous part and a part singular
 * to Lebesgue measure is explicit in the representation. Point-mass membership
 * follows the (lo, hi] convention; closed mode counts a point mass in every
 * atom whose closure contains it (at most 2^d atoms).
 */
#pragma once

#include "martspline/filtration.hpp"
#include "martspline/quadrature.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace martspline {

using VectorFn = std::function<void(std::span<const double>, std::span<double>)>;

/// Callable I^d → ℝ^m.
struct VectorFunction {
    int m = 1;
    VectorFn fn;
    /// Polynomial degree per axis when the function is a (piecewise) polynomial, else -1.
    int polynomial_degree = -1;

    std::vector<double> operator()(std::span<const double> x) const {
        std::vector<double> v(static_cast<std::size_t>(m));
        fn(x, v);
        return v;
    }
};

inline VectorFunction scalar_function(std::function<double(std::span<const double>)> f, int degree = -1) {
    return {1, [f = std::move(f)](std::span<const double> x, std::span<double> out) { out[0] = f(x); }, degree};
}

inline double euclidean_norm(std::span<const double> v) {
    double s = 0.0;
    for (double c : v) s += c * c;
    return std::sqrt(s);
}

/// Quadrature points per axis: max(k, 4) for polynomials, 16 otherwise.
inline int quadrature_points_for(const VectorFunction& f, int k) {
    if (f.polynomial_degree >= 0) return std::max({k, 4, (f.polynomial_degree + k + 1) / 2 + 1});
    return 16;
}

using MeasureValue = std::vector<double>;

struct Dirac {
    Point at;
    std::vector<double> mass;
};

/// Tensor Gauss–Legendre integral of f over a rectangle (accumulated into out).
inline void integrate_rect(const VectorFunction& f, const Rect& r, const GaussLegendre& gl, std::span<double> out) {
    const std::size_t d = r.size();
    const int g = gl.size();
    std::vector<int> o(d, 0);
    Point x(d);
    std::vector<double> v(static_cast<std::size_t>(f.m));
    while (true) {
        double w = 1.0;
        for (std::size_t l = 0; l < d; ++l) {
            x[l] = gl.node(o[l], r[l].lo, r[l].hi);
            w *= gl.weight(o[l], r[l].lo, r[l].hi);
        }
        f.fn(x, v);
        for (int c = 0; c < f.m; ++c) out[c] += w * v[c];
        std::size_t l = d;
        bool done = true;
        while (l-- > 0) {
            if (++o[l] < g) { done = false; break; }
            o[l] = 0;
        }
        if (done) return;
    }
}

class HybridMeasure {
public:
    HybridMeasure() = default;
    HybridMeasure(int d, int m) : d_(d), m_(m) {
        if (d < 1 || m < 1) throw std::invalid_argument("HybridMeasure: need d >= 1 and m >= 1");
    }

    int dim() const { return d_; }
    int value_dim() const { return m_; }

    void set_density(VectorFunction f, int quadrature_points = 16) {
        if (f.m != m_) throw std::invalid_argument("HybridMeasure: density value dimension mismatch");
        density_ = std::move(f);
        has_density_ = true;
        quadrature_points_ = quadrature_points;
    }

    void add_dirac(Point at, std::vector<double> mass) {
        if (static_cast<int>(at.size()) != d_) throw std::invalid_argument("HybridMeasure: Dirac dimension mismatch");
        if (static_cast<int>(mass.size()) != m_) throw std::invalid_argument("HybridMeasure: Dirac mass dimension mismatch");
        for (double c : mass)
            if (!std::isfinite(c)) throw std::invalid_argument("HybridMeasure: non-finite mass");
        diracs_.push_back({std::move(at), std::move(mass)});
    }

    bool has_density() const { return has_density_; }
    const VectorFunction& density() const { return density_; }
    const std::vector<Dirac>& diracs() const { return diracs_; }
    int quadrature_points() const { return quadrature_points_; }

    /// Throws std::domain_error if a point mass lies outside (a,b]^d.
    void check_support(const Rect& domain) const {
        for (const auto& dm : diracs_)
            if (!rect_contains(domain, dm.at)) throw std::domain_error("HybridMeasure: Dirac located outside the domain");
    }

private:
    int d_ = 1;
    int m_ = 1;
    VectorFunction density_;
    bool has_density_ = false;
    int quadrature_points_ = 16;
    std::vector<Dirac> diracs_;
};

/// θ(A) for a rectangle A: density quadrature plus the point masses in A (or its closure).
inline MeasureValue measure_of_atom(const HybridMeasure& theta, const Rect& A, bool closed = false) {
    MeasureValue v(static_cast<std::size_t>(theta.value_dim()), 0.0);
    if (theta.has_density()) integrate_rect(theta.density(), A, GaussLegendre(theta.quadrature_points()), v);
    for (const auto& dm : theta.diracs()) {
        bool in = closed ? rect_contains_closed(A, dm.at) : rect_contains(A, dm.at);
        if (in)
            for (int c = 0; c < theta.value_dim(); ++c) v[c] += dm.mass[c];
    }
    return v;
}

/// θ of a union of level-n atoms; a point mass on a shared face is counted once.
inline MeasureValue measure_of_set(const HybridMeasure& theta, const TensorFiltration& F, const AtomSet& S,
                                   bool closed = false) {
    MeasureValue v(static_cast<std::size_t>(theta.value_dim()), 0.0);
    const auto members = S.members();
    if (theta.has_density()) {
        GaussLegendre gl(theta.quadrature_points());
        for (const auto& i : members) integrate_rect(theta.density(), F.atom_rect(S.level(), i), gl, v);
    }
    for (const auto& dm : theta.diracs()) {
        bool in = false;
        for (const auto& i : members) {
            Rect r = F.atom_rect(S.level(), i);
            if (closed ? rect_contains_closed(r, dm.at) : rect_contains(r, dm.at)) { in = true; break; }
        }
        if (in)
            for (int c = 0; c < theta.value_dim(); ++c) v[c] += dm.mass[c];
    }
    return v;
}

struct TotalVariation {
    double partition_sum = 0.0;  ///< Σ over level-n atoms of ‖θ(A)‖, a lower bound
    double exact = 0.0;          ///< ∫‖g‖ dλ + Σ ‖mass‖
};

inline TotalVariation total_variation(const HybridMeasure& theta, const TensorFiltration& F, int n) {
    F.check_level(n);
    TotalVariation tv;
    const std::size_t atoms = F.atom_count(n);
    std::vector<double> norm_density(1, 0.0);
    VectorFunction abs_density;
    if (theta.has_density()) {
        const auto& f = theta.density();
        abs_density = {1, [&f](std::span<const double> x, std::span<double> out) {
                           std::vector<double> v(static_cast<std::size_t>(f.m));
                           f.fn(x, v);
                           out[0] = euclidean_norm(v);
                       }};
    }
    GaussLegendre gl(theta.quadrature_points());
    for (std::size_t f = 0; f < atoms; ++f) {
        Rect r = F.atom_rect(n, F.unflat(n, f));
        tv.partition_sum += euclidean_norm(measure_of_atom(theta, r));
        if (theta.has_density()) integrate_rect(abs_density, r, gl, norm_density);
    }
    tv.exact = norm_density[0];
    for (const auto& dm : theta.diracs()) tv.exact += euclidean_norm(dm.mass);
    return tv;
}

/// Absolutely continuous part (density only) and singular part (point masses only).
inline std::pair<HybridMeasure, HybridMeasure> lebesgue_parts(const HybridMeasure& theta) {
    HybridMeasure cont(theta.dim(), theta.value_dim());
    HybridMeasure sing(theta.dim(), theta.value_dim());
    if (theta.has_density()) cont.set_density(theta.density(), theta.quadrature_points());
    for (const auto& dm : theta.diracs()) sing.add_dirac(dm.at, dm.mass);
    return {std::move(cont), std::move(sing)};
}

/// Scalar variation measure: density ‖g‖ and masses ‖m‖.
inline HybridMeasure variation_measure(const HybridMeasure& theta) {
    HybridMeasure v(theta.dim(), 1);
    if (theta.has_density()) {
        VectorFunction g = theta.density();
        v.set_density({1,
                       [g](std::span<const double> x, std::span<double> out) {
                           std::vector<double> val(static_cast<std::size_t>(g.m));
                           g.fn(x, val);
                           out[0] = euclidean_norm(val);
                       }},
                      theta.quadrature_points());
    }
    for (const auto& dm : theta.diracs()) v.add_dirac(dm.at, {euclidean_norm(dm.mass)});
    return v;
}

/// Union of the level-n atoms containing the point masses, a witness that the
/// singular part and Lebesgue measure are mutually singular: its volume
/// shrinks with n while the singular part puts no mass outside it.
inline AtomSet singular_witness(const HybridMeasure& theta, const TensorFiltration& F, int n) {
    AtomSet s(n, F.shape(n));
    for (const auto& dm : theta.diracs()) s.insert(atom_index_of(F, n, dm.at));
    return s;
}

/// Masses of a nonnegative scalar measure on the atoms of every level 1..finest
/// (flat per level). The density part is integrated on the finest level and
/// summed upward, so the result is exactly additive across levels.
inline std::vector<std::vector<double>> level_masses(const HybridMeasure& theta, const TensorFiltration& F,
                                                     int finest, bool closed = false) {
    if (theta.value_dim() != 1) throw std::invalid_argument("level_masses: scalar measure required");
    F.check_level(finest);
    theta.check_support(F.domain());
    const int d = F.dim();
    std::vector<std::vector<double>> out(static_cast<std::size_t>(finest));
    std::vector<double> fine(F.atom_count(finest), 0.0);
    if (theta.has_density()) {
        GaussLegendre gl(theta.quadrature_points());
        std::vector<double> v(1);
        for (std::size_t f = 0; f < fine.size(); ++f) {
            v[0] = 0.0;
            integrate_rect(theta.density(), F.atom_rect(finest, F.unflat(finest, f)), gl, v);
            if (v[0] < 0.0) throw std::invalid_argument("level_masses: negative density mass");
            fine[f] = v[0];
        }
    }
    for (int n = 1; n <= finest; ++n) {
        auto& m = out[static_cast<std::size_t>(n - 1)];
        m.assign(F.atom_count(n), 0.0);
        auto anc = ancestor_map(F, n, finest);
        auto fshape = F.shape(finest);
        auto cshape = F.shape(n);
        for (std::size_t f = 0; f < fine.size(); ++f) {
            if (fine[f] == 0.0) continue;
            std::size_t r = f, cf = 0, mult = 1;
            for (int l = d - 1; l >= 0; --l) {
                int j = static_cast<int>(r % static_cast<std::size_t>(fshape[l]));
                r /= static_cast<std::size_t>(fshape[l]);
                cf += static_cast<std::size_t>(anc[l][j]) * mult;
                mult *= static_cast<std::size_t>(cshape[l]);
            }
            m[cf] += fine[f];
        }
        for (const auto& dm : theta.diracs()) {
            if (dm.mass[0] < 0.0) throw std::invalid_argument("level_masses: negative point mass");
            if (!closed) {
                m[F.flat(n, atom_index_of(F, n, dm.at))] += dm.mass[0];
                continue;
            }
            // every atom whose closure holds the point
            std::vector<std::vector<int>> cand(static_cast<std::size_t>(d));
            for (int l = 0; l < d; ++l) {
                const auto& p = F.partition(n, l);
                int j = p.locate_closed(dm.at[l]);
                cand[l].push_back(j);
                if (dm.at[l] == p.atom(j).hi && j + 1 < p.atom_count()) cand[l].push_back(j + 1);
            }
            std::vector<std::size_t> o(static_cast<std::size_t>(d), 0);
            while (true) {
                AtomIndex i{std::vector<int>(static_cast<std::size_t>(d))};
                for (int l = 0; l < d; ++l) i.coords[l] = cand[l][o[l]];
                m[F.flat(n, i)] += dm.mass[0];
                int l = d;
                bool done = true;
                while (l-- > 0) {
                    if (++o[l] < cand[l].size()) { done = false; break; }
                    o[l] = 0;
                }
                if (done) break;
            }
        }
    }
    return out;
}

}  // namespace martspline
