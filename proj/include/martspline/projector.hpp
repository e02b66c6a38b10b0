/**
 * @file projector.hpp
 * @brief Gram systems, dual B-splines and the orthoprojector P_n.
 *
 * P_n f = Σ_i ⟨f, N_i⟩ N*_i. Coefficients solve (G_1 ⊗ … ⊗ G_d) c = b, which
 * is done by one banded solve per fiber along each tensor mode; the tensor Gram
 * is never formed.
 */
#pragma once

#include "martspline/banded.hpp"
#include "martspline/bspline.hpp"
#include "martspline/filtration.hpp"
#include "martspline/measures.hpp"
#include "martspline/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <stdexcept>
#include <vector>

namespace martspline {

class GramSystem {
public:
    GramSystem() = default;
    explicit GramSystem(SplineSpace1D space) : space_(std::move(space)) {
        const int k = space_.order();
        const int n = space_.dim();
        BandedSPD g(n, k - 1);
        GaussLegendre gl(k);
        for (int j = 0; j < space_.atom_count(); ++j) {
            Interval a = space_.partition().atom(j);
            for (int q = 0; q < gl.size(); ++q) {
                double x = gl.node(q, a.lo, a.hi);
                double w = gl.weight(q, a.lo, a.hi);
                ActiveBasis ab = space_.eval_in_atom(j, x);
                for (int r = 0; r < ab.count; ++r)
                    for (int s = 0; s <= r; ++s)
                        g.add_symmetric(ab.first + r, ab.first + s, w * ab.values[r] * ab.values[s]);
            }
        }
        gram_ = g;
        factor_ = std::move(g);
        if (int bad = factor_.factorize(); bad != 0)
            throw std::runtime_error("GramSystem: Cholesky failed at row " + std::to_string(bad - 1) +
                                     " (degenerate partition)");
    }

    const SplineSpace1D& space() const { return space_; }
    int dim() const { return space_.dim(); }
    int order() const { return space_.order(); }
    double entry(int i, int j) const { return gram_.entry(i, j); }
    std::vector<double> multiply(std::span<const double> x) const { return gram_.multiply(x); }
    void solve(std::span<double> b) const { factor_.solve(b); }
    void solve_strided(double* b, std::size_t stride) const { factor_.solve_strided(b, stride); }

    /// Row i of G^{-1}: the coefficients of N*_i in the B-spline basis.
    std::vector<double> dual_coefficients(int i) const {
        if (i < 0 || i >= dim()) throw std::out_of_range("dual_coefficients: index out of range");
        std::vector<double> e(static_cast<std::size_t>(dim()), 0.0);
        e[i] = 1.0;
        solve(e);
        return e;
    }

    double dual_eval(int i, double x) const {
        if (i < 0 || i >= dim()) throw std::out_of_range("dual_eval: index out of range");
        ActiveBasis ab = space_.eval_basis(x);
        auto y = dual_coefficients(i);
        double v = 0.0;
        for (int r = 0; r < ab.count; ++r) v += y[ab.first + r] * ab.values[r];
        return v;
    }

    /// All dual values at x in one solve: (N*_i(x))_i = G^{-1} N(x).
    std::vector<double> duals_at(const ActiveBasis& ab) const {
        std::vector<double> c(static_cast<std::size_t>(dim()), 0.0);
        for (int r = 0; r < ab.count; ++r) c[ab.first + r] = ab.values[r];
        solve(c);
        return c;
    }

private:
    SplineSpace1D space_;
    BandedSPD gram_;
    BandedSPD factor_;
};

inline std::vector<double> dual_values(const GramSystem& gs, double x) { return gs.duals_at(gs.space().eval_basis(x)); }

/// Entry of a per-axis sparse linear map, used for mode products.
struct AxisEntry {
    int row;
    int col;
    double value;
};

/// out = (⊗ maps along one axis) applied to a component-major tensor:
/// out[.., row, ..] += value * in[.., col, ..].
inline std::vector<double> mode_product(std::span<const double> in, const std::vector<int>& in_shape, int m, int axis,
                                        int out_dim, const std::vector<AxisEntry>& entries) {
    std::vector<int> out_shape = in_shape;
    out_shape[axis] = out_dim;
    std::size_t outer = 1, inner = 1;
    for (int l = 0; l < axis; ++l) outer *= static_cast<std::size_t>(in_shape[l]);
    for (std::size_t l = axis + 1; l < in_shape.size(); ++l) inner *= static_cast<std::size_t>(in_shape[l]);
    const std::size_t in_len = product_of(in_shape), out_len = product_of(out_shape);
    std::vector<double> out(out_len * static_cast<std::size_t>(m), 0.0);
    for (int c = 0; c < m; ++c) {
        const double* src = in.data() + c * in_len;
        double* dst = out.data() + c * out_len;
        for (std::size_t o = 0; o < outer; ++o)
            for (const auto& e : entries) {
                const double* s = src + (o * in_shape[axis] + e.col) * inner;
                double* t = dst + (o * out_dim + e.row) * inner;
                for (std::size_t r = 0; r < inner; ++r) t[r] += e.value * s[r];
            }
    }
    return out;
}

/// Cross Gram ∫ N_i M_j between two spaces on the same interval (sparse).
inline std::vector<AxisEntry> cross_gram(const SplineSpace1D& target, const SplineSpace1D& source) {
    std::vector<double> merged = target.partition().breakpoints();
    const auto& sb = source.partition().breakpoints();
    merged.insert(merged.end(), sb.begin(), sb.end());
    std::sort(merged.begin(), merged.end());
    merged.erase(std::unique(merged.begin(), merged.end()), merged.end());
    GaussLegendre gl(std::max(target.order(), source.order()));
    std::vector<AxisEntry> out;
    // accumulate into a map keyed by (row, col); supports overlap only locally
    std::vector<std::vector<std::pair<int, double>>> rows(static_cast<std::size_t>(target.dim()));
    auto add = [&](int i, int j, double v) {
        auto& r = rows[i];
        for (auto& [c, x] : r)
            if (c == j) { x += v; return; }
        r.emplace_back(j, v);
    };
    for (std::size_t a = 0; a + 1 < merged.size(); ++a) {
        double lo = merged[a], hi = merged[a + 1];
        double mid = 0.5 * (lo + hi);
        int jt = target.partition().locate(mid);
        int js = source.partition().locate(mid);
        for (int q = 0; q < gl.size(); ++q) {
            double x = gl.node(q, lo, hi);
            double w = gl.weight(q, lo, hi);
            ActiveBasis at = target.eval_in_atom(jt, x);
            ActiveBasis as = source.eval_in_atom(js, x);
            for (int r = 0; r < at.count; ++r)
                for (int s = 0; s < as.count; ++s) add(at.first + r, as.first + s, w * at.values[r] * as.values[s]);
        }
    }
    for (int i = 0; i < target.dim(); ++i)
        for (auto [j, v] : rows[i]) out.push_back({i, j, v});
    return out;
}

class TensorProjector {
public:
    TensorProjector() = default;
    explicit TensorProjector(std::vector<SplineSpace1D> spaces) {
        if (spaces.empty()) throw std::invalid_argument("TensorProjector: need d >= 1");
        for (auto& s : spaces) grams_.emplace_back(std::move(s));
        for (const auto& g : grams_) shape_.push_back(g.dim());
        strides_ = strides_of(shape_);
    }
    TensorProjector(const TensorFiltration& F, int n, const std::vector<int>& orders)
        : TensorProjector((F.check_level(n), tensor_spaces(F, n, orders))) {}

    int dim() const { return static_cast<int>(grams_.size()); }
    const GramSystem& gram(int l) const { return grams_[l]; }
    const std::vector<GramSystem>& grams() const { return grams_; }
    const std::vector<int>& shape() const { return shape_; }
    std::size_t size() const { return product_of(shape_); }
    std::vector<int> orders() const {
        std::vector<int> k;
        for (const auto& g : grams_) k.push_back(g.order());
        return k;
    }
    std::vector<SplineSpace1D> spaces() const {
        std::vector<SplineSpace1D> s;
        for (const auto& g : grams_) s.push_back(g.space());
        return s;
    }
    Rect domain() const {
        Rect r;
        for (const auto& g : grams_) r.push_back(g.space().domain());
        return r;
    }

    /// In place: c ← (G_1 ⊗ … ⊗ G_d)^{-1} c for each of m components.
    void apply_inverse(std::vector<double>& c, int m) const {
        const std::size_t len = size();
        for (int comp = 0; comp < m; ++comp) {
            double* base = c.data() + comp * len;
            for (int l = 0; l < dim(); ++l) {
                const std::size_t stride = strides_[l];
                const std::size_t span_l = stride * static_cast<std::size_t>(shape_[l]);
                for (std::size_t outer = 0; outer < len; outer += span_l)
                    for (std::size_t r = 0; r < stride; ++r) grams_[l].solve_strided(base + outer + r, stride);
            }
        }
    }

    /// b_i = ∫ f N_i with g Gauss–Legendre points per atom per axis.
    std::vector<double> load_function(const VectorFunction& f, int g) const {
        if (g < 1) throw std::invalid_argument("load_function: need g >= 1");
        const int d = dim();
        const std::size_t len = size();
        std::vector<double> b(len * static_cast<std::size_t>(f.m), 0.0);
        GaussLegendre gl(g);
        // per axis: nodes, weights and active bases for every (atom, node)
        std::vector<std::vector<double>> xs(d), ws(d);
        std::vector<std::vector<ActiveBasis>> act(d);
        std::vector<int> npts(d);
        for (int l = 0; l < d; ++l) {
            const auto& s = grams_[l].space();
            for (int j = 0; j < s.atom_count(); ++j) {
                Interval a = s.partition().atom(j);
                for (int q = 0; q < g; ++q) {
                    double x = gl.node(q, a.lo, a.hi);
                    xs[l].push_back(x);
                    ws[l].push_back(gl.weight(q, a.lo, a.hi));
                    act[l].push_back(s.eval_in_atom(j, x));
                }
            }
            npts[l] = static_cast<int>(xs[l].size());
        }
        std::vector<int> o(d, 0);
        Point x(d);
        std::vector<double> v(static_cast<std::size_t>(f.m));
        std::array<ActiveBasis, 16> ab;
        while (true) {
            double w = 1.0;
            for (int l = 0; l < d; ++l) {
                x[l] = xs[l][o[l]];
                w *= ws[l][o[l]];
                ab[l] = act[l][o[l]];
            }
            f.fn(x, v);
            for_each_active({ab.data(), static_cast<std::size_t>(d)}, strides_, [&](std::size_t flat, double wb) {
                for (int c = 0; c < f.m; ++c) b[c * len + flat] += w * wb * v[c];
            });
            int l = d;
            bool done = true;
            while (l-- > 0) {
                if (++o[l] < npts[l]) { done = false; break; }
                o[l] = 0;
            }
            if (done) break;
        }
        return b;
    }

    TensorSpline make_spline(std::vector<double> coeffs, int m) const {
        TensorSpline ts(spaces(), m);
        if (coeffs.size() != ts.coeffs().size()) throw std::invalid_argument("make_spline: coefficient count mismatch");
        ts.coeffs() = std::move(coeffs);
        return ts;
    }

    TensorSpline project_function(const VectorFunction& f, int g = 0) const {
        if (g <= 0) {
            int kmax = 1;
            for (const auto& gs : grams_) kmax = std::max(kmax, gs.order());
            g = quadrature_points_for(f, kmax);
        }
        auto b = load_function(f, g);
        apply_inverse(b, f.m);
        return make_spline(std::move(b), f.m);
    }

    /// b_i = ∫ N_i g dλ + Σ mass · N_i(location).
    TensorSpline project_measure(const HybridMeasure& theta) const {
        if (theta.dim() != dim()) throw std::invalid_argument("project_measure: dimension mismatch");
        theta.check_support(domain());
        const int m = theta.value_dim();
        const std::size_t len = size();
        std::vector<double> b = theta.has_density() ? load_function(theta.density(), theta.quadrature_points())
                                                    : std::vector<double>(len * static_cast<std::size_t>(m), 0.0);
        std::array<ActiveBasis, 16> ab;
        for (const auto& dm : theta.diracs()) {
            for (int l = 0; l < dim(); ++l) ab[l] = grams_[l].space().eval_basis(dm.at[l]);
            for_each_active({ab.data(), static_cast<std::size_t>(dim())}, strides_, [&](std::size_t flat, double w) {
                for (int c = 0; c < m; ++c) b[c * len + flat] += w * dm.mass[c];
            });
        }
        apply_inverse(b, m);
        return make_spline(std::move(b), m);
    }

    /// Exact projection of a spline on any partition of the same box.
    TensorSpline project_spline(const TensorSpline& s) const {
        if (s.dim() != dim()) throw std::invalid_argument("project_spline: dimension mismatch");
        std::vector<double> t(s.coeffs());
        std::vector<int> sh = s.shape();
        for (int l = 0; l < dim(); ++l) {
            auto entries = cross_gram(grams_[l].space(), s.space(l));
            t = mode_product(t, sh, s.value_dim(), l, shape_[l], entries);
            sh[l] = shape_[l];
        }
        apply_inverse(t, s.value_dim());
        return make_spline(std::move(t), s.value_dim());
    }

private:
    std::vector<GramSystem> grams_;
    std::vector<int> shape_;
    std::vector<std::size_t> strides_;
};

// ---------------------------------------------------------------------------
// Operator norms

struct NormGrid {
    int cheb_points = 8;    ///< Chebyshev–Lobatto points per atom for the sup over x
    int quad_points = 16;   ///< Gauss–Legendre points per atom for ∫|K(x,y)| dy
};

/// ∫ |Σ_i c_i N_i(y)| dy, skipping atoms where every active |c_i| is below cutoff.
inline double abs_spline_integral(const SplineSpace1D& s, std::span<const double> c, const GaussLegendre& gl,
                                  double cutoff) {
    const int k = s.order();
    double total = 0.0;
    for (int j = 0; j < s.atom_count(); ++j) {
        double mx = 0.0;
        for (int r = 0; r < k; ++r) mx = std::max(mx, std::abs(c[j + r]));
        if (mx <= cutoff) continue;
        Interval a = s.partition().atom(j);
        for (int q = 0; q < gl.size(); ++q) {
            double y = gl.node(q, a.lo, a.hi);
            ActiveBasis ab = s.eval_in_atom(j, y);
            double v = 0.0;
            for (int r = 0; r < ab.count; ++r) v += c[ab.first + r] * ab.values[r];
            total += gl.weight(q, a.lo, a.hi) * std::abs(v);
        }
    }
    return total;
}

/// sup_x ∫ |K(x,y)| dy for one axis, K(x,y) = Σ_i N_i(y) N*_i(x); a lower bound
/// on the L¹ (= L^∞) operator norm since the sup runs over a finite grid.
inline double axis_operator_norm(const GramSystem& gs, NormGrid grid = {}) {
    const auto& s = gs.space();
    GaussLegendre gl(grid.quad_points);
    double best = 0.0;
    for (int j = 0; j < s.atom_count(); ++j) {
        Interval a = s.partition().atom(j);
        for (double x : chebyshev_lobatto(grid.cheb_points, a.lo, a.hi)) {
            auto c = gs.duals_at(s.eval_in_atom(j, x));
            double mx = 0.0;
            for (double v : c) mx = std::max(mx, std::abs(v));
            best = std::max(best, abs_spline_integral(s, c, gl, mx * 1e-18));
        }
    }
    return best;
}

/// Product of axis norms (the kernel factorizes over axes).
inline double operator_norm_inf(const TensorProjector& tp, NormGrid grid = {}) {
    double v = 1.0;
    for (const auto& g : tp.grams()) v *= axis_operator_norm(g, grid);
    return v;
}

/// Same quantity computed directly in d dimensions: one tensor solve per grid
/// point and a tensor quadrature of |K(x,·)|. Cost grows like dim^2; small spaces only.
inline double operator_norm_inf_direct(const TensorProjector& tp, NormGrid grid = {}) {
    const int d = tp.dim();
    const auto spaces = tp.spaces();
    const auto strides = strides_of(tp.shape());
    GaussLegendre gl(grid.quad_points);
    // per axis: sup grid points (atom, x) and quadrature points (atom, y, w)
    struct Pt {
        int atom;
        double x;
        double w;
    };
    std::vector<std::vector<Pt>> sup_pts(d), quad_pts(d);
    for (int l = 0; l < d; ++l) {
        const auto& s = spaces[l];
        for (int j = 0; j < s.atom_count(); ++j) {
            Interval a = s.partition().atom(j);
            for (double x : chebyshev_lobatto(grid.cheb_points, a.lo, a.hi)) sup_pts[l].push_back({j, x, 0.0});
            for (int q = 0; q < gl.size(); ++q)
                quad_pts[l].push_back({j, gl.node(q, a.lo, a.hi), gl.weight(q, a.lo, a.hi)});
        }
    }
    auto odometer = [](std::vector<int>& o, const std::vector<std::vector<Pt>>& pts) {
        for (int l = static_cast<int>(o.size()) - 1; l >= 0; --l) {
            if (++o[l] < static_cast<int>(pts[l].size())) return true;
            o[l] = 0;
        }
        return false;
    };
    std::array<ActiveBasis, 16> ab;
    double best = 0.0;
    std::vector<int> ox(d, 0);
    do {
        std::vector<double> c(tp.size(), 0.0);
        for (int l = 0; l < d; ++l) ab[l] = spaces[l].eval_in_atom(sup_pts[l][ox[l]].atom, sup_pts[l][ox[l]].x);
        for_each_active({ab.data(), static_cast<std::size_t>(d)}, strides, [&](std::size_t f, double w) { c[f] = w; });
        tp.apply_inverse(c, 1);
        double integral = 0.0;
        std::vector<int> oy(d, 0);
        do {
            double w = 1.0;
            for (int l = 0; l < d; ++l) {
                const auto& p = quad_pts[l][oy[l]];
                ab[l] = spaces[l].eval_in_atom(p.atom, p.x);
                w *= p.w;
            }
            double v = 0.0;
            for_each_active({ab.data(), static_cast<std::size_t>(d)}, strides,
                            [&](std::size_t f, double wb) { v += c[f] * wb; });
            integral += w * std::abs(v);
        } while (odometer(oy, quad_pts));
        best = std::max(best, integral);
    } while (odometer(ox, sup_pts));
    return best;
}

// ---------------------------------------------------------------------------
// Decay profile

struct DecayProfile {
    std::vector<double> values;  ///< index s: max |N*_i(x)|·|conv(E_i ∪ A(x))| at atom distance s
    double q_hat = 0.0;
    double C_hat = 0.0;
    double residual = 0.0;       ///< RMS residual of the log-linear fit
    int fit_points = 0;
};

/// Least squares fit of log(values[s]) = a + s log q over s >= 1 with values >= floor.
inline void fit_decay(DecayProfile& p, double floor = 1e-14) {
    std::vector<double> xs, ys;
    for (std::size_t s = 1; s < p.values.size(); ++s)
        if (p.values[s] >= floor) {
            xs.push_back(static_cast<double>(s));
            ys.push_back(std::log(p.values[s]));
        }
    p.fit_points = static_cast<int>(xs.size());
    if (xs.empty()) {
        p.q_hat = 0.0;
        p.residual = 0.0;
        p.C_hat = p.values.empty() ? 0.0 : p.values[0];
        return;
    }
    if (xs.size() == 1) {
        // one usable distance: the ratio through values[0]
        p.q_hat = std::pow(std::exp(ys[0]) / std::max(p.values[0], 1e-300), 1.0 / xs[0]);
        p.q_hat = std::min(p.q_hat, 1.0);
        p.residual = 0.0;
        p.C_hat = 0.0;
        for (std::size_t s = 0; s < p.values.size(); ++s)
            if (p.values[s] > 0.0) p.C_hat = std::max(p.C_hat, p.values[s] / std::pow(p.q_hat, static_cast<double>(s)));
        return;
    }
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= xs.size();
    my /= ys.size();
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    double slope = sxy / sxx;
    double icpt = my - slope * mx;
    double rss = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double r = ys[i] - (icpt + slope * xs[i]);
        rss += r * r;
    }
    p.residual = std::sqrt(rss / xs.size());
    p.q_hat = std::exp(slope);
    // envelope constant so that values[s] <= Ĉ q̂^s at every measured s
    p.C_hat = 0.0;
    for (std::size_t s = 0; s < p.values.size(); ++s) {
        if (p.values[s] <= 0.0) continue;
        p.C_hat = std::max(p.C_hat, std::exp(std::log(p.values[s]) - static_cast<double>(s) * slope));
    }
}

inline DecayProfile decay_profile(const GramSystem& gs, int cheb_points = 8) {
    const auto& sp = gs.space();
    const int k = sp.order();
    if (sp.dim() < 2 * k) throw std::invalid_argument("decay_profile: space dimension must be >= 2k");
    const int atoms = sp.atom_count();
    const auto& bp = sp.partition().breakpoints();
    DecayProfile p;
    p.values.assign(static_cast<std::size_t>(atoms), 0.0);
    for (int j = 0; j < atoms; ++j) {
        Interval a = sp.partition().atom(j);
        for (double x : chebyshev_lobatto(cheb_points, a.lo, a.hi)) {
            auto c = gs.duals_at(sp.eval_in_atom(j, x));
            for (int i = 0; i < sp.dim(); ++i) {
                auto [e0, e1] = sp.support_atoms(i);
                int s = j < e0 ? e0 - j : (j > e1 ? j - e1 : 0);
                double conv = bp[std::max(j, e1) + 1] - bp[std::min(j, e0)];
                double v = std::abs(c[i]) * conv;
                if (v > p.values[s]) p.values[s] = v;
            }
        }
    }
    fit_decay(p);
    return p;
}

/// Constants for the tensor duals: Ĉ multiplies, q̂ is the largest axis ratio.
inline std::pair<double, double> tensor_decay_constants(const std::vector<DecayProfile>& axes) {
    double C = 1.0, q = 0.0;
    for (const auto& p : axes) {
        C *= p.C_hat;
        q = std::max(q, p.q_hat);
    }
    return {C, q};
}

}  // namespace martspline
