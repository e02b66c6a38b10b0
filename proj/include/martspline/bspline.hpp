/**
 * @file bspline.hpp
 * @brief Clamped B-spline bases over one partition and tensor-product splines.
 *
 * The space of order k over a partition with N atoms has dimension N + k - 1.
 * Basis function i is supported on knots t[i..i+k], i.e. on the atoms
 * max(0, i-k+1) .. min(i, N-1). Evaluation follows the Cox–de Boor triangle on
 * the atom located with the (lo, hi] convention, so for k = 1 the value at a
 * breakpoint comes from the atom on its left.
 */
#pragma once

#include "martspline/filtration.hpp"
#include "martspline/quadrature.hpp"

#include <json.hpp>

#include <array>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace martspline {

inline constexpr int kMaxOrder = 10;

/// Basis values nonzero at one point: indices first .. first+count-1.
struct ActiveBasis {
    int first = 0;
    int count = 0;
    std::array<double, kMaxOrder> values{};
};

struct KnotVector {
    std::vector<double> knots;
    int order = 1;

    int dim() const { return static_cast<int>(knots.size()) - order; }
};

/// Clamped knot vector: end breakpoints repeated k times, interior ones simple.
inline KnotVector knot_vector(const Partition1D& p, int k) {
    if (k < 1) throw std::invalid_argument("knot_vector: order must be >= 1");
    if (k > kMaxOrder) throw std::invalid_argument("knot_vector: order exceeds supported maximum");
    const auto& bp = p.breakpoints();
    KnotVector kv;
    kv.order = k;
    kv.knots.reserve(bp.size() + 2 * static_cast<std::size_t>(k - 1));
    for (int r = 0; r < k - 1; ++r) kv.knots.push_back(bp.front());
    kv.knots.insert(kv.knots.end(), bp.begin(), bp.end());
    for (int r = 0; r < k - 1; ++r) kv.knots.push_back(bp.back());
    return kv;
}

class SplineSpace1D {
public:
    SplineSpace1D() : SplineSpace1D(Partition1D{}, 1) {}
    SplineSpace1D(Partition1D partition, int k) : partition_(std::move(partition)), kv_(martspline::knot_vector(partition_, k)) {}

    const Partition1D& partition() const { return partition_; }
    const KnotVector& knot_vector() const { return kv_; }
    int order() const { return kv_.order; }
    int dim() const { return kv_.dim(); }
    int atom_count() const { return partition_.atom_count(); }
    Interval domain() const { return partition_.domain(); }

    /// Basis values on atom j, evaluated at x by the polynomial piece of that atom.
    ActiveBasis eval_in_atom(int j, double x) const {
        const int k = kv_.order;
        const auto& t = kv_.knots;
        const int mu = j + k - 1;
        ActiveBasis out;
        out.first = j;
        out.count = k;
        std::array<double, kMaxOrder> left{}, right{};
        auto& N = out.values;
        N[0] = 1.0;
        for (int r = 1; r < k; ++r) {
            left[r] = x - t[mu + 1 - r];
            right[r] = t[mu + r] - x;
            double saved = 0.0;
            for (int s = 0; s < r; ++s) {
                double temp = N[s] / (right[s + 1] + left[r - s]);
                N[s] = saved + right[s + 1] * temp;
                saved = left[r - s] * temp;
            }
            N[r] = saved;
        }
        return out;
    }

    /// Throws std::domain_error outside [a, b]; the left endpoint is evaluated by continuity.
    ActiveBasis eval_basis(double x) const {
        if (!partition_.domain().contains_closed(x))
            throw std::domain_error("eval_basis: point outside the interval");
        return eval_in_atom(partition_.locate_closed(x), x);
    }

    /// Atoms where basis i is nonzero (inclusive range).
    std::pair<int, int> support_atoms(int i) const {
        if (i < 0 || i >= dim()) throw std::out_of_range("support: basis index out of range");
        return {std::max(0, i - order() + 1), std::min(i, atom_count() - 1)};
    }

    Interval support(int i) const {
        auto [a, b] = support_atoms(i);
        return {partition_.atom(a).lo, partition_.atom(b).hi};
    }

    /// Value of the spline with the given coefficients at x.
    double evaluate(std::span<const double> coeffs, double x) const {
        ActiveBasis ab = eval_basis(x);
        double v = 0.0;
        for (int r = 0; r < ab.count; ++r) v += coeffs[ab.first + r] * ab.values[r];
        return v;
    }

private:
    Partition1D partition_;
    KnotVector kv_;
};

inline int default_quadrature_points(int k) { return std::max(k, 4); }

/// b_i = ∫ f N_i over the domain, with g Gauss–Legendre points per atom.
inline std::vector<double> integrate_against(const SplineSpace1D& s, const std::function<double(double)>& f, int g) {
    if (g < 1) throw std::invalid_argument("integrate_against: need g >= 1");
    GaussLegendre gl(g);
    std::vector<double> b(static_cast<std::size_t>(s.dim()), 0.0);
    for (int j = 0; j < s.atom_count(); ++j) {
        Interval a = s.partition().atom(j);
        for (int q = 0; q < g; ++q) {
            double x = gl.node(q, a.lo, a.hi);
            double wf = gl.weight(q, a.lo, a.hi) * f(x);
            ActiveBasis ab = s.eval_in_atom(j, x);
            for (int r = 0; r < ab.count; ++r) b[ab.first + r] += wf * ab.values[r];
        }
    }
    return b;
}

// ---------------------------------------------------------------------------
// Tensor products

/// Row-major strides (last axis fastest) for a shape.
inline std::vector<std::size_t> strides_of(const std::vector<int>& shape) {
    std::vector<std::size_t> st(shape.size(), 1);
    for (int l = static_cast<int>(shape.size()) - 2; l >= 0; --l)
        st[l] = st[l + 1] * static_cast<std::size_t>(shape[l + 1]);
    return st;
}

inline std::size_t product_of(const std::vector<int>& shape) {
    std::size_t c = 1;
    for (int s : shape) c *= static_cast<std::size_t>(s);
    return c;
}

/// Visits every term of the tensor basis active at one point:
/// fn(flat coefficient index, product of per-axis basis values).
template <class Fn>
void for_each_active(std::span<const ActiveBasis> active, std::span<const std::size_t> strides, Fn&& fn) {
    const std::size_t d = active.size();
    std::array<int, 16> o{};
    if (d > o.size()) throw std::invalid_argument("tensor dimension too large");
    while (true) {
        std::size_t flat = 0;
        double w = 1.0;
        for (std::size_t l = 0; l < d; ++l) {
            flat += static_cast<std::size_t>(active[l].first + o[l]) * strides[l];
            w *= active[l].values[o[l]];
        }
        fn(flat, w);
        std::size_t l = d;
        while (l-- > 0) {
            if (++o[l] < active[l].count) break;
            o[l] = 0;
            if (l == 0) return;
        }
        if (d == 0) return;
    }
}

/// ℝ^m-valued spline in S^{k_1} ⊗ … ⊗ S^{k_d}. Coefficients are stored as m
/// consecutive scalar tensors (component-major).
class TensorSpline {
public:
    TensorSpline() = default;
    TensorSpline(std::vector<SplineSpace1D> spaces, int m) : spaces_(std::move(spaces)), m_(m) {
        if (spaces_.empty()) throw std::invalid_argument("TensorSpline: need d >= 1");
        if (m_ < 1) throw std::invalid_argument("TensorSpline: value dimension must be >= 1");
        for (const auto& s : spaces_) shape_.push_back(s.dim());
        strides_ = strides_of(shape_);
        coeffs_.assign(size() * static_cast<std::size_t>(m_), 0.0);
    }

    int dim() const { return static_cast<int>(spaces_.size()); }
    int value_dim() const { return m_; }
    const std::vector<SplineSpace1D>& spaces() const { return spaces_; }
    const SplineSpace1D& space(int l) const { return spaces_[l]; }
    const std::vector<int>& shape() const { return shape_; }
    const std::vector<std::size_t>& strides() const { return strides_; }
    /// Number of scalar coefficients per component.
    std::size_t size() const { return product_of(shape_); }

    std::vector<double>& coeffs() { return coeffs_; }
    const std::vector<double>& coeffs() const { return coeffs_; }
    std::span<double> component(int c) { return {coeffs_.data() + c * size(), size()}; }
    std::span<const double> component(int c) const { return {coeffs_.data() + c * size(), size()}; }

    void evaluate(std::span<const double> x, std::span<double> out) const {
        if (static_cast<int>(x.size()) != dim()) throw std::invalid_argument("TensorSpline: dimension mismatch");
        std::array<ActiveBasis, 16> active;
        for (int l = 0; l < dim(); ++l) active[l] = spaces_[l].eval_basis(x[l]);
        evaluate_active({active.data(), static_cast<std::size_t>(dim())}, out);
    }

    std::vector<double> evaluate(std::span<const double> x) const {
        std::vector<double> out(static_cast<std::size_t>(m_));
        evaluate(x, out);
        return out;
    }

    void evaluate_active(std::span<const ActiveBasis> active, std::span<double> out) const {
        std::fill(out.begin(), out.end(), 0.0);
        const std::size_t n = size();
        for_each_active(active, strides_, [&](std::size_t flat, double w) {
            for (int c = 0; c < m_; ++c) out[c] += w * coeffs_[c * n + flat];
        });
    }

private:
    std::vector<SplineSpace1D> spaces_;
    int m_ = 1;
    std::vector<int> shape_;
    std::vector<std::size_t> strides_;
    std::vector<double> coeffs_;
};

/// Euclidean norm of the value of ts at x.
inline double evaluate_norm(const TensorSpline& ts, std::span<const double> x) {
    auto v = ts.evaluate(x);
    double s = 0.0;
    for (double c : v) s += c * c;
    return std::sqrt(s);
}

inline std::vector<SplineSpace1D> tensor_spaces(const TensorFiltration& F, int n, const std::vector<int>& orders) {
    if (static_cast<int>(orders.size()) != F.dim())
        throw std::invalid_argument("tensor_spaces: need one order per axis");
    std::vector<SplineSpace1D> spaces;
    for (int l = 0; l < F.dim(); ++l) spaces.emplace_back(F.partition(n, l), orders[l]);
    return spaces;
}

inline nlohmann::json to_json(const TensorSpline& ts) {
    nlohmann::json j;
    std::vector<int> orders;
    nlohmann::json bps = nlohmann::json::array();
    for (const auto& s : ts.spaces()) {
        orders.push_back(s.order());
        bps.push_back(s.partition().breakpoints());
    }
    j["orders"] = orders;
    j["breakpoints"] = bps;
    j["value_dim"] = ts.value_dim();
    j["shape"] = ts.shape();
    j["coeffs"] = ts.coeffs();
    return j;
}

inline TensorSpline spline_from_json(const nlohmann::json& j) {
    auto orders = j.at("orders").get<std::vector<int>>();
    const auto& bps = j.at("breakpoints");
    if (orders.size() != bps.size()) throw std::invalid_argument("spline json: orders/breakpoints mismatch");
    std::vector<SplineSpace1D> spaces;
    for (std::size_t l = 0; l < orders.size(); ++l)
        spaces.emplace_back(Partition1D(bps[l].get<std::vector<double>>()), orders[l]);
    TensorSpline ts(std::move(spaces), j.at("value_dim").get<int>());
    auto c = j.at("coeffs").get<std::vector<double>>();
    if (c.size() != ts.coeffs().size()) throw std::invalid_argument("spline json: coefficient count mismatch");
    ts.coeffs() = std::move(c);
    return ts;
}

}  // namespace martspline
