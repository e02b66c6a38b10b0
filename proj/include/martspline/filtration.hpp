/**
 * @file filtration.hpp
 * @brief Nested interval partitions of (a,b] and their tensor products.
 *
 * Atoms are half-open, (lo, hi], so every point of (a,b]^d lies in exactly
 * one atom of every level. Levels are numbered 1..depth, atom positions are
 * 0-based per axis, and flat atom indices are row-major with the last axis
 * varying fastest.
 */
#pragma once

#include "martspline/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace martspline {

using Point = std::vector<double>;

struct Interval {
    double lo = 0.0;  ///< excluded
    double hi = 1.0;  ///< included

    double length() const { return hi - lo; }
    bool contains(double x) const { return lo < x && x <= hi; }
    bool contains_closed(double x) const { return lo <= x && x <= hi; }
    bool operator==(const Interval&) const = default;
};

/// Axis-parallel rectangle, one interval per axis.
using Rect = std::vector<Interval>;

inline double volume(const Rect& r) {
    double v = 1.0;
    for (const auto& iv : r) v *= iv.length();
    return v;
}

/// Smallest axis-parallel rectangle containing both arguments.
inline Rect hull(const Rect& a, const Rect& b) {
    Rect h(a.size());
    for (std::size_t l = 0; l < a.size(); ++l)
        h[l] = {std::min(a[l].lo, b[l].lo), std::max(a[l].hi, b[l].hi)};
    return h;
}

inline bool rect_contains(const Rect& r, std::span<const double> x) {
    for (std::size_t l = 0; l < r.size(); ++l)
        if (!r[l].contains(x[l])) return false;
    return true;
}

inline bool rect_contains_closed(const Rect& r, std::span<const double> x) {
    for (std::size_t l = 0; l < r.size(); ++l)
        if (!r[l].contains_closed(x[l])) return false;
    return true;
}

class Partition1D {
public:
    Partition1D() : breakpoints_{0.0, 1.0} {}

    explicit Partition1D(std::vector<double> breakpoints) : breakpoints_(std::move(breakpoints)) {
        if (breakpoints_.size() < 2)
            throw std::invalid_argument("Partition1D: need at least two breakpoints");
        for (std::size_t j = 1; j < breakpoints_.size(); ++j)
            if (!(breakpoints_[j - 1] < breakpoints_[j]))
                throw std::invalid_argument("Partition1D: breakpoints must be strictly increasing");
    }

    const std::vector<double>& breakpoints() const { return breakpoints_; }
    int atom_count() const { return static_cast<int>(breakpoints_.size()) - 1; }
    Interval atom(int j) const { return {breakpoints_[j], breakpoints_[j + 1]}; }
    Interval domain() const { return {breakpoints_.front(), breakpoints_.back()}; }

    /// Atom containing x under the (lo, hi] convention.
    int locate(double x) const {
        if (!domain().contains(x))
            throw std::domain_error("Partition1D::locate: point outside (a,b]");
        auto it = std::lower_bound(breakpoints_.begin(), breakpoints_.end(), x);
        return static_cast<int>(it - breakpoints_.begin()) - 1;
    }

    /// Like locate, but also accepts the left endpoint a (mapped to atom 0).
    int locate_closed(double x) const {
        if (x == breakpoints_.front()) return 0;
        return locate(x);
    }

    bool has_breakpoint(double x) const {
        return std::binary_search(breakpoints_.begin(), breakpoints_.end(), x);
    }

    bool operator==(const Partition1D&) const = default;

private:
    std::vector<double> breakpoints_;
};

class Filtration1D {
public:
    Filtration1D() = default;

    /// Validates nestedness; throws std::invalid_argument on violation.
    explicit Filtration1D(std::vector<Partition1D> levels) : levels_(std::move(levels)) {
        if (levels_.empty()) throw std::invalid_argument("Filtration1D: need at least one level");
        for (std::size_t n = 1; n < levels_.size(); ++n) {
            if (!(levels_[n].domain() == levels_[0].domain()))
                throw std::invalid_argument("Filtration1D: all levels must share the same domain");
            for (double t : levels_[n - 1].breakpoints())
                if (!levels_[n].has_breakpoint(t))
                    throw std::invalid_argument("Filtration1D: levels are not nested");
        }
    }

    /// Skips the nestedness check; used for diagnostics on external input.
    static Filtration1D unchecked(std::vector<Partition1D> levels) {
        Filtration1D f;
        f.levels_ = std::move(levels);
        return f;
    }

    int depth() const { return static_cast<int>(levels_.size()); }
    const Partition1D& level(int n) const { return levels_.at(static_cast<std::size_t>(n - 1)); }
    const std::vector<Partition1D>& levels() const { return levels_; }
    Interval domain() const { return levels_.front().domain(); }

private:
    std::vector<Partition1D> levels_;
};

struct AtomIndex {
    std::vector<int> coords;

    std::size_t size() const { return coords.size(); }
    int operator[](std::size_t l) const { return coords[l]; }
    auto operator<=>(const AtomIndex&) const = default;
};

inline int l1_distance(const AtomIndex& i, const AtomIndex& j) {
    int s = 0;
    for (std::size_t l = 0; l < i.size(); ++l) s += std::abs(i[l] - j[l]);
    return s;
}

class TensorFiltration {
public:
    TensorFiltration() = default;

    explicit TensorFiltration(std::vector<Filtration1D> axes) : axes_(std::move(axes)) {
        if (axes_.empty()) throw std::invalid_argument("TensorFiltration: need d >= 1");
        for (const auto& a : axes_)
            if (a.depth() != axes_[0].depth())
                throw std::invalid_argument("TensorFiltration: axes must share the number of levels");
    }

    int dim() const { return static_cast<int>(axes_.size()); }
    int depth() const { return axes_.front().depth(); }
    const Filtration1D& axis(int l) const { return axes_.at(static_cast<std::size_t>(l)); }
    const std::vector<Filtration1D>& axes() const { return axes_; }

    const Partition1D& partition(int n, int l) const { return axes_[l].level(n); }

    std::vector<int> shape(int n) const {
        check_level(n);
        std::vector<int> s(axes_.size());
        for (std::size_t l = 0; l < axes_.size(); ++l) s[l] = axes_[l].level(n).atom_count();
        return s;
    }

    std::size_t atom_count(int n) const {
        std::size_t c = 1;
        for (int s : shape(n)) c *= static_cast<std::size_t>(s);
        return c;
    }

    Rect domain() const {
        Rect r;
        for (const auto& a : axes_) r.push_back(a.domain());
        return r;
    }

    bool valid_index(int n, const AtomIndex& i) const {
        if (n < 1 || n > depth() || static_cast<int>(i.size()) != dim()) return false;
        for (int l = 0; l < dim(); ++l)
            if (i[l] < 0 || i[l] >= axes_[l].level(n).atom_count()) return false;
        return true;
    }

    Rect atom_rect(int n, const AtomIndex& i) const {
        Rect r(axes_.size());
        for (std::size_t l = 0; l < axes_.size(); ++l) r[l] = axes_[l].level(n).atom(i[l]);
        return r;
    }

    std::size_t flat(int n, const AtomIndex& i) const {
        std::size_t f = 0;
        for (std::size_t l = 0; l < axes_.size(); ++l)
            f = f * static_cast<std::size_t>(axes_[l].level(n).atom_count()) + static_cast<std::size_t>(i[l]);
        return f;
    }

    AtomIndex unflat(int n, std::size_t f) const {
        AtomIndex i{std::vector<int>(axes_.size())};
        for (int l = dim() - 1; l >= 0; --l) {
            auto c = static_cast<std::size_t>(axes_[l].level(n).atom_count());
            i.coords[l] = static_cast<int>(f % c);
            f /= c;
        }
        return i;
    }

    void check_level(int n) const {
        if (n < 1 || n > depth()) throw std::out_of_range("TensorFiltration: invalid level");
    }

private:
    std::vector<Filtration1D> axes_;
};

/// Dense membership mask over the atoms of one level.
class AtomSet {
public:
    AtomSet() = default;
    AtomSet(int level, std::vector<int> shape) : level_(level), shape_(std::move(shape)) {
        std::size_t c = 1;
        for (int s : shape_) c *= static_cast<std::size_t>(s);
        mask_.assign(c, 0);
    }

    static AtomSet full(const TensorFiltration& F, int n) {
        AtomSet s(n, F.shape(n));
        std::fill(s.mask_.begin(), s.mask_.end(), 1);
        return s;
    }

    int level() const { return level_; }
    const std::vector<int>& shape() const { return shape_; }
    std::size_t universe() const { return mask_.size(); }

    void insert_flat(std::size_t f) { mask_.at(f) = 1; }
    bool contains_flat(std::size_t f) const { return mask_[f] != 0; }
    const std::vector<std::uint8_t>& mask() const { return mask_; }
    std::vector<std::uint8_t>& mask() { return mask_; }

    std::size_t flat(const AtomIndex& i) const {
        std::size_t f = 0;
        for (std::size_t l = 0; l < shape_.size(); ++l) {
            if (i[l] < 0 || i[l] >= shape_[l]) throw std::out_of_range("AtomSet: index out of range");
            f = f * static_cast<std::size_t>(shape_[l]) + static_cast<std::size_t>(i[l]);
        }
        return f;
    }
    void insert(const AtomIndex& i) { mask_[flat(i)] = 1; }
    bool contains(const AtomIndex& i) const { return mask_[flat(i)] != 0; }

    std::size_t size() const {
        return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), std::uint8_t{1}));
    }

    std::vector<AtomIndex> members() const {
        std::vector<AtomIndex> out;
        for (std::size_t f = 0; f < mask_.size(); ++f) {
            if (!mask_[f]) continue;
            AtomIndex i{std::vector<int>(shape_.size())};
            std::size_t r = f;
            for (int l = static_cast<int>(shape_.size()) - 1; l >= 0; --l) {
                i.coords[l] = static_cast<int>(r % static_cast<std::size_t>(shape_[l]));
                r /= static_cast<std::size_t>(shape_[l]);
            }
            out.push_back(std::move(i));
        }
        return out;
    }

    bool subset_of(const AtomSet& other) const {
        for (std::size_t f = 0; f < mask_.size(); ++f)
            if (mask_[f] && !other.mask_[f]) return false;
        return true;
    }

    bool operator==(const AtomSet&) const = default;

private:
    int level_ = 0;
    std::vector<int> shape_;
    std::vector<std::uint8_t> mask_;
};

inline constexpr int kUnreachable = std::numeric_limits<int>::max() / 4;

/// ℓ¹ distance (in atom steps) from every atom of a grid to the nearest masked atom.
/// Separable: one two-sweep pass per axis.
inline std::vector<int> l1_distance_transform(const std::vector<int>& shape,
                                              const std::vector<std::uint8_t>& mask) {
    std::vector<int> dist(mask.size());
    for (std::size_t f = 0; f < mask.size(); ++f) dist[f] = mask[f] ? 0 : kUnreachable;
    const int d = static_cast<int>(shape.size());
    for (int l = 0; l < d; ++l) {
        std::size_t stride = 1;
        for (int m = l + 1; m < d; ++m) stride *= static_cast<std::size_t>(shape[m]);
        const auto len = static_cast<std::size_t>(shape[l]);
        const std::size_t outer = mask.size() / (len * stride);
        for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t in = 0; in < stride; ++in) {
                const std::size_t base = o * len * stride + in;
                for (std::size_t j = 1; j < len; ++j)
                    dist[base + j * stride] = std::min(dist[base + j * stride], dist[base + (j - 1) * stride] + 1);
                for (std::size_t j = len - 1; j-- > 0;)
                    dist[base + j * stride] = std::min(dist[base + j * stride], dist[base + (j + 1) * stride] + 1);
            }
    }
    return dist;
}

// ---------------------------------------------------------------------------
// Construction

enum class RefinementRule { UniformBisectAll, RandomAtomBisect, PointTargeted, FrozenOnSubinterval };

inline RefinementRule rule_from_name(const std::string& name) {
    if (name == "uniform-bisect-all") return RefinementRule::UniformBisectAll;
    if (name == "random-atom-bisect") return RefinementRule::RandomAtomBisect;
    if (name == "point-targeted") return RefinementRule::PointTargeted;
    if (name == "frozen-on-subinterval") return RefinementRule::FrozenOnSubinterval;
    throw std::invalid_argument("unknown refinement rule '" + name + "'");
}

inline std::string rule_name(RefinementRule r) {
    switch (r) {
        case RefinementRule::UniformBisectAll: return "uniform-bisect-all";
        case RefinementRule::RandomAtomBisect: return "random-atom-bisect";
        case RefinementRule::PointTargeted: return "point-targeted";
        case RefinementRule::FrozenOnSubinterval: return "frozen-on-subinterval";
    }
    return "?";
}

struct AxisRule {
    RefinementRule kind = RefinementRule::UniformBisectAll;
    double probability = 0.5;             ///< random: chance that an atom is split
    double split_lo = 0.25, split_hi = 0.75;  ///< random: split position as a fraction of the atom
    std::vector<double> targets;          ///< point-targeted: atoms whose closure holds a target split
    std::vector<Interval> frozen;         ///< frozen-on-subinterval: regions never refined
};

struct FiltrationSpec {
    int d = 1;
    Interval domain{0.0, 1.0};
    int depth = 1;
    std::vector<AxisRule> rules;  ///< one per axis, or a single rule shared by all axes
    std::uint64_t seed = 0;
};

namespace detail {

inline Partition1D refine_once(const Partition1D& p, const AxisRule& rule, Rng& rng, double min_width) {
    const auto& bp = p.breakpoints();
    const int atoms = p.atom_count();
    std::vector<double> cut(static_cast<std::size_t>(atoms), std::numeric_limits<double>::quiet_NaN());

    auto bisect_ok = [&](int j, double at) {
        return at - bp[j] >= min_width && bp[j + 1] - at >= min_width;
    };

    switch (rule.kind) {
        case RefinementRule::UniformBisectAll:
        case RefinementRule::FrozenOnSubinterval:
            for (int j = 0; j < atoms; ++j) {
                Interval a = p.atom(j);
                bool frozen = std::any_of(rule.frozen.begin(), rule.frozen.end(), [&](const Interval& z) {
                    return z.lo <= a.lo && a.hi <= z.hi;
                });
                double mid = 0.5 * (a.lo + a.hi);
                if (!frozen && bisect_ok(j, mid)) cut[j] = mid;
            }
            break;
        case RefinementRule::PointTargeted:
            for (int j = 0; j < atoms; ++j) {
                Interval a = p.atom(j);
                bool hit = std::any_of(rule.targets.begin(), rule.targets.end(),
                                       [&](double t) { return a.contains_closed(t); });
                double mid = 0.5 * (a.lo + a.hi);
                if (hit && bisect_ok(j, mid)) cut[j] = mid;
            }
            break;
        case RefinementRule::RandomAtomBisect: {
            bool any = false;
            for (int j = 0; j < atoms; ++j) {
                double u = rng.uniform();
                double frac = rng.uniform(rule.split_lo, rule.split_hi);
                double at = bp[j] + frac * (bp[j + 1] - bp[j]);
                if (u < rule.probability && bisect_ok(j, at)) {
                    cut[j] = at;
                    any = true;
                }
            }
            if (!any) {
                int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(atoms)));
                double frac = rng.uniform(rule.split_lo, rule.split_hi);
                double at = bp[j] + frac * (bp[j + 1] - bp[j]);
                if (bisect_ok(j, at)) cut[j] = at;
            }
            break;
        }
    }

    std::vector<double> out;
    out.reserve(bp.size() * 2);
    for (int j = 0; j < atoms; ++j) {
        out.push_back(bp[j]);
        if (!std::isnan(cut[j])) out.push_back(cut[j]);
    }
    out.push_back(bp.back());
    return Partition1D(std::move(out));
}

inline Filtration1D build_axis(const FiltrationSpec& spec, const AxisRule& rule, std::uint64_t seed) {
    const Interval I = spec.domain;
    const double min_width = 1e-9 * I.length();
    std::vector<double> base{I.lo, I.hi};
    if (rule.kind == RefinementRule::FrozenOnSubinterval) {
        for (const auto& z : rule.frozen) {
            if (!(z.lo < z.hi)) throw std::invalid_argument("frozen interval must satisfy lo < hi");
            for (double t : {z.lo, z.hi})
                if (I.lo < t && t < I.hi) base.push_back(t);
        }
        std::sort(base.begin(), base.end());
        base.erase(std::unique(base.begin(), base.end()), base.end());
    }
    Rng rng(seed);
    std::vector<Partition1D> levels;
    Partition1D current(base);
    for (int n = 1; n <= spec.depth; ++n) {
        current = refine_once(current, rule, rng, min_width);
        levels.push_back(current);
    }
    return Filtration1D(std::move(levels));
}

}  // namespace detail

/// Deterministic given the seed; every axis draws from its own derived stream.
inline TensorFiltration build_filtration(const FiltrationSpec& spec) {
    if (spec.d < 1) throw std::invalid_argument("build_filtration: d must be >= 1");
    if (spec.depth < 1) throw std::invalid_argument("build_filtration: depth must be >= 1");
    if (!(spec.domain.lo < spec.domain.hi))
        throw std::invalid_argument("build_filtration: invalid interval (lo >= hi)");
    if (spec.rules.empty()) throw std::invalid_argument("build_filtration: no refinement rule");
    if (spec.rules.size() != 1 && static_cast<int>(spec.rules.size()) != spec.d)
        throw std::invalid_argument("build_filtration: need one rule or one rule per axis");
    std::vector<Filtration1D> axes;
    for (int l = 0; l < spec.d; ++l) {
        const AxisRule& rule = spec.rules.size() == 1 ? spec.rules[0] : spec.rules[l];
        axes.push_back(detail::build_axis(spec, rule, derive_seed(spec.seed, static_cast<std::uint64_t>(l))));
    }
    return TensorFiltration(std::move(axes));
}

// ---------------------------------------------------------------------------
// Queries

inline AtomIndex atom_index_of(const TensorFiltration& F, int n, std::span<const double> x) {
    F.check_level(n);
    if (static_cast<int>(x.size()) != F.dim()) throw std::invalid_argument("atom_of: dimension mismatch");
    AtomIndex i{std::vector<int>(x.size())};
    for (int l = 0; l < F.dim(); ++l) i.coords[l] = F.partition(n, l).locate(x[l]);
    return i;
}

/// Unique level-n atom containing x, with its rectangle.
inline std::pair<AtomIndex, Rect> atom_of(const TensorFiltration& F, int n, std::span<const double> x) {
    AtomIndex i = atom_index_of(F, n, x);
    Rect r = F.atom_rect(n, i);
    return {std::move(i), std::move(r)};
}

inline int atom_distance(const TensorFiltration& F, int n, const AtomIndex& i, const AtomIndex& j) {
    if (!F.valid_index(n, i) || !F.valid_index(n, j))
        throw std::out_of_range("atom_distance: index out of range");
    return l1_distance(i, j);
}

/// Union of all level-n atoms within ℓ¹ atom distance s of the seed atoms.
inline AtomSet neighborhood(const TensorFiltration& F, int n, const AtomSet& seed, int s) {
    F.check_level(n);
    if (seed.level() != n || seed.shape() != F.shape(n))
        throw std::invalid_argument("neighborhood: seed set belongs to another level");
    AtomSet out(n, F.shape(n));
    auto dist = l1_distance_transform(seed.shape(), seed.mask());
    for (std::size_t f = 0; f < dist.size(); ++f)
        if (dist[f] <= s) out.insert_flat(f);
    return out;
}

inline AtomSet neighborhood(const TensorFiltration& F, int n, std::span<const double> x, int s) {
    AtomSet seed(n, F.shape(n));
    seed.insert(atom_index_of(F, n, x));
    return neighborhood(F, n, seed, s);
}

struct NestedCheck {
    bool nested = true;
    int axis = 0;   ///< 1-based axis of the first violation
    int level = 0;  ///< 1-based level missing a breakpoint of the previous level
    double missing = 0.0;
};

inline NestedCheck check_nested(const TensorFiltration& F) {
    for (int l = 0; l < F.dim(); ++l) {
        const auto& levels = F.axis(l).levels();
        for (std::size_t n = 1; n < levels.size(); ++n)
            for (double t : levels[n - 1].breakpoints())
                if (!levels[n].has_breakpoint(t))
                    return {false, l + 1, static_cast<int>(n) + 1, t};
    }
    return {};
}

/// Per-axis map from each finest-level atom to its ancestor at level n.
inline std::vector<std::vector<int>> ancestor_map(const TensorFiltration& F, int n, int finest) {
    std::vector<std::vector<int>> out(static_cast<std::size_t>(F.dim()));
    for (int l = 0; l < F.dim(); ++l) {
        const auto& fine = F.partition(finest, l);
        const auto& coarse = F.partition(n, l);
        auto& m = out[static_cast<std::size_t>(l)];
        m.resize(static_cast<std::size_t>(fine.atom_count()));
        for (int j = 0; j < fine.atom_count(); ++j) m[j] = coarse.locate(fine.atom(j).hi);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json to_json(const TensorFiltration& F) {
    nlohmann::json j;
    j["d"] = F.dim();
    j["depth"] = F.depth();
    j["interval"] = {F.axis(0).domain().lo, F.axis(0).domain().hi};
    nlohmann::json axes = nlohmann::json::array();
    for (int l = 0; l < F.dim(); ++l) {
        nlohmann::json levels = nlohmann::json::array();
        for (const auto& p : F.axis(l).levels()) levels.push_back(p.breakpoints());
        axes.push_back({{"levels", levels}});
    }
    j["axes"] = axes;
    return j;
}

inline TensorFiltration filtration_from_json(const nlohmann::json& j) {
    std::vector<Filtration1D> axes;
    for (const auto& a : j.at("axes")) {
        std::vector<Partition1D> levels;
        for (const auto& bp : a.at("levels")) levels.emplace_back(bp.get<std::vector<double>>());
        axes.emplace_back(std::move(levels));
    }
    return TensorFiltration(std::move(axes));
}

}  // namespace martspline
