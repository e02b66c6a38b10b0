/**
 * @file experiments.hpp
 * @brief The seven experiment runners behind the CLI.
 *
 * Each runner reads a JSON config, returns an ExperimentResult (CSV rows, named
 * assertions, diagnostics) and never touches the clock, so identical configs
 * give identical CSV and summary bytes.
 */
#pragma once

#include "martspline/catalog.hpp"
#include "martspline/filtration.hpp"
#include "martspline/maximal.hpp"
#include "martspline/measures.hpp"
#include "martspline/projector.hpp"
#include "martspline/random.hpp"
#include "martspline/report.hpp"
#include "martspline/sequence.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace martspline {

struct RunOptions {
    std::optional<std::uint64_t> seed;  ///< overrides the config's base seed
    std::optional<int> depth;           ///< overrides the config's depth(s)
    bool quiet = true;
};

namespace detail {

using json = nlohmann::json;

inline std::uint64_t base_seed(const json& c, const RunOptions& o) {
    return o.seed.value_or(cfg::get_or<std::uint64_t>(c, "seed", "", 1));
}

inline int depth_or(const json& c, const std::string& key, int fallback, const RunOptions& o) {
    return o.depth.value_or(cfg::get_or<int>(c, key, "", fallback));
}

inline AxisRule rule_or(const json& c, const std::string& key, AxisRule fallback) {
    if (!c.contains(key)) return fallback;
    return axis_rule_from_json(c.at(key), "/" + key);
}

inline AxisRule random_rule(double p) {
    AxisRule r;
    r.kind = RefinementRule::RandomAtomBisect;
    r.probability = p;
    return r;
}

inline AxisRule dyadic_rule() { return AxisRule{}; }

inline TensorFiltration make_filtration(int d, int depth, const AxisRule& rule, std::uint64_t seed) {
    FiltrationSpec s;
    s.d = d;
    s.depth = depth;
    s.rules = {rule};
    s.seed = seed;
    return build_filtration(s);
}

inline std::string rule_json_name(const AxisRule& r) { return rule_name(r.kind); }

inline json rule_json(const AxisRule& r) {
    json j;
    j["name"] = rule_name(r.kind);
    if (r.kind == RefinementRule::RandomAtomBisect) {
        j["probability"] = r.probability;
        j["split_lo"] = r.split_lo;
        j["split_hi"] = r.split_hi;
    }
    if (!r.targets.empty()) j["targets"] = r.targets;
    if (!r.frozen.empty()) {
        json fz = json::array();
        for (const auto& z : r.frozen) fz.push_back({z.lo, z.hi});
        j["frozen"] = fz;
    }
    return j;
}

/// sup over t > 0 of t · weight{v > t}: attained as t ↑ some value v, where the
/// set becomes {≥ v}.
inline double sup_t_superlevel(const std::vector<double>& values, const std::vector<double>& weights) {
    std::vector<std::size_t> idx(values.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
    double best = 0.0, W = 0.0;
    std::size_t i = 0;
    while (i < idx.size()) {
        double v = values[idx[i]];
        while (i < idx.size() && values[idx[i]] == v) W += weights[idx[i++]];
        if (v > 0.0) best = std::max(best, v * W);
    }
    return best;
}

/// Decay constants of the tensor duals for orders k on levels lo..hi (max over levels).
inline std::pair<double, double> projector_constants(const TensorFiltration& F, const std::vector<int>& k, int lo,
                                                     int hi) {
    std::vector<DecayProfile> axes(static_cast<std::size_t>(F.dim()));
    for (int l = 0; l < F.dim(); ++l) {
        DecayProfile agg;
        for (int n = lo; n <= hi; ++n) {
            SplineSpace1D sp(F.partition(n, l), k[l]);
            if (sp.dim() < 2 * k[l]) continue;
            auto p = decay_profile(GramSystem(sp));
            agg.C_hat = std::max(agg.C_hat, p.C_hat);
            agg.q_hat = std::max(agg.q_hat, p.q_hat);
        }
        if (agg.C_hat == 0.0) agg.C_hat = 1.0;
        axes[l] = agg;
    }
    return tensor_decay_constants(axes);
}

/// C_k = Ĉ · Π k_ℓ · q̂^{-(|k|₁ - d)}: the constant in ‖P_n f(x)‖ ≤ C_k Σ_A b_n(q̂, ‖f‖dλ, A, x).
inline double domination_constant(double C_hat, double q_hat, const std::vector<int>& k) {
    double prod = 1.0;
    int excess = 0;
    for (int kl : k) {
        prod *= kl;
        excess += kl - 1;
    }
    return C_hat * prod * (excess == 0 ? 1.0 : std::pow(q_hat, -excess));
}

inline std::vector<int> orders_of(int d, int k) { return std::vector<int>(static_cast<std::size_t>(d), k); }

inline std::string tag(double q) {
    char b[16];
    std::snprintf(b, sizeof b, "%g", q);
    return b;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// decay: biorthogonality, partition of unity, geometric decay of duals

inline ExperimentResult run_decay(const nlohmann::json& c, const RunOptions& o) {
    using namespace detail;
    using cfg::get_or;
    ExperimentResult r;
    r.name = "decay";
    const auto ks = get_or<std::vector<int>>(c, "orders", "", {1, 2, 3, 4});
    const int seeds = get_or<int>(c, "seeds", "", 20);
    const std::uint64_t base = base_seed(c, o);
    const int depth = depth_or(c, "depth", 12, o);
    const int max_dim = get_or<int>(c, "max_dim", "", 256);
    const int pou_points = get_or<int>(c, "pou_points", "", 10000);
    const int cheb = get_or<int>(c, "cheb_points", "", 8);
    const double q_limit = get_or<double>(c, "q_limit", "", 0.99);
    const AxisRule rule = rule_or(c, "rule", random_rule(0.6));
    r.params = {{"orders", ks},       {"seeds", seeds},        {"seed", base},          {"depth", depth},
                {"max_dim", max_dim}, {"pou_points", pou_points}, {"cheb_points", cheb}, {"rule", rule_json(rule)},
                {"q_limit", q_limit}, {"fit_floor", 1e-14}};
    r.csv = CsvTable({"seed", "level", "k", "s", "max_value", "q_hat", "C_hat"});
    for (int s = 0; s < seeds; ++s) r.seeds.push_back(derive_seed(base, static_cast<std::uint64_t>(s)));

    double pou_err = 0.0, min_val = INFINITY;
    json per_k = json::object();
    for (int k : ks) {
        double bi = 0.0, qmax = 0.0, resid = 0.0;
        int violations = 0, spaces = 0, profiles = 0, max_seen_dim = 0;
        for (int s = 0; s < seeds; ++s) {
            const auto seed = r.seeds[static_cast<std::size_t>(s)];
            auto F = make_filtration(1, depth, rule, seed);
            for (int n = 1; n <= depth; ++n) {
                SplineSpace1D sp(F.partition(n, 0), k);
                if (sp.dim() > max_dim) break;
                max_seen_dim = std::max(max_seen_dim, sp.dim());
                ++spaces;
                GramSystem gs(sp);
                // ∫ N_i N*_j = (G G^{-1})_{ij}
                for (int j = 0; j < gs.dim(); ++j) {
                    auto y = gs.dual_coefficients(j);
                    auto gy = gs.multiply(y);
                    for (int i = 0; i < gs.dim(); ++i) bi = std::max(bi, std::abs(gy[i] - (i == j ? 1.0 : 0.0)));
                }
                Rng rng(derive_seed(seed, 1000 + static_cast<std::uint64_t>(n)));
                Interval I = sp.domain();
                for (int p = 0; p < pou_points; ++p) {
                    auto ab = sp.eval_basis(rng.uniform(I.lo, I.hi));
                    double sum = 0.0;
                    for (int t = 0; t < ab.count; ++t) {
                        sum += ab.values[t];
                        min_val = std::min(min_val, ab.values[t]);
                    }
                    pou_err = std::max(pou_err, std::abs(sum - 1.0));
                }
                if (sp.dim() < 2 * k) continue;
                auto prof = decay_profile(gs, cheb);
                ++profiles;
                qmax = std::max(qmax, prof.q_hat);
                resid = std::max(resid, prof.residual);
                for (std::size_t t = static_cast<std::size_t>(k); t + 1 < prof.values.size(); ++t)
                    if (prof.values[t] >= 1e-14 && prof.values[t + 1] > prof.values[t] * (1.0 + 1e-9)) ++violations;
                for (std::size_t t = 0; t < prof.values.size(); ++t)
                    r.csv.add(seed, n, k, static_cast<int>(t), prof.values[t], prof.q_hat, prof.C_hat);
            }
        }
        const std::string K = std::to_string(k);
        r.assert_le("biorthogonality_k" + K, bi, 1e-10);
        r.assert_lt("q_hat_max_k" + K, qmax, q_limit);
        r.assert_le("profile_monotone_violations_k" + K, violations, 0);
        per_k[K] = {{"spaces", spaces}, {"profiles", profiles}, {"max_dim", max_seen_dim}, {"max_fit_residual", resid}};
    }
    r.assert_le("partition_of_unity", pou_err, 1e-12);
    r.assert_ge("basis_nonnegative", min_val, -1e-14);
    r.diagnostics["per_order"] = per_k;
    return r;
}

// ---------------------------------------------------------------------------
// shadrin: L^∞ kernel norms across depth

inline ExperimentResult run_shadrin(const nlohmann::json& c, const RunOptions& o) {
    using namespace detail;
    using cfg::get_or;
    ExperimentResult r;
    r.name = "shadrin";
    const auto ks = get_or<std::vector<int>>(c, "orders", "", {1, 2, 3, 4});
    const int seeds = get_or<int>(c, "seeds", "", 20);
    const std::uint64_t base = base_seed(c, o);
    const int depth = depth_or(c, "depth", 10, o);
    const double spread_limit = get_or<double>(c, "spread_limit", "", 0.05);
    NormGrid grid{get_or<int>(c, "cheb_points", "", 8), get_or<int>(c, "quad_points", "", 16)};
    const AxisRule rule = rule_or(c, "rule", random_rule(0.5));
    const auto tensor_orders = get_or<std::vector<std::vector<int>>>(c, "tensor_orders", "", {{2, 2}, {3, 2}, {4, 3}});
    const int tensor_seeds = get_or<int>(c, "tensor_seeds", "", 3);
    const int tensor_depth = get_or<int>(c, "tensor_depth", "", 3);
    const int saturation_from = get_or<int>(c, "saturation_from", "", 5);
    r.params = {{"orders", ks},
                {"seeds", seeds},
                {"seed", base},
                {"depth", depth},
                {"spread_limit", spread_limit},
                {"cheb_points", grid.cheb_points},
                {"quad_points", grid.quad_points},
                {"rule", rule_json(rule)},
                {"tensor_orders", tensor_orders},
                {"tensor_seeds", tensor_seeds},
                {"tensor_depth", tensor_depth},
                {"saturation_from", saturation_from}};
    r.csv = CsvTable({"family", "seed", "level", "k", "norm"});
    for (int s = 0; s < seeds; ++s) r.seeds.push_back(derive_seed(base, static_cast<std::uint64_t>(s)));

    std::vector<TensorFiltration> filts;
    for (auto seed : r.seeds) filts.push_back(make_filtration(1, depth, rule, seed));
    auto uniform = make_filtration(1, depth, dyadic_rule(), 0);

    json diag = json::object();
    for (int k : ks) {
        std::vector<double> per_depth(static_cast<std::size_t>(depth), 0.0);
        double k1_err = 0.0;
        for (std::size_t s = 0; s < filts.size(); ++s)
            for (int n = 1; n <= depth; ++n) {
                double v = axis_operator_norm(GramSystem(SplineSpace1D(filts[s].partition(n, 0), k)), grid);
                per_depth[n - 1] = std::max(per_depth[n - 1], v);
                if (k == 1) k1_err = std::max(k1_err, std::abs(v - 1.0));
                r.csv.add(std::string("random"), r.seeds[s], n, k, v);
            }
        std::vector<double> uni;
        for (int n = 1; n <= depth; ++n) {
            double v = axis_operator_norm(GramSystem(SplineSpace1D(uniform.partition(n, 0), k)), grid);
            uni.push_back(v);
            r.csv.add(std::string("uniform"), 0, n, k, v);
            if (k == 1) k1_err = std::max(k1_err, std::abs(v - 1.0));
        }
        const std::string K = std::to_string(k);
        if (k == 1) {
            r.assert_le("norm_k1_equals_one", k1_err, 1e-12);
        } else {
            auto [mn, mx] = std::minmax_element(per_depth.begin(), per_depth.end());
            r.assert_lt("depth_spread_k" + K, (*mx - *mn) / *mn, spread_limit);
        }
        // how the per-depth maxima settle: spread over the deeper levels only
        double late_mn = INFINITY, late_mx = 0.0;
        for (int n = saturation_from; n <= depth; ++n) {
            late_mn = std::min(late_mn, per_depth[n - 1]);
            late_mx = std::max(late_mx, per_depth[n - 1]);
        }
        auto [umn, umx] = std::minmax_element(uni.begin() + std::min<int>(saturation_from - 1, depth - 1), uni.end());
        diag["k" + K] = {{"max_norm_per_depth", per_depth},
                         {"uniform_norm_per_depth", uni},
                         {"late_spread", late_mx > 0 ? (late_mx - late_mn) / late_mn : 0.0},
                         {"uniform_late_spread", (*umx - *umn) / *umn},
                         {"sup_norm", *std::max_element(per_depth.begin(), per_depth.end())}};
    }

    // tensor norms: direct d-dimensional computation against the product of axis norms
    double tensor_err = 0.0;
    json tens = json::array();
    for (int s = 0; s < tensor_seeds; ++s)
        for (const auto& kk : tensor_orders) {
            auto F = make_filtration(static_cast<int>(kk.size()), tensor_depth, rule,
                                     derive_seed(base, 500 + static_cast<std::uint64_t>(s)));
            TensorProjector tp(F, tensor_depth, kk);
            double prod = operator_norm_inf(tp, grid);
            double direct = operator_norm_inf_direct(tp, grid);
            tensor_err = std::max(tensor_err, std::abs(prod - direct));
            tens.push_back({{"orders", kk}, {"seed_index", s}, {"product", prod}, {"direct", direct}});
        }
    r.assert_le("tensor_norm_is_product", tensor_err, 1e-9);
    diag["tensor"] = tens;
    r.diagnostics = diag;
    return r;
}

// ---------------------------------------------------------------------------
// covering: the superlevel bound of the maximal operator with the proof constant

inline HybridMeasure random_positive_measure(int d, Rng& rng, int diracs, const Rect& dom, int quad) {
    HybridMeasure th(d, 1);
    std::vector<double> center(static_cast<std::size_t>(d));
    for (int l = 0; l < d; ++l) center[l] = rng.uniform(dom[l].lo, dom[l].hi);
    const double sigma = rng.uniform(0.05, 0.4);
    const double floor = rng.uniform(0.0, 0.3);
    th.set_density(scalar_function([=](std::span<const double> x) {
                       double r2 = 0.0;
                       for (std::size_t l = 0; l < center.size(); ++l) r2 += (x[l] - center[l]) * (x[l] - center[l]);
                       return floor + std::exp(-r2 / (2 * sigma * sigma));
                   }),
                   quad);
    for (int i = 0; i < diracs; ++i) {
        Point at(static_cast<std::size_t>(d));
        for (int l = 0; l < d; ++l) at[l] = rng.uniform(dom[l].lo, dom[l].hi);
        th.add_dirac(at, {rng.uniform(0.05, 1.0)});
    }
    return th;
}

inline ExperimentResult run_covering(const nlohmann::json& c, const RunOptions& o) {
    using namespace detail;
    using cfg::get_or;
    ExperimentResult r;
    r.name = "covering";
    const auto ds = get_or<std::vector<int>>(c, "dims", "", {1, 2});
    const auto qs = get_or<std::vector<double>>(c, "qs", "", {0.3, 0.5, 0.8});
    const int seeds = get_or<int>(c, "seeds", "", 30);
    const std::uint64_t base = base_seed(c, o);
    const int depth1 = depth_or(c, "depth_d1", 10, o);
    const int depth2 = depth_or(c, "depth_d2", 8, o);
    const int t_points = get_or<int>(c, "t_points", "", 20);
    const double t_decades = get_or<double>(c, "t_decades", "", 3.0);
    const int diracs = get_or<int>(c, "diracs", "", 2);
    const double b_fraction = get_or<double>(c, "b_fraction", "", 0.3);
    const int quad = get_or<int>(c, "quadrature_points", "", 4);
    const AxisRule rule = rule_or(c, "rule", random_rule(0.8));
    r.params = {{"dims", ds},           {"qs", qs},         {"seeds", seeds},           {"seed", base},
                {"depth_d1", depth1},   {"depth_d2", depth2}, {"t_points", t_points},   {"t_decades", t_decades},
                {"diracs", diracs},     {"b_fraction", b_fraction}, {"quadrature_points", quad},
                {"rule", rule_json(rule)}};
    r.csv = CsvTable({"d", "q", "seed", "K", "t", "lhs_volume", "rhs_bound", "ratio"});
    for (int s = 0; s < seeds; ++s) r.seeds.push_back(derive_seed(base, static_cast<std::uint64_t>(s)));

    json diag = json::object();
    for (int d : ds) {
        const int depth = d == 1 ? depth1 : depth2;
        for (double q : qs) {
            double worst = 0.0;
            int cases = 0;
            for (auto seed : r.seeds) {
                auto F = make_filtration(d, depth, rule, seed);
                Rng rng(derive_seed(seed, 77));
                auto theta = random_positive_measure(d, rng, diracs, F.domain(), quad);
                const int K = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(depth)));
                AtomSet B(K, F.shape(K));
                for (std::size_t f = 0; f < B.universe(); ++f)
                    if (rng.uniform() < b_fraction) B.insert_flat(f);
                if (B.size() == 0) B.insert_flat(rng.below(B.universe()));
                auto mf = maximal_field(q, theta, F, K, depth);
                const double top = *std::max_element(mf.values.begin(), mf.values.end());
                std::vector<double> ts;
                for (int i = 0; i < t_points; ++i)
                    ts.push_back(top * std::pow(10.0, -t_decades + t_decades * i / std::max(1, t_points - 1)));
                auto rep = verify_covering_bound(F, theta, q, K, depth, B, ts);
                ++cases;
                worst = std::max(worst, rep.max_ratio);
                for (const auto& row : rep.rows) r.csv.add(d, q, seed, K, row.t, row.lhs, row.rhs, row.ratio);
            }
            const std::string name = "covering_d" + std::to_string(d) + "_q" + tag(q);
            r.assert_le(name, worst, 1.0);
            diag[name] = {{"cases", cases}, {"max_ratio", worst}, {"constant", covering_constant(q, d)}};
        }
    }
    r.diagnostics = diag;
    return r;
}

// ---------------------------------------------------------------------------
// weaktype: spike corpus for M, sup_n ‖P_n f‖ and the Hardy–Littlewood baseline

inline ExperimentResult run_weaktype(const nlohmann::json& c, const RunOptions& o) {
    using namespace detail;
    using cfg::get_or;
    ExperimentResult r;
    r.name = "weaktype";
    const auto ds = get_or<std::vector<int>>(c, "dims", "", {1, 2});
    const auto qs = get_or<std::vector<double>>(c, "qs", "", {0.3, 0.5, 0.8});
    const int k = get_or<int>(c, "order", "", 2);
    const int spikes = get_or<int>(c, "spikes", "", 20);
    const std::uint64_t base = base_seed(c, o);
    const int depth1 = depth_or(c, "depth_d1", 10, o);
    const int depth2 = depth_or(c, "depth_d2", 6, o);
    const int samples = get_or<int>(c, "samples_per_axis", "", 3);
    const AxisRule rule = rule_or(c, "rule", dyadic_rule());
    r.params = {{"dims", ds},        {"qs", qs},           {"order", k},          {"spikes", spikes},
                {"seed", base},      {"depth_d1", depth1}, {"depth_d2", depth2}, {"samples_per_axis", samples},
                {"rule", rule_json(rule)}};
    r.csv = CsvTable({"d", "spike", "operator", "q", "ratio", "bound"});
    r.seeds.push_back(base);

    json diag = json::object();
    for (int d : ds) {
        const int N = d == 1 ? depth1 : depth2;
        auto F = make_filtration(d, N, rule, derive_seed(base, static_cast<std::uint64_t>(d)));
        const auto kk = orders_of(d, k);
        auto [C_hat, q_hat] = projector_constants(F, kk, 1, N);
        const double Ck = domination_constant(C_hat, q_hat, kk);
        const double bound_P = covering_constant(q_hat, d) * geometric_poly_sum(std::sqrt(q_hat), d);
        const auto vols = atom_volumes(F, N);
        const std::size_t atoms = vols.size();
        std::vector<std::vector<std::size_t>> anc(static_cast<std::size_t>(N));
        for (int n = 1; n <= N; ++n) anc[n - 1] = ancestor_flat(F, n, N);
        // sample points: a samples^d grid inside every finest atom
        const int per_atom = static_cast<int>(std::pow(samples, d));
        std::vector<Point> pts;
        std::vector<double> wts;
        std::vector<std::size_t> owner;
        for (std::size_t f = 0; f < atoms; ++f) {
            Rect rc = F.atom_rect(N, F.unflat(N, f));
            for (int s = 0; s < per_atom; ++s) {
                Point x(static_cast<std::size_t>(d));
                int rem = s;
                for (int l = d - 1; l >= 0; --l) {
                    int a = rem % samples;
                    rem /= samples;
                    x[l] = rc[l].lo + (a + 0.5) / samples * rc[l].length();
                }
                pts.push_back(std::move(x));
                wts.push_back(vols[f] / per_atom);
                owner.push_back(f);
            }
        }
        std::vector<TensorProjector> projs;
        for (int n = 1; n <= N; ++n) projs.emplace_back(F, n, kk);

        std::map<double, double> worst_M;
        double worst_P = 0.0, worst_dom = 0.0, worst_hl = 0.0;
        Rng rng(derive_seed(base, 100 + static_cast<std::uint64_t>(d)));
        for (int sp = 0; sp < spikes; ++sp) {
            const std::size_t a = rng.below(atoms);
            const double h = rng.uniform(1.0, 10.0);
            const double l1 = h * vols[a];
            std::vector<std::vector<double>> masses(static_cast<std::size_t>(N));
            for (int n = 1; n <= N; ++n) {
                masses[n - 1].assign(F.atom_count(n), 0.0);
                masses[n - 1][anc[n - 1][a]] = l1;
            }
            for (double q : qs) {
                auto mf = maximal_field_from_masses(q, F, 1, N, masses);
                double ratio = sup_t_superlevel(mf.values, mf.volumes) / l1;
                double bound = covering_constant(q, d) * geometric_poly_sum(std::sqrt(q), d);
                worst_M[q] = std::max(worst_M[q], ratio / bound);
                r.csv.add(d, sp, std::string("M"), q, ratio, bound);
            }
            // the spike as an order-1 spline on the finest level, projected exactly
            TensorSpline spike(tensor_spaces(F, N, orders_of(d, 1)), 1);
            spike.coeffs()[a] = h;
            std::vector<double> sup_field(pts.size(), 0.0);
            for (int n = 1; n <= N; ++n) {
                auto g = projs[n - 1].project_spline(spike);
                auto sums = level_sums_from_masses(q_hat, F, n, masses[n - 1]);
                for (std::size_t p = 0; p < pts.size(); ++p) {
                    double v = std::abs(g.evaluate(pts[p])[0]);
                    sup_field[p] = std::max(sup_field[p], v);
                    double dom = Ck * sums[anc[n - 1][owner[p]]];
                    if (dom > 0.0) worst_dom = std::max(worst_dom, v / dom);
                    else if (v > 1e-12) worst_dom = INFINITY;
                }
            }
            double ratio_P = sup_t_superlevel(sup_field, wts) / l1;
            worst_P = std::max(worst_P, ratio_P);
            r.csv.add(d, sp, std::string("sup_P"), q_hat, ratio_P, bound_P);
            if (d == 1) {
                auto hl = hl_maximal(F, N, masses[N - 1]);
                double ratio_hl = sup_t_superlevel(hl, vols) / l1;
                worst_hl = std::max(worst_hl, ratio_hl);
                r.csv.add(d, sp, std::string("HL"), 0.0, ratio_hl, 3.0);
            }
        }
        const std::string D = std::to_string(d);
        for (auto [q, w] : worst_M) r.assert_le("maximal_weak_type_d" + D + "_q" + tag(q), w, 1.0);
        r.assert_le("projection_maximal_weak_type_d" + D, worst_P, bound_P);
        r.assert_le("spline_domination_d" + D, worst_dom, 1.0);
        if (d == 1) r.assert_le("hardy_littlewood_three", worst_hl, 3.0);
        diag["d" + D] = {{"q_hat", q_hat}, {"C_hat", C_hat}, {"C_k", Ck}, {"bound_P", bound_P}, {"depth", N}};
    }
    r.diagnostics = diag;
    return r;
}

// ---------------------------------------------------------------------------
// converge: smooth functions on dense dyadic filtrations

inline ExperimentResult run_converge(const nlohmann::json& c, const RunOptions& o) {
    using namespace detail;
    using cfg::get_or;
    ExperimentResult r;
    r.name = "converge";
    const auto ds = get_or<std::vector<int>>(c, "dims", "", {1, 2});
    const auto ks = get_or<std::vector<int>>(c, "orders", "", {1, 2, 3});
    const int depth = depth_or(c, "depth", 8, o);
    const int probes = get_or<int>(c, "probes", "", 500);
    const int mart_probes = get_or<int>(c, "martingale_probes", "", 100);
    const double tol = get_or<double>(c, "tolerance", "", 1e-3);
    const std::uint64_t base = base_seed(c, o);
    const AxisRule rule = rule_or(c, "rule", dyadic_rule());
    json fns = c.contains("functions") ? c.at("functions")
                                       : json::parse(R"([{"name":"smooth_tensor"},{"name":"gaussian"}])");
    r.params = {{"dims", ds},          {"orders", ks},       {"depth", depth},         {"probes", probes},
                {"martingale_probes", mart_probes}, {"tolerance", tol}, {"seed", base}, {"rule", rule_json(rule)},
                {"functions", fns}};
    r.csv = CsvTable({"d", "k", "function", "probe", "level", "error"});
    r.seeds.push_back(base);

    json diag = json::object();
    for (int d : ds) {
        auto F = make_filtration(d, depth, rule, derive_seed(base, static_cast<std::uint64_t>(d)));
        auto pts = probe_points(F, probes, derive_seed(base, 10 + static_cast<std::uint64_t>(d)));
        std::vector<Point> mpts(pts.begin(), pts.begin() + std::min<std::size_t>(pts.size(), mart_probes));
        for (int k : ks)
            for (std::size_t fi = 0; fi < fns.size(); ++fi) {
                const std::string path = "/functions/" + std::to_string(fi);
                auto f = function_from_json(fns[fi], d, path);
                const std::string fname = cfg::get<std::string>(fns[fi], "name", path);
                auto seq = make_sequence(F, f, orders_of(d, k), depth);
                auto cp = convergence_probe(seq, reference_from(f), pts, tol);
                double mart = verify_martingale_property(F, seq, mpts);
                for (std::size_t p = 0; p < cp.errors.size(); ++p)
                    for (std::size_t n = 0; n < cp.errors[p].size(); ++n)
                        r.csv.add(d, k, fname, static_cast<int>(p), static_cast<int>(n + 1), cp.errors[p][n]);
                const std::string tagc = "d" + std::to_string(d) + "_k" + std::to_string(k) + "_" + fname;
                r.assert_ge("converged_fraction_" + tagc, cp.fraction_converged, 1.0);
                r.assert_le("martingale_" + tagc, mart, 1e-9);
                diag[tagc] = {{"max_final_error", cp.max_final_error},
                              {"median_rate_log2", cp.median_rate},
                              {"fraction_converged", cp.fraction_converged}};
            }
    }
    r.diagnostics = diag;
    return r;
}

// ---------------------------------------------------------------------------
// singular: hybrid measures g dλ + Σ mass δ on dense dyadic filtrations

/// ∫ ‖s‖ over the box, g Gauss–Legendre points per atom per axis of the spline's partition.
inline double spline_l1_norm(const TensorSpline& s, int g) {
    const int d = s.dim();
    GaussLegendre gl(g);
    std::vector<std::vector<double>> xs(d), ws(d);
    for (int l = 0; l < d; ++l) {
        const auto& p = s.space(l).partition();
        for (int j = 0; j < p.atom_count(); ++j)
            for (int q = 0; q < g; ++q) {
                xs[l].push_back(gl.node(q, p.atom(j).lo, p.atom(j).hi));
                ws[l].push_back(gl.weight(q, p.atom(j).lo, p.atom(j).hi));
            }
    }
    double total = 0.0;
    std::vector<std::size_t> o(static_cast<std::size_t>(d), 0);
    Point x(static_cast<std::size_t>(d));
    std::vector<double> v(static_cast<std::size_t>(s.value_dim()));
    while (true) {
        double w = 1.0;
        for (int l = 0; l < d; ++l) {
            x[l] = xs[l][o[l]];
            w *= ws[l][o[l]];
        }
        s.evaluate(x, v);
        total += w * euclidean_norm(v);
        int l = d;
        bool done = true;
        while (l-- > 0) {
            if (++o[l] < xs[l].size()) { done = false; break; }
            o[l] = 0;
        }
        if (done) break;
    }
    return total;
}

inline ExperimentResult run_singular(const nlohmann::json& c, const RunOptions& o) {
    using namespace detail;
    using cfg::get_or;
    ExperimentResult r;
    r.name = "singular";
    const std::uint64_t base = base_seed(c, o);
    const int probes = get_or<int>(c, "probes", "", 500);
    const int slope_probes = get_or<int>(c, "slope_probes", "", 200);
    const int mart_probes = get_or<int>(c, "martingale_probes", "", 100);
    const double tol = get_or<double>(c, "tolerance", "", 1e-3);
    const double slope_tol = get_or<double>(c, "slope_tolerance", "", 0.2);
    const double value_floor = get_or<double>(c, "slope_floor", "", 1e-13);
    const int profile_level = get_or<int>(c, "profile_level", "", 10);
    const AxisRule rule = rule_or(c, "rule", dyadic_rule());
    const auto& cases = cfg::child(c, "cases", "");
    r.params = {{"seed", base},           {"probes", probes},       {"slope_probes", slope_probes},
                {"martingale_probes", mart_probes}, {"tolerance", tol}, {"slope_tolerance", slope_tol},
                {"slope_floor", value_floor}, {"profile_level", profile_level}, {"rule", rule_json(rule)},
                {"cases", cases}};
    r.csv = CsvTable({"kind", "d", "level", "index", "a", "b"});
    r.seeds.push_back(base);

    json diag = json::object();
    for (std::size_t ci = 0; ci < cases.size(); ++ci) {
        const auto& cs = cases[ci];
        const std::string path = "/cases/" + std::to_string(ci);
        const int d = cfg::get<int>(cs, "d", path);
        const int k = get_or<int>(cs, "order", path, 2);
        const int depth = o.depth.value_or(cfg::get<int>(cs, "depth", path));
        const int l1_levels = std::min(depth, get_or<int>(cs, "l1_levels", path, depth));
        auto nu = measure_from_json(cfg::child(cs, "measure", path), d, path + "/measure");
        if (!nu.has_density()) throw ConfigError("field " + path + "/measure/density is required");
        const auto kk = orders_of(d, k);
        auto F = make_filtration(d, depth, rule, derive_seed(base, ci));
        const std::string D = "case" + std::to_string(ci) + "_d" + std::to_string(d);

        auto seq = make_sequence(F, nu, kk, depth);
        auto pts = probe_points(F, probes, derive_seed(base, 20 + ci));
        auto cp = convergence_probe(seq, reference_from(nu.density()), pts, tol);
        for (std::size_t p = 0; p < cp.errors.size(); ++p)
            r.csv.add(std::string("trajectory"), d, depth, static_cast<int>(p), cp.errors[p].back(),
                      cp.errors[p].front());
        std::vector<Point> mpts(pts.begin(), pts.begin() + std::min<std::size_t>(pts.size(), mart_probes));
        const double mart = verify_martingale_property(F, seq, mpts);

        // Dirac part: P_n δ_x0 (y) = Π_ℓ Σ_i N*_i(x0_ℓ) N_i(y_ℓ) by symmetry of the kernel
        // envelope: constants uniform over levels; slope: the saturated rate of the deepest profiled level
        auto [C_hat, q_hat] = projector_constants(F, kk, 1, std::min(depth, profile_level));
        const double q_deep = projector_constants(F, kk, std::min(depth, profile_level), std::min(depth, profile_level)).second;
        std::vector<Point> spts(pts.begin(), pts.begin() + std::min<std::size_t>(pts.size(), slope_probes));
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        int npts = 0;
        double env_worst = 0.0;
        for (int n = 1; n <= depth; ++n) {
            std::vector<GramSystem> grams;
            for (int l = 0; l < d; ++l) grams.emplace_back(SplineSpace1D(F.partition(n, l), k));
            for (std::size_t di = 0; di < nu.diracs().size(); ++di) {
                const auto& dm = nu.diracs()[di];
                const double mass = euclidean_norm(dm.mass);
                std::vector<std::vector<double>> coef;
                for (int l = 0; l < d; ++l) coef.push_back(dual_values(grams[l], dm.at[l]));
                AtomIndex a0 = atom_index_of(F, n, dm.at);
                for (std::size_t p = 0; p < spts.size(); ++p) {
                    double v = mass;
                    for (int l = 0; l < d; ++l) v *= grams[l].space().evaluate(coef[l], spts[p][l]);
                    AtomIndex ay = atom_index_of(F, n, spts[p]);
                    const int s = l1_distance(a0, ay);
                    const double conv = conv_volume(F, n, a0, ay);
                    const double scaled = std::abs(v) * conv / mass;
                    const double env = C_hat * qpow(q_hat, s);
                    env_worst = std::max(env_worst, env > 0 ? scaled / env : (scaled > 0 ? INFINITY : 0.0));
                    if (s >= 1 && scaled > value_floor) {
                        double ly = std::log(scaled);
                        sx += s;
                        sy += ly;
                        sxx += double(s) * s;
                        sxy += s * ly;
                        ++npts;
                        r.csv.add(std::string("dirac"), d, n, static_cast<int>(p), static_cast<double>(s), ly);
                    }
                }
            }
        }
        double slope = npts >= 2 ? (npts * sxy - sx * sy) / (npts * sxx - sx * sx) : 0.0;
        const double lq = std::log(q_deep);
        const double slope_dev = std::abs(slope - lq) / std::abs(lq);

        // L¹ boundedness against the total variation times the measured operator norm
        double l1_sup = 0.0, norm_sup = 0.0;
        for (int n = 1; n <= l1_levels; ++n) {
            l1_sup = std::max(l1_sup, spline_l1_norm(seq.at(n), std::max(2 * k, 4)));
            norm_sup = std::max(norm_sup, operator_norm_inf(TensorProjector(F, n, kk)));
        }
        const double tv = total_variation(nu, F, std::min(depth, 8)).exact;

        r.assert_ge("converged_fraction_" + D, cp.fraction_converged, 1.0);
        r.assert_le("martingale_" + D, mart, 1e-9);
        r.assert_le("dirac_log_slope_deviation_" + D, slope_dev, slope_tol);
        r.assert_le("singular_envelope_" + D, env_worst, 1.0);
        r.assert_le("l1_bounded_" + D, l1_sup, tv * norm_sup);
        diag[D] = {{"depth", depth},
                   {"max_final_error", cp.max_final_error},
                   {"fraction_converged", cp.fraction_converged},
                   {"q_hat", q_hat},
                   {"C_hat", C_hat},
                   {"q_hat_deep", q_deep},
                   {"log_q_hat_deep", lq},
                   {"fitted_slope", slope},
                   {"slope_points", npts},
                   {"envelope_worst_ratio", env_worst},
                   {"sup_l1", l1_sup},
                   {"total_variation", tv},
                   {"sup_operator_norm", norm_sup},
                   {"l1_levels", l1_levels}};
    }
    r.diagnostics = diag;
    return r;
}

// ---------------------------------------------------------------------------
// nondense: frozen regions, limit duals and limits of sequences there

inline ExperimentResult run_nondense(const nlohmann::json& c, const RunOptions& o) {
    using namespace detail;
    using cfg::get_or;
    ExperimentResult r;
    r.name = "nondense";
    const std::uint64_t base = base_seed(c, o);
    const auto ds = get_or<std::vector<int>>(c, "dims", "", {1, 2});
    const int k = get_or<int>(c, "order", "", 2);
    const int depth = depth_or(c, "depth", 10, o);
    const double vtol = get_or<double>(c, "v_tolerance", "", 1e-3);
    const int dual_probes = get_or<int>(c, "dual_probes", "", 5);
    const int max_r = get_or<int>(c, "max_r", "", 3);
    const double delta_tol = get_or<double>(c, "delta_tolerance", "", 1e-8);
    const double limit_tol = get_or<double>(c, "limit_tolerance", "", 1e-6);
    const int probes = get_or<int>(c, "probes", "", 200);
    const json fjson = c.contains("function") ? c.at("function") : json{{"name", "gaussian"}};
    const auto& fams = cfg::child(c, "families", "");
    r.params = {{"seed", base},          {"dims", ds},           {"order", k},
                {"depth", depth},        {"v_tolerance", vtol},  {"dual_probes", dual_probes},
                {"max_r", max_r},        {"delta_tolerance", delta_tol}, {"limit_tolerance", limit_tol},
                {"probes", probes},      {"function", fjson},    {"families", fams}};
    r.csv = CsvTable({"kind", "family", "d", "r", "level", "value"});
    r.seeds.push_back(base);

    json diag = json::object();
    for (std::size_t fi = 0; fi < fams.size(); ++fi) {
        const std::string path = "/families/" + std::to_string(fi);
        const std::string fam = cfg::get<std::string>(fams[fi], "name", path);
        const AxisRule rule = axis_rule_from_json(cfg::child(fams[fi], "rule", path), path + "/rule");
        for (int d : ds) {
            auto F = make_filtration(d, depth, rule, derive_seed(base, fi * 10 + d));
            const std::string tagc = fam + "_d" + std::to_string(d);
            json vdiag = json::array();
            // per axis: the V-interval, its anchor and the limit dual tables
            std::vector<Interval> V(static_cast<std::size_t>(d));
            std::vector<std::vector<LimitDualTable>> tables(static_cast<std::size_t>(d));
            bool found = true;
            for (int l = 0; l < d; ++l) {
                auto rep = detect_v_sets(F.axis(l), vtol);
                json ivs = json::array();
                for (const auto& iv : rep.intervals)
                    ivs.push_back({{"lo", iv.span.lo},
                                   {"hi", iv.span.hi},
                                   {"left_accumulates", iv.left_accumulates},
                                   {"right_accumulates", iv.right_accumulates},
                                   {"ambiguous", iv.ambiguous}});
                vdiag.push_back({{"axis", l}, {"intervals", ivs}, {"note", rep.note}});
                if (rep.intervals.empty()) { found = false; continue; }
                // prefer an interval with an endpoint that nothing accumulates at
                const VInterval* pick = &rep.intervals.front();
                for (const auto& iv : rep.intervals)
                    if (!iv.right_accumulates || !iv.left_accumulates) { pick = &iv; break; }
                V[l] = pick->span;
                const Anchor anchor = !pick->right_accumulates ? Anchor::Right : Anchor::Left;
                std::vector<double> ys;
                for (int p = 0; p < dual_probes; ++p)
                    ys.push_back(V[l].lo + (p + 0.381966011250105) / dual_probes * V[l].length());
                const int nV = atoms_in(F.partition(depth, l), V[l]);
                for (int rr = 0; rr <= std::min(max_r, nV + k - 2); ++rr)
                    tables[l].push_back(limit_dual_table(F.axis(l), V[l], k, rr, ys, anchor));
            }
            diag[tagc] = {{"v_sets", vdiag}};
            if (!found) {
                r.assert_le("v_interval_found_" + tagc, 1.0, 0.0);
                continue;
            }
            // Cauchy deltas of the (tensor) limit duals
            double final_delta = 0.0, decay_worst = 0.0;
            json deltas_by_level = json::array();
            if (d == 1) {
                for (const auto& t : tables[0]) {
                    final_delta = std::max(final_delta, t.final_delta);
                    decay_worst = std::max(decay_worst, t.decay_worst_ratio);
                    for (std::size_t i = 0; i < t.deltas.size(); ++i)
                        r.csv.add(std::string("dual_delta"), fam, d, std::to_string(t.r),
                                  t.first_level + static_cast<int>(i), t.deltas[i]);
                }
            } else {
                for (const auto& t1 : tables[0])
                    for (const auto& t2 : tables[1]) {
                        decay_worst = std::max({decay_worst, t1.decay_worst_ratio, t2.decay_worst_ratio});
                        const int first = std::max(t1.first_level, t2.first_level);
                        double prev_set = false;
                        std::vector<double> prev;
                        for (int n = first; n <= depth; ++n) {
                            const auto& v1 = t1.values[n - t1.first_level];
                            const auto& v2 = t2.values[n - t2.first_level];
                            std::vector<double> cur;
                            for (double a : v1)
                                for (double b : v2) cur.push_back(a * b);
                            double delta = 0.0;
                            if (prev_set)
                                for (std::size_t i = 0; i < cur.size(); ++i)
                                    delta = std::max(delta, std::abs(cur[i] - prev[i]));
                            r.csv.add(std::string("dual_delta"), fam, d,
                                      std::to_string(t1.r) + ":" + std::to_string(t2.r), n, delta);
                            if (n == depth) final_delta = std::max(final_delta, delta);
                            prev = std::move(cur);
                            prev_set = true;
                        }
                    }
            }
            r.assert_le("limit_dual_delta_" + tagc, final_delta, delta_tol);
            r.assert_le("limit_dual_decay_" + tagc, decay_worst, 1.0);

            // sequence limits at probes inside V^d: deepest level as the oracle
            auto f = function_from_json(fjson, d, "/function");
            auto seq = make_sequence(F, f, orders_of(d, k), depth);
            Rng rng(derive_seed(base, 900 + fi * 10 + d));
            std::vector<Point> pts;
            const double gap = 1e-9;
            while (static_cast<int>(pts.size()) < probes) {
                Point y(static_cast<std::size_t>(d));
                bool ok = true;
                for (int l = 0; l < d; ++l) {
                    y[l] = rng.uniform(V[l].lo, V[l].hi);
                    const auto& bp = F.partition(depth, l).breakpoints();
                    auto it = std::lower_bound(bp.begin(), bp.end(), y[l]);
                    if ((it != bp.end() && *it - y[l] < gap) || (it != bp.begin() && y[l] - *(it - 1) < gap)) ok = false;
                }
                if (ok) pts.push_back(std::move(y));
            }
            double limit_gap = 0.0;
            const auto& oracle = seq.at(depth);
            for (const auto& y : pts) {
                double e = std::abs(seq.at(depth - 1).evaluate(y)[0] - oracle.evaluate(y)[0]);
                limit_gap = std::max(limit_gap, e);
            }
            for (int n = 1; n < depth; ++n) {
                double e = 0.0;
                for (const auto& y : pts) e = std::max(e, std::abs(seq.at(n).evaluate(y)[0] - oracle.evaluate(y)[0]));
                r.csv.add(std::string("sequence_gap"), fam, d, std::string("-"), n, e);
            }
            std::vector<Point> mpts(pts.begin(), pts.begin() + std::min<std::size_t>(pts.size(), 100));
            const double mart = verify_martingale_property(F, seq, mpts);
            r.assert_le("sequence_limit_" + tagc, limit_gap, limit_tol);
            r.assert_le("martingale_" + tagc, mart, 1e-9);
            diag[tagc]["final_dual_delta"] = final_delta;
            diag[tagc]["dual_decay_worst_ratio"] = decay_worst;
            diag[tagc]["sequence_limit_gap"] = limit_gap;
        }
    }
    r.diagnostics = diag;
    return r;
}

// ---------------------------------------------------------------------------

inline const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names{"decay", "shadrin", "weaktype", "covering",
                                                "converge", "singular", "nondense"};
    return names;
}

inline ExperimentResult run_experiment(const std::string& name, const nlohmann::json& config, const RunOptions& o) {
    if (config.contains("experiment") && config.at("experiment").get<std::string>() != name)
        throw ConfigError("field /experiment: config is for '" + config.at("experiment").get<std::string>() +
                          "', not '" + name + "'");
    if (name == "decay") return run_decay(config, o);
    if (name == "shadrin") return run_shadrin(config, o);
    if (name == "weaktype") return run_weaktype(config, o);
    if (name == "covering") return run_covering(config, o);
    if (name == "converge") return run_converge(config, o);
    if (name == "singular") return run_singular(config, o);
    if (name == "nondense") return run_nondense(config, o);
    throw ConfigError("unknown experiment '" + name + "'");
}

}  // namespace martspline
