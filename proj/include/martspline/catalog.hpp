/**
 * @file catalog.hpp
 * @brief Named test functions and measures, and their JSON config form.
 *
 * Function entries look like {"name": "gaussian", "center": [..], "sigma": 0.2}.
 * Vector-valued functions list their components: {"components": [{..}, {..}]}.
 */
#pragma once

#include "martspline/filtration.hpp"
#include "martspline/measures.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace martspline {

/// Malformed configuration; the message names the field (JSON pointer) or line.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace cfg {

using json = nlohmann::json;

template <class T>
T get(const json& j, const std::string& key, const std::string& path) {
    if (!j.is_object() || !j.contains(key)) throw ConfigError("missing field " + path + "/" + key);
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("wrong type for field " + path + "/" + key);
    }
}

template <class T>
T get_or(const json& j, const std::string& key, const std::string& path, T fallback) {
    if (!j.is_object() || !j.contains(key)) return fallback;
    return get<T>(j, key, path);
}

inline const json& child(const json& j, const std::string& key, const std::string& path) {
    if (!j.is_object() || !j.contains(key)) throw ConfigError("missing field " + path + "/" + key);
    return j.at(key);
}

}  // namespace cfg

/// Parses a JSON file, reporting the line of a syntax error.
inline nlohmann::json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        std::size_t line = 1;
        for (std::size_t i = 0; i < std::min<std::size_t>(e.byte, text.size()); ++i)
            if (text[i] == '\n') ++line;
        throw ConfigError(path + ":" + std::to_string(line) + ": " + e.what());
    }
}

inline std::vector<double> fill_axes(const std::vector<double>& v, int d, const std::string& what) {
    if (v.size() == 1) return std::vector<double>(static_cast<std::size_t>(d), v[0]);
    if (static_cast<int>(v.size()) != d) throw ConfigError(what + ": need 1 or d entries");
    return v;
}

/// Scalar catalog function on I^d.
inline VectorFunction scalar_from_json(const nlohmann::json& j, int d, const std::string& path) {
    using cfg::get;
    using cfg::get_or;
    const auto name = get<std::string>(j, "name", path);
    if (name == "constant") {
        double c = get_or<double>(j, "value", path, 1.0);
        return scalar_function([c](std::span<const double>) { return c; }, 0);
    }
    if (name == "polynomial") {
        // product of one polynomial per axis, coefficients in increasing degree
        auto coeffs = get<std::vector<std::vector<double>>>(j, "coeffs", path);
        if (coeffs.size() == 1) coeffs.assign(static_cast<std::size_t>(d), coeffs[0]);
        if (static_cast<int>(coeffs.size()) != d) throw ConfigError("field " + path + "/coeffs: need 1 or d lists");
        int deg = 0;
        for (const auto& c : coeffs) deg = std::max(deg, static_cast<int>(c.size()) - 1);
        return scalar_function(
            [coeffs](std::span<const double> x) {
                double v = 1.0;
                for (std::size_t l = 0; l < coeffs.size(); ++l) {
                    double p = 0.0;
                    for (std::size_t r = coeffs[l].size(); r-- > 0;) p = p * x[l] + coeffs[l][r];
                    v *= p;
                }
                return v;
            },
            deg);
    }
    if (name == "smooth_tensor") {
        // Π_l (offset + sin(π ω x_l + φ_l))
        auto omega = fill_axes(get_or<std::vector<double>>(j, "omega", path, {2.0}), d, path + "/omega");
        auto phase = fill_axes(get_or<std::vector<double>>(j, "phase", path, {0.3}), d, path + "/phase");
        double offset = get_or<double>(j, "offset", path, 1.5);
        return scalar_function([=](std::span<const double> x) {
            double v = 1.0;
            for (std::size_t l = 0; l < omega.size(); ++l)
                v *= offset + std::sin(std::numbers::pi * omega[l] * x[l] + phase[l]);
            return v;
        });
    }
    if (name == "gaussian") {
        auto c = fill_axes(get_or<std::vector<double>>(j, "center", path, {0.5}), d, path + "/center");
        double s = get_or<double>(j, "sigma", path, 0.25);
        return scalar_function([=](std::span<const double> x) {
            double r2 = 0.0;
            for (std::size_t l = 0; l < c.size(); ++l) r2 += (x[l] - c[l]) * (x[l] - c[l]);
            return std::exp(-r2 / (2.0 * s * s));
        });
    }
    if (name == "sigmoid") {
        // steep transition across the hyperplane x_axis = at
        int axis = get_or<int>(j, "axis", path, 0);
        double at = get_or<double>(j, "at", path, 0.5);
        double width = get_or<double>(j, "width", path, 0.01);
        if (axis < 0 || axis >= d) throw ConfigError("field " + path + "/axis out of range");
        return scalar_function(
            [=](std::span<const double> x) { return 1.0 / (1.0 + std::exp(-(x[axis] - at) / width)); });
    }
    if (name == "singular") {
        // ‖x - x0‖^{-α}, integrable when α d < 1
        auto c = fill_axes(get_or<std::vector<double>>(j, "center", path, {0.5}), d, path + "/center");
        double alpha = get<double>(j, "alpha", path);
        if (!(alpha > 0.0 && alpha * d < 1.0)) throw ConfigError("field " + path + "/alpha: need 0 < alpha*d < 1");
        return scalar_function([=](std::span<const double> x) {
            double r2 = 0.0;
            for (std::size_t l = 0; l < c.size(); ++l) r2 += (x[l] - c[l]) * (x[l] - c[l]);
            return r2 > 0.0 ? std::pow(r2, -0.5 * alpha) : 0.0;
        });
    }
    if (name == "spike") {
        // height on the rectangle Π (lo_l, hi_l], zero elsewhere
        auto lo = fill_axes(get<std::vector<double>>(j, "lo", path), d, path + "/lo");
        auto hi = fill_axes(get<std::vector<double>>(j, "hi", path), d, path + "/hi");
        double h = get_or<double>(j, "height", path, 1.0);
        return scalar_function([=](std::span<const double> x) {
            for (std::size_t l = 0; l < lo.size(); ++l)
                if (!(lo[l] < x[l] && x[l] <= hi[l])) return 0.0;
            return h;
        });
    }
    throw ConfigError("unknown function name '" + name + "' at " + path);
}

inline VectorFunction function_from_json(const nlohmann::json& j, int d, const std::string& path = "") {
    if (!j.is_object()) throw ConfigError("field " + path + " must be an object");
    if (!j.contains("components")) return scalar_from_json(j, d, path);
    const auto& comps = j.at("components");
    if (!comps.is_array() || comps.empty()) throw ConfigError("field " + path + "/components must be a nonempty array");
    std::vector<VectorFunction> parts;
    int deg = 0;
    for (std::size_t c = 0; c < comps.size(); ++c) {
        parts.push_back(scalar_from_json(comps[c], d, path + "/components/" + std::to_string(c)));
        deg = parts.back().polynomial_degree < 0 || deg < 0 ? -1 : std::max(deg, parts.back().polynomial_degree);
    }
    VectorFunction f;
    f.m = static_cast<int>(parts.size());
    f.polynomial_degree = deg;
    f.fn = [parts](std::span<const double> x, std::span<double> out) {
        double v[1];
        for (std::size_t c = 0; c < parts.size(); ++c) {
            parts[c].fn(x, std::span<double>(v, 1));
            out[c] = v[0];
        }
    };
    return f;
}

/// {"density": {...} (optional), "quadrature_points": 16, "diracs": [{"at": [..], "mass": [..]}]}
inline HybridMeasure measure_from_json(const nlohmann::json& j, int d, const std::string& path = "") {
    using cfg::get_or;
    int m = 1;
    VectorFunction dens;
    bool has = j.contains("density");
    if (has) {
        dens = function_from_json(j.at("density"), d, path + "/density");
        m = dens.m;
    } else if (j.contains("diracs") && j.at("diracs").is_array() && !j.at("diracs").empty()) {
        m = static_cast<int>(cfg::get<std::vector<double>>(j.at("diracs")[0], "mass", path + "/diracs/0").size());
    }
    HybridMeasure theta(d, m);
    if (has) theta.set_density(dens, get_or<int>(j, "quadrature_points", path, 16));
    if (j.contains("diracs")) {
        const auto& ds = j.at("diracs");
        for (std::size_t i = 0; i < ds.size(); ++i) {
            const std::string p = path + "/diracs/" + std::to_string(i);
            auto at = cfg::get<std::vector<double>>(ds[i], "at", p);
            auto mass = cfg::get<std::vector<double>>(ds[i], "mass", p);
            if (static_cast<int>(at.size()) != d) throw ConfigError("field " + p + "/at: need d coordinates");
            if (static_cast<int>(mass.size()) != m) throw ConfigError("field " + p + "/mass: value dimension mismatch");
            theta.add_dirac(at, mass);
        }
    }
    return theta;
}

/// {"d": 2, "interval": [0, 1], "depth": 8, "rule": {...} or "rules": [{...}, ..]}
/// with rule = {"name": "random-atom-bisect", "probability": .5, "targets": [..], "frozen": [[lo, hi], ..]}.
inline AxisRule axis_rule_from_json(const nlohmann::json& j, const std::string& path) {
    using cfg::get_or;
    AxisRule r;
    try {
        r.kind = rule_from_name(cfg::get<std::string>(j, "name", path));
    } catch (const std::invalid_argument& e) {
        throw ConfigError("field " + path + "/name: " + e.what());
    }
    r.probability = get_or<double>(j, "probability", path, r.probability);
    r.split_lo = get_or<double>(j, "split_lo", path, r.split_lo);
    r.split_hi = get_or<double>(j, "split_hi", path, r.split_hi);
    r.targets = get_or<std::vector<double>>(j, "targets", path, {});
    for (const auto& z : get_or<std::vector<std::vector<double>>>(j, "frozen", path, {})) {
        if (z.size() != 2) throw ConfigError("field " + path + "/frozen: intervals are [lo, hi] pairs");
        r.frozen.push_back({z[0], z[1]});
    }
    return r;
}

inline FiltrationSpec filtration_spec_from_json(const nlohmann::json& j, const std::string& path = "") {
    using cfg::get_or;
    FiltrationSpec s;
    s.d = get_or<int>(j, "d", path, 1);
    auto iv = get_or<std::vector<double>>(j, "interval", path, {0.0, 1.0});
    if (iv.size() != 2) throw ConfigError("field " + path + "/interval: need [lo, hi]");
    s.domain = {iv[0], iv[1]};
    s.depth = get_or<int>(j, "depth", path, 1);
    s.seed = get_or<std::uint64_t>(j, "seed", path, 0);
    if (j.contains("rules")) {
        const auto& rs = j.at("rules");
        for (std::size_t i = 0; i < rs.size(); ++i) s.rules.push_back(axis_rule_from_json(rs[i], path + "/rules/" + std::to_string(i)));
    } else {
        s.rules.push_back(axis_rule_from_json(cfg::child(j, "rule", path), path + "/rule"));
    }
    return s;
}

}  // namespace martspline
