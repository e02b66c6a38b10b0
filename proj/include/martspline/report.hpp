/**
 * @file report.hpp
 * @brief Experiment results and their on-disk form: <name>.csv,
 *        <name>.summary.json and <name>.meta.json.
 */
#pragma once

#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace martspline {

/// Shortest round-trip decimal form, so repeated runs write identical bytes.
inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header = {}) : header_(std::move(header)) {}

    const std::vector<std::string>& header() const { return header_; }
    std::size_t rows() const { return rows_.size(); }

    template <class... Ts>
    void add(const Ts&... values) {
        std::vector<std::string> row;
        (row.push_back(cell(values)), ...);
        rows_.push_back(std::move(row));
    }

    std::string str() const {
        std::string s;
        auto line = [&](const std::vector<std::string>& r) {
            for (std::size_t i = 0; i < r.size(); ++i) {
                if (i) s += ',';
                s += r[i];
            }
            s += '\n';
        };
        line(header_);
        for (const auto& r : rows_) line(r);
        return s;
    }

private:
    static std::string cell(double v) { return fmt(v); }
    static std::string cell(float v) { return fmt(v); }
    static std::string cell(int v) { return std::to_string(v); }
    static std::string cell(long v) { return std::to_string(v); }
    static std::string cell(unsigned long v) { return std::to_string(v); }
    static std::string cell(unsigned long long v) { return std::to_string(v); }
    static std::string cell(long long v) { return std::to_string(v); }
    static std::string cell(const std::string& v) { return v; }
    static std::string cell(const char* v) { return v; }

    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

struct Assertion {
    std::string name;
    double bound = 0.0;
    double observed = 0.0;
    bool pass = false;
};

struct ExperimentResult {
    std::string name;
    nlohmann::json params = nlohmann::json::object();
    std::vector<std::uint64_t> seeds;
    std::vector<Assertion> assertions;
    nlohmann::json diagnostics = nlohmann::json::object();
    CsvTable csv;

    bool pass() const {
        for (const auto& a : assertions)
            if (!a.pass) return false;
        return true;
    }

    /// observed <= bound
    void assert_le(const std::string& n, double observed, double bound) {
        assertions.push_back({n, bound, observed, observed <= bound});
    }
    /// observed < bound
    void assert_lt(const std::string& n, double observed, double bound) {
        assertions.push_back({n, bound, observed, observed < bound});
    }
    /// observed >= bound
    void assert_ge(const std::string& n, double observed, double bound) {
        assertions.push_back({n, bound, observed, observed >= bound});
    }

    const Assertion* find(const std::string& n) const {
        for (const auto& a : assertions)
            if (a.name == n) return &a;
        return nullptr;
    }
};

inline nlohmann::json summary_json(const ExperimentResult& r) {
    nlohmann::json j;
    j["experiment"] = r.name;
    j["params"] = r.params;
    j["seeds"] = r.seeds;
    nlohmann::json as = nlohmann::json::array();
    for (const auto& a : r.assertions)
        as.push_back({{"name", a.name}, {"bound", a.bound}, {"observed", a.observed}, {"pass", a.pass}});
    j["assertions"] = as;
    j["diagnostics"] = r.diagnostics;
    j["pass"] = r.pass();
    return j;
}

inline void write_text(const std::filesystem::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << s;
}

/// Writes the three files into dir (created if missing); returns their paths.
inline std::vector<std::filesystem::path> write_outputs(const ExperimentResult& r, const std::filesystem::path& dir,
                                                        const std::string& config_path, double runtime_seconds) {
    std::filesystem::create_directories(dir);
    auto csv = dir / (r.name + ".csv");
    auto sum = dir / (r.name + ".summary.json");
    auto meta = dir / (r.name + ".meta.json");
    write_text(csv, r.csv.str());
    write_text(sum, summary_json(r).dump(2) + "\n");
    std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char ts[32];
    std::strftime(ts, sizeof ts, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    nlohmann::json m;
    m["tool"] = "martspline";
    m["version"] = "0.1.0";
    m["compiler"] = __VERSION__;
    m["cxx_standard"] = static_cast<long>(__cplusplus);
    m["json_library"] = "nlohmann/json " + std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                        std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_PATCH);
    m["config"] = config_path;
    m["timestamp"] = ts;
    m["runtime_seconds"] = runtime_seconds;
    write_text(meta, m.dump(2) + "\n");
    return {csv, sum, meta};
}

}  // namespace martspline
