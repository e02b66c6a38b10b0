// Acceptance run: every experiment from the shipped configs, one PASS/FAIL line
// per criterion. Each experiment runs twice to check byte-identical outputs.
#include "martspline/experiments.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

using namespace martspline;
namespace fs = std::filesystem;

namespace {

struct Run {
    ExperimentResult result;
    double seconds = 0.0;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool starts_with(const std::string& s, const std::string& prefix) { return s.rfind(prefix, 0) == 0; }

struct Verdict {
    bool pass = true;
    int checked = 0;
    std::string detail;
};

// Collect assertions by name prefix; the detail names the first failure or the count.
void collect(Verdict& v, const ExperimentResult& r, const std::vector<std::string>& prefixes) {
    for (const auto& a : r.assertions)
        for (const auto& p : prefixes)
            if (starts_with(a.name, p)) {
                ++v.checked;
                if (!a.pass && v.pass) {
                    v.pass = false;
                    v.detail = r.name + "/" + a.name + " observed " + fmt(a.observed) + " bound " + fmt(a.bound);
                } else if (!a.pass) {
                    v.detail += "; " + a.name + " observed " + fmt(a.observed);
                }
                break;
            }
}

void runtime(Verdict& v, const Run& r, double limit) {
    ++v.checked;
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s runtime %.1f s (limit %.0f s)", r.result.name.c_str(), r.seconds, limit);
    if (r.seconds > limit) {
        v.pass = false;
        v.detail += (v.detail.empty() ? "" : "; ") + std::string(buf);
    } else if (v.pass) {
        v.detail += (v.detail.empty() ? "" : ", ") + std::string(buf);
    }
}

}  // namespace

int main(int argc, char** argv) {
    const fs::path out = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "martspline_acceptance";
    fs::remove_all(out);

    std::map<std::string, Run> runs;
    bool deterministic = true;
    std::string det_detail;
    for (const auto& name : experiment_names()) {
        const std::string cfg_path = std::string(CONFIG_DIR) + "/" + name + ".json";
        auto cfg = load_json_file(cfg_path);
        for (int pass = 0; pass < 2; ++pass) {
            auto t0 = std::chrono::steady_clock::now();
            auto r = run_experiment(name, cfg, {});
            double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            write_outputs(r, out / ("run" + std::to_string(pass)), cfg_path, secs);
            if (pass == 0) {
                std::printf("  ran %-9s %6.1f s  %s\n", name.c_str(), secs, r.pass() ? "all assertions hold" : "has failing assertions");
                std::fflush(stdout);
                runs[name] = {std::move(r), secs};
            }
        }
        for (const auto& suffix : {".csv", ".summary.json"}) {
            const std::string file = name + suffix;
            if (slurp(out / "run0" / file) != slurp(out / "run1" / file)) {
                deterministic = false;
                det_detail += (det_detail.empty() ? "" : ", ") + file + " differs";
            }
        }
    }

    std::vector<std::pair<std::string, Verdict>> crit;
    {
        Verdict v;
        collect(v, runs["decay"].result, {"biorthogonality_"});
        runtime(v, runs["decay"], 60);
        crit.push_back({"biorthogonality", v});
    }
    {
        Verdict v;
        collect(v, runs["decay"].result, {"partition_of_unity", "basis_nonnegative"});
        crit.push_back({"partition of unity and nonnegativity", v});
    }
    {
        Verdict v;
        collect(v, runs["shadrin"].result, {"norm_k1_equals_one", "depth_spread_", "tensor_norm_is_product"});
        runtime(v, runs["shadrin"], 300);
        crit.push_back({"uniform kernel norms", v});
    }
    {
        Verdict v;
        collect(v, runs["decay"].result, {"q_hat_max_", "profile_monotone_violations_"});
        crit.push_back({"geometric decay of duals", v});
    }
    {
        Verdict v;
        collect(v, runs["covering"].result, {"covering_"});
        runtime(v, runs["covering"], 600);
        crit.push_back({"covering bound with proof constant", v});
    }
    {
        Verdict v;
        collect(v, runs["weaktype"].result,
                {"maximal_weak_type_", "projection_maximal_weak_type_", "hardy_littlewood_three"});
        crit.push_back({"weak type (1,1)", v});
    }
    {
        Verdict v;
        for (const char* e : {"converge", "singular", "nondense"}) collect(v, runs[e].result, {"martingale_"});
        crit.push_back({"martingale property", v});
    }
    {
        Verdict v;
        collect(v, runs["converge"].result, {"converged_fraction_"});
        collect(v, runs["singular"].result, {"converged_fraction_", "dirac_log_slope_deviation_", "singular_envelope_"});
        crit.push_back({"convergence on dense filtrations", v});
    }
    {
        Verdict v;
        collect(v, runs["nondense"].result, {"v_interval_found_", "limit_dual_delta_", "limit_dual_decay_", "sequence_limit_"});
        crit.push_back({"non-dense filtrations", v});
    }
    {
        Verdict v;
        v.checked = static_cast<int>(2 * experiment_names().size());
        v.pass = deterministic;
        v.detail = deterministic ? "csv and summary identical across two runs of all experiments" : det_detail;
        crit.push_back({"determinism", v});
    }

    int failed = 0;
    for (std::size_t i = 0; i < crit.size(); ++i) {
        const auto& [title, v] = crit[i];
        const bool ok = v.pass && v.checked > 0;
        if (!ok) ++failed;
        std::string detail = std::to_string(v.checked) + " checks";
        if (!v.detail.empty()) detail = v.pass ? detail + "; " + v.detail : v.detail;
        std::printf("criterion %2zu %s  %s  (%s)\n", i + 1, ok ? "PASS" : "FAIL", title.c_str(), detail.c_str());
    }
    std::printf("%d of %zu criteria fail; outputs in %s\n", failed, crit.size(), out.string().c_str());
    return failed == 0 ? 0 : 1;
}
