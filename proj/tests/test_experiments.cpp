#include "martspline/experiments.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace martspline;
using nlohmann::json;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Experiments, SupTimesSuperlevelIsExact) {
    // values 3 (w .1), 2 (w .2), 1 (w .5): max of 3·.1, 2·.3, 1·.8
    EXPECT_DOUBLE_EQ(detail::sup_t_superlevel({2, 1, 3}, {0.2, 0.5, 0.1}), 0.8);
    EXPECT_DOUBLE_EQ(detail::sup_t_superlevel({1, 1}, {0.25, 0.25}), 0.5);
}

TEST(Experiments, SmallDecayRunPasses) {
    auto c = json::parse(R"({"orders":[1,2],"seeds":2,"depth":6,"pou_points":200})");
    auto r = run_experiment("decay", c, {});
    EXPECT_TRUE(r.pass());
    EXPECT_NE(r.find("biorthogonality_k2"), nullptr);
    EXPECT_GT(r.csv.rows(), 0u);
}

TEST(Experiments, SmallCoveringRunPasses) {
    auto c = json::parse(R"({"dims":[1,2],"qs":[0.5],"seeds":2,"depth_d1":6,"depth_d2":4,"t_points":5})");
    auto r = run_experiment("covering", c, {});
    EXPECT_TRUE(r.pass());
    EXPECT_EQ(r.csv.rows(), 2u * 2u * 5u);
}

TEST(Experiments, SmallWeaktypeRunPasses) {
    auto c = json::parse(R"({"dims":[1],"qs":[0.5],"spikes":3,"depth_d1":6})");
    auto r = run_experiment("weaktype", c, {});
    EXPECT_TRUE(r.pass());
    EXPECT_NE(r.find("hardy_littlewood_three"), nullptr);
}

TEST(Experiments, SmallConvergeRun) {
    auto c = json::parse(R"({"dims":[1],"orders":[3],"depth":7,"probes":50,"functions":[{"name":"gaussian"}]})");
    auto r = run_experiment("converge", c, {});
    EXPECT_TRUE(r.pass());
}

TEST(Experiments, SmallNondenseTargetedRun) {
    auto c = json::parse(R"({"dims":[1],"depth":8,"probes":20,"max_r":1,
        "families":[{"name":"targeted","rule":{"name":"point-targeted","targets":[0.0]}}]})");
    auto r = run_experiment("nondense", c, {});
    ASSERT_NE(r.find("martingale_targeted_d1"), nullptr);
    EXPECT_TRUE(r.find("martingale_targeted_d1")->pass);
}

TEST(Experiments, OverridesApply) {
    auto c = json::parse(R"({"orders":[2],"seeds":1,"depth":9,"pou_points":10})");
    RunOptions o;
    o.seed = 77;
    o.depth = 4;
    auto r = run_experiment("decay", c, o);
    EXPECT_EQ(r.params["depth"], 4);
    EXPECT_EQ(r.params["seed"], 77u);
}

TEST(Experiments, OutputsAreDeterministic) {
    auto c = json::parse(R"({"dims":[2],"qs":[0.3],"seeds":2,"depth_d2":4,"t_points":4})");
    auto dir = std::filesystem::temp_directory_path() / "martspline_det";
    std::filesystem::remove_all(dir);
    write_outputs(run_experiment("covering", c, {}), dir / "a", "inline", 0.0);
    write_outputs(run_experiment("covering", c, {}), dir / "b", "inline", 1.0);
    for (const char* f : {"covering.csv", "covering.summary.json"})
        EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
    auto summary = json::parse(slurp(dir / "a" / "covering.summary.json"));
    for (const char* key : {"experiment", "params", "seeds", "assertions"}) EXPECT_TRUE(summary.contains(key));
    EXPECT_TRUE(std::filesystem::exists(dir / "a" / "covering.meta.json"));
}

TEST(Experiments, ConfigErrorsNameTheField) {
    try {
        run_experiment("decay", json::parse(R"({"seeds":"many"})"), {});
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("/seeds"), std::string::npos);
    }
    EXPECT_THROW(run_experiment("bogus", json::object(), {}), ConfigError);
    EXPECT_THROW(run_experiment("decay", json::parse(R"({"experiment":"shadrin"})"), {}), ConfigError);
    try {
        run_experiment("singular", json::parse(R"({"cases":[{"d":1}]})"), {});
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("/cases/0"), std::string::npos);
    }
}

TEST(Experiments, ParseErrorsReportLine) {
    auto p = std::filesystem::temp_directory_path() / "martspline_bad.json";
    {
        std::ofstream out(p);
        out << "{\n  \"seeds\": 3,\n  \"depth\": ,\n}\n";
    }
    try {
        load_json_file(p.string());
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
    }
}

TEST(Experiments, ShippedConfigsParse) {
    for (const auto& name : experiment_names()) {
        auto c = load_json_file(std::string(CONFIG_DIR) + "/" + name + ".json");
        EXPECT_EQ(c.at("experiment"), name);
    }
}
