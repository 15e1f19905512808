#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "qat/scenario.hpp"

using namespace qat;
namespace fs = std::filesystem;

namespace {

fs::path example(const std::string& name) { return fs::path(QAT_EXAMPLES_DIR) / (name + ".json"); }

std::vector<fs::path> all_examples() {
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(QAT_EXAMPLES_DIR))
        if (e.path().extension() == ".json") out.push_back(e.path());
    return out;
}

nlohmann::json minimal() {
    return nlohmann::json::parse(R"({
        "physical": {"mass": 1.0, "D": 0.0},
        "state": {"gaussian": {"x0": 5.0, "p0": -2.0, "sigma": 1.0}},
        "time": {"t1": 0.0, "t2": 1.0}
    })");
}

std::vector<std::string> messages(const nlohmann::json& j) {
    std::vector<std::string> out;
    for (const auto& d : parse_config(j).second) out.push_back(d.str());
    return out;
}

bool has(const std::vector<std::string>& v, const std::string& needle) {
    for (const auto& s : v)
        if (s.find(needle) != std::string::npos) return true;
    return false;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("qat_scenario_test_" + name);
    fs::remove_all(p);
    return p;
}

}  // namespace

TEST(Config, MinimalIsValid) {
    EXPECT_TRUE(parse_config(minimal()).second.empty());
}

TEST(Config, MissingMass) {
    auto j = minimal();
    j["physical"].erase("mass");
    EXPECT_TRUE(has(messages(j), "physical.mass required"));
}

TEST(Config, InvertedInterval) {
    auto j = minimal();
    j["time"]["t2"] = 0.0;
    EXPECT_TRUE(has(messages(j), "time.t2: interval inverted"));
}

TEST(Config, TemperatureConsistency) {
    auto j = minimal();
    j["physical"] = {{"mass", 2.0}, {"D", 1.0}, {"gamma", 0.5}, {"kT", 0.5}};
    EXPECT_TRUE(messages(j).empty());
    j["physical"]["D"] = 1.2;
    EXPECT_TRUE(has(messages(j), "physical.D: inconsistent with D = 2 m gamma kT = 1"));
    j["physical"].erase("D");
    const auto [c, d] = parse_config(j);
    EXPECT_TRUE(d.empty());
    EXPECT_DOUBLE_EQ(c.physical.params().D(), 1.0);
}

TEST(Config, StateVariants) {
    auto j = minimal();
    j["state"]["cat"] = {{"separation", 1.0}, {"p0", -1.0}, {"sigma", 0.5}};
    EXPECT_TRUE(has(messages(j), "exactly one of"));
    j["state"] = {{"squeezed", {{"r", 1.0}}}};
    EXPECT_TRUE(has(messages(j), "unknown variant"));
}

TEST(Config, OffendingKeysAreListed) {
    auto j = minimal();
    j["physical"]["masss"] = 1.0;
    j["grid"] = {{"n", 255}};
    j["analyses"] = {"current", "povm", "tunnelling"};
    const auto m = messages(j);
    EXPECT_TRUE(has(m, "physical.masss: unknown key"));
    EXPECT_TRUE(has(m, "grid.n: must be an even integer"));
    EXPECT_TRUE(has(m, "unknown analysis 'tunnelling'"));
    EXPECT_TRUE(has(m, "povm needs D > 0"));
}

TEST(Config, InfiniteHorizonOnlyForCurrent) {
    auto j = minimal();
    j["time"]["t2"] = "inf";
    EXPECT_TRUE(messages(j).empty());
    j["analyses"] = {"current", "histories"};
    EXPECT_TRUE(has(messages(j), "analysis 'histories' needs a finite t2"));
}

TEST(Config, EpsMustDivideInterval) {
    auto j = minimal();
    j["physical"]["D"] = 1.0;
    j["analyses"] = {"stochastic"};
    j["time"]["eps"] = 0.3;
    EXPECT_TRUE(has(messages(j), "time.eps: must divide"));
}

TEST(Config, UnreadableFileThrows) {
    EXPECT_THROW(validate_config("/nonexistent/qat.json"), InvalidArgument);
}

TEST(Config, ParseErrorIsADiagnostic) {
    const auto p = scratch("bad.json");
    std::ofstream(p) << "{ \"physical\": ";
    const auto d = validate_config(p.string());
    ASSERT_EQ(d.size(), 1u);
    EXPECT_NE(d[0].reason.find("parse error"), std::string::npos);
}

TEST(Config, BundledExamplesValidateAndRoundTrip) {
    const auto ex = all_examples();
    ASSERT_GE(ex.size(), 3u);
    for (const auto& p : ex) {
        EXPECT_TRUE(validate_config(p.string()).empty()) << p;
        const auto c = load_config(p.string());
        const auto again = config_from_json(nlohmann::json::parse(to_json(c).dump()));
        EXPECT_EQ(again, c) << p;
        EXPECT_EQ(to_json(again).dump(), to_json(c).dump());
    }
}

TEST(Scenario, FreeGaussianNormalization) {
    const auto out = scratch("free");
    const auto s = run_scenario(load_config(example("free_gaussian").string()), {out.string(), std::nullopt});
    ASSERT_TRUE(s.ok());
    EXPECT_NEAR(*s.find("current")->get("normalization"), 1.0, 0.01);
    for (const auto& f : s.manifest) EXPECT_TRUE(fs::exists(out / f)) << f;
}

TEST(Scenario, BackflowReportsNegativeCurrent) {
    const auto s = run_scenario(load_config(example("backflow").string()), {scratch("backflow").string(), std::nullopt});
    ASSERT_TRUE(s.ok());
    EXPECT_LT(*s.find("current")->get("min_J"), 0.0);
}

TEST(Scenario, PositivityTime) {
    const auto cfg = load_config(example("qbm_positivity").string());
    const auto s = run_scenario(cfg, {scratch("positivity").string(), std::nullopt});
    ASSERT_TRUE(s.ok());
    const auto* a = s.find("current");
    const double dt = (*cfg.time.t2 - cfg.time.t1) / (cfg.time.n_t - 1);
    EXPECT_LE(*a->get("positivity_time"), 0.66 * *a->get("tau_l") + dt);
}

TEST(Scenario, DeterministicCsv) {
    const auto cfg = load_config(example("stochastic_window").string());
    const auto a = scratch("det_a"), b = scratch("det_b");
    const auto sa = run_scenario(cfg, {a.string(), std::nullopt});
    const auto sb = run_scenario(cfg, {b.string(), std::nullopt});
    ASSERT_EQ(sa.manifest, sb.manifest);
    int compared = 0;
    for (const auto& f : sa.manifest)
        if (fs::path(f).extension() == ".csv") {
            EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
            ++compared;
        }
    EXPECT_EQ(compared, 2);
}

TEST(Scenario, StageTaggedFailure) {
    auto j = minimal();
    j["physical"]["D"] = 2.0;
    j["state"]["gaussian"] = {{"x0", 20.0}, {"p0", -20.0}, {"sigma", 1.0}};
    j["time"] = {{"t1", 0.1}, {"t2", 0.2}};
    j["analyses"] = {"current", "povm"};
    const auto s = run_scenario(config_from_json(j), {scratch("stage").string(), std::nullopt});
    EXPECT_FALSE(s.ok());
    EXPECT_EQ(s.find("current")->status, "ok");
    EXPECT_EQ(s.find("povm")->status, "error");
    EXPECT_EQ(s.find("povm")->message, "povm/arrival: too early for POVM construction");
}

TEST(Scenario, GridOverride) {
    auto j = minimal();
    j["physical"]["D"] = 0.5;
    j["state"]["gaussian"] = {{"x0", 10.0}, {"p0", -5.0}, {"sigma", 1.0}};
    j["time"] = {{"t1", 1.5}, {"t2", 2.0}, {"eps", 0.02}};
    j["analyses"] = {"stochastic"};
    const auto coarse = run_scenario(config_from_json(j), {scratch("grid").string(), 128});
    EXPECT_EQ(coarse.find("stochastic")->status, "error");
    EXPECT_NE(coarse.find("stochastic")->message.find("stochastic/scenario: q spacing"), std::string::npos);
    const auto fine = run_scenario(config_from_json(j), {scratch("grid").string(), 512});
    EXPECT_EQ(fine.find("stochastic")->status, "ok") << fine.find("stochastic")->message;
    EXPECT_NEAR(*fine.find("stochastic")->get("relative_gap"), 0.0, 0.05);
}
