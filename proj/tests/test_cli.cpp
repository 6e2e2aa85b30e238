#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <string>

#include "thb/harness.hpp"

#ifndef THB_CLI_PATH
#error "THB_CLI_PATH must name the command-line tool"
#endif
#ifndef THB_TEST_DATA
#error "THB_TEST_DATA must name the fixture directory"
#endif

namespace {

struct CliRun {
    int code = -1;
    std::string out;
};

CliRun run(const std::string& args) {
    const std::string cmd = std::string(THB_CLI_PATH) + " " + args + " 2>&1";
    CliRun r;
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return r;
    std::array<char, 4096> buf{};
    while (std::fgets(buf.data(), static_cast<int>(buf.size()), p)) r.out += buf.data();
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string data(const std::string& name) { return std::string(THB_TEST_DATA) + "/" + name; }

std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "thb_cli_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

} // namespace

TEST(Cli, CheckMeshOnQuadraticFixture) {
    const CliRun r = run("check-mesh " + data("f1.json"));
    EXPECT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("border projection elements 1"), std::string::npos) << r.out;
}

TEST(Cli, CheckMeshNamesViolatedAssumption) {
    const CliRun r = run("check-mesh " + data("narrow.json"));
    EXPECT_EQ(r.code, 1) << r.out;
    EXPECT_NE(r.out.find("assumption 3 (wide refinements): VIOLATED"), std::string::npos) << r.out;
}

TEST(Cli, UsageAndParseErrors) {
    EXPECT_EQ(run("").code, 2);
    EXPECT_EQ(run("frobnicate").code, 2);
    EXPECT_EQ(run("check-mesh").code, 2);
    EXPECT_EQ(run("check-mesh /nonexistent/mesh.json").code, 2);
    const auto bad = scratch("bad.json");
    thb::write_text_file(bad.string(), "{\n \"dim\": 1,\n \"degrees\": [2,\n}");
    const CliRun r = run("check-mesh " + bad.string());
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.out.find("line 4"), std::string::npos) << r.out;
}

TEST(Cli, ConvergeOneRowPerDegreeAndRound) {
    const auto out = scratch("rates.csv");
    const CliRun r = run("converge --degrees 1,2 --rounds 3 --out " + out.string());
    ASSERT_EQ(r.code, 0) << r.out;
    const std::string csv = thb::read_text_file(out.string());
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 2 * 3);
    EXPECT_EQ(csv.rfind(thb::kResultsHeader, 0), 0u);
    run("converge --degrees 1,2 --rounds 3 --out " + scratch("rates2.csv").string());
    EXPECT_EQ(thb::read_text_file(scratch("rates2.csv").string()), csv);
}

TEST(Cli, ProjectAndRender) {
    const auto coeffs = scratch("coeffs.json");
    const CliRun r = run("project --mesh " + data("f1.json") + " --target monomial:2 --coeffs " + coeffs.string());
    ASSERT_EQ(r.code, 0) << r.out;
    const auto j = nlohmann::json::parse(thb::read_text_file(coeffs.string()));
    EXPECT_EQ(j["coefficients"].size(), 14u);
    const auto svg = scratch("f1.svg");
    ASSERT_EQ(run("render-mesh " + data("f1.json") + " --projection-elements --out " + svg.string()).code, 0);
    const std::string s = thb::read_text_file(svg.string());
    EXPECT_NE(s.find("class=\"pe\""), std::string::npos);
    EXPECT_NE(s.find("class=\"level1\""), std::string::npos);
}

TEST(Cli, AdaptWritesArtifacts) {
    const auto dir = scratch("adapt_run");
    std::filesystem::remove_all(dir);
    const CliRun r = run("adapt --target tanh-ring --degrees 2,2 --max-level 3 --tol 1e-2 --out-dir " + dir.string());
    ASSERT_EQ(r.code, 0) << r.out;
    for (const auto* f : {"run.csv", "config.json", "final.svg", "final.json", "mesh_0.json"})
        EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
    EXPECT_NO_THROW(thb::load_hierarchy((dir / "final.json").string()));
}
