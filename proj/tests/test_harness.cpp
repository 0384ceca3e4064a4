#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "jointfold/cloud_io.hpp"
#include "jointfold/harness.hpp"

using namespace jointfold;
using json = nlohmann::json;

namespace {

std::string error_of(const json& j) {
  try {
    const auto cfg = parse_config(j);
    run(cfg);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

std::filesystem::path fresh_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("jointfold_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Config, UnknownFieldsNameTheirPath) {
  EXPECT_NE(error_of({{"experiment", "classify"}, {"sede", 3}}).find("unknown field 'sede'"), std::string::npos);
  EXPECT_NE(error_of({{"experiment", "classify"}, {"classify", {{"sigmaa", 0.1}}}}).find("unknown field 'classify.sigmaa'"),
            std::string::npos);
  EXPECT_NE(error_of({{"experiment", "reach"}, {"reach", {{"components", {{{"manifold", "circle"}, {"radus", 2}}}}}}})
                .find("radus"),
            std::string::npos);
}

TEST(Config, TypeAndValueErrors) {
  EXPECT_THROW(parse_config({{"seed", -1}}), ConfigError);
  EXPECT_THROW(parse_config({{"seed", "one"}}), ConfigError);
  EXPECT_THROW(parse_config({{"experiment", "bogus"}}), ConfigError);
  EXPECT_THROW(parse_config({{"classify", 3}}), ConfigError);
  EXPECT_FALSE(error_of({{"experiment", "sample"}, {"sample", {{"manifold", "torus"}}}}).empty());
  EXPECT_FALSE(error_of({{"experiment", "sample"}, {"sample", {{"strategy", "sobol"}}}}).empty());
  EXPECT_FALSE(error_of({{"experiment", "sample"}, {"sample", {{"samples", 10}, {"manifold", "ellipse"}, {"a", 7}, {"b", 5}}}}).empty());
}

TEST(Config, HashIsCanonical) {
  const auto a = parse_config(json::parse(R"({"experiment":"classify","seed":3,"classify":{"J":2,"gap":0.5}})"));
  const auto b = parse_config(json::parse(R"({"classify":{"gap":0.5,"J":2},"seed":3,"experiment":"classify","threads":4})"));
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
  auto c = a;
  c.seed = 4;
  EXPECT_NE(config_hash(a), config_hash(c));
  auto d = a;
  d.trials = 100;
  EXPECT_NE(config_hash(a), config_hash(d));
}

TEST(Config, LoadFromFile) {
  const auto dir = fresh_dir("load");
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir / "c.json");
    f << R"({"experiment": "helix", "seed": 9, "helix": {"samples": 500}})";
  }
  const auto cfg = load_config((dir / "c.json").string());
  EXPECT_EQ(cfg.experiment, "helix");
  EXPECT_EQ(cfg.seed, 9u);
  {
    std::ofstream f(dir / "bad.json");
    f << "{ not json";
  }
  EXPECT_THROW(load_config((dir / "bad.json").string()), ConfigError);
  EXPECT_THROW(load_config((dir / "missing.json").string()), ConfigError);
}

TEST(Checks, CsvFormat) {
  std::ostringstream out;
  write_checks_csv(out, {check_le("reach", "x", 0.1, 0.25), observation(check_ge("fusion", "y", 1.0, 2.0))});
  EXPECT_EQ(out.str(),
            "module,name,measured,relation,threshold,pass,assertion\n"
            "reach,x,0.10000000000000001,<=,0.25,pass,assert\n"
            "fusion,y,1,>=,2,fail,observe\n");
  RunManifest m;
  m.checks = {observation(check_ge("fusion", "y", 1.0, 2.0))};
  EXPECT_TRUE(m.passed());
  m.checks.push_back(check_le("reach", "x", 1.0, 0.0));
  EXPECT_FALSE(m.passed());
}

TEST(Run, ClassifyIsDeterministicAndWritesOutputs) {
  const auto dir = fresh_dir("classify");
  json j{{"experiment", "classify"}, {"seed", 5}, {"out", dir.string()}, {"classify", {{"J", 3}, {"samples", 20}, {"trials", 2000}}}};
  const auto first = run(parse_config(j));
  const std::string csv = slurp(dir / "checks.csv");
  j["threads"] = 1;
  const auto second = run(parse_config(j));
  EXPECT_EQ(slurp(dir / "checks.csv"), csv);
  EXPECT_EQ(first.report.dump(), second.report.dump());
  EXPECT_TRUE(first.passed());
  const json manifest = json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(manifest.at("experiment"), "classify");
  EXPECT_EQ(manifest.at("config_hash"), first.config_hash);
}

TEST(Run, HelixReportsCurvatureRadius) {
  const auto m = run(parse_config({{"experiment", "helix"}, {"helix", {{"samples", 1000}, {"vertices", 2000}}}}));
  EXPECT_TRUE(m.passed());
  EXPECT_NEAR(m.report.at("joint").at("tau").get<double>(), 2.0, 1e-4);
}

TEST(Run, SampleWritesReadableClouds) {
  const auto dir = fresh_dir("sample");
  const auto m = run(parse_config({{"experiment", "sample"},
                                   {"out", dir.string()},
                                   {"sample", {{"manifold", "helix"}, {"samples", 64}, {"csv", true}}}}));
  EXPECT_EQ(m.report.at("components"), 2);
  const auto joint = load_cloud((dir / "joint.jfld").string());
  EXPECT_EQ(joint.size(), 64);
  EXPECT_EQ(joint.ambient_dim(), 3);
  EXPECT_TRUE(std::filesystem::exists(dir / "component_1.csv"));
}

TEST(Run, ReachOnTrigPair) {
  const auto m = run(parse_config(
      {{"experiment", "reach"},
       {"reach", {{"samples", 400}, {"components", {{{"manifold", "trig"}, {"seed", 3}}, {{"manifold", "trig"}, {"seed", 4}}}}}}}));
  EXPECT_TRUE(m.passed());
  ASSERT_EQ(m.checks.size(), 1u);
  EXPECT_EQ(m.checks[0].name, "cond_jam");
}
