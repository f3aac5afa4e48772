#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "simfuzz/config.hpp"

namespace simfuzz {
namespace {

using nlohmann::json;

std::string error_key(const std::function<void()>& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "<no error>";
}

TEST(Config, DefaultsRoundTrip) {
  const AppConfig d;
  const json j = to_json(d);
  EXPECT_EQ(j.at("schema_version"), kConfigSchemaVersion);
  EXPECT_FALSE(j.at("scenario").contains("faults"));
  EXPECT_TRUE(j.contains("faults"));
  EXPECT_EQ(to_json(app_config_from_json(j)), j);
  EXPECT_EQ(to_json(load_config(json::object())), j);
}

TEST(Config, OverridesApplyInOrder) {
  const AppConfig c = load_config(json{{"rng_seed", 3}}, {"faults.double_impulse=true", "scenario.radius=0.15",
                                                          "campaign.max_iter=7", "campaign.max_iter=9",
                                                          "classifier.direction=majority", "classifier.pos_tol=1e-4"});
  EXPECT_EQ(c.rng_seed, 3u);
  EXPECT_TRUE(c.scenario.faults.double_impulse);
  EXPECT_DOUBLE_EQ(c.scenario.radius, 0.15);
  EXPECT_EQ(c.campaign.max_iter, 9u);
  EXPECT_EQ(c.classifier.direction, DirectionMode::Majority);
  EXPECT_EQ(c.classifier.pos_tol, 1e-4);
  EXPECT_EQ(c.resolved_campaign().rng_seed, 3u);
}

TEST(Config, WholeObjectsMergeKeyByKey) {
  const AppConfig c = load_config(json::object(), {R"(scenario={"steps": 10})"});
  EXPECT_EQ(c.scenario.steps, 10u);
  EXPECT_EQ(c.scenario.body_count, AppConfig{}.scenario.body_count);
}

TEST(Config, UnknownKeysNameTheirPath) {
  EXPECT_EQ(error_key([] { load_config(json::object(), {"campaign.max_iters=3"}); }), "campaign.max_iters");
  EXPECT_EQ(error_key([] { load_config(json{{"faults", {{"double_impulses", true}}}}); }), "faults.double_impulses");
  EXPECT_EQ(error_key([] { load_config(json{{"nope", 1}}); }), "nope");
  EXPECT_EQ(error_key([] { load_config(json::object(), {"rng_seed.x=1"}); }), "rng_seed.x");
}

TEST(Config, TypeMismatchesNameTheirPath) {
  EXPECT_EQ(error_key([] { load_config(json::object(), {"campaign.max_iter=-1"}); }), "campaign.max_iter");
  EXPECT_EQ(error_key([] { load_config(json::object(), {"campaign.max_iter=1.5"}); }), "campaign.max_iter");
  EXPECT_EQ(error_key([] { load_config(json::object(), {"campaign.eps_B=small"}); }), "campaign.eps_B");
  EXPECT_EQ(error_key([] { load_config(json::object(), {"faults.double_impulse=1"}); }), "faults.double_impulse");
  EXPECT_EQ(error_key([] { load_config(json{{"scenario", 3}}); }), "scenario");
  // Integers are accepted where a float is expected.
  EXPECT_EQ(load_config(json::object(), {"scenario.dt=1"}).scenario.dt, 1.0);
}

TEST(Config, MalformedOverrides) {
  EXPECT_THROW(load_config(json::object(), {"campaign.max_iter"}), ConfigError);
  EXPECT_THROW(load_config(json::object(), {"=3"}), ConfigError);
  EXPECT_THROW(load_config(json::object(), {"campaign..max_iter=3"}), ConfigError);
}

TEST(Config, RangeErrorsAreConfigErrors) {
  EXPECT_EQ(error_key([] { load_config(json::object(), {"campaign.eps_F=0"}); }), "campaign");
  EXPECT_EQ(error_key([] { load_config(json::object(), {"seedgen.pool_size=0"}); }), "seedgen");
  EXPECT_EQ(error_key([] { load_config(json::object(), {"classifier.direction=sideways"}); }), "classifier");
  EXPECT_EQ(error_key([] { load_config(json::object(), {"scenario.dt=-1"}); }), "scenario");
  EXPECT_EQ(error_key([] { load_config(json::object(), {"scenario.force_cap=0.5"}); }), "seedgen.force_cap");
  EXPECT_EQ(error_key([] { load_config(json{{"schema_version", 2}}); }), "schema_version");
}

TEST(Config, SeedgenScenarioIsPristineUnlessAsked) {
  AppConfig c = load_config(json::object(), {"faults.end_of_step_contact=true"});
  EXPECT_FALSE(c.seedgen_scenario().faults.any());
  EXPECT_EQ(c.seedgen_scenario().force_cap, c.seedgen.force_cap);
  c.seedgen.faulted = true;
  EXPECT_TRUE(c.seedgen_scenario().faults.end_of_step_contact);
}

TEST(Config, LoadsFiles) {
  const auto dir = std::filesystem::temp_directory_path() / "simfuzz_config_test";
  std::filesystem::create_directories(dir);
  const auto file = dir / "c.json";
  std::ofstream(file) << R"({"rng_seed": 11, "scenario": {"kind": "FreeFall", "body_count": 1}})";
  const AppConfig c = load_config(file, {"campaign.max_iter=5"});
  EXPECT_EQ(c.rng_seed, 11u);
  EXPECT_EQ(c.scenario.kind, ScenarioKind::FreeFall);
  EXPECT_EQ(c.campaign.max_iter, 5u);
  std::ofstream(file) << "{ not json";
  EXPECT_THROW(load_config(file), ConfigError);
  EXPECT_THROW(load_config(dir / "missing.json"), ConfigError);
  std::filesystem::remove_all(dir);
}

TEST(Config, ShippedConfigsLoad) {
  const std::filesystem::path dir = SIMFUZZ_SOURCE_DIR "/configs";
  std::size_t n = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".json") continue;
    SCOPED_TRACE(entry.path().string());
    EXPECT_NO_THROW(load_config(entry.path()));
    ++n;
  }
  EXPECT_GE(n, 4u);
}

}  // namespace
}  // namespace simfuzz
