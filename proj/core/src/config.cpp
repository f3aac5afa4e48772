#include "simfuzz/config.hpp"

#include <fstream>

#include "json_util.hpp"
#include "text_util.hpp"

namespace simfuzz {

using nlohmann::json;

void SeedgenConfig::validate() const {
  if (pool_size < 1) throw std::invalid_argument("seedgen.pool_size must be at least 1");
  if (!(force_cap >= 0.0)) throw std::invalid_argument("seedgen.force_cap must be non-negative");
}

void to_json(json& j, const SeedgenConfig& c) {
  j = {{"pool_size", c.pool_size}, {"segment_len", c.segment_len}, {"chain_segments", c.chain_segments},
       {"force_cap", c.force_cap}, {"rng_seed", c.rng_seed},       {"faulted", c.faulted},
       {"pool_file", c.pool_file}};
}

void from_json(const json& j, SeedgenConfig& c) {
  detail::reject_unknown_keys(
      j, {"pool_size", "segment_len", "chain_segments", "force_cap", "rng_seed", "faulted", "pool_file"}, "seedgen");
  detail::get_if_present(j, "pool_size", c.pool_size);
  detail::get_if_present(j, "segment_len", c.segment_len);
  detail::get_if_present(j, "chain_segments", c.chain_segments);
  detail::get_if_present(j, "force_cap", c.force_cap);
  detail::get_if_present(j, "rng_seed", c.rng_seed);
  detail::get_if_present(j, "faulted", c.faulted);
  detail::get_if_present(j, "pool_file", c.pool_file);
}

Scenario AppConfig::seedgen_scenario() const {
  Scenario s = scenario;
  if (!seedgen.faulted) s.faults = {};
  s.force_cap = seedgen.force_cap;
  return s;
}

CampaignConfig AppConfig::resolved_campaign() const {
  CampaignConfig c = campaign;
  c.rng_seed = rng_seed;
  return c;
}

void AppConfig::validate() const {
  auto check = [](const char* name, auto&& section) {
    try {
      section.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(name, e.what());
    }
  };
  check("scenario", scenario);
  check("seedgen", seedgen);
  if (seedgen.force_cap > scenario.force_cap)
    throw ConfigError("seedgen.force_cap", "exceeds the scenario's declared force cap");
  if (campaign.force_cap > scenario.force_cap)
    throw ConfigError("campaign.force_cap", "exceeds the scenario's declared force cap");
  check("campaign", campaign);
  check("classifier", classifier);
  check("gradcheck", gradcheck);
}

json to_json(const AppConfig& c) {
  json scenario = c.scenario;
  scenario.erase("faults");
  return {{"schema_version", kConfigSchemaVersion},
          {"rng_seed", c.rng_seed},
          {"scenario", scenario},
          {"faults", c.scenario.faults},
          {"seedgen", c.seedgen},
          {"campaign", c.campaign},
          {"classifier", c.classifier},
          {"gradcheck", c.gradcheck},
          {"queue_diagnostics", c.queue_diagnostics}};
}

namespace {

const json& default_tree() {
  static const json tree = to_json(AppConfig{});
  return tree;
}

bool compatible(const json& def, const json& v) {
  if (def.is_null()) return v.is_null() || v.is_number();
  if (def.is_number_unsigned()) return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
  if (def.is_number_integer()) return v.is_number_integer();
  if (def.is_number()) return v.is_number();
  return def.type() == v.type();
}

std::string type_name(const json& def) {
  if (def.is_null()) return "a number or null";
  if (def.is_number_integer()) return "a non-negative integer";
  if (def.is_number()) return "a number";
  return std::string("a ") + def.type_name();
}

/// Writes `v` at `path` of `tree` after checking it against the default schema.
void assign(json& tree, const std::vector<std::string>& path, const json& v) {
  const json* def = &default_tree();
  json* node = &tree;
  std::string key;
  for (const auto& part : path) {
    key += key.empty() ? part : "." + part;
    if (!def->is_object() || !def->contains(part)) throw ConfigError(key, "unknown key");
    def = &(*def)[part];
    node = &(*node)[part];
  }
  if (!compatible(*def, v)) throw ConfigError(key, "expected " + type_name(*def));
  if (def->is_object()) {
    for (const auto& [k, sub] : v.items()) {
      auto sub_path = path;
      sub_path.push_back(k);
      assign(tree, sub_path, sub);
    }
    return;
  }
  *node = v;
}

std::vector<std::string> split_key(const std::string& key) {
  std::vector<std::string> out;
  for (auto part : detail::split(key, '.')) {
    if (part.empty()) throw ConfigError(key, "malformed key");
    out.emplace_back(part);
  }
  return out;
}

// Type and range errors from the section parsers name the section but not
// always the key; keep their message and attach the closest known path.
template <typename F>
auto section(const char* name, F&& parse) {
  try {
    return parse();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(name, e.what());
  }
}

}  // namespace

AppConfig app_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("", "config must be a JSON object");
  json tree = default_tree();
  assign(tree, {}, j);
  if (tree.at("schema_version") != kConfigSchemaVersion)
    throw ConfigError("schema_version", "unsupported schema version " + tree.at("schema_version").dump());

  AppConfig c;
  c.rng_seed = tree.at("rng_seed").get<std::uint64_t>();
  c.scenario = section("scenario", [&] { return tree.at("scenario").get<Scenario>(); });
  c.scenario.faults = section("faults", [&] { return tree.at("faults").get<FaultSpec>(); });
  c.seedgen = section("seedgen", [&] { return tree.at("seedgen").get<SeedgenConfig>(); });
  c.campaign = section("campaign", [&] { return tree.at("campaign").get<CampaignConfig>(); });
  c.classifier = section("classifier", [&] { return tree.at("classifier").get<ClassifierConfig>(); });
  c.gradcheck = section("gradcheck", [&] { return tree.at("gradcheck").get<GradcheckConfig>(); });
  c.queue_diagnostics = tree.at("queue_diagnostics").get<bool>();
  section("config", [&] {
    c.validate();
    return 0;
  });
  return c;
}

void apply_override(json& tree, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError(assignment, "override must look like key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  assign(tree, split_key(key), value);
}

AppConfig load_config(const json& base, const std::vector<std::string>& overrides) {
  if (!base.is_object()) throw ConfigError("", "config must be a JSON object");
  json tree = default_tree();
  assign(tree, {}, base);
  for (const auto& o : overrides) apply_override(tree, o);
  return app_config_from_json(tree);
}

AppConfig load_config(const std::filesystem::path& file, const std::vector<std::string>& overrides) {
  json base = json::object();
  if (!file.empty()) {
    std::ifstream in(file);
    if (!in) throw ConfigError("", "cannot open config file " + file.string());
    try {
      base = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError("", file.string() + ": " + e.what());
    }
  }
  return load_config(base, overrides);
}

}  // namespace simfuzz
