#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "oplace/market.hpp"
#include "oplace/outflow.hpp"
#include "oplace/sa.hpp"

namespace oplace {

// Parsed and validated run configuration. The experiment block stays as JSON;
// each command validates its own keys at dispatch time.
struct RunConfig {
    std::uint64_t seed = 0;
    std::string out_dir = "runs";
    MarketSpec market;
    OutflowModel model;
    SAConfig solver;
    bool x0_explicit = false;
    nlohmann::json experiment = nlohmann::json::object();
    std::vector<std::string> defaults_applied;
};

// Strict parse: unknown keys are rejected with a nearest-key suggestion,
// market/model invariants are enforced before any run, every filled default
// is recorded in defaults_applied.
RunConfig parse_config(const std::string& path);
RunConfig parse_config_json(const nlohmann::json& doc, const std::string& origin);

struct DispatchOptions {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::string label;  // empty: UTC timestamp directory suffix
    int workers = 1;
};

// Runs one command and writes <out>/<command>-<label>/summary.json plus any
// per-experiment CSV tables. Returns the output directory. Throws
// ConfigError / PreconditionError / NumericalError; the CLI maps those to
// exit codes 2 / 3 / 4.
std::string dispatch(const std::string& command, RunConfig cfg, const DispatchOptions& opts);

const std::vector<std::string>& known_commands();

// Documented config schema (units inline), emitted by the `schema` command.
std::string config_schema_json();

// JSON representations used inside summary.json; round-trippable.
nlohmann::json to_json(const Allocation& x);
Allocation allocation_from_json(const nlohmann::json& j);

}  // namespace oplace
