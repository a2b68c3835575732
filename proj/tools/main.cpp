#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "oplace/config.hpp"
#include "oplace/errors.hpp"

namespace {

int fail(int code, const std::string& type, const std::string& message) {
    const nlohmann::json err = {
        {"error", {{"code", code}, {"type", type}, {"message", message}}}};
    std::cout << err.dump(2) << std::endl;
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"order placement optimizer: market/limit order splitting across venues"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::string label;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int workers = 1;

    app.add_option("--config", config_path, "path to a JSON run configuration");
    app.add_option("--seed", seed, "root seed override")->each([&](const std::string&) {
        seed_set = true;
    });
    app.add_option("--out", out_dir, "output directory override");
    app.add_option("--label", label, "run directory label (default: UTC timestamp)");
    app.add_option("--workers", workers, "worker threads for Monte-Carlo batches")
        ->check(CLI::PositiveNumber);

    for (const auto& name : oplace::known_commands()) {
        app.add_subcommand(name)->fallthrough();
    }
    CLI::App* schema_cmd = app.add_subcommand("schema", "print the documented config schema");
    schema_cmd->fallthrough();

    CLI11_PARSE(app, argc, argv);

    const std::string command = app.get_subcommands().front()->get_name();
    if (command == "schema") {
        std::cout << oplace::config_schema_json() << std::endl;
        return 0;
    }

    try {
        if (config_path.empty()) {
            throw oplace::ConfigError("--config is required for '" + command + "'");
        }
        oplace::RunConfig cfg = oplace::parse_config(config_path);
        oplace::DispatchOptions opts;
        if (seed_set) opts.seed = seed;
        if (!out_dir.empty()) opts.out_dir = out_dir;
        opts.label = label;
        opts.workers = workers;
        const std::string run_dir = oplace::dispatch(command, std::move(cfg), opts);
        std::cout << nlohmann::json{{"ok", true}, {"run_dir", run_dir}}.dump(2) << std::endl;
        return 0;
    } catch (const oplace::ConfigError& e) {
        return fail(2, "config", e.what());
    } catch (const oplace::PreconditionError& e) {
        return fail(3, "precondition", e.what());
    } catch (const std::invalid_argument& e) {
        return fail(3, "precondition", e.what());
    } catch (const oplace::NumericalError& e) {
        return fail(4, "numerical", e.what());
    } catch (const std::exception& e) {
        return fail(4, "numerical", e.what());
    }
}
