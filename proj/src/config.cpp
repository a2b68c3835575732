#include "oplace/config.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "oplace/analytic.hpp"
#include "oplace/errors.hpp"
#include "oplace/experiments.hpp"
#include "oplace/rng.hpp"
#include "oplace/verify.hpp"

namespace oplace {

namespace {

using nlohmann::json;

std::size_t levenshtein(const std::string& a, const std::string& b) {
    std::vector<std::size_t> prev(b.size() + 1);
    std::vector<std::size_t> cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

void reject_unknown_keys(const json& obj, const std::string& path,
                         const std::vector<std::string>& allowed) {
    if (!obj.is_object()) throw ConfigError(path + ": expected an object");
    for (const auto& [key, _] : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) != allowed.end()) continue;
        std::string best;
        std::size_t best_d = 1000;
        for (const auto& cand : allowed) {
            const std::size_t d = levenshtein(key, cand);
            if (d < best_d) {
                best_d = d;
                best = cand;
            }
        }
        std::ostringstream os;
        os << path << ": unknown key '" << key << "'";
        if (best_d <= 3) os << " (did you mean '" << best << "'?)";
        throw ConfigError(os.str());
    }
}

double need_number(const json& obj, const std::string& path, const std::string& key) {
    if (!obj.contains(key)) throw ConfigError(path + ": missing required key '" + key + "'");
    if (!obj[key].is_number()) throw ConfigError(path + "." + key + ": expected a number");
    return obj[key].get<double>();
}

double opt_number(const json& obj, const std::string& path, const std::string& key,
                  double fallback, std::vector<std::string>* defaults) {
    if (!obj.contains(key)) {
        if (defaults) {
            std::ostringstream os;
            os << path << "." << key << " defaulted to " << fallback;
            defaults->push_back(os.str());
        }
        return fallback;
    }
    if (!obj[key].is_number()) throw ConfigError(path + "." + key + ": expected a number");
    return obj[key].get<double>();
}

std::vector<double> need_number_array(const json& obj, const std::string& path,
                                      const std::string& key) {
    if (!obj.contains(key)) throw ConfigError(path + ": missing required key '" + key + "'");
    if (!obj[key].is_array()) throw ConfigError(path + "." + key + ": expected an array");
    std::vector<double> out;
    for (const auto& v : obj[key]) {
        if (!v.is_number()) throw ConfigError(path + "." + key + ": expected numeric entries");
        out.push_back(v.get<double>());
    }
    return out;
}

std::string need_string(const json& obj, const std::string& path, const std::string& key) {
    if (!obj.contains(key)) throw ConfigError(path + ": missing required key '" + key + "'");
    if (!obj[key].is_string()) throw ConfigError(path + "." + key + ": expected a string");
    return obj[key].get<std::string>();
}

MarketSpec parse_market(const json& block, std::vector<std::string>* defaults) {
    reject_unknown_keys(block, "market",
                        {"half_spread_h", "fee_f", "rebates_r", "lambda_u", "lambda_o",
                         "target_S", "queues_Q"});
    MarketSpec spec;
    spec.half_spread_h = need_number(block, "market", "half_spread_h");
    spec.fee_f = need_number(block, "market", "fee_f");
    spec.rebates_r = need_number_array(block, "market", "rebates_r");
    spec.lambda_u = need_number(block, "market", "lambda_u");
    spec.lambda_o = need_number(block, "market", "lambda_o");
    spec.target_S = need_number(block, "market", "target_S");
    spec.queues_Q = need_number_array(block, "market", "queues_Q");
    (void)defaults;

    const auto violations = validate_assumptions(spec);
    if (!violations.empty()) {
        std::ostringstream os;
        os << "market: invalid specification:";
        for (const auto& v : violations) os << " [" << v.assumption << "] " << v.detail << ";";
        throw ConfigError(os.str());
    }
    return spec;
}

OutflowModel parse_model(const json& block, const MarketSpec& market,
                         std::vector<std::string>* defaults) {
    reject_unknown_keys(block, "model",
                        {"kind", "means", "horizon_T", "pareto_tail", "alpha", "factor_mu0",
                         "path"});
    const std::string kind = need_string(block, "model", "kind");
    try {
        if (kind == "empirical") {
            const std::string path = need_string(block, "model", "path");
            return load_empirical(path, market.venues());
        }
        std::vector<double> means = need_number_array(block, "model", "means");
        const double horizon = opt_number(block, "model", "horizon_T", 1.0, defaults);
        if (kind == "exponential") return OutflowModel::make_exponential(means, horizon);
        if (kind == "poisson") return OutflowModel::make_poisson(means, horizon);
        if (kind == "pareto") {
            return OutflowModel::make_pareto(means, need_number(block, "model", "pareto_tail"),
                                             horizon);
        }
        if (kind == "factor") {
            OutflowModel m = OutflowModel::make_factor(
                means, need_number(block, "model", "alpha"), horizon);
            m.factor_mu0 = opt_number(block, "model", "factor_mu0", 0.0, nullptr);
            m.validate();
            return m;
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("model: ") + e.what());
    }
    throw ConfigError("model.kind: expected one of exponential|pareto|poisson|factor|empirical, "
                      "found '" + kind + "'");
}

Allocation parse_x0(const json& value, const MarketSpec& market, const std::string& path) {
    const std::size_t k = market.venues();
    const BenchmarkSet bench = benchmark_allocations(market);
    if (value.is_string()) {
        const std::string name = value.get<std::string>();
        if (name == "equal_split") return bench.X_E;
        if (name == "market_only") return bench.X_M;
        if (name == "limit_only") return bench.X_L;
        if (name == "center") {
            Allocation x{market.target_S / 2.0,
                         std::vector<double>(k, market.target_S / (2.0 * static_cast<double>(k)))};
            return x;
        }
        throw ConfigError(path + ": unknown allocation name '" + name +
                          "' (use equal_split|market_only|limit_only|center or an array)");
    }
    if (value.is_array()) {
        if (value.size() != k + 1) {
            std::ostringstream os;
            os << path << ": allocation array must have K+1 = " << k + 1 << " entries";
            throw ConfigError(os.str());
        }
        Allocation x;
        x.market_M = value[0].get<double>();
        for (std::size_t i = 1; i < value.size(); ++i) x.limits_L.push_back(value[i].get<double>());
        return x;
    }
    throw ConfigError(path + ": expected an allocation name or numeric array");
}

SAConfig parse_solver(const json& block, const MarketSpec& market,
                      std::vector<std::string>* defaults, bool* x0_explicit) {
    reject_unknown_keys(block, "solver",
                        {"iterations_N", "x0", "step_gamma", "burn_in_fraction", "projection",
                         "eval_count"});
    SAConfig cfg;
    cfg.iterations_N = static_cast<long>(opt_number(block, "solver", "iterations_N", 1000,
                                                    defaults));
    if (block.contains("x0")) {
        cfg.initial_X0 = parse_x0(block["x0"], market, "solver.x0");
        *x0_explicit = true;
    } else {
        cfg.initial_X0 = benchmark_allocations(market).X_E;
        defaults->push_back("solver.x0 defaulted to equal_split");
        *x0_explicit = false;
    }
    if (block.contains("step_gamma")) {
        if (!block["step_gamma"].is_number()) {
            throw ConfigError("solver.step_gamma: expected a number");
        }
        cfg.step_gamma = block["step_gamma"].get<double>();
    }
    cfg.burn_in_fraction = opt_number(block, "solver", "burn_in_fraction", 0.0, defaults);
    if (block.contains("projection")) {
        const std::string p = need_string(block, "solver", "projection");
        if (p == "box") {
            cfg.projection = SAConfig::Projection::box;
        } else if (p == "none") {
            cfg.projection = SAConfig::Projection::none;
        } else {
            throw ConfigError("solver.projection: expected 'box' or 'none'");
        }
    } else {
        defaults->push_back("solver.projection defaulted to box");
    }
    cfg.eval_count = static_cast<long>(opt_number(block, "solver", "eval_count", 2000, defaults));
    return cfg;
}

json market_to_json(const MarketSpec& spec) {
    return json{{"half_spread_h", spec.half_spread_h}, {"fee_f", spec.fee_f},
                {"rebates_r", spec.rebates_r},         {"lambda_u", spec.lambda_u},
                {"lambda_o", spec.lambda_o},           {"target_S", spec.target_S},
                {"queues_Q", spec.queues_Q}};
}

json model_to_json(const OutflowModel& model) {
    json j{{"kind", to_string(model.kind)}};
    if (model.kind == OutflowKind::empirical) {
        j["rows"] = model.rows.size();
        j["feature_names"] = model.feature_names;
    } else {
        j["means"] = model.means;
        j["horizon_T"] = model.horizon_T;
        if (model.kind == OutflowKind::pareto) j["pareto_tail"] = model.pareto_tail;
        if (model.kind == OutflowKind::factor) {
            j["alpha"] = model.factor_alpha;
            if (model.factor_mu0 > 0.0) j["factor_mu0"] = model.factor_mu0;
        }
    }
    return j;
}

json solver_to_json(const SAConfig& cfg) {
    json j{{"iterations_N", cfg.iterations_N},
           {"x0", to_json(cfg.initial_X0)},
           {"burn_in_fraction", cfg.burn_in_fraction},
           {"projection", cfg.projection == SAConfig::Projection::box ? "box" : "none"},
           {"eval_count", cfg.eval_count}};
    if (cfg.step_gamma.has_value()) j["step_gamma"] = *cfg.step_gamma;
    return j;
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y%m%dT%H%M%SZ", &tm);
    return buf;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << content;
}

Allocation allocation_from_experiment(const json& block, const RunConfig& cfg,
                                      const std::string& path) {
    if (block.contains("allocation")) return parse_x0(block["allocation"], cfg.market, path);
    if (block.contains("allocation_from")) {
        const std::string from = block["allocation_from"].get<std::string>();
        std::ifstream in(from);
        if (!in) throw ConfigError(path + ": cannot open '" + from + "'");
        json doc;
        try {
            doc = json::parse(in);
        } catch (const json::parse_error& e) {
            throw ConfigError(path + ": " + from + ": " + e.what());
        }
        if (!doc.contains("result") || !doc["result"].contains("allocation")) {
            throw ConfigError(path + ": '" + from + "' has no result.allocation");
        }
        return allocation_from_json(doc["result"]["allocation"]);
    }
    throw ConfigError(path + ": provide 'allocation' or 'allocation_from'");
}

}  // namespace

nlohmann::json to_json(const Allocation& x) {
    return json{{"market_M", x.market_M}, {"limits_L", x.limits_L}};
}

Allocation allocation_from_json(const nlohmann::json& j) {
    Allocation x;
    x.market_M = j.at("market_M").get<double>();
    x.limits_L = j.at("limits_L").get<std::vector<double>>();
    return x;
}

RunConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    json doc;
    try {
        doc = json::parse(in, nullptr, true, /*ignore_comments=*/false);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return parse_config_json(doc, path);
}

RunConfig parse_config_json(const nlohmann::json& doc, const std::string& origin) {
    reject_unknown_keys(doc, origin, {"seed", "out", "market", "model", "solver", "experiment"});
    if (!doc.contains("market")) throw ConfigError(origin + ": missing 'market' block");
    if (!doc.contains("model")) throw ConfigError(origin + ": missing 'model' block");

    RunConfig cfg;
    if (doc.contains("seed")) {
        if (!doc["seed"].is_number_unsigned()) {
            throw ConfigError(origin + ".seed: expected an unsigned integer");
        }
        cfg.seed = doc["seed"].get<std::uint64_t>();
    } else {
        cfg.defaults_applied.push_back("seed defaulted to 0");
    }
    if (doc.contains("out")) {
        cfg.out_dir = doc["out"].get<std::string>();
    } else {
        cfg.defaults_applied.push_back("out defaulted to 'runs'");
    }
    cfg.market = parse_market(doc["market"], &cfg.defaults_applied);
    cfg.model = parse_model(doc["model"], cfg.market, &cfg.defaults_applied);
    if (cfg.model.venues() != cfg.market.venues()) {
        std::ostringstream os;
        os << "model: venue count " << cfg.model.venues() << " does not match market K = "
           << cfg.market.venues();
        throw ConfigError(os.str());
    }
    cfg.solver = parse_solver(doc.contains("solver") ? doc["solver"] : json::object(), cfg.market,
                              &cfg.defaults_applied, &cfg.x0_explicit);
    cfg.solver.seed = cfg.seed;
    if (doc.contains("experiment")) {
        if (!doc["experiment"].is_object()) {
            throw ConfigError(origin + ".experiment: expected an object");
        }
        cfg.experiment = doc["experiment"];
    }
    return cfg;
}

const std::vector<std::string>& known_commands() {
    static const std::vector<std::string> commands = {
        "solve-analytic", "solve-sa",      "verify-kkt",      "solve-dual",  "evaluate",
        "sweep",          "convergence",   "fragmentation",   "benchmark-table",
        "bucket-solve"};
    return commands;
}

std::string dispatch(const std::string& command, RunConfig cfg, const DispatchOptions& opts) {
    if (std::find(known_commands().begin(), known_commands().end(), command) ==
        known_commands().end()) {
        throw ConfigError("unknown command '" + command + "'");
    }
    if (opts.seed.has_value()) {
        cfg.seed = *opts.seed;
        cfg.solver.seed = *opts.seed;
    }
    if (opts.out_dir.has_value()) cfg.out_dir = *opts.out_dir;
    cfg.solver.workers = opts.workers;

    const std::string label = opts.label.empty() ? utc_timestamp() : opts.label;
    const std::filesystem::path run_dir =
        std::filesystem::path(cfg.out_dir) / (command + "-" + label);
    std::filesystem::create_directories(run_dir);

    json result;
    std::vector<std::pair<std::string, std::string>> csv_files;
    const json& exp = cfg.experiment;

    if (command == "solve-analytic") {
        reject_unknown_keys(exp, "experiment", {"kind"});
        if (cfg.market.venues() == 1) {
            const SingleExchangeSolution sol = solve_single(cfg.market, cfg.model);
            result = {{"allocation", to_json(Allocation{sol.M_star, {sol.L_star}})},
                      {"M_star", sol.M_star},
                      {"L_star", sol.L_star},
                      {"regime", to_string(sol.regime)},
                      {"lambda_lower", sol.lambda_lower},
                      {"lambda_upper", sol.lambda_upper}};
        } else if (cfg.market.venues() == 2) {
            const TwoExchangeSolution sol = solve_two(cfg.market, cfg.model);
            result = {{"allocation",
                       to_json(Allocation{sol.M_star, {sol.L1_star, sol.L2_star}})},
                      {"M_star", sol.M_star},
                      {"L1_star", sol.L1_star},
                      {"L2_star", sol.L2_star},
                      {"root_residual", sol.root_residual},
                      {"integral_abs_error", sol.integral_abs_error},
                      {"condition_warnings", sol.condition_warnings},
                      {"multiple_roots", sol.multiple_roots}};
        } else {
            throw PreconditionError("solve-analytic: no analytic solver for K > 2; use solve-sa");
        }
    } else if (command == "solve-sa") {
        reject_unknown_keys(exp, "experiment", {"kind"});
        const SAReport rep = solve_sa(cfg.market, cfg.model, cfg.solver);
        result = {{"allocation", to_json(rep.X_hat)},
                  {"objective_estimate", rep.objective_estimate},
                  {"objective_se", rep.objective_se},
                  {"objective_per_share", rep.objective_estimate / cfg.market.target_S},
                  {"bound_DG_over_sqrtN", rep.bound_DG_over_sqrtN},
                  {"step_gamma", cfg.solver.step_gamma.value_or(
                                     default_step(cfg.market, cfg.solver.iterations_N))}};
        std::ostringstream trace;
        trace << "iteration,M";
        for (std::size_t k = 1; k <= cfg.market.venues(); ++k) trace << ",L" << k;
        trace << "\n";
        for (const auto& [n, x] : rep.iterate_trace) {
            trace << n << "," << x.market_M;
            for (double l : x.limits_L) trace << "," << l;
            trace << "\n";
        }
        csv_files.emplace_back("trace.csv", trace.str());
    } else if (command == "verify-kkt") {
        reject_unknown_keys(exp, "experiment",
                            {"kind", "allocation", "allocation_from", "count"});
        const Allocation x = allocation_from_experiment(exp, cfg, "experiment");
        const long count =
            static_cast<long>(opt_number(exp, "experiment", "count", 100000,
                                         &cfg.defaults_applied));
        const KKTReport rep = estimate_kkt(x, cfg.market, cfg.model, count, cfg.seed,
                                           opts.workers);
        result = {{"allocation", to_json(x)},
                  {"sample_count", rep.sample_count},
                  {"p0_hat", rep.p0_hat},
                  {"pj_hat", rep.pj_hat},
                  {"shortfall_prob_hat", rep.shortfall_prob_hat},
                  {"target_shortfall", rep.target_shortfall},
                  {"shortfall_residual", rep.shortfall_residual},
                  {"shortfall_se", rep.shortfall_se},
                  {"conditional_shortfall_hat", rep.conditional_shortfall_hat},
                  {"target_conditional", rep.target_conditional},
                  {"conditional_residual", rep.conditional_residual},
                  {"conditional_se", rep.conditional_se},
                  {"conditional_conditioning", rep.conditional_conditioning},
                  {"condition8_holds", rep.condition8_holds},
                  {"condition9_holds", rep.condition9_holds},
                  {"notes", rep.notes},
                  {"warnings", rep.warnings}};
    } else if (command == "solve-dual") {
        reject_unknown_keys(exp, "experiment", {"kind", "mu_u", "mu_o"});
        const double mu_u = need_number(exp, "experiment", "mu_u");
        const double mu_o = need_number(exp, "experiment", "mu_o");
        const DualReport rep = solve_constrained(cfg.market, mu_u, mu_o, cfg.model, cfg.solver);
        result = {{"lambda_u_star", rep.lambda_u_star},
                  {"lambda_o_star", rep.lambda_o_star},
                  {"allocation", to_json(rep.X_star)},
                  {"achieved_shortfall_u", rep.achieved_shortfall_u},
                  {"achieved_overflow_o", rep.achieved_overflow_o},
                  {"dual_value", rep.dual_value},
                  {"boundary_hit", rep.boundary_hit},
                  {"notes", rep.notes}};
    } else if (command == "evaluate") {
        reject_unknown_keys(exp, "experiment", {"kind", "allocation", "allocation_from", "count"});
        const Allocation x = allocation_from_experiment(exp, cfg, "experiment");
        const long count = static_cast<long>(
            opt_number(exp, "experiment", "count", 10000, &cfg.defaults_applied));
        const EvaluationResult ev = evaluate(x, cfg.market, cfg.model, count,
                                             streams::derive(cfg.seed, {streams::kHoldout}),
                                             "allocation", opts.workers);
        result = {{"allocation", to_json(x)},
                  {"avg_cost_per_share", ev.avg_cost_per_share},
                  {"ci95_halfwidth", ev.ci95_halfwidth},
                  {"avg_filled", ev.avg_filled},
                  {"count", ev.count}};
    } else if (command == "sweep") {
        reject_unknown_keys(exp, "experiment", {"kind", "parameter", "grid"});
        const std::string parameter = need_string(exp, "experiment", "parameter");
        const std::vector<double> grid = need_number_array(exp, "experiment", "grid");
        const auto rows = run_sensitivity_sweep(cfg.market, cfg.model, parameter, grid,
                                                cfg.solver);
        csv_files.emplace_back("sweep.csv", to_csv(rows, cfg.market.venues(), parameter));
        result = {{"parameter", parameter}, {"rows", rows.size()}, {"table", "sweep.csv"}};
    } else if (command == "convergence") {
        reject_unknown_keys(exp, "experiment",
                            {"kind", "iteration_grid", "starts", "holdout_count"});
        ConvergenceStudyConfig study;
        study.base = cfg.solver;
        study.seed = cfg.seed;
        if (exp.contains("iteration_grid")) {
            for (double v : need_number_array(exp, "experiment", "iteration_grid")) {
                study.iteration_grid.push_back(static_cast<long>(v));
            }
        } else {
            study.iteration_grid = {50, 100, 200, 500, 1000, 2000, 5000};
            cfg.defaults_applied.push_back(
                "experiment.iteration_grid defaulted to [50,100,200,500,1000,2000,5000]");
        }
        if (exp.contains("starts")) {
            for (const auto& [name, value] : exp["starts"].items()) {
                study.starts.emplace_back(name,
                                          parse_x0(value, cfg.market, "experiment.starts"));
            }
        } else {
            const BenchmarkSet bench = benchmark_allocations(cfg.market);
            study.starts = {{"equal_split", bench.X_E},
                            {"market_only", bench.X_M},
                            {"limit_only", bench.X_L},
                            {"center", parse_x0(json("center"), cfg.market, "starts")}};
            cfg.defaults_applied.push_back(
                "experiment.starts defaulted to equal_split|market_only|limit_only|center");
        }
        study.holdout_count = static_cast<long>(
            opt_number(exp, "experiment", "holdout_count", 10000, &cfg.defaults_applied));
        const auto rows = run_convergence_study(cfg.market, cfg.model, study);
        csv_files.emplace_back("convergence.csv", to_csv(rows));
        result = {{"rows", rows.size()}, {"table", "convergence.csv"}};
    } else if (command == "fragmentation") {
        reject_unknown_keys(exp, "experiment", {"kind", "alphas", "mu", "eval_count"});
        std::vector<double> alphas;
        if (exp.contains("alphas")) {
            alphas = need_number_array(exp, "experiment", "alphas");
        } else {
            alphas = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
            cfg.defaults_applied.push_back("experiment.alphas defaulted to [0,0.2,...,1.0]");
        }
        const double mu =
            opt_number(exp, "experiment", "mu", cfg.model.means.empty() ? 2200.0
                                                                        : cfg.model.means[0],
                       &cfg.defaults_applied);
        const long eval_count = static_cast<long>(
            opt_number(exp, "experiment", "eval_count", 10000, &cfg.defaults_applied));
        const auto rows = run_fragmentation_study(cfg.market, alphas, mu, cfg.solver, eval_count);
        csv_files.emplace_back("fragmentation.csv", to_csv(rows));
        result = {{"rows", rows.size()}, {"table", "fragmentation.csv"}};
    } else if (command == "benchmark-table") {
        reject_unknown_keys(exp, "experiment",
                            {"kind", "venue_counts", "targets", "mu", "alpha", "iterations_N",
                             "eval_count"});
        if (cfg.market.venues() != 1) {
            throw ConfigError("benchmark-table: market block must describe a one-venue template");
        }
        BenchmarkTableParams params;
        params.seed = cfg.seed;
        if (exp.contains("venue_counts")) {
            for (double v : need_number_array(exp, "experiment", "venue_counts")) {
                params.venue_counts.push_back(static_cast<std::size_t>(v));
            }
        } else {
            params.venue_counts = {1, 2, 3};
            cfg.defaults_applied.push_back("experiment.venue_counts defaulted to [1,2,3]");
        }
        if (exp.contains("targets")) {
            params.targets = need_number_array(exp, "experiment", "targets");
        } else {
            params.targets = {cfg.market.target_S};
            cfg.defaults_applied.push_back("experiment.targets defaulted to [market.target_S]");
        }
        params.mu = opt_number(exp, "experiment", "mu",
                               cfg.model.means.empty() ? 2200.0 : cfg.model.means[0],
                               &cfg.defaults_applied);
        params.alpha = opt_number(exp, "experiment", "alpha",
                                  cfg.model.kind == OutflowKind::factor ? cfg.model.factor_alpha
                                                                        : 0.6,
                                  &cfg.defaults_applied);
        params.iterations_N = static_cast<long>(
            opt_number(exp, "experiment", "iterations_N", 1000, &cfg.defaults_applied));
        params.eval_count = static_cast<long>(
            opt_number(exp, "experiment", "eval_count", 1000, &cfg.defaults_applied));
        const auto rows = run_benchmark_table(cfg.market, params);
        const std::size_t max_k =
            *std::max_element(params.venue_counts.begin(), params.venue_counts.end());
        csv_files.emplace_back("benchmark_table.csv", to_csv(rows, max_k));
        result = {{"rows", rows.size()}, {"table", "benchmark_table.csv"}};
    } else if (command == "bucket-solve") {
        reject_unknown_keys(exp, "experiment", {"kind"});
        const BucketSolveResult res = bucket_and_solve(cfg.model, cfg.market, cfg.solver);
        csv_files.emplace_back("buckets.csv", to_csv(res));
        json boundaries = json::array();
        for (const auto& [b1, b2] : res.tercile_boundaries) boundaries.push_back({b1, b2});
        result = {{"feature_names", res.feature_names},
                  {"tercile_boundaries", boundaries},
                  {"buckets", res.entries.size()},
                  {"table", "buckets.csv"}};
    }

    json summary = {{"command", command},
                    {"seed", cfg.seed},
                    {"workers", opts.workers},
                    {"defaults_applied", cfg.defaults_applied},
                    {"config",
                     {{"market", market_to_json(cfg.market)},
                      {"model", model_to_json(cfg.model)},
                      {"solver", solver_to_json(cfg.solver)},
                      {"experiment", cfg.experiment}}},
                    {"result", result}};
    write_file(run_dir / "summary.json", summary.dump(2) + "\n");
    for (const auto& [name, content] : csv_files) write_file(run_dir / name, content);
    return run_dir.string();
}

std::string config_schema_json() {
    static const char* schema = R"json({
  "seed": "unsigned integer; root seed for every derived random stream (default 0)",
  "out": "string; output directory for run folders (default 'runs')",
  "market": {
    "half_spread_h": "number, mills/share; half of the bid-ask spread",
    "fee_f": "number, mills/share; taking fee on the cheapest venue (may be negative)",
    "rebates_r": "array of K numbers, mills/share; per-venue adding rebates (may be negative)",
    "lambda_u": "number >= 0, mills/share; penalty per share of shortfall below target_S",
    "lambda_o": "number >= 0, mills/share; penalty per share of overflow above target_S",
    "target_S": "number > 0, shares; quantity to buy over the horizon",
    "queues_Q": "array of K numbers >= 0, shares; displayed depth ahead of our limit orders"
  },
  "model": {
    "kind": "string; exponential | pareto | poisson | factor | empirical",
    "means": "array of K numbers > 0, shares per unit horizon (not for empirical)",
    "horizon_T": "number > 0; horizon length, scales all means (default 1)",
    "pareto_tail": "number > 1; pareto tail index (pareto only); scale is mean*(a-1)/a",
    "alpha": "number in [0,1]; common-factor weight (factor only)",
    "factor_mu0": "number > 0; optional common-factor mean override (factor only)",
    "path": "string; CSV of empirical samples, header xi_1..xi_K[,features...] (empirical only)"
  },
  "solver": {
    "iterations_N": "integer >= 1; iteration count (default 1000)",
    "x0": "equal_split | market_only | limit_only | center | array of K+1 shares (default equal_split)",
    "step_gamma": "number; constant step override, shares per mill (default: scaled formula)",
    "burn_in_fraction": "number in [0,1); iterates dropped from the average (default 0)",
    "projection": "box | none; box clamps iterates into [0,S]^(K+1) (default box)",
    "eval_count": "integer >= 2; batch size for the objective estimate (default 2000)"
  },
  "experiment": {
    "verify-kkt": {"allocation": "name or array", "allocation_from": "path to summary.json", "count": "samples (default 100000)"},
    "evaluate": {"allocation": "...", "allocation_from": "...", "count": "samples (default 10000)"},
    "solve-dual": {"mu_u": "shares; expected-shortfall tolerance", "mu_o": "shares; expected-overflow tolerance"},
    "sweep": {"parameter": "lambda_u|lambda_o|h|f|S|alpha|r_<k>|Q_<k>|mu_<k>", "grid": "array of values"},
    "convergence": {"iteration_grid": "array of N values", "starts": "object label->allocation", "holdout_count": "samples"},
    "fragmentation": {"alphas": "array in [0,1]", "mu": "shares/horizon", "eval_count": "samples"},
    "benchmark-table": {"venue_counts": "array of K", "targets": "array of S", "mu": "shares/horizon", "alpha": "factor weight", "iterations_N": "per solve", "eval_count": "per evaluation"},
    "bucket-solve": {}
  }
})json";
    return schema;
}

}  // namespace oplace
