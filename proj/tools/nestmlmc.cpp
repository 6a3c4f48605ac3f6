#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "nestmlmc/calibrate.hpp"
#include "nestmlmc/estimator.hpp"
#include "nestmlmc/model.hpp"
#include "nestmlmc/rates.hpp"
#include "nestmlmc/weights.hpp"

using nlohmann::json;
namespace fs = std::filesystem;
using namespace nestmlmc;

namespace {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    // A result file embeds its fully-resolved config; accept it directly.
    if (j.contains("config") && j.contains("value")) return j["config"];
    return j;
}

model::IndicatorDirection parse_direction(const std::string& s) {
    if (s == "le" || s == "leq" || s == "<=") return model::IndicatorDirection::Leq;
    if (s == "ge" || s == "geq" || s == ">=") return model::IndicatorDirection::Geq;
    throw ConfigError("payoff.direction must be 'le' or 'ge', got '" + s + "'");
}

model::Payoff parse_payoff(json& p) {
    std::string kind = p.value("kind", "square");
    p["kind"] = kind;
    if (kind == "square") return model::payoff_square();
    if (kind == "identity") return model::payoff_identity();
    if (kind == "relu") return model::payoff_relu();
    if (kind == "indicator") {
        if (!p.contains("threshold")) throw ConfigError("indicator payoff needs 'threshold'");
        std::string dir = p.value("direction", "le");
        p["direction"] = dir;
        return model::payoff_indicator(p["threshold"].get<double>(), parse_direction(dir));
    }
    throw ConfigError("unknown payoff kind '" + kind + "'");
}

model::NestedModel parse_model(json& cfg) {
    if (!cfg.contains("model")) throw ConfigError("config missing 'model'");
    json& mj = cfg["model"];
    std::string name = mj.value("name", "");
    if (name == "gaussian_linear") {
        double mu = mj.value("mu_Y", 0.0);
        double sy = mj.value("sigma_Y", 1.0);
        double s = mj.value("sigma", 1.0);
        mj["mu_Y"] = mu;
        mj["sigma_Y"] = sy;
        mj["sigma"] = s;
        if (!mj.contains("payoff")) mj["payoff"] = json::object();
        return model::builtin_gaussian_linear(mu, sy, s, parse_payoff(mj["payoff"]));
    }
    if (name == "bs_nested") {
        double s0 = mj.value("s0", 100.0);
        double r = mj.value("r", 0.03);
        double vol = mj.value("vol", 0.2);
        double t1 = mj.value("t1", 1.0 / 12.0);
        double T = mj.value("T", 0.5);
        double strike = mj.value("strike", 100.0);
        double q = mj.value("loss_threshold", 5.0);
        mj["s0"] = s0;
        mj["r"] = r;
        mj["vol"] = vol;
        mj["t1"] = t1;
        mj["T"] = T;
        mj["strike"] = strike;
        mj["loss_threshold"] = q;
        return model::builtin_bs_nested(s0, r, vol, t1, T, strike, q);
    }
    throw ConfigError("unknown model name '" + name + "'");
}

est::CouplingMode parse_coupling(const std::string& s) {
    if (s == "standard") return est::CouplingMode::Standard;
    if (s == "antithetic") return est::CouplingMode::Antithetic;
    throw ConfigError("coupling must be 'standard' or 'antithetic', got '" + s + "'");
}

calib::Family parse_family(const std::string& s) {
    if (s == "crude") return calib::Family::Crude;
    if (s == "mlmc") return calib::Family::MLMC;
    if (s == "ml2r") return calib::Family::ML2R;
    throw ConfigError("family must be crude | mlmc | ml2r, got '" + s + "'");
}

std::uint64_t require_seed(const json& cfg) {
    if (!cfg.contains("seed")) throw ConfigError("config missing mandatory 'seed'");
    return cfg["seed"].get<std::uint64_t>();
}

int resolve_workers(json& cfg, std::optional<int> cli_workers) {
    int w = 1;
    if (const char* env = std::getenv("NESTMLMC_WORKERS")) w = std::atoi(env);
    if (cfg.contains("workers")) w = cfg["workers"].get<int>();
    if (cli_workers) w = *cli_workers;
    if (w < 1) w = 1;
    cfg["workers"] = w;
    return w;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

json result_to_json(const est::EstimateResult& r, const json& resolved_cfg) {
    json out;
    out["value"] = r.value;
    out["std_error"] = r.std_error;
    out["total_cost"] = r.total_cost;
    out["total_nominal_cost"] = r.total_nominal_cost;
    out["seed_key"] = r.seed;
    out["geometry"] = {{"K0", r.geometry.K0}, {"M", r.geometry.M}, {"R", r.geometry.R}};
    out["allocation"] = {{"N", r.allocation.N}, {"q", r.allocation.q}};
    if (r.weight_vector) {
        out["weights"] = {{"w", r.weight_vector->w},
                          {"W", r.weight_vector->W},
                          {"w_tilde", r.weight_vector->w_tilde},
                          {"alpha", r.weight_vector->spec.alpha}};
    }
    json levels = json::array();
    for (const auto& ls : r.levels) {
        levels.push_back({{"level", ls.level},
                          {"h", 1.0 / static_cast<double>(r.geometry.K(ls.level))},
                          {"n", ls.n},
                          {"mean", ls.mean},
                          {"var", ls.var},
                          {"cost", ls.cost},
                          {"nominal_cost", ls.nominal_cost},
                          {"weight", ls.weight}});
    }
    out["levels"] = levels;
    out["config"] = resolved_cfg;
    return out;
}

std::string levels_csv(const est::EstimateResult& r) {
    std::string csv = "level,h_j,N_j,mean,var,cost,weight\n";
    for (const auto& ls : r.levels) {
        csv += std::to_string(ls.level) + "," +
               fmt(1.0 / static_cast<double>(r.geometry.K(ls.level))) + "," +
               std::to_string(ls.n) + "," + fmt(ls.mean) + "," + fmt(ls.var) + "," +
               fmt(ls.cost) + "," + fmt(ls.weight) + "\n";
    }
    return csv;
}

std::string rate_points_csv(const rates::RateReport& rep) {
    std::string csv = "h,value,stderr,fit_lo,fit_hi\n";
    for (const auto& pt : rep.per_h)
        csv += fmt(pt.h) + "," + fmt(pt.value) + "," + fmt(pt.stderr_) + "," + fmt(pt.fit_lo) +
               "," + fmt(pt.fit_hi) + "\n";
    return csv;
}

json plan_to_json(const calib::CalibrationPlan& p) {
    json out;
    out["family"] = p.family == calib::Family::Crude  ? "crude"
                    : p.family == calib::Family::MLMC ? "mlmc"
                                                      : "ml2r";
    out["geometry"] = {{"K0", p.geometry.K0}, {"M", p.geometry.M}, {"R", p.geometry.R}};
    out["allocation"] = {{"N", p.allocation.N}, {"q", p.allocation.q}};
    if (p.weights)
        out["weights"] = {{"w", p.weights->w}, {"W", p.weights->W}, {"w_tilde", p.weights->w_tilde}};
    out["predicted_cost"] = p.predicted_cost;
    out["predicted_bias"] = p.predicted_bias;
    out["predicted_stat_error"] = p.predicted_stat_error;
    return out;
}

calib::CalibrationInput calibration_input(const model::NestedModel& m, json& ej, double epsilon) {
    calib::CalibrationInput in;
    in.epsilon = epsilon;
    in.M = ej.value("M", 2);
    in.K0 = ej.value("K0", 4L);
    in.pilot_n = ej.value("pilot_n", 4000L);
    in.mode = parse_coupling(ej.value("coupling", "standard"));
    ej["M"] = in.M;
    ej["K0"] = in.K0;
    ej["pilot_n"] = in.pilot_n;

    if (ej.contains("alpha") && ej.contains("c1")) {
        in.alpha = ej["alpha"].get<double>();
        in.c1 = ej["c1"].get<double>();
    } else if (m.oracles.mean_payoff_at) {
        std::vector<double> grid;
        for (int k = 2; k <= 9; ++k) grid.push_back(std::pow(2.0, -k));
        auto rep = rates::fit_weak_rate(m, grid, 0, StreamKey::from_seed(0));
        if (rep.inconclusive) throw ConfigError("calibration: analytic weak-rate fit inconclusive");
        in.alpha = rep.alpha_hat;
        in.c1 = rep.c1_hat;
        ej["alpha"] = in.alpha;
        ej["c1"] = in.c1;
    } else {
        throw ConfigError("calibration needs estimator.alpha and estimator.c1 (no mean oracle)");
    }
    in.beta = ej.value("beta", 1.0);
    in.V1 = ej.value("V1", 1.0);
    if (ej.contains("c_inf")) in.c_inf_override = ej["c_inf"].get<double>();
    return in;
}

// ---- subcommands -------------------------------------------------------

int run_estimate(json cfg, const fs::path& out_dir) {
    model::NestedModel m = parse_model(cfg);
    std::uint64_t seed = require_seed(cfg);
    int workers = cfg["workers"].get<int>();
    if (!cfg.contains("estimator")) throw ConfigError("config missing 'estimator'");
    json& ej = cfg["estimator"];
    std::string family = ej.value("family", "crude");
    ej["family"] = family;
    est::CouplingMode mode = parse_coupling(ej.value("coupling", "standard"));
    ej["coupling"] = ej.value("coupling", "standard");

    const bool has_eps = ej.contains("epsilon");
    const bool has_geom = ej.contains("N");
    if (has_eps == has_geom)
        throw ConfigError("estimator needs exactly one of (geometry + N) or epsilon");

    StreamKey root = StreamKey::from_seed(seed);
    est::EstimateResult result;
    if (has_eps) {
        calib::CalibrationInput in = calibration_input(m, ej, ej["epsilon"].get<double>());
        in.family = parse_family(family);
        auto plan = calib::calibrate(m, in, root.child(0xca11b), workers);
        result = calib::execute(m, plan, mode, root, workers);
        write_text(out_dir / "plan.json", plan_to_json(plan).dump(2) + "\n");
    } else {
        long N = ej["N"].get<long>();
        if (family == "crude") {
            long K0 = ej.value("K0", 4L);
            ej["K0"] = K0;
            result = est::estimate_crude(m, 1.0 / static_cast<double>(K0), N, root, workers);
        } else {
            est::LevelGeometry g{ej.value("K0", 4L), ej.value("M", 2), ej.value("R", 3)};
            ej["K0"] = g.K0;
            ej["M"] = g.M;
            ej["R"] = g.R;
            std::vector<double> q;
            if (ej.contains("q")) {
                q = ej["q"].get<std::vector<double>>();
            } else {
                // Default geometric decay q_j ~ M^{-j}, normalized.
                double norm = 0.0;
                for (int j = 0; j < g.R; ++j) norm += std::pow(g.M, -j);
                for (int j = 0; j < g.R; ++j) q.push_back(std::pow(g.M, -j) / norm);
                ej["q"] = q;
            }
            est::Allocation alloc{N, q};
            if (family == "mlmc") {
                result = est::estimate_mlmc(m, g, alloc, mode, root, workers);
            } else if (family == "ml2r") {
                double alpha = ej.value("alpha", 1.0);
                ej["alpha"] = alpha;
                auto wv = weights::solve_weights({alpha, g.M, g.R});
                result = est::estimate_ml2r(m, g, alloc, wv, mode, root, workers);
            } else {
                throw ConfigError("unknown estimator family '" + family + "'");
            }
        }
    }
    write_text(out_dir / "result.json", result_to_json(result, cfg).dump(2) + "\n");
    write_text(out_dir / "levels.csv", levels_csv(result));
    return 0;
}

int run_rates(json cfg, const fs::path& out_dir) {
    model::NestedModel m = parse_model(cfg);
    std::uint64_t seed = require_seed(cfg);
    int workers = cfg["workers"].get<int>();
    if (!cfg.contains("rates")) throw ConfigError("config missing 'rates'");
    json& rj = cfg["rates"];
    StreamKey root = StreamKey::from_seed(seed);

    json summary;
    if (rj.contains("weak")) {
        json& wj = rj["weak"];
        auto grid = wj.value("h_grid", std::vector<double>{});
        if (grid.empty()) throw ConfigError("rates.weak.h_grid must be non-empty");
        rates::WeakRateOptions opt;
        opt.prefer_analytic = wj.value("analytic", true);
        opt.workers = workers;
        if (wj.contains("reference")) opt.reference = wj["reference"].get<double>();
        auto rep = rates::fit_weak_rate(m, grid, wj.value("N_per_h", 100000L), root.child(1), opt);
        summary["weak"] = {{"alpha_hat", rep.alpha_hat},
                           {"c1_hat", rep.c1_hat},
                           {"r_squared", rep.r_squared},
                           {"inconclusive", rep.inconclusive}};
        write_text(out_dir / "weak_rates.csv", rate_points_csv(rep));
    }
    if (rj.contains("strong")) {
        json& sj = rj["strong"];
        est::LevelGeometry g{sj.value("K0", 4L), sj.value("M", 2), sj.value("R", 6)};
        auto levels = sj.value("levels", std::vector<int>{});
        if (levels.empty())
            for (int j = 2; j <= g.R; ++j) levels.push_back(j);
        auto rep = rates::fit_strong_rate(m, g, parse_coupling(sj.value("coupling", "standard")),
                                          levels, sj.value("N", 100000L), root.child(2), workers);
        summary["strong"] = {{"beta_hat", rep.beta_hat},
                             {"V1_hat", rep.V1_hat},
                             {"r_squared", rep.r_squared},
                             {"inconclusive", rep.inconclusive}};
        write_text(out_dir / "strong_rates.csv", rate_points_csv(rep));
    }
    if (summary.empty()) throw ConfigError("rates config needs a 'weak' and/or 'strong' block");

    std::string csv = "fit,alpha_hat,c1_hat,beta_hat,V1_hat,r_squared,inconclusive\n";
    if (summary.contains("weak"))
        csv += "weak," + fmt(summary["weak"]["alpha_hat"].get<double>()) + "," +
               fmt(summary["weak"]["c1_hat"].get<double>()) + ",,," +
               fmt(summary["weak"]["r_squared"].get<double>()) + "," +
               (summary["weak"]["inconclusive"].get<bool>() ? "1" : "0") + "\n";
    if (summary.contains("strong"))
        csv += "strong,,," + fmt(summary["strong"]["beta_hat"].get<double>()) + "," +
               fmt(summary["strong"]["V1_hat"].get<double>()) + "," +
               fmt(summary["strong"]["r_squared"].get<double>()) + "," +
               (summary["strong"]["inconclusive"].get<bool>() ? "1" : "0") + "\n";
    write_text(out_dir / "rate_report.csv", csv);
    summary["config"] = cfg;
    write_text(out_dir / "rate_report.json", summary.dump(2) + "\n");
    return 0;
}

int run_calibrate(json cfg, const fs::path& out_dir) {
    model::NestedModel m = parse_model(cfg);
    std::uint64_t seed = require_seed(cfg);
    int workers = cfg["workers"].get<int>();
    if (!cfg.contains("estimator") || !cfg["estimator"].contains("epsilon"))
        throw ConfigError("calibrate needs estimator.epsilon");
    json& ej = cfg["estimator"];
    calib::CalibrationInput in = calibration_input(m, ej, ej["epsilon"].get<double>());
    in.family = parse_family(ej.value("family", "mlmc"));
    auto plan = calib::calibrate(m, in, StreamKey::from_seed(seed).child(0xca11b), workers);
    json pj = plan_to_json(plan);
    pj["config"] = cfg;
    write_text(out_dir / "plan.json", pj.dump(2) + "\n");
    return 0;
}

int run_sweep(json cfg, const fs::path& out_dir) {
    model::NestedModel m = parse_model(cfg);
    std::uint64_t seed = require_seed(cfg);
    int workers = cfg["workers"].get<int>();
    if (!cfg.contains("sweep")) throw ConfigError("config missing 'sweep'");
    json& sj = cfg["sweep"];
    auto epsilons = sj.value("epsilons", std::vector<double>{});
    if (epsilons.empty()) throw ConfigError("sweep.epsilons must be non-empty");
    for (size_t i = 1; i < epsilons.size(); ++i)
        if (!(epsilons[i] < epsilons[i - 1]))
            throw ConfigError("sweep.epsilons must be strictly decreasing");
    auto families = sj.value("families", std::vector<std::string>{"crude", "mlmc", "ml2r"});
    long reps = sj.value("replications", 10L);
    if (reps < 10) throw ConfigError("sweep.replications must be >= 10");
    sj["families"] = families;
    sj["replications"] = reps;
    if (!m.oracles.target) throw ConfigError("sweep needs a model with a target oracle");
    const double target = *m.oracles.target;

    json ej = cfg.value("estimator", json::object());
    est::CouplingMode mode = parse_coupling(ej.value("coupling", "standard"));
    StreamKey root = StreamKey::from_seed(seed);

    std::string csv = "family,epsilon,rmse,cost,cost_ratio_vs_crude,status\n";
    for (size_t ei = 0; ei < epsilons.size(); ++ei) {
        double eps = epsilons[ei];
        // Crude realized (or predicted) cost anchors the ratio column.
        double crude_cost = 0.0;
        struct Row {
            std::string family;
            double rmse = 0.0, cost = 0.0;
            bool ok = false;
            std::string error;
        };
        std::vector<Row> rows;
        for (const auto& fam : families) {
            Row row;
            row.family = fam;
            try {
                calib::CalibrationInput in = calibration_input(m, ej, eps);
                in.family = parse_family(fam);
                in.mode = mode;
                auto plan = calib::calibrate(
                    m, in, root.child(900 + ei).child(std::hash<std::string>{}(fam)), workers);
                double se = 0.0, cost_sum = 0.0;
                for (long rep = 0; rep < reps; ++rep) {
                    StreamKey rk = root.child(1000 + ei)
                                       .child(std::hash<std::string>{}(fam))
                                       .child(static_cast<std::uint64_t>(rep));
                    auto res = calib::execute(m, plan, mode, rk, workers);
                    se += (res.value - target) * (res.value - target);
                    cost_sum += res.total_cost;
                }
                row.rmse = std::sqrt(se / static_cast<double>(reps));
                row.cost = cost_sum / static_cast<double>(reps);
                row.ok = true;
                if (fam == "crude") crude_cost = row.cost;
            } catch (const std::exception& e) {
                row.error = e.what();
                std::cerr << "sweep: " << fam << " at eps=" << eps << " failed: " << e.what()
                          << "\n";
            }
            rows.push_back(std::move(row));
        }
        if (crude_cost == 0.0) {
            // Crude not executed: anchor on its calibrated predicted cost.
            try {
                calib::CalibrationInput in = calibration_input(m, ej, eps);
                in.family = calib::Family::Crude;
                auto plan = calib::calibrate(m, in, root.child(990 + ei), workers);
                crude_cost = plan.predicted_cost;
            } catch (const std::exception&) {
            }
        }
        for (const auto& row : rows) {
            if (row.ok) {
                double ratio = crude_cost > 0.0 ? row.cost / crude_cost : 0.0;
                csv += row.family + "," + fmt(eps) + "," + fmt(row.rmse) + "," + fmt(row.cost) +
                       "," + fmt(ratio) + ",ok\n";
            } else {
                csv += row.family + "," + fmt(eps) + ",,,,failed\n";
            }
        }
    }
    write_text(out_dir / "sweep.csv", csv);
    json meta;
    meta["config"] = cfg;
    write_text(out_dir / "sweep_config.json", meta.dump(2) + "\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"nested Monte Carlo multilevel estimation toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_dir = ".";
    std::optional<std::uint64_t> cli_seed;
    std::optional<int> cli_workers;

    for (const char* name : {"estimate", "rates", "calibrate", "sweep"}) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "path to the JSON config")->required();
        sub->add_option("--seed", cli_seed, "override config seed");
        sub->add_option("--workers", cli_workers, "override worker count");
        sub->add_option("--out", out_dir, "output directory");
    }

    CLI11_PARSE(app, argc, argv);
    std::string sub = app.get_subcommands().front()->get_name();

    try {
        json cfg = load_config(config_path);
        if (cli_seed) cfg["seed"] = *cli_seed;
        resolve_workers(cfg, cli_workers);
        require_seed(cfg);
        fs::create_directories(out_dir);
        if (sub == "estimate") return run_estimate(std::move(cfg), out_dir);
        if (sub == "rates") return run_rates(std::move(cfg), out_dir);
        if (sub == "calibrate") return run_calibrate(std::move(cfg), out_dir);
        if (sub == "sweep") return run_sweep(std::move(cfg), out_dir);
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const model::EvaluationError& e) {
        std::cerr << "evaluation error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
