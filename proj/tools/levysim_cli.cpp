// Command-line front end over the header library.  Five subcommands share
// one declarative config file, and every flag overrides the matching field:
//
//   simulate      run one ensemble; write moment CSV(s) and a JSON sidecar
//   table <1..6>  reproduce a cubic/Cauchy benchmark table at a chosen scale
//   converge      coupled strong-error study against a fine reference grid
//   rates         closed-form rate arithmetic, no simulation
//   check-model   sampling spot-check of a model's declared hypotheses
//
// CSV payloads are deterministic (identical configs give identical bytes,
// whatever the worker count); timestamps and wall-clock figures live only in
// the JSON sidecar.  Exit codes: 0 success, 2 usage or configuration error,
// 3 budget abort.

#include <levysim/config.hpp>
#include <levysim/version.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace {

using nlohmann::json;
using namespace levysim;

// exceeded step budget; main() maps this to exit code 3
struct BudgetAbort : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string iso_utc_now() {
    const std::time_t t =
        std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

double secs_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string join_argv(int argc, char** argv) {
    std::string s;
    for (int i = 0; i < argc; ++i) {
        if (i) s += ' ';
        const std::string a = argv[i];
        if (a.empty() || a.find_first_of(" \t'\"") != std::string::npos) {
            s += '\'';
            s += a;
            s += '\'';
        } else {
            s += a;
        }
    }
    return s;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    out << text;
    out.flush();
    if (!out) throw std::runtime_error("failed while writing '" + path.string() + "'");
}

std::filesystem::path out_path(const ExperimentConfig& cfg, const std::string& default_prefix,
                               const char* suffix) {
    const std::filesystem::path dir(cfg.out_dir);
    std::filesystem::create_directories(dir);
    return dir / ((cfg.prefix.empty() ? default_prefix : cfg.prefix) + suffix);
}

// Common sidecar shell: provenance and the resolved config the run can be
// repeated from.  All timing lives here, never in the CSV payload.
json sidecar_shell(const std::string& command, const std::string& cmdline) {
    json j;
    j["command"] = command;
    j["command_line"] = cmdline;
    j["version"] = version_string;
    j["generated_at"] = iso_utc_now();
    return j;
}

void write_sidecar(json j, const std::filesystem::path& path, double wall_seconds,
                   const ExperimentConfig& echo) {
    j["wall_time_seconds"] = wall_seconds;
    j["resolved_config"] = serialize_config(echo);
    write_text(path, j.dump(2) + "\n");
}

std::string exp_label(double p) { return "p" + format_double(p); }

// ---------------------------------------------------------------- simulate

int cmd_simulate(ExperimentConfig cfg, const std::string& cmdline) {
    cfg.resolve();
    SdeModel model = cfg.make_model();
    EnsembleConfig ec = cfg.to_ensemble(model);

    const double cost = static_cast<double>(ec.n) * static_cast<double>(ec.N_paths);
    if (cfg.max_steps > 0 && cost > cfg.max_steps)
        throw BudgetAbort("simulate: estimated " + format_double(cost) +
                          " steps x paths exceeds the budget " + format_double(cfg.max_steps) +
                          "; raise --budget or [budget] max_steps");

    const auto t0 = std::chrono::steady_clock::now();
    const MomentReport rep = run_ensemble(ec);
    const double wall = secs_since(t0);

    const Grid grid(cfg.T, cfg.n);
    const std::string scheme = scheme_name(ec.scheme);

    std::ostringstream os;
    csv_row(os, {"h", "scheme", "exponent", "value", "std_error", "nan_count", "N"});
    for (const auto& s : rep.terminal)
        csv_row(os, {format_double(grid.h), scheme, format_double(s.exponent),
                     format_double(s.value), format_double(s.std_error),
                     format_int(rep.nan_count), format_int(rep.N_paths)});
    const auto csv_path = out_path(cfg, "simulate", ".csv");
    write_text(csv_path, os.str());

    std::filesystem::path win_path;
    if (!rep.window_max.empty()) {
        std::ostringstream ws;
        csv_row(ws, {"h", "scheme", "exponent", "window_max", "std_error", "argmax_time",
                     "nan_count", "N"});
        for (const auto& s : rep.window_max)
            csv_row(ws, {format_double(grid.h), scheme, format_double(s.exponent),
                         format_double(s.value), format_double(s.std_error),
                         format_double(grid.time(s.argmax_index)), format_int(rep.nan_count),
                         format_int(rep.N_paths)});
        win_path = out_path(cfg, "simulate", "_window.csv");
        write_text(win_path, ws.str());
    }

    // echo the fully resolved state: model defaults filled in, workers pinned
    cfg.model_params = model.params;
    cfg.workers = ec.workers;

    json j = sidecar_shell("simulate", cmdline);
    j["outputs"]["csv"] = csv_path.string();
    if (!win_path.empty()) j["outputs"]["window_csv"] = win_path.string();
    json& s = j["summary"];
    s["scheme"] = scheme;
    s["h"] = grid.h;
    s["n"] = cfg.n;
    s["T"] = cfg.T;
    s["N_paths"] = rep.N_paths;
    s["nan_count"] = rep.nan_count;
    s["nan_fraction"] = rep.nan_fraction;
    s["flow_divergence_count"] = rep.flow_divergence_count;
    s["N_effective_terminal"] = rep.N_effective_terminal;
    if (rep.window_k_lo >= 0) {
        s["window_k_lo"] = rep.window_k_lo;
        s["window_k_hi"] = rep.window_k_hi;
    }
    write_sidecar(std::move(j), out_path(cfg, "simulate", ".json"), wall, cfg);

    std::cout << "simulate: " << scheme << "  h=" << format_double(grid.h)
              << "  N=" << rep.N_paths << "  nan=" << rep.nan_count << "\n";
    for (const auto& st : rep.terminal)
        std::cout << "  E|X_T|^" << format_double(st.exponent) << " = "
                  << format_double(st.value) << "  (se " << format_double(st.std_error)
                  << ")\n";
    for (const auto& st : rep.window_max)
        std::cout << "  max_window E|X|^" << format_double(st.exponent) << " = "
                  << format_double(st.value) << "  (se " << format_double(st.std_error)
                  << ", t* " << format_double(grid.time(st.argmax_index)) << ")\n";
    std::cout << "wrote " << csv_path.string() << "\n";
    return 0;
}

// ------------------------------------------------------------------- table

// The six benchmark tables of the scalar cubic drift with unit Cauchy noise.
// 1  explicit Euler NaN census + tamed Euler terminal moments   T=5
// 2  splitting terminal moments, stationary row appended        T=5
// 3  truncated stationary moments at K = 1/sqrt(2h), quadrature only
// 4  reverse splitting terminal moments                         T=5
// 5  reverse splitting window-max moments over t in [5,6]       T=6
// 6  splitting window-max moments over t in [5,6]               T=6
int cmd_table(ExperimentConfig cfg, int id, const std::string& cmdline) {
    cfg.resolve();
    if (cfg.model_name != "cauchy_cubic")
        throw ConfigError("table: the benchmark tables are defined for the cauchy_cubic model");
    SdeModel model = cfg.make_model();

    const std::vector<double> exps{0.5, 1.0, 1.5, 2.0, 2.5};
    const long N = std::max<long>(1, std::llround(1e7 * cfg.scale));
    const bool window = id == 5 || id == 6;
    const double T = window ? 6.0 : 5.0;

    const auto t0 = std::chrono::steady_clock::now();
    std::ostringstream os;
    json skipped = json::array();
    json rows_run = json::array();

    if (id == 3) {
        std::vector<std::string> hdr{"h", "K"};
        for (double p : exps) hdr.push_back(exp_label(p));
        csv_row(os, hdr);
        for (double h : cfg.h_list) {
            const double K = 1.0 / std::sqrt(2.0 * h);
            std::vector<std::string> cells{format_double(h), format_double(K)};
            for (double p : exps) cells.push_back(format_double(stationary_moment(p, K)));
            csv_row(os, cells);
            rows_run.push_back(h);
        }
        std::vector<std::string> cells{"0", "inf"};
        for (double p : exps) cells.push_back(format_double(stationary_moment(p)));
        csv_row(os, cells);
    } else {
        const SchemeKind scheme = id == 1   ? SchemeKind::TamedEuler
                                  : id == 4 || id == 5 ? SchemeKind::ReverseSplitA
                                                       : SchemeKind::Splitting;
        std::vector<std::string> hdr{"h"};
        if (id == 1) {
            hdr.push_back("euler_nan_count");
            hdr.push_back("euler_nan_fraction");
        }
        for (double p : exps) {
            hdr.push_back(exp_label(p));
            hdr.push_back(exp_label(p) + "_se");
        }
        if (id != 1) hdr.push_back("nan_count");
        hdr.push_back("N");
        csv_row(os, hdr);

        const auto run_row = [&](double h, SchemeKind sk) {
            EnsembleConfig ec;
            ec.model = model;
            ec.scheme = sk;
            ec.T = T;
            ec.n = std::llround(T / h);
            if (ec.n < 1) throw ConfigError("table.h_list: h exceeds the horizon T");
            ec.N_paths = N;
            ec.x0 = cfg.x0;
            ec.master_seed = cfg.master_seed;
            ec.exponents = exps;
            if (window) ec.window = std::make_pair(5.0, 6.0);
            ec.workers = cfg.resolved_workers();
            return run_ensemble(ec);
        };

        for (double h : cfg.h_list) {
            const long n = std::llround(T / h);
            const double cost =
                static_cast<double>(n) * static_cast<double>(N) * (id == 1 ? 2.0 : 1.0);
            if (cfg.max_steps > 0 && cost > cfg.max_steps) {
                std::cerr << "warning: table " << id << ": skipping h=" << format_double(h)
                          << " row; estimated " << format_double(cost)
                          << " steps x paths exceeds the budget "
                          << format_double(cfg.max_steps) << "\n";
                skipped.push_back({{"h", h}, {"estimated_steps_x_paths", cost}});
                continue;
            }
            const auto row0 = std::chrono::steady_clock::now();
            std::vector<std::string> cells{format_double(h)};
            long nan_count = 0;
            if (id == 1) {
                const MomentReport census = run_row(h, SchemeKind::ExplicitEuler);
                const MomentReport rep = run_row(h, SchemeKind::TamedEuler);
                cells.push_back(format_int(census.nan_count));
                cells.push_back(format_double(census.nan_fraction));
                for (const auto& st : rep.terminal) {
                    cells.push_back(format_double(st.value));
                    cells.push_back(format_double(st.std_error));
                }
                nan_count = census.nan_count;
            } else {
                const MomentReport rep = run_row(h, scheme);
                for (std::size_t i = 0; i < exps.size(); ++i) {
                    const double v = window ? rep.window_max[i].value : rep.terminal[i].value;
                    const double se =
                        window ? rep.window_max[i].std_error : rep.terminal[i].std_error;
                    cells.push_back(format_double(v));
                    cells.push_back(format_double(se));
                }
                cells.push_back(format_int(rep.nan_count));
                nan_count = rep.nan_count;
            }
            cells.push_back(format_int(N));
            csv_row(os, cells);
            rows_run.push_back(h);
            std::cerr << "table " << id << ": h=" << format_double(h) << " done ("
                      << format_double(secs_since(row0)) << "s, nan " << nan_count << ")\n";
        }

        if (id == 2) { // closed-form stationary limit
            std::vector<std::string> cells{"0"};
            for (double p : exps) {
                cells.push_back(format_double(stationary_moment(p)));
                cells.push_back("0");
            }
            cells.push_back("0");
            cells.push_back("0");
            csv_row(os, cells);
        }

        if (rows_run.empty())
            throw BudgetAbort("table " + std::to_string(id) +
                              ": every row exceeds the budget; lower the scale, trim h_list, "
                              "or raise --budget");
    }

    const std::string default_prefix = "table" + std::to_string(id);
    const auto csv_path = out_path(cfg, default_prefix, ".csv");
    write_text(csv_path, os.str());

    cfg.model_params = model.params;
    cfg.workers = cfg.resolved_workers();

    json j = sidecar_shell("table", cmdline);
    j["outputs"]["csv"] = csv_path.string();
    json& s = j["summary"];
    s["table"] = id;
    s["scale"] = cfg.scale;
    s["N_paths"] = id == 3 ? 0 : N;
    s["T"] = id == 3 ? json() : json(T);
    if (window) s["window"] = {5.0, 6.0};
    s["rows"] = rows_run;
    s["skipped"] = skipped;
    write_sidecar(std::move(j), out_path(cfg, default_prefix, ".json"), secs_since(t0), cfg);

    std::cout << "table " << id << ": wrote " << csv_path.string() << " ("
              << rows_run.size() << (id == 3 ? " rows + limit row" : " rows") << ", "
              << skipped.size() << " skipped)\n";
    return 0;
}

// ----------------------------------------------------------------- converge

int cmd_converge(ExperimentConfig cfg, const std::string& cmdline) {
    cfg.resolve();
    SdeModel model = cfg.make_model();
    StrongErrorConfig scfg = cfg.to_strong_error(model);

    const auto t0 = std::chrono::steady_clock::now();
    const ErrorCurve curve = strong_error_study(scfg);
    const double wall = secs_since(t0);

    // Predictions are gated by q < p; the study itself only needs q > 0, so a
    // missing prediction is reported as such rather than failing the run.
    double predicted = std::numeric_limits<double>::quiet_NaN();
    try {
        predicted = predicted_slope(model, scfg.mode, scfg.q, cfg.rate_p);
    } catch (const std::invalid_argument&) {
    }

    std::ostringstream os;
    csv_row(os, {"n", "h", "error", "std_error"});
    for (const auto& pt : curve.points)
        csv_row(os, {format_int(pt.n), format_double(pt.h), format_double(pt.error_q),
                     format_double(pt.std_error)});
    const auto csv_path = out_path(cfg, "converge", ".csv");
    write_text(csv_path, os.str());

    std::ostringstream ss;
    csv_row(ss, {"mode", "q", "measured_slope", "predicted_slope", "fit_intercept",
                 "ref_divergences"});
    csv_row(ss, {error_mode_name(curve.mode), format_double(curve.q),
                 format_double(curve.fitted_slope), format_double(predicted),
                 format_double(curve.fit_intercept), format_int(curve.ref_divergences)});
    const auto slope_path = out_path(cfg, "converge", "_slope.csv");
    write_text(slope_path, ss.str());

    cfg.model_params = model.params;
    cfg.workers = scfg.workers;

    json j = sidecar_shell("converge", cmdline);
    j["outputs"]["csv"] = csv_path.string();
    j["outputs"]["slope_csv"] = slope_path.string();
    json& s = j["summary"];
    s["mode"] = error_mode_name(curve.mode);
    s["q"] = curve.q;
    s["p"] = cfg.rate_p;
    s["scheme"] = scheme_name(scfg.scheme);
    s["n_ref"] = scfg.n_ref;
    s["N_paths"] = scfg.N_paths;
    s["T"] = scfg.T;
    s["measured_slope"] = curve.fitted_slope;
    s["predicted_slope"] = predicted;
    s["fit_intercept"] = curve.fit_intercept;
    s["ref_divergences"] = curve.ref_divergences;
    for (const auto& pt : curve.points)
        s["points"].push_back(
            {{"n", pt.n}, {"h", pt.h}, {"error", pt.error_q}, {"std_error", pt.std_error}});
    write_sidecar(std::move(j), out_path(cfg, "converge", ".json"), wall, cfg);

    std::cout << "converge: " << error_mode_name(curve.mode) << "  q=" << format_double(curve.q)
              << "  scheme=" << scheme_name(scfg.scheme) << "  n_ref=" << scfg.n_ref << "\n";
    for (const auto& pt : curve.points)
        std::cout << "  n=" << pt.n << "  h=" << format_double(pt.h)
                  << "  error=" << format_double(pt.error_q) << "  (se "
                  << format_double(pt.std_error) << ")\n";
    std::cout << "measured slope " << format_double(curve.fitted_slope) << "  (predicted "
              << format_double(predicted) << ")\n";
    std::cout << "wrote " << csv_path.string() << "\n";
    return 0;
}

// -------------------------------------------------------------------- rates

struct RatesOpts {
    double p = 0, q = 0, kappa = 0, chi = 0, p_X = 0, C_diss = 0, b_sup = 0;
    std::string json_path;
};

int cmd_rates(const ExperimentConfig& cfg, const RatesOpts& o) {
    const double p = cfg.rates_p, q = cfg.rates_q, kappa = cfg.rates_kappa;
    const double chi = cfg.rates_chi, p_X = cfg.rates_p_X;
    const double C_diss = cfg.rates_C_diss, b_sup = cfg.rates_b_sup;

    const double bar = rate_bar_delta(p, q, chi);
    const double del = rate_delta_sup(p, q, chi);
    double gam = std::numeric_limits<double>::quiet_NaN();
    if (p_X >= p && p_X < p + kappa - 1) gam = rate_gamma_sup(p, kappa, chi, p_X);
    const double lam = lambda_threshold(C_diss, b_sup);
    const double gauss = q / 2;

    std::cout << "inputs: p=" << format_double(p) << " q=" << format_double(q)
              << " kappa=" << format_double(kappa) << " chi=" << format_double(chi)
              << " p_X=" << format_double(p_X) << " C_diss=" << format_double(C_diss)
              << " b_sup=" << format_double(b_sup) << "\n";
    std::cout << "bar_delta        " << format_double(bar) << "\n";
    std::cout << "delta_sup        " << format_double(del) << "\n";
    if (std::isnan(gam))
        std::cout << "gamma_sup        nan  (defined for p <= p_X < p + kappa - 1)\n";
    else
        std::cout << "gamma_sup        " << format_double(gam) << "\n";
    std::cout << "lambda_threshold " << format_double(lam) << "\n";
    std::cout << "gaussian_rate    " << format_double(gauss) << "\n";

    if (!o.json_path.empty()) {
        json j;
        j["command"] = "rates";
        j["version"] = version_string;
        j["inputs"] = {{"p", p},           {"q", q},         {"kappa", kappa}, {"chi", chi},
                       {"p_X", p_X},       {"C_diss", C_diss}, {"b_sup", b_sup}};
        j["rates"] = {{"bar_delta", bar},
                      {"delta_sup", del},
                      {"gamma_sup", gam},
                      {"lambda_threshold", lam},
                      {"gaussian_rate", gauss}}; // non-finite values serialize as null
        write_text(o.json_path, j.dump(2) + "\n");
        std::cout << "wrote " << o.json_path << "\n";
    }
    return 0;
}

// -------------------------------------------------------------- check-model

int cmd_check_model(const ExperimentConfig& cfg, long samples, double radius,
                    const std::string& json_path) {
    if (samples < 1) throw ConfigError("check-model: --samples must be >= 1");
    if (!(radius > 0)) throw ConfigError("check-model: --radius must be positive");
    const SdeModel model = cfg.make_model();
    const HypothesisReport rep = check_hypotheses(
        model, samples, radius, StreamKey{cfg.master_seed, 0, 0, Channel::Auxiliary});

    std::cout << "model " << model.name << "  dim " << model.dim << "  kappa "
              << format_double(model.kappa) << "  chi " << format_double(model.chi) << "  C1 "
              << format_double(model.C1) << "  C2 " << format_double(model.C2) << "\n";
    const auto line = [](const char* name, const HypothesisCheck& c) {
        std::string label(name);
        label.resize(22, ' ');
        std::cout << "  " << label << " margin " << format_double(c.margin)
                  << (c.pass ? "  pass" : "  FAIL") << "\n";
    };
    line("dissipativity", rep.dissipativity);
    line("one_sided_lipschitz", rep.one_sided_lipschitz);
    line("a_bound", rep.a_bound);
    line("b_bound", rep.b_bound);
    line("c_bound", rep.c_bound);
    std::cout << (rep.all_pass ? "all declared hypotheses hold"
                               : "some declared hypotheses FAILED")
              << " (" << rep.n_samples << " samples, radius " << format_double(rep.radius)
              << ")\n";

    if (!json_path.empty()) {
        const auto check = [](const HypothesisCheck& c) {
            return json{{"margin", c.margin}, {"pass", c.pass}};
        };
        json j;
        j["command"] = "check-model";
        j["version"] = version_string;
        j["model"] = model.name;
        j["dim"] = model.dim;
        j["n_samples"] = rep.n_samples;
        j["radius"] = rep.radius;
        j["all_pass"] = rep.all_pass;
        j["checks"] = {{"dissipativity", check(rep.dissipativity)},
                       {"one_sided_lipschitz", check(rep.one_sided_lipschitz)},
                       {"a_bound", check(rep.a_bound)},
                       {"b_bound", check(rep.b_bound)},
                       {"c_bound", check(rep.c_bound)}};
        write_text(json_path, j.dump(2) + "\n");
        std::cout << "wrote " << json_path << "\n";
    }
    return 0;
}

// -------------------------------------------------------------- CLI wiring

struct CommonOpts {
    std::string config_path;
    std::string model_name, scheme, x0, exponents, window, mode;
    std::vector<std::string> model_params;
    std::string h_list, n_list;
    double T = 0, h = 0, q = 0, p = 0, scale = 0, budget = 0, radius = 1000.0;
    long n = 0, N = 0, n_ref = 0, samples = 100000;
    std::uint64_t seed = 0;
    int workers = 0;
    std::string out_dir, prefix, json_path;
};

void add_config_opt(CLI::App* s, CommonOpts& o) {
    s->add_option("--config", o.config_path,
                  "declarative config file; flags override its fields")
        ->check(CLI::ExistingFile);
}

void add_model_opts(CLI::App* s, CommonOpts& o, bool with_name) {
    if (with_name)
        s->add_option("--model", o.model_name,
                      "built-in model (cauchy_cubic, sine_cubic, gaussian_cubic, radial_poly, "
                      "frozen_lorenz)");
    s->add_option("--param", o.model_params, "model parameter name=value (may repeat)");
}

void add_output_opts(CLI::App* s, CommonOpts& o) {
    s->add_option("--out", o.out_dir, "output directory (default '.')");
    s->add_option("--prefix", o.prefix, "output file prefix (default: subcommand name)");
    s->add_option("--budget", o.budget,
                  "max estimated steps x paths per Monte Carlo row; <= 0 disables");
}

void add_seed_workers(CLI::App* s, CommonOpts& o) {
    s->add_option("--seed", o.seed, "master seed of the counter-based RNG");
    s->add_option("--workers", o.workers,
                  "worker threads (0: $LEVYSIM_WORKERS, else 1); results do not depend on it");
}

// apply flags over the loaded config; only options the user actually passed win
void apply_common(CLI::App* s, const CommonOpts& o, ExperimentConfig& cfg) {
    const auto given = [&](const std::string& name) {
        const CLI::Option* opt = s->get_option_no_throw(name);
        return opt && opt->count() > 0;
    };
    if (given("--model")) cfg.model_name = o.model_name;
    if (given("--param")) {
        for (const auto& kv : o.model_params) {
            const std::size_t eq = kv.find('=');
            if (eq == std::string::npos || eq == 0)
                throw ConfigError("--param expects name=value, got '" + kv + "'");
            cfg.model_params[detail::cfg_trim(kv.substr(0, eq))] =
                detail::cfg_double(detail::cfg_trim(kv.substr(eq + 1)), "--param " + kv);
        }
    }
    if (given("--scheme")) cfg.scheme = o.scheme;
    if (given("--T")) cfg.T = o.T;
    if (given("--step")) {
        cfg.h = o.h;
        cfg.n = 0;
    }
    if (given("--n")) {
        cfg.n = o.n;
        cfg.h = 0;
    }
    if (given("--N")) cfg.N_paths = o.N;
    if (given("--seed")) cfg.master_seed = o.seed;
    if (given("--x0")) cfg.x0 = detail::cfg_double_list(o.x0, "--x0");
    if (given("--exponents")) cfg.exponents = detail::cfg_double_list(o.exponents, "--exponents");
    if (given("--window")) {
        const auto w = detail::cfg_double_list(o.window, "--window");
        if (w.size() != 2) throw ConfigError("--window expects 'lo,hi'");
        cfg.window_lo = w[0];
        cfg.window_hi = w[1];
        cfg.has_window = true;
    }
    if (given("--workers")) cfg.workers = o.workers;
    if (given("--out")) cfg.out_dir = o.out_dir;
    if (given("--prefix")) cfg.prefix = o.prefix;
    if (given("--budget")) cfg.max_steps = o.budget;
    if (given("--scale")) cfg.scale = o.scale;
    if (given("--h-list")) cfg.h_list = detail::cfg_double_list(o.h_list, "--h-list");
    if (given("--q")) cfg.q = o.q;
    if (given("--p")) cfg.rate_p = o.p;
    if (given("--n-list")) cfg.n_list = detail::cfg_long_list(o.n_list, "--n-list");
    if (given("--n-ref")) cfg.n_ref = o.n_ref;
    if (given("--mode")) cfg.error_mode = o.mode;
}

ExperimentConfig base_config(const CommonOpts& o) {
    return o.config_path.empty() ? ExperimentConfig{} : load_config_file(o.config_path);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"tail-respecting explicit schemes for Levy-driven SDEs with dissipative "
                 "superlinear drifts"};
    app.require_subcommand(1);
    const std::string cmdline = join_argv(argc, argv);

    CommonOpts so, to, co, ko;
    RatesOpts ro;
    ExperimentConfig rates_defaults; // worked-example defaults for the help text
    int table_id = 0;

    auto* sim = app.add_subcommand(
        "simulate", "run one ensemble; write moment CSV(s) and a JSON sidecar");
    add_config_opt(sim, so);
    add_model_opts(sim, so, true);
    sim->add_option("--scheme", so.scheme,
                    "euler | tamed | splitting | reverse_a | reverse_b");
    sim->add_option("--T", so.T, "time horizon");
    auto* opt_h = sim->add_option("--step", so.h, "step size h; n = round(T/h)");
    auto* opt_n = sim->add_option("--n", so.n, "number of steps");
    opt_h->excludes(opt_n);
    sim->add_option("--N", so.N, "number of Monte Carlo paths");
    sim->add_option("--x0", so.x0, "initial state, comma separated (default: origin)");
    sim->add_option("--exponents", so.exponents, "moment exponents, comma separated");
    sim->add_option("--window", so.window, "time window 'lo,hi' for running-max moments");
    add_seed_workers(sim, so);
    add_output_opts(sim, so);

    auto* tab = app.add_subcommand(
        "table", "reproduce one of the six cubic/Cauchy benchmark tables");
    tab->add_option("id", table_id, "table number (1..6)")->required()->check(CLI::Range(1, 6));
    add_config_opt(tab, to);
    add_model_opts(tab, to, false);
    tab->add_option("--scale", to.scale, "path-count scale; N = round(1e7 * scale)");
    tab->add_option("--h-list", to.h_list, "step sizes to run, comma separated");
    tab->add_option("--x0", to.x0, "initial state (default: origin)");
    add_seed_workers(tab, to);
    add_output_opts(tab, to);

    auto* conv = app.add_subcommand(
        "converge", "strong-error study against a same-scheme fine reference");
    add_config_opt(conv, co);
    add_model_opts(conv, co, true);
    conv->add_option("--scheme", co.scheme,
                     "euler | tamed | splitting | reverse_a | reverse_b");
    conv->add_option("--T", co.T, "time horizon");
    conv->add_option("--N", co.N, "number of coupled path pairs");
    conv->add_option("--q", co.q, "error moment order");
    conv->add_option("--p", co.p, "noise moment order fed to the slope prediction");
    conv->add_option("--n-list", co.n_list, "coarse step counts, comma separated divisors of n_ref");
    conv->add_option("--n-ref", co.n_ref, "reference step count");
    conv->add_option("--mode", co.mode, "sup_of_mean | mean_of_sup");
    conv->add_option("--x0", co.x0, "initial state (default: origin)");
    add_seed_workers(conv, co);
    add_output_opts(conv, co);

    auto* rat = app.add_subcommand("rates", "closed-form rate arithmetic (no simulation)");
    CommonOpts rco; // --config only
    add_config_opt(rat, rco);
    rat->add_option("--p", ro.p, "noise moment order")->default_val(rates_defaults.rates_p);
    rat->add_option("--q", ro.q, "error moment order")->default_val(rates_defaults.rates_q);
    rat->add_option("--kappa", ro.kappa, "drift dissipativity power")
        ->default_val(rates_defaults.rates_kappa);
    rat->add_option("--chi", ro.chi, "drift gradient growth power")
        ->default_val(rates_defaults.rates_chi);
    rat->add_option("--p_X", ro.p_X, "target state moment order")
        ->default_val(rates_defaults.rates_p_X);
    rat->add_option("--C_diss", ro.C_diss, "dissipativity constant")
        ->default_val(rates_defaults.rates_C_diss);
    rat->add_option("--b_sup", ro.b_sup, "diffusion sup norm")
        ->default_val(rates_defaults.rates_b_sup);
    rat->add_option("--json", ro.json_path, "also write the rates as JSON to this path");

    auto* chk = app.add_subcommand(
        "check-model", "sampling spot-check of a model's declared hypotheses");
    add_config_opt(chk, ko);
    add_model_opts(chk, ko, true);
    chk->add_option("--samples", ko.samples, "sample points")->default_val(100000);
    chk->add_option("--radius", ko.radius, "sampling ball radius")->default_val(1000.0);
    chk->add_option("--seed", ko.seed, "master seed");
    chk->add_option("--json", ko.json_path, "also write the report as JSON to this path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (sim->parsed()) {
            ExperimentConfig cfg = base_config(so);
            apply_common(sim, so, cfg);
            return cmd_simulate(std::move(cfg), cmdline);
        }
        if (tab->parsed()) {
            ExperimentConfig cfg = base_config(to);
            apply_common(tab, to, cfg);
            return cmd_table(std::move(cfg), table_id, cmdline);
        }
        if (conv->parsed()) {
            ExperimentConfig cfg = base_config(co);
            apply_common(conv, co, cfg);
            return cmd_converge(std::move(cfg), cmdline);
        }
        if (rat->parsed()) {
            ExperimentConfig cfg = base_config(rco);
            const auto given = [&](const std::string& name) {
                const CLI::Option* opt = rat->get_option_no_throw(name);
                return opt && opt->count() > 0;
            };
            if (given("--p")) cfg.rates_p = ro.p;
            if (given("--q")) cfg.rates_q = ro.q;
            if (given("--kappa")) cfg.rates_kappa = ro.kappa;
            if (given("--chi")) cfg.rates_chi = ro.chi;
            if (given("--p_X")) cfg.rates_p_X = ro.p_X;
            if (given("--C_diss")) cfg.rates_C_diss = ro.C_diss;
            if (given("--b_sup")) cfg.rates_b_sup = ro.b_sup;
            return cmd_rates(cfg, ro);
        }
        if (chk->parsed()) {
            ExperimentConfig cfg = base_config(ko);
            apply_common(chk, ko, cfg);
            return cmd_check_model(cfg, ko.samples, ko.radius, ko.json_path);
        }
    } catch (const BudgetAbort& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::domain_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
