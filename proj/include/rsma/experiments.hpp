#pragma once

// Experiment plumbing: strict JSON configuration, RFC-4180 CSV output, and the
// three runners (finite-blocklength sweep, mobility sweep, split table). Every
// runner writes rows in a fixed deterministic order and every row carries the
// inputs that produced it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rsma/channel.hpp"
#include "rsma/errors.hpp"
#include "rsma/mobility.hpp"
#include "rsma/montecarlo.hpp"
#include "rsma/optimizer.hpp"

namespace rsma {

// ---------------------------------------------------------------------------
// Experiment specifications (defaults = the shipped config files)

struct FblSweepSpec {
    std::vector<double> thetas{std::numbers::pi / 9.0, 2.0 * std::numbers::pi / 9.0,
                               3.0 * std::numbers::pi / 9.0, 4.0 * std::numbers::pi / 9.0};
    double snr_db = 20.0;
    std::vector<std::int64_t> blocklengths{100, 200, 500, 1000, 2000};
    bool include_infinite = true;
    // Per-scheme error targets: the rate-splitting schemes split the common
    // message's budget off the private one.
    double xi_rsma = 5e-6;
    double xi_sdma = 1e-5;
    double xi_noma = 5e-6;
    std::vector<double> weights{1.0, 1.0};

    void validate() const {
        if (thetas.empty()) throw ContractViolation("fbl-sweep: thetas must be nonempty");
        for (double th : thetas)
            if (!(th >= 0.0) || th > std::numbers::pi / 2.0)
                throw ContractViolation("fbl-sweep: theta outside [0, pi/2]");
        if (blocklengths.empty())
            throw ContractViolation("fbl-sweep: blocklengths must be nonempty");
        for (std::int64_t n : blocklengths)
            if (n < 1) throw ContractViolation("fbl-sweep: blocklengths must be >= 1");
        for (double xi : {xi_rsma, xi_sdma, xi_noma})
            if (!(xi > 0.0) || !(xi < 0.5))
                throw ContractViolation("fbl-sweep: error targets must lie in (0, 1/2)");
        if (weights.size() != 2)
            throw ContractViolation("fbl-sweep: weights must list exactly 2 users");
        if (weights[0] < 0.0 || weights[1] < 0.0 || weights[0] + weights[1] <= 0.0)
            throw ContractViolation("fbl-sweep: weights must be nonnegative with a positive sum");
    }
};

struct MobilitySweepSpec {
    int n_t = 32;
    int K = 8;
    double f_c = 3.5e9;
    double T = 10e-3;
    std::vector<double> speeds_kmh{0.0, 30.0, 60.0, 90.0, 120.0};
    std::vector<double> snrs_db{25.0, 35.0};
    std::vector<McScheme> schemes{McScheme::kRsmaTopt, McScheme::kRsmaGrid, McScheme::kSdma};
    long num_draws = 10000;
    double grid_granularity = 0.001;
    double fixed_t = 1.0;

    void validate() const {
        MobilityParams probe;
        probe.n_t = n_t;
        probe.K = K;
        probe.f_c = f_c;
        probe.T = T;
        probe.validate();
        SweepGrid grid;
        grid.speeds_kmh = speeds_kmh;
        grid.snrs_db = snrs_db;
        grid.schemes = schemes;
        grid.validate();
        McConfig cfg;
        cfg.num_draws = num_draws;
        cfg.grid_granularity = grid_granularity;
        cfg.fixed_t = fixed_t;
        for (McScheme s : schemes) {
            cfg.scheme = s;
            cfg.validate();
        }
    }
};

struct ToptTableSpec {
    std::vector<int> n_ts{32};
    std::vector<int> Ks{2, 4, 8};
    std::vector<double> snrs_db{25.0, 35.0};
    std::vector<double> speeds_kmh{10.0, 20.0, 30.0, 40.0, 50.0, 60.0};
    double f_c = 3.5e9;
    double T = 1e-3;
    double grid_granularity = 0.001;

    void validate() const {
        if (n_ts.empty() || Ks.empty() || snrs_db.empty() || speeds_kmh.empty())
            throw ContractViolation("topt-table: every grid axis must be nonempty");
        for (int nt : n_ts)
            for (int K : Ks) {
                MobilityParams probe;
                probe.n_t = nt;
                probe.K = K;
                probe.f_c = f_c;
                probe.T = T;
                probe.validate();  // enforces n_t >= K >= 1 and positive f_c, T
            }
        for (double v : speeds_kmh)
            if (!(v >= 0.0)) throw ContractViolation("topt-table: speeds must be >= 0 km/h");
        if (!(grid_granularity > 0.0) || !(grid_granularity < 1.0))
            throw ContractViolation("topt-table: grid_granularity must lie in (0, 1)");
    }
};

enum class ExperimentKind { kFblSweep, kMobilitySweep, kToptTable };

inline const char* experiment_name(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::kFblSweep: return "fbl-sweep";
        case ExperimentKind::kMobilitySweep: return "mobility-sweep";
        case ExperimentKind::kToptTable: return "topt-table";
    }
    throw ContractViolation("experiment_name: unknown kind");
}

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::kFblSweep;
    std::uint64_t seed = 0;
    int threads = 1;
    std::string output;  // may be empty when the CLI supplies --output
    FblSweepSpec fbl;
    MobilitySweepSpec mobility;
    ToptTableSpec topt;

    void validate() const {
        if (threads < 1) throw ContractViolation("config: threads must be >= 1");
        switch (kind) {
            case ExperimentKind::kFblSweep: fbl.validate(); break;
            case ExperimentKind::kMobilitySweep: mobility.validate(); break;
            case ExperimentKind::kToptTable: topt.validate(); break;
        }
    }
};

// ---------------------------------------------------------------------------
// Strict JSON parsing: unknown keys are errors, wrong types are errors, and
// every message names the offending key.

namespace detail {

using njson = nlohmann::json;

inline void reject_unknown(const njson& obj, const std::vector<std::string>& allowed,
                           const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
            throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

inline void expect_object(const njson& j, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
}

inline double json_number(const njson& v, const std::string& key) {
    if (!v.is_number()) throw ConfigError("'" + key + "' must be a number");
    return v.get<double>();
}

inline long json_integer(const njson& v, const std::string& key) {
    if (!v.is_number_integer() && !v.is_number_unsigned())
        throw ConfigError("'" + key + "' must be an integer");
    return v.get<long>();
}

inline bool json_boolean(const njson& v, const std::string& key) {
    if (!v.is_boolean()) throw ConfigError("'" + key + "' must be true or false");
    return v.get<bool>();
}

inline std::vector<double> json_number_array(const njson& v, const std::string& key) {
    if (!v.is_array()) throw ConfigError("'" + key + "' must be an array of numbers");
    std::vector<double> out;
    out.reserve(v.size());
    for (const auto& e : v) out.push_back(json_number(e, key));
    return out;
}

inline std::vector<long> json_integer_array(const njson& v, const std::string& key) {
    if (!v.is_array()) throw ConfigError("'" + key + "' must be an array of integers");
    std::vector<long> out;
    out.reserve(v.size());
    for (const auto& e : v) out.push_back(json_integer(e, key));
    return out;
}

inline McScheme scheme_from_name(const std::string& name) {
    if (name == "rsma-topt") return McScheme::kRsmaTopt;
    if (name == "rsma-grid") return McScheme::kRsmaGrid;
    if (name == "rsma-fixed-t") return McScheme::kRsmaFixedT;
    if (name == "sdma") return McScheme::kSdma;
    throw ConfigError("unknown scheme '" + name +
                      "' (expected rsma-topt, rsma-grid, rsma-fixed-t, or sdma)");
}

inline FblSweepSpec parse_fbl_parameters(const njson& p) {
    expect_object(p, "fbl-sweep parameters");
    reject_unknown(p,
                   {"thetas", "snr_db", "blocklengths", "include_infinite", "xi_rsma",
                    "xi_sdma", "xi_noma", "weights"},
                   "fbl-sweep parameters");
    FblSweepSpec spec;
    if (p.contains("thetas")) spec.thetas = json_number_array(p["thetas"], "thetas");
    if (p.contains("snr_db")) spec.snr_db = json_number(p["snr_db"], "snr_db");
    if (p.contains("blocklengths")) {
        spec.blocklengths.clear();
        for (long n : json_integer_array(p["blocklengths"], "blocklengths"))
            spec.blocklengths.push_back(n);
    }
    if (p.contains("include_infinite"))
        spec.include_infinite = json_boolean(p["include_infinite"], "include_infinite");
    if (p.contains("xi_rsma")) spec.xi_rsma = json_number(p["xi_rsma"], "xi_rsma");
    if (p.contains("xi_sdma")) spec.xi_sdma = json_number(p["xi_sdma"], "xi_sdma");
    if (p.contains("xi_noma")) spec.xi_noma = json_number(p["xi_noma"], "xi_noma");
    if (p.contains("weights")) spec.weights = json_number_array(p["weights"], "weights");
    return spec;
}

inline MobilitySweepSpec parse_mobility_parameters(const njson& p) {
    expect_object(p, "mobility-sweep parameters");
    reject_unknown(p,
                   {"n_t", "K", "f_c", "T", "speeds_kmh", "snrs_db", "schemes", "num_draws",
                    "grid_granularity", "fixed_t"},
                   "mobility-sweep parameters");
    MobilitySweepSpec spec;
    if (p.contains("n_t")) spec.n_t = static_cast<int>(json_integer(p["n_t"], "n_t"));
    if (p.contains("K")) spec.K = static_cast<int>(json_integer(p["K"], "K"));
    if (p.contains("f_c")) spec.f_c = json_number(p["f_c"], "f_c");
    if (p.contains("T")) spec.T = json_number(p["T"], "T");
    if (p.contains("speeds_kmh"))
        spec.speeds_kmh = json_number_array(p["speeds_kmh"], "speeds_kmh");
    if (p.contains("snrs_db")) spec.snrs_db = json_number_array(p["snrs_db"], "snrs_db");
    if (p.contains("schemes")) {
        if (!p["schemes"].is_array()) throw ConfigError("'schemes' must be an array of strings");
        spec.schemes.clear();
        for (const auto& s : p["schemes"]) {
            if (!s.is_string()) throw ConfigError("'schemes' must be an array of strings");
            spec.schemes.push_back(scheme_from_name(s.get<std::string>()));
        }
    }
    if (p.contains("num_draws")) spec.num_draws = json_integer(p["num_draws"], "num_draws");
    if (p.contains("grid_granularity"))
        spec.grid_granularity = json_number(p["grid_granularity"], "grid_granularity");
    if (p.contains("fixed_t")) spec.fixed_t = json_number(p["fixed_t"], "fixed_t");
    return spec;
}

inline ToptTableSpec parse_topt_parameters(const njson& p) {
    expect_object(p, "topt-table parameters");
    reject_unknown(
        p, {"n_ts", "Ks", "snrs_db", "speeds_kmh", "f_c", "T", "grid_granularity"},
        "topt-table parameters");
    ToptTableSpec spec;
    if (p.contains("n_ts")) {
        spec.n_ts.clear();
        for (long n : json_integer_array(p["n_ts"], "n_ts"))
            spec.n_ts.push_back(static_cast<int>(n));
    }
    if (p.contains("Ks")) {
        spec.Ks.clear();
        for (long k : json_integer_array(p["Ks"], "Ks")) spec.Ks.push_back(static_cast<int>(k));
    }
    if (p.contains("snrs_db")) spec.snrs_db = json_number_array(p["snrs_db"], "snrs_db");
    if (p.contains("speeds_kmh"))
        spec.speeds_kmh = json_number_array(p["speeds_kmh"], "speeds_kmh");
    if (p.contains("f_c")) spec.f_c = json_number(p["f_c"], "f_c");
    if (p.contains("T")) spec.T = json_number(p["T"], "T");
    if (p.contains("grid_granularity"))
        spec.grid_granularity = json_number(p["grid_granularity"], "grid_granularity");
    return spec;
}

} // namespace detail

inline ExperimentConfig parse_experiment_config(const std::string& text) {
    detail::njson j;
    try {
        j = detail::njson::parse(text);
    } catch (const detail::njson::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    detail::expect_object(j, "config");
    detail::reject_unknown(j, {"experiment", "seed", "threads", "output", "parameters"},
                           "config");
    if (!j.contains("experiment"))
        throw ConfigError("config needs an 'experiment' key "
                          "(fbl-sweep, mobility-sweep, or topt-table)");
    if (!j["experiment"].is_string())
        throw ConfigError("'experiment' must be a string");
    const std::string name = j["experiment"].get<std::string>();

    ExperimentConfig cfg;
    if (j.contains("seed")) {
        if (!j["seed"].is_number_integer() && !j["seed"].is_number_unsigned())
            throw ConfigError("'seed' must be an integer");
        cfg.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("threads"))
        cfg.threads = static_cast<int>(detail::json_integer(j["threads"], "threads"));
    if (j.contains("output")) {
        if (!j["output"].is_string()) throw ConfigError("'output' must be a string");
        cfg.output = j["output"].get<std::string>();
    }

    const detail::njson params =
        j.contains("parameters") ? j["parameters"] : detail::njson::object();
    if (name == "fbl-sweep") {
        cfg.kind = ExperimentKind::kFblSweep;
        cfg.fbl = detail::parse_fbl_parameters(params);
    } else if (name == "mobility-sweep") {
        cfg.kind = ExperimentKind::kMobilitySweep;
        cfg.mobility = detail::parse_mobility_parameters(params);
    } else if (name == "topt-table") {
        cfg.kind = ExperimentKind::kToptTable;
        cfg.topt = detail::parse_topt_parameters(params);
    } else {
        throw ConfigError("unknown experiment '" + name +
                          "' (expected fbl-sweep, mobility-sweep, or topt-table)");
    }
    return cfg;
}

// ---------------------------------------------------------------------------
// RFC-4180 CSV output

namespace detail {

inline std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
    std::string quoted = "\"";
    for (char c : field) {
        if (c == '"') quoted += '"';
        quoted += c;
    }
    quoted += '"';
    return quoted;
}

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace detail

class CsvWriter {
  public:
    // The timestamp line makes re-runs byte-different by design; pass
    // with_timestamp = false for reproducible artifacts.
    CsvWriter(std::ostream& out, bool with_timestamp) : out_(out) {
        if (with_timestamp) {
            const std::time_t now = std::time(nullptr);
            std::tm utc{};
            gmtime_r(&now, &utc);
            char stamp[40];
            std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &utc);
            out_ << "# generated_at: " << stamp << "\r\n";
        }
    }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << detail::csv_escape(cells[i]);
        }
        out_ << "\r\n";
    }

  private:
    std::ostream& out_;
};

// ---------------------------------------------------------------------------
// Runners

struct RunSummary {
    long rows = 0;
    long solves_attempted = 0;
    long solves_succeeded = 0;
};

// Weighted-sum-rate sweep over inter-user angle x scheme x blocklength, with
// optional infinite-blocklength reference rows. Per-row solver failures are
// recorded in the converged/wsr columns and the run continues.
inline RunSummary run_fbl_sweep(const FblSweepSpec& spec, std::ostream& out,
                                bool with_timestamp, std::ostream* progress = nullptr) {
    spec.validate();
    CsvWriter csv(out, with_timestamp);
    csv.row({"scheme", "theta", "snr_db", "xi", "blocklength", "wsr", "iterations",
             "converged"});

    const double power = std::pow(10.0, spec.snr_db / 10.0);
    struct SchemeRow {
        const char* name;
        double xi;
    };
    const SchemeRow schemes[] = {{"rsma", spec.xi_rsma}, {"sdma", spec.xi_sdma},
                                 {"noma", spec.xi_noma}};

    RunSummary sum;
    for (double theta : spec.thetas) {
        const ChannelSet channels = make_angle_channels(theta);
        for (const SchemeRow& scheme : schemes) {
            std::vector<std::pair<std::string, FblConfig>> cells;
            for (std::int64_t n : spec.blocklengths)
                cells.emplace_back(std::to_string(n), FblConfig::uniform(2, n, scheme.xi));
            if (spec.include_infinite) {
                FblConfig inf_cfg = FblConfig::infinite(2);
                inf_cfg.target_bler = scheme.xi;
                cells.emplace_back("inf", inf_cfg);
            }
            for (const auto& [label, fbl_cfg] : cells) {
                if (progress)
                    *progress << "fbl-sweep: theta=" << detail::fmt_double(theta) << " "
                              << scheme.name << " N=" << label << "\n";
                WsrProblem problem;
                problem.channels = channels;
                problem.weights = Eigen::Vector2d(spec.weights[0], spec.weights[1]);
                problem.power_budget = power;
                problem.fbl = fbl_cfg;
                problem.qos_rates = Eigen::VectorXd::Zero(2);
                ++sum.solves_attempted;
                SolveReport report;
                if (std::string(scheme.name) == "rsma") report = solve_rsma(problem);
                else if (std::string(scheme.name) == "sdma") report = solve_sdma(problem);
                else report = solve_noma(problem);
                ++sum.rows;
                if (report.infeasible) {
                    csv.row({scheme.name, detail::fmt_double(theta),
                             detail::fmt_double(spec.snr_db), detail::fmt_double(scheme.xi),
                             label, "", std::to_string(report.iterations), "false"});
                    continue;
                }
                ++sum.solves_succeeded;
                csv.row({scheme.name, detail::fmt_double(theta),
                         detail::fmt_double(spec.snr_db), detail::fmt_double(scheme.xi),
                         label, detail::fmt_double(report.objective),
                         std::to_string(report.iterations),
                         report.converged ? "true" : "false"});
            }
        }
    }
    return sum;
}

// Monte Carlo ergodic-rate sweep over speed x SNR x scheme.
inline RunSummary run_mobility_sweep(const MobilitySweepSpec& spec, std::uint64_t seed,
                                     int threads, std::ostream& out, bool with_timestamp,
                                     std::ostream* progress = nullptr) {
    spec.validate();
    SweepGrid grid;
    grid.base.n_t = spec.n_t;
    grid.base.K = spec.K;
    grid.base.f_c = spec.f_c;
    grid.base.T = spec.T;
    grid.base.P = 1.0;  // overridden per cell
    grid.speeds_kmh = spec.speeds_kmh;
    grid.snrs_db = spec.snrs_db;
    grid.schemes = spec.schemes;

    McConfig cfg;
    cfg.num_draws = spec.num_draws;
    cfg.base_seed = seed;
    cfg.grid_granularity = spec.grid_granularity;
    cfg.fixed_t = spec.fixed_t;
    cfg.threads = threads;

    if (progress)
        *progress << "mobility-sweep: " << grid.speeds_kmh.size() * grid.snrs_db.size() *
                                               grid.schemes.size()
                  << " cells, " << cfg.num_draws << " draws each\n";
    const std::vector<SweepRow> rows = sweep(grid, cfg);

    CsvWriter csv(out, with_timestamp);
    csv.row({"scheme", "speed_kmh", "snr_db", "t_used", "mean_sum_rate", "std_error",
             "n_t", "K", "f_c", "T", "num_draws", "base_seed"});
    RunSummary sum;
    for (const SweepRow& r : rows) {
        csv.row({scheme_name(r.scheme), detail::fmt_double(r.speed_kmh),
                 detail::fmt_double(r.snr_db), detail::fmt_double(r.split_t),
                 detail::fmt_double(r.estimate.mean_sum_rate),
                 detail::fmt_double(r.estimate.std_error), std::to_string(spec.n_t),
                 std::to_string(spec.K), detail::fmt_double(spec.f_c),
                 detail::fmt_double(spec.T), std::to_string(r.estimate.num_draws),
                 std::to_string(seed)});
        ++sum.rows;
        ++sum.solves_attempted;
        ++sum.solves_succeeded;
    }
    return sum;
}

// Closed-form split table with bound values and the exhaustive-grid reference.
// Cells whose rounded D*K is <= 1 have no closed form; they are emitted with
// degenerate=true and empty split/bound cells rather than dropped.
inline RunSummary run_topt_table(const ToptTableSpec& spec, std::ostream& out,
                                 bool with_timestamp, std::ostream* progress = nullptr) {
    spec.validate();
    CsvWriter csv(out, with_timestamp);
    csv.row({"n_t", "K", "snr_db", "speed_kmh", "epsilon", "D", "theta_param", "rho",
             "omega", "t_opt", "bound_at_topt", "bound_at_grid_max", "degenerate", "f_c",
             "T", "grid_granularity"});
    RunSummary sum;
    for (int nt : spec.n_ts) {
        for (int K : spec.Ks) {
            for (double snr_db : spec.snrs_db) {
                for (double v_kmh : spec.speeds_kmh) {
                    MobilityParams p;
                    p.n_t = nt;
                    p.K = K;
                    p.P = std::pow(10.0, snr_db / 10.0);
                    p.v = v_kmh / 3.6;
                    p.f_c = spec.f_c;
                    p.T = spec.T;
                    if (progress)
                        *progress << "topt-table: n_t=" << nt << " K=" << K
                                  << " snr=" << snr_db << " v=" << v_kmh << "\n";
                    const double eps = time_correlation(p);
                    const auto terms = lower_bound_terms(PowerSplit{1.0}, p);
                    ++sum.solves_attempted;

                    std::string t_opt_cell, bound_cell, rho_cell, degenerate = "false";
                    if (std::isfinite(terms.rho)) rho_cell = detail::fmt_double(terms.rho);
                    try {
                        const PowerSplit split = t_opt_closed_form(p);
                        t_opt_cell = detail::fmt_double(split.t);
                        bound_cell = detail::fmt_double(lower_bound(split, p));
                        ++sum.solves_succeeded;
                    } catch (const DomainError&) {
                        degenerate = "true";
                    }
                    const PowerSplit grid_best = t_opt_exhaustive(p, spec.grid_granularity);
                    csv.row({std::to_string(nt), std::to_string(K),
                             detail::fmt_double(snr_db), detail::fmt_double(v_kmh),
                             detail::fmt_double(eps), detail::fmt_double(terms.D),
                             detail::fmt_double(terms.theta_param), rho_cell,
                             detail::fmt_double(terms.omega), t_opt_cell, bound_cell,
                             detail::fmt_double(lower_bound(grid_best, p)), degenerate,
                             detail::fmt_double(spec.f_c), detail::fmt_double(spec.T),
                             detail::fmt_double(spec.grid_granularity)});
                    ++sum.rows;
                }
            }
        }
    }
    return sum;
}

} // namespace rsma
