#include "cbsde/run.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "cbsde/claim.hpp"
#include "cbsde/config.hpp"
#include "cbsde/constraint.hpp"
#include "cbsde/csv.hpp"
#include "cbsde/driver.hpp"
#include "cbsde/errors.hpp"
#include "cbsde/format.hpp"
#include "cbsde/lattice.hpp"
#include "cbsde/risk.hpp"
#include "cbsde/solver.hpp"

namespace cbsde {

namespace {

using Clock = std::chrono::steady_clock;

constexpr const char* kUsage =
    "usage: cbsde <solve|transfer|verify> --config <path> [--csv <path>] "
    "[--seed <u64>] [--quiet]";

struct CliArgs {
    std::string command;
    std::string config_path;
    std::string csv_path;
    std::optional<std::uint64_t> seed;
    bool quiet = false;
};

// Ordered `key = value` lines; wall_ms is appended last so consumers can
// compare records net of timing.
struct Record {
    std::vector<std::pair<std::string, std::string>> fields;

    void put(std::string key, std::string value) {
        fields.emplace_back(std::move(key), std::move(value));
    }
    void put_double(std::string key, double value) {
        put(std::move(key), format_double(value));
    }
    void write(std::ostream& out) const {
        for (const auto& [key, value] : fields) out << key << " = " << value << '\n';
    }
};

void finish_record(Record& rec, const CliArgs& args, std::ostream& out,
                   Clock::time_point start) {
    const double ms =
        std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    rec.put_double("wall_ms", ms);
    if (!args.quiet) rec.write(out);
}

void echo_config(Record& rec, const ConfigReader& cfg) {
    for (const auto& [key, value] : cfg.consumed()) rec.put("config." + key, value);
}

CliArgs parse_args(int argc, const char* const* argv) {
    if (argc < 2) throw ValidationError("missing command");
    CliArgs args;
    args.command = argv[1];
    if (args.command != "solve" && args.command != "transfer" && args.command != "verify") {
        throw ValidationError("unknown command `" + args.command +
                              "` (expected solve, transfer, or verify)");
    }
    for (int i = 2; i < argc; ++i) {
        const std::string flag = argv[i];
        auto value_of = [&]() -> std::string {
            if (i + 1 >= argc) throw ValidationError("flag " + flag + " needs a value");
            return argv[++i];
        };
        if (flag == "--config") {
            args.config_path = value_of();
        } else if (flag == "--csv") {
            args.csv_path = value_of();
        } else if (flag == "--seed") {
            args.seed = parse_u64_strict(value_of(), "--seed");
        } else if (flag == "--quiet") {
            args.quiet = true;
        } else {
            throw ValidationError("unknown flag `" + flag + "`");
        }
    }
    if (args.config_path.empty()) throw ValidationError("--config is required");
    return args;
}

Lattice lattice_from(ConfigReader& cfg) {
    const int num_steps = cfg.get_int("lattice.num_steps");
    const double horizon = cfg.get_double("lattice.horizon");
    const int cap = cfg.get_int_or("lattice.cap", kDefaultStepCap);
    return Lattice(num_steps, horizon, cap);
}

Driver driver_from(ConfigReader& cfg, const std::string& prefix) {
    const std::string kind = cfg.get_string(prefix + ".kind");
    Driver d;
    if (kind == "zero") {
        d = zero_driver();
    } else if (kind == "linear") {
        d = linear_driver(cfg.get_double(prefix + ".mu"));
    } else if (kind == "abs") {
        d = abs_driver(cfg.get_double(prefix + ".mu"));
    } else if (kind == "quadratic") {
        d = quadratic_driver(cfg.get_double(prefix + ".gamma"));
    } else {
        throw ValidationError("config: unknown " + prefix + ".kind `" + kind +
                              "` (expected zero, linear, abs, or quadratic)");
    }
    if (cfg.has(prefix + ".dilate")) d = dilate(d, cfg.get_double(prefix + ".dilate"));
    // Structural-flag overrides, for experiments on what the flags guard.
    d.convex = cfg.get_bool_or(prefix + ".flag_convex", d.convex);
    d.subadditive = cfg.get_bool_or(prefix + ".flag_subadditive", d.subadditive);
    d.positively_homogeneous =
        cfg.get_bool_or(prefix + ".flag_homogeneous", d.positively_homogeneous);
    return d;
}

Constraint constraint_from(ConfigReader& cfg) {
    const std::string kind = cfg.get_string_or("constraint.kind", "none");
    Constraint c;
    if (kind == "none") {
        c = no_constraint();
    } else if (kind == "z_band") {
        c = z_band_constraint(cfg.get_double("constraint.k"));
    } else if (kind == "z_floor") {
        c = z_floor_constraint(cfg.get_double("constraint.k"));
    } else if (kind == "z_sign") {
        c = z_sign_constraint();
    } else {
        throw ValidationError("config: unknown constraint.kind `" + kind +
                              "` (expected none, z_band, z_floor, or z_sign)");
    }
    c.zero_at_zero = cfg.get_bool_or("constraint.flag_zero_at_zero", c.zero_at_zero);
    c.subadditive = cfg.get_bool_or("constraint.flag_subadditive", c.subadditive);
    c.positively_homogeneous =
        cfg.get_bool_or("constraint.flag_homogeneous", c.positively_homogeneous);
    return c;
}

SolverConfig solver_from(ConfigReader& cfg) {
    SolverConfig sc;
    sc.tol = cfg.get_double_or("solver.tol", sc.tol);
    sc.m0 = cfg.get_double_or("solver.m0", sc.m0);
    sc.m_cap = cfg.get_double_or("solver.m_cap", sc.m_cap);
    return sc;
}

Claim claim_from(ConfigReader& cfg, const Lattice& lattice) {
    const std::string kind = cfg.get_string("claim.kind");
    if (kind == "constant") {
        return Claim::constant(cfg.get_double("claim.value"));
    }
    if (kind == "w_terminal") {
        const double scale = cfg.get_double_or("claim.scale", 1.0);
        const double w_max = lattice.sqrt_dt() * lattice.num_steps();
        return Claim::from_terminal_w([scale](double w) { return scale * w; },
                                      std::fabs(scale) * w_max);
    }
    if (kind == "tanh_w") {
        const double scale = cfg.get_double_or("claim.scale", 1.0);
        const double b = cfg.get_double_or("claim.b", 1.0);
        return Claim::from_terminal_w([scale, b](double w) { return scale * std::tanh(b * w); },
                                      std::fabs(scale));
    }
    if (kind == "table") {
        const std::string path = cfg.get_string("claim.table");
        ClaimTable table = read_claim_table_csv(path);
        if (table.num_steps != lattice.num_steps()) {
            throw ValidationError("config: claim table `" + path + "` has depth " +
                                  std::to_string(table.num_steps) + ", lattice has " +
                                  std::to_string(lattice.num_steps()));
        }
        return Claim::from_terminal_values(lattice, std::move(table.values));
    }
    throw ValidationError("config: unknown claim.kind `" + kind +
                          "` (expected constant, w_terminal, tanh_w, or table)");
}

std::vector<int> csv_steps_from(ConfigReader& cfg) {
    const std::string selection = cfg.get_string_or("csv.steps", "all");
    if (selection == "all") return {};
    std::vector<int> steps;
    std::size_t begin = 0;
    while (begin <= selection.size()) {
        const std::size_t end = selection.find(',', begin);
        const std::string token =
            selection.substr(begin, end == std::string::npos ? end : end - begin);
        steps.push_back(parse_int_strict(token, "config: key `csv.steps`"));
        if (end == std::string::npos) break;
        begin = end + 1;
    }
    return steps;
}

std::ofstream open_csv(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("csv: cannot open `" + path + "` for writing");
    return out;
}

int cmd_solve(const CliArgs& args, ConfigReader& cfg, std::ostream& out,
              Clock::time_point start) {
    const Lattice lattice = lattice_from(cfg);
    const Driver driver = driver_from(cfg, "driver");
    const Constraint constraint = constraint_from(cfg);
    const Claim claim = claim_from(cfg, lattice);
    const SolverConfig sc = solver_from(cfg);
    const std::string mode = cfg.get_string_or("solve.mode", "constrained");
    double m = 0.0;
    if (mode == "penalized") {
        m = cfg.get_double("solve.m");
    } else if (mode != "g" && mode != "constrained") {
        throw ValidationError("config: unknown solve.mode `" + mode +
                              "` (expected g, penalized, or constrained)");
    }
    const std::vector<int> csv_steps = csv_steps_from(cfg);
    cfg.finish();

    Record rec;
    rec.put("command", "solve");
    Solution sol;
    std::optional<MinimalSolution> minimal;
    if (mode == "g") {
        sol = solve_g(driver, claim, lattice);
    } else if (mode == "penalized") {
        sol = solve_penalized(driver, constraint, m, claim, lattice);
    } else {
        minimal = solve_constrained(driver, constraint, claim, lattice, sc);
        sol = minimal->solution;
    }
    rec.put("status", "converged");
    echo_config(rec, cfg);
    rec.put("driver", driver.id);
    rec.put("constraint", constraint.id);
    rec.put_double("dt", lattice.dt());
    rec.put_double("y0", sol.y0());
    if (sol.penalty_m) rec.put_double("penalty_m", *sol.penalty_m);
    if (minimal) {
        rec.put_double("m_final", minimal->m_final);
        rec.put_double("convergence_gap", minimal->convergence_gap);
        rec.put_double("phi_residual", minimal->phi_residual);
    }
    if (!args.csv_path.empty()) {
        std::ofstream csv = open_csv(args.csv_path);
        write_nodes_csv(csv, sol, lattice, csv_steps);
    }
    finish_record(rec, args, out, start);
    return 0;
}

int cmd_transfer(const CliArgs& args, ConfigReader& cfg, std::ostream& out,
                 Clock::time_point start) {
    const Lattice lattice = lattice_from(cfg);
    const Driver d1 = driver_from(cfg, "driver1");
    const Driver d2 = driver_from(cfg, "driver2");
    const Constraint constraint = constraint_from(cfg);
    const Claim eta = claim_from(cfg, lattice);
    const SolverConfig sc = solver_from(cfg);
    const std::string mode = cfg.get_string("transfer.mode");

    if (mode == "sweep") {
        const double alpha_start = cfg.get_double_or("sweep.alpha_start", 0.0);
        const double alpha_stop = cfg.get_double_or("sweep.alpha_stop", 1.0);
        const double alpha_step = cfg.get_double_or("sweep.alpha_step", 0.01);
        if (!(alpha_step > 0.0) || !(alpha_stop >= alpha_start)) {
            throw ValidationError("config: sweep needs alpha_step > 0 and "
                                  "alpha_stop >= alpha_start");
        }
        const double span = (alpha_stop - alpha_start) / alpha_step;
        if (!(span <= 1e6)) {
            throw ValidationError("config: sweep grid would hold more than 1e6 points");
        }
        cfg.finish();

        const RiskMeasure rm1 = make_risk_measure(d1, constraint, lattice, sc);
        const RiskMeasure rm2 = make_risk_measure(d2, constraint, lattice, sc);
        std::vector<double> alphas;
        const int count = static_cast<int>(std::floor(span + 0.5));
        alphas.reserve(static_cast<std::size_t>(count) + 1);
        for (int i = 0; i <= count; ++i) alphas.push_back(alpha_start + i * alpha_step);
        const SweepResult res = transfer_sweep(rm1, rm2, eta, alphas);

        Record rec;
        rec.put("command", "transfer");
        rec.put("status", "converged");
        echo_config(rec, cfg);
        rec.put("driver1", d1.id);
        rec.put("driver2", d2.id);
        rec.put("constraint", constraint.id);
        rec.put_double("best_alpha", res.best_alpha);
        rec.put_double("best_total", res.best_total);
        if (!args.csv_path.empty()) {
            std::ofstream csv = open_csv(args.csv_path);
            write_curve_csv(csv, res.curve);
        }
        finish_record(rec, args, out, start);
        return 0;
    }
    if (mode != "construct") {
        throw ValidationError("config: unknown transfer.mode `" + mode +
                              "` (expected sweep or construct)");
    }
    cfg.finish();

    const TransferResult tr = optimal_transfer_construct(d1, d2, constraint, eta, lattice, sc);
    // The same baseline in risk form: the inf-convolved measure applied to eta.
    const Driver g3 = infconv(d1, d2);
    const double rho_baseline =
        solve_constrained(g3, constraint, eta.negated(), lattice, sc).solution.y0();

    Record rec;
    rec.put("command", "transfer");
    rec.put("status", tr.hypothesis_ok ? "converged" : "hypothesis-violation");
    echo_config(rec, cfg);
    rec.put("driver1", d1.id);
    rec.put("driver2", d2.id);
    rec.put("driver_infconv", g3.id);
    rec.put("constraint", constraint.id);
    rec.put_double("baseline", tr.baseline);
    rec.put_double("split1", tr.split1);
    rec.put_double("split2", tr.split2);
    rec.put_double("total", tr.total);
    rec.put_double("equality_gap", tr.equality_gap);
    rec.put_double("phi_zhat_residual", tr.phi_zhat_residual);
    rec.put_double("phi_zdiff_residual", tr.phi_zdiff_residual);
    rec.put_double("rho_baseline", rho_baseline);
    if (!args.csv_path.empty()) {
        std::ofstream csv = open_csv(args.csv_path);
        std::vector<double> terminal(lattice.paths_at(lattice.num_steps()));
        for (std::uint64_t p = 0; p < terminal.size(); ++p) {
            terminal[p] = tr.allocation.value_path(lattice, p);
        }
        write_claim_csv(csv, lattice, terminal);
    }
    finish_record(rec, args, out, start);
    return 0;
}

int cmd_verify(const CliArgs& args, ConfigReader& cfg, std::ostream& out, std::ostream& err,
               Clock::time_point start) {
    const Lattice lattice = lattice_from(cfg);
    const Driver driver = driver_from(cfg, "driver");
    const Constraint constraint = constraint_from(cfg);
    const SolverConfig sc = solver_from(cfg);
    const std::uint64_t file_seed = cfg.get_u64_or("verify.seed", 1);
    const std::uint64_t seed = args.seed.value_or(file_seed);
    const int samples = cfg.get_int_or("verify.samples", 8);
    if (!args.csv_path.empty()) {
        throw ValidationError("verify produces no csv output; drop --csv");
    }
    cfg.finish();

    const RiskMeasure rm = make_risk_measure(driver, constraint, lattice, sc);
    const PropertyReport rep = run_property_suite(rm, seed, samples);

    Record rec;
    rec.put("command", "verify");
    rec.put("status", rep.all_pass ? "converged" : "property-failure");
    echo_config(rec, cfg);
    rec.put("driver", driver.id);
    rec.put("constraint", constraint.id);
    rec.put("seed", std::to_string(seed));
    rec.put("samples", std::to_string(samples));
    for (const PropertyCheck& check : rep.checks) {
        rec.put("check." + check.name + ".violation", format_double(check.violation));
        rec.put("check." + check.name + ".tolerance", format_double(check.tolerance));
        rec.put("check." + check.name + ".pass", check.pass ? "true" : "false");
    }
    finish_record(rec, args, out, start);
    if (!rep.all_pass) {
        err << "property failure:";
        for (const PropertyCheck& check : rep.checks) {
            if (!check.pass) err << ' ' << check.name;
        }
        err << '\n';
        return 5;
    }
    return 0;
}

}  // namespace

int run_command(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    const Clock::time_point start = Clock::now();
    CliArgs args;
    try {
        args = parse_args(argc, argv);
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n' << kUsage << '\n';
        return 2;
    }
    try {
        const ConfigMap map = parse_config_file(args.config_path);
        ConfigReader cfg(map);
        if (args.command == "solve") return cmd_solve(args, cfg, out, start);
        if (args.command == "transfer") return cmd_transfer(args, cfg, out, start);
        return cmd_verify(args, cfg, out, err, start);
    } catch (const NonConvergenceError& e) {
        Record rec;
        rec.put("command", args.command);
        rec.put("status", "non-converged");
        rec.put_double("convergence_gap", e.gap);
        rec.put_double("m_last", e.m_last);
        finish_record(rec, args, out, start);
        err << "error: " << e.what() << '\n';
        return 3;
    } catch (const DivergenceError& e) {
        Record rec;
        rec.put("command", args.command);
        rec.put("status", "diverged");
        rec.put_double("magnitude", e.magnitude);
        rec.put_double("penalty_m", e.penalty_m);
        finish_record(rec, args, out, start);
        err << "error: " << e.what() << '\n';
        return 4;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace cbsde
