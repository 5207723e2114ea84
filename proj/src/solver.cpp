#include "cbsde/solver.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>

#include "cbsde/errors.hpp"
#include "cbsde/format.hpp"

namespace cbsde {

namespace {

constexpr double kLadderMonotoneSlack = 1e-12;
constexpr double kTieSlack = 0.0;  // candidate comparison is strict
constexpr double kInf = std::numeric_limits<double>::infinity();

struct NodeUpdate {
    double y;
    double z;
    double dc;
};

// Objective of one penalized node update. At the finite-difference control the
// branch maximum equals the plain conditional mean exactly; evaluating it as
// such keeps penalty-slack nodes identical to the unpenalized scheme.
struct NodeObjective {
    const Driver& g;
    const Constraint& phi;
    double m;
    double t;
    double dt;
    double s;
    double y_up;
    double y_down;
    double mean;
    double z_fd;

    double operator()(double z) const {
        const double branch =
            (z == z_fd) ? mean : std::max(y_up - z * s, y_down + z * s);
        return branch + (g.eval(t, z) + m * phi.eval(t, z)) * dt;
    }
};

// Deterministic candidate selection: smallest objective value, ties broken
// toward the control closest to the finite-difference integrand, then toward
// the smaller control.
struct CandidatePick {
    double z_fd;
    double best_j = kInf;
    double best_z = 0.0;
    bool have = false;

    void offer(double z, double j) {
        if (!have || j < best_j - kTieSlack) {
            best_j = j;
            best_z = z;
            have = true;
            return;
        }
        if (j == best_j) {
            const double da = std::fabs(z - z_fd);
            const double db = std::fabs(best_z - z_fd);
            if (da < db || (da == db && z < best_z)) best_z = z;
        }
    }
};

int builtin_phi_kinks(const Constraint& phi, double out[2]) {
    switch (phi.form) {
        case ConstraintForm::kBand:
            if (phi.k == 0.0) {
                out[0] = 0.0;
                return 1;
            }
            out[0] = -phi.k;
            out[1] = phi.k;
            return 2;
        case ConstraintForm::kFloor:
            out[0] = phi.k;
            return 1;
        case ConstraintForm::kSign:
            out[0] = 0.0;
            return 1;
        default:
            return 0;
    }
}

// Slope of a builtin penalty on the open linear piece containing z.
double phi_slope_at(const Constraint& phi, double z) {
    switch (phi.form) {
        case ConstraintForm::kBand:
            return z < -phi.k ? -1.0 : (z > phi.k ? 1.0 : 0.0);
        case ConstraintForm::kFloor:
            return z < phi.k ? -1.0 : 0.0;
        case ConstraintForm::kSign:
            return z < 0.0 ? -1.0 : 0.0;
        case ConstraintForm::kNone:
            return 0.0;
        default:
            assert(false);
            return 0.0;
    }
}

// Slope of a piecewise-linear builtin driver on the piece containing z.
double g_slope_at(const Driver& g, double z) {
    switch (g.form) {
        case DriverForm::kZero:
            return 0.0;
        case DriverForm::kLinear:
            return g.mu;
        case DriverForm::kAbs:
            return z < 0.0 ? -g.mu : g.mu;
        default:
            assert(false);
            return 0.0;
    }
}

bool is_builtin_constraint(const Constraint& phi) {
    return phi.form == ConstraintForm::kBand || phi.form == ConstraintForm::kFloor ||
           phi.form == ConstraintForm::kSign;
}

NodeUpdate plain_update(const Driver& g, double t, double dt, double s,
                        double y_up, double y_down) {
    const double mean = 0.5 * (y_up + y_down);
    const double z = (y_up - y_down) / (2.0 * s);
    return {mean + g.eval(t, z) * dt, z, 0.0};
}

// Numeric minimization path for custom drivers or penalties: expand a bracket
// around the finite-difference control until the objective rises on both
// sides, coarse-scan it, refine by golden section, then snap to structural
// candidates. Assumes a convex (or at least unimodal-after-scan) objective.
double numeric_minimizer(const NodeObjective& obj, const Constraint& phi, double m) {
    const double z_fd = obj.z_fd;
    const double j_center = obj(z_fd);
    double radius = 1.0 + std::fabs(z_fd);
    const double max_radius = 0x1p40 * (1.0 + std::fabs(z_fd));
    double lo = z_fd - radius;
    double hi = z_fd + radius;
    while (obj(lo) < j_center || obj(hi) < j_center) {
        radius *= 2.0;
        if (radius > max_radius) {
            throw DivergenceError(
                "penalized step: objective still descending after bracket expansion to "
                "radius " + format_double(radius) +
                " (driver slope outruns the penalty; no supersolution at this weight)",
                radius, m);
        }
        lo = z_fd - radius;
        hi = z_fd + radius;
    }

    constexpr int kCoarse = 256;
    int best_i = 0;
    double best = kInf;
    for (int i = 0; i <= kCoarse; ++i) {
        const double z = lo + (hi - lo) * (static_cast<double>(i) / kCoarse);
        const double v = obj(z);
        if (v < best) {
            best = v;
            best_i = i;
        }
    }
    double a = lo + (hi - lo) * (static_cast<double>(std::max(best_i - 1, 0)) / kCoarse);
    double b = lo + (hi - lo) * (static_cast<double>(std::min(best_i + 1, kCoarse)) / kCoarse);
    constexpr double kInvPhi = 0.6180339887498949;
    double c = b - kInvPhi * (b - a);
    double d = a + kInvPhi * (b - a);
    double fc = obj(c);
    double fd = obj(d);
    const double z_tol = 1e-10 * (1.0 + std::fabs(z_fd));
    while (b - a > z_tol) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - kInvPhi * (b - a);
            fc = obj(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + kInvPhi * (b - a);
            fd = obj(d);
        }
    }
    const double z_gs = 0.5 * (a + b);

    CandidatePick pick{z_fd};
    pick.offer(z_gs, obj(z_gs));
    pick.offer(z_fd, j_center);
    pick.offer(0.0, obj(0.0));
    double kinks[2];
    const int nk = builtin_phi_kinks(phi, kinks);
    for (int i = 0; i < nk; ++i) pick.offer(kinks[i], obj(kinks[i]));
    return pick.best_z;
}

// Exact minimizer for builtin drivers against builtin penalties: the
// objective is piecewise linear or piecewise quadratic, so the minimum sits
// at a breakpoint or at a per-piece stationary point.
double exact_minimizer(const NodeObjective& obj, const Driver& g, const Constraint& phi,
                       double m) {
    const double dt = obj.dt;
    const double s = obj.s;
    const double z_fd = obj.z_fd;

    double breakpoints[4];
    int nb = 0;
    breakpoints[nb++] = z_fd;
    double kinks[2];
    const int nk = builtin_phi_kinks(phi, kinks);
    for (int i = 0; i < nk; ++i) breakpoints[nb++] = kinks[i];
    if (g.form == DriverForm::kAbs) breakpoints[nb++] = 0.0;
    std::sort(breakpoints, breakpoints + nb);

    CandidatePick pick{z_fd};
    for (int i = 0; i < nb; ++i) pick.offer(breakpoints[i], obj(breakpoints[i]));

    if (g.form == DriverForm::kQuadratic) {
        // Stationary point of each smooth piece: branch slope sigma = -+s,
        // penalty slope q in {-1, 0, +1}, driver slope z/gamma.
        for (int piece = 0; piece <= nb; ++piece) {
            const double lo = piece == 0 ? -kInf : breakpoints[piece - 1];
            const double hi = piece == nb ? kInf : breakpoints[piece];
            if (lo >= hi) continue;
            double probe;
            if (piece == 0) {
                probe = hi - 1.0;
            } else if (piece == nb) {
                probe = lo + 1.0;
            } else {
                probe = 0.5 * (lo + hi);
            }
            const double sigma = probe < z_fd ? -s : s;
            const double q = phi_slope_at(phi, probe);
            const double z_v = -g.gamma * (sigma / dt + m * q);
            if (z_v > lo && z_v < hi) pick.offer(z_v, obj(z_v));
        }
    } else {
        // Piecewise linear: check that both infinite rays ascend, otherwise
        // the node objective (hence the penalized value) is unbounded below.
        const double far = 1e300;
        const double slope_left = -s + (g_slope_at(g, -far) + m * phi_slope_at(phi, -far)) * dt;
        const double slope_right = s + (g_slope_at(g, far) + m * phi_slope_at(phi, far)) * dt;
        if (slope_left > 0.0 || slope_right < 0.0) {
            throw DivergenceError(
                "penalized step: node objective is unbounded below "
                "(|driver slope| * sqrt(dt) >= 1 past the penalty kinks; "
                "no supersolution at this weight)",
                kInf, m);
        }
    }
    return pick.best_z;
}

NodeUpdate penalized_update(const Driver& g, const Constraint& phi, double m,
                            double t, double dt, double s, double y_up, double y_down) {
    const double mean = 0.5 * (y_up + y_down);
    const double z_fd = (y_up - y_down) / (2.0 * s);
    const NodeObjective obj{g, phi, m, t, dt, s, y_up, y_down, mean, z_fd};

    const bool builtin_g = g.form == DriverForm::kZero || g.form == DriverForm::kLinear ||
                           g.form == DriverForm::kAbs || g.form == DriverForm::kQuadratic;
    const double z = builtin_g && is_builtin_constraint(phi)
                         ? exact_minimizer(obj, g, phi, m)
                         : numeric_minimizer(obj, phi, m);

    const double y = obj(z);
    if (!(std::fabs(y) <= kDivergenceGuard)) {
        throw DivergenceError("penalized step: node value magnitude " + format_double(y) +
                                  " exceeded the guard " + format_double(kDivergenceGuard),
                              std::fabs(y), m);
    }
    // A node whose minimizer is the finite-difference control with zero
    // penalty is exactly the plain node: its residual is zero by
    // construction, so do not measure it back out of rounded sums.
    if (z == z_fd && m * phi.eval(t, z) == 0.0) return {y, z, 0.0};
    const double g_dt = g.eval(t, z) * dt;
    double dc = y - mean - g_dt;
    if (dc < 0.0) dc = 0.0;  // clamp rounding dust on binding nodes
    return {y, z, dc};
}

enum class Scheme { kPlain, kPenalized };

Solution run_backward(const Driver& g, const Constraint& phi, double m, Scheme scheme,
                      const Claim& claim, const Lattice& lattice) {
    if (!g.eval) throw ValidationError("solver: driver eval must be callable");
    if (scheme == Scheme::kPenalized && !phi.eval) {
        throw ValidationError("solver: constraint eval must be callable");
    }
    const int n = lattice.num_steps();
    const double dt = lattice.dt();
    const double s = lattice.sqrt_dt();

    Solution sol;
    sol.driver_id = g.id;
    sol.constraint_id = scheme == Scheme::kPenalized ? phi.id : "none";
    sol.layout = claim.terminal_in_w() ? SolutionLayout::kLevel : SolutionLayout::kDense;
    const bool level = sol.layout == SolutionLayout::kLevel;
    if (!level) lattice.require_dense_solve("backward solve over a path-dependent claim");

    sol.y.resize(static_cast<std::size_t>(n) + 1);
    sol.z.resize(static_cast<std::size_t>(n));
    sol.c_increments.resize(static_cast<std::size_t>(n));

    if (level) {
        sol.y[n].resize(static_cast<std::size_t>(n) + 1);
        for (int j = 0; j <= n; ++j) sol.y[n][j] = claim.value_w(lattice.w_level(n, j));
    } else {
        sol.y[n].resize(lattice.paths_at(n));
        for (std::uint64_t p = 0; p < lattice.paths_at(n); ++p) {
            sol.y[n][p] = claim.value_path(lattice, p);
        }
    }

    for (int i = n - 1; i >= 0; --i) {
        const double t = lattice.time_at(i);
        const std::vector<double>& next = sol.y[i + 1];
        const std::uint64_t nodes = level ? static_cast<std::uint64_t>(i) + 1 : lattice.paths_at(i);
        sol.y[i].resize(nodes);
        sol.z[i].resize(nodes);
        sol.c_increments[i].resize(nodes);
        for (std::uint64_t k = 0; k < nodes; ++k) {
            const double y_up = level ? next[k] : next[2 * k];
            const double y_down = level ? next[k + 1] : next[2 * k + 1];
            const NodeUpdate u = scheme == Scheme::kPlain
                                     ? plain_update(g, t, dt, s, y_up, y_down)
                                     : penalized_update(g, phi, m, t, dt, s, y_up, y_down);
            sol.y[i][k] = u.y;
            sol.z[i][k] = u.z;
            sol.c_increments[i][k] = u.dc;
        }
    }
    return sol;
}

}  // namespace

Solution solve_g(const Driver& g, const Claim& claim, const Lattice& lattice) {
    return run_backward(g, no_constraint(), 0.0, Scheme::kPlain, claim, lattice);
}

Solution solve_penalized(const Driver& g, const Constraint& phi, double m,
                         const Claim& claim, const Lattice& lattice) {
    if (!(m > 0.0) || !std::isfinite(m)) {
        throw ValidationError("solver: penalty weight m must be a positive finite real, got " +
                              format_double(m));
    }
    if (!phi.eval) throw ValidationError("solver: constraint eval must be callable");
    Solution sol = phi.is_none()
                       ? run_backward(g, phi, m, Scheme::kPlain, claim, lattice)
                       : run_backward(g, phi, m, Scheme::kPenalized, claim, lattice);
    sol.constraint_id = phi.id;
    sol.penalty_m = m;
    return sol;
}

MinimalSolution solve_constrained(const Driver& g, const Constraint& phi,
                                  const Claim& claim, const Lattice& lattice,
                                  const SolverConfig& config) {
    if (!(config.tol > 0.0) || !std::isfinite(config.tol)) {
        throw ValidationError("solver: tol must be a positive finite real");
    }
    if (!(config.m0 > 0.0) || !std::isfinite(config.m0)) {
        throw ValidationError("solver: m0 must be a positive finite real");
    }
    if (!(config.m_cap >= config.m0) || !std::isfinite(config.m_cap)) {
        throw ValidationError("solver: m_cap must be finite and >= m0");
    }

    if (phi.is_none()) {
        MinimalSolution out;
        out.solution = solve_penalized(g, phi, config.m0, claim, lattice);
        out.m_final = config.m0;
        out.convergence_gap = 0.0;
        out.phi_residual = 0.0;
        return out;
    }

    Solution prev = solve_penalized(g, phi, config.m0, claim, lattice);
    double m = config.m0;
    double last_gap = kInf;
    for (;;) {
        const double next_m = 2.0 * m;
        if (next_m > config.m_cap) {
            throw NonConvergenceError(
                "penalty ladder exhausted: gap " + format_double(last_gap) +
                    " still above tol " + format_double(config.tol) + " at weight " +
                    format_double(m) + " (cap " + format_double(config.m_cap) + ")",
                last_gap, m);
        }
        Solution cur = solve_penalized(g, phi, next_m, claim, lattice);
        double gap = 0.0;
        double min_delta = 0.0;
        for (std::size_t i = 0; i < cur.y.size(); ++i) {
            for (std::size_t k = 0; k < cur.y[i].size(); ++k) {
                const double d = cur.y[i][k] - prev.y[i][k];
                gap = std::max(gap, std::fabs(d));
                min_delta = std::min(min_delta, d);
            }
        }
        if (min_delta < -kLadderMonotoneSlack) {
            // Penalized values are nondecreasing in the weight by construction;
            // a real decrease means the minimizer is broken, not the input.
            throw std::logic_error("penalty ladder: iterate decreased by " +
                                   format_double(-min_delta) + " between weights " +
                                   format_double(m) + " and " + format_double(next_m));
        }
        if (gap < config.tol) {
            MinimalSolution out;
            out.m_final = next_m;
            out.convergence_gap = gap;
            out.phi_residual = max_phi_times_dt(cur, phi, lattice);
            out.solution = std::move(cur);
            return out;
        }
        prev = std::move(cur);
        m = next_m;
        last_gap = gap;
    }
}

std::vector<double> evaluate_at(const Solution& solution, int t_step) {
    if (t_step < 0 || t_step > solution.num_steps()) {
        throw ValidationError("evaluate_at: step " + std::to_string(t_step) +
                              " outside 0.." + std::to_string(solution.num_steps()));
    }
    return solution.y[t_step];
}

double supersolution_residual(const Solution& solution, const Driver& g,
                              const Lattice& lattice) {
    if (!g.eval) throw ValidationError("supersolution_residual: driver eval must be callable");
    if (lattice.num_steps() != solution.num_steps()) {
        throw ValidationError("supersolution_residual: lattice depth " +
                              std::to_string(lattice.num_steps()) +
                              " does not match the solution depth " +
                              std::to_string(solution.num_steps()));
    }
    const bool level = solution.layout == SolutionLayout::kLevel;
    const double dt = lattice.dt();
    double worst = 0.0;
    for (int i = 0; i < solution.num_steps(); ++i) {
        const double t = lattice.time_at(i);
        const std::vector<double>& next = solution.y[i + 1];
        for (std::size_t k = 0; k < solution.y[i].size(); ++k) {
            const double y_up = level ? next[k] : next[2 * k];
            const double y_down = level ? next[k + 1] : next[2 * k + 1];
            const double mean = 0.5 * (y_up + y_down);
            const double rebuilt =
                mean + g.eval(t, solution.z[i][k]) * dt + solution.c_increments[i][k];
            worst = std::max(worst, std::fabs(solution.y[i][k] - rebuilt));
        }
    }
    return worst;
}

double max_phi_times_dt(const Solution& solution, const Constraint& phi,
                        const Lattice& lattice) {
    if (!phi.eval) throw ValidationError("max_phi_times_dt: constraint eval must be callable");
    if (lattice.num_steps() != solution.num_steps()) {
        throw ValidationError("max_phi_times_dt: lattice depth " +
                              std::to_string(lattice.num_steps()) +
                              " does not match the solution depth " +
                              std::to_string(solution.num_steps()));
    }
    const double dt = lattice.dt();
    double worst = 0.0;
    for (int i = 0; i < solution.num_steps(); ++i) {
        const double t = lattice.time_at(i);
        for (double z : solution.z[i]) {
            worst = std::max(worst, phi.eval(t, z) * dt);
        }
    }
    return worst;
}

}  // namespace cbsde
