#include "cbsde/risk.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <utility>

#include "cbsde/errors.hpp"
#include "cbsde/format.hpp"

namespace cbsde {

namespace {

// Fixed penalty weight for scaling identities checked outside the ladder, so
// both sides of an identity see the same weight.
constexpr double kIdentityPenaltyWeight = 1024.0;

void validate_solver_config(const SolverConfig& config) {
    if (!(config.tol > 0.0) || !std::isfinite(config.tol)) {
        throw ValidationError("risk measure: tol must be a positive finite real");
    }
    if (!(config.m0 > 0.0) || !std::isfinite(config.m0)) {
        throw ValidationError("risk measure: m0 must be a positive finite real");
    }
    if (!(config.m_cap >= config.m0) || !std::isfinite(config.m_cap)) {
        throw ValidationError("risk measure: m_cap must be finite and >= m0");
    }
}

double max_node_excess(const Solution& a, const Solution& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.y.size(); ++i) {
        for (std::size_t k = 0; k < a.y[i].size(); ++k) {
            worst = std::max(worst, a.y[i][k] - b.y[i][k]);
        }
    }
    return worst;
}

// True when some node's control departs from the finite-difference integrand
// of its own children. That is the binding case: the scheme recompute of
// (y_up - y_down) / (2 sqrt dt) matches the stored control bit for bit
// wherever the penalty stayed slack. Note that penalty mass alone cannot
// detect this: a control clamped exactly onto the admissible set's boundary
// carries zero mass but is still not the finite-difference integrand.
bool uses_non_fd_control(const Solution& sol, const Lattice& lattice) {
    const double s = lattice.sqrt_dt();
    const bool level = sol.layout == SolutionLayout::kLevel;
    for (std::size_t i = 0; i < sol.z.size(); ++i) {
        for (std::size_t k = 0; k < sol.z[i].size(); ++k) {
            const double y_up = level ? sol.y[i + 1][k] : sol.y[i + 1][2 * k];
            const double y_down = level ? sol.y[i + 1][k + 1] : sol.y[i + 1][2 * k + 1];
            if (sol.z[i][k] != (y_up - y_down) / (2.0 * s)) return true;
        }
    }
    return false;
}

}  // namespace

RiskMeasure make_risk_measure(Driver driver, Constraint constraint, Lattice lattice,
                              SolverConfig config) {
    if (!driver.eval) throw ValidationError("risk measure: driver eval must be callable");
    if (!constraint.eval) throw ValidationError("risk measure: constraint eval must be callable");
    validate_solver_config(config);
    if (!constraint.zero_at_zero) {
        throw ValidationError("risk measure: constraint `" + constraint.id +
                              "` does not vanish at z = 0, so rho(0) = 0 fails "
                              "(a positive floor admits no risk-measure normalization)");
    }
    const double probes[] = {0.0, 0.5 * lattice.horizon(), lattice.horizon()};
    for (double t : probes) {
        if (driver.eval(t, 0.0) != 0.0) {
            throw ValidationError("risk measure: driver `" + driver.id +
                                  "` does not vanish at z = 0 (t = " + format_double(t) + ")");
        }
    }
    return {std::move(driver), std::move(constraint), std::move(lattice), config};
}

double rho(const RiskMeasure& rm, const Claim& claim) {
    return solve_constrained(rm.driver, rm.constraint, claim.negated(), rm.lattice, rm.config)
        .solution.y0();
}

std::vector<double> dynamic_rho(const RiskMeasure& rm, const Claim& claim, int t_step) {
    const MinimalSolution ms =
        solve_constrained(rm.driver, rm.constraint, claim.negated(), rm.lattice, rm.config);
    return evaluate_at(ms.solution, t_step);
}

AxiomReport axiom_suite(const RiskMeasure& rm, const std::vector<Claim>& claims) {
    if (claims.empty()) throw ValidationError("axiom_suite: need at least one claim");
    AxiomReport rep;
    const std::size_t n = claims.size();
    std::vector<double> rho_of(n);
    for (std::size_t i = 0; i < n; ++i) rho_of[i] = rho(rm, claims[i]);

    const double lambdas[] = {0.25, 0.5, 0.75};
    const double shifts[] = {-1.0, 0.5, 2.0};
    const double scales[] = {0.5, 2.0, 5.0};
    const bool coherent =
        rm.driver.positively_homogeneous && rm.constraint.positively_homogeneous;
    double homogeneity = 0.0;

    for (std::size_t i = 0; i < n; ++i) {
        const Claim& xi = claims[i];
        if (n > 1) {
            const std::size_t j = (i + 1) % n;
            const Claim& eta = claims[j];
            for (double lam : lambdas) {
                const Claim mix = Claim::sum(xi.scaled(lam), eta.scaled(1.0 - lam));
                const double lhs = rho(rm, mix);
                const double rhs = lam * rho_of[i] + (1.0 - lam) * rho_of[j];
                rep.convexity = std::max(rep.convexity, lhs - rhs);
            }
            const Claim upper = Claim::pointwise_max(xi, eta);
            const double rho_upper = rho(rm, upper);
            rep.monotonicity = std::max({rep.monotonicity, rho_upper - rho_of[i],
                                         rho_upper - rho_of[j]});
        }
        for (double c : shifts) {
            const double shifted = rho(rm, xi.shifted(c));
            rep.translation = std::max(rep.translation, std::fabs(shifted - (rho_of[i] - c)));
        }
        if (coherent) {
            for (double lam : scales) {
                homogeneity = std::max(homogeneity,
                                       std::fabs(rho(rm, xi.scaled(lam)) - lam * rho_of[i]));
            }
        }
        // Tail sequence: flooring at -n relaxes toward the claim itself as n
        // grows, so the risks must climb to rho(xi) and reach it once the
        // floor passes the claim's bound.
        double prev = -std::numeric_limits<double>::infinity();
        double last = 0.0;
        for (int level = 1; level <= 8; ++level) {
            last = rho(rm, xi.floored_at(-static_cast<double>(level)));
            if (level > 1 && last < prev - 1e-12) rep.fatou_monotone = false;
            prev = last;
        }
        rep.fatou_gap = std::max(rep.fatou_gap, std::fabs(last - rho_of[i]));
    }
    if (coherent) rep.homogeneity = homogeneity;
    return rep;
}

double transfer_proportional_optimum(double gamma, double lam) {
    if (!(gamma > 0.0) || !std::isfinite(gamma) || !(lam > 0.0) || !std::isfinite(lam)) {
        throw ValidationError("transfer_proportional_optimum: tolerances must be positive finite");
    }
    return gamma / (gamma + lam);
}

SweepResult transfer_sweep(const RiskMeasure& rm1, const RiskMeasure& rm2,
                           const Claim& eta, const std::vector<double>& alphas) {
    if (alphas.empty()) throw ValidationError("transfer_sweep: alpha grid is empty");
    for (double a : alphas) {
        if (!std::isfinite(a)) throw ValidationError("transfer_sweep: alphas must be finite");
    }
    SweepResult res;
    res.curve.reserve(alphas.size());
    double min_total = std::numeric_limits<double>::infinity();
    for (double a : alphas) {
        const double total = rho(rm1, eta.scaled(1.0 - a)) + rho(rm2, eta.scaled(a));
        res.curve.emplace_back(a, total);
        min_total = std::min(min_total, total);
    }
    // Earliest grid point attaining the minimum, with a relative slack so a
    // flat curve resolves to its smallest alpha.
    const double slack = 1e-12 * (1.0 + std::fabs(min_total));
    for (const auto& [a, total] : res.curve) {
        if (total <= min_total + slack) {
            res.best_alpha = a;
            res.best_total = total;
            break;
        }
    }
    return res;
}

TransferResult optimal_transfer_construct(const Driver& g1, const Driver& g2,
                                          const Constraint& phi, const Claim& eta,
                                          const Lattice& lattice,
                                          const SolverConfig& config) {
    lattice.require_dense_solve("optimal transfer construction");
    const Driver g3 = infconv(g1, g2);
    const MinimalSolution base = solve_constrained(g3, phi, eta, lattice, config);

    const int n = lattice.num_steps();
    const double dt = lattice.dt();
    const double s = lattice.sqrt_dt();
    const bool level = base.solution.layout == SolutionLayout::kLevel;

    TransferResult out;
    out.zhat.resize(static_cast<std::size_t>(n));
    out.zhat3.resize(static_cast<std::size_t>(n));
    std::vector<double> cur{0.0};
    double worst_zhat = 0.0;
    double worst_zdiff = 0.0;
    for (int i = 0; i < n; ++i) {
        const double t = lattice.time_at(i);
        const std::uint64_t nodes = lattice.paths_at(i);
        std::vector<double> next(2 * nodes);
        out.zhat[i].resize(nodes);
        out.zhat3[i].resize(nodes);
        for (std::uint64_t p = 0; p < nodes; ++p) {
            const double z3 =
                level ? base.solution.z[i][std::popcount(p)] : base.solution.z[i][p];
            const double zh = infconv_argmin(g3, t, z3);
            out.zhat3[i][p] = z3;
            out.zhat[i][p] = zh;
            worst_zhat = std::max(worst_zhat, phi.eval(t, zh));
            worst_zdiff = std::max(worst_zdiff, phi.eval(t, z3 - zh));
            const double drifted = cur[p] - g2.eval(t, zh) * dt;
            next[2 * p] = drifted + zh * s;
            next[2 * p + 1] = drifted - zh * s;
        }
        cur = std::move(next);
    }

    out.allocation = Claim::from_terminal_values(lattice, std::move(cur));
    out.split2 = solve_constrained(g2, phi, out.allocation, lattice, config).solution.y0();
    out.split1 =
        solve_constrained(g1, phi, Claim::difference(eta, out.allocation), lattice, config)
            .solution.y0();
    out.total = out.split1 + out.split2;
    out.baseline = base.solution.y0();
    out.equality_gap = std::fabs(out.baseline - out.total);
    out.phi_zhat_residual = worst_zhat;
    out.phi_zdiff_residual = worst_zdiff;
    out.hypothesis_ok = worst_zhat <= config.tol && worst_zdiff <= config.tol;
    return out;
}

PropertyReport run_property_suite(const RiskMeasure& rm, std::uint64_t seed, int samples) {
    if (samples < 2 || samples > 64) {
        throw ValidationError("property suite: samples must be in 2..64");
    }
    const std::vector<Claim> claims = sample_bounded_claims(rm.lattice, seed, samples);

    PropertyReport rep;
    auto add = [&rep](const char* name, double violation, double tolerance) {
        PropertyCheck check{name, violation, tolerance, violation <= tolerance};
        rep.all_pass = rep.all_pass && check.pass;
        rep.checks.push_back(std::move(check));
    };
    const double tol = rm.config.tol;

    const AxiomReport ax = axiom_suite(rm, claims);
    add("convexity", ax.convexity, 3.0 * tol);
    add("monotonicity", ax.monotonicity, 3.0 * tol);
    add("translation", ax.translation, 1e-12);
    if (ax.homogeneity) add("homogeneity", *ax.homogeneity, 1e-10);
    add("fatou_monotonicity", ax.fatou_monotone ? 0.0 : 1.0, 0.0);
    add("fatou_gap", ax.fatou_gap, 10.0 * tol);

    auto solve_claim = [&rm](const Driver& d, const Claim& c) {
        return solve_constrained(d, rm.constraint, c, rm.lattice, rm.config).solution;
    };

    // Comparison: a pointwise-larger terminal payoff must dominate nodewise,
    // and a pointwise-smaller driver must never produce larger values.
    double comparison = 0.0;
    for (std::size_t i = 0; i + 1 < claims.size(); ++i) {
        const Claim upper = Claim::pointwise_max(claims[i], claims[i + 1]);
        const Solution lo = solve_claim(rm.driver, claims[i]);
        const Solution hi = solve_claim(rm.driver, upper);
        comparison = std::max(comparison, max_node_excess(lo, hi));
    }
    std::optional<Driver> smaller;
    if (rm.driver.form == DriverForm::kQuadratic) {
        smaller = quadratic_driver(2.0 * rm.driver.gamma);
    } else if (rm.driver.form == DriverForm::kAbs && rm.driver.mu > 0.0) {
        smaller = abs_driver(0.5 * rm.driver.mu);
    }
    if (smaller) {
        const Solution small = solve_claim(*smaller, claims[0]);
        const Solution big = solve_claim(rm.driver, claims[0]);
        comparison = std::max(comparison, max_node_excess(small, big));
    }
    add("comparison", comparison, 2.0 * tol);

    // Convexity of the solve in its terminal condition.
    double mix_violation = 0.0;
    for (std::size_t i = 0; i + 1 < claims.size(); i += 2) {
        const double e_first = solve_claim(rm.driver, claims[i]).y0();
        const double e_second = solve_claim(rm.driver, claims[i + 1]).y0();
        for (double a : {0.0, 0.25, 0.5, 1.0}) {
            const Claim mix =
                Claim::sum(claims[i].scaled(a), claims[i + 1].scaled(1.0 - a));
            const double e_mix = solve_claim(rm.driver, mix).y0();
            mix_violation =
                std::max(mix_violation, e_mix - (a * e_first + (1.0 - a) * e_second));
        }
    }
    add("mix_convexity", mix_violation, 2.0 * tol);

    // Dilatation identity lam * E^{g}(xi/lam) = E^{g_lam}(xi) at a fixed
    // penalty weight (the doubling ladder can stop at different weights on the
    // two sides, which would blur an exact identity). When the constraint is
    // not positively homogeneous the identity is only implied where the
    // penalty stays slack, so samples where either side pays penalty mass or
    // clamps a control are skipped.
    double dilatation = 0.0;
    for (std::size_t i = 0; i < claims.size(); i += 4) {
        const Claim xi = claims[i].scaled(0.25);
        for (double lam : {0.5, 2.0, 5.0}) {
            const Solution lhs = solve_penalized(rm.driver, rm.constraint,
                                                 kIdentityPenaltyWeight,
                                                 xi.scaled(1.0 / lam), rm.lattice);
            const Solution rhs = solve_penalized(dilate(rm.driver, lam), rm.constraint,
                                                 kIdentityPenaltyWeight, xi, rm.lattice);
            if (!rm.constraint.positively_homogeneous &&
                (max_phi_times_dt(lhs, rm.constraint, rm.lattice) > 0.0 ||
                 max_phi_times_dt(rhs, rm.constraint, rm.lattice) > 0.0 ||
                 uses_non_fd_control(lhs, rm.lattice) ||
                 uses_non_fd_control(rhs, rm.lattice))) {
                continue;
            }
            double worst = 0.0;
            for (std::size_t step = 0; step < lhs.y.size(); ++step) {
                for (std::size_t k = 0; k < lhs.y[step].size(); ++k) {
                    worst = std::max(worst,
                                     std::fabs(lam * lhs.y[step][k] - rhs.y[step][k]));
                }
            }
            dilatation = std::max(dilatation, worst);
        }
    }
    add("dilatation", dilatation, 1e-10);

    // Penalized values are nondecreasing in the weight.
    double penalization = 0.0;
    if (!rm.constraint.is_none()) {
        Solution prev = solve_penalized(rm.driver, rm.constraint, 1.0, claims[0], rm.lattice);
        for (double m : {2.0, 4.0, 8.0}) {
            Solution cur = solve_penalized(rm.driver, rm.constraint, m, claims[0], rm.lattice);
            penalization = std::max(penalization, max_node_excess(prev, cur));
            prev = std::move(cur);
        }
    }
    add("monotone_penalization", penalization, 1e-12);

    return rep;
}

}  // namespace cbsde
