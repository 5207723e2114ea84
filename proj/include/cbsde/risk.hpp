#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cbsde/solver.hpp"

namespace cbsde {

// A dynamic convex risk measure induced by a constrained backward solve:
// rho(xi) = y_0 of the minimal constrained supersolution with terminal -xi.
// Requires a driver vanishing at z = 0 and a constraint vanishing at z = 0,
// which together normalize rho(0) = 0.
struct RiskMeasure {
    Driver driver;
    Constraint constraint;
    Lattice lattice;
    SolverConfig config;
};

// Validates the normalization preconditions (throws ValidationError).
RiskMeasure make_risk_measure(Driver driver, Constraint constraint, Lattice lattice,
                              SolverConfig config = {});

double rho(const RiskMeasure& rm, const Claim& claim);
// The step-t slice of the dynamic risk of the claim (down-count order when
// the negated claim recombines, path-code order otherwise).
std::vector<double> dynamic_rho(const RiskMeasure& rm, const Claim& claim, int t_step);

// Worst violations of the risk-measure axioms over a sample of claims.
// homogeneity is checked only when both the driver and the constraint are
// positively homogeneous (coherence case); otherwise it is left empty.
// The tail sequence floors the claim at -n for n = 1..8; on a finite tree it
// reaches the claim itself once n passes the bound, so fatou_gap compares the
// final term against rho(claim) and fatou_monotone tracks the direction.
struct AxiomReport {
    double convexity = 0.0;
    double monotonicity = 0.0;
    double translation = 0.0;
    std::optional<double> homogeneity;
    bool fatou_monotone = true;
    double fatou_gap = 0.0;
};

AxiomReport axiom_suite(const RiskMeasure& rm, const std::vector<Claim>& claims);

// Closed-form optimal proportional share gamma/(gamma + lam) transferred to
// the agent with tolerance gamma when both agents dilate a common base.
double transfer_proportional_optimum(double gamma, double lam);

// Sweep of rho1(eta - alpha*eta) + rho2(alpha*eta) over a grid of alphas.
// best_alpha is the earliest grid point attaining the minimum (up to a
// 1e-12 relative slack, so flat curves resolve to the smallest alpha).
struct SweepResult {
    double best_alpha = 0.0;
    double best_total = 0.0;
    std::vector<std::pair<double, double>> curve;  // (alpha, total)
};

SweepResult transfer_sweep(const RiskMeasure& rm1, const RiskMeasure& rm2,
                           const Claim& eta, const std::vector<double>& alphas);

// Constructive optimal risk transfer between agents with drivers g1, g2 under
// a common constraint. Builds g3 = infconv(g1, g2), solves the g3-constrained
// backward problem with terminal eta (no negation: values are nonlinear
// expectations; convert with rho(xi) = E(-xi) at the boundary), reads the
// per-node control zhat3, selects zhat = infconv_argmin(g3, t, zhat3), and
// accumulates forward yhat_0 = 0, delta yhat = -g2(t, zhat) dt + zhat dW.
// The allocation is xi* = yhat(T).
struct TransferResult {
    Claim allocation = Claim::constant(0.0);  // xi*, a terminal table claim
    double split1 = 0.0;        // E^{g1,phi}_0(eta - xi*)
    double split2 = 0.0;        // E^{g2,phi}_0(xi*)
    double total = 0.0;         // split1 + split2
    double baseline = 0.0;      // E^{g3,phi}_0(eta)
    double equality_gap = 0.0;  // |baseline - total|
    double phi_zhat_residual = 0.0;   // max phi(t, zhat)
    double phi_zdiff_residual = 0.0;  // max phi(t, zhat3 - zhat)
    bool hypothesis_ok = true;  // both residuals within tol
    std::vector<std::vector<double>> zhat;   // per step, path-code order
    std::vector<std::vector<double>> zhat3;  // per step, path-code order
};

TransferResult optimal_transfer_construct(const Driver& g1, const Driver& g2,
                                          const Constraint& phi, const Claim& eta,
                                          const Lattice& lattice,
                                          const SolverConfig& config = {});

// Named property checks with their tolerances, for the verify command and the
// test suites: risk axioms, comparison, solver-level convexity, dilatation
// identity, tail continuity, and penalization monotonicity.
struct PropertyCheck {
    std::string name;
    double violation = 0.0;
    double tolerance = 0.0;
    bool pass = true;
};

struct PropertyReport {
    std::vector<PropertyCheck> checks;
    bool all_pass = true;
};

PropertyReport run_property_suite(const RiskMeasure& rm, std::uint64_t seed, int samples);

}  // namespace cbsde
