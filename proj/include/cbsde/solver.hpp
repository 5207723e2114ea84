#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cbsde/claim.hpp"
#include "cbsde/constraint.hpp"
#include "cbsde/driver.hpp"
#include "cbsde/lattice.hpp"

namespace cbsde {

// Magnitude guard for penalized sweeps; exceeding it signals that the
// constraint likely admits no supersolution for the claim.
inline constexpr double kDivergenceGuard = 1e12;

enum class SolutionLayout { kDense, kLevel };

// Node-indexed (y, z, deltaC) triple produced by a backward solve. Vectors
// are indexed by step; entry counts depend on the layout: 2^i per step for
// kDense (path-code order), i+1 for kLevel (down-move count order). y covers
// steps 0..N, z and c_increments cover 0..N-1.
//
// z holds the control actually used by the scheme. It equals the
// finite-difference integrand (y_up - y_down) / (2 sqrt(dt)) wherever the
// constraint is slack, and in particular everywhere for unconstrained solves.
// c_increments holds the nonnegative local increment of the increasing
// process that makes y a supersolution for the plain driver:
//   y = (y_up + y_down)/2 + g(t, z) dt + deltaC.
struct Solution {
    SolutionLayout layout = SolutionLayout::kLevel;
    std::vector<std::vector<double>> y;
    std::vector<std::vector<double>> z;
    std::vector<std::vector<double>> c_increments;
    std::string driver_id;
    std::string constraint_id;
    std::optional<double> penalty_m;

    int num_steps() const { return static_cast<int>(y.size()) - 1; }
    double y0() const { return y[0][0]; }
};

struct SolverConfig {
    double tol = 1e-6;
    double m0 = 1.0;
    double m_cap = 1048576.0;  // 2^20
};

// Converged limit of the penalty ladder plus convergence diagnostics.
// phi_residual is max over non-terminal nodes of phi(t, z) * dt.
struct MinimalSolution {
    Solution solution;
    double m_final = 0.0;
    double convergence_gap = 0.0;
    double phi_residual = 0.0;
};

// Unconstrained backward induction: terminal layer y_N = claim; then per node
// z = (y_up - y_down)/(2 sqrt dt), y = (y_up + y_down)/2 + g(t, z) dt.
Solution solve_g(const Driver& g, const Claim& claim, const Lattice& lattice);

// Penalized backward induction with weight m: each node takes the cheapest
// admissible control,
//   y = min_z [ max(y_up - z sqrt dt, y_down + z sqrt dt)
//               + (g(t, z) + m phi(t, z)) dt ],
// which prices one step of the cheapest supersolution whose increasing part
// may act on either branch. Wherever the penalty is slack the minimum sits at
// the finite-difference z and the update coincides with solve_g bit for bit.
// The slack absorbed at the chosen control is recorded in c_increments, so
// the Solution reads as a supersolution candidate for the plain driver g.
Solution solve_penalized(const Driver& g, const Constraint& phi, double m,
                         const Claim& claim, const Lattice& lattice);

// Doubling penalty ladder m0, 2 m0, 4 m0, ... until the sup-node gap between
// successive iterates drops below tol (NonConvergenceError past m_cap;
// DivergenceError propagates). Iterates are monotone nondecreasing nodewise.
MinimalSolution solve_constrained(const Driver& g, const Constraint& phi,
                                  const Claim& claim, const Lattice& lattice,
                                  const SolverConfig& config = {});

// The y-slice at a step (path-code or down-count order per the layout).
std::vector<double> evaluate_at(const Solution& solution, int t_step);

// Diagnostics: the worst violation of the supersolution identity when y is
// rebuilt from (z, c_increments, terminal values), and the largest penalty
// mass phi(t, z) * dt left on the stored controls.
double supersolution_residual(const Solution& solution, const Driver& g, const Lattice& lattice);
double max_phi_times_dt(const Solution& solution, const Constraint& phi, const Lattice& lattice);

}  // namespace cbsde
