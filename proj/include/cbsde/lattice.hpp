#pragma once

#include <cstdint>
#include <vector>

namespace cbsde {

// Largest step count accepted without an explicit opt-in cap.
inline constexpr int kDefaultStepCap = 20;
// Hard ceiling for any operation that enumerates all 2^N terminal paths.
inline constexpr int kEnumerationStepCap = 24;
// Hard ceiling for solves that store one value per path prefix.
inline constexpr int kDenseSolveStepCap = 20;
// Path prefixes are stored in 64-bit codes, one bit per step, so path-code
// addressing stops at this depth. Recombining (level-indexed) solves have no
// such limit; trees deeper than this only support level addressing.
inline constexpr int kAbsoluteStepCap = 63;

// Binary scenario tree for a one-dimensional Brownian motion on [0, horizon]:
// num_steps steps of size dt = horizon/num_steps, increments +-sqrt(dt) with
// probability 1/2 each. Nodes at step i are addressed either by a path-prefix
// code (bit k of the code is the move taken at step i-k; a set bit is a down
// move; the children of (i, p) are (i+1, 2p) up and (i+1, 2p+1) down) or, for
// quantities that depend on the path only through the running Brownian value,
// by the number of down moves taken so far. Immutable after construction; all
// member functions are pure.
class Lattice {
public:
    Lattice(int num_steps, double horizon, int step_cap = kDefaultStepCap);

    int num_steps() const { return num_steps_; }
    double horizon() const { return horizon_; }
    double dt() const { return dt_; }
    double sqrt_dt() const { return sqrt_dt_; }

    double time_at(int step) const { return step * dt_; }
    // Meaningful only up to kAbsoluteStepCap; every path-enumerating caller
    // is gated well below that by the require_* guards.
    std::uint64_t paths_at(int step) const { return std::uint64_t{1} << step; }

    // Brownian value at a node, by path-prefix code or by down-move count.
    double w_path(int step, std::uint64_t path) const;
    double w_level(int step, int downs) const;

    static std::uint64_t up_child(std::uint64_t path) { return path << 1; }
    static std::uint64_t down_child(std::uint64_t path) { return (path << 1) | 1; }

    // Throw SizeError when the operation named would be intractable here.
    void require_enumerable(const char* operation) const;
    void require_dense_solve(const char* operation) const;

private:
    int num_steps_;
    double horizon_;
    double dt_;
    double sqrt_dt_;
};

Lattice build_lattice(int num_steps, double horizon);

class Claim;

// Mean of the claim over all 2^num_steps terminal paths.
double expectation(const Lattice& lattice, const Claim& claim);

// One backward step of conditional expectation: the input holds all 2^(i+1)
// values at some step i+1 in path-code order; the result holds the 2^i
// parent means (value_up + value_down)/2.
std::vector<double> conditional_expectation(const Lattice& lattice,
                                            const std::vector<double>& values_at_next_step);

}  // namespace cbsde
