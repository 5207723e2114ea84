#include "cbsde/lattice.hpp"

#include <bit>
#include <cassert>
#include <cmath>
#include <string>

#include "cbsde/claim.hpp"
#include "cbsde/errors.hpp"

namespace cbsde {

Lattice::Lattice(int num_steps, double horizon, int step_cap)
    : num_steps_(num_steps), horizon_(horizon) {
    if (num_steps < 1) {
        throw ValidationError("lattice: num_steps must be >= 1, got " +
                              std::to_string(num_steps));
    }
    if (!(horizon > 0.0) || !std::isfinite(horizon)) {
        throw ValidationError("lattice: horizon must be a positive finite real");
    }
    if (step_cap < 1) {
        throw ValidationError("lattice: step cap must be >= 1, got " +
                              std::to_string(step_cap));
    }
    if (num_steps > step_cap) {
        throw SizeError("lattice: num_steps " + std::to_string(num_steps) +
                        " exceeds the cap " + std::to_string(step_cap) +
                        " (node count doubles per step; raise the cap explicitly "
                        "to opt in to recombining-only sizes)");
    }
    dt_ = horizon_ / num_steps_;
    sqrt_dt_ = std::sqrt(dt_);
}

double Lattice::w_path(int step, std::uint64_t path) const {
    assert(step >= 0 && step <= num_steps_);
    assert(step <= kAbsoluteStepCap);
    assert(step == kAbsoluteStepCap || path < (std::uint64_t{1} << step));
    int downs = std::popcount(path);
    return sqrt_dt_ * (step - 2 * downs);
}

double Lattice::w_level(int step, int downs) const {
    assert(step >= 0 && step <= num_steps_);
    assert(downs >= 0 && downs <= step);
    return sqrt_dt_ * (step - 2 * downs);
}

void Lattice::require_enumerable(const char* operation) const {
    if (num_steps_ > kEnumerationStepCap) {
        throw SizeError(std::string(operation) + ": requires enumerating 2^" +
                        std::to_string(num_steps_) + " paths; supported only up to " +
                        std::to_string(kEnumerationStepCap) + " steps");
    }
}

void Lattice::require_dense_solve(const char* operation) const {
    if (num_steps_ > kDenseSolveStepCap) {
        throw SizeError(std::string(operation) + ": requires one value per path prefix at " +
                        std::to_string(num_steps_) + " steps; supported only up to " +
                        std::to_string(kDenseSolveStepCap) +
                        " steps (payoffs of W_T alone recombine and have no such limit)");
    }
}

Lattice build_lattice(int num_steps, double horizon) {
    return Lattice(num_steps, horizon);
}

double expectation(const Lattice& lattice, const Claim& claim) {
    lattice.require_enumerable("expectation");
    const int n = lattice.num_steps();
    const std::uint64_t paths = lattice.paths_at(n);
    double sum = 0.0;
    for (std::uint64_t p = 0; p < paths; ++p) {
        sum += claim.value_path(lattice, p);
    }
    return sum / static_cast<double>(paths);
}

std::vector<double> conditional_expectation(const Lattice& lattice,
                                            const std::vector<double>& values_at_next_step) {
    const std::size_t n = values_at_next_step.size();
    if (n < 2 || !std::has_single_bit(n)) {
        throw ValidationError("conditional_expectation: input must hold all 2^(i+1) nodes "
                              "of a step, got " + std::to_string(n) + " values");
    }
    const int next_step = std::bit_width(n) - 1;  // n == 2^next_step
    if (next_step > lattice.num_steps()) {
        throw ValidationError("conditional_expectation: input step " +
                              std::to_string(next_step) + " exceeds the lattice depth " +
                              std::to_string(lattice.num_steps()));
    }
    std::vector<double> parents(n / 2);
    for (std::size_t p = 0; p < parents.size(); ++p) {
        parents[p] = 0.5 * (values_at_next_step[2 * p] + values_at_next_step[2 * p + 1]);
    }
    return parents;
}

}  // namespace cbsde
