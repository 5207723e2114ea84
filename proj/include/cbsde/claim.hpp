#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "cbsde/lattice.hpp"

namespace cbsde {

// A bounded terminal payoff on the tree. Payoffs are arbitrary functions of
// the full terminal path; payoffs that depend on the path only through the
// terminal Brownian value advertise that via terminal_in_w(), which unlocks
// the recombining (level-indexed) solver fast path. Immutable value object.
class Claim {
public:
    static Claim constant(double value);
    // Payoff f(W_T). `bound` must dominate |f| on every reachable terminal value.
    static Claim from_terminal_w(std::function<double(double)> f, double bound);
    // Arbitrary path functional; `f` receives the lattice and the terminal
    // path code. `bound` must dominate |f| over all paths.
    static Claim from_path(std::function<double(const Lattice&, std::uint64_t)> f, double bound);
    // Explicit table indexed by terminal path code. The table is tied to the
    // path count of the lattice it was built from.
    static Claim from_terminal_values(const Lattice& lattice, std::vector<double> values);

    bool terminal_in_w() const { return static_cast<bool>(w_eval_); }
    double bound() const { return bound_; }

    double value_path(const Lattice& lattice, std::uint64_t path) const {
        return path_eval_(lattice, path);
    }
    // Only valid when terminal_in_w().
    double value_w(double w_terminal) const { return w_eval_(w_terminal); }

    Claim negated() const;
    Claim scaled(double factor) const;
    Claim shifted(double offset) const;
    Claim floored_at(double floor_value) const;  // pointwise max(payoff, floor_value)
    Claim capped_at(double cap_value) const;     // pointwise min(payoff, cap_value)
    static Claim sum(const Claim& a, const Claim& b);
    static Claim difference(const Claim& a, const Claim& b);
    static Claim pointwise_max(const Claim& a, const Claim& b);

private:
    Claim() = default;

    std::function<double(double)> w_eval_;                            // set iff terminal-in-W
    std::function<double(const Lattice&, std::uint64_t)> path_eval_;  // always set
    double bound_ = 0.0;
};

// Reproducible bounded test claims: a*tanh(b*W_T) + c*1{W at step N/2 > 0}
// with |a| in [0.2, 0.8], b in [0.5, 2], c in [-0.3, 0.3] drawn from a fixed
// generator. The claims are path-dependent (not functions of W_T alone).
std::vector<Claim> sample_bounded_claims(const Lattice& lattice, std::uint64_t seed, int count);

}  // namespace cbsde
