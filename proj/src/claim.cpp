#include "cbsde/claim.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <utility>

#include "cbsde/errors.hpp"

namespace cbsde {

namespace {

void require_finite(double v, const char* what) {
    if (!std::isfinite(v)) {
        throw ValidationError(std::string("claim: ") + what + " must be finite");
    }
}

// Uniform draw in [0, 1) with a platform-independent bit recipe, so sampled
// claims are reproducible from the seed alone.
double next_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

Claim Claim::constant(double value) {
    require_finite(value, "constant value");
    Claim c;
    c.w_eval_ = [value](double) { return value; };
    c.path_eval_ = [value](const Lattice&, std::uint64_t) { return value; };
    c.bound_ = std::fabs(value);
    return c;
}

Claim Claim::from_terminal_w(std::function<double(double)> f, double bound) {
    if (!f) throw ValidationError("claim: payoff function must be callable");
    if (!(bound >= 0.0) || !std::isfinite(bound)) {
        throw ValidationError("claim: bound must be a nonnegative finite real");
    }
    Claim c;
    c.w_eval_ = f;
    c.path_eval_ = [f](const Lattice& lattice, std::uint64_t path) {
        return f(lattice.w_path(lattice.num_steps(), path));
    };
    c.bound_ = bound;
    return c;
}

Claim Claim::from_path(std::function<double(const Lattice&, std::uint64_t)> f, double bound) {
    if (!f) throw ValidationError("claim: payoff function must be callable");
    if (!(bound >= 0.0) || !std::isfinite(bound)) {
        throw ValidationError("claim: bound must be a nonnegative finite real");
    }
    Claim c;
    c.path_eval_ = std::move(f);
    c.bound_ = bound;
    return c;
}

Claim Claim::from_terminal_values(const Lattice& lattice, std::vector<double> values) {
    lattice.require_dense_solve("claim table");
    const std::uint64_t expected = lattice.paths_at(lattice.num_steps());
    if (values.size() != expected) {
        throw ValidationError("claim table: expected " + std::to_string(expected) +
                              " terminal values, got " + std::to_string(values.size()));
    }
    double bound = 0.0;
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw ValidationError("claim table: values must be finite");
        }
        bound = std::max(bound, std::fabs(v));
    }
    auto table = std::make_shared<const std::vector<double>>(std::move(values));
    Claim c;
    // Compare depths, not path counts: deep recombining lattices exist whose
    // path count does not fit the code width.
    c.path_eval_ = [table, depth = lattice.num_steps()](const Lattice& lat, std::uint64_t path) {
        if (lat.num_steps() != depth) {
            throw ValidationError("claim table: built for a " + std::to_string(depth) +
                                  "-step lattice, used with " +
                                  std::to_string(lat.num_steps()) + " steps");
        }
        return (*table)[path];
    };
    c.bound_ = bound;
    return c;
}

Claim Claim::negated() const {
    Claim c;
    if (w_eval_) {
        auto f = w_eval_;
        c.w_eval_ = [f](double w) { return -f(w); };
    }
    auto p = path_eval_;
    c.path_eval_ = [p](const Lattice& lat, std::uint64_t path) { return -p(lat, path); };
    c.bound_ = bound_;
    return c;
}

Claim Claim::scaled(double factor) const {
    require_finite(factor, "scale factor");
    Claim c;
    if (w_eval_) {
        auto f = w_eval_;
        c.w_eval_ = [f, factor](double w) { return factor * f(w); };
    }
    auto p = path_eval_;
    c.path_eval_ = [p, factor](const Lattice& lat, std::uint64_t path) {
        return factor * p(lat, path);
    };
    c.bound_ = std::fabs(factor) * bound_;
    return c;
}

Claim Claim::shifted(double offset) const {
    require_finite(offset, "shift offset");
    Claim c;
    if (w_eval_) {
        auto f = w_eval_;
        c.w_eval_ = [f, offset](double w) { return f(w) + offset; };
    }
    auto p = path_eval_;
    c.path_eval_ = [p, offset](const Lattice& lat, std::uint64_t path) {
        return p(lat, path) + offset;
    };
    c.bound_ = bound_ + std::fabs(offset);
    return c;
}

Claim Claim::floored_at(double floor_value) const {
    require_finite(floor_value, "floor");
    Claim c;
    if (w_eval_) {
        auto f = w_eval_;
        c.w_eval_ = [f, floor_value](double w) { return std::max(f(w), floor_value); };
    }
    auto p = path_eval_;
    c.path_eval_ = [p, floor_value](const Lattice& lat, std::uint64_t path) {
        return std::max(p(lat, path), floor_value);
    };
    c.bound_ = std::max(bound_, std::fabs(floor_value));
    return c;
}

Claim Claim::capped_at(double cap_value) const {
    require_finite(cap_value, "cap");
    Claim c;
    if (w_eval_) {
        auto f = w_eval_;
        c.w_eval_ = [f, cap_value](double w) { return std::min(f(w), cap_value); };
    }
    auto p = path_eval_;
    c.path_eval_ = [p, cap_value](const Lattice& lat, std::uint64_t path) {
        return std::min(p(lat, path), cap_value);
    };
    c.bound_ = std::max(bound_, std::fabs(cap_value));
    return c;
}

Claim Claim::sum(const Claim& a, const Claim& b) {
    Claim c;
    if (a.w_eval_ && b.w_eval_) {
        auto fa = a.w_eval_, fb = b.w_eval_;
        c.w_eval_ = [fa, fb](double w) { return fa(w) + fb(w); };
    }
    auto pa = a.path_eval_, pb = b.path_eval_;
    c.path_eval_ = [pa, pb](const Lattice& lat, std::uint64_t path) {
        return pa(lat, path) + pb(lat, path);
    };
    c.bound_ = a.bound_ + b.bound_;
    return c;
}

Claim Claim::difference(const Claim& a, const Claim& b) {
    Claim c;
    if (a.w_eval_ && b.w_eval_) {
        auto fa = a.w_eval_, fb = b.w_eval_;
        c.w_eval_ = [fa, fb](double w) { return fa(w) - fb(w); };
    }
    auto pa = a.path_eval_, pb = b.path_eval_;
    c.path_eval_ = [pa, pb](const Lattice& lat, std::uint64_t path) {
        return pa(lat, path) - pb(lat, path);
    };
    c.bound_ = a.bound_ + b.bound_;
    return c;
}

Claim Claim::pointwise_max(const Claim& a, const Claim& b) {
    Claim c;
    if (a.w_eval_ && b.w_eval_) {
        auto fa = a.w_eval_, fb = b.w_eval_;
        c.w_eval_ = [fa, fb](double w) { return std::max(fa(w), fb(w)); };
    }
    auto pa = a.path_eval_, pb = b.path_eval_;
    c.path_eval_ = [pa, pb](const Lattice& lat, std::uint64_t path) {
        return std::max(pa(lat, path), pb(lat, path));
    };
    c.bound_ = std::max(a.bound_, b.bound_);
    return c;
}

std::vector<Claim> sample_bounded_claims(const Lattice& lattice, std::uint64_t seed, int count) {
    if (count < 0) throw ValidationError("sample_bounded_claims: count must be >= 0");
    const int mid_step = lattice.num_steps() / 2;
    std::mt19937_64 rng(seed);
    std::vector<Claim> claims;
    claims.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const bool negative = next_uniform(rng) < 0.5;
        const double magnitude = 0.2 + 0.6 * next_uniform(rng);
        const double a = negative ? -magnitude : magnitude;
        const double b = 0.5 + 1.5 * next_uniform(rng);
        const double c = -0.3 + 0.6 * next_uniform(rng);
        auto payoff = [a, b, c, mid_step](const Lattice& lat, std::uint64_t path) {
            const int n = lat.num_steps();
            const std::uint64_t mid_prefix = path >> (n - mid_step);
            const double w_mid = lat.w_path(mid_step, mid_prefix);
            const double w_terminal = lat.w_path(n, path);
            return a * std::tanh(b * w_terminal) + (w_mid > 0.0 ? c : 0.0);
        };
        claims.push_back(Claim::from_path(payoff, std::fabs(a) + std::fabs(c)));
    }
    return claims;
}

}  // namespace cbsde
