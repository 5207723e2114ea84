#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "cbsde/claim.hpp"
#include "cbsde/errors.hpp"
#include "cbsde/lattice.hpp"
#include "oracles.hpp"

using namespace cbsde;

namespace {

// Terminal path code for a move sequence, matching the tree's convention that
// each new move shifts in as the low bit (set bit = down move).
std::uint64_t code_from_moves(const std::vector<int>& moves) {
    std::uint64_t code = 0;
    for (int move : moves) {
        code = move < 0 ? Lattice::down_child(code) : Lattice::up_child(code);
    }
    return code;
}

}  // namespace

TEST_CASE("lattice fixes the step geometry") {
    const Lattice lat(4, 1.0);
    CHECK(lat.num_steps() == 4);
    CHECK(lat.horizon() == 1.0);
    CHECK(lat.dt() == 0.25);
    CHECK(lat.sqrt_dt() == 0.5);
    CHECK(lat.time_at(0) == 0.0);
    CHECK(lat.time_at(3) == 0.75);
    CHECK(lat.time_at(4) == 1.0);
    CHECK(lat.paths_at(0) == 1);
    CHECK(lat.paths_at(4) == 16);
}

TEST_CASE("lattice rejects degenerate shapes and oversized trees") {
    CHECK_THROWS_AS(Lattice(0, 1.0), ValidationError);
    CHECK_THROWS_AS(Lattice(-3, 1.0), ValidationError);
    CHECK_THROWS_AS(Lattice(4, 0.0), ValidationError);
    CHECK_THROWS_AS(Lattice(4, -1.0), ValidationError);
    CHECK_THROWS_AS(Lattice(4, std::numeric_limits<double>::infinity()), ValidationError);
    CHECK_THROWS_AS(Lattice(4, 1.0, 0), ValidationError);

    // The default cap guards against accidental 2^N blowups; explicit caps
    // opt in to deeper trees (which remain level-addressable only).
    CHECK_THROWS_AS(Lattice(kDefaultStepCap + 1, 1.0), SizeError);
    CHECK_NOTHROW(Lattice(kDefaultStepCap, 1.0));
    CHECK_NOTHROW(Lattice(kDefaultStepCap + 1, 1.0, kDefaultStepCap + 1));
    CHECK_NOTHROW(Lattice(128, 1.0, 128));
    CHECK_THROWS_AS(Lattice(128, 1.0, 127), SizeError);
    CHECK_NOTHROW(build_lattice(20, 2.5));
    CHECK_THROWS_AS(build_lattice(21, 2.5), SizeError);

    // Deeper than the path-code width the level addressing still works.
    const Lattice huge(kAbsoluteStepCap + 1, 1.0, kAbsoluteStepCap + 1);
    CHECK(huge.w_level(kAbsoluteStepCap + 1, 32) == 0.0);
    CHECK_THROWS_AS(huge.require_dense_solve("test"), SizeError);
    CHECK_THROWS_AS(huge.require_enumerable("test"), SizeError);
}

TEST_CASE("size guards split by what an operation enumerates") {
    const Lattice deep(22, 1.0, 24);
    CHECK_NOTHROW(deep.require_enumerable("test"));
    CHECK_THROWS_AS(deep.require_dense_solve("test"), SizeError);

    const Lattice deeper(30, 1.0, 63);
    CHECK_THROWS_AS(deeper.require_enumerable("test"), SizeError);
    CHECK_THROWS_AS(deeper.require_dense_solve("test"), SizeError);

    const Lattice small(8, 1.0);
    CHECK_NOTHROW(small.require_enumerable("test"));
    CHECK_NOTHROW(small.require_dense_solve("test"));
}

TEST_CASE("path codes and level indices agree on the Brownian value") {
    const Lattice lat(6, 1.5);
    for (int step = 0; step <= 6; ++step) {
        for (std::uint64_t p = 0; p < lat.paths_at(step); ++p) {
            CHECK(lat.w_path(step, p) == lat.w_level(step, std::popcount(p)));
        }
    }
    // N=4, T=1 gives sqrt(dt) = 1/2, so every node value is an exact dyadic.
    const Lattice dyadic(4, 1.0);
    CHECK(dyadic.w_path(0, 0) == 0.0);
    CHECK(dyadic.w_path(1, 0) == 0.5);
    CHECK(dyadic.w_path(1, 1) == -0.5);
    CHECK(dyadic.w_level(4, 0) == 2.0);
    CHECK(dyadic.w_level(4, 2) == 0.0);
    CHECK(dyadic.w_level(4, 4) == -2.0);
    CHECK(dyadic.w_path(4, 0b1111) == -2.0);
    CHECK(dyadic.w_path(4, 0b0101) == 0.0);
}

TEST_CASE("children extend the path by one move") {
    CHECK(Lattice::up_child(0) == 0);
    CHECK(Lattice::down_child(0) == 1);
    CHECK(Lattice::up_child(0b101) == 0b1010);
    CHECK(Lattice::down_child(0b101) == 0b1011);

    // Walking +,-,-,+ lands on code 0110 and its step-2 prefix is 01.
    const std::uint64_t code = code_from_moves({+1, -1, -1, +1});
    CHECK(code == 0b0110);
    CHECK((code >> 2) == 0b01);

    const Lattice lat(5, 2.0);
    const double s = lat.sqrt_dt();
    for (int step = 0; step < 5; ++step) {
        for (std::uint64_t p = 0; p < lat.paths_at(step); ++p) {
            const double w = lat.w_path(step, p);
            CHECK(lat.w_path(step + 1, Lattice::up_child(p)) ==
                  doctest::Approx(w + s).epsilon(1e-14));
            CHECK(lat.w_path(step + 1, Lattice::down_child(p)) ==
                  doctest::Approx(w - s).epsilon(1e-14));
        }
    }
}

TEST_CASE("expectation matches the enumeration oracle") {
    const Lattice lat(8, 1.0);
    const std::vector<Claim> claims = sample_bounded_claims(lat, 7, 3);
    for (const Claim& claim : claims) {
        const double expected = oracles::path_expectation(8, [&](const std::vector<int>& moves) {
            return claim.value_path(lat, code_from_moves(moves));
        });
        CHECK(expectation(lat, claim) == doctest::Approx(expected).epsilon(1e-13));
    }

    CHECK(expectation(lat, Claim::constant(1.75)) == doctest::Approx(1.75).epsilon(1e-15));
    // W_T has mean zero; with dyadic node values the cancellation is exact.
    const Lattice dyadic(4, 1.0);
    const Claim w_claim = Claim::from_terminal_w([](double w) { return w; }, 2.0);
    CHECK(expectation(dyadic, w_claim) == 0.0);

    const Lattice deep(25, 1.0, 63);
    CHECK_THROWS_AS(expectation(deep, Claim::constant(0.0)), SizeError);
}

TEST_CASE("conditional expectation averages sibling pairs") {
    const Lattice lat(3, 0.75);
    const std::vector<double> layer{1.0, 2.0, 3.0, 4.0};
    const std::vector<double> parents = conditional_expectation(lat, layer);
    REQUIRE(parents.size() == 2);
    CHECK(parents[0] == 1.5);
    CHECK(parents[1] == 3.5);

    // Chained all the way down it reproduces the unconditional mean.
    const std::vector<Claim> claims = sample_bounded_claims(lat, 3, 1);
    std::vector<double> values(static_cast<std::size_t>(lat.paths_at(3)));
    for (std::uint64_t p = 0; p < values.size(); ++p) {
        values[p] = claims[0].value_path(lat, p);
    }
    const double mean = expectation(lat, claims[0]);
    std::vector<double> slice = values;
    while (slice.size() > 1) slice = conditional_expectation(lat, slice);
    CHECK(slice[0] == doctest::Approx(mean).epsilon(1e-15));

    CHECK_THROWS_AS(conditional_expectation(lat, {}), ValidationError);
    CHECK_THROWS_AS(conditional_expectation(lat, {1.0}), ValidationError);
    CHECK_THROWS_AS(conditional_expectation(lat, {1.0, 2.0, 3.0}), ValidationError);
    // 16 values would describe step 4 of a 3-step lattice.
    CHECK_THROWS_AS(conditional_expectation(lat, std::vector<double>(16, 0.0)),
                    ValidationError);
}

TEST_CASE("claims evaluate and advertise recombination") {
    const Lattice lat(4, 1.0);

    const Claim c = Claim::constant(2.5);
    CHECK(c.terminal_in_w());
    CHECK(c.bound() == 2.5);
    CHECK(c.value_path(lat, 7) == 2.5);
    CHECK(c.value_w(-0.3) == 2.5);

    const Claim tanh_claim =
        Claim::from_terminal_w([](double w) { return std::tanh(w); }, 1.0);
    CHECK(tanh_claim.terminal_in_w());
    CHECK(tanh_claim.value_w(0.75) == std::tanh(0.75));
    CHECK(tanh_claim.value_path(lat, 0) == std::tanh(2.0));     // all-up path
    CHECK(tanh_claim.value_path(lat, 0b1111) == std::tanh(-2.0));

    const Claim pathdep = Claim::from_path(
        [](const Lattice& l, std::uint64_t p) { return l.w_path(l.num_steps(), p) >= 0 ? 1.0 : 0.0; },
        1.0);
    CHECK_FALSE(pathdep.terminal_in_w());
    CHECK(pathdep.value_path(lat, 0) == 1.0);

    CHECK_THROWS_AS(Claim::constant(std::numeric_limits<double>::infinity()), ValidationError);
    CHECK_THROWS_AS(Claim::from_terminal_w(nullptr, 1.0), ValidationError);
    CHECK_THROWS_AS(Claim::from_terminal_w([](double w) { return w; }, -1.0), ValidationError);
    CHECK_THROWS_AS(
        Claim::from_terminal_w([](double w) { return w; },
                               std::numeric_limits<double>::quiet_NaN()),
        ValidationError);
}

TEST_CASE("claim tables are tied to their path count") {
    const Lattice lat(2, 1.0);
    const Claim table = Claim::from_terminal_values(lat, {1.0, -2.0, 3.0, -4.0});
    CHECK_FALSE(table.terminal_in_w());
    CHECK(table.bound() == 4.0);
    CHECK(table.value_path(lat, 0) == 1.0);
    CHECK(table.value_path(lat, 3) == -4.0);

    CHECK_THROWS_AS(Claim::from_terminal_values(lat, {1.0, 2.0}), ValidationError);
    CHECK_THROWS_AS(
        Claim::from_terminal_values(lat, {1.0, 2.0, std::numeric_limits<double>::quiet_NaN(), 4.0}),
        ValidationError);

    const Lattice other(3, 1.0);
    CHECK_THROWS_AS(table.value_path(other, 0), ValidationError);
    const Lattice deep(21, 1.0, 24);
    CHECK_THROWS_AS(
        Claim::from_terminal_values(deep, std::vector<double>(std::size_t{1} << 21, 0.0)),
        SizeError);
}

TEST_CASE("claim algebra composes values and bounds") {
    const Lattice lat(2, 1.0);
    const Claim a = Claim::from_terminal_values(lat, {1.0, -2.0, 3.0, -4.0});

    CHECK(a.negated().value_path(lat, 1) == 2.0);
    CHECK(a.negated().bound() == 4.0);
    CHECK(a.scaled(2.0).value_path(lat, 2) == 6.0);
    CHECK(a.scaled(-0.5).bound() == 2.0);
    CHECK(a.shifted(1.0).value_path(lat, 3) == -3.0);
    CHECK(a.shifted(-1.5).bound() == 5.5);
    CHECK(a.floored_at(0.0).value_path(lat, 1) == 0.0);
    CHECK(a.floored_at(0.0).value_path(lat, 2) == 3.0);
    CHECK(a.capped_at(0.0).value_path(lat, 0) == 0.0);
    CHECK(a.capped_at(0.0).value_path(lat, 3) == -4.0);

    const Claim b = Claim::constant(1.0);
    CHECK(Claim::sum(a, b).value_path(lat, 1) == -1.0);
    CHECK(Claim::sum(a, b).bound() == 5.0);
    CHECK(Claim::difference(a, a).value_path(lat, 2) == 0.0);
    CHECK(Claim::pointwise_max(a, a.negated()).value_path(lat, 3) == 4.0);
    CHECK(Claim::pointwise_max(a, a.negated()).value_path(lat, 0) == 1.0);

    // Recombination survives algebra only when every operand recombines.
    const Claim w1 = Claim::from_terminal_w([](double w) { return w; }, 2.0);
    CHECK(w1.scaled(3.0).terminal_in_w());
    CHECK(w1.shifted(1.0).terminal_in_w());
    CHECK(Claim::sum(w1, w1).terminal_in_w());
    CHECK_FALSE(Claim::sum(w1, a).terminal_in_w());
    CHECK_FALSE(a.scaled(2.0).terminal_in_w());

    CHECK_THROWS_AS(a.scaled(std::numeric_limits<double>::quiet_NaN()), ValidationError);
    CHECK_THROWS_AS(a.shifted(std::numeric_limits<double>::infinity()), ValidationError);
}

TEST_CASE("sampled claims are reproducible, bounded, and path dependent") {
    const Lattice lat(6, 1.0);
    const std::vector<Claim> first = sample_bounded_claims(lat, 99, 5);
    const std::vector<Claim> second = sample_bounded_claims(lat, 99, 5);
    REQUIRE(first.size() == 5);
    REQUIRE(second.size() == 5);

    bool any_differs_from_other_seed = false;
    const std::vector<Claim> other = sample_bounded_claims(lat, 100, 5);
    for (std::size_t i = 0; i < first.size(); ++i) {
        CHECK_FALSE(first[i].terminal_in_w());
        for (std::uint64_t p = 0; p < lat.paths_at(6); ++p) {
            const double v = first[i].value_path(lat, p);
            CHECK(v == second[i].value_path(lat, p));
            CHECK(std::fabs(v) <= first[i].bound());
            if (v != other[i].value_path(lat, p)) any_differs_from_other_seed = true;
        }
    }
    CHECK(any_differs_from_other_seed);

    // The indicator leg makes the payoff depend on the mid-path, not just on
    // the terminal value: find two paths with equal W_T but different values.
    bool path_dependence_seen = false;
    for (const Claim& claim : first) {
        for (std::uint64_t p = 0; p + 1 < lat.paths_at(6) && !path_dependence_seen; ++p) {
            for (std::uint64_t q = p + 1; q < lat.paths_at(6); ++q) {
                if (lat.w_path(6, p) == lat.w_path(6, q) &&
                    claim.value_path(lat, p) != claim.value_path(lat, q)) {
                    path_dependence_seen = true;
                    break;
                }
            }
        }
        if (path_dependence_seen) break;
    }
    CHECK(path_dependence_seen);

    CHECK(sample_bounded_claims(lat, 1, 0).empty());
    CHECK_THROWS_AS(sample_bounded_claims(lat, 1, -1), ValidationError);
}
