#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "cbsde/claim.hpp"
#include "cbsde/constraint.hpp"
#include "cbsde/driver.hpp"
#include "cbsde/errors.hpp"
#include "cbsde/lattice.hpp"
#include "cbsde/solver.hpp"
#include "oracles.hpp"

using namespace cbsde;

namespace {

Claim w_terminal_claim(const Lattice& lattice) {
    const double bound = lattice.sqrt_dt() * lattice.num_steps();
    return Claim::from_terminal_w([](double w) { return w; }, bound);
}

Claim tanh_claim() {
    return Claim::from_terminal_w([](double w) { return std::tanh(w); }, 1.0);
}

// Nodewise minimum of (a - b); negative values mean a dips below b somewhere.
double min_node_delta(const Solution& a, const Solution& b) {
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < a.y.size(); ++i) {
        for (std::size_t k = 0; k < a.y[i].size(); ++k) {
            worst = std::min(worst, a.y[i][k] - b.y[i][k]);
        }
    }
    return worst;
}

double max_node_abs_diff(const Solution& a, const Solution& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.y.size(); ++i) {
        for (std::size_t k = 0; k < a.y[i].size(); ++k) {
            worst = std::max(worst, std::fabs(a.y[i][k] - b.y[i][k]));
        }
    }
    return worst;
}

}  // namespace

TEST_CASE("unconstrained solve of the identity payoff is the martingale") {
    const Lattice lat(4, 1.0);
    const Solution sol = solve_g(zero_driver(), w_terminal_claim(lat), lat);

    CHECK(sol.layout == SolutionLayout::kLevel);
    CHECK(sol.y0() == 0.0);
    CHECK(sol.driver_id == "zero");
    CHECK(sol.constraint_id == "none");
    CHECK_FALSE(sol.penalty_m.has_value());
    REQUIRE(sol.num_steps() == 4);

    // y is the running Brownian value and the integrand is identically one.
    for (int i = 0; i <= 4; ++i) {
        REQUIRE(sol.y[i].size() == static_cast<std::size_t>(i) + 1);
        for (int j = 0; j <= i; ++j) CHECK(sol.y[i][j] == lat.w_level(i, j));
    }
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j <= i; ++j) {
            CHECK(sol.z[i][j] == 1.0);
            CHECK(sol.c_increments[i][j] == 0.0);
        }
    }
}

TEST_CASE("unconstrained solve prices squares and constants exactly") {
    const Lattice lat(4, 1.0);
    const Claim square = Claim::from_terminal_w([](double w) { return w * w; }, 4.0);
    CHECK(solve_g(zero_driver(), square, lat).y0() == 1.0);  // E[W_T^2] = T

    const Solution constant = solve_g(linear_driver(0.3), Claim::constant(2.0), lat);
    CHECK(constant.y0() == 2.0);
    for (const auto& layer : constant.z) {
        for (double zv : layer) CHECK(zv == 0.0);
    }
}

TEST_CASE("linear drivers reproduce the tilted expectation") {
    for (double mu : {-0.5, 0.3}) {
        for (int n : {4, 10}) {
            const Lattice lat(n, 1.0);
            const Claim claim = tanh_claim();
            const Solution sol = solve_g(linear_driver(mu), claim, lat);
            const double oracle =
                oracles::tilted_expectation(n, 1.0, mu, [&](const std::vector<int>& moves) {
                    std::uint64_t code = 0;
                    for (int move : moves) {
                        code = move < 0 ? Lattice::down_child(code) : Lattice::up_child(code);
                    }
                    return claim.value_path(lat, code);
                });
            CHECK(sol.y0() == doctest::Approx(oracle).epsilon(1e-13));
        }
    }
    // The identity payoff acquires exactly the Girsanov drift mu * T.
    const Lattice lat(4, 1.0);
    CHECK(solve_g(linear_driver(0.3), w_terminal_claim(lat), lat).y0() ==
          doctest::Approx(0.3).epsilon(1e-15));
}

TEST_CASE("quadratic driver converges to the entropic value") {
    const double exact =
        oracles::entropic_value(1.0, 1.0, [](double w) { return std::tanh(w); });
    const Claim claim = tanh_claim();
    const double y64 = solve_g(quadratic_driver(1.0), claim, Lattice(64, 1.0, 64)).y0();
    const double y128 = solve_g(quadratic_driver(1.0), claim, Lattice(128, 1.0, 128)).y0();
    const double e64 = std::fabs(y64 - exact);
    const double e128 = std::fabs(y128 - exact);
    CHECK(e64 <= 0.01);
    // First-order scheme: the error should shrink by roughly half per doubling.
    CHECK(e128 <= 0.75 * e64);
}

TEST_CASE("solver layouts follow the claim's structure") {
    const Lattice lat(6, 1.0);
    const Claim dense_claim = sample_bounded_claims(lat, 5, 1)[0];
    const Solution dense = solve_g(zero_driver(), dense_claim, lat);
    CHECK(dense.layout == SolutionLayout::kDense);
    for (int i = 0; i <= 6; ++i) {
        CHECK(dense.y[i].size() == lat.paths_at(i));
    }

    // Recombining claims solve on levels, so deep trees stay cheap.
    const Lattice deep(22, 1.0, 24);
    const Solution level = solve_g(zero_driver(), tanh_claim(), deep);
    CHECK(level.layout == SolutionLayout::kLevel);
    CHECK(std::fabs(level.y0()) < 1.0);
    CHECK_THROWS_AS(solve_g(zero_driver(), sample_bounded_claims(deep, 5, 1)[0], deep),
                    SizeError);
}

TEST_CASE("level and dense layouts produce identical numbers") {
    const Lattice lat(8, 1.0);
    const Claim level_claim = tanh_claim();
    const Claim dense_claim = Claim::from_path(
        [](const Lattice& l, std::uint64_t p) {
            return std::tanh(l.w_path(l.num_steps(), p));
        },
        1.0);

    const Solution a = solve_penalized(quadratic_driver(1.0), z_band_constraint(0.4), 8.0,
                                       level_claim, lat);
    const Solution b = solve_penalized(quadratic_driver(1.0), z_band_constraint(0.4), 8.0,
                                       dense_claim, lat);
    REQUIRE(a.layout == SolutionLayout::kLevel);
    REQUIRE(b.layout == SolutionLayout::kDense);
    for (int i = 0; i <= 8; ++i) {
        for (std::uint64_t p = 0; p < lat.paths_at(i); ++p) {
            const std::size_t j = static_cast<std::size_t>(std::popcount(p));
            CHECK(a.y[i][j] == b.y[i][p]);
            if (i < 8) {
                CHECK(a.z[i][j] == b.z[i][p]);
                CHECK(a.c_increments[i][j] == b.c_increments[i][p]);
            }
        }
    }
}

TEST_CASE("slack penalties leave the unconstrained solve untouched bit for bit") {
    const Lattice lat(8, 1.0);
    const Claim claim = tanh_claim();
    const Solution plain = solve_g(abs_driver(0.5), claim, lat);

    // The claim's integrand never approaches the wide band, so every node
    // stays at the finite-difference control and the two schemes coincide.
    const Solution penalized =
        solve_penalized(abs_driver(0.5), z_band_constraint(5.0), 3.0, claim, lat);
    CHECK(penalized.penalty_m == 3.0);
    for (std::size_t i = 0; i < plain.y.size(); ++i) {
        for (std::size_t k = 0; k < plain.y[i].size(); ++k) {
            CHECK(plain.y[i][k] == penalized.y[i][k]);
        }
    }
    for (std::size_t i = 0; i < plain.z.size(); ++i) {
        for (std::size_t k = 0; k < plain.z[i].size(); ++k) {
            CHECK(plain.z[i][k] == penalized.z[i][k]);
            CHECK(penalized.c_increments[i][k] == 0.0);
        }
    }

    // A no-op constraint is the plain scheme by construction.
    const Solution none = solve_penalized(abs_driver(0.5), no_constraint(), 7.0, claim, lat);
    CHECK(none.y0() == plain.y0());
    CHECK(none.penalty_m == 7.0);

    CHECK_THROWS_AS(solve_penalized(abs_driver(0.5), no_constraint(), 0.0, claim, lat),
                    ValidationError);
    CHECK_THROWS_AS(solve_penalized(abs_driver(0.5), no_constraint(), -1.0, claim, lat),
                    ValidationError);
    CHECK_THROWS_AS(solve_penalized(abs_driver(0.5), no_constraint(),
                                    std::numeric_limits<double>::infinity(), claim, lat),
                    ValidationError);
}

TEST_CASE("binding band penalties price the constraint stepwise") {
    // Two steps over [0, 1]: dt = 1/2, sqrt(dt) = s, terminal W in {2s, 0, -2s}.
    // Every node's finite-difference control is 1, outside the band [-1/2, 1/2].
    const Lattice lat(2, 1.0);
    const double s = lat.sqrt_dt();
    const Claim claim = w_terminal_claim(lat);
    const Constraint band = z_band_constraint(0.5);

    // Weight 1: paying the penalty at z = 1 beats narrowing to the band edge.
    const Solution m1 = solve_penalized(zero_driver(), band, 1.0, claim, lat);
    CHECK(m1.y0() == 0.5);
    CHECK(m1.y[1][0] == s + 0.25);
    CHECK(m1.y[1][1] == -s + 0.25);
    CHECK(m1.z[0][0] == 1.0);
    CHECK(m1.c_increments[1][0] == 0.25);

    // Weight 2: the band edge wins everywhere.
    const Solution m2 = solve_penalized(zero_driver(), band, 2.0, claim, lat);
    CHECK(m2.y0() == doctest::Approx(s).epsilon(1e-15));
    CHECK(m2.y[1][0] == doctest::Approx(1.5 * s).epsilon(1e-15));
    CHECK(m2.y[1][1] == doctest::Approx(-0.5 * s).epsilon(1e-15));
    CHECK(m2.z[0][0] == 0.5);
    CHECK(m2.z[1][0] == 0.5);
    CHECK(m2.z[1][1] == 0.5);

    // Piecewise-linear data saturate: once the band edge wins it wins at
    // every larger weight with identical arithmetic.
    const Solution m4 = solve_penalized(zero_driver(), band, 4.0, claim, lat);
    const Solution m8 = solve_penalized(zero_driver(), band, 8.0, claim, lat);
    CHECK(max_node_abs_diff(m4, m2) == 0.0);
    CHECK(max_node_abs_diff(m8, m2) == 0.0);

    // Iterates climb in the weight, exactly.
    CHECK(min_node_delta(m2, m1) >= 0.0);
    CHECK(min_node_delta(m4, m2) >= 0.0);
}

TEST_CASE("the penalty ladder converges to the grid-search value") {
    const Lattice lat(2, 1.0);
    const Claim claim = w_terminal_claim(lat);
    const MinimalSolution ms =
        solve_constrained(zero_driver(), z_band_constraint(0.5), claim, lat);

    CHECK(ms.m_final == 4.0);
    CHECK(ms.convergence_gap == 0.0);
    CHECK(ms.phi_residual == 0.0);
    CHECK(ms.solution.penalty_m == 4.0);
    CHECK(ms.solution.y0() == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));

    const double oracle = oracles::band_constrained_scan(
        2, 1.0, 0.5, [](double) { return 0.0; },
        [&](const std::vector<int>& moves) {
            int sum = 0;
            for (int move : moves) sum += move;
            return lat.sqrt_dt() * sum;
        });
    CHECK(std::fabs(ms.solution.y0() - oracle) <= 1e-9);
}

TEST_CASE("the grid-search oracle also pins a nonzero driver") {
    // abs driver, band 1, tanh payoff on a 3-step tree: nothing here is
    // closed-form, so the per-node scan is the reference.
    const Lattice lat(3, 1.0);
    const Claim claim = Claim::from_terminal_w([](double w) { return std::tanh(2.0 * w); }, 1.0);
    const MinimalSolution ms =
        solve_constrained(abs_driver(0.5), z_band_constraint(1.0), claim, lat);
    const double oracle = oracles::band_constrained_scan(
        3, 1.0, 1.0, [](double z) { return 0.5 * std::fabs(z); },
        [&](const std::vector<int>& moves) {
            int sum = 0;
            for (int move : moves) sum += move;
            return std::tanh(2.0 * lat.sqrt_dt() * sum);
        });
    CHECK(std::fabs(ms.solution.y0() - oracle) <= 2.0 * 1e-6 + 1e-8);
}

TEST_CASE("a floor the plain integrand already satisfies changes nothing") {
    const Lattice lat(4, 1.0);
    const Claim claim = w_terminal_claim(lat);
    const Solution plain = solve_g(zero_driver(), claim, lat);

    // The identity payoff's integrand is exactly 1 >= 1, so the floor is slack.
    const MinimalSolution floored =
        solve_constrained(zero_driver(), z_floor_constraint(1.0), claim, lat);
    CHECK(floored.solution.y0() == plain.y0());
    CHECK(floored.m_final == 2.0);  // first comparison already has gap zero
    CHECK(floored.convergence_gap == 0.0);
    CHECK(floored.phi_residual == 0.0);
    CHECK(max_node_abs_diff(floored.solution, plain) == 0.0);

    const MinimalSolution signed_up =
        solve_constrained(zero_driver(), z_sign_constraint(), claim, lat);
    CHECK(max_node_abs_diff(signed_up.solution, plain) == 0.0);

    // A no-op constraint short-circuits the ladder at the initial weight.
    const MinimalSolution none = solve_constrained(zero_driver(), no_constraint(), claim, lat);
    CHECK(none.m_final == 1.0);
    CHECK(none.solution.y0() == plain.y0());
}

TEST_CASE("minimal solutions dominate the unconstrained solve nodewise") {
    const Lattice lat(6, 1.0);
    for (const Claim& claim : sample_bounded_claims(lat, 17, 3)) {
        const Solution plain = solve_g(quadratic_driver(1.0), claim, lat);
        const MinimalSolution ms =
            solve_constrained(quadratic_driver(1.0), z_band_constraint(1.0), claim, lat);
        // Slack nodes coincide bitwise and binding nodes sit strictly above,
        // so the dominance is exact, not merely within tolerance.
        CHECK(min_node_delta(ms.solution, plain) >= 0.0);
    }
}

TEST_CASE("solutions rebuild as supersolutions of the plain driver") {
    const Lattice lat(6, 1.0);
    const Claim claim = sample_bounded_claims(lat, 23, 1)[0];
    const Driver g = quadratic_driver(1.0);
    const Constraint band = z_band_constraint(0.8);

    const MinimalSolution ms = solve_constrained(g, band, claim, lat);
    CHECK(supersolution_residual(ms.solution, g, lat) <= 1e-15);
    CHECK(max_phi_times_dt(ms.solution, band, lat) == ms.phi_residual);
    for (const auto& layer : ms.solution.c_increments) {
        for (double dc : layer) CHECK(dc >= 0.0);
    }

    const Solution plain = solve_g(g, claim, lat);
    CHECK(supersolution_residual(plain, g, lat) == 0.0);
    CHECK(max_phi_times_dt(plain, no_constraint(), lat) == 0.0);

    const Lattice other(5, 1.0);
    CHECK_THROWS_AS(supersolution_residual(plain, g, other), ValidationError);
    CHECK_THROWS_AS(max_phi_times_dt(plain, band, other), ValidationError);
}

TEST_CASE("evaluate_at slices the solution by step") {
    const Lattice lat(4, 1.0);
    const Solution sol = solve_g(zero_driver(), w_terminal_claim(lat), lat);
    CHECK(evaluate_at(sol, 0) == std::vector<double>{0.0});
    CHECK(evaluate_at(sol, 4).size() == 5);
    CHECK(evaluate_at(sol, 4)[0] == 2.0);
    CHECK_THROWS_AS(evaluate_at(sol, -1), ValidationError);
    CHECK_THROWS_AS(evaluate_at(sol, 5), ValidationError);
}

TEST_CASE("the ladder reports the weight it exhausted") {
    const Lattice lat(2, 1.0);
    const Claim claim = w_terminal_claim(lat);
    SolverConfig config;
    config.m_cap = 2.0;
    try {
        solve_constrained(zero_driver(), z_band_constraint(0.5), claim, lat, config);
        FAIL("expected NonConvergenceError");
    } catch (const NonConvergenceError& e) {
        CHECK(e.m_last == 2.0);
        CHECK(e.gap == doctest::Approx(std::sqrt(0.5) - 0.5).epsilon(1e-15));
    }

    SolverConfig bad;
    bad.tol = 0.0;
    CHECK_THROWS_AS(solve_constrained(zero_driver(), z_band_constraint(0.5), claim, lat, bad),
                    ValidationError);
    bad = SolverConfig{};
    bad.m0 = -1.0;
    CHECK_THROWS_AS(solve_constrained(zero_driver(), z_band_constraint(0.5), claim, lat, bad),
                    ValidationError);
    bad = SolverConfig{};
    bad.m_cap = 0.5;  // below m0
    CHECK_THROWS_AS(solve_constrained(zero_driver(), z_band_constraint(0.5), claim, lat, bad),
                    ValidationError);
}

TEST_CASE("drivers that outrun the penalty raise divergence") {
    const Lattice lat(1, 1.0);
    const Claim claim = w_terminal_claim(lat);

    // |mu| * sqrt(dt) = 4 > 1: past the band the objective descends forever.
    try {
        solve_penalized(linear_driver(-4.0), z_band_constraint(1.0), 1.0, claim, lat);
        FAIL("expected DivergenceError");
    } catch (const DivergenceError& e) {
        CHECK(e.penalty_m == 1.0);
        CHECK(std::isinf(e.magnitude));
    }
    CHECK_THROWS_AS(solve_penalized(linear_driver(4.0), z_band_constraint(1.0), 1.0, claim, lat),
                    DivergenceError);

    // Same failure through the numeric path for a non-builtin driver.
    const Driver steep = custom_driver(
        "steep-concave", [](double, double z) { return -3.0 * std::fabs(z); }, 3.0,
        false, false, true);
    CHECK_THROWS_AS(solve_penalized(steep, z_band_constraint(0.5), 1.0, claim, lat),
                    DivergenceError);

    // And the magnitude guard for absurdly scaled data.
    const Lattice lat4(4, 1.0);
    const Claim huge = Claim::from_terminal_w([](double w) { return 1e13 * w; }, 2e13);
    try {
        solve_penalized(zero_driver(), z_band_constraint(0.5), 1.0, huge, lat4);
        FAIL("expected DivergenceError");
    } catch (const DivergenceError& e) {
        CHECK(e.magnitude > kDivergenceGuard);
        CHECK(e.penalty_m == 1.0);
    }
}

TEST_CASE("numeric and exact node minimizers agree on a quadratic") {
    const Lattice lat(5, 1.0);
    const Claim claim = tanh_claim();
    const Constraint band = z_band_constraint(0.3);

    const Driver builtin = quadratic_driver(1.0);
    const Driver custom = custom_driver(
        "quadratic-copy", [](double, double z) { return z * z / 2.0; }, 16.0,
        true, false, false);

    for (double m : {1.0, 16.0, 256.0}) {
        const Solution exact = solve_penalized(builtin, band, m, claim, lat);
        const Solution numeric = solve_penalized(custom, band, m, claim, lat);
        CHECK(max_node_abs_diff(numeric, exact) <= 1e-8);
    }
}

TEST_CASE("solver validates its inputs") {
    const Lattice lat(4, 1.0);
    const Claim claim = w_terminal_claim(lat);
    CHECK_THROWS_AS(solve_g(Driver{}, claim, lat), ValidationError);
    CHECK_THROWS_AS(solve_penalized(zero_driver(), Constraint{}, 1.0, claim, lat),
                    ValidationError);
}
