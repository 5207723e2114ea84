#include "cbsde/driver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "cbsde/errors.hpp"
#include "cbsde/format.hpp"

namespace cbsde {

namespace {

void require_finite_param(double v, const char* what) {
    if (!std::isfinite(v)) {
        throw ValidationError(std::string("driver: ") + what + " must be finite");
    }
}

// Golden-section argmin of a convex function on [lo, hi], to `tol` on the
// argument.
double golden_section(const std::function<double(double)>& f, double lo, double hi, double tol) {
    constexpr double kInvPhi = 0.6180339887498949;
    double a = lo, b = hi;
    double c = b - kInvPhi * (b - a);
    double d = a + kInvPhi * (b - a);
    double fc = f(c);
    double fd = f(d);
    while (b - a > tol) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - kInvPhi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + kInvPhi * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

struct ScanResult {
    double value = 0.0;
    double argmin = 0.0;
};

// Coarse scan + golden-section refinement + snap to structurally meaningful
// candidates; ties resolve toward the smallest |y|, then the smallest y.
ScanResult infconv_minimize(const Driver& g1, const Driver& g2, double t, double z,
                            double grid_half_width, double refine_tol) {
    const double radius = grid_half_width * (1.0 + std::fabs(z));
    const double lo = -radius;
    const double hi = radius;
    auto objective = [&](double y) { return g1.eval(t, z - y) + g2.eval(t, y); };

    constexpr int kCoarse = 1000;  // 1001 grid points
    int best_i = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= kCoarse; ++i) {
        const double y = lo + (hi - lo) * (static_cast<double>(i) / kCoarse);
        const double v = objective(y);
        if (v < best) {
            best = v;
            best_i = i;
        }
    }
    const double blo = lo + (hi - lo) * (static_cast<double>(std::max(best_i - 1, 0)) / kCoarse);
    const double bhi = lo + (hi - lo) * (static_cast<double>(std::min(best_i + 1, kCoarse)) / kCoarse);
    const double y_gs = golden_section(objective, blo, bhi, refine_tol);

    const double snaps[] = {y_gs, 0.0, z, 0.5 * z};
    double j_min = std::numeric_limits<double>::infinity();
    for (double y : snaps) {
        if (y < lo || y > hi) continue;
        j_min = std::min(j_min, objective(y));
    }
    const double slack = 1e-12 * (1.0 + std::fabs(j_min));
    bool have = false;
    double pick = 0.0;
    for (double y : snaps) {
        if (y < lo || y > hi) continue;
        if (objective(y) > j_min + slack) continue;
        if (!have || std::fabs(y) < std::fabs(pick) ||
            (std::fabs(y) == std::fabs(pick) && y < pick)) {
            pick = y;
            have = true;
        }
    }
    return {objective(pick), pick};
}

}  // namespace

Driver zero_driver() {
    Driver d;
    d.eval = [](double, double) { return 0.0; };
    d.lipschitz_M = 0.0;
    d.convex = true;
    d.subadditive = true;
    d.positively_homogeneous = true;
    d.has_lower_affine = true;
    d.form = DriverForm::kZero;
    d.id = "zero";
    return d;
}

Driver linear_driver(double mu) {
    require_finite_param(mu, "mu");
    Driver d;
    d.eval = [mu](double, double z) { return mu * z; };
    d.lipschitz_M = std::fabs(mu);
    d.convex = true;
    d.subadditive = true;
    d.positively_homogeneous = true;
    d.has_lower_affine = true;
    d.lower_affine_a = mu;
    d.form = DriverForm::kLinear;
    d.mu = mu;
    d.id = "linear(mu=" + format_double(mu) + ")";
    return d;
}

Driver abs_driver(double mu) {
    require_finite_param(mu, "mu");
    Driver d;
    d.eval = [mu](double, double z) { return mu * std::fabs(z); };
    d.lipschitz_M = std::fabs(mu);
    d.convex = mu >= 0.0;
    d.subadditive = mu >= 0.0;
    d.positively_homogeneous = true;
    d.has_lower_affine = mu >= 0.0;  // mu*|z| >= 0 only when mu >= 0
    d.form = DriverForm::kAbs;
    d.mu = mu;
    d.id = "abs(mu=" + format_double(mu) + ")";
    return d;
}

Driver quadratic_driver(double gamma) {
    require_finite_param(gamma, "gamma");
    if (!(gamma > 0.0)) {
        throw ValidationError("driver: quadratic gamma must be > 0, got " + format_double(gamma));
    }
    Driver d;
    d.eval = [gamma](double, double z) { return z * z / (2.0 * gamma); };
    d.lipschitz_M = kQuadraticLipschitzRange / gamma;  // valid on |z| <= kQuadraticLipschitzRange
    d.convex = true;
    d.subadditive = false;
    d.positively_homogeneous = false;
    d.has_lower_affine = true;  // z^2/(2 gamma) >= 0
    d.form = DriverForm::kQuadratic;
    d.gamma = gamma;
    d.id = "quadratic(gamma=" + format_double(gamma) + ")";
    return d;
}

Driver custom_driver(std::string id, std::function<double(double, double)> eval,
                     double lipschitz_M, bool convex, bool subadditive,
                     bool positively_homogeneous) {
    if (!eval) throw ValidationError("driver: eval must be callable");
    if (!(lipschitz_M >= 0.0) || !std::isfinite(lipschitz_M)) {
        throw ValidationError("driver: lipschitz_M must be a nonnegative finite real");
    }
    Driver d;
    d.eval = std::move(eval);
    d.lipschitz_M = lipschitz_M;
    d.convex = convex;
    d.subadditive = subadditive;
    d.positively_homogeneous = positively_homogeneous;
    d.form = DriverForm::kCustom;
    d.id = std::move(id);
    return d;
}

Driver with_lower_affine(Driver g, double a, double b) {
    require_finite_param(a, "lower-affine slope");
    require_finite_param(b, "lower-affine intercept");
    g.has_lower_affine = true;
    g.lower_affine_a = a;
    g.lower_affine_b = b;
    return g;
}

Driver dilate(const Driver& g, double lam) {
    if (!(lam > 0.0) || !std::isfinite(lam)) {
        throw ValidationError("dilate: lam must be a positive finite real");
    }
    switch (g.form) {
        case DriverForm::kZero:
            return zero_driver();
        case DriverForm::kLinear:
            return linear_driver(g.mu);  // lam * mu * (z/lam) = mu * z
        case DriverForm::kAbs:
            return abs_driver(g.mu);  // positively homogeneous fixed point
        case DriverForm::kQuadratic:
            return quadratic_driver(lam * g.gamma);  // lam * (z/lam)^2/(2g) = z^2/(2 lam g)
        default:
            break;
    }
    Driver out = g;
    auto inner = g.eval;
    out.eval = [inner, lam](double t, double z) { return lam * inner(t, z / lam); };
    out.lower_affine_b = lam * g.lower_affine_b;  // lam*(a (z/lam) + b) = a z + lam b
    out.form = DriverForm::kCustom;
    out.infconv.reset();
    out.mu = 0.0;
    out.gamma = 0.0;
    out.id = "dilate(" + g.id + ",lam=" + format_double(lam) + ")";
    return out;
}

Driver infconv(const Driver& g1, const Driver& g2, double grid_half_width, double refine_tol) {
    if (!g1.convex || !g2.convex) {
        throw ValidationError("infconv: unsupported — both drivers must be convex-flagged");
    }
    if (!g1.has_lower_affine || !g2.has_lower_affine) {
        throw ValidationError("infconv: ill-posed — both drivers need lower-affine certificates "
                              "(without them the infimum may be -inf)");
    }
    if (std::fabs(g1.lower_affine_a - g2.lower_affine_a) > 1e-12) {
        throw ValidationError("infconv: ill-posed — lower-affine slopes differ (" +
                              format_double(g1.lower_affine_a) + " vs " +
                              format_double(g2.lower_affine_a) +
                              "); the infimum may be -inf");
    }
    if (!(grid_half_width > 0.0) || !std::isfinite(grid_half_width)) {
        throw ValidationError("infconv: grid_half_width must be a positive finite real");
    }
    if (!(refine_tol > 0.0) || !std::isfinite(refine_tol)) {
        throw ValidationError("infconv: refine_tol must be a positive finite real");
    }

    auto data = std::make_shared<InfconvData>();
    data->g1 = g1;
    data->g2 = g2;
    data->grid_half_width = grid_half_width;
    data->refine_tol = refine_tol;

    Driver g3;
    g3.form = DriverForm::kInfConv;
    g3.convex = true;
    g3.subadditive = g1.subadditive && g2.subadditive;
    g3.positively_homogeneous = g1.positively_homogeneous && g2.positively_homogeneous;
    g3.lipschitz_M = std::min(g1.lipschitz_M, g2.lipschitz_M);
    g3.has_lower_affine = true;
    g3.lower_affine_a = g1.lower_affine_a;
    g3.lower_affine_b = g1.lower_affine_b + g2.lower_affine_b;
    g3.id = "infconv(" + g1.id + "," + g2.id + ")";

    // The zero closed forms need the partner to be certified nonnegative
    // (slope-0 certificate with intercept 0); a negative intercept admits
    // convex partners whose infimum is below zero.
    if (g1.form == DriverForm::kZero && g2.lower_affine_b == 0.0) {
        // inf_y g2(y) = 0 at y = 0
        data->closed_form = true;
        data->argmin = [](double, double) { return 0.0; };
        g3.eval = [](double, double) { return 0.0; };
    } else if (g2.form == DriverForm::kZero && g1.lower_affine_b == 0.0) {
        // inf_y g1(z - y) = g1(0) = 0 at y = z
        data->closed_form = true;
        data->argmin = [](double, double z) { return z; };
        g3.eval = [](double, double) { return 0.0; };
    } else if (g1.form == DriverForm::kQuadratic && g2.form == DriverForm::kQuadratic) {
        const double gamma_sum = g1.gamma + g2.gamma;
        const double share = g2.gamma / gamma_sum;  // stationary point of the quadratic sum
        data->closed_form = true;
        data->argmin = [share](double, double z) { return share * z; };
        g3.eval = [gamma_sum](double, double z) { return z * z / (2.0 * gamma_sum); };
    } else if (g1.form == DriverForm::kAbs && g2.form == DriverForm::kAbs) {
        // convex flags imply mu >= 0 here; y = 0 unless shifting everything
        // to the cheaper agent strictly wins
        const double mu_min = std::min(g1.mu, g2.mu);
        const bool second_cheaper = g2.mu < g1.mu;
        data->closed_form = true;
        data->argmin = [second_cheaper](double, double z) { return second_cheaper ? z : 0.0; };
        g3.eval = [mu_min](double, double z) { return mu_min * std::fabs(z); };
    } else {
        const Driver a = g1;
        const Driver b = g2;
        const double ghw = grid_half_width;
        const double rtol = refine_tol;
        g3.eval = [a, b, ghw, rtol](double t, double z) {
            return infconv_minimize(a, b, t, z, ghw, rtol).value;
        };
        data->argmin = [a, b, ghw, rtol](double t, double z) {
            return infconv_minimize(a, b, t, z, ghw, rtol).argmin;
        };
    }
    g3.infconv = std::move(data);
    return g3;
}

double infconv_argmin(const Driver& g3, double t, double z) {
    if (g3.form != DriverForm::kInfConv || !g3.infconv) {
        throw ValidationError("infconv_argmin: driver `" + g3.id +
                              "` was not produced by infconv");
    }
    return g3.infconv->argmin(t, z);
}

namespace detail {

double infconv_numeric_value(const Driver& g1, const Driver& g2, double t, double z,
                             double grid_half_width, double refine_tol) {
    return infconv_minimize(g1, g2, t, z, grid_half_width, refine_tol).value;
}

double infconv_numeric_argmin(const Driver& g1, const Driver& g2, double t, double z,
                              double grid_half_width, double refine_tol) {
    return infconv_minimize(g1, g2, t, z, grid_half_width, refine_tol).argmin;
}

}  // namespace detail

}  // namespace cbsde
