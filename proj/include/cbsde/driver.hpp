#pragma once

#include <functional>
#include <memory>
#include <string>

namespace cbsde {

enum class DriverForm { kZero, kLinear, kAbs, kQuadratic, kCustom, kInfConv };

// The z-range on which the quadratic driver's declared Lipschitz constant is
// valid (|z| <= range gives |g'| <= range/gamma).
inline constexpr double kQuadraticLipschitzRange = 16.0;

struct InfconvData;

// BSDE coefficient g(t, z). Immutable value object; eval must vanish at z = 0
// for every t (the type is structurally independent of y) and respect the
// declared Lipschitz bound on the documented range. Structural flags are
// declared by constructors and spot-verified by the property suite, not
// proven. When the lower-affine fields are set they certify
// eval(t, z) >= lower_affine_a * z + lower_affine_b for all z.
struct Driver {
    std::function<double(double t, double z)> eval;
    double lipschitz_M = 0.0;
    bool convex = false;
    bool subadditive = false;
    bool positively_homogeneous = false;
    bool has_lower_affine = false;
    double lower_affine_a = 0.0;
    double lower_affine_b = 0.0;
    DriverForm form = DriverForm::kCustom;
    double mu = 0.0;     // kLinear / kAbs parameter
    double gamma = 0.0;  // kQuadratic parameter
    std::shared_ptr<const InfconvData> infconv;  // kInfConv only
    std::string id = "custom";

    double operator()(double t, double z) const { return eval(t, z); }
};

// Payload attached to drivers produced by infconv().
struct InfconvData {
    Driver g1;
    Driver g2;
    double grid_half_width = 10.0;
    double refine_tol = 1e-9;
    bool closed_form = false;
    // Minimizing y of g1(t, z-y) + g2(t, y), deterministic.
    std::function<double(double t, double z)> argmin;
};

Driver zero_driver();
Driver linear_driver(double mu);       // g = mu * z
Driver abs_driver(double mu);          // g = mu * |z|
Driver quadratic_driver(double gamma); // g = z^2 / (2 gamma), gamma > 0
Driver custom_driver(std::string id, std::function<double(double, double)> eval,
                     double lipschitz_M, bool convex, bool subadditive,
                     bool positively_homogeneous);
// Attach a lower-affine certificate to a driver (returns a copy).
Driver with_lower_affine(Driver g, double a, double b);

// g_lam(t, z) = lam * g(t, z/lam), lam > 0. Builtin forms map algebraically:
// abs and linear are fixed points, quadratic gamma becomes lam*gamma.
Driver dilate(const Driver& g, double lam);

// Driver-level inf-convolution (g1 [] g2)(t, z) = inf_y { g1(t, z-y) + g2(t, y) }.
// Requires both drivers convex-flagged and lower-affine certificates with the
// same slope (otherwise the infimum can be -inf). Quadratic/quadratic and
// abs/abs pairs (and pairs involving the zero driver) use closed forms; other
// pairs minimize numerically: a 1001-point coarse scan over
// [-grid_half_width*(1+|z|), +grid_half_width*(1+|z|)] followed by
// golden-section refinement to refine_tol on the argument. Argmin ties break
// toward the smallest |y|, then the smallest y.
Driver infconv(const Driver& g1, const Driver& g2,
               double grid_half_width = 10.0, double refine_tol = 1e-9);

// The minimizing y above for a driver produced by infconv().
double infconv_argmin(const Driver& g3, double t, double z);

namespace detail {
// Numeric inf-convolution value/argmin that never consults closed forms
// (used to cross-check them).
double infconv_numeric_value(const Driver& g1, const Driver& g2, double t, double z,
                             double grid_half_width, double refine_tol);
double infconv_numeric_argmin(const Driver& g1, const Driver& g2, double t, double z,
                              double grid_half_width, double refine_tol);
}  // namespace detail

}  // namespace cbsde
