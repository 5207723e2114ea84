#include "cbsde/constraint.hpp"

#include <cmath>
#include <utility>

#include "cbsde/errors.hpp"
#include "cbsde/format.hpp"

namespace cbsde {

namespace {

void require_level(double k, const char* which) {
    if (!(k >= 0.0) || !std::isfinite(k)) {
        throw ValidationError(std::string("constraint: ") + which +
                              " level must be a nonnegative finite real, got " + format_double(k));
    }
}

}  // namespace

Constraint no_constraint() {
    Constraint c;
    c.eval = [](double, double) { return 0.0; };
    c.zero_at_zero = true;
    c.subadditive = true;
    c.positively_homogeneous = true;
    c.form = ConstraintForm::kNone;
    c.id = "none";
    return c;
}

Constraint z_band_constraint(double k) {
    require_level(k, "band");
    Constraint c;
    c.eval = [k](double, double z) { return std::max(std::fabs(z) - k, 0.0); };
    c.zero_at_zero = true;
    // For k > 0: phi(k) + phi(k) = 0 < phi(2k) = k breaks subadditivity, and
    // phi(lam*k) != lam*phi(k) breaks positive homogeneity.
    c.subadditive = k == 0.0;
    c.positively_homogeneous = k == 0.0;
    c.form = ConstraintForm::kBand;
    c.k = k;
    c.id = "z_band(k=" + format_double(k) + ")";
    return c;
}

Constraint z_floor_constraint(double k) {
    require_level(k, "floor");
    Constraint c;
    c.eval = [k](double, double z) { return std::max(k - z, 0.0); };
    c.zero_at_zero = k == 0.0;
    // max(k - z1 - z2, 0) <= max(k - z1, 0) + max(k - z2, 0) holds for k >= 0:
    // if z1 + z2 < k then k - z1 - z2 <= (k - z1)^+ + (k - z2)^+ because at
    // least one of z1, z2 is below k and the other contributes (-z)^+ >= -z.
    c.subadditive = true;
    c.positively_homogeneous = k == 0.0;
    c.form = ConstraintForm::kFloor;
    c.k = k;
    c.id = "z_floor(k=" + format_double(k) + ")";
    return c;
}

Constraint z_sign_constraint() {
    Constraint c;
    c.eval = [](double, double z) { return std::max(-z, 0.0); };
    c.zero_at_zero = true;
    c.subadditive = true;
    c.positively_homogeneous = true;
    c.form = ConstraintForm::kSign;
    c.id = "z_sign";
    return c;
}

Constraint custom_constraint(std::string id, std::function<double(double, double)> eval,
                             bool zero_at_zero, bool subadditive,
                             bool positively_homogeneous) {
    if (!eval) throw ValidationError("constraint: eval must be callable");
    Constraint c;
    c.eval = std::move(eval);
    c.zero_at_zero = zero_at_zero;
    c.subadditive = subadditive;
    c.positively_homogeneous = positively_homogeneous;
    c.form = ConstraintForm::kCustom;
    c.id = std::move(id);
    return c;
}

}  // namespace cbsde
