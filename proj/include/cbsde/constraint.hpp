#pragma once

#include <functional>
#include <string>

namespace cbsde {

enum class ConstraintForm { kNone, kBand, kFloor, kSign, kCustom };

// Penalty function phi(t, z) >= 0 whose zero set is the admissible set for
// the integrand z. Immutable value object; flags are declared by constructors
// and spot-verified by the property suite. Flags are truthful for the
// builtins: a band of positive width is not subadditive and not positively
// homogeneous, and a floor at positive level does not vanish at z = 0.
struct Constraint {
    std::function<double(double t, double z)> eval;
    bool zero_at_zero = false;
    bool subadditive = false;
    bool positively_homogeneous = false;
    ConstraintForm form = ConstraintForm::kCustom;
    double k = 0.0;
    std::string id = "custom";

    bool is_none() const { return form == ConstraintForm::kNone; }
    double operator()(double t, double z) const { return eval(t, z); }
};

Constraint no_constraint();              // phi = 0
Constraint z_band_constraint(double k);  // phi = max(|z| - k, 0), k >= 0
Constraint z_floor_constraint(double k); // phi = max(k - z, 0),  k >= 0
Constraint z_sign_constraint();          // phi = max(-z, 0)
Constraint custom_constraint(std::string id, std::function<double(double, double)> eval,
                             bool zero_at_zero, bool subadditive,
                             bool positively_homogeneous);

}  // namespace cbsde
