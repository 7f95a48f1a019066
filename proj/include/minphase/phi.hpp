#pragma once

#include <memory>

#include "minphase/expr.hpp"

namespace minphase {

// Smooth nonnegative bump train used by the detectability counterexample
// cascade: a unit-slope ramp near zero followed by narrow plateaus of height
// k^5 and width k^-7 at the integers k >= 2, mollified with C-infinity edges.
// The first plateau is taller and wider (height 2.5, support [0.5, 0.9]) so
// the cumulative energy bound integral_0^a phi^2 >= a^3/4 holds for every a,
// not just past the second plateau, while its L1 mass stays below 1.
struct PhiSpec {
    int k_max = 50;
    double edge_fraction = 0.1;  // fraction of each plateau width spent on edges
};

struct PhiRegions;  // cached per-region quadrature masses

class PhiFunction {
public:
    explicit PhiFunction(PhiSpec spec = {});

    // k-th derivative of phi at s (k <= 2).
    double value(double s, int deriv = 0) const;

    // Region-aware trapezoid quadratures (a >= 0).
    double integral_phi(double a) const;
    double integral_phi_squared(double a) const;
    // Quadrature of phi over plateau k's support alone.
    double plateau_l1_mass(int k) const;

    double plateau_height(int k) const;
    double plateau_center(int k) const;
    double plateau_width(int k) const;

    const PhiSpec& spec() const { return spec_; }

    // phi as an expression-level function node.
    std::shared_ptr<const SmoothFn> as_smooth_fn() const;
    // The cascade head's output map: -s for s < 0, phi(s) for s >= 0.
    std::shared_ptr<const SmoothFn> h1_smooth_fn() const;
    // Storage function for the cascade head: s^2 for s < 0, else
    // integral_0^s (2 phi^2 - w^2) dw.  Only the first derivative is exposed.
    std::shared_ptr<const SmoothFn> storage_smooth_fn() const;

private:
    double accumulate(double a, bool squared) const;

    PhiSpec spec_;
    std::shared_ptr<const PhiRegions> regions_;
};

}  // namespace minphase
