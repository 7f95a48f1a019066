#include "minphase/phi.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace minphase {

namespace {

// Ramp layout: phi(s) = s up to kRampEnd, then a smooth cutoff reaching 0
// before kRampCut where the first plateau's support begins.
constexpr double kRampEnd = 0.46;
constexpr double kRampCut = 0.50;

// C-infinity step 0 -> 1 on [0,1] built from sigma(t) = e^{-1/t}.  Outside a
// small guard band the step is clamped exactly (the neglected tail is below
// e^{-50}), which keeps the pieces identically constant off their supports.
struct Jet2 {
    double v = 0.0, d1 = 0.0, d2 = 0.0;
};

Jet2 sigma_jet(double t) {
    Jet2 s;
    if (t <= 0.0) return s;
    const double e = std::exp(-1.0 / t);
    s.v = e;
    s.d1 = e / (t * t);
    s.d2 = e * (1.0 / (t * t * t * t) - 2.0 / (t * t * t));
    return s;
}

Jet2 smoothstep(double t) {
    if (t < 0.02) return {0.0, 0.0, 0.0};
    if (t > 0.98) return {1.0, 0.0, 0.0};
    const Jet2 a = sigma_jet(t);
    const Jet2 b0 = sigma_jet(1.0 - t);
    // b(t) = sigma(1-t): sign flips on odd derivative orders.
    const double b = b0.v, bd1 = -b0.d1, bd2 = b0.d2;
    const double den = a.v + b;
    const double num = a.d1 * b - a.v * bd1;
    Jet2 out;
    out.v = a.v / den;
    out.d1 = num / (den * den);
    const double num_d = a.d2 * b - a.v * bd2;
    out.d2 = (num_d * den - 2.0 * num * (a.d1 + bd1)) / (den * den * den);
    return out;
}

// Flat-top bump of height 1 on [lo, hi] with smooth edges of length e inside
// the interval.
Jet2 bump(double s, double lo, double hi, double e) {
    if (s <= lo || s >= hi) return {0.0, 0.0, 0.0};
    if (s < lo + e) {
        Jet2 r = smoothstep((s - lo) / e);
        return {r.v, r.d1 / e, r.d2 / (e * e)};
    }
    if (s > hi - e) {
        Jet2 r = smoothstep((hi - s) / e);
        return {r.v, -r.d1 / e, r.d2 / (e * e)};
    }
    return {1.0, 0.0, 0.0};
}

double trapezoid(const std::function<double(double)>& f, double lo, double hi, int nodes) {
    if (hi <= lo) return 0.0;
    const double h = (hi - lo) / nodes;
    double acc = 0.5 * (f(lo) + f(hi));
    for (int i = 1; i < nodes; ++i) acc += f(lo + i * h);
    return acc * h;
}

constexpr int kQuadNodes = 800;

}  // namespace

struct PhiRegions {
    // Region i covers [lo[i], hi[i]]; phi vanishes between regions.  cum_*[i]
    // holds the integral over all earlier regions.
    std::vector<double> lo, hi, mass_l1, mass_sq, cum_l1, cum_sq;
};

PhiFunction::PhiFunction(PhiSpec spec) : spec_(spec) {
    if (spec_.k_max < 1) throw std::invalid_argument("PhiFunction: k_max must be >= 1");
    if (spec_.edge_fraction <= 0.0 || spec_.edge_fraction >= 0.5)
        throw std::invalid_argument("PhiFunction: edge_fraction must lie in (0, 0.5)");
    auto regions = std::make_shared<PhiRegions>();
    auto push = [&](double lo, double hi) {
        regions->lo.push_back(lo);
        regions->hi.push_back(hi);
        regions->mass_l1.push_back(
            trapezoid([this](double s) { return value(s); }, lo, hi, kQuadNodes));
        regions->mass_sq.push_back(trapezoid(
            [this](double s) {
                const double v = value(s);
                return v * v;
            },
            lo, hi, kQuadNodes));
    };
    push(0.0, kRampCut);
    for (int k = 1; k <= spec_.k_max; ++k) {
        const double w = plateau_width(k), c = plateau_center(k);
        push(c - 0.5 * w, c + 0.5 * w);
    }
    double acc_l1 = 0.0, acc_sq = 0.0;
    for (std::size_t i = 0; i < regions->lo.size(); ++i) {
        regions->cum_l1.push_back(acc_l1);
        regions->cum_sq.push_back(acc_sq);
        acc_l1 += regions->mass_l1[i];
        acc_sq += regions->mass_sq[i];
    }
    regions->cum_l1.push_back(acc_l1);
    regions->cum_sq.push_back(acc_sq);
    regions_ = regions;
}

double PhiFunction::plateau_height(int k) const {
    return k == 1 ? 2.5 : std::pow(static_cast<double>(k), 5.0);
}

double PhiFunction::plateau_center(int k) const { return k == 1 ? 0.7 : static_cast<double>(k); }

double PhiFunction::plateau_width(int k) const {
    return k == 1 ? 0.4 : std::pow(static_cast<double>(k), -7.0);
}

double PhiFunction::value(double s, int deriv) const {
    if (deriv < 0 || deriv > 2) throw DomainError("phi: derivative order beyond 2");
    if (s <= 0.0) return 0.0;
    if (s < kRampCut) {
        // s * (1 - S((s - kRampEnd)/(kRampCut - kRampEnd)))
        const double e = kRampCut - kRampEnd;
        const Jet2 st = smoothstep((s - kRampEnd) / e);
        const double c = 1.0 - st.v, c1 = -st.d1 / e, c2 = -st.d2 / (e * e);
        switch (deriv) {
            case 0: return s * c;
            case 1: return c + s * c1;
            default: return 2.0 * c1 + s * c2;
        }
    }
    // Plateau supports are disjoint; only neighbouring indices can contain s.
    const int lo_k = std::max(1, static_cast<int>(std::floor(s)) - 1);
    const int hi_k = std::min(spec_.k_max, static_cast<int>(std::ceil(s)) + 1);
    for (int k = lo_k; k <= hi_k; ++k) {
        const double w = plateau_width(k), c = plateau_center(k);
        const double a = c - 0.5 * w, b = c + 0.5 * w;
        if (s <= a || s >= b) continue;
        const Jet2 bp = bump(s, a, b, spec_.edge_fraction * w);
        const double h = plateau_height(k);
        switch (deriv) {
            case 0: return h * bp.v;
            case 1: return h * bp.d1;
            default: return h * bp.d2;
        }
    }
    return 0.0;
}

double PhiFunction::plateau_l1_mass(int k) const {
    if (k < 1 || k > spec_.k_max) throw std::out_of_range("phi: plateau index");
    return regions_->mass_l1[static_cast<std::size_t>(k)];
}

double PhiFunction::accumulate(double a, bool squared) const {
    if (a <= 0.0) return 0.0;
    const auto& r = *regions_;
    const auto& cum = squared ? r.cum_sq : r.cum_l1;
    // First region with lo >= a; everything before index i-1 is fully covered.
    auto it = std::lower_bound(r.lo.begin(), r.lo.end(), a);
    const std::size_t i = static_cast<std::size_t>(it - r.lo.begin());
    double acc = cum[i];
    if (i > 0 && a < r.hi[i - 1]) {
        // a lands inside region i-1: subtract nothing, add the partial piece
        // instead of that region's full mass.
        acc = cum[i - 1];
        auto f = [&](double s) {
            const double v = value(s);
            return squared ? v * v : v;
        };
        acc += trapezoid(f, r.lo[i - 1], a, kQuadNodes);
    }
    return acc;
}

double PhiFunction::integral_phi(double a) const { return accumulate(a, false); }

double PhiFunction::integral_phi_squared(double a) const { return accumulate(a, true); }

std::shared_ptr<const SmoothFn> PhiFunction::as_smooth_fn() const {
    auto self = *this;
    auto fn = std::make_shared<SmoothFn>();
    fn->name = "phi";
    fn->max_deriv = 2;
    fn->eval = [self](double s, int k) { return self.value(s, k); };
    return fn;
}

std::shared_ptr<const SmoothFn> PhiFunction::h1_smooth_fn() const {
    auto self = *this;
    auto fn = std::make_shared<SmoothFn>();
    fn->name = "hphi";
    fn->max_deriv = 2;
    fn->eval = [self](double s, int k) -> double {
        if (s < 0.0) {
            if (k == 0) return -s;
            if (k == 1) return -1.0;
            if (k == 2) return 0.0;
            throw DomainError("hphi: derivative order beyond 2");
        }
        return self.value(s, k);
    };
    return fn;
}

std::shared_ptr<const SmoothFn> PhiFunction::storage_smooth_fn() const {
    auto self = *this;
    auto fn = std::make_shared<SmoothFn>();
    fn->name = "Vphi";
    fn->max_deriv = 1;
    fn->eval = [self](double s, int k) -> double {
        if (k > 1) throw DomainError("Vphi: derivative order beyond 1");
        if (s < 0.0) return k == 0 ? s * s : 2.0 * s;
        if (k == 0) return 2.0 * self.integral_phi_squared(s) - s * s * s / 3.0;
        const double p = self.value(s);
        return 2.0 * p * p - s * s;
    };
    return fn;
}

}  // namespace minphase
