#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace minphase {

struct GainError : std::runtime_error {
    explicit GainError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {
struct KNode;
struct KLNode;
}  // namespace detail

class ClassKL;

// Comparison function of class K: continuous, strictly increasing, k(0) = 0.
// Built as a closed term over a small grammar (identity, a*s, a*s^p, sums,
// compositions, monotone tables) so that composites remain printable and can
// be evaluated anywhere on [0, inf).
class ClassK {
  public:
    ClassK();  // identity
    double operator()(double s) const;
    std::string str() const;
    // Samples [0, s_max]; rejects decreasing segments and nonzero offset at 0.
    bool validate(double s_max = 100.0, int samples = 400) const;

    static ClassK identity();
    static ClassK linear(double a);
    static ClassK power(double a, double p);  // a * s^p, a > 0, p > 0
    // Piecewise-linear interpolation of (s, v) pairs, extended past the last
    // knot with the final slope.  Values must start at (0, 0) and increase.
    static ClassK tabulated(std::vector<double> s, std::vector<double> v);

  private:
    explicit ClassK(std::shared_ptr<const detail::KNode> node);
    std::shared_ptr<const detail::KNode> node_;
    friend ClassK compose(const ClassK&, const ClassK&);
    friend ClassK sum(const ClassK&, const ClassK&);
    friend ClassK scale(double, const ClassK&);
    friend ClassK stretch(const ClassK&, double);
    friend ClassKL compose_outer(const ClassK&, const ClassKL&);
    friend ClassKL compose_inner(const ClassKL&, const ClassK&);
    friend ClassK freeze_time(const ClassKL&, double);
    friend class ClassKL;
};

ClassK compose(const ClassK& outer, const ClassK& inner);  // outer(inner(s))
ClassK sum(const ClassK& a, const ClassK& b);
ClassK scale(double c, const ClassK& k);    // c * k(s), c > 0
ClassK stretch(const ClassK& k, double c);  // k(c * s), c > 0

// Comparison function of class KL: class K in s for each fixed t,
// nonincreasing in t with limit 0.  The grammar mirrors ClassK plus an
// exponential time factor; freezing t folds back into ClassK.
class ClassKL {
  public:
    ClassKL();  // s * e^{-t}
    double operator()(double s, double t) const;
    std::string str() const;
    bool validate(double s_max = 100.0, double t_max = 20.0, int samples = 48) const;

    static ClassKL exp_decay(const ClassK& k, double lambda);  // k(s) e^{-lambda t}
    static ClassKL zero();

  private:
    explicit ClassKL(std::shared_ptr<const detail::KLNode> node);
    std::shared_ptr<const detail::KLNode> node_;
    friend ClassKL compose_outer(const ClassK&, const ClassKL&);
    friend ClassKL compose_inner(const ClassKL&, const ClassK&);
    friend ClassKL kl_sum(const ClassKL&, const ClassKL&);
    friend ClassKL time_scale(const ClassKL&, double);
    friend ClassKL kl_nest(const ClassKL&, const ClassKL&);
    friend ClassK freeze_time(const ClassKL&, double);
};

ClassKL compose_outer(const ClassK& k, const ClassKL& b);  // k(b(s, t))
ClassKL compose_inner(const ClassKL& b, const ClassK& k);  // b(k(s), t)
ClassKL kl_sum(const ClassKL& a, const ClassKL& b);
ClassKL time_scale(const ClassKL& b, double c);  // b(s, c*t), c > 0
ClassKL kl_nest(const ClassKL& outer, const ClassKL& inner);  // outer(inner(s,t), t)
ClassK freeze_time(const ClassKL& b, double t0);

// Subadditivity surrogate: chi(a + b) <= relax_sum(chi)(a) + relax_sum(chi)(b)
// for any a, b >= 0, realised as s -> chi(2s).
ClassK relax_sum(const ClassK& chi);

// Combines a state-decay estimate |x(t)| <= beta_bar(|x0|, t) + gamma_bar(r)
// with a pointwise input-reconstruction bound |u| <= rho1(|x|) + rho2(r) into
// transient/gain comparison functions for the joint signal (u; x):
//   beta(s, t) = rho1(2 beta_bar(s, t)) + beta_bar(s, t)
//   gamma(s)   = rho1(2 gamma_bar(s)) + rho2(s) + gamma_bar(s)
struct OverallGains {
    ClassKL beta;
    ClassK gamma;
};
OverallGains output_input_gains(const ClassK& rho1, const ClassK& rho2, const ClassKL& beta_bar,
                                const ClassK& gamma_bar);

// Serial interconnection: a driving subsystem with estimate (beta1 in its own
// initial state, gains gamma0 on its input and gamma1 on its output), a driven
// subsystem with (beta2, gamma2), and a pointwise coupling bound through
// rho1/rho2.  Produces the four terms bounding the driving state:
//   |x1(t)| <= beta_drive(|x1(0)|, t) + beta_driven(|x2(0)|, t)
//              + gamma_out(sup |u1|) + gamma_jet(sup |jet of y2|).
struct CascadeGains {
    ClassKL beta_drive;   // transient in the driving block's initial state
    ClassKL beta_driven;  // transient in the driven block's initial state
    ClassK gamma_out;     // gain on the external input sup norm
    ClassK gamma_jet;     // gain on the driven output jet sup norm
};
CascadeGains cascade_gains(const ClassKL& beta1, const ClassK& gamma1, const ClassKL& beta2,
                           const ClassK& gamma2, const ClassK& gamma0, const ClassK& rho1,
                           const ClassK& rho2);

// Two-stage tightening of a family of transient/gain estimates indexed by how
// many output derivatives appear on the right-hand side.  The first stage is
// explicit; the second reuses the first and carries conservative completions
// (flagged) that are assembled with extra slack rather than tuned bounds.
struct EstimateFamily {
    ClassKL beta1, beta2, beta3;
    ClassK gamma1, gamma2, gamma3, gamma4;
    ClassK rho1;
};
struct LiftedGains {
    ClassKL beta1, beta2;  // first stage
    ClassK gamma0, gamma_top;
    ClassKL beta1_refined, beta2_refined;  // second stage
    ClassK gamma0_refined, gamma_top_refined;
    bool beta1_refined_conservative = false;
    bool gamma0_refined_conservative = false;
    bool gamma_top_refined_conservative = false;
};
LiftedGains order_reduction_gains(const EstimateFamily& in);

// Class-K majorant of a sampled scalar map with f(0) = 0: running maximum of
// |f| over [0, s_max] plus a small linear term to restore strict growth.
ClassK envelope_from_function(const std::function<double(double)>& f, double s_max,
                              int samples = 512, double slope_pad = 1e-9);

}  // namespace minphase
