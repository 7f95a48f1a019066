#include "minphase/gains.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace minphase {

namespace detail {

struct KLNode;

struct KNode {
    enum class Kind { Identity, Linear, Power, Sum, Compose, Scale, Stretch, Tabulated, Frozen };
    Kind kind = Kind::Identity;
    double a = 1.0;  // Linear/Power coefficient, Scale/Stretch factor
    double p = 1.0;  // Power exponent
    std::shared_ptr<const KNode> lhs, rhs;
    std::vector<double> xs, ys;            // Tabulated knots
    std::shared_ptr<const KLNode> kl;      // Frozen
    double t0 = 0.0;                       // Frozen time
};

struct KLNode {
    enum class Kind { ExpDecay, OuterK, InnerK, Sum, TimeScale, Nest, Zero };
    Kind kind = Kind::ExpDecay;
    double lambda = 1.0;  // ExpDecay rate
    double c = 1.0;       // TimeScale factor
    std::shared_ptr<const KNode> k;
    std::shared_ptr<const KLNode> b, b2;
};

namespace {

double eval_kl(const KLNode& n, double s, double t);

double eval_k(const KNode& n, double s) {
    s = std::max(s, 0.0);
    switch (n.kind) {
        case KNode::Kind::Identity: return s;
        case KNode::Kind::Linear: return n.a * s;
        case KNode::Kind::Power: return n.a * std::pow(s, n.p);
        case KNode::Kind::Sum: return eval_k(*n.lhs, s) + eval_k(*n.rhs, s);
        case KNode::Kind::Compose: return eval_k(*n.lhs, eval_k(*n.rhs, s));
        case KNode::Kind::Scale: return n.a * eval_k(*n.lhs, s);
        case KNode::Kind::Stretch: return eval_k(*n.lhs, n.a * s);
        case KNode::Kind::Frozen: return eval_kl(*n.kl, s, n.t0);
        case KNode::Kind::Tabulated: {
            const auto& xs = n.xs;
            const auto& ys = n.ys;
            if (s >= xs.back()) {
                const std::size_t m = xs.size();
                const double slope = (ys[m - 1] - ys[m - 2]) / (xs[m - 1] - xs[m - 2]);
                return ys.back() + slope * (s - xs.back());
            }
            const auto it = std::upper_bound(xs.begin(), xs.end(), s);
            const std::size_t i = static_cast<std::size_t>(it - xs.begin());
            if (i == 0) return ys.front();
            const double w = (s - xs[i - 1]) / (xs[i] - xs[i - 1]);
            return ys[i - 1] + w * (ys[i] - ys[i - 1]);
        }
    }
    return 0.0;
}

double eval_kl(const KLNode& n, double s, double t) {
    s = std::max(s, 0.0);
    t = std::max(t, 0.0);
    switch (n.kind) {
        case KLNode::Kind::ExpDecay: return eval_k(*n.k, s) * std::exp(-n.lambda * t);
        case KLNode::Kind::OuterK: return eval_k(*n.k, eval_kl(*n.b, s, t));
        case KLNode::Kind::InnerK: return eval_kl(*n.b, eval_k(*n.k, s), t);
        case KLNode::Kind::Sum: return eval_kl(*n.b, s, t) + eval_kl(*n.b2, s, t);
        case KLNode::Kind::TimeScale: return eval_kl(*n.b, s, n.c * t);
        case KLNode::Kind::Nest: return eval_kl(*n.b, eval_kl(*n.b2, s, t), t);
        case KLNode::Kind::Zero: return 0.0;
    }
    return 0.0;
}

std::string fmt(double v) {
    std::ostringstream out;
    out << v;
    return out.str();
}

std::string render_kl(const KLNode& n, const std::string& s, const std::string& t);

std::string render_k(const KNode& n, const std::string& s) {
    switch (n.kind) {
        case KNode::Kind::Identity: return s;
        case KNode::Kind::Linear: return fmt(n.a) + "*" + s;
        case KNode::Kind::Power: return fmt(n.a) + "*" + s + "^" + fmt(n.p);
        case KNode::Kind::Sum: return render_k(*n.lhs, s) + " + " + render_k(*n.rhs, s);
        case KNode::Kind::Compose: return render_k(*n.lhs, "(" + render_k(*n.rhs, s) + ")");
        case KNode::Kind::Scale: return fmt(n.a) + "*(" + render_k(*n.lhs, s) + ")";
        case KNode::Kind::Stretch: return render_k(*n.lhs, "(" + fmt(n.a) + "*" + s + ")");
        case KNode::Kind::Frozen:
            return render_kl(*n.kl, s, fmt(n.t0));
        case KNode::Kind::Tabulated:
            return "table[" + std::to_string(n.xs.size()) + "](" + s + ")";
    }
    return "?";
}

std::string render_kl(const KLNode& n, const std::string& s, const std::string& t) {
    switch (n.kind) {
        case KLNode::Kind::ExpDecay:
            return render_k(*n.k, s) + "*e^(-" + fmt(n.lambda) + "*" + t + ")";
        case KLNode::Kind::OuterK: return render_k(*n.k, "(" + render_kl(*n.b, s, t) + ")");
        case KLNode::Kind::InnerK:
            return render_kl(*n.b, "(" + render_k(*n.k, s) + ")", t);
        case KLNode::Kind::Sum: return render_kl(*n.b, s, t) + " + " + render_kl(*n.b2, s, t);
        case KLNode::Kind::TimeScale:
            return render_kl(*n.b, s, "(" + fmt(n.c) + "*" + t + ")");
        case KLNode::Kind::Nest:
            return render_kl(*n.b, "(" + render_kl(*n.b2, s, t) + ")", t);
        case KLNode::Kind::Zero: return "0";
    }
    return "?";
}

}  // namespace

}  // namespace detail

using detail::KLNode;
using detail::KNode;

namespace {

std::shared_ptr<const KNode> knode(KNode n) { return std::make_shared<const KNode>(std::move(n)); }
std::shared_ptr<const KLNode> klnode(KLNode n) {
    return std::make_shared<const KLNode>(std::move(n));
}

}  // namespace

// ---- ClassK -----------------------------------------------------------------

ClassK::ClassK() : node_(knode({})) {}
ClassK::ClassK(std::shared_ptr<const KNode> node) : node_(std::move(node)) {}

double ClassK::operator()(double s) const { return detail::eval_k(*node_, s); }

std::string ClassK::str() const { return detail::render_k(*node_, "s"); }

bool ClassK::validate(double s_max, int samples) const {
    if (samples < 2) return false;
    double prev = (*this)(0.0);
    if (std::abs(prev) > 1e-12) return false;
    for (int i = 1; i < samples; ++i) {
        const double s = s_max * i / (samples - 1);
        const double v = (*this)(s);
        if (!std::isfinite(v) || v <= prev) return false;
        prev = v;
    }
    return true;
}

ClassK ClassK::identity() { return ClassK(); }

ClassK ClassK::linear(double a) {
    if (a <= 0.0) throw GainError("linear gain needs a positive coefficient");
    KNode n;
    n.kind = KNode::Kind::Linear;
    n.a = a;
    return ClassK(knode(std::move(n)));
}

ClassK ClassK::power(double a, double p) {
    if (a <= 0.0 || p <= 0.0) throw GainError("power gain needs positive coefficient and exponent");
    KNode n;
    n.kind = KNode::Kind::Power;
    n.a = a;
    n.p = p;
    return ClassK(knode(std::move(n)));
}

ClassK ClassK::tabulated(std::vector<double> s, std::vector<double> v) {
    if (s.size() != v.size() || s.size() < 2)
        throw GainError("tabulated gain needs matching knot lists with >= 2 entries");
    if (s.front() != 0.0 || v.front() != 0.0)
        throw GainError("tabulated gain must start at (0, 0)");
    for (std::size_t i = 1; i < s.size(); ++i)
        if (s[i] <= s[i - 1] || v[i] <= v[i - 1])
            throw GainError("tabulated gain knots must increase strictly");
    KNode n;
    n.kind = KNode::Kind::Tabulated;
    n.xs = std::move(s);
    n.ys = std::move(v);
    return ClassK(knode(std::move(n)));
}

ClassK compose(const ClassK& outer, const ClassK& inner) {
    KNode n;
    n.kind = KNode::Kind::Compose;
    n.lhs = outer.node_;
    n.rhs = inner.node_;
    return ClassK(knode(std::move(n)));
}

ClassK sum(const ClassK& a, const ClassK& b) {
    KNode n;
    n.kind = KNode::Kind::Sum;
    n.lhs = a.node_;
    n.rhs = b.node_;
    return ClassK(knode(std::move(n)));
}

ClassK scale(double c, const ClassK& k) {
    if (c <= 0.0) throw GainError("scale factor must be positive");
    KNode n;
    n.kind = KNode::Kind::Scale;
    n.a = c;
    n.lhs = k.node_;
    return ClassK(knode(std::move(n)));
}

ClassK stretch(const ClassK& k, double c) {
    if (c <= 0.0) throw GainError("stretch factor must be positive");
    KNode n;
    n.kind = KNode::Kind::Stretch;
    n.a = c;
    n.lhs = k.node_;
    return ClassK(knode(std::move(n)));
}

// ---- ClassKL ----------------------------------------------------------------

ClassKL::ClassKL() : node_() {
    KLNode n;
    n.kind = KLNode::Kind::ExpDecay;
    n.lambda = 1.0;
    n.k = ClassK::identity().node_;
    node_ = klnode(std::move(n));
}

ClassKL::ClassKL(std::shared_ptr<const KLNode> node) : node_(std::move(node)) {}

double ClassKL::operator()(double s, double t) const { return detail::eval_kl(*node_, s, t); }

std::string ClassKL::str() const { return detail::render_kl(*node_, "s", "t"); }

bool ClassKL::validate(double s_max, double t_max, int samples) const {
    for (int ti = 0; ti < 6; ++ti) {
        const double t = t_max * ti / 5.0;
        if (!freeze_time(*this, t).validate(s_max, samples)) return false;
    }
    for (int si = 1; si <= 6; ++si) {
        const double s = s_max * si / 6.0;
        double prev = (*this)(s, 0.0);
        for (int ti = 1; ti < samples; ++ti) {
            const double t = t_max * ti / (samples - 1);
            const double v = (*this)(s, t);
            if (!std::isfinite(v) || v > prev + 1e-12 * (1.0 + std::abs(prev))) return false;
            prev = v;
        }
    }
    return true;
}

ClassKL ClassKL::exp_decay(const ClassK& k, double lambda) {
    if (lambda <= 0.0) throw GainError("decay rate must be positive");
    KLNode n;
    n.kind = KLNode::Kind::ExpDecay;
    n.lambda = lambda;
    n.k = k.node_;
    return ClassKL(klnode(std::move(n)));
}

ClassKL ClassKL::zero() {
    KLNode n;
    n.kind = KLNode::Kind::Zero;
    return ClassKL(klnode(std::move(n)));
}

ClassKL compose_outer(const ClassK& k, const ClassKL& b) {
    KLNode n;
    n.kind = KLNode::Kind::OuterK;
    n.k = k.node_;
    n.b = b.node_;
    return ClassKL(klnode(std::move(n)));
}

ClassKL compose_inner(const ClassKL& b, const ClassK& k) {
    KLNode n;
    n.kind = KLNode::Kind::InnerK;
    n.k = k.node_;
    n.b = b.node_;
    return ClassKL(klnode(std::move(n)));
}

ClassKL kl_sum(const ClassKL& a, const ClassKL& b) {
    KLNode n;
    n.kind = KLNode::Kind::Sum;
    n.b = a.node_;
    n.b2 = b.node_;
    return ClassKL(klnode(std::move(n)));
}

ClassKL time_scale(const ClassKL& b, double c) {
    if (c <= 0.0) throw GainError("time scale factor must be positive");
    KLNode n;
    n.kind = KLNode::Kind::TimeScale;
    n.c = c;
    n.b = b.node_;
    return ClassKL(klnode(std::move(n)));
}

ClassKL kl_nest(const ClassKL& outer, const ClassKL& inner) {
    KLNode n;
    n.kind = KLNode::Kind::Nest;
    n.b = outer.node_;
    n.b2 = inner.node_;
    return ClassKL(klnode(std::move(n)));
}

ClassK freeze_time(const ClassKL& b, double t0) {
    if (t0 < 0.0) throw GainError("freeze time must be nonnegative");
    KNode n;
    n.kind = KNode::Kind::Frozen;
    n.kl = b.node_;
    n.t0 = t0;
    return ClassK(knode(std::move(n)));
}

ClassK relax_sum(const ClassK& chi) { return stretch(chi, 2.0); }

// ---- Composite estimates ----------------------------------------------------

OverallGains output_input_gains(const ClassK& rho1, const ClassK& rho2, const ClassKL& beta_bar,
                                const ClassK& gamma_bar) {
    OverallGains out{ClassKL::zero(), ClassK::identity()};
    out.beta = kl_sum(compose_outer(stretch(rho1, 2.0), beta_bar), beta_bar);
    out.gamma = sum(sum(compose(stretch(rho1, 2.0), gamma_bar), rho2), gamma_bar);
    return out;
}

CascadeGains cascade_gains(const ClassKL& beta1, const ClassK& gamma1, const ClassKL& beta2,
                           const ClassK& gamma2, const ClassK& gamma0, const ClassK& rho1,
                           const ClassK& rho2) {
    const ClassKL b1_half = time_scale(beta1, 0.5);
    const ClassKL b2_half = time_scale(beta2, 0.5);

    CascadeGains out{ClassKL::zero(), ClassKL::zero(), ClassK::identity(), ClassK::identity()};
    out.beta_drive = kl_nest(b1_half, compose_outer(ClassK::linear(3.0), b1_half));

    const ClassK via_start = compose(stretch(rho1, 2.0), freeze_time(beta2, 0.0));
    out.beta_driven =
        kl_sum(compose_inner(b1_half, scale(9.0, compose(stretch(gamma1, 3.0), via_start))),
               compose_outer(stretch(gamma1, 3.0), compose_outer(stretch(rho1, 2.0), b2_half)));

    out.gamma_out = sum(gamma0, compose(freeze_time(beta1, 0.0), scale(3.0, gamma0)));

    const ClassK via_gain = compose(stretch(rho1, 2.0), gamma2);
    const ClassK t1 =
        compose(freeze_time(beta1, 0.0), scale(9.0, compose(stretch(gamma1, 3.0), via_gain)));
    const ClassK t2 =
        compose(freeze_time(beta1, 0.0), scale(9.0, compose(stretch(gamma1, 3.0), rho2)));
    const ClassK t3 = compose(stretch(gamma1, 3.0), via_gain);
    const ClassK t4 = compose(stretch(gamma1, 3.0), rho2);
    out.gamma_jet = sum(sum(t1, t2), sum(t3, t4));
    return out;
}

LiftedGains order_reduction_gains(const EstimateFamily& in) {
    LiftedGains out{ClassKL::zero(), ClassKL::zero(), ClassK::identity(),   ClassK::identity(),
                    ClassKL::zero(), ClassKL::zero(), ClassK::identity(),   ClassK::identity(),
                    false,           false,           false};
    const ClassKL b1_half = time_scale(in.beta1, 0.5);
    const ClassKL b2_half = time_scale(in.beta2, 0.5);
    const ClassKL b3_half = time_scale(in.beta3, 0.5);

    // First stage, explicit.
    out.beta1 = kl_sum(
        compose_inner(b2_half,
                      scale(6.0, compose(stretch(in.gamma2, 4.0), freeze_time(in.beta3, 0.0)))),
        compose_outer(stretch(in.gamma2, 4.0), b3_half));
    out.beta2 = kl_nest(b2_half, compose_outer(ClassK::linear(3.0), b2_half));
    const ClassK top_gain = compose(stretch(in.gamma2, 4.0), in.gamma4);
    out.gamma0 = sum(compose(freeze_time(in.beta2, 0.0), scale(6.0, top_gain)), top_gain);
    out.gamma_top = sum(stretch(in.gamma2, 2.0),
                        compose(freeze_time(in.beta2, 0.0), scale(3.0, stretch(in.gamma2, 2.0))));

    // Second stage.  beta2_refined is explicit; the remaining three follow the
    // same substitution pattern and carry extra slack, hence the flags.
    const ClassK cap14 = compose(stretch(in.gamma1, 4.0), stretch(in.rho1, 4.0));
    const ClassKL b2_quarter = time_scale(in.beta2, 0.25);
    out.beta2_refined = kl_sum(
        compose_inner(b1_half,
                      scale(12.0, compose(stretch(in.gamma1, 3.0),
                                          compose(stretch(in.rho1, 2.0),
                                                  freeze_time(in.beta2, 0.0))))),
        compose_outer(cap14,
                      kl_nest(b2_quarter, compose_outer(ClassK::linear(2.0), b2_quarter))));

    const ClassKL hat1_half = time_scale(out.beta1, 0.5);
    out.beta1_refined = kl_sum(
        kl_sum(kl_nest(b1_half, compose_outer(ClassK::linear(4.0), b1_half)),
               compose_inner(b1_half, scale(8.0, compose(stretch(in.gamma3, 2.0),
                                                         freeze_time(in.beta3, 0.0))))),
        kl_sum(kl_sum(compose_outer(stretch(in.gamma3, 2.0), b3_half),
                      compose_outer(cap14, hat1_half)),
               compose_inner(b1_half,
                             scale(12.0, compose(stretch(in.gamma1, 3.0),
                                                 compose(stretch(in.rho1, 2.0),
                                                         freeze_time(out.beta1, 0.0)))))));
    out.beta1_refined_conservative = true;

    const ClassK g3g4 = compose(stretch(in.gamma3, 2.0), in.gamma4);
    out.gamma0_refined =
        sum(sum(compose(freeze_time(in.beta1, 0.0), scale(8.0, g3g4)), g3g4),
            sum(compose(cap14, out.gamma0),
                compose(freeze_time(in.beta1, 0.0),
                        scale(12.0, compose(stretch(in.gamma1, 3.0),
                                            compose(stretch(in.rho1, 2.0), out.gamma0))))));
    out.gamma0_refined_conservative = true;

    const ClassK top2 = stretch(out.gamma_top, 2.0);
    out.gamma_top_refined =
        sum(compose(cap14, top2),
            compose(freeze_time(in.beta1, 0.0),
                    scale(12.0, compose(stretch(in.gamma1, 3.0),
                                        compose(stretch(in.rho1, 2.0), top2)))));
    out.gamma_top_refined_conservative = true;
    return out;
}

ClassK envelope_from_function(const std::function<double(double)>& f, double s_max, int samples,
                              double slope_pad) {
    if (s_max <= 0.0 || samples < 2) throw GainError("envelope: bad domain or sample count");
    if (std::abs(f(0.0)) > 1e-9) throw GainError("envelope: function must vanish at 0");
    std::vector<double> xs(samples), ys(samples);
    double running = 0.0;
    for (int i = 0; i < samples; ++i) {
        const double s = s_max * i / (samples - 1);
        running = std::max(running, std::abs(f(s)));
        xs[i] = s;
        ys[i] = i == 0 ? 0.0 : running + slope_pad * s;
    }
    return ClassK::tabulated(std::move(xs), std::move(ys));
}

}  // namespace minphase
