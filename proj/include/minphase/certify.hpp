#pragma once

#include <Eigen/Dense>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "minphase/expr.hpp"
#include "minphase/gains.hpp"
#include "minphase/jets.hpp"
#include "minphase/simulate.hpp"
#include "minphase/system.hpp"

namespace minphase {

// Which signal the left-hand side of a transient-plus-gain estimate measures.
enum class Quantity { State, InputState };

// Candidate estimate  |q(t)| <= beta(|x(t0)|, t - t0) + gamma(sup_{[t0,t]} |y_N|)
// where q is the chosen quantity and y_N stacks the output value and its
// derivatives up to jet_order.  With restart_windows the estimate is also
// enforced from a grid of later start times t0 (time invariance of the
// dynamics makes every restart a valid trajectory); this is what gives the
// checker teeth against bounds that only survive thanks to an early output
// excursion inflating the sup norm.
struct BoundSpec {
    Quantity quantity = Quantity::State;
    int jet_order = 0;
    ClassKL beta;
    ClassK gamma;
    double weak_cap = std::numeric_limits<double>::infinity();  // skip runs with sup |y_N| above
    bool restart_windows = true;
    int restart_count = 12;
    double abs_slack = 1e-6;
    double rel_slack = 1e-3;
};

// How the trial trajectories are produced.
struct EnsembleSpec {
    int trajectories = 24;
    double horizon = 10.0;
    double dt = 1e-3;
    double x0_radius = 2.0;
    int max_input_deriv = 3;        // polynomial/sinusoid inputs carry this many derivatives
    double input_amplitude = 1.5;
    bool include_zero_input = true;
    bool include_switching = false; // add square-wave style runs (smoothness 0)
    unsigned long long seed = 7;
};

struct Ensemble {
    SystemModel model;
    std::vector<Trajectory> runs;
    // jet value tables per run: block rows are outputs, each block holding
    // orders 0..jet_order, columns are sample times.
    std::vector<Eigen::MatrixXd> jets;
    int jet_order = 0;
    std::vector<std::string> labels;  // how each run was generated
};

Ensemble build_ensemble(const SystemModel& model, int jet_order, const EnsembleSpec& spec = {});

enum class Verdict { Holds, Violated, Vacuous };
std::string to_string(Verdict v);

struct CertifyResult {
    Verdict verdict = Verdict::Vacuous;
    double margin = std::numeric_limits<double>::infinity();  // min slackened RHS - LHS
    int checks = 0;
    int runs_used = 0;
    int worst_run = -1;
    double worst_time = 0.0;
    double worst_window = 0.0;
    double worst_lhs = 0.0;
    double worst_rhs = 0.0;
    std::string detail;
};

CertifyResult certify(const Ensemble& ens, const BoundSpec& spec);

// Envelope fitting over the template family
//   beta(s, t) = a s^p e^{-lambda t},   gamma(s) = b s^q + c s
// with bounded coefficients.  Among feasible templates the fit prefers the
// fastest decay rate, then small transient and gain coefficients; an
// infeasible result means no template in the (capped) family covers the data.
struct FitOptions {
    std::vector<double> lambda_grid;     // default: 13 log-spaced points in [0.05, 4]
    std::vector<double> p_grid = {1.0, 2.0, 3.0};
    std::vector<double> q_grid = {1.0, 2.0, 3.0};
    double coeff_cap = 1e5;
    double abs_slack = 1e-6;
    double rel_slack = 1e-3;
};

struct EnvelopeFit {
    bool feasible = false;
    double a = 0.0, p = 1.0, lambda = 0.0;
    double b = 0.0, q = 1.0, c = 0.0;
    ClassKL beta = ClassKL::zero();
    ClassK gamma = ClassK::linear(1.0);
    double margin = 0.0;
    double residual = 0.0;  // smallest template violation when infeasible, else 0
    std::string detail;
};

EnvelopeFit fit_envelope(const Ensemble& ens, Quantity quantity, const FitOptions& opts = {});

// Pure transient fit |x(t)| <= a |x(0)|^p e^{-lambda t} for unforced runs.
struct TransientFit {
    bool feasible = false;
    double a = 0.0, p = 1.0, lambda = 0.0;
    double margin = 0.0;
};
TransientFit fit_transient(const std::vector<Trajectory>& runs, const FitOptions& opts = {});

// Searches for witnesses against any transient-plus-gain estimate of the given
// jet order: trajectories whose output jet stays tiny while the input or state
// remains order one.  Uses the jet-flattening probe around increasing input
// magnitudes; an unbounded score over the magnitude sweep means no class-K
// gain on the output jet can cover the input.
// The input-magnitude sweep used when FalsifyOptions::magnitudes is empty.
std::vector<double> default_magnitude_sweep();

struct FalsifyOptions {
    int jet_order = 1;
    std::vector<double> magnitudes;       // empty = default_magnitude_sweep()
    int perturbations = 6;                // random x0 tweaks per magnitude
    double x0_radius = 0.5;
    double base_horizon = 2.0;            // shrinks as the seed magnitude grows
    double dt = 1e-3;
    double score_threshold = 50.0;        // |u(0)| / (eps + |x0| + sup |y_N|) to declare a witness
    unsigned long long seed = 11;
};

struct FalsifyResult {
    bool found = false;
    double best_score = 0.0;
    int output = 0;
    int channel = 0;
    Eigen::VectorXd x0;
    std::vector<double> input_derivs;     // witness input jet at t = 0 on the probed channel
    double horizon = 0.0;
    double sup_jet = 0.0;
    double input_magnitude = 0.0;
    std::string detail;
};

FalsifyResult falsify(const SystemModel& model, const FalsifyOptions& opts = {});

// Pointwise dissipation check  dV/dx . f(x, u)  <=  -alpha(|x|) + chi(|y_k|)
// over a sampled box in state and input-jet space.
struct DissipationSpec {
    Expr V;
    ClassK alpha = ClassK::identity();
    ClassK chi = ClassK::identity();
    int jet_order = 0;
    double state_box = 3.0;
    double input_box = 3.0;
    int samples = 4000;
    double slack = 1e-9;
    unsigned long long seed = 5;
};

struct DissipationReport {
    bool holds = false;
    double margin = 0.0;       // min over samples of RHS - LHS
    double worst_lhs = 0.0;
    double worst_rhs = 0.0;
    Bindings worst;
    int checked = 0;
    std::string detail;
};

DissipationReport dissipation_check(const SystemModel& model, const DissipationSpec& spec);

}  // namespace minphase
