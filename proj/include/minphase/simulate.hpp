#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "minphase/signals.hpp"
#include "minphase/system.hpp"

namespace minphase {

struct IntegrateOptions {
    double dt = 1e-3;
    double horizon = 10.0;
    int record_stride = 0;       // 0 = choose automatically (<= ~200k nodes)
    double escape_norm = 1e8;
    int max_input_deriv = 0;     // input derivative channels to record
};

enum class TrajStatus { Completed, Escaped, StiffRejected };

struct Trajectory {
    std::vector<double> t;
    Eigen::MatrixXd x;                  // n x N
    std::vector<Eigen::MatrixXd> u;     // u[d]: m x N, derivative order d
    TrajStatus status = TrajStatus::Completed;
    double end_time = 0.0;              // escape/rejection timestamp if truncated
    int nodes() const { return static_cast<int>(t.size()); }
};

// Fixed-step classical Runge-Kutta integration of x' = f(x, u(t)).  Inputs are
// sampled exactly at stage times.  Stops early when |x| exceeds escape_norm
// (Escaped) or evaluation leaves the arithmetic domain (StiffRejected).
Trajectory integrate(const SystemModel& model, const Eigen::VectorXd& x0,
                     const std::vector<SignalPtr>& inputs, const IntegrateOptions& opts);

// Jet-flattening probe: starting from u(0) = seed, chooses the initial input
// derivatives on one channel so the output derivatives of orders r+1..N vanish
// at t = 0, then packages them as a polynomial input (other channels constant).
struct ProbeResult {
    bool ok = false;
    std::string reason;
    std::vector<double> derivs;        // probed channel: value and derivatives at 0
    double pivot = 0.0;                // dH_r/du at the construction point
    std::vector<SignalPtr> signals;    // full input vector
};

ProbeResult probe_input(const SystemModel& model, int r, int N, const Eigen::VectorXd& x0,
                        double u0_seed);
ProbeResult probe_input_channel(const SystemModel& model, int output_index, int channel, int r,
                                int N, const Eigen::VectorXd& x0, const Eigen::VectorXd& u0_seed);

}  // namespace minphase
