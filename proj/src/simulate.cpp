#include "minphase/simulate.hpp"

#include <cmath>
#include <limits>

#include "minphase/jets.hpp"

namespace minphase {

namespace {

std::vector<Var> dynamics_layout(const SystemModel& model) {
    std::vector<Var> layout;
    layout.reserve(model.n + model.m);
    for (int i = 1; i <= model.n; ++i) layout.push_back(Var::state(i));
    for (int j = 1; j <= model.m; ++j) layout.push_back(Var::input(j));
    return layout;
}

}  // namespace

Trajectory integrate(const SystemModel& model, const Eigen::VectorXd& x0,
                     const std::vector<SignalPtr>& inputs, const IntegrateOptions& opts) {
    if (x0.size() != model.n) throw ModelError("integrate: x0 dimension mismatch");
    if (static_cast<int>(inputs.size()) != model.m)
        throw ModelError("integrate: expected " + std::to_string(model.m) + " input signals");
    if (opts.dt <= 0.0 || opts.horizon < 0.0) throw ModelError("integrate: bad step or horizon");

    const std::vector<Var> layout = dynamics_layout(model);
    std::vector<CompiledExpr> f;
    f.reserve(model.n);
    for (const Expr& fi : model.f) f.push_back(CompiledExpr::compile(fi, layout));

    const long long steps = std::llround(opts.horizon / opts.dt);
    const long long stride =
        opts.record_stride > 0 ? opts.record_stride : std::max<long long>(1, steps / 200000);

    // Step-like channels (no derivatives at all) are sampled just left of the
    // step's right endpoint so a switch landing exactly on a node does not
    // leak the post-switch value into the previous step's last stage.
    std::vector<bool> step_like(inputs.size());
    for (std::size_t j = 0; j < inputs.size(); ++j) step_like[j] = inputs[j]->smoothness() == 0;
    const double left_eps = opts.dt * std::ldexp(1.0, -20);

    Trajectory traj;
    const long long recorded_cap = steps / stride + 2;
    traj.t.reserve(recorded_cap);
    traj.x.resize(model.n, recorded_cap);
    traj.u.assign(opts.max_input_deriv + 1, Eigen::MatrixXd(model.m, recorded_cap));

    std::vector<double> slots(layout.size(), 0.0);
    Eigen::VectorXd x = x0;
    Eigen::VectorXd k1(model.n), k2(model.n), k3(model.n), k4(model.n), xs(model.n);

    auto sample_inputs = [&](double t, bool left_limit) {
        for (int j = 0; j < model.m; ++j) {
            const double tq = (left_limit && step_like[j]) ? t - left_eps : t;
            slots[model.n + j] = inputs[j]->value(tq, 0);
        }
    };
    auto eval_f = [&](const Eigen::VectorXd& state, Eigen::VectorXd& out) {
        for (int i = 0; i < model.n; ++i) slots[i] = state[i];
        for (int i = 0; i < model.n; ++i) out[i] = f[i].eval(slots.data());
    };
    auto record = [&](double t) {
        const long long col = traj.t.size();
        traj.t.push_back(t);
        traj.x.col(col) = x;
        for (int d = 0; d <= opts.max_input_deriv; ++d)
            for (int j = 0; j < model.m; ++j)
                traj.u[d](j, col) = d <= inputs[j]->smoothness()
                                        ? inputs[j]->value(t, d)
                                        : std::numeric_limits<double>::quiet_NaN();
    };

    record(0.0);
    for (long long k = 0; k < steps; ++k) {
        const double t = k * opts.dt;
        try {
            sample_inputs(t, false);
            eval_f(x, k1);
            sample_inputs(t + 0.5 * opts.dt, false);
            xs = x + 0.5 * opts.dt * k1;
            eval_f(xs, k2);
            xs = x + 0.5 * opts.dt * k2;
            eval_f(xs, k3);
            sample_inputs(t + opts.dt, true);
            xs = x + opts.dt * k3;
            eval_f(xs, k4);
        } catch (const EvalError&) {
            traj.status = TrajStatus::StiffRejected;
            traj.end_time = t;
            break;
        }
        x += (opts.dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        const double tn = (k + 1) * opts.dt;
        if (!x.allFinite() || x.norm() > opts.escape_norm) {
            traj.status = TrajStatus::Escaped;
            traj.end_time = tn;
            break;
        }
        if ((k + 1) % stride == 0 || k + 1 == steps) record(tn);
    }
    if (traj.status == TrajStatus::Completed) traj.end_time = steps * opts.dt;

    const long long cols = traj.t.size();
    traj.x.conservativeResize(Eigen::NoChange, cols);
    for (auto& mat : traj.u) mat.conservativeResize(Eigen::NoChange, cols);
    return traj;
}

ProbeResult probe_input(const SystemModel& model, int r, int N, const Eigen::VectorXd& x0,
                        double u0_seed) {
    Eigen::VectorXd seed = Eigen::VectorXd::Constant(model.m, u0_seed);
    return probe_input_channel(model, 0, 1, r, N, x0, seed);
}

ProbeResult probe_input_channel(const SystemModel& model, int output_index, int channel, int r,
                                int N, const Eigen::VectorXd& x0, const Eigen::VectorXd& u0_seed) {
    ProbeResult res;
    if (output_index < 0 || output_index >= model.l()) {
        res.reason = "output index out of range";
        return res;
    }
    if (channel < 1 || channel > model.m) {
        res.reason = "input channel out of range";
        return res;
    }
    if (x0.size() != model.n || u0_seed.size() != model.m) {
        res.reason = "seed dimension mismatch";
        return res;
    }
    if (N < r) N = r;

    const JetTable table = compute_jets(model, N);
    Bindings b;
    for (int i = 0; i < model.n; ++i) b[Var::state(i + 1)] = x0[i];
    for (int j = 0; j < model.m; ++j) b[Var::input(j + 1)] = u0_seed[j];
    // Higher derivatives default to zero on every channel; the probed
    // channel's are then solved one order at a time.
    for (int j = 1; j <= model.m; ++j)
        for (int d = 1; d <= N; ++d) b[Var::input(j, d)] = 0.0;

    const Expr pivot_expr = differentiate(table.at(output_index, r), Var::input(channel));
    double pivot = 0.0;
    try {
        pivot = evaluate(pivot_expr, b);
    } catch (const EvalError& e) {
        res.reason = std::string("pivot evaluation failed: ") + e.what();
        return res;
    }
    res.pivot = pivot;
    if (std::abs(pivot) < 1e-9) {
        res.reason = "input coefficient of the r-th output derivative vanishes at the seed";
        return res;
    }

    res.derivs.push_back(u0_seed[channel - 1]);
    for (int j = 1; j <= N - r; ++j) {
        // H_{r+j} is linear in the newest derivative u^{(j)} with slope equal
        // to the order-r input coefficient; zero it by direct solve.
        b[Var::input(channel, j)] = 0.0;
        double base_val = 0.0;
        try {
            base_val = evaluate(table.at(output_index, r + j), b);
        } catch (const EvalError& e) {
            res.reason = std::string("jet evaluation failed: ") + e.what();
            return res;
        }
        const double dj = -base_val / pivot;
        b[Var::input(channel, j)] = dj;
        res.derivs.push_back(dj);
    }

    // Package as signals: polynomial on the probed channel realising the jet,
    // constants elsewhere.
    std::vector<double> coeffs(res.derivs.size());
    double fact = 1.0;
    for (std::size_t i = 0; i < res.derivs.size(); ++i) {
        if (i > 0) fact *= static_cast<double>(i);
        coeffs[i] = res.derivs[i] / fact;
    }
    for (int j = 1; j <= model.m; ++j) {
        if (j == channel)
            res.signals.push_back(std::make_shared<PolynomialSignal>(coeffs));
        else
            res.signals.push_back(constant_signal(u0_seed[j - 1]));
    }
    res.ok = true;
    return res;
}

}  // namespace minphase
