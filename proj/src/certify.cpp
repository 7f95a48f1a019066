#include "minphase/certify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <sstream>

namespace minphase {

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::Holds: return "holds";
        case Verdict::Violated: return "violated";
        case Verdict::Vacuous: return "vacuous";
    }
    return "?";
}

namespace {

constexpr double kPi = 3.141592653589793;

Eigen::MatrixXd stack_jets(const SystemModel& model, const JetTable& table,
                           const Trajectory& traj) {
    const int block = table.max_order + 1;
    Eigen::MatrixXd stacked(model.l() * block, traj.nodes());
    for (int out = 0; out < model.l(); ++out) {
        const JetSamples samples = jet_along_trajectory(table, out, model, traj);
        stacked.middleRows(out * block, block) = samples.values;
    }
    return stacked;
}

}  // namespace

Ensemble build_ensemble(const SystemModel& model, int jet_order, const EnsembleSpec& spec) {
    Ensemble ens;
    ens.model = model;
    ens.jet_order = jet_order;
    const JetTable table = compute_jets(model, jet_order);

    std::mt19937_64 rng(spec.seed);
    auto draw = [&](double lo, double hi) { return uniform_draw(rng(), lo, hi); };

    IntegrateOptions opts;
    opts.dt = spec.dt;
    opts.horizon = spec.horizon;
    opts.max_input_deriv = std::max(0, jet_order - 1);

    for (int k = 0; k < spec.trajectories; ++k) {
        std::vector<SignalPtr> signals;
        std::string label;
        const int families = 3 + (spec.include_zero_input ? 1 : 0) +
                             (spec.include_switching ? 1 : 0);
        int family = k % families;
        if (!spec.include_zero_input) ++family;  // families: 0 zero, 1 poly, 2 sin, 3 expcos, 4 sw

        // Switching runs replay the scripted dwell schedule from rest; the
        // other families draw a random start inside the radius.
        Eigen::VectorXd x0 = Eigen::VectorXd::Zero(model.n);
        if (family != 4)
            for (int i = 0; i < model.n; ++i) x0[i] = draw(-spec.x0_radius, spec.x0_radius);
        if (family == 0) {
            label = "zero";
            for (int j = 0; j < model.m; ++j) signals.push_back(constant_signal(0.0));
        } else if (family == 1) {
            label = "poly";
            for (int j = 0; j < model.m; ++j) {
                std::vector<double> coeffs;
                const int deg = std::min(spec.max_input_deriv, 3);
                for (int d = 0; d <= deg; ++d) {
                    const double scale =
                        d == 0 ? 1.0 : std::pow(1.5 / std::max(1.0, spec.horizon), d);
                    coeffs.push_back(draw(-spec.input_amplitude, spec.input_amplitude) * scale);
                }
                signals.push_back(std::make_shared<PolynomialSignal>(coeffs));
            }
        } else if (family == 2) {
            label = "sin";
            for (int j = 0; j < model.m; ++j) {
                std::vector<SinusoidTerm> terms;
                const int nterms = 1 + (k % 2);
                for (int q = 0; q < nterms; ++q)
                    terms.push_back({draw(-spec.input_amplitude, spec.input_amplitude),
                                     draw(0.3, 3.0), draw(0.0, 2.0 * kPi)});
                signals.push_back(std::make_shared<SinusoidSignal>(terms));
            }
        } else if (family == 3) {
            label = "expcos";
            for (int j = 0; j < model.m; ++j)
                signals.push_back(std::make_shared<ExpCosSignal>(
                    draw(-spec.input_amplitude, spec.input_amplitude), draw(-1.0, -0.05),
                    draw(0.3, 3.0), draw(0.0, 2.0 * kPi)));
        } else {
            label = "switching";
            for (int j = 0; j < model.m; ++j)
                signals.push_back(j == 0 ? std::static_pointer_cast<const SmoothSignal>(
                                               std::make_shared<SwitchingSignal>())
                                         : constant_signal(0.0));
        }

        Trajectory traj = integrate(model, x0, signals, opts);
        if (traj.status != TrajStatus::Completed) label += " (truncated)";
        ens.jets.push_back(stack_jets(model, table, traj));
        ens.runs.push_back(std::move(traj));
        ens.labels.push_back(label + " #" + std::to_string(k));
    }
    return ens;
}

CertifyResult certify(const Ensemble& ens, const BoundSpec& spec) {
    CertifyResult res;
    if (spec.jet_order > ens.jet_order)
        throw GainError("certify: ensemble records jets only up to order " +
                        std::to_string(ens.jet_order));
    const int block = ens.jet_order + 1;
    const int keep = spec.jet_order + 1;
    const int l = ens.model.l();

    for (std::size_t r = 0; r < ens.runs.size(); ++r) {
        const Trajectory& traj = ens.runs[r];
        const int cols = traj.nodes();
        if (cols < 2) continue;

        // Per-column jet norm (orders 0..jet_order over every output) and
        // left-hand-side quantity.
        Eigen::VectorXd jet_norm(cols), lhs(cols), state_norm(cols);
        for (int c = 0; c < cols; ++c) {
            double acc = 0.0;
            for (int out = 0; out < l; ++out)
                acc += ens.jets[r].block(out * block, c, keep, 1).squaredNorm();
            jet_norm[c] = std::sqrt(acc);
            state_norm[c] = traj.x.col(c).norm();
            if (spec.quantity == Quantity::State) {
                lhs[c] = state_norm[c];
            } else {
                double u2 = 0.0;
                for (int j = 0; j < ens.model.m; ++j) u2 += traj.u[0](j, c) * traj.u[0](j, c);
                lhs[c] = std::sqrt(state_norm[c] * state_norm[c] + u2);
            }
        }
        if (!jet_norm.allFinite() || !lhs.allFinite())
            throw GainError("certify: jet samples contain non-finite values at order " +
                            std::to_string(spec.jet_order));

        if (jet_norm.maxCoeff() > spec.weak_cap) continue;  // outside the weak regime
        ++res.runs_used;

        const int starts = spec.restart_windows ? std::max(1, spec.restart_count) : 1;
        for (int w = 0; w < starts; ++w) {
            const int c0 = static_cast<int>(static_cast<long long>(w) * (cols - 1) / starts);
            const double t0 = traj.t[c0];
            const double s0 = state_norm[c0];
            double sup_jet = 0.0;
            for (int c = c0; c < cols; ++c) {
                sup_jet = std::max(sup_jet, jet_norm[c]);
                const double rhs = spec.beta(s0, traj.t[c] - t0) + spec.gamma(sup_jet);
                const double slacked = rhs + spec.abs_slack + spec.rel_slack * rhs;
                const double margin = slacked - lhs[c];
                ++res.checks;
                if (margin < res.margin) {
                    res.margin = margin;
                    res.worst_run = static_cast<int>(r);
                    res.worst_time = traj.t[c];
                    res.worst_window = t0;
                    res.worst_lhs = lhs[c];
                    res.worst_rhs = slacked;
                }
            }
        }
    }

    std::ostringstream detail;
    if (res.checks == 0) {
        res.verdict = Verdict::Vacuous;
        detail << "no admissible trajectories (weak cap or empty ensemble)";
    } else if (res.margin < 0.0) {
        res.verdict = Verdict::Violated;
        detail << "estimate fails on run " << res.worst_run << " (" << ens.labels[res.worst_run]
               << ") window starting t=" << res.worst_window << " at t=" << res.worst_time
               << ": measured " << res.worst_lhs << " vs bound " << res.worst_rhs;
    } else {
        res.verdict = Verdict::Holds;
        detail << "estimate holds over " << res.runs_used << " runs / " << res.checks
               << " checks with margin " << res.margin;
    }
    res.detail = detail.str();
    return res;
}

namespace {

struct FitSample {
    double s0, t, lhs, jet;
};

std::vector<double> default_lambda_grid() {
    std::vector<double> grid;
    const double lo = 0.05, hi = 4.0;
    for (int i = 0; i < 13; ++i) grid.push_back(lo * std::pow(hi / lo, i / 12.0));
    return grid;
}

std::vector<FitSample> collect_samples(const Ensemble& ens, Quantity quantity) {
    std::vector<FitSample> samples;
    const int block = ens.jet_order + 1;
    const int l = ens.model.l();
    for (std::size_t r = 0; r < ens.runs.size(); ++r) {
        const Trajectory& traj = ens.runs[r];
        const int cols = traj.nodes();
        if (cols < 2) continue;
        const double s0 = traj.x.col(0).norm();
        const int stride = std::max(1, cols / 400);
        double sup_jet = 0.0;
        for (int c = 0; c < cols; ++c) {
            double acc = 0.0;
            for (int out = 0; out < l; ++out)
                acc += ens.jets[r].block(out * block, c, block, 1).squaredNorm();
            sup_jet = std::max(sup_jet, std::sqrt(acc));
            if (c % stride != 0 && c != cols - 1) continue;
            double lhs = traj.x.col(c).norm();
            if (quantity == Quantity::InputState) {
                double u2 = 0.0;
                for (int j = 0; j < ens.model.m; ++j) u2 += traj.u[0](j, c) * traj.u[0](j, c);
                lhs = std::sqrt(lhs * lhs + u2);
            }
            samples.push_back({s0, traj.t[c], lhs, sup_jet});
        }
    }
    return samples;
}

}  // namespace

EnvelopeFit fit_envelope(const Ensemble& ens, Quantity quantity, const FitOptions& opts) {
    EnvelopeFit fit;
    const std::vector<double> lambdas =
        opts.lambda_grid.empty() ? default_lambda_grid() : opts.lambda_grid;
    const std::vector<FitSample> samples = collect_samples(ens, quantity);
    if (samples.empty()) {
        fit.detail = "no samples";
        return fit;
    }

    auto feasible = [&](double lambda, double p, double q, double a, double b, double c) {
        for (const FitSample& s : samples) {
            const double rhs = a * std::pow(s.s0, p) * std::exp(-lambda * s.t) +
                               b * std::pow(s.jet, q) + c * s.jet;
            if (s.lhs > rhs + opts.abs_slack + opts.rel_slack * rhs) return false;
        }
        return true;
    };
    auto shrink = [&](double lo, double hi, const std::function<bool(double)>& ok) {
        // Smallest value in [lo, hi] keeping the family feasible (log split).
        if (ok(lo)) return lo;
        for (int i = 0; i < 48; ++i) {
            const double mid = std::sqrt(lo * hi);
            (ok(mid) ? hi : lo) = mid;
        }
        return hi;
    };

    // Prefer the fastest decay rate that any capped template can support,
    // then tighten the coefficients: transient first, linear gain, power gain.
    for (auto it = lambdas.rbegin(); it != lambdas.rend() && !fit.feasible; ++it) {
        for (double p : opts.p_grid) {
            for (double q : opts.q_grid) {
                if (!feasible(*it, p, q, opts.coeff_cap, opts.coeff_cap, opts.coeff_cap))
                    continue;
                fit.feasible = true;
                fit.lambda = *it;
                fit.p = p;
                fit.q = q;
                fit.a = shrink(1e-9, opts.coeff_cap, [&](double a) {
                    return feasible(*it, p, q, a, opts.coeff_cap, opts.coeff_cap);
                });
                fit.c = shrink(1e-9, opts.coeff_cap, [&](double c) {
                    return feasible(*it, p, q, fit.a, opts.coeff_cap, c);
                });
                fit.b = shrink(1e-9, opts.coeff_cap, [&](double b) {
                    return feasible(*it, p, q, fit.a, b, fit.c);
                });
                break;
            }
            if (fit.feasible) break;
        }
    }

    std::ostringstream detail;
    if (!fit.feasible) {
        fit.residual = std::numeric_limits<double>::infinity();
        for (double lambda : lambdas)
            for (double p : opts.p_grid)
                for (double q : opts.q_grid) {
                    double violation = 0.0;
                    for (const FitSample& s : samples) {
                        const double rhs =
                            opts.coeff_cap * std::pow(s.s0, p) * std::exp(-lambda * s.t) +
                            opts.coeff_cap * std::pow(s.jet, q) + opts.coeff_cap * s.jet;
                        violation = std::max(
                            violation, s.lhs - rhs - opts.abs_slack - opts.rel_slack * rhs);
                    }
                    fit.residual = std::min(fit.residual, violation);
                }
        detail << "no capped envelope template covers the data (caps " << opts.coeff_cap
               << ", residual " << fit.residual << ")";
        fit.detail = detail.str();
        return fit;
    }
    fit.beta = ClassKL::exp_decay(ClassK::power(std::max(fit.a, 1e-12), fit.p), fit.lambda);
    fit.gamma = sum(ClassK::power(std::max(fit.b, 1e-12), fit.q),
                    ClassK::linear(std::max(fit.c, 1e-12)));
    fit.margin = std::numeric_limits<double>::infinity();
    for (const FitSample& s : samples) {
        const double rhs = fit.a * std::pow(s.s0, fit.p) * std::exp(-fit.lambda * s.t) +
                           fit.b * std::pow(s.jet, fit.q) + fit.c * s.jet;
        fit.margin = std::min(fit.margin,
                              rhs + opts.abs_slack + opts.rel_slack * rhs - s.lhs);
    }
    detail << "transient " << fit.a << "*s^" << fit.p << "*e^(-" << fit.lambda
           << " t), gain " << fit.b << "*s^" << fit.q << " + " << fit.c << "*s, margin "
           << fit.margin;
    fit.detail = detail.str();
    return fit;
}

TransientFit fit_transient(const std::vector<Trajectory>& runs, const FitOptions& opts) {
    TransientFit fit;
    const std::vector<double> lambdas =
        opts.lambda_grid.empty() ? default_lambda_grid() : opts.lambda_grid;
    struct Pt {
        double s0, t, lhs;
    };
    std::vector<Pt> pts;
    for (const Trajectory& traj : runs) {
        const int cols = traj.nodes();
        const double s0 = cols > 0 ? traj.x.col(0).norm() : 0.0;
        const int stride = std::max(1, cols / 400);
        for (int c = 0; c < cols; c += stride) pts.push_back({s0, traj.t[c], traj.x.col(c).norm()});
    }
    if (pts.empty()) return fit;

    auto feasible = [&](double lambda, double p, double a) {
        for (const Pt& s : pts) {
            const double rhs = a * std::pow(s.s0, p) * std::exp(-lambda * s.t);
            if (s.lhs > rhs + opts.abs_slack + opts.rel_slack * rhs) return false;
        }
        return true;
    };
    for (auto it = lambdas.rbegin(); it != lambdas.rend() && !fit.feasible; ++it) {
        for (double p : opts.p_grid) {
            if (!feasible(*it, p, opts.coeff_cap)) continue;
            fit.feasible = true;
            fit.lambda = *it;
            fit.p = p;
            double lo = 1e-9, hi = opts.coeff_cap;
            if (feasible(*it, p, lo)) {
                fit.a = lo;
            } else {
                for (int i = 0; i < 48; ++i) {
                    const double mid = std::sqrt(lo * hi);
                    (feasible(*it, p, mid) ? hi : lo) = mid;
                }
                fit.a = hi;
            }
            break;
        }
    }
    if (!fit.feasible) return fit;
    fit.margin = std::numeric_limits<double>::infinity();
    for (const Pt& s : pts) {
        const double rhs = fit.a * std::pow(s.s0, fit.p) * std::exp(-fit.lambda * s.t);
        fit.margin = std::min(fit.margin, rhs + opts.abs_slack + opts.rel_slack * rhs - s.lhs);
    }
    return fit;
}

std::vector<double> default_magnitude_sweep() {
    return {1.0, 3.0, 10.0, 30.0, 100.0, 300.0, 1000.0, 3000.0, 10000.0};
}

FalsifyResult falsify(const SystemModel& model, const FalsifyOptions& opts) {
    FalsifyResult best;
    const std::vector<double> magnitudes =
        opts.magnitudes.empty() ? default_magnitude_sweep() : opts.magnitudes;
    const int N = opts.jet_order;
    const JetTable table = compute_jets(model, N);
    std::mt19937_64 rng(opts.seed);
    std::ostringstream detail;

    for (int out = 0; out < model.l(); ++out) {
        // First derivative order whose expression mentions the input jet.
        int r = N + 1;
        for (int k = 1; k <= N; ++k)
            if (dependence(table.at(out, k)).depends_on_inputs()) {
                r = k;
                break;
            }

        for (int channel = 1; channel <= model.m; ++channel) {
            for (double M : magnitudes) {
                const double horizon = opts.base_horizon / (1.0 + std::sqrt(M));
                IntegrateOptions iopts;
                iopts.horizon = horizon;
                iopts.dt = std::min(opts.dt, horizon / 50.0);
                iopts.max_input_deriv = std::max(0, N - 1);

                for (int pert = 0; pert < 2 * opts.perturbations; ++pert) {
                    const double sign = (pert % 2 == 0) ? 1.0 : -1.0;
                    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(model.n);
                    if (pert >= 2)
                        for (int i = 0; i < model.n; ++i)
                            x0[i] = uniform_draw(rng(), -opts.x0_radius, opts.x0_radius);

                    Eigen::VectorXd seed = Eigen::VectorXd::Zero(model.m);
                    seed[channel - 1] = sign * M;
                    std::vector<SignalPtr> signals;
                    std::vector<double> derivs{M};
                    if (r <= N) {
                        ProbeResult probe = probe_input_channel(model, out, channel, r, N, x0, seed);
                        if (probe.ok) {
                            signals = probe.signals;
                            derivs = probe.derivs;
                        }
                    }
                    if (signals.empty()) {
                        // No flattening possible (or needed): constant drive.
                        for (int j = 1; j <= model.m; ++j)
                            signals.push_back(constant_signal(seed[j - 1]));
                    }

                    Trajectory traj;
                    try {
                        traj = integrate(model, x0, signals, iopts);
                    } catch (const EvalError&) {
                        continue;
                    }
                    if (traj.nodes() < 2) continue;

                    double sup_jet = 0.0;
                    bool jet_ok = true;
                    try {
                        for (int o = 0; o < model.l(); ++o) {
                            const JetSamples js = jet_along_trajectory(table, o, model, traj);
                            for (int c = 0; c < js.values.cols(); ++c) {
                                const double nv = js.values.col(c).norm();
                                if (!std::isfinite(nv)) {
                                    jet_ok = false;
                                    break;
                                }
                                sup_jet = std::max(sup_jet, nv);
                            }
                            if (!jet_ok) break;
                        }
                    } catch (const EvalError&) {
                        jet_ok = false;
                    }
                    if (!jet_ok) continue;

                    const double score = M / (1e-3 + x0.norm() + sup_jet);
                    if (score > best.best_score) {
                        best.best_score = score;
                        best.output = out;
                        best.channel = channel;
                        best.x0 = x0;
                        best.input_derivs = derivs;
                        best.horizon = traj.end_time;
                        best.sup_jet = sup_jet;
                        best.input_magnitude = M;
                    }
                }
            }
        }
    }

    best.found = best.best_score >= opts.score_threshold;
    detail << "best score " << best.best_score << " at input magnitude " << best.input_magnitude
           << " (output y" << (best.output + 1) << ", channel u" << best.channel
           << ", jet sup " << best.sup_jet << ")";
    best.detail = detail.str();
    return best;
}

DissipationReport dissipation_check(const SystemModel& model, const DissipationSpec& spec) {
    DissipationReport rep;
    const JetTable table = compute_jets(model, spec.jet_order);
    std::vector<Expr> grad;
    for (int i = 1; i <= model.n; ++i)
        grad.push_back(simplify(differentiate(spec.V, Var::state(i))));

    std::mt19937_64 rng(spec.seed);
    rep.margin = std::numeric_limits<double>::infinity();
    const int deriv_orders = std::max(1, spec.jet_order);  // u^(0)..u^(jet_order-1)
    for (int s = 0; s < spec.samples; ++s) {
        Bindings b;
        double state_sq = 0.0;
        for (int i = 1; i <= model.n; ++i) {
            const double xi = uniform_draw(rng(), -spec.state_box, spec.state_box);
            b[Var::state(i)] = xi;
            state_sq += xi * xi;
        }
        for (int j = 1; j <= model.m; ++j)
            for (int d = 0; d < deriv_orders; ++d)
                b[Var::input(j, d)] = uniform_draw(rng(), -spec.input_box, spec.input_box);

        try {
            double lhs = 0.0;
            for (int i = 0; i < model.n; ++i) lhs += evaluate(grad[i], b) * evaluate(model.f[i], b);
            double jet_sq = 0.0;
            for (int out = 0; out < model.l(); ++out)
                for (int k = 0; k <= spec.jet_order; ++k) {
                    const double v = evaluate(table.at(out, k), b);
                    jet_sq += v * v;
                }
            const double rhs = -spec.alpha(std::sqrt(state_sq)) + spec.chi(std::sqrt(jet_sq));
            ++rep.checked;
            const double margin = rhs - lhs;
            if (margin < rep.margin) {
                rep.margin = margin;
                rep.worst = b;
                rep.worst_lhs = lhs;
                rep.worst_rhs = rhs;
            }
        } catch (const EvalError&) {
            continue;
        }
    }
    rep.holds = rep.checked > 0 && rep.margin >= -spec.slack;
    std::ostringstream detail;
    detail << (rep.holds ? "dissipation inequality holds" : "dissipation inequality fails")
           << " over " << rep.checked << " samples, margin " << rep.margin;
    rep.detail = detail.str();
    return rep;
}

}  // namespace minphase
