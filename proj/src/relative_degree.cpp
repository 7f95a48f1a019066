#include "minphase/relative_degree.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace minphase {

namespace {

struct OutputScan {
    std::optional<int> r;
    std::vector<int> input_free_orders;
    bool probabilistic = false;
    bool undecided = false;
};

// Finds the first derivative order whose input dependence is real (some input
// partial refuted as identically zero), collecting the certified input-free
// orders below it.
OutputScan scan_output(const JetTable& table, int out, const RelDegOptions& opts) {
    OutputScan scan;
    scan.input_free_orders.push_back(0);
    for (int k = 1; k <= table.max_order; ++k) {
        const Expr& hk = table.at(out, k);
        bool live = false;
        for (const Var& v : free_variables(hk)) {
            if (v.kind != VarKind::Input) continue;
            ZeroVerdict zv = is_identically_zero(differentiate(hk, v), 96,
                                                 opts.seed + 0x51ed00d * k + v.index);
            if (zv.outcome == ZeroOutcome::Nonzero) {
                live = true;
                break;
            }
            if (zv.outcome == ZeroOutcome::Unknown) {
                scan.undecided = true;
                live = true;  // conservative: treat as dependent, flagged below
                break;
            }
            scan.probabilistic = scan.probabilistic || zv.probabilistic;
        }
        if (live) {
            scan.r = k;
            return scan;
        }
        scan.input_free_orders.push_back(k);
    }
    return scan;
}

double stack_norm(const JetTable& table, const std::vector<int>& orders, Bindings& b,
                  bool& ok) {
    double acc = 0.0;
    ok = true;
    for (std::size_t i = 0; i < orders.size(); ++i) {
        try {
            const double v = evaluate(table.at(static_cast<int>(i), orders[i]), b);
            if (!std::isfinite(v)) {
                ok = false;
                return 0.0;
            }
            acc += v * v;
        } catch (const EvalError&) {
            ok = false;
            return 0.0;
        }
    }
    return std::sqrt(acc);
}

}  // namespace

RelDegVerdict relative_degree(const SystemModel& model, int output_index,
                              const RelDegOptions& opts) {
    if (output_index < 0 || output_index >= model.l())
        throw ModelError("relative_degree: output index out of range");
    RelDegVerdict verdict;
    std::ostringstream detail;

    const JetTable table = compute_jets(model, opts.max_order);
    std::vector<OutputScan> scans;
    scans.reserve(model.l());
    bool all_found = true;
    for (int out = 0; out < model.l(); ++out) {
        scans.push_back(scan_output(table, out, opts));
        verdict.probabilistic = verdict.probabilistic || scans.back().probabilistic;
        if (!scans.back().r) all_found = false;
    }
    verdict.r = scans[output_index].r;
    verdict.input_free_orders = scans[output_index].input_free_orders;

    for (int out = 0; out < model.l(); ++out) {
        if (scans[out].r)
            detail << "y" << (out + 1) << ": input enters at derivative order " << *scans[out].r
                   << (scans[out].undecided ? " (undecided partials)" : "") << "\n";
        else
            detail << "y" << (out + 1) << ": no input dependence through order "
                   << table.max_order << "\n";
    }
    if (!all_found) {
        detail << "not every output reaches the input; no uniform relative degree\n";
        verdict.detail = detail.str();
        return verdict;
    }

    std::vector<int> orders;
    orders.reserve(model.l());
    for (const OutputScan& s : scans) orders.push_back(*s.r);

    std::mt19937_64 rng(opts.seed);
    auto draw = [&](double lo, double hi) { return uniform_draw(rng(), lo, hi); };

    // Input directions probed at each magnitude level.
    std::vector<Eigen::VectorXd> dirs;
    if (model.m == 1) {
        dirs.push_back(Eigen::VectorXd::Constant(1, 1.0));
        dirs.push_back(Eigen::VectorXd::Constant(1, -1.0));
    } else {
        for (int j = 0; j < model.m; ++j) {
            Eigen::VectorXd e = Eigen::VectorXd::Zero(model.m);
            e[j] = 1.0;
            dirs.push_back(e);
            dirs.push_back(-e);
        }
        for (int extra = 0; extra < 6; ++extra) {
            Eigen::VectorXd d(model.m);
            for (int j = 0; j < model.m; ++j) d[j] = draw(-1.0, 1.0);
            if (d.norm() < 1e-6) d[0] = 1.0;
            dirs.push_back(d / d.norm());
        }
    }

    // State sample set for the growth floors: random draws, sparsified copies
    // (coordinates zeroed at random, so a dependence that rides on a vanishing
    // state slice is exposed), the origin, and the box axis points.
    std::vector<Eigen::VectorXd> states;
    for (int s = 0; s < opts.samples; ++s) {
        Eigen::VectorXd x(model.n);
        for (int i = 0; i < model.n; ++i) x[i] = draw(-opts.state_box, opts.state_box);
        states.push_back(x);
        Eigen::VectorXd sparse = x;
        for (int i = 0; i < model.n; ++i)
            if (rng() & 1) sparse[i] = 0.0;
        states.push_back(sparse);
    }
    states.push_back(Eigen::VectorXd::Zero(model.n));
    for (int i = 0; i < model.n; ++i) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(model.n);
        e[i] = opts.state_box;
        states.push_back(e);
        states.push_back(-e);
    }

    // Growth floors: min over sampled states and directions of the stacked
    // derivative norm at each input level.
    verdict.probabilistic = true;
    std::vector<double> floors;
    for (double level : opts.input_levels) {
        double floor_val = std::numeric_limits<double>::infinity();
        long valid = 0;
        const long expected = static_cast<long>(states.size()) * static_cast<long>(dirs.size());
        for (const Eigen::VectorXd& x : states) {
            Bindings b;
            for (int i = 1; i <= model.n; ++i) b[Var::state(i)] = x[i - 1];
            for (int d = 1; d <= table.max_order; ++d)
                for (int j = 1; j <= model.m; ++j) b[Var::input(j, d)] = 0.0;
            for (const Eigen::VectorXd& dir : dirs) {
                for (int j = 1; j <= model.m; ++j) b[Var::input(j)] = level * dir[j - 1];
                bool ok = false;
                const double v = stack_norm(table, orders, b, ok);
                if (!ok) continue;
                ++valid;
                floor_val = std::min(floor_val, v);
            }
        }
        if (valid < expected / 2) floor_val = 0.0;  // too many failed evaluations
        floors.push_back(floor_val);
    }
    detail << "growth floors at levels {";
    for (std::size_t i = 0; i < floors.size(); ++i)
        detail << (i ? ", " : "") << opts.input_levels[i] << ": " << floors[i];
    detail << "}\n";
    const double top = floors.back();
    const double prev = floors.size() > 1 ? floors[floors.size() - 2] : 0.0;
    const bool growth_ok = top >= opts.growth_floor && top >= opts.growth_ratio * prev;
    if (!growth_ok)
        detail << "dependence does not grow without bound (top floor " << top << ")\n";

    // Origin probe: at x = 0 the stacked derivative must be nonzero for every
    // nonzero input value.
    bool origin_ok = true;
    double origin_min = std::numeric_limits<double>::infinity();
    const double mag_lo = 1e-2, mag_hi = opts.input_levels.back();
    for (int s = 0; s < opts.origin_samples && origin_ok; ++s) {
        const double frac = opts.origin_samples == 1
                                ? 0.0
                                : static_cast<double>(s) / (opts.origin_samples - 1);
        const double mag = mag_lo * std::pow(mag_hi / mag_lo, frac);
        for (const Eigen::VectorXd& dir : dirs) {
            Bindings b;
            for (int i = 1; i <= model.n; ++i) b[Var::state(i)] = 0.0;
            for (int d = 1; d <= table.max_order; ++d)
                for (int j = 1; j <= model.m; ++j) b[Var::input(j, d)] = 0.0;
            for (int j = 1; j <= model.m; ++j) b[Var::input(j)] = mag * dir[j - 1];
            bool ok = false;
            const double v = stack_norm(table, orders, b, ok);
            if (!ok) continue;
            origin_min = std::min(origin_min, v);
            if (v <= opts.origin_tol) {
                origin_ok = false;
                detail << "derivative stack vanishes at x=0 with input magnitude " << mag << "\n";
                break;
            }
        }
    }

    bool any_undecided = false;
    for (const OutputScan& s : scans) any_undecided = any_undecided || s.undecided;
    verdict.found_all = all_found;
    verdict.growth_ok = growth_ok;
    verdict.origin_ok = origin_ok;
    verdict.uniform = all_found && growth_ok && origin_ok && !any_undecided;
    verdict.detail = detail.str();
    return verdict;
}

RelDegVerdict relative_degree_affine(const SystemModel& model, const AffineDecomposition& dec,
                                     int output_index, const RelDegOptions& opts) {
    if (!dec.affine) throw ModelError("relative_degree_affine: decomposition is not affine");
    if (model.m != 1) throw ModelError("relative_degree_affine: single-input systems only");
    if (output_index < 0 || output_index >= model.l())
        throw ModelError("relative_degree_affine: output index out of range");

    RelDegVerdict verdict;
    verdict.affine_path = true;
    std::ostringstream detail;

    auto lie = [&](const Expr& e, const std::vector<Expr>& field) {
        Expr acc = Expr::constant(0.0);
        for (const Var& v : free_variables(e))
            if (v.kind == VarKind::State) acc = acc + differentiate(e, v) * field[v.index - 1];
        return simplify(acc);
    };

    Expr psi = simplify(model.h[output_index]);
    verdict.input_free_orders.push_back(0);
    for (int k = 1; k <= opts.max_order; ++k) {
        const Expr along_g = lie(psi, dec.g[0]);
        ZeroVerdict zv = is_identically_zero(along_g, 96, opts.seed + 0xaff1 * k);
        verdict.probabilistic = verdict.probabilistic || zv.probabilistic;
        if (zv.outcome == ZeroOutcome::Nonzero) {
            verdict.r = k;
            verdict.decoupling = along_g;
            psi = lie(psi, dec.f0);  // psi now holds the drift part of H_r
            detail << "input coefficient first nonzero at order " << k << "\n";
            break;
        }
        if (zv.outcome == ZeroOutcome::Unknown) {
            detail << "could not decide the input coefficient at order " << k << "\n";
            verdict.detail = detail.str();
            return verdict;
        }
        verdict.input_free_orders.push_back(k);
        psi = lie(psi, dec.f0);
    }
    if (!verdict.r) {
        detail << "no input dependence through order " << opts.max_order << "\n";
        verdict.detail = detail.str();
        return verdict;
    }

    // Uniformity: the coefficient must stay away from zero over the box, and
    // the drift part of H_r must vanish at the origin (otherwise some nonzero
    // input value cancels the derivative exactly at x = 0).
    std::mt19937_64 rng(opts.seed);
    std::vector<Eigen::VectorXd> states;
    for (int s = 0; s < opts.samples * 4; ++s) {
        Eigen::VectorXd x(model.n);
        for (int i = 0; i < model.n; ++i)
            x[i] = uniform_draw(rng(), -opts.state_box, opts.state_box);
        states.push_back(x);
        // Sparsified copy: vanishing-coefficient slices live on coordinate
        // subspaces that random box points almost never hit.
        Eigen::VectorXd sparse = x;
        for (int i = 0; i < model.n; ++i)
            if (rng() & 1u) sparse[i] = 0.0;
        states.push_back(sparse);
    }
    states.push_back(Eigen::VectorXd::Zero(model.n));
    for (int i = 0; i < model.n; ++i) {
        states.push_back(opts.state_box * Eigen::VectorXd::Unit(model.n, i));
        states.push_back(-opts.state_box * Eigen::VectorXd::Unit(model.n, i));
    }

    double coeff_floor = std::numeric_limits<double>::infinity();
    int valid = 0;
    for (const Eigen::VectorXd& x : states) {
        Bindings b;
        for (int i = 1; i <= model.n; ++i) b[Var::state(i)] = x[i - 1];
        try {
            coeff_floor = std::min(coeff_floor, std::abs(evaluate(*verdict.decoupling, b)));
            ++valid;
        } catch (const EvalError&) {
        }
    }
    if (valid < opts.samples) coeff_floor = 0.0;
    detail << "sampled input-coefficient floor " << coeff_floor << "\n";

    double drift_at_origin = 0.0;
    bool origin_ok = true;
    {
        Bindings b;
        for (int i = 1; i <= model.n; ++i) b[Var::state(i)] = 0.0;
        try {
            drift_at_origin = evaluate(psi, b);
        } catch (const EvalError&) {
            origin_ok = false;
        }
        if (origin_ok) origin_ok = std::abs(drift_at_origin) <= opts.origin_tol;
    }
    detail << "drift value at origin " << drift_at_origin << "\n";

    verdict.probabilistic = true;
    verdict.found_all = verdict.r.has_value();
    verdict.growth_ok = coeff_floor > 1e-6;
    verdict.origin_ok = origin_ok;
    verdict.uniform = verdict.found_all && verdict.growth_ok && verdict.origin_ok;
    verdict.detail = detail.str();
    return verdict;
}

}  // namespace minphase
