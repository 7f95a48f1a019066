#include "minphase/jets.hpp"

#include <sstream>
#include <stdexcept>

namespace minphase {

JetTable compute_jets(const SystemModel& model, int max_order) {
    if (max_order < 0) throw std::invalid_argument("compute_jets: negative order");
    if (max_order > kMaxJetOrder)
        throw std::invalid_argument("compute_jets: order beyond the supported cap");
    JetTable table;
    table.max_order = max_order;
    table.jets.resize(model.l());
    for (int out = 0; out < model.l(); ++out) {
        std::vector<Expr>& column = table.jets[out];
        column.push_back(simplify(model.h[out]));
        for (int k = 0; k < max_order; ++k) {
            const Expr& hk = column.back();
            Expr next = Expr::constant(0.0);
            // Chain rule through the dynamics and the input jet's shift map.
            for (const Var& v : free_variables(hk)) {
                if (v.kind == VarKind::State) {
                    next = next + differentiate(hk, v) * model.f[v.index - 1];
                } else if (v.kind == VarKind::Input) {
                    next = next + differentiate(hk, v) * Expr::input(v.index, v.deriv + 1);
                }
            }
            column.push_back(simplify(next));
        }
    }
    return table;
}

Dependence dependence(const Expr& e) {
    Dependence dep;
    for (const Var& v : free_variables(e)) {
        if (v.kind == VarKind::State) dep.states.insert(v.index);
        if (v.kind == VarKind::Input) dep.inputs.insert({v.index, v.deriv});
    }
    return dep;
}

JetSamples jet_along_trajectory(const JetTable& table, int output, const SystemModel& model,
                                const Trajectory& traj) {
    if (output < 0 || output >= static_cast<int>(table.jets.size()))
        throw std::invalid_argument("jet_along_trajectory: output index");
    const int max_order = table.max_order;
    const int have_derivs = static_cast<int>(traj.u.size()) - 1;
    if (max_order > 0 && have_derivs < max_order - 1)
        throw DomainError("jet_along_trajectory: trajectory lacks input derivative records (need " +
                          std::to_string(max_order - 1) + ", have " +
                          std::to_string(have_derivs) + ")");

    std::vector<Var> layout;
    for (int i = 1; i <= model.n; ++i) layout.push_back(Var::state(i));
    for (int j = 1; j <= model.m; ++j)
        for (int d = 0; d <= have_derivs; ++d) layout.push_back(Var::input(j, d));

    std::vector<CompiledExpr> programs;
    programs.reserve(max_order + 1);
    for (int k = 0; k <= max_order; ++k)
        programs.push_back(CompiledExpr::compile(table.at(output, k), layout));

    JetSamples out;
    out.t = traj.t;
    const int cols = traj.nodes();
    out.values.resize(max_order + 1, cols);
    std::vector<double> slots(layout.size(), 0.0);
    for (int c = 0; c < cols; ++c) {
        int s = 0;
        for (int i = 0; i < model.n; ++i) slots[s++] = traj.x(i, c);
        for (int j = 0; j < model.m; ++j)
            for (int d = 0; d <= have_derivs; ++d) slots[s++] = traj.u[d](j, c);
        for (int k = 0; k <= max_order; ++k) out.values(k, c) = programs[k].eval(slots.data());
    }
    return out;
}

std::string jet_samples_csv(const JetSamples& samples) {
    std::ostringstream out;
    out << "t";
    for (int k = 0; k < samples.values.rows(); ++k) out << ",y" << k;
    out << "\n";
    out.precision(17);
    for (std::size_t c = 0; c < samples.t.size(); ++c) {
        out << samples.t[c];
        for (int k = 0; k < samples.values.rows(); ++k)
            out << "," << samples.values(k, static_cast<int>(c));
        out << "\n";
    }
    return out.str();
}

}  // namespace minphase
