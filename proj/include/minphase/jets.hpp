#pragma once

#include <Eigen/Dense>
#include <set>
#include <string>
#include <vector>

#include "minphase/expr.hpp"
#include "minphase/simulate.hpp"
#include "minphase/system.hpp"

namespace minphase {

inline constexpr int kMaxJetOrder = 8;

// Symbolic output-derivative table.  jets[i][k] is the k-th time derivative of
// output i as a function of the state and the input jet (u, u', u'', ...):
//
//   H_{k+1} = (dH_k/dx) f + sum_{j,d} (dH_k/du_j^{(d)}) u_j^{(d+1)}
//
// with H_0 = h_i.  Computing order k therefore introduces input derivatives of
// order at most k-1.
struct JetTable {
    std::vector<std::vector<Expr>> jets;   // [output][order], order 0..max_order
    int max_order = 0;

    const Expr& at(int output, int order) const { return jets.at(output).at(order); }
};

JetTable compute_jets(const SystemModel& model, int max_order);

// Which state slots / input-derivative slots an expression actually reads.
struct Dependence {
    std::set<int> states;                    // state indices
    std::set<std::pair<int, int>> inputs;    // (channel, derivative order)
    bool depends_on_inputs() const { return !inputs.empty(); }
};

Dependence dependence(const Expr& e);

// Numeric evaluation of jets along a trajectory, for cross-checking against
// finite differences of the recorded output signal.
struct JetSamples {
    std::vector<double> t;
    Eigen::MatrixXd values;   // rows: jet orders 0..max_order, cols: sample times
};

JetSamples jet_along_trajectory(const JetTable& table, int output, const SystemModel& model,
                                const Trajectory& traj);

std::string jet_samples_csv(const JetSamples& samples);

}  // namespace minphase
