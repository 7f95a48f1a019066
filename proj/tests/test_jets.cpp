#include <doctest.h>

#include <cmath>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "minphase/jets.hpp"
#include "minphase/signals.hpp"
#include "minphase/simulate.hpp"
#include "minphase/system.hpp"

using namespace minphase;

TEST_CASE("output derivatives of the integrator-with-lag come out in closed form") {
    const SystemModel m = builtin("eq25").model;
    const JetTable table = compute_jets(m, 3);
    CHECK(table.at(0, 0).str() == "x1");
    CHECK(table.at(0, 1).str() == "u1");
    CHECK(table.at(0, 2).str() == "u1'");
    CHECK(table.at(0, 3).str() == "u1''");
}

TEST_CASE("derivative order k reads input derivatives of order at most k-1") {
    for (const auto& key : corpus_keys()) {
        const SystemModel m = builtin(key).model;
        JetTable table;
        try {
            table = compute_jets(m, 4);
        } catch (const DomainError&) {
            continue;  // entries with low-smoothness external pieces cap early
        }
        for (int out = 0; out < m.l(); ++out) {
            for (int k = 0; k <= 4; ++k) {
                const Dependence dep = dependence(table.at(out, k));
                for (const auto& [channel, deriv] : dep.inputs) {
                    CAPTURE(key);
                    CAPTURE(out);
                    CAPTURE(k);
                    CHECK(deriv <= k - 1);
                    CHECK(channel >= 1);
                    CHECK(channel <= m.m);
                }
            }
        }
    }
}

TEST_CASE("the chain model keeps low orders input-free") {
    const SystemModel m = builtin("normal_form_r").model;
    const JetTable table = compute_jets(m, 3);
    CHECK(!dependence(table.at(0, 0)).depends_on_inputs());
    CHECK(!dependence(table.at(0, 1)).depends_on_inputs());
    CHECK(!dependence(table.at(0, 2)).depends_on_inputs());
    CHECK(dependence(table.at(0, 3)).depends_on_inputs());
    // The chain exposes exactly the next state at each order.
    CHECK(table.at(0, 1).str() == "x2");
    CHECK(table.at(0, 2).str() == "x3");
}

TEST_CASE("both outputs of the two-channel example see their own inputs") {
    const SystemModel m = builtin("example4").model;
    const JetTable table = compute_jets(m, 2);
    // y1 = x1: y1' = u1.
    const Dependence d1 = dependence(table.at(0, 1));
    CHECK(d1.inputs.count({1, 0}) == 1);
    // y2 = x2: y2' = x3 + u1^2, y2'' picks up u2 and u1'.
    const Dependence d2 = dependence(table.at(1, 1));
    CHECK(d2.inputs.count({1, 0}) == 1);
    CHECK(d2.inputs.count({2, 0}) == 0);
    const Dependence d3 = dependence(table.at(1, 2));
    CHECK(d3.inputs.count({2, 0}) == 1);
    CHECK(d3.inputs.count({1, 1}) == 1);
}

TEST_CASE("jet values along a trajectory differentiate the recorded output") {
    // Sample H_1 and H_2 along a smooth run and compare with centered finite
    // differences of the recorded H_0 row.
    const SystemModel m = builtin("cascade").model;
    const JetTable table = compute_jets(m, 2);
    Eigen::VectorXd x0(3);
    x0 << 0.3, -0.5, 0.2;
    IntegrateOptions opts;
    opts.dt = 1e-3;
    opts.horizon = 4.0;
    opts.record_stride = 1;
    opts.max_input_deriv = 1;
    SignalPtr u = std::make_shared<SinusoidSignal>(std::vector<SinusoidTerm>{{0.8, 1.1, 0.4}});
    const Trajectory traj = integrate(m, x0, {u}, opts);
    REQUIRE(traj.status == TrajStatus::Completed);

    const JetSamples js = jet_along_trajectory(table, 0, m, traj);
    REQUIRE(js.values.rows() == 3);
    REQUIRE(js.values.cols() == traj.nodes());
    const double h = traj.t[1] - traj.t[0];
    int checked = 0;
    for (int k = 2; k + 2 < traj.nodes(); k += 111) {
        const double fd1 = (js.values(0, k + 1) - js.values(0, k - 1)) / (2 * h);
        const double fd2 =
            (js.values(0, k + 1) - 2 * js.values(0, k) + js.values(0, k - 1)) / (h * h);
        CHECK(std::abs(js.values(1, k) - fd1) < 1e-5);
        CHECK(std::abs(js.values(2, k) - fd2) < 1e-3);
        ++checked;
    }
    CHECK(checked > 20);
}

TEST_CASE("jet sampling refuses a trajectory without the needed derivatives") {
    const SystemModel m = builtin("eq25").model;
    const JetTable table = compute_jets(m, 3);  // needs u, u', u''
    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(2);
    IntegrateOptions opts;
    opts.dt = 1e-2;
    opts.horizon = 0.5;
    opts.max_input_deriv = 0;  // records only u itself
    const Trajectory traj = integrate(m, x0, {constant_signal(1.0)}, opts);
    CHECK_THROWS_AS(jet_along_trajectory(table, 0, m, traj), DomainError);
}

TEST_CASE("jet csv export is rectangular with a header") {
    const SystemModel m = builtin("eq25").model;
    const JetTable table = compute_jets(m, 1);
    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(2);
    IntegrateOptions opts;
    opts.dt = 0.1;
    opts.horizon = 1.0;
    opts.record_stride = 1;
    const Trajectory traj = integrate(m, x0, {constant_signal(0.5)}, opts);
    const std::string csv = jet_samples_csv(jet_along_trajectory(table, 0, m, traj));
    std::istringstream in(csv);
    std::string line;
    int rows = 0;
    int commas = -1;
    while (std::getline(in, line)) {
        const int c = static_cast<int>(std::count(line.begin(), line.end(), ','));
        if (commas < 0)
            commas = c;
        else
            CHECK(c == commas);
        ++rows;
    }
    CHECK(rows == traj.nodes() + 1);
    CHECK(commas == 2);  // t, order 0, order 1
}

TEST_CASE("compute_jets rejects out-of-range orders") {
    const SystemModel m = builtin("eq25").model;
    CHECK_THROWS(compute_jets(m, -1));
    CHECK_THROWS(compute_jets(m, kMaxJetOrder + 1));
}
