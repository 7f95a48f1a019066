#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "minphase/expr.hpp"
#include "minphase/jets.hpp"
#include "minphase/system.hpp"

namespace minphase {

// Uniform relative degree r of a single output channel:
//   (a) output derivatives of order < r do not depend on the input jet,
//   (b) the r-th derivative does, and its magnitude grows without bound as the
//       input magnitude grows, uniformly over compact state sets: for every
//       threshold K there is an input level M with |H_r| >= K whenever
//       |u| >= M and the state stays in the compact set,
//   (c) at x = 0 the r-th derivative is nonzero for every nonzero input value.
// (a) is established symbolically; (b) and (c) are probed numerically, so a
// passing verdict carries a `probabilistic` flag.  (b) is approximated by the
// sampled floors min_x |H_r(x, u)| over an increasing ladder of input levels:
// the top floor must clear `growth_floor` and improve on the previous level by
// `growth_ratio` (a bounded dependence such as atan(u) plateaus and fails).
struct RelDegOptions {
    int max_order = kMaxJetOrder;
    double state_box = 5.0;        // compact set half-width for the floor sampling
    int samples = 160;             // random state samples per input level
    std::vector<double> input_levels = {1.0, 10.0, 100.0, 1000.0};
    double growth_floor = 10.0;    // required floor at the top input level
    double growth_ratio = 1.2;     // top floor must exceed ratio * previous floor
    double origin_tol = 1e-9;      // |H_r(0, u0)| below this with u0 != 0 fails (c)
    int origin_samples = 64;       // u0 values probed per channel, both signs
    unsigned long long seed = 2024;
};

struct RelDegVerdict {
    std::optional<int> r;              // empty: no order <= max_order qualified
    bool uniform = false;              // growth and origin probes both passed
    bool probabilistic = false;        // any stage relied on sampling
    bool found_all = false;            // every output reaches the input jet
    bool growth_ok = false;            // sampled floors clear the growth ladder
    bool origin_ok = false;            // nonzero at x = 0 for nonzero inputs
    std::string detail;                // human-readable trace of the decision
    std::vector<int> input_free_orders;  // orders verified independent of inputs

    // Control-affine fast path extras (empty otherwise).
    std::optional<Expr> decoupling;    // coefficient of u in the r-th derivative
    bool affine_path = false;
};

RelDegVerdict relative_degree(const SystemModel& model, int output_index,
                              const RelDegOptions& opts = {});

// Single-input path for control-affine systems x' = f0 + g u: walks iterated
// directional derivatives of h along f0 until g enters, then samples the
// resulting coefficient for sign-definiteness over the state box.
RelDegVerdict relative_degree_affine(const SystemModel& model, const AffineDecomposition& dec,
                                     int output_index, const RelDegOptions& opts = {});

}  // namespace minphase
