#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "minphase/expr.hpp"

namespace minphase {

struct ModelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Smooth control-affine-or-not system  x' = f(x,u), y = h(x)  with n states,
// m inputs, l outputs, given symbolically.
struct SystemModel {
    std::string name;
    int n = 0;
    int m = 0;
    std::vector<Expr> f;  // size n, over states and inputs (derivative order 0)
    std::vector<Expr> h;  // size l, over states only
    int l() const { return static_cast<int>(h.size()); }
};

struct ValidationReport {
    bool clean = true;
    std::vector<std::string> violations;
    std::vector<std::string> parameters;  // free parameter names (informational)
};

// Structural checks: f uses states 1..n and plain inputs 1..m only; h uses
// states only; indices within bounds; dimensions consistent.
ValidationReport validate(const SystemModel& model);

struct AffineDecomposition {
    bool affine = false;
    bool probabilistic = false;
    std::vector<Expr> f0;               // drift, f(x, 0)
    std::vector<std::vector<Expr>> g;   // g[j][i]: input-j column, component i
    std::string obstruction;            // why not affine, when affine=false
    bool verified = false;              // residual f - (f0 + sum g_j u_j) zero-tested
};

// Splits f into drift + input columns when every component is affine in u
// (all second u-partials identically zero), and verifies the recombination.
AffineDecomposition affine_decompose(const SystemModel& model, std::uint64_t seed = 0);

// Plain-text model format:
//   system <name>
//   states <n>
//   inputs <m>
//   x<i>' = <expr>      (one line per state, in order)
//   y<i> = <expr>       (one line per output, in order)
// '#' starts a comment; blank lines ignored.
SystemModel parse_model(const std::string& text);
SystemModel load_model(const std::string& path);
std::string format_model(const SystemModel& model);

// Dense matrix data accompanying linear corpus entries.
struct LinearData {
    Eigen::MatrixXd A;
    Eigen::MatrixXd B;
    Eigen::MatrixXd C;
};

struct CorpusEntry {
    SystemModel model;
    std::optional<LinearData> linear;
    std::string blurb;  // one-line description for listings
};

std::vector<std::string> corpus_keys();
CorpusEntry builtin(const std::string& key);

// Parameterized builders behind the frozen corpus defaults.
CorpusEntry make_linear_model(const std::string& name, const Eigen::MatrixXd& A,
                              const Eigen::MatrixXd& B, const Eigen::MatrixXd& C);
// Output chain x1 -> ... -> xr with x_r' = drift + gain * u1, followed by the
// internal rows; output y1 = x1.
SystemModel make_normal_form_model(int r, const Expr& drift, const Expr& gain,
                                   const std::vector<Expr>& internal);

}  // namespace minphase
