#pragma once

#include <Eigen/Dense>
#include <complex>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "minphase/system.hpp"

namespace minphase {

// Single-output linear system x' = Ax + Bu, y = Cx.  B is n x m, C is p x n;
// the analysis routines below are for the SISO slice (m = p = 1) unless noted.
struct LinearSystem {
    std::string name = "linear";
    Eigen::MatrixXd A;
    Eigen::MatrixXd B;
    Eigen::MatrixXd C;

    int n() const { return static_cast<int>(A.rows()); }
    int m() const { return static_cast<int>(B.cols()); }
    int p() const { return static_cast<int>(C.rows()); }
};

LinearSystem linear_from_model(const SystemModel& model);
SystemModel model_from_linear(const LinearSystem& sys);

// Plain-text matrix file: "A <n> <n>" header then rows, same for B and C.
LinearSystem read_linear(const std::string& path);
void write_linear(const LinearSystem& sys, const std::string& path);

// Relative degree from Markov parameters: smallest r with C A^{r-1} B != 0.
struct LinearRelDeg {
    std::optional<int> r;
    double g = 0.0;               // C A^{r-1} B when r exists
};
LinearRelDeg linear_relative_degree(const LinearSystem& sys, double tol = 1e-9);

// Invariant zeros of the SISO system via the system-matrix pencil
// det [zI - A, -B; C, 0], evaluated by interpolation (the determinant is a
// polynomial of degree at most n - r) and rooted through a companion matrix.
std::vector<std::complex<double>> transmission_zeros(const LinearSystem& sys,
                                                     double tol = 1e-8);

// Change of coordinates (xi; eta) = T x with xi = (y, y', ..., y^{(r-1)}) and
// eta spanning a complement chosen with W B = 0, giving
//   xi' = shift(xi) + e_r (C A^r x), eta' = P xi + Q eta.
struct NormalForm {
    int r = 0;
    Eigen::MatrixXd T;        // full coordinate change, invertible
    Eigen::MatrixXd T_inv;
    Eigen::MatrixXd P;        // eta' = P xi + Q eta
    Eigen::MatrixXd Q;
    double g = 0.0;           // input coefficient C A^{r-1} B
};
NormalForm normal_form(const LinearSystem& sys);

// Stability of the internal dynamics: all eigenvalues of Q strictly left of
// the axis.  Decay certificate |e^{Qt}| <= kappa e^{-lambda t} with
// lambda = sigma/2 (sigma the spectral abscissa margin) and kappa measured on
// a grid with headroom.
struct MinimumPhaseVerdict {
    bool minimum_phase = false;
    std::vector<std::complex<double>> zeros;
    double lambda = 0.0;
    double kappa = 0.0;
    double mu = 0.0;          // forced-response gain kappa |P| / lambda
    std::string detail;
};
MinimumPhaseVerdict minimum_phase_verdict(const LinearSystem& sys);

// Reconstruction certificate: bounds |(u(t); x(t))| by an exponentially
// decaying transient in |x(0)| plus a linear gain on the sup norm of the
// output jet y^r = (y, ..., y^{(r)}).
//   (u; x) = M y^r + (decaying part through eta), with
//   transient coefficient beta_coeff and slope gamma_slope.
struct ReconstructionCertificate {
    Eigen::MatrixXd M;        // (1+n) x (r+1) static jet-to-(u;x) map
    double beta_coeff = 0.0;  // multiplies |x(0)| e^{-lambda t}
    double lambda = 0.0;
    double gamma_slope = 0.0; // multiplies sup |y^r|
};
ReconstructionCertificate reconstruction_certificate(const LinearSystem& sys);

// u(t) = u_hat e^{zt} from x(0) = (zI - A)^{-1} B u_hat keeps y identically
// zero when z is an invariant zero; used to build zero-output witnesses.
struct ZeroDirection {
    std::complex<double> z;
    Eigen::VectorXcd x0;
    std::complex<double> u_hat;
};
std::optional<ZeroDirection> blocking_direction(const LinearSystem& sys, std::complex<double> z);

// Dense-output linear simulation (matrix RK4 on [x; forced terms]); mirrors
// integrate() from simulate.hpp but avoids symbolic evaluation in hot loops.
Eigen::MatrixXd integrate_linear(const LinearSystem& sys, const Eigen::VectorXd& x0,
                                 const std::vector<double>& times,
                                 const std::function<double(double)>& input);

// Exact output jets: y^{(k)} = C A^k x + sum_{i<k} C A^{k-1-i} B u^{(i)}.
Eigen::VectorXd linear_jets(const LinearSystem& sys, const Eigen::VectorXd& x,
                            const std::vector<double>& input_derivs, int max_order);

std::string linear_report(const LinearSystem& sys);

}  // namespace minphase
