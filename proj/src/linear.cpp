#include "minphase/linear.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace minphase {

namespace {

double spectral_norm(const Eigen::MatrixXd& M) {
    if (M.size() == 0) return 0.0;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
    return svd.singularValues()(0);
}

// Scaling-and-squaring matrix exponential (Taylor core after halving the norm
// below 1/2; ample for the small stable blocks handled here).
Eigen::MatrixXd expm(const Eigen::MatrixXd& M) {
    const int n = static_cast<int>(M.rows());
    const double norm = M.cwiseAbs().rowwise().sum().maxCoeff();  // inf-norm
    int squarings = 0;
    if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
    const Eigen::MatrixXd A = M / std::ldexp(1.0, squarings);
    Eigen::MatrixXd term = Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd acc = term;
    for (int k = 1; k <= 18; ++k) {
        term = (term * A) / static_cast<double>(k);
        acc += term;
    }
    for (int s = 0; s < squarings; ++s) acc = acc * acc;
    return acc;
}

void require_siso(const LinearSystem& sys, const char* who) {
    if (sys.m() != 1 || sys.p() != 1)
        throw ModelError(std::string(who) + ": single-input single-output systems only");
}

}  // namespace

LinearSystem linear_from_model(const SystemModel& model) {
    LinearSystem sys;
    sys.name = model.name;
    const int n = model.n, m = model.m, p = model.l();
    sys.A.setZero(n, n);
    sys.B.setZero(n, m);
    sys.C.setZero(p, n);

    Bindings origin;
    for (int i = 1; i <= n; ++i) origin[Var::state(i)] = 0.0;
    for (int j = 1; j <= m; ++j) origin[Var::input(j)] = 0.0;

    auto linear_row = [&](const Expr& e, Eigen::RowVectorXd& state_row,
                          Eigen::RowVectorXd* input_row, const std::string& where) {
        for (const Var& v : free_variables(e)) {
            Expr d = simplify(differentiate(e, v));
            if (!d.is_constant())
                throw ModelError("linear_from_model: " + where + " is not linear in " + v.str());
            const double coeff = evaluate(d, origin);
            if (v.kind == VarKind::State)
                state_row[v.index - 1] = coeff;
            else if (v.kind == VarKind::Input && input_row)
                (*input_row)[v.index - 1] = coeff;
            else
                throw ModelError("linear_from_model: unexpected variable " + v.str() + " in " +
                                 where);
        }
        if (std::abs(evaluate(e, origin)) > 1e-12)
            throw ModelError("linear_from_model: " + where + " has a constant offset");
    };

    for (int i = 0; i < n; ++i) {
        Eigen::RowVectorXd state_row = Eigen::RowVectorXd::Zero(n);
        Eigen::RowVectorXd input_row = Eigen::RowVectorXd::Zero(m);
        linear_row(model.f[i], state_row, &input_row, "x" + std::to_string(i + 1) + "'");
        sys.A.row(i) = state_row;
        sys.B.row(i) = input_row;
    }
    for (int i = 0; i < p; ++i) {
        Eigen::RowVectorXd state_row = Eigen::RowVectorXd::Zero(n);
        linear_row(model.h[i], state_row, nullptr, "y" + std::to_string(i + 1));
        sys.C.row(i) = state_row;
    }
    return sys;
}

SystemModel model_from_linear(const LinearSystem& sys) {
    return make_linear_model(sys.name, sys.A, sys.B, sys.C).model;
}

LinearSystem read_linear(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ModelError("cannot open matrix file: " + path);
    LinearSystem sys;
    auto read_block = [&](const std::string& expect) {
        std::string label;
        int rows = 0, cols = 0;
        if (!(in >> label >> rows >> cols) || label != expect || rows < 0 || cols < 0)
            throw ModelError("matrix file: expected '" + expect + " <rows> <cols>'");
        Eigen::MatrixXd M(rows, cols);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j)
                if (!(in >> M(i, j)))
                    throw ModelError("matrix file: not enough entries for " + expect);
        return M;
    };
    sys.A = read_block("A");
    sys.B = read_block("B");
    sys.C = read_block("C");
    if (sys.A.rows() != sys.A.cols() || sys.B.rows() != sys.A.rows() ||
        sys.C.cols() != sys.A.rows())
        throw ModelError("matrix file: inconsistent dimensions");
    return sys;
}

void write_linear(const LinearSystem& sys, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ModelError("cannot write matrix file: " + path);
    out.precision(17);
    auto write_block = [&](const char* label, const Eigen::MatrixXd& M) {
        out << label << " " << M.rows() << " " << M.cols() << "\n";
        for (int i = 0; i < M.rows(); ++i) {
            for (int j = 0; j < M.cols(); ++j) out << (j ? " " : "") << M(i, j);
            out << "\n";
        }
    };
    write_block("A", sys.A);
    write_block("B", sys.B);
    write_block("C", sys.C);
}

LinearRelDeg linear_relative_degree(const LinearSystem& sys, double tol) {
    require_siso(sys, "linear_relative_degree");
    LinearRelDeg out;
    Eigen::RowVectorXd row = sys.C.row(0);
    for (int r = 1; r <= sys.n(); ++r) {
        const double markov = row * sys.B.col(0);
        if (std::abs(markov) > tol) {
            out.r = r;
            out.g = markov;
            return out;
        }
        row = row * sys.A;
    }
    return out;
}

std::vector<std::complex<double>> transmission_zeros(const LinearSystem& sys, double tol) {
    require_siso(sys, "transmission_zeros");
    const LinearRelDeg rd = linear_relative_degree(sys);
    if (!rd.r) throw ModelError("transmission_zeros: output never reaches the input");
    const int n = sys.n();
    const int dz = n - *rd.r;
    if (dz == 0) return {};

    // det [zI - A, -B; C, 0] is a polynomial of degree n - r; interpolate it
    // on a real grid and root the fitted coefficients.
    const double radius = 1.5 * std::max(1.0, sys.A.cwiseAbs().maxCoeff() * n);
    const int points = dz + 5;
    Eigen::MatrixXd vander(points, dz + 1);
    Eigen::VectorXd dets(points);
    for (int k = 0; k < points; ++k) {
        const double z = -radius + 2.0 * radius * k / (points - 1);
        Eigen::MatrixXd pencil(n + 1, n + 1);
        pencil.topLeftCorner(n, n) = z * Eigen::MatrixXd::Identity(n, n) - sys.A;
        pencil.topRightCorner(n, 1) = -sys.B;
        pencil.bottomLeftCorner(1, n) = sys.C;
        pencil(n, n) = 0.0;
        dets(k) = pencil.determinant();
        double pw = 1.0;
        for (int j = 0; j <= dz; ++j) {
            vander(k, j) = pw;
            pw *= z;
        }
    }
    Eigen::VectorXd coeffs = vander.colPivHouseholderQr().solve(dets);

    int degree = dz;
    const double lead_tol = tol * std::max(1.0, coeffs.cwiseAbs().maxCoeff());
    while (degree > 0 && std::abs(coeffs(degree)) < lead_tol) --degree;
    if (degree == 0) return {};

    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(degree, degree);
    for (int i = 1; i < degree; ++i) companion(i, i - 1) = 1.0;
    for (int i = 0; i < degree; ++i) companion(i, degree - 1) = -coeffs(i) / coeffs(degree);
    Eigen::EigenSolver<Eigen::MatrixXd> es(companion);
    std::vector<std::complex<double>> zeros(degree);
    for (int i = 0; i < degree; ++i) zeros[i] = es.eigenvalues()(i);
    std::sort(zeros.begin(), zeros.end(), [](auto a, auto b) {
        if (a.real() != b.real()) return a.real() < b.real();
        return a.imag() < b.imag();
    });
    return zeros;
}

NormalForm normal_form(const LinearSystem& sys) {
    require_siso(sys, "normal_form");
    const LinearRelDeg rd = linear_relative_degree(sys);
    if (!rd.r) throw ModelError("normal_form: output never reaches the input");
    const int n = sys.n(), r = *rd.r;

    NormalForm nf;
    nf.r = r;
    nf.g = rd.g;
    nf.T.resize(n, n);
    Eigen::RowVectorXd row = sys.C.row(0);
    for (int k = 0; k < r; ++k) {
        nf.T.row(k) = row;
        row = row * sys.A;
    }

    // Complete with rows orthogonal to B (columns 2..n of B's Householder Q),
    // greedily keeping only rows that raise the rank.
    if (n > r) {
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(sys.B);
        Eigen::MatrixXd Q = qr.householderQ();
        int filled = r;
        for (int c = 1; c < n && filled < n; ++c) {
            Eigen::MatrixXd candidate(filled + 1, n);
            candidate.topRows(filled) = nf.T.topRows(filled);
            candidate.row(filled) = Q.col(c).transpose();
            Eigen::ColPivHouseholderQR<Eigen::MatrixXd> rank_check(candidate);
            rank_check.setThreshold(1e-10);
            if (rank_check.rank() == filled + 1) {
                nf.T.row(filled) = Q.col(c).transpose();
                ++filled;
            }
        }
        if (filled < n) throw ModelError("normal_form: could not complete the coordinate change");
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> lu(nf.T);
    if (lu.rank() < n) throw ModelError("normal_form: coordinate change is singular");
    nf.T_inv = lu.inverse();
    const Eigen::MatrixXd transformed = nf.T * sys.A * nf.T_inv;
    nf.P = transformed.block(r, 0, n - r, r);
    nf.Q = transformed.block(r, r, n - r, n - r);
    return nf;
}

MinimumPhaseVerdict minimum_phase_verdict(const LinearSystem& sys) {
    MinimumPhaseVerdict v;
    v.zeros = transmission_zeros(sys);
    const NormalForm nf = normal_form(sys);
    const int internal = static_cast<int>(nf.Q.rows());
    std::ostringstream detail;
    if (internal == 0) {
        v.minimum_phase = true;
        detail << "no internal dynamics (relative degree equals the order)";
        v.detail = detail.str();
        return v;
    }

    Eigen::EigenSolver<Eigen::MatrixXd> es(nf.Q);
    double abscissa = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < internal; ++i)
        abscissa = std::max(abscissa, es.eigenvalues()(i).real());
    detail << "internal spectral abscissa " << abscissa;
    if (abscissa >= -1e-9) {
        v.minimum_phase = false;
        detail << "; internal dynamics not exponentially stable";
        v.detail = detail.str();
        return v;
    }

    v.minimum_phase = true;
    const double sigma = -abscissa;
    v.lambda = 0.5 * sigma;

    // Grid-measured decay certificate |e^{Qt}| <= kappa e^{-lambda t}.
    const double t_end = 50.0 / sigma;
    const int grid = 400;
    const Eigen::MatrixXd step = expm(nf.Q * (t_end / grid));
    Eigen::MatrixXd power = Eigen::MatrixXd::Identity(internal, internal);
    double kappa_raw = 1.0;
    for (int k = 0; k <= grid; ++k) {
        const double t = t_end * k / grid;
        kappa_raw = std::max(kappa_raw, spectral_norm(power) * std::exp(v.lambda * t));
        power = power * step;
    }
    v.kappa = 1.1 * kappa_raw;
    v.mu = v.kappa * spectral_norm(nf.P) / v.lambda;
    detail << "; decay rate " << v.lambda << ", overshoot " << v.kappa << ", forced gain "
           << v.mu;
    v.detail = detail.str();
    return v;
}

ReconstructionCertificate reconstruction_certificate(const LinearSystem& sys) {
    require_siso(sys, "reconstruction_certificate");
    const NormalForm nf = normal_form(sys);
    const int n = sys.n(), r = nf.r;

    const Eigen::MatrixXd Tinv_xi = nf.T_inv.leftCols(r);
    const Eigen::MatrixXd Tinv_eta = nf.T_inv.rightCols(n - r);
    Eigen::RowVectorXd cAr = sys.C.row(0);
    for (int k = 0; k < r; ++k) cAr = cAr * sys.A;

    ReconstructionCertificate cert;
    cert.M.setZero(1 + n, r + 1);
    cert.M.block(0, 0, 1, r) = -(cAr * Tinv_xi) / nf.g;
    cert.M(0, r) = 1.0 / nf.g;
    cert.M.block(1, 0, n, r) = Tinv_xi;

    if (n == r) {
        cert.beta_coeff = 0.0;
        cert.lambda = 0.0;
        cert.gamma_slope = spectral_norm(cert.M);
        return cert;
    }

    Eigen::MatrixXd Wmat(1 + n, n - r);
    Wmat.topRows(1) = -(cAr * Tinv_eta) / nf.g;
    Wmat.bottomRows(n) = Tinv_eta;

    const MinimumPhaseVerdict mp = minimum_phase_verdict(sys);
    if (!mp.minimum_phase)
        throw ModelError("reconstruction_certificate: internal dynamics must be stable");
    const double w_norm = spectral_norm(Wmat);
    cert.lambda = mp.lambda;
    cert.beta_coeff = 1.1 * w_norm * mp.kappa * spectral_norm(nf.T);
    cert.gamma_slope = spectral_norm(cert.M) + 1.1 * w_norm * mp.mu;
    return cert;
}

std::optional<ZeroDirection> blocking_direction(const LinearSystem& sys, std::complex<double> z) {
    require_siso(sys, "blocking_direction");
    const int n = sys.n();
    Eigen::MatrixXcd shifted = z * Eigen::MatrixXcd::Identity(n, n) - sys.A.cast<std::complex<double>>();
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(shifted);
    if (!lu.isInvertible()) return std::nullopt;
    ZeroDirection dir;
    dir.z = z;
    dir.u_hat = 1.0;
    dir.x0 = lu.solve(sys.B.cast<std::complex<double>>().col(0));
    const std::complex<double> y0 = (sys.C.cast<std::complex<double>>().row(0) * dir.x0)(0);
    const double scale = std::max(1.0, dir.x0.norm());
    if (std::abs(y0) > 1e-7 * scale) return std::nullopt;  // z is not a blocking zero
    return dir;
}

Eigen::MatrixXd integrate_linear(const LinearSystem& sys, const Eigen::VectorXd& x0,
                                 const std::vector<double>& times,
                                 const std::function<double(double)>& input) {
    require_siso(sys, "integrate_linear");
    if (times.empty()) return Eigen::MatrixXd(sys.n(), 0);
    Eigen::MatrixXd out(sys.n(), static_cast<int>(times.size()));
    Eigen::VectorXd x = x0;
    out.col(0) = x;
    const Eigen::VectorXd b = sys.B.col(0);
    auto deriv = [&](const Eigen::VectorXd& state, double t) -> Eigen::VectorXd {
        return sys.A * state + b * input(t);
    };
    for (std::size_t k = 1; k < times.size(); ++k) {
        const double span = times[k] - times[k - 1];
        const int nsub = std::max(1, static_cast<int>(std::ceil(span / 1e-3)));
        const double h = span / nsub;
        double t = times[k - 1];
        for (int s = 0; s < nsub; ++s) {
            const Eigen::VectorXd k1 = deriv(x, t);
            const Eigen::VectorXd k2 = deriv(x + 0.5 * h * k1, t + 0.5 * h);
            const Eigen::VectorXd k3 = deriv(x + 0.5 * h * k2, t + 0.5 * h);
            const Eigen::VectorXd k4 = deriv(x + h * k3, t + h);
            x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            t += h;
        }
        out.col(static_cast<int>(k)) = x;
    }
    return out;
}

Eigen::VectorXd linear_jets(const LinearSystem& sys, const Eigen::VectorXd& x,
                            const std::vector<double>& input_derivs, int max_order) {
    require_siso(sys, "linear_jets");
    Eigen::VectorXd jets(max_order + 1);
    Eigen::RowVectorXd row = sys.C.row(0);
    std::vector<Eigen::RowVectorXd> markov;  // C A^k
    for (int k = 0; k <= max_order; ++k) {
        markov.push_back(row);
        row = row * sys.A;
    }
    for (int k = 0; k <= max_order; ++k) {
        double v = markov[k] * x;
        for (int i = 0; i < k; ++i) {
            const double ud = i < static_cast<int>(input_derivs.size()) ? input_derivs[i] : 0.0;
            v += (markov[k - 1 - i] * sys.B.col(0))(0) * ud;
        }
        jets(k) = v;
    }
    return jets;
}

std::string linear_report(const LinearSystem& sys) {
    std::ostringstream out;
    out << "system " << sys.name << ": n=" << sys.n() << " m=" << sys.m() << " p=" << sys.p()
        << "\n";
    const LinearRelDeg rd = linear_relative_degree(sys);
    if (!rd.r) {
        out << "relative degree: none (output never reaches the input)\n";
        return out.str();
    }
    out << "relative degree " << *rd.r << ", input coefficient " << rd.g << "\n";
    const auto zeros = transmission_zeros(sys);
    out << "invariant zeros:";
    if (zeros.empty()) out << " none";
    for (const auto& z : zeros) {
        out << " " << z.real();
        if (std::abs(z.imag()) > 1e-12) out << (z.imag() >= 0 ? "+" : "") << z.imag() << "i";
    }
    out << "\n";
    const MinimumPhaseVerdict mp = minimum_phase_verdict(sys);
    out << (mp.minimum_phase ? "minimum phase" : "not minimum phase") << ": " << mp.detail
        << "\n";
    if (mp.minimum_phase) {
        const ReconstructionCertificate cert = reconstruction_certificate(sys);
        out << "reconstruction certificate: transient " << cert.beta_coeff << " * |x0| * e^(-"
            << cert.lambda << " t), gain slope " << cert.gamma_slope << "\n";
    }
    return out.str();
}

}  // namespace minphase
