#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <random>
#include <vector>

#include "minphase/linear.hpp"
#include "minphase/signals.hpp"
#include "minphase/simulate.hpp"
#include "minphase/system.hpp"

using namespace minphase;

namespace {

// Stable cubic companion plant (s+1)(s+2)(s+3) with a selectable output row.
LinearSystem companion(double c0, double c1, double c2) {
    LinearSystem sys;
    sys.name = "companion";
    sys.A.setZero(3, 3);
    sys.A(0, 1) = 1.0;
    sys.A(1, 2) = 1.0;
    sys.A.row(2) << -6.0, -11.0, -6.0;
    sys.B.setZero(3, 1);
    sys.B(2, 0) = 1.0;
    sys.C.resize(1, 3);
    sys.C << c0, c1, c2;
    return sys;
}

// Independent oracle for the zeros of c0 + c1 s + c2 s^2 (closed form).
std::vector<std::complex<double>> quadratic_roots(double c0, double c1, double c2) {
    std::vector<std::complex<double>> roots;
    if (std::abs(c2) > 1e-14) {
        const std::complex<double> disc(c1 * c1 - 4 * c2 * c0, 0.0);
        const std::complex<double> sq = std::sqrt(disc);
        roots.push_back((-c1 + sq) / (2 * c2));
        roots.push_back((-c1 - sq) / (2 * c2));
    } else if (std::abs(c1) > 1e-14) {
        roots.emplace_back(-c0 / c1, 0.0);
    }
    return roots;
}

void sort_complex(std::vector<std::complex<double>>& v) {
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
        if (a.real() != b.real()) return a.real() < b.real();
        return a.imag() < b.imag();
    });
}

}  // namespace

TEST_CASE("companion outputs: relative degree and zeros against closed form") {
    struct Case {
        double c0, c1, c2;
        int r;
        double tol;
    };
    // r = 3 - degree of the numerator polynomial.  Simple roots are resolved
    // to 1e-8; a double root is sqrt(eps)-conditioned, so it gets 5e-6.
    const std::vector<Case> cases = {
        {4, 1, 0, 2, 1e-8},  {-1, 1, 0, 2, 1e-8}, {0, 0, 1, 1, 1e-8},
        {2, 3, 1, 1, 1e-8},  {5, 0, 0, 3, 1e-8},  {1, -2, 1, 1, 5e-6},
    };
    for (const auto& cs : cases) {
        CAPTURE(cs.c0);
        CAPTURE(cs.c1);
        CAPTURE(cs.c2);
        const LinearSystem sys = companion(cs.c0, cs.c1, cs.c2);
        const LinearRelDeg ld = linear_relative_degree(sys);
        REQUIRE(ld.r.has_value());
        CHECK(*ld.r == cs.r);

        std::vector<std::complex<double>> got = transmission_zeros(sys);
        std::vector<std::complex<double>> want = quadratic_roots(cs.c0, cs.c1, cs.c2);
        REQUIRE(got.size() == want.size());
        sort_complex(got);
        sort_complex(want);
        for (std::size_t i = 0; i < got.size(); ++i)
            CHECK(std::abs(got[i] - want[i]) < cs.tol);
    }
}

TEST_CASE("left-plane zero passes, right-plane zero fails the phase verdict") {
    const MinimumPhaseVerdict good = minimum_phase_verdict(companion(4, 1, 0));
    CHECK(good.minimum_phase);
    REQUIRE(good.zeros.size() == 1);
    CHECK(good.zeros[0].real() == doctest::Approx(-4.0).epsilon(1e-8));
    CHECK(good.lambda > 0.0);
    CHECK(good.kappa >= 1.0);

    const MinimumPhaseVerdict bad = minimum_phase_verdict(companion(-1, 1, 0));
    CHECK(!bad.minimum_phase);
    REQUIRE(bad.zeros.size() == 1);
    CHECK(bad.zeros[0].real() == doctest::Approx(1.0).epsilon(1e-8));

    // Double zero at the origin sits on the axis: not strictly minimum phase.
    const MinimumPhaseVerdict axis = minimum_phase_verdict(companion(0, 0, 1));
    CHECK(!axis.minimum_phase);
    CHECK(axis.zeros.size() == 2);
}

TEST_CASE("zeros are invariant under random similarity transforms") {
    std::mt19937_64 rng(314);
    const LinearSystem base = companion(4, 1, 0);
    std::vector<std::complex<double>> ref = transmission_zeros(base);
    sort_complex(ref);
    for (int trial = 0; trial < 10; ++trial) {
        Eigen::MatrixXd T = Eigen::MatrixXd::Identity(3, 3);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) T(i, j) += uniform_draw(rng(), -0.3, 0.3);
        REQUIRE(std::abs(T.determinant()) > 1e-3);  // bounded-condition change
        LinearSystem sys;
        sys.A = T * base.A * T.inverse();
        sys.B = T * base.B;
        sys.C = base.C * T.inverse();
        std::vector<std::complex<double>> got = transmission_zeros(sys);
        REQUIRE(got.size() == ref.size());
        sort_complex(got);
        for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got[i] - ref[i]) < 1e-6);
    }
}

TEST_CASE("full-degree systems have no zeros and pass trivially") {
    LinearSystem sys;
    sys.name = "double_integrator";
    sys.A.setZero(2, 2);
    sys.A(0, 1) = 1.0;
    sys.B.setZero(2, 1);
    sys.B(1, 0) = 1.0;
    sys.C.resize(1, 2);
    sys.C << 1.0, 0.0;
    CHECK(transmission_zeros(sys).empty());
    const MinimumPhaseVerdict v = minimum_phase_verdict(sys);
    CHECK(v.minimum_phase);
    CHECK(v.zeros.empty());
}

TEST_CASE("normal form splits the chain from the internal block") {
    const LinearSystem sys = companion(4, 1, 0);
    const NormalForm nf = normal_form(sys);
    REQUIRE(nf.r == 2);
    CHECK((nf.T * nf.T_inv - Eigen::MatrixXd::Identity(3, 3)).norm() < 1e-10);
    CHECK(nf.g == doctest::Approx(1.0));

    // z = Tx evolves with a shift chain on top and no input reaching eta.
    std::mt19937_64 rng(2718);
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::VectorXd x(3);
        for (int i = 0; i < 3; ++i) x[i] = uniform_draw(rng(), -2.0, 2.0);
        const double u = uniform_draw(rng(), -2.0, 2.0);
        const Eigen::VectorXd z = nf.T * x;
        const Eigen::VectorXd zdot = nf.T * (sys.A * x + sys.B.col(0) * u);
        // Chain rows: xi_1' = xi_2; xi_2' = (C A^2 x) + g u.
        CHECK(zdot[0] == doctest::Approx(z[1]).epsilon(1e-9));
        const double drive = (sys.C * sys.A * sys.A * x)(0, 0) + nf.g * u;
        CHECK(zdot[1] == doctest::Approx(drive).epsilon(1e-9));
        // Internal row: eta' = P xi + Q eta, independent of u.
        const Eigen::VectorXd xi = z.head(2);
        const Eigen::VectorXd eta = z.tail(1);
        const Eigen::VectorXd eta_dot = nf.P * xi + nf.Q * eta;
        CHECK(zdot[2] == doctest::Approx(eta_dot[0]).epsilon(1e-9));
    }

    // The internal eigenvalue is the transmission zero.
    CHECK(nf.Q(0, 0) == doctest::Approx(-4.0).epsilon(1e-8));
}

TEST_CASE("decay certificate dominates the matrix exponential on a grid") {
    const MinimumPhaseVerdict v = minimum_phase_verdict(companion(4, 1, 0));
    // Q = [-4]: |e^{Qt}| = e^{-4t} must sit below kappa e^{-lambda t}.
    for (double t = 0.0; t <= 5.0; t += 0.1)
        CHECK(std::exp(-4.0 * t) <= v.kappa * std::exp(-v.lambda * t) + 1e-12);
}

TEST_CASE("reconstruction certificate bounds (u; x) along a smooth run") {
    const LinearSystem sys = companion(4, 1, 0);
    const ReconstructionCertificate cert = reconstruction_certificate(sys);
    REQUIRE(cert.M.rows() == 1 + 3);
    REQUIRE(cert.M.cols() == 3);  // y, y', y''
    CHECK(cert.lambda > 0.0);

    auto input = [](double t) { return std::sin(1.3 * t) + 0.5 * std::cos(2.1 * t); };
    auto input_d = [](double t) { return 1.3 * std::cos(1.3 * t) - 1.05 * std::sin(2.1 * t); };
    std::vector<double> times;
    for (int k = 0; k <= 800; ++k) times.push_back(k * 0.01);
    Eigen::VectorXd x0(3);
    x0 << 1.0, -0.5, 0.25;
    const Eigen::MatrixXd xs = integrate_linear(sys, x0, times, input);

    double sup_jet = 0.0;
    for (std::size_t k = 0; k < times.size(); ++k) {
        const Eigen::VectorXd jet =
            linear_jets(sys, xs.col(k), {input(times[k]), input_d(times[k])}, 2);
        sup_jet = std::max(sup_jet, jet.norm());
        Eigen::VectorXd ux(1 + 3);
        ux << input(times[k]), xs.col(k);
        const double lhs = ux.norm();
        const double rhs =
            cert.beta_coeff * x0.norm() * std::exp(-cert.lambda * times[k]) +
            cert.gamma_slope * sup_jet;
        CHECK(lhs <= rhs + 1e-6);
    }
}

TEST_CASE("output jets from state and input derivatives are exact") {
    // Double integrator: y = x1, y' = x2, y'' = u.
    LinearSystem sys;
    sys.A.setZero(2, 2);
    sys.A(0, 1) = 1.0;
    sys.B.setZero(2, 1);
    sys.B(1, 0) = 1.0;
    sys.C.resize(1, 2);
    sys.C << 1.0, 0.0;
    Eigen::VectorXd x(2);
    x << 0.7, -0.4;
    const Eigen::VectorXd jet = linear_jets(sys, x, {2.5}, 2);
    REQUIRE(jet.size() == 3);
    CHECK(jet[0] == doctest::Approx(0.7));
    CHECK(jet[1] == doctest::Approx(-0.4));
    CHECK(jet[2] == doctest::Approx(2.5));
}

TEST_CASE("zero directions keep the output silent while the state grows") {
    const LinearSystem sys = companion(-1, 1, 0);  // zero at +1
    const auto dir = blocking_direction(sys, {1.0, 0.0});
    REQUIRE(dir.has_value());
    const Eigen::VectorXd x0 = dir->x0.real();
    const double uhat = dir->u_hat.real();
    REQUIRE(x0.norm() > 1e-9);

    auto input = [&](double t) { return uhat * std::exp(t); };
    std::vector<double> times;
    for (int k = 0; k <= 300; ++k) times.push_back(k * 0.01);
    const Eigen::MatrixXd xs = integrate_linear(sys, x0, times, input);
    double sup_y = 0.0;
    for (std::size_t k = 0; k < times.size(); ++k)
        sup_y = std::max(sup_y, std::abs((sys.C * xs.col(k))(0, 0)));
    CHECK(sup_y < 1e-5 * x0.norm() * std::exp(3.0));
    CHECK(xs.col(300).norm() > 0.5 * std::exp(3.0) * x0.norm() / 10.0);
}

TEST_CASE("linear and symbolic integrators agree") {
    const CorpusEntry entry = builtin("example1_linear");
    REQUIRE(entry.linear.has_value());
    LinearSystem sys;
    sys.A = entry.linear->A;
    sys.B = entry.linear->B;
    sys.C = entry.linear->C;

    Eigen::VectorXd x0(3);
    x0 << 0.2, -0.1, 0.3;
    IntegrateOptions opts;
    opts.dt = 1e-3;
    opts.horizon = 3.0;
    opts.record_stride = 100;
    SignalPtr u = std::make_shared<SinusoidSignal>(std::vector<SinusoidTerm>{{1.0, 0.9, 0.0}});
    const Trajectory traj = integrate(entry.model, x0, {u}, opts);

    std::vector<double> times(traj.t.begin(), traj.t.end());
    const Eigen::MatrixXd xs =
        integrate_linear(sys, x0, times, [&](double t) { return u->value(t, 0); });
    for (int k = 0; k < traj.nodes(); ++k)
        CHECK((traj.x.col(k) - xs.col(k)).norm() < 1e-7);
}

TEST_CASE("matrix files round trip") {
    const LinearSystem sys = companion(4, 1, 0);
    const std::string path = "test_linear_tmp.txt";
    write_linear(sys, path);
    const LinearSystem back = read_linear(path);
    CHECK((back.A - sys.A).norm() < 1e-14);
    CHECK((back.B - sys.B).norm() < 1e-14);
    CHECK((back.C - sys.C).norm() < 1e-14);
    std::remove(path.c_str());
    CHECK_THROWS_AS(read_linear("missing_matrix_file.txt"), ModelError);
}

TEST_CASE("model conversion rejects nonlinear dynamics") {
    CHECK_THROWS_AS(linear_from_model(builtin("eq25").model), ModelError);
    // And accepts genuinely linear symbolic models.
    const LinearSystem sys = linear_from_model(builtin("integrator").model);
    CHECK(sys.n() == 1);
    CHECK(sys.A(0, 0) == doctest::Approx(0.0));
    CHECK(sys.B(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("report text mentions the key quantities") {
    const std::string rep = linear_report(companion(4, 1, 0));
    CHECK(!rep.empty());
    CHECK(rep.find("zero") != std::string::npos);
}
