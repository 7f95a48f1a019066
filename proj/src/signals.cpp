#include "minphase/signals.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

namespace minphase {

namespace {

[[noreturn]] void no_such_derivative(const std::string& kind, int deriv) {
    throw DomainError(kind + ": derivative of order " + std::to_string(deriv) +
                      " is not available");
}

}  // namespace

PolynomialSignal::PolynomialSignal(std::vector<double> coeffs) : coeffs_(std::move(coeffs)) {
    if (coeffs_.empty()) coeffs_.push_back(0.0);
}

double PolynomialSignal::value(double t, int deriv) const {
    if (deriv < 0) no_such_derivative("polynomial", deriv);
    double acc = 0.0;
    // d-th derivative of c_i t^i is c_i * i!/(i-d)! * t^(i-d).
    for (int i = static_cast<int>(coeffs_.size()) - 1; i >= deriv; --i) {
        double fall = 1.0;
        for (int k = 0; k < deriv; ++k) fall *= static_cast<double>(i - k);
        acc = acc * t + coeffs_[i] * fall;
    }
    return acc;
}

json PolynomialSignal::descriptor() const {
    return json{{"type", "polynomial"}, {"coeffs", coeffs_}};
}

SinusoidSignal::SinusoidSignal(std::vector<SinusoidTerm> terms) : terms_(std::move(terms)) {}

double SinusoidSignal::value(double t, int deriv) const {
    if (deriv < 0) no_such_derivative("sinusoid", deriv);
    double acc = 0.0;
    const double quarter = 1.5707963267948966;
    for (const SinusoidTerm& term : terms_)
        acc += term.amp * std::pow(term.omega, deriv) *
               std::sin(term.omega * t + term.phase + deriv * quarter);
    return acc;
}

json SinusoidSignal::descriptor() const {
    json terms = json::array();
    for (const SinusoidTerm& t : terms_)
        terms.push_back(json{{"amp", t.amp}, {"omega", t.omega}, {"phase", t.phase}});
    return json{{"type", "sinusoid"}, {"terms", terms}};
}

ExpCosSignal::ExpCosSignal(double amp, double sigma, double omega, double phase)
    : amp_(amp), sigma_(sigma), omega_(omega), phase_(phase) {}

double ExpCosSignal::value(double t, int deriv) const {
    if (deriv < 0) no_such_derivative("expcos", deriv);
    const std::complex<double> s(sigma_, omega_);
    const std::complex<double> val =
        std::pow(s, deriv) * std::exp(s * t + std::complex<double>(0.0, phase_));
    return amp_ * val.real();
}

json ExpCosSignal::descriptor() const {
    return json{{"type", "expcos"},
                {"amp", amp_},
                {"sigma", sigma_},
                {"omega", omega_},
                {"phase", phase_}};
}

PiecewiseConstantSignal::PiecewiseConstantSignal(std::vector<double> switch_times,
                                                 std::vector<double> values)
    : times_(std::move(switch_times)), values_(std::move(values)) {
    if (values_.size() != times_.size() + 1)
        throw std::invalid_argument("step signal needs one more value than switch time");
    if (!std::is_sorted(times_.begin(), times_.end()))
        throw std::invalid_argument("step signal switch times must be ascending");
}

double PiecewiseConstantSignal::value(double t, int deriv) const {
    if (deriv != 0) no_such_derivative("step signal", deriv);
    const auto it = std::upper_bound(times_.begin(), times_.end(), t);
    return values_[static_cast<std::size_t>(it - times_.begin())];
}

json PiecewiseConstantSignal::descriptor() const {
    return json{{"type", "steps"}, {"times", times_}, {"values", values_}};
}

SwitchingSignal::SwitchingSignal(int dwell_floor_exp) : floor_exp_(dwell_floor_exp) {
    if (floor_exp_ < 1) throw std::invalid_argument("switching signal: floor exponent >= 1");
}

double SwitchingSignal::dwell(double t) const {
    if (t < 2.0) return 1.0;
    const int k = static_cast<int>(std::floor(t));
    const double d = std::ldexp(1.0, 1 - k);  // 2^(1-k)
    return std::max(d, std::ldexp(1.0, -floor_exp_));
}

double SwitchingSignal::value(double t, int deriv) const {
    if (deriv != 0) no_such_derivative("switching signal", deriv);
    if (t < 1.0) return 1.0;
    if (t < 2.0) return -1.0;
    const int k = static_cast<int>(std::floor(t));
    const double d = dwell(t);
    // Each unit interval holds an even number of alternating segments starting
    // with +1, so the pattern re-anchors at every integer boundary.
    const long long seg = static_cast<long long>(std::floor((t - k) / d));
    return (seg % 2 == 0) ? 1.0 : -1.0;
}

json SwitchingSignal::descriptor() const {
    return json{{"type", "switching"}, {"dwell_floor_exp", floor_exp_}};
}

SignalPtr constant_signal(double c) {
    return std::make_shared<PolynomialSignal>(std::vector<double>{c});
}

SignalPtr signal_from_json(const json& j) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "constant") return constant_signal(j.at("value").get<double>());
    if (type == "polynomial")
        return std::make_shared<PolynomialSignal>(j.at("coeffs").get<std::vector<double>>());
    if (type == "sinusoid") {
        std::vector<SinusoidTerm> terms;
        for (const json& term : j.at("terms"))
            terms.push_back({term.at("amp").get<double>(), term.at("omega").get<double>(),
                             term.value("phase", 0.0)});
        return std::make_shared<SinusoidSignal>(std::move(terms));
    }
    if (type == "expcos")
        return std::make_shared<ExpCosSignal>(j.at("amp").get<double>(),
                                              j.at("sigma").get<double>(),
                                              j.at("omega").get<double>(), j.value("phase", 0.0));
    if (type == "steps")
        return std::make_shared<PiecewiseConstantSignal>(
            j.at("times").get<std::vector<double>>(), j.at("values").get<std::vector<double>>());
    if (type == "switching") return std::make_shared<SwitchingSignal>(j.value("dwell_floor_exp", 12));
    throw EvalError("unknown signal type: " + type);
}

}  // namespace minphase
