#pragma once

#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "minphase/expr.hpp"

namespace minphase {

using json = nlohmann::ordered_json;

// A scalar input channel with exact derivatives up to smoothness().
// Requesting a derivative beyond the smoothness class throws DomainError,
// which is how jet evaluation refuses orders the signal cannot support.
class SmoothSignal {
public:
    static constexpr int kInfinitelySmooth = 1'000'000;
    virtual ~SmoothSignal() = default;
    virtual double value(double t, int deriv = 0) const = 0;
    virtual int smoothness() const = 0;
    virtual json descriptor() const = 0;
};

using SignalPtr = std::shared_ptr<const SmoothSignal>;

class PolynomialSignal : public SmoothSignal {
public:
    explicit PolynomialSignal(std::vector<double> coeffs);  // c0 + c1 t + ...
    double value(double t, int deriv) const override;
    int smoothness() const override { return kInfinitelySmooth; }
    json descriptor() const override;
    const std::vector<double>& coeffs() const { return coeffs_; }

private:
    std::vector<double> coeffs_;
};

struct SinusoidTerm {
    double amp = 1.0, omega = 1.0, phase = 0.0;
};

class SinusoidSignal : public SmoothSignal {
public:
    explicit SinusoidSignal(std::vector<SinusoidTerm> terms);
    double value(double t, int deriv) const override;
    int smoothness() const override { return kInfinitelySmooth; }
    json descriptor() const override;

private:
    std::vector<SinusoidTerm> terms_;
};

// amp * e^{sigma t} cos(omega t + phase); derivatives via complex powers.
class ExpCosSignal : public SmoothSignal {
public:
    ExpCosSignal(double amp, double sigma, double omega, double phase);
    double value(double t, int deriv) const override;
    int smoothness() const override { return kInfinitelySmooth; }
    json descriptor() const override;

private:
    double amp_, sigma_, omega_, phase_;
};

// Right-continuous step signal; only order-0 samples exist.
class PiecewiseConstantSignal : public SmoothSignal {
public:
    PiecewiseConstantSignal(std::vector<double> switch_times, std::vector<double> values);
    double value(double t, int deriv) const override;
    int smoothness() const override { return 0; }
    json descriptor() const override;

private:
    std::vector<double> times_;   // ascending; value i holds on [times_[i-1], times_[i])
    std::vector<double> values_;  // size times_.size() + 1
};

// The +-1 switching schedule: dwell 1 on [0,2), dwell 1/2 on [2,3), and on
// [k, k+1) dwell 2^(1-k) repeated to fill the interval, floored at
// 2^-dwell_floor_exp so a dyadic integration step resolves every switch.
class SwitchingSignal : public SmoothSignal {
public:
    explicit SwitchingSignal(int dwell_floor_exp = 12);
    double value(double t, int deriv) const override;
    int smoothness() const override { return 0; }
    json descriptor() const override;
    double dwell(double t) const;

private:
    int floor_exp_;
};

SignalPtr constant_signal(double c);
SignalPtr signal_from_json(const json& j);

}  // namespace minphase
