#pragma once

#include <string>
#include <variant>
#include <vector>

#include "fluxdpd/signal.hpp"

namespace fluxdpd {

// H(s) = wn^2 / (s^2 + 2 zeta wn s + wn^2), under-damped (0 < zeta < 1).
struct SecondOrderAwg {
    double natural_frequency;  // rad/s
    double damping;
};

// Step response (1 + A e^{-t/tau}) u(t). A > 0 overshoots, A < 0 undershoots.
struct ExponentialOvershoot {
    double amplitude;
    double time_constant;  // s
};

// Step response e^{-t/tau}: one-pole high-pass.
struct BiasTeeHighPass {
    double time_constant;  // s
};

// Pass-through stage, realized as b = [1].
struct Identity {};

class DistortionModel;

// Stages applied in order; stages.front() sits closest to the AWG.
struct Cascade {
    std::vector<DistortionModel> stages;
};

class DistortionModel {
public:
    using Variant = std::variant<SecondOrderAwg, ExponentialOvershoot, BiasTeeHighPass, Identity, Cascade>;

    // Validates parameters and warns (via fluxdpd::warn) when a time
    // constant falls outside its typical hardware range.
    DistortionModel(SecondOrderAwg m);
    DistortionModel(ExponentialOvershoot m);
    DistortionModel(BiasTeeHighPass m);
    DistortionModel(Identity m);
    DistortionModel(Cascade m);

    const Variant& variant() const noexcept { return model_; }

    template <typename T>
    const T* get_if() const noexcept {
        return std::get_if<T>(&model_);
    }

    // "second_order_awg", "exponential_overshoot", "bias_tee", "identity", "cascade"
    std::string type_name() const;

private:
    Variant model_;
};

// Typical time-constant ranges of the three classical distortions, with a
// message for each violation. The AWG is judged by its period 2 pi / wn.
std::vector<std::string> range_warnings(const DistortionModel& model);

struct DigitalFilterRealization {
    IirFilterSpec filter;                 // composite transfer function
    std::vector<IirFilterSpec> sections;  // per-stage, in application order
    double sample_rate;
};

// First-order models: step-invariant mapping (exact at the sample instants).
// SecondOrderAwg: bilinear transform. Cascades multiply stage polynomials.
// Throws InvalidArgument when the model is under-sampled.
DigitalFilterRealization discretize(const DistortionModel& model, double sample_rate);

Signal step_response(const DistortionModel& model, double amplitude, double duration, double sample_rate);

// Applies the per-stage sections of discretize(model, input.sample_rate()).
Signal apply_distortion(const DistortionModel& model, const Signal& input);

// Continuous-time unit step response of the under-damped second-order system.
double second_order_step(double natural_frequency, double damping, double t);

// 10-90 % rise time of SecondOrderAwg, and its inverse for a given damping.
double rise_time_10_90(double natural_frequency, double damping);
double natural_frequency_for_rise_time(double rise_time, double damping);

}  // namespace fluxdpd
