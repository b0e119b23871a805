#include "fluxdpd/distortion.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "fluxdpd/diagnostics.hpp"
#include "fluxdpd/errors.hpp"

namespace fluxdpd {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kMinSamplesPerTimeConstant = 10.0;

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string format_si(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

void validate(const SecondOrderAwg& m) {
    if (!(m.natural_frequency > 0.0) || !std::isfinite(m.natural_frequency))
        throw InvalidArgument("SecondOrderAwg: natural_frequency must be positive");
    if (!(m.damping > 0.0 && m.damping < 1.0))
        throw InvalidArgument("SecondOrderAwg: damping must satisfy 0 < zeta < 1 (under-damped)");
}

void validate(const ExponentialOvershoot& m) {
    if (!(m.time_constant > 0.0) || !std::isfinite(m.time_constant))
        throw InvalidArgument("ExponentialOvershoot: time_constant must be positive");
    if (!(m.amplitude > -1.0) || !std::isfinite(m.amplitude))
        throw InvalidArgument("ExponentialOvershoot: amplitude must exceed -1");
}

void validate(const BiasTeeHighPass& m) {
    if (!(m.time_constant > 0.0) || !std::isfinite(m.time_constant))
        throw InvalidArgument("BiasTeeHighPass: time_constant must be positive");
}

void check_range(std::vector<std::string>& out, const char* what, double value, double lo, double hi) {
    if (value < lo || value > hi) {
        out.push_back(std::string(what) + " " + format_si(value) + " s outside typical range [" + format_si(lo) +
                      ", " + format_si(hi) + "] s");
    }
}

void emit_range_warnings(const DistortionModel& m) {
    for (const auto& w : range_warnings(m)) warn(w);
}

void require_time_constant_rate(const char* what, double tau, double sample_rate) {
    if (sample_rate * tau < kMinSamplesPerTimeConstant) {
        throw InvalidArgument(std::string(what) + ": under-sampled; requires sample_rate >= " +
                              format_si(kMinSamplesPerTimeConstant / tau) + " Hz");
    }
}

std::vector<double> poly_mul(const std::vector<double>& p, const std::vector<double>& q) {
    std::vector<double> r(p.size() + q.size() - 1, 0.0);
    for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t j = 0; j < q.size(); ++j) r[i + j] += p[i] * q[j];
    return r;
}

IirFilterSpec discretize_stage(const SecondOrderAwg& m, double fs) {
    const double wn = m.natural_frequency;
    if (fs < kMinSamplesPerTimeConstant * wn / kTwoPi) {
        throw InvalidArgument("SecondOrderAwg: under-sampled; requires sample_rate >= " +
                              format_si(kMinSamplesPerTimeConstant * wn / kTwoPi) + " Hz");
    }
    // s -> K (1 - z^-1) / (1 + z^-1)
    const double k = 2.0 * fs;
    const double k2 = k * k;
    const double w2 = wn * wn;
    const double c = 2.0 * m.damping * wn * k;
    const double d0 = k2 + c + w2;
    const double d1 = 2.0 * (w2 - k2);
    const double d2 = k2 - c + w2;
    const double g = w2 / d0;
    return IirFilterSpec({g, 2.0 * g, g}, {-d1 / d0, -d2 / d0});
}

IirFilterSpec discretize_stage(const ExponentialOvershoot& m, double fs) {
    require_time_constant_rate("ExponentialOvershoot", m.time_constant, fs);
    const double r = std::exp(-1.0 / (fs * m.time_constant));
    // First difference of the sampled step response 1 + A r^n.
    return IirFilterSpec({1.0 + m.amplitude, -(r + m.amplitude)}, {r});
}

IirFilterSpec discretize_stage(const BiasTeeHighPass& m, double fs) {
    require_time_constant_rate("BiasTeeHighPass", m.time_constant, fs);
    const double r = std::exp(-1.0 / (fs * m.time_constant));
    // First difference of r^n: zero at z = 1, pole at r.
    return IirFilterSpec({1.0, -1.0}, {r});
}

void collect_sections(const DistortionModel& model, double fs, std::vector<IirFilterSpec>& out) {
    std::visit(Overloaded{
                   [&](const Cascade& c) {
                       for (const auto& stage : c.stages) collect_sections(stage, fs, out);
                   },
                   [&](const Identity&) { out.emplace_back(std::vector<double>{1.0}); },
                   [&](const auto& m) { out.push_back(discretize_stage(m, fs)); },
               },
               model.variant());
}

}  // namespace

DistortionModel::DistortionModel(SecondOrderAwg m) : model_(m) {
    validate(m);
    emit_range_warnings(*this);
}

DistortionModel::DistortionModel(ExponentialOvershoot m) : model_(m) {
    validate(m);
    emit_range_warnings(*this);
}

DistortionModel::DistortionModel(BiasTeeHighPass m) : model_(m) {
    validate(m);
    emit_range_warnings(*this);
}

DistortionModel::DistortionModel(Identity m) : model_(m) {}

DistortionModel::DistortionModel(Cascade m) : model_(std::move(m)) {
    if (std::get<Cascade>(model_).stages.empty()) throw InvalidArgument("Cascade: at least one stage required");
}

std::string DistortionModel::type_name() const {
    return std::visit(Overloaded{
                          [](const SecondOrderAwg&) { return std::string("second_order_awg"); },
                          [](const ExponentialOvershoot&) { return std::string("exponential_overshoot"); },
                          [](const BiasTeeHighPass&) { return std::string("bias_tee"); },
                          [](const Identity&) { return std::string("identity"); },
                          [](const Cascade&) { return std::string("cascade"); },
                      },
                      model_);
}

std::vector<std::string> range_warnings(const DistortionModel& model) {
    std::vector<std::string> out;
    std::visit(Overloaded{
                   [&](const SecondOrderAwg& m) {
                       check_range(out, "SecondOrderAwg period", kTwoPi / m.natural_frequency, 1e-9, 100e-9);
                   },
                   [&](const ExponentialOvershoot& m) {
                       check_range(out, "ExponentialOvershoot tau", m.time_constant, 1e-9, 10e-6);
                   },
                   [&](const BiasTeeHighPass& m) {
                       check_range(out, "BiasTeeHighPass tau", m.time_constant, 10e-6, 10e-3);
                   },
                   [](const Identity&) {},
                   [&](const Cascade& c) {
                       for (const auto& s : c.stages) {
                           auto inner = range_warnings(s);
                           out.insert(out.end(), inner.begin(), inner.end());
                       }
                   },
               },
               model.variant());
    return out;
}

DigitalFilterRealization discretize(const DistortionModel& model, double sample_rate) {
    if (!(sample_rate > 0.0)) throw InvalidArgument("discretize: sample_rate must be positive");
    std::vector<IirFilterSpec> sections;
    collect_sections(model, sample_rate, sections);

    std::vector<double> num{1.0};
    std::vector<double> den{1.0};
    for (const auto& s : sections) {
        num = poly_mul(num, s.feedforward());
        std::vector<double> d{1.0};
        for (double a : s.feedback()) d.push_back(-a);
        den = poly_mul(den, d);
    }
    std::vector<double> feedback;
    for (std::size_t j = 1; j < den.size(); ++j) feedback.push_back(-den[j]);

    if (sections.size() == 1) return {sections.front(), sections, sample_rate};
    return {IirFilterSpec(std::move(num), std::move(feedback)), std::move(sections), sample_rate};
}

Signal apply_distortion(const DistortionModel& model, const Signal& input) {
    const auto realization = discretize(model, input.sample_rate());
    Signal out = input;
    for (const auto& section : realization.sections) out = apply_iir(out, section);
    return out;
}

Signal step_response(const DistortionModel& model, double amplitude, double duration, double sample_rate) {
    return apply_distortion(model, make_step(amplitude, 0.0, duration, sample_rate));
}

double second_order_step(double natural_frequency, double damping, double t) {
    if (t < 0.0) return 0.0;
    const double root = std::sqrt(1.0 - damping * damping);
    const double wd = natural_frequency * root;
    return 1.0 - std::exp(-damping * natural_frequency * t) *
                     (std::cos(wd * t) + (damping / root) * std::sin(wd * t));
}

double rise_time_10_90(double natural_frequency, double damping) {
    validate(SecondOrderAwg{natural_frequency, damping});
    // The response rises monotonically up to its first peak at pi / wd.
    const double peak = std::numbers::pi / (natural_frequency * std::sqrt(1.0 - damping * damping));
    auto crossing = [&](double level) {
        double lo = 0.0;
        double hi = peak;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (second_order_step(natural_frequency, damping, mid) < level ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    };
    return crossing(0.9) - crossing(0.1);
}

double natural_frequency_for_rise_time(double rise_time, double damping) {
    if (!(rise_time > 0.0)) throw InvalidArgument("natural_frequency_for_rise_time: rise_time must be positive");
    // Rise time scales as 1 / wn at fixed damping.
    return rise_time_10_90(1.0, damping) / rise_time;
}

}  // namespace fluxdpd
