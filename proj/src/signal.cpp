#include "fluxdpd/signal.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <string>

#include "fluxdpd/errors.hpp"

namespace fluxdpd {
namespace {

constexpr double kStabilityMargin = 1e-9;
// Radius around z = 1 inside which a lone pole counts as an integrator.
constexpr double kIntegratorTolerance = 1e-8;

bool all_finite(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

Signal::Signal(std::vector<double> samples, double sample_rate)
    : samples_(std::move(samples)), sample_rate_(sample_rate) {
    if (!(sample_rate_ > 0.0) || !std::isfinite(sample_rate_))
        throw InvalidArgument("Signal: sample_rate must be positive and finite");
    if (samples_.empty()) throw InvalidArgument("Signal: at least one sample required");
    for (std::size_t n = 0; n < samples_.size(); ++n) {
        if (!std::isfinite(samples_[n]))
            throw InvalidArgument("Signal: non-finite sample at index " + std::to_string(n));
    }
}

bool same_rate(double a, double b) {
    return std::abs(a - b) <= 1e-9 * std::max(std::abs(a), std::abs(b));
}

const char* to_string(Stability s) {
    switch (s) {
        case Stability::Stable: return "stable";
        case Stability::Marginal: return "marginal";
        case Stability::Unstable: return "unstable";
    }
    return "unknown";
}

IirFilterSpec::IirFilterSpec(std::vector<double> feedforward, std::vector<double> feedback)
    : feedforward_(std::move(feedforward)), feedback_(std::move(feedback)) {
    if (feedforward_.empty()) throw InvalidArgument("IirFilterSpec: at least one feedforward tap required");
    if (!all_finite(feedforward_) || !all_finite(feedback_))
        throw InvalidArgument("IirFilterSpec: coefficients must be finite");
}

std::vector<std::complex<double>> IirFilterSpec::poles() const {
    const auto order = static_cast<Eigen::Index>(feedback_.size());
    // Trailing zero coefficients only add poles at the origin.
    if (order == 0) return {};
    if (order == 1) return {std::complex<double>(feedback_[0], 0.0)};

    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(order, order);
    for (Eigen::Index j = 0; j < order; ++j) companion(0, j) = feedback_[static_cast<std::size_t>(j)];
    for (Eigen::Index i = 1; i < order; ++i) companion(i, i - 1) = 1.0;

    Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, /*computeEigenvectors=*/false);
    const auto& ev = solver.eigenvalues();
    std::vector<std::complex<double>> out(ev.data(), ev.data() + ev.size());
    return out;
}

double IirFilterSpec::max_pole_magnitude() const {
    double m = 0.0;
    for (auto p : poles()) m = std::max(m, std::abs(p));
    return m;
}

Stability IirFilterSpec::stability() const {
    int integrators = 0;
    for (auto p : poles()) {
        if (std::abs(p) < 1.0 - kStabilityMargin) continue;
        if (std::abs(p - 1.0) <= kIntegratorTolerance) {
            ++integrators;
            continue;
        }
        return Stability::Unstable;
    }
    if (integrators == 0) return Stability::Stable;
    return integrators == 1 ? Stability::Marginal : Stability::Unstable;
}

double IirFilterSpec::dc_gain() const {
    double num = 0.0;
    for (double b : feedforward_) num += b;
    double den = 1.0;
    for (double a : feedback_) den -= a;
    if (den == 0.0) return num == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), num);
    return num / den;
}

FirTaps::FirTaps(std::vector<double> taps) : taps_(std::move(taps)) {
    if (taps_.empty()) throw InvalidArgument("FirTaps: at least one tap required");
    if (!all_finite(taps_)) throw InvalidArgument("FirTaps: taps must be finite");
}

Signal make_step(double amplitude, double delay, double total_duration, double sample_rate) {
    if (!(sample_rate > 0.0)) throw InvalidArgument("make_step: sample_rate must be positive");
    if (!(total_duration > 0.0)) throw InvalidArgument("make_step: total_duration must be positive");
    if (!(delay >= 0.0) || !(total_duration > delay))
        throw InvalidArgument("make_step: require total_duration > delay >= 0");
    const auto length = static_cast<std::size_t>(std::llround(total_duration * sample_rate));
    if (length == 0) throw InvalidArgument("make_step: duration shorter than one sample");

    // Compare in sample units; the slack absorbs rounding in delay * rate.
    const double edge = delay * sample_rate;
    std::vector<double> samples(length, 0.0);
    for (std::size_t n = 0; n < length; ++n) {
        if (static_cast<double>(n) + 1e-9 >= edge) samples[n] = amplitude;
    }
    return Signal(std::move(samples), sample_rate);
}

Signal apply_iir(const Signal& input, const IirFilterSpec& filter) {
    const auto x = input.samples();
    const auto& b = filter.feedforward();
    const auto& a = filter.feedback();
    std::vector<double> y(x.size(), 0.0);
    for (std::size_t n = 0; n < x.size(); ++n) {
        double acc = 0.0;
        const std::size_t nb = std::min(b.size(), n + 1);
        for (std::size_t i = 0; i < nb; ++i) acc += b[i] * x[n - i];
        const std::size_t na = std::min(a.size(), n);
        for (std::size_t j = 1; j <= na; ++j) acc += a[j - 1] * y[n - j];
        y[n] = acc;
    }
    return input.with_samples(std::move(y));
}

Signal apply_fir(const Signal& input, const FirTaps& taps) {
    return apply_iir(input, IirFilterSpec(taps.taps()));
}

double nmse_db(const Signal& reference, const Signal& test) {
    if (reference.size() != test.size()) throw InvalidArgument("nmse_db: length mismatch");
    if (!same_rate(reference.sample_rate(), test.sample_rate())) throw InvalidArgument("nmse_db: sample rate mismatch");
    double err = 0.0;
    double ref = 0.0;
    for (std::size_t n = 0; n < reference.size(); ++n) {
        const double d = test[n] - reference[n];
        err += d * d;
        ref += reference[n] * reference[n];
    }
    if (ref == 0.0) throw InvalidArgument("nmse_db: reference is all zero");
    if (err == 0.0) return kNmseIdenticalDb;
    return 10.0 * std::log10(err / ref);
}

double max_deviation(const Signal& response, double ideal_level, std::size_t start_index) {
    if (start_index >= response.size())
        throw InvalidArgument("max_deviation: start_index " + std::to_string(start_index) + " out of range");
    if (ideal_level == 0.0) throw InvalidArgument("max_deviation: ideal_level must be nonzero");
    double worst = 0.0;
    for (std::size_t n = start_index; n < response.size(); ++n)
        worst = std::max(worst, std::abs(response[n] / ideal_level - 1.0));
    return worst;
}

Signal slice(const Signal& s, std::size_t begin, std::size_t end) {
    if (begin >= end || end > s.size()) throw InvalidArgument("slice: invalid range");
    return s.with_samples(std::vector<double>(s.values().begin() + static_cast<std::ptrdiff_t>(begin),
                                              s.values().begin() + static_cast<std::ptrdiff_t>(end)));
}

Signal scaled(const Signal& s, double factor) {
    std::vector<double> out(s.values());
    for (double& v : out) v *= factor;
    return s.with_samples(std::move(out));
}

}  // namespace fluxdpd
