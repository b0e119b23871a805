#pragma once

#include <complex>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace fluxdpd {

// Uniformly sampled, real-valued waveform. Construction validates that the
// rate is positive, the sequence non-empty and every sample finite.
class Signal {
public:
    Signal(std::vector<double> samples, double sample_rate);

    std::span<const double> samples() const noexcept { return samples_; }
    const std::vector<double>& values() const noexcept { return samples_; }
    double sample_rate() const noexcept { return sample_rate_; }
    double sample_period() const noexcept { return 1.0 / sample_rate_; }
    std::size_t size() const noexcept { return samples_.size(); }
    double operator[](std::size_t n) const { return samples_[n]; }
    double time(std::size_t n) const noexcept { return static_cast<double>(n) / sample_rate_; }

    // Same rate, new samples.
    Signal with_samples(std::vector<double> samples) const { return Signal(std::move(samples), sample_rate_); }

    friend bool operator==(const Signal&, const Signal&) = default;

private:
    std::vector<double> samples_;
    double sample_rate_;
};

// Rates equal to 1e-9 relative; rates recovered from time stamps carry rounding.
bool same_rate(double a, double b);

enum class Stability { Stable, Marginal, Unstable };

const char* to_string(Stability s);

// Difference-equation filter
//   y[n] = sum_i feedforward[i] x[n-i] + sum_j feedback[j-1] y[n-j]
// with feedforward holding b_0..b_{M_b-1} and feedback holding a_1..a_{M_a}.
class IirFilterSpec {
public:
    IirFilterSpec(std::vector<double> feedforward, std::vector<double> feedback = {});

    const std::vector<double>& feedforward() const noexcept { return feedforward_; }
    const std::vector<double>& feedback() const noexcept { return feedback_; }
    std::size_t feedforward_taps() const noexcept { return feedforward_.size(); }
    std::size_t feedback_taps() const noexcept { return feedback_.size(); }

    // Roots of z^{M_a} - a_1 z^{M_a-1} - ... - a_{M_a}.
    std::vector<std::complex<double>> poles() const;
    double max_pole_magnitude() const;

    // Stable when every pole satisfies |p| < 1 - 1e-9. Marginal when the only
    // offending pole is a simple pole at z = 1 (an exact integrator, as in
    // the inverse of a high-pass), everything else strictly inside.
    Stability stability() const;
    bool is_stable() const { return stability() == Stability::Stable; }

    // sum(b) / (1 - sum(a)); infinite when the denominator vanishes.
    double dc_gain() const;

    friend bool operator==(const IirFilterSpec&, const IirFilterSpec&) = default;

private:
    std::vector<double> feedforward_;
    std::vector<double> feedback_;
};

class FirTaps {
public:
    explicit FirTaps(std::vector<double> taps);

    const std::vector<double>& taps() const noexcept { return taps_; }
    std::size_t size() const noexcept { return taps_.size(); }

    friend bool operator==(const FirTaps&, const FirTaps&) = default;

private:
    std::vector<double> taps_;
};

// Sample n is `amplitude` when n / sample_rate >= delay, otherwise 0.
// Length is round(total_duration * sample_rate).
Signal make_step(double amplitude, double delay, double total_duration, double sample_rate);

Signal apply_iir(const Signal& input, const IirFilterSpec& filter);
Signal apply_fir(const Signal& input, const FirTaps& taps);

// Returned by nmse_db when test and reference coincide.
inline constexpr double kNmseIdenticalDb = std::numeric_limits<double>::lowest();

// 10 log10( sum (test - ref)^2 / sum ref^2 ) over the full window.
double nmse_db(const Signal& reference, const Signal& test);

// max_{n >= start_index} |response[n] / ideal_level - 1|
double max_deviation(const Signal& response, double ideal_level, std::size_t start_index);

// Samples [begin, end) as a new signal at the same rate.
Signal slice(const Signal& s, std::size_t begin, std::size_t end);

Signal scaled(const Signal& s, double factor);

}  // namespace fluxdpd
