#include "fluxdpd/transmon.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "fluxdpd/diagnostics.hpp"
#include "fluxdpd/errors.hpp"

namespace fluxdpd {
namespace {

constexpr double kPi = std::numbers::pi;
// Frequencies this close above the sweet spot are rounding, not physics.
constexpr double kBandToleranceHz = 1e-3;
constexpr double kPopulationSlack = 1e-9;

bool uniform_spacing(const std::vector<double>& t, double& step) {
    if (t.size() < 2) {
        step = 0.0;
        return true;
    }
    step = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
    if (!(step > 0.0)) return false;
    const double tol = 1e-9 * step;
    for (std::size_t i = 1; i < t.size(); ++i) {
        if (std::abs((t[i] - t[i - 1]) - step) > tol) return false;
    }
    return true;
}

}  // namespace

void TransmonParams::validate() const {
    if (!(ec_hz > 0.0) || !(ej_hz > 0.0)) throw InvalidArgument("TransmonParams: ec_hz and ej_hz must be positive");
    if (!std::isfinite(flux_per_volt) || !std::isfinite(flux_offset))
        throw InvalidArgument("TransmonParams: flux map must be finite");
    const double ratio = ej_hz / ec_hz;
    if (ratio < 1.0) throw InvalidArgument("TransmonParams: ej/ec below 1 is outside the transmon model");
    if (ratio < 10.0) warn("TransmonParams: ej/ec = " + std::to_string(ratio) + " is below the transmon regime (10)");
}

void CoherenceParams::validate() const {
    if (!(t1 > 0.0) || !(t2_star > 0.0)) throw InvalidArgument("CoherenceParams: t1 and t2_star must be positive");
    if (t2_star > 2.0 * t1) throw InvalidArgument("CoherenceParams: t2_star must not exceed 2 t1");
}

void CryoscopeTrace::validate() const {
    if (durations.empty()) throw InvalidArgument("CryoscopeTrace: empty trace");
    if (p_x.size() != durations.size() || p_y.size() != durations.size())
        throw InvalidArgument("CryoscopeTrace: column lengths differ");
    double step = 0.0;
    if (!uniform_spacing(durations, step)) throw InvalidArgument("CryoscopeTrace: durations must be uniformly spaced");
    for (std::size_t i = 0; i < durations.size(); ++i) {
        const bool ok = std::isfinite(p_x[i]) && std::isfinite(p_y[i]) && p_x[i] >= -kPopulationSlack &&
                        p_x[i] <= 1.0 + kPopulationSlack && p_y[i] >= -kPopulationSlack &&
                        p_y[i] <= 1.0 + kPopulationSlack;
        if (!ok) throw InvalidArgument("CryoscopeTrace: population outside [0, 1] at index " + std::to_string(i));
    }
}

void SpectroscopyMap::validate() const {
    if (voltages.empty() || probe_frequencies.empty()) throw InvalidArgument("SpectroscopyMap: empty axis");
    if (response.size() != voltages.size()) throw InvalidArgument("SpectroscopyMap: row count != voltage count");
    for (const auto& row : response) {
        if (row.size() != probe_frequencies.size())
            throw InvalidArgument("SpectroscopyMap: column count != probe frequency count");
        for (double v : row)
            if (!std::isfinite(v)) throw InvalidArgument("SpectroscopyMap: non-finite response");
    }
}

double flux_to_frequency(const TransmonParams& params, double flux) {
    // |cos(pi flux)| = sin(pi (1/2 - |r|)) with r the offset from the nearest
    // integer; exact zero at half flux, where the square root magnifies any
    // rounding in cos.
    const double r = std::abs(flux - std::round(flux));
    const double c = std::sin(kPi * (0.5 - r));
    return std::sqrt(8.0 * params.ec_hz * params.ej_hz * c) - params.ec_hz;
}

double max_frequency(const TransmonParams& params) {
    return std::sqrt(8.0 * params.ec_hz * params.ej_hz) - params.ec_hz;
}

double frequency_to_flux(const TransmonParams& params, double frequency) {
    const double top = max_frequency(params);
    if (!std::isfinite(frequency) || frequency < -params.ec_hz || frequency > top + kBandToleranceHz) {
        throw OutOfRange("frequency " + std::to_string(frequency) + " Hz outside attainable band [" +
                         std::to_string(-params.ec_hz) + ", " + std::to_string(top) + "] Hz");
    }
    const double shifted = frequency + params.ec_hz;
    const double c = std::min(1.0, shifted * shifted / (8.0 * params.ec_hz * params.ej_hz));
    return std::acos(c) / kPi;
}

double voltage_to_flux(const TransmonParams& params, double voltage) {
    return params.flux_per_volt * voltage + params.flux_offset;
}

SpectroscopyMap simulate_spectroscopy(const TransmonParams& params, const std::vector<double>& voltages,
                                      const std::vector<double>& probe_frequencies, double linewidth,
                                      double contrast, double noise_sd, std::uint64_t seed) {
    if (!(linewidth > 0.0)) throw InvalidArgument("simulate_spectroscopy: linewidth must be positive");
    if (voltages.empty() || probe_frequencies.empty())
        throw InvalidArgument("simulate_spectroscopy: axes must be non-empty");
    if (noise_sd < 0.0) throw InvalidArgument("simulate_spectroscopy: noise_sd must be >= 0");

    GaussianSource noise(seed);
    SpectroscopyMap map{voltages, probe_frequencies, {}};
    map.response.reserve(voltages.size());
    for (double v : voltages) {
        const double fq = flux_to_frequency(params, voltage_to_flux(params, v));
        std::vector<double> row;
        row.reserve(probe_frequencies.size());
        for (double f : probe_frequencies) {
            const double x = 2.0 * (f - fq) / linewidth;
            double r = 1.0 - contrast / (1.0 + x * x);
            if (noise_sd > 0.0) r += noise_sd * noise.next();
            row.push_back(r);
        }
        map.response.push_back(std::move(row));
    }
    return map;
}

CryoscopeSimulation simulate_cryoscope_detailed(const TransmonParams& params, const CoherenceParams& coherence,
                                                const Signal& flux_waveform, double baseline_flux,
                                                const std::vector<double>& durations, double readout_noise_sd,
                                                std::uint64_t seed) {
    coherence.validate();
    if (durations.empty()) throw InvalidArgument("simulate_cryoscope: no durations");
    if (readout_noise_sd < 0.0) throw InvalidArgument("simulate_cryoscope: readout_noise_sd must be >= 0");
    double step = 0.0;
    if (!uniform_spacing(durations, step)) throw InvalidArgument("simulate_cryoscope: durations must be uniformly spaced");

    const double fs = flux_waveform.sample_rate();
    const double dt = flux_waveform.sample_period();
    std::vector<std::size_t> index(durations.size());
    for (std::size_t k = 0; k < durations.size(); ++k) {
        const double pos = durations[k] * fs;
        if (pos < -1e-6 || std::llround(pos) > static_cast<long long>(flux_waveform.size() - 1)) {
            throw InvalidArgument("simulate_cryoscope: duration " + std::to_string(durations[k]) +
                                  " s beyond the flux waveform span");
        }
        index[k] = static_cast<std::size_t>(std::max(0LL, std::llround(pos)));
    }

    const double f_base = flux_to_frequency(params, baseline_flux);
    auto detuning = [&](std::size_t n) { return flux_to_frequency(params, flux_waveform[n]) - f_base; };

    CryoscopeSimulation out;
    out.trace.durations.reserve(durations.size());
    out.trace.p_x.reserve(durations.size());
    out.trace.p_y.reserve(durations.size());
    out.phase.reserve(durations.size());

    GaussianSource noise(seed);
    // Running trapezoidal integral of the detuning, advanced sample by sample.
    double cycles = 0.0;
    std::size_t at = 0;
    double prev = detuning(0);
    for (std::size_t k = 0; k < durations.size(); ++k) {
        if (index[k] < at) throw InvalidArgument("simulate_cryoscope: durations must be increasing");
        while (at < index[k]) {
            const double next = detuning(at + 1);
            cycles += 0.5 * (prev + next) * dt;
            prev = next;
            ++at;
        }
        const double tau = static_cast<double>(index[k]) * dt;
        const double phi = 2.0 * kPi * cycles;
        const double contrast = std::exp(-tau / coherence.t2_star);
        double px = 0.5 * (1.0 + contrast * std::cos(phi));
        double py = 0.5 * (1.0 + contrast * std::sin(phi));
        if (readout_noise_sd > 0.0) {
            px += readout_noise_sd * noise.next();
            py += readout_noise_sd * noise.next();
        }
        out.trace.durations.push_back(tau);
        out.trace.p_x.push_back(std::clamp(px, 0.0, 1.0));
        out.trace.p_y.push_back(std::clamp(py, 0.0, 1.0));
        out.phase.push_back(phi);
    }
    return out;
}

CryoscopeTrace simulate_cryoscope(const TransmonParams& params, const CoherenceParams& coherence,
                                  const Signal& flux_waveform, double baseline_flux,
                                  const std::vector<double>& durations, double readout_noise_sd, std::uint64_t seed) {
    return simulate_cryoscope_detailed(params, coherence, flux_waveform, baseline_flux, durations, readout_noise_sd,
                                       seed)
        .trace;
}

std::vector<double> duration_sweep(double start, double stop, double step) {
    if (!(step > 0.0) || !(stop >= start)) throw InvalidArgument("duration_sweep: require step > 0 and stop >= start");
    const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 0.5)) + 1;
    std::vector<double> out(count);
    for (std::size_t k = 0; k < count; ++k) out[k] = start + static_cast<double>(k) * step;
    return out;
}

GaussianSource::GaussianSource(std::uint64_t seed) : engine_(seed) {}

double GaussianSource::uniform() {
    // 53 random bits mapped into the open interval (0, 1).
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double GaussianSource::next() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    spare_ = radius * std::sin(2.0 * kPi * u2);
    has_spare_ = true;
    return radius * std::cos(2.0 * kPi * u2);
}

}  // namespace fluxdpd
