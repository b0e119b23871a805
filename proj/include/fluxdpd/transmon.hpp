#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "fluxdpd/signal.hpp"

namespace fluxdpd {

// Superconducting flux quantum h / 2e in Wb. Flux is carried in units of it.
inline constexpr double kFluxQuantumWb = 2.067833848e-15;

// Symmetric-SQUID transmon. Energies are stored as E / h in Hz.
struct TransmonParams {
    double ec_hz = 0.0;
    double ej_hz = 0.0;
    double flux_per_volt = 0.0;  // flux quanta per volt
    double flux_offset = 0.0;    // flux quanta at zero volts

    // Throws for non-positive energies or ej/ec < 1; warns below 10.
    void validate() const;
};

struct CoherenceParams {
    double t1 = 0.0;       // s
    double t2_star = 0.0;  // s

    // Requires both positive and t2_star <= 2 t1.
    void validate() const;
};

// Ramsey-style trace: excited-state populations after a final X(pi/2) or
// Y(pi/2), for uniformly spaced flux-pulse durations.
struct CryoscopeTrace {
    std::vector<double> durations;  // s
    std::vector<double> p_x;
    std::vector<double> p_y;

    void validate() const;
};

// response[v][f]: transmission magnitude at voltages[v], probe_frequencies[f].
struct SpectroscopyMap {
    std::vector<double> voltages;
    std::vector<double> probe_frequencies;
    std::vector<std::vector<double>> response;

    void validate() const;
};

// sqrt(8 Ec Ej |cos(pi flux)|) - Ec, in Hz.
double flux_to_frequency(const TransmonParams& params, double flux);

// Upper end of the tunable band, reached at integer flux.
double max_frequency(const TransmonParams& params);

// Principal-branch inverse in [0, 0.5]. Throws OutOfRange outside
// [-Ec, max_frequency].
double frequency_to_flux(const TransmonParams& params, double frequency);

double voltage_to_flux(const TransmonParams& params, double voltage);

// 1 - contrast / (1 + (2 (f - f_q) / linewidth)^2) plus seeded Gaussian noise.
// linewidth is the full width at half maximum.
SpectroscopyMap simulate_spectroscopy(const TransmonParams& params, const std::vector<double>& voltages,
                                      const std::vector<double>& probe_frequencies, double linewidth,
                                      double contrast, double noise_sd, std::uint64_t seed);

struct CryoscopeSimulation {
    CryoscopeTrace trace;
    std::vector<double> phase;  // accumulated phase at each duration (rad)
};

// Integrates the detuning f_q(flux(t)) - f_q(baseline) of the fixed flux
// waveform from 0 to each duration with the trapezoidal rule on the
// waveform grid (durations snap to the nearest sample). Contrast decays as
// exp(-tau / t2_star); additive Gaussian readout noise, clamped to [0, 1].
CryoscopeSimulation simulate_cryoscope_detailed(const TransmonParams& params, const CoherenceParams& coherence,
                                                const Signal& flux_waveform, double baseline_flux,
                                                const std::vector<double>& durations, double readout_noise_sd,
                                                std::uint64_t seed);

CryoscopeTrace simulate_cryoscope(const TransmonParams& params, const CoherenceParams& coherence,
                                  const Signal& flux_waveform, double baseline_flux,
                                  const std::vector<double>& durations, double readout_noise_sd, std::uint64_t seed);

// Evenly spaced durations start, start + step, ... up to stop (inclusive
// within half a step).
std::vector<double> duration_sweep(double start, double stop, double step);

// Seeded standard-normal source that yields identical sequences on every
// platform (std::normal_distribution does not).
class GaussianSource {
public:
    explicit GaussianSource(std::uint64_t seed);
    double next();

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
    double uniform();
};

}  // namespace fluxdpd
