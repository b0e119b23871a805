#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fluxdpd/signal.hpp"
#include "fluxdpd/synthesis.hpp"
#include "fluxdpd/transmon.hpp"

namespace fluxdpd {

struct PhaseSeries {
    std::vector<double> durations;  // s
    std::vector<double> phase;      // rad, unwrapped
    std::vector<double> quality;    // Bloch-vector length
    std::vector<std::string> warnings;
};

struct FluxResponse {
    std::vector<double> times;            // s
    std::vector<double> raw_flux;         // flux quanta
    std::vector<double> normalized_flux;  // raw / mean(raw over the window)
    SampleWindow analysis_window;

    // Normalized response as a signal at rate 1 / (times[1] - times[0]).
    Signal normalized_signal() const;
};

inline constexpr double kDefaultQualityFloor = 0.05;

// atan2(2 p_y - 1, 2 p_x - 1), unwrapped. Points whose Bloch-vector length
// drops below quality_floor add a low-contrast warning.
PhaseSeries extract_phase(const CryoscopeTrace& trace, double quality_floor = kDefaultQualityFloor);

// Shifts each sample by a multiple of 2 pi so every successive difference
// lies in [-pi, pi]. Differences of exactly +-pi are left alone.
std::vector<double> unwrap_phase(const std::vector<double>& wrapped);

// Maps angles into (-pi, pi].
double wrap_phase(double angle);

// d(phase)/dt / 2 pi by central differences, one-sided at the ends.
Signal phase_to_detuning(const PhaseSeries& phase);

// Absolute flux from f_q(baseline) + detuning on the principal branch, then
// divided by its mean over analysis_window (default: all but sample 0).
// Throws OutOfRange with the offending index for out-of-band detuning.
FluxResponse detuning_to_flux_response(const Signal& detuning, const TransmonParams& params, double baseline_flux,
                                       std::optional<SampleWindow> analysis_window = std::nullopt);

struct SpectroscopyPeak {
    double voltage = 0.0;
    double frequency = 0.0;
};

struct PeakExtraction {
    std::vector<SpectroscopyPeak> peaks;
    std::vector<std::size_t> skipped_rows;  // voltage indices without a dip
    std::vector<std::string> diagnostics;
};

// Per voltage, the probe frequency of minimal transmission refined by a
// 3-point parabola through -1 / (level - response), which is exact for a
// Lorentzian dip. Rows whose dip does not exceed 3x the noise floor are
// skipped and reported.
PeakExtraction extract_peaks(const SpectroscopyMap& map);

struct FitReport {
    TransmonParams params;
    double rms_residual_hz = 0.0;
    std::size_t iterations = 0;
    std::vector<double> cost_history;  // sum of squared residuals after each accepted step
};

class FitDivergence : public std::runtime_error {
public:
    FitDivergence(const std::string& what, FitReport best) : std::runtime_error(what), best_(std::move(best)) {}
    const FitReport& best() const noexcept { return best_; }

private:
    FitReport best_;
};

struct FitOptions {
    std::size_t max_iterations = 200;
    double step_tolerance = 1e-10;      // relative parameter step
    double residual_tolerance = 1e-12;  // relative change of the cost
};

// Levenberg-Marquardt fit of f_q(voltage_to_flux(v)) to the peaks, in
// (log ec, log ej, flux_per_volt, flux_offset). Throws IdentifiabilityError
// for fewer than 4 points or a voltage span under 0.1 flux quanta (judged by
// the initial guess), FitDivergence when no convergence within the budget.
FitReport fit_spectroscopy(const std::vector<SpectroscopyPeak>& points, const TransmonParams& initial_guess,
                           const FitOptions& options = {});

}  // namespace fluxdpd
