#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "fluxdpd/distortion.hpp"
#include "fluxdpd/signal.hpp"

namespace fluxdpd {

// Half-open sample range [begin, end).
struct SampleWindow {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const noexcept { return end > begin ? end - begin : 0; }
    friend bool operator==(const SampleWindow&, const SampleWindow&) = default;
};

struct SynthesisConfig {
    std::size_t feedback_taps = 1;     // M_a
    std::size_t feedforward_taps = 2;  // M_b
    // Defaults to [first nonzero sample of the target, end).
    std::optional<SampleWindow> fit_window;
    double regularization = 0.0;  // ridge weight on the coefficient vector
};

struct InverseIirDesign {
    IirFilterSpec filter;
    Stability stability = Stability::Stable;
    // ||residual||^2 / ||rhs||^2 of the equation-error regression.
    double relative_residual = 0.0;
    bool orthogonal_solve = false;
    SampleWindow fit_window;
};

// Index of the first nonzero target sample (the step edge).
std::size_t step_edge(const Signal& target);

// Default fit window: from the step edge to the end of the trace.
SampleWindow default_fit_window(const Signal& target);

// First sample at which the target sits at its final level, plus one.
std::size_t default_settle_index(const Signal& target);

// Equation-error least squares: minimizes over b, a
//   sum_{n in window} ( target[n] - sum_i b_i measured[n-i] - sum_j a_j target[n-j] )^2
// plus regularization * ||(b, a)||^2. Rank-deficient windows throw
// SingularSystem; unstable solutions are returned and flagged.
InverseIirDesign design_inverse_iir(const Signal& measured, const Signal& target, const SynthesisConfig& config);

// Residual FIR g minimizing sum ( target[n] - sum_k g_k corrected[n-k] )^2 over
// window rows with n >= fir_length - 1, i.e. only where the taps see real data,
// plus regularization * ||g||^2. Step-like data leave those rows nearly
// collinear; a small ridge keeps the solve determinate.
FirTaps design_residual_fir(const Signal& corrected, const Signal& target, std::size_t fir_length,
                            std::optional<SampleWindow> fit_window = std::nullopt, double regularization = 0.0);

struct TapCandidate {
    std::size_t feedback_taps = 0;
    std::size_t feedforward_taps = 0;
    double nmse_db = 0.0;
    double relative_residual = 0.0;
    Stability stability = Stability::Stable;
    bool skipped = false;  // unstable or singular; never selected
};

struct TapSearchResult {
    SynthesisConfig config;
    InverseIirDesign design;
    double nmse_db = 0.0;
    bool threshold_met = false;
    std::vector<TapCandidate> candidates;  // in search order
};

// Visits (M_a, M_b) with 0 <= M_a <= max_feedback, 1 <= M_b <= max_feedforward
// by ascending M_a + M_b, ties broken by smaller M_a. Returns the first
// candidate whose corrected output reaches nmse <= threshold_db over the fit
// window, else the best candidate found with threshold_met = false.
// Unstable candidates are recorded and skipped; marginal ones are allowed.
TapSearchResult search_min_taps(const Signal& measured, const Signal& target, double threshold_db,
                                std::size_t max_feedback, std::size_t max_feedforward,
                                std::optional<SampleWindow> fit_window = std::nullopt, double regularization = 0.0);

struct CorrectionReport {
    double nmse_db = 0.0;  // final stage vs ideal, full trace
    double max_dev_iir = 0.0;
    std::optional<double> max_dev_fir;
    std::size_t m_a = 0;
    std::size_t m_b = 0;
    std::size_t fir_length = 0;
    bool stable = true;
};

// Maps a predistorted drive signal to the response seen downstream.
using Plant = std::function<Signal(const Signal&)>;

// Drives `plant` with test_step predistorted by the IIR (and then the FIR, if
// given) and measures each stage against the test step's final level from
// settle_index onward.
CorrectionReport evaluate_correction(const Plant& plant, const IirFilterSpec& iir, const std::optional<FirTaps>& fir,
                                     const Signal& test_step, std::size_t settle_index);

CorrectionReport evaluate_correction(const DistortionModel& distortion, const IirFilterSpec& iir,
                                     const std::optional<FirTaps>& fir, const Signal& test_step,
                                     std::size_t settle_index);

}  // namespace fluxdpd
