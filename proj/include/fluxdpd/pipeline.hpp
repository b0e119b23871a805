#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fluxdpd/distortion.hpp"
#include "fluxdpd/io.hpp"
#include "fluxdpd/reconstruction.hpp"
#include "fluxdpd/synthesis.hpp"
#include "fluxdpd/transmon.hpp"

namespace fluxdpd::pipeline {

enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,
    kExitConfig = 2,
    kExitReconstructionRange = 3,
    kExitFitDivergence = 4,
    kExitIdentifiability = 5,
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string tool_version();

// FNV-1a over the compact dump of the (effective) config, as 16 hex digits.
std::string config_hash(const io::Json& config);

struct SynthesisSettings {
    std::size_t feedback_taps = 1;
    std::size_t feedforward_taps = 2;
    double regularization = 0.0;
    bool search = false;  // tap search instead of the fixed (M_a, M_b)
    double threshold_db = -30.0;
    std::size_t max_feedback_taps = 2;
    std::size_t max_feedforward_taps = 4;
    std::size_t fir_length = 48;  // 0 disables the FIR stage
    double fir_regularization = 1e-6;
    std::optional<std::size_t> settle_index;
};

struct SweepSettings {
    double start = 0.0;
    double stop = 0.0;
    double step = 0.0;
};

struct CalibrationConfig {
    DistortionModel distortion = Identity{};
    TransmonParams transmon;
    CoherenceParams coherence;
    double sample_rate = 0.0;
    double amplitude = 0.0;  // V
    SweepSettings sweep;
    SynthesisSettings synthesis;
    double readout_noise_sd = 0.0;
    std::uint64_t seed = 0;
};

SynthesisSettings parse_synthesis(const io::Json& j);
CalibrationConfig parse_calibration_config(const io::Json& j);

struct CalibrationResult {
    IirFilterSpec iir;
    std::optional<FirTaps> fir;
    std::size_t settle_index = 0;
    CorrectionReport report;  // evaluated on the distortion model
    // The three reconstructed curves: no correction, IIR, IIR + FIR.
    FluxResponse uncorrected;
    FluxResponse after_iir;
    std::optional<FluxResponse> after_fir;
    // Deviations of the reconstructed curves from settle_index onward.
    double measured_dev_uncorrected = 0.0;
    double measured_dev_iir = 0.0;
    std::optional<double> measured_dev_fir;
    Signal predistorted_iir;
    std::optional<Signal> predistorted_fir;
};

// Simulate -> reconstruct -> design IIR -> re-measure -> design FIR ->
// re-measure, then evaluate both stages on the distortion model.
CalibrationResult run_calibration(const CalibrationConfig& config);

io::Json calibration_result_to_json(const CalibrationResult& result, const std::string& hash);

// Re-runs evaluate_correction with the filters stored in a result document.
CorrectionReport reevaluate_calibration(const io::Json& result, const CalibrationConfig& config);

struct CommandOptions {
    std::filesystem::path config;
    std::filesystem::path out = "out";
    std::optional<std::uint64_t> seed;
    bool verbose = false;
    std::filesystem::path map;       // fit-spectroscopy
    std::filesystem::path trace;     // reconstruct
    std::filesystem::path response;  // design-dpd
};

// Runs one subcommand and maps failures to exit codes. Output files appear
// in options.out only when the command succeeds.
int run_command(const std::string& command, const CommandOptions& options, std::ostream& log);

}  // namespace fluxdpd::pipeline
