#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "fluxdpd/distortion.hpp"
#include "fluxdpd/reconstruction.hpp"
#include "fluxdpd/signal.hpp"
#include "fluxdpd/synthesis.hpp"
#include "fluxdpd/transmon.hpp"

namespace fluxdpd::io {

using Json = nlohmann::json;

// Malformed file or document; the message names the file, line or field.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// "%.15g": every number leaving the tool goes through here.
std::string format_number(double value);

// Rounds to 15 significant digits so JSON output matches the CSV text.
double round15(double value);

// index,time_s,value
void write_signal_csv(const std::filesystem::path& path, const Signal& signal);
Signal read_signal_csv(const std::filesystem::path& path);

// tau_s,p_x,p_y
void write_trace_csv(const std::filesystem::path& path, const CryoscopeTrace& trace);
CryoscopeTrace read_trace_csv(const std::filesystem::path& path);

// tau_s,phase_rad,quality
void write_phase_csv(const std::filesystem::path& path, const PhaseSeries& phase);

// time_s,raw_flux_phi0,normalized
void write_flux_response_csv(const std::filesystem::path& path, const FluxResponse& response);
FluxResponse read_flux_response_csv(const std::filesystem::path& path);

// First row: an empty corner cell, then the probe frequencies. Each further
// row: the voltage, then the response at each probe frequency.
void write_map_csv(const std::filesystem::path& path, const SpectroscopyMap& map);
SpectroscopyMap read_map_csv(const std::filesystem::path& path);

// voltage_v,frequency_hz
void write_peaks_csv(const std::filesystem::path& path, const std::vector<SpectroscopyPeak>& peaks);

// {"type": "second_order_awg", "natural_frequency_rad_per_s" | "period_s", "damping"}
// {"type": "exponential_overshoot", "amplitude", "time_constant_s"}
// {"type": "bias_tee", "time_constant_s"}
// {"type": "identity"}
// {"type": "cascade", "stages": [...]}
DistortionModel model_from_json(const Json& j);
Json model_to_json(const DistortionModel& model);

TransmonParams transmon_from_json(const Json& j);
Json transmon_to_json(const TransmonParams& params);
CoherenceParams coherence_from_json(const Json& j);

Json filter_to_json(const IirFilterSpec& filter);
IirFilterSpec filter_from_json(const Json& j);
Json fir_to_json(const FirTaps& taps);
FirTaps fir_from_json(const Json& j);
Json report_to_json(const CorrectionReport& report);
Json fit_report_to_json(const FitReport& report);

Json read_json(const std::filesystem::path& path);
// Pretty-printed with a trailing newline.
void write_json(const std::filesystem::path& path, const Json& j);

}  // namespace fluxdpd::io
