#include "fluxdpd/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <sstream>

#include "fluxdpd/errors.hpp"

namespace fluxdpd::io {
namespace {

namespace fs = std::filesystem;

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    return out;
}

void finish(std::ofstream& out, const fs::path& path) {
    out.flush();
    if (!out) throw std::runtime_error("write to " + path.string() + " failed");
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

double parse_number(const std::string& text, const fs::path& path, std::size_t line) {
    const std::string t = trim(text);
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (t.empty() || end != t.c_str() + t.size() || !std::isfinite(v))
        throw FormatError(path.string() + ":" + std::to_string(line) + ": not a finite number: '" + t + "'");
    return v;
}

// Rows of a CSV after the header, with the header checked against `expected`.
std::vector<std::vector<double>> read_table(const fs::path& path, const std::vector<std::string>& expected) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw FormatError(path.string() + ": empty file");
    auto header = split(line);
    for (auto& h : header) h = trim(h);
    if (header != expected) {
        std::string want;
        for (const auto& e : expected) want += (want.empty() ? "" : ",") + e;
        throw FormatError(path.string() + ":1: expected header '" + want + "'");
    }
    std::vector<std::vector<double>> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto cells = split(line);
        if (cells.size() != expected.size()) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                              std::to_string(expected.size()) + " columns, got " + std::to_string(cells.size()));
        }
        std::vector<double> row;
        row.reserve(cells.size());
        for (const auto& c : cells) row.push_back(parse_number(c, path, lineno));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw FormatError(path.string() + ": no data rows");
    return rows;
}

// Sample rate from a time column, checked for uniform spacing.
double rate_from_times(const std::vector<double>& t, const fs::path& path) {
    if (t.size() < 2) throw FormatError(path.string() + ": need at least two samples to infer the sample rate");
    const double dt = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
    if (!(dt > 0.0)) throw FormatError(path.string() + ": time column must increase");
    for (std::size_t i = 1; i < t.size(); ++i) {
        if (std::abs((t[i] - t[i - 1]) - dt) > 1e-6 * dt)
            throw FormatError(path.string() + ":" + std::to_string(i + 2) + ": non-uniform time spacing");
    }
    return 1.0 / dt;
}

const Json& field(const Json& j, const char* key) {
    if (!j.is_object()) throw FormatError("expected a JSON object holding '" + std::string(key) + "'");
    const auto it = j.find(key);
    if (it == j.end()) throw FormatError("missing field '" + std::string(key) + "'");
    return *it;
}

double number(const Json& j, const char* key) {
    const Json& v = field(j, key);
    if (!v.is_number()) throw FormatError("field '" + std::string(key) + "' must be a number");
    return v.get<double>();
}

std::vector<double> numbers(const Json& j, const char* key) {
    const Json& v = field(j, key);
    if (!v.is_array()) throw FormatError("field '" + std::string(key) + "' must be an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
        if (!e.is_number()) throw FormatError("field '" + std::string(key) + "' must be an array of numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

Json rounded(const std::vector<double>& v) {
    Json a = Json::array();
    for (double x : v) a.push_back(round15(x));
    return a;
}

}  // namespace

std::string format_number(double value) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.15g", value);
    return buf;
}

double round15(double value) {
    if (!std::isfinite(value)) return value;
    return std::strtod(format_number(value).c_str(), nullptr);
}

void write_signal_csv(const fs::path& path, const Signal& signal) {
    auto out = open_out(path);
    out << "index,time_s,value\n";
    for (std::size_t n = 0; n < signal.size(); ++n)
        out << n << ',' << format_number(signal.time(n)) << ',' << format_number(signal[n]) << '\n';
    finish(out, path);
}

Signal read_signal_csv(const fs::path& path) {
    const auto rows = read_table(path, {"index", "time_s", "value"});
    std::vector<double> t, v;
    for (const auto& r : rows) {
        t.push_back(r[1]);
        v.push_back(r[2]);
    }
    return Signal(std::move(v), rate_from_times(t, path));
}

void write_trace_csv(const fs::path& path, const CryoscopeTrace& trace) {
    auto out = open_out(path);
    out << "tau_s,p_x,p_y\n";
    for (std::size_t i = 0; i < trace.durations.size(); ++i) {
        out << format_number(trace.durations[i]) << ',' << format_number(trace.p_x[i]) << ','
            << format_number(trace.p_y[i]) << '\n';
    }
    finish(out, path);
}

CryoscopeTrace read_trace_csv(const fs::path& path) {
    CryoscopeTrace trace;
    for (const auto& r : read_table(path, {"tau_s", "p_x", "p_y"})) {
        trace.durations.push_back(r[0]);
        trace.p_x.push_back(r[1]);
        trace.p_y.push_back(r[2]);
    }
    try {
        trace.validate();
    } catch (const InvalidArgument& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    return trace;
}

void write_phase_csv(const fs::path& path, const PhaseSeries& phase) {
    auto out = open_out(path);
    out << "tau_s,phase_rad,quality\n";
    for (std::size_t i = 0; i < phase.durations.size(); ++i) {
        out << format_number(phase.durations[i]) << ',' << format_number(phase.phase[i]) << ','
            << format_number(phase.quality[i]) << '\n';
    }
    finish(out, path);
}

void write_flux_response_csv(const fs::path& path, const FluxResponse& response) {
    auto out = open_out(path);
    out << "time_s,raw_flux_phi0,normalized\n";
    for (std::size_t i = 0; i < response.times.size(); ++i) {
        out << format_number(response.times[i]) << ',' << format_number(response.raw_flux[i]) << ','
            << format_number(response.normalized_flux[i]) << '\n';
    }
    finish(out, path);
}

FluxResponse read_flux_response_csv(const fs::path& path) {
    FluxResponse r;
    for (const auto& row : read_table(path, {"time_s", "raw_flux_phi0", "normalized"})) {
        r.times.push_back(row[0]);
        r.raw_flux.push_back(row[1]);
        r.normalized_flux.push_back(row[2]);
    }
    rate_from_times(r.times, path);
    r.analysis_window = {r.times.size() > 1 ? 1u : 0u, r.times.size()};
    return r;
}

void write_map_csv(const fs::path& path, const SpectroscopyMap& map) {
    auto out = open_out(path);
    out << "voltage_v\\frequency_hz";
    for (double f : map.probe_frequencies) out << ',' << format_number(f);
    out << '\n';
    for (std::size_t v = 0; v < map.voltages.size(); ++v) {
        out << format_number(map.voltages[v]);
        for (double x : map.response[v]) out << ',' << format_number(x);
        out << '\n';
    }
    finish(out, path);
}

SpectroscopyMap read_map_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    SpectroscopyMap map;
    std::string line;
    if (!std::getline(in, line)) throw FormatError(path.string() + ": empty file");
    const auto head = split(line);
    if (head.size() < 2) throw FormatError(path.string() + ":1: expected a corner cell and probe frequencies");
    for (std::size_t i = 1; i < head.size(); ++i) map.probe_frequencies.push_back(parse_number(head[i], path, 1));
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto cells = split(line);
        if (cells.size() != head.size()) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                              std::to_string(head.size()) + " columns, got " + std::to_string(cells.size()));
        }
        map.voltages.push_back(parse_number(cells[0], path, lineno));
        std::vector<double> row;
        for (std::size_t i = 1; i < cells.size(); ++i) row.push_back(parse_number(cells[i], path, lineno));
        map.response.push_back(std::move(row));
    }
    if (map.voltages.empty()) throw FormatError(path.string() + ": no voltage rows");
    return map;
}

void write_peaks_csv(const fs::path& path, const std::vector<SpectroscopyPeak>& peaks) {
    auto out = open_out(path);
    out << "voltage_v,frequency_hz\n";
    for (const auto& p : peaks) out << format_number(p.voltage) << ',' << format_number(p.frequency) << '\n';
    finish(out, path);
}

DistortionModel model_from_json(const Json& j) {
    const Json& t = field(j, "type");
    if (!t.is_string()) throw FormatError("field 'type' must be a string");
    const auto type = t.get<std::string>();
    try {
        if (type == "second_order_awg") {
            double wn = 0.0;
            if (j.contains("natural_frequency_rad_per_s")) {
                wn = number(j, "natural_frequency_rad_per_s");
            } else if (j.contains("period_s")) {
                wn = 2.0 * std::numbers::pi / number(j, "period_s");
            } else {
                throw FormatError("second_order_awg needs 'natural_frequency_rad_per_s' or 'period_s'");
            }
            return SecondOrderAwg{wn, number(j, "damping")};
        }
        if (type == "exponential_overshoot")
            return ExponentialOvershoot{number(j, "amplitude"), number(j, "time_constant_s")};
        if (type == "bias_tee") return BiasTeeHighPass{number(j, "time_constant_s")};
        if (type == "identity") return Identity{};
        if (type == "cascade") {
            const Json& stages = field(j, "stages");
            if (!stages.is_array() || stages.empty()) throw FormatError("cascade 'stages' must be a non-empty array");
            Cascade c;
            for (std::size_t i = 0; i < stages.size(); ++i) {
                try {
                    c.stages.push_back(model_from_json(stages[i]));
                } catch (const std::exception& e) {
                    throw FormatError("stages[" + std::to_string(i) + "]: " + e.what());
                }
            }
            return c;
        }
    } catch (const InvalidArgument& e) {
        throw FormatError(type + ": " + e.what());
    }
    throw FormatError("unknown model type '" + type + "'");
}

Json model_to_json(const DistortionModel& model) {
    Json j;
    j["type"] = model.type_name();
    if (const auto* m = model.get_if<SecondOrderAwg>()) {
        j["natural_frequency_rad_per_s"] = round15(m->natural_frequency);
        j["damping"] = round15(m->damping);
    } else if (const auto* m = model.get_if<ExponentialOvershoot>()) {
        j["amplitude"] = round15(m->amplitude);
        j["time_constant_s"] = round15(m->time_constant);
    } else if (const auto* m = model.get_if<BiasTeeHighPass>()) {
        j["time_constant_s"] = round15(m->time_constant);
    } else if (const auto* m = model.get_if<Cascade>()) {
        j["stages"] = Json::array();
        for (const auto& s : m->stages) j["stages"].push_back(model_to_json(s));
    }
    return j;
}

TransmonParams transmon_from_json(const Json& j) {
    TransmonParams p{number(j, "ec_hz"), number(j, "ej_hz"), number(j, "flux_per_volt"), 0.0};
    if (j.contains("flux_offset")) p.flux_offset = number(j, "flux_offset");
    try {
        p.validate();
    } catch (const InvalidArgument& e) {
        throw FormatError(e.what());
    }
    return p;
}

Json transmon_to_json(const TransmonParams& p) {
    return Json{{"ec_hz", round15(p.ec_hz)},
                {"ej_hz", round15(p.ej_hz)},
                {"flux_per_volt", round15(p.flux_per_volt)},
                {"flux_offset", round15(p.flux_offset)}};
}

CoherenceParams coherence_from_json(const Json& j) {
    CoherenceParams c{number(j, "t1_s"), number(j, "t2_star_s")};
    try {
        c.validate();
    } catch (const InvalidArgument& e) {
        throw FormatError(e.what());
    }
    return c;
}

Json filter_to_json(const IirFilterSpec& filter) {
    return Json{{"feedforward", rounded(filter.feedforward())},
                {"feedback", rounded(filter.feedback())},
                {"stability", to_string(filter.stability())}};
}

IirFilterSpec filter_from_json(const Json& j) {
    try {
        return IirFilterSpec(numbers(j, "feedforward"), numbers(j, "feedback"));
    } catch (const InvalidArgument& e) {
        throw FormatError(e.what());
    }
}

Json fir_to_json(const FirTaps& taps) { return Json{{"taps", rounded(taps.taps())}}; }

FirTaps fir_from_json(const Json& j) {
    try {
        return FirTaps(numbers(j, "taps"));
    } catch (const InvalidArgument& e) {
        throw FormatError(e.what());
    }
}

Json report_to_json(const CorrectionReport& r) {
    Json j{{"nmse_db", round15(r.nmse_db)},
           {"max_dev_iir", round15(r.max_dev_iir)},
           {"m_a", r.m_a},
           {"m_b", r.m_b},
           {"fir_length", r.fir_length},
           {"stable", r.stable}};
    // The identical-signal sentinel is not a useful JSON number.
    if (r.nmse_db == kNmseIdenticalDb) j["nmse_db"] = nullptr;
    j["max_dev_fir"] = r.max_dev_fir ? Json(round15(*r.max_dev_fir)) : Json(nullptr);
    return j;
}

Json fit_report_to_json(const FitReport& r) {
    Json j = transmon_to_json(r.params);
    j["rms_residual_hz"] = round15(r.rms_residual_hz);
    j["iterations"] = r.iterations;
    return j;
}

Json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void write_json(const fs::path& path, const Json& j) {
    auto out = open_out(path);
    out << j.dump(2) << '\n';
    finish(out, path);
}

}  // namespace fluxdpd::io
