#include "fluxdpd/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <functional>
#include <ostream>
#include <random>
#include <system_error>

#include "fluxdpd/diagnostics.hpp"
#include "fluxdpd/errors.hpp"

#ifndef FLUXDPD_VERSION
#define FLUXDPD_VERSION "0.0.0"
#endif

namespace fluxdpd::pipeline {
namespace {

namespace fs = std::filesystem;
using io::Json;

// ---- config access with field paths in every diagnostic ----

std::string join(const std::string& where, const std::string& key) { return where.empty() ? key : where + "." + key; }

const Json& require(const Json& j, const std::string& where, const std::string& key) {
    if (!j.is_object()) throw ConfigError("config field '" + (where.empty() ? "<root>" : where) + "' must be an object");
    const auto it = j.find(key);
    if (it == j.end()) throw ConfigError("config field '" + join(where, key) + "' is required");
    return *it;
}

const Json& object(const Json& j, const std::string& where, const std::string& key) {
    const Json& v = require(j, where, key);
    if (!v.is_object()) throw ConfigError("config field '" + join(where, key) + "' must be an object");
    return v;
}

double number(const Json& j, const std::string& where, const std::string& key) {
    const Json& v = require(j, where, key);
    if (!v.is_number() || !std::isfinite(v.get<double>()))
        throw ConfigError("config field '" + join(where, key) + "' must be a finite number");
    return v.get<double>();
}

double number_or(const Json& j, const std::string& where, const std::string& key, double fallback) {
    return j.contains(key) ? number(j, where, key) : fallback;
}

std::uint64_t count(const Json& j, const std::string& where, const std::string& key) {
    const Json& v = require(j, where, key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
        throw ConfigError("config field '" + join(where, key) + "' must be a non-negative integer");
    return v.get<std::uint64_t>();
}

std::uint64_t count_or(const Json& j, const std::string& where, const std::string& key, std::uint64_t fallback) {
    return j.contains(key) ? count(j, where, key) : fallback;
}

bool flag_or(const Json& j, const std::string& where, const std::string& key, bool fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_boolean()) throw ConfigError("config field '" + join(where, key) + "' must be true or false");
    return j[key].get<bool>();
}

// Wraps module-level validation failures as config errors naming the field.
template <class F>
auto parse_field(const std::string& where, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const io::FormatError& e) {
        throw ConfigError("config field '" + where + "': " + e.what());
    } catch (const InvalidArgument& e) {
        throw ConfigError("config field '" + where + "': " + e.what());
    }
}

DistortionModel parse_model(const Json& root, const std::string& key) {
    const Json& j = require(root, "", key);
    return parse_field(key, [&] { return io::model_from_json(j); });
}

TransmonParams parse_transmon(const Json& root, const std::string& key) {
    const Json& j = object(root, "", key);
    return parse_field(key, [&] { return io::transmon_from_json(j); });
}

double positive(double v, const std::string& field) {
    if (!(v > 0.0)) throw ConfigError("config field '" + field + "' must be positive");
    return v;
}

SweepSettings parse_sweep(const Json& root) {
    const Json& s = object(root, "", "sweep");
    SweepSettings out{number_or(s, "sweep", "start_s", 0.0), number(s, "sweep", "stop_s"), number(s, "sweep", "step_s")};
    positive(out.step, "sweep.step_s");
    if (out.start < 0.0 || !(out.stop > out.start)) throw ConfigError("config field 'sweep': need 0 <= start_s < stop_s");
    return out;
}

std::uint64_t parse_seed(const Json& root) {
    if (!root.contains("noise")) return 0;
    return count_or(object(root, "", "noise"), "noise", "seed", 0);
}

double parse_noise_sd(const Json& root) {
    if (!root.contains("noise")) return 0.0;
    const double sd = number_or(object(root, "", "noise"), "noise", "readout_sd", 0.0);
    if (sd < 0.0) throw ConfigError("config field 'noise.readout_sd' must be >= 0");
    return sd;
}

// ---- shared simulation pieces ----

std::size_t waveform_length(double stop, double sample_rate) {
    return static_cast<std::size_t>(std::llround(stop * sample_rate)) + 1;
}

Signal unit_step(std::size_t length, double sample_rate) {
    return make_step(1.0, 0.0, static_cast<double>(length) / sample_rate, sample_rate);
}

Signal flux_waveform(const TransmonParams& params, const Signal& volts) {
    std::vector<double> flux(volts.size());
    for (std::size_t i = 0; i < volts.size(); ++i) flux[i] = voltage_to_flux(params, volts[i]);
    return volts.with_samples(std::move(flux));
}

struct Measurement {
    CryoscopeTrace trace;
    PhaseSeries phase;
    FluxResponse response;
};

// Drive (unit-amplitude shape) -> volts -> distortion -> flux -> cryoscope
// -> reconstructed flux response. The qubit idles at the zero-volt flux.
Measurement measure(const CalibrationConfig& c, const Signal& drive, const std::vector<double>& durations,
                    std::uint64_t seed) {
    const Signal distorted = apply_distortion(c.distortion, scaled(drive, c.amplitude));
    const double baseline = voltage_to_flux(c.transmon, 0.0);
    Measurement m;
    m.trace = simulate_cryoscope(c.transmon, c.coherence, flux_waveform(c.transmon, distorted), baseline, durations,
                                 c.readout_noise_sd, seed);
    m.phase = extract_phase(m.trace);
    for (const auto& w : m.phase.warnings) warn(w);
    m.response = detuning_to_flux_response(phase_to_detuning(m.phase), c.transmon, baseline);
    return m;
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

Json provenance(const std::string& hash) {
    return Json{{"config_hash", hash}, {"tool_version", tool_version()}, {"created_utc", utc_timestamp()}};
}

// ---- atomic output ----

// Files are written into a hidden sibling directory and moved into place
// only by commit(); an abandoned stage is removed with its contents.
class OutputStage {
public:
    explicit OutputStage(const fs::path& out) : out_(out.lexically_normal()) {
        if (!out_.has_filename()) out_ = out_.parent_path();
        static std::atomic<unsigned> counter{0};
        const fs::path parent = out_.has_parent_path() ? out_.parent_path() : fs::path(".");
        fs::create_directories(parent);
        std::random_device rd;
        dir_ = parent / (".fluxdpd-stage-" + out_.filename().string() + "-" + std::to_string(rd()) + "-" +
                         std::to_string(counter++));
        fs::create_directories(dir_);
    }
    ~OutputStage() {
        std::error_code ec;
        fs::remove_all(dir_, ec);
    }
    OutputStage(const OutputStage&) = delete;
    OutputStage& operator=(const OutputStage&) = delete;

    fs::path file(const std::string& name) {
        names_.push_back(name);
        return dir_ / name;
    }

    void commit() {
        fs::create_directories(out_);
        for (const auto& n : names_) fs::rename(dir_ / n, out_ / n);
    }

private:
    fs::path out_;
    fs::path dir_;
    std::vector<std::string> names_;
};

struct Context {
    Json config;
    std::string hash;
    const CommandOptions& options;
    std::ostream& log;

    void note(const std::string& msg) const {
        if (options.verbose) log << msg << '\n';
    }
};

Context load(const CommandOptions& options, std::ostream& log) {
    if (options.config.empty()) throw ConfigError("--config is required");
    Json config;
    try {
        config = io::read_json(options.config);
    } catch (const io::FormatError& e) {
        throw ConfigError(e.what());
    }
    if (!config.is_object()) throw ConfigError(options.config.string() + ": top level must be a JSON object");
    if (options.seed) {
        if (config.contains("noise") && !config["noise"].is_object())
            throw ConfigError("config field 'noise' must be an object");
        config["noise"]["seed"] = *options.seed;
        if (config.contains("spectroscopy") && config["spectroscopy"].is_object())
            config["spectroscopy"]["seed"] = *options.seed;
    }
    return {config, config_hash(config), options, log};
}

// ---- commands ----

struct IirChoice {
    IirFilterSpec filter;
    std::optional<TapSearchResult> search;
};

// Fixed orders unless the settings ask for a search. A fixed design the data
// cannot determine (e.g. a clean step, where b_1 and a_1 are collinear) falls
// back to the smallest adequate orders within the configured ones.
IirChoice design_iir(const Signal& measured, const Signal& target, const SynthesisSettings& s) {
    if (!s.search) {
        try {
            SynthesisConfig sc{s.feedback_taps, s.feedforward_taps, std::nullopt, s.regularization};
            return {design_inverse_iir(measured, target, sc).filter, std::nullopt};
        } catch (const SingularSystem& e) {
            warn(std::string(e.what()) + "; searching up to the configured tap counts instead");
            auto r = search_min_taps(measured, target, s.threshold_db, s.feedback_taps, s.feedforward_taps,
                                     std::nullopt, s.regularization);
            IirFilterSpec f = r.design.filter;
            return {std::move(f), std::move(r)};
        }
    }
    auto r = search_min_taps(measured, target, s.threshold_db, s.max_feedback_taps, s.max_feedforward_taps,
                             std::nullopt, s.regularization);
    IirFilterSpec f = r.design.filter;
    return {std::move(f), std::move(r)};
}

int cmd_simulate_distortion(const Context& ctx) {
    const Json& root = ctx.config;
    const double fs = positive(number(root, "", "sample_rate_hz"), "sample_rate_hz");
    const Json& pulse = object(root, "", "pulse");
    const double amplitude = number(pulse, "pulse", "amplitude_v");
    const double delay = number_or(pulse, "pulse", "delay_s", 0.0);
    const double duration = positive(number(pulse, "pulse", "duration_s"), "pulse.duration_s");
    const SynthesisSettings defaults = root.contains("synthesis") ? parse_synthesis(object(root, "", "synthesis"))
                                                                  : SynthesisSettings{};

    const Json& models = require(root, "", "models");
    if (!models.is_array() || models.empty()) throw ConfigError("config field 'models' must be a non-empty array");

    const Signal step = parse_field("pulse", [&] { return make_step(amplitude, delay, duration, fs); });
    const Signal unit_target = parse_field("pulse", [&] { return make_step(1.0, delay, duration, fs); });

    struct Entry {
        std::string name;
        DistortionModel model;
        SynthesisSettings synthesis;
    };
    std::vector<Entry> entries;
    for (std::size_t i = 0; i < models.size(); ++i) {
        const std::string where = "models[" + std::to_string(i) + "]";
        const Json& m = models[i];
        const Json& name = require(m, where, "name");
        if (!name.is_string() || name.get<std::string>().empty() ||
            name.get<std::string>().find_first_of("/\\") != std::string::npos)
            throw ConfigError("config field '" + where + ".name' must be a plain non-empty string");
        DistortionModel model = parse_field(where + ".model", [&] { return io::model_from_json(require(m, where, "model")); });
        SynthesisSettings s = defaults;
        if (m.contains("synthesis")) {
            Json merged = root.contains("synthesis") ? root["synthesis"] : Json::object();
            merged.update(object(m, where, "synthesis"));
            s = parse_synthesis(merged);
        }
        parse_field(where + ".model", [&] { return discretize(model, fs); });
        entries.push_back({name.get<std::string>(), std::move(model), s});
    }

    OutputStage stage(ctx.options.out);
    Json summary = Json::array();
    for (const auto& e : entries) {
        const Signal distorted = apply_distortion(e.model, step);
        const Signal measured = scaled(distorted, 1.0 / amplitude);

        const IirChoice choice = design_iir(measured, unit_target, e.synthesis);
        const IirFilterSpec& iir = choice.filter;
        Json search_json = Json::array();
        if (choice.search) {
            for (const auto& c : choice.search->candidates) {
                search_json.push_back({{"m_a", c.feedback_taps},
                                       {"m_b", c.feedforward_taps},
                                       {"nmse_db", c.skipped ? Json(nullptr) : Json(io::round15(c.nmse_db))},
                                       {"stability", to_string(c.stability)},
                                       {"skipped", c.skipped}});
            }
        }

        const Signal predistorted = apply_iir(step, iir);
        const Signal corrected = apply_distortion(e.model, predistorted);
        const CorrectionReport report =
            evaluate_correction(e.model, iir, std::nullopt, unit_target, default_settle_index(unit_target));
        const bool met = report.nmse_db <= e.synthesis.threshold_db;

        io::write_signal_csv(stage.file(e.name + "_distorted.csv"), distorted);
        io::write_signal_csv(stage.file(e.name + "_predistorted.csv"), predistorted);
        io::write_signal_csv(stage.file(e.name + "_corrected.csv"), corrected);

        Json doc{{"provenance", provenance(ctx.hash)},
                 {"model", io::model_to_json(e.model)},
                 {"iir", io::filter_to_json(iir)},
                 {"report", io::report_to_json(report)},
                 {"threshold_db", io::round15(e.synthesis.threshold_db)},
                 {"threshold_met", met}};
        if (choice.search) doc["search"] = search_json;
        io::write_json(stage.file(e.name + "_report.json"), doc);
        summary.push_back({{"name", e.name}, {"nmse_db", doc["report"]["nmse_db"]}, {"threshold_met", met}});
        ctx.note(e.name + ": M_a=" + std::to_string(report.m_a) + " M_b=" + std::to_string(report.m_b) +
                 " nmse_db=" + io::format_number(report.nmse_db) + (met ? "" : " (threshold not met)"));
    }
    stage.commit();
    ctx.log << summary.dump() << '\n';
    return kExitOk;
}

int cmd_cryoscope(const Context& ctx) {
    CalibrationConfig c = parse_calibration_config(ctx.config);
    if (c.sweep.stop > 2.0 * c.coherence.t2_star)
        warn("sweep stop exceeds 2 x t2_star; late points carry little contrast");
    const std::size_t n = waveform_length(c.sweep.stop, c.sample_rate);
    const auto durations = duration_sweep(c.sweep.start, c.sweep.stop, c.sweep.step);

    const Signal drive = unit_step(n, c.sample_rate);
    const Signal distorted = apply_distortion(c.distortion, scaled(drive, c.amplitude));
    const double baseline = voltage_to_flux(c.transmon, 0.0);
    const auto sim = parse_field("sweep", [&] {
        return simulate_cryoscope_detailed(c.transmon, c.coherence, flux_waveform(c.transmon, distorted), baseline,
                                           durations, c.readout_noise_sd, c.seed);
    });
    const PhaseSeries phase = extract_phase(sim.trace);
    for (const auto& w : phase.warnings) warn(w);

    OutputStage stage(ctx.options.out);
    io::write_trace_csv(stage.file("cryoscope_trace.csv"), sim.trace);
    io::write_phase_csv(stage.file("phase.csv"), phase);
    io::write_signal_csv(stage.file("flux_waveform.csv"), flux_waveform(c.transmon, distorted));
    stage.commit();
    ctx.note("cryoscope: " + std::to_string(durations.size()) + " durations");
    return kExitOk;
}

int cmd_reconstruct(const Context& ctx) {
    if (ctx.options.trace.empty()) throw ConfigError("--trace is required");
    const TransmonParams params = parse_transmon(ctx.config, "transmon");
    CryoscopeTrace trace;
    try {
        trace = io::read_trace_csv(ctx.options.trace);
    } catch (const io::FormatError& e) {
        throw ConfigError(e.what());
    }
    const PhaseSeries phase = extract_phase(trace);
    for (const auto& w : phase.warnings) warn(w);
    const Signal detuning = phase_to_detuning(phase);
    const FluxResponse response = detuning_to_flux_response(detuning, params, voltage_to_flux(params, 0.0));

    OutputStage stage(ctx.options.out);
    io::write_phase_csv(stage.file("phase.csv"), phase);
    io::write_signal_csv(stage.file("detuning.csv"), detuning);
    io::write_flux_response_csv(stage.file("flux_response.csv"), response);
    stage.commit();
    return kExitOk;
}

int cmd_spectroscopy(const Context& ctx) {
    const TransmonParams params = parse_transmon(ctx.config, "transmon");
    const Json& s = object(ctx.config, "", "spectroscopy");
    auto axis = [&](const std::string& key, const char* lo, const char* hi) {
        const std::string where = "spectroscopy." + key;
        const Json& a = object(s, "spectroscopy", key);
        const double start = number(a, where, lo);
        const double stop = number(a, where, hi);
        const auto n = count(a, where, "count");
        if (n < 1) throw ConfigError("config field '" + where + ".count' must be >= 1");
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i)
            v[i] = n == 1 ? start : start + (stop - start) * static_cast<double>(i) / static_cast<double>(n - 1);
        return v;
    };
    const auto voltages = axis("voltages", "start_v", "stop_v");
    const auto freqs = axis("frequencies", "start_hz", "stop_hz");
    const double linewidth = positive(number(s, "spectroscopy", "linewidth_hz"), "spectroscopy.linewidth_hz");
    const double contrast = number(s, "spectroscopy", "contrast");
    const double noise = number_or(s, "spectroscopy", "noise_sd", 0.0);
    const auto seed = count_or(s, "spectroscopy", "seed", 0);
    const SpectroscopyMap map = parse_field("spectroscopy", [&] {
        return simulate_spectroscopy(params, voltages, freqs, linewidth, contrast, noise, seed);
    });

    OutputStage stage(ctx.options.out);
    io::write_map_csv(stage.file("spectroscopy_map.csv"), map);
    stage.commit();
    return kExitOk;
}

int cmd_fit_spectroscopy(const Context& ctx) {
    if (ctx.options.map.empty()) throw ConfigError("--map is required");
    const TransmonParams guess = parse_transmon(ctx.config, "initial_guess");
    FitOptions fo;
    if (ctx.config.contains("fit")) {
        const Json& f = object(ctx.config, "", "fit");
        fo.max_iterations = count_or(f, "fit", "max_iterations", fo.max_iterations);
        fo.step_tolerance = number_or(f, "fit", "step_tolerance", fo.step_tolerance);
        fo.residual_tolerance = number_or(f, "fit", "residual_tolerance", fo.residual_tolerance);
    }
    SpectroscopyMap map;
    try {
        map = io::read_map_csv(ctx.options.map);
        map.validate();
    } catch (const io::FormatError& e) {
        throw ConfigError(e.what());
    } catch (const InvalidArgument& e) {
        throw ConfigError(ctx.options.map.string() + ": " + e.what());
    }

    const PeakExtraction peaks = extract_peaks(map);
    for (const auto& d : peaks.diagnostics) ctx.note(d);
    const FitReport fit = fit_spectroscopy(peaks.peaks, guess, fo);

    OutputStage stage(ctx.options.out);
    Json doc = io::fit_report_to_json(fit);
    doc["provenance"] = provenance(ctx.hash);
    doc["peaks_used"] = peaks.peaks.size();
    doc["rows_skipped"] = peaks.skipped_rows.size();
    io::write_json(stage.file("fit_report.json"), doc);
    io::write_peaks_csv(stage.file("peaks.csv"), peaks.peaks);
    stage.commit();
    ctx.note("fit converged in " + std::to_string(fit.iterations) + " iterations");
    return kExitOk;
}

Signal read_response(const fs::path& path) {
    std::ifstream in(path);
    std::string header;
    if (!in || !std::getline(in, header)) throw ConfigError("cannot read " + path.string());
    try {
        if (header.rfind("time_s", 0) == 0) return io::read_flux_response_csv(path).normalized_signal();
        return io::read_signal_csv(path);
    } catch (const io::FormatError& e) {
        throw ConfigError(e.what());
    }
}

int cmd_design_dpd(const Context& ctx) {
    if (ctx.options.response.empty()) throw ConfigError("--response is required");
    const SynthesisSettings s =
        ctx.config.contains("synthesis") ? parse_synthesis(object(ctx.config, "", "synthesis")) : SynthesisSettings{};
    double delay = 0.0;
    if (ctx.config.contains("pulse")) delay = number_or(object(ctx.config, "", "pulse"), "pulse", "delay_s", 0.0);

    const Signal measured = read_response(ctx.options.response);
    const double fs = measured.sample_rate();
    const Signal target = parse_field("pulse", [&] {
        return make_step(1.0, delay, static_cast<double>(measured.size()) / fs, fs);
    });

    Json doc{{"provenance", provenance(ctx.hash)}};
    const IirChoice choice = design_iir(measured, target, s);
    const IirFilterSpec& iir = choice.filter;
    if (choice.search) doc["threshold_met"] = choice.search->threshold_met;
    const Signal corrected = apply_iir(measured, iir);
    const SampleWindow w = default_fit_window(target);
    doc["iir"] = io::filter_to_json(iir);
    doc["iir_nmse_db"] = io::round15(nmse_db(slice(target, w.begin, w.end), slice(corrected, w.begin, w.end)));

    OutputStage stage(ctx.options.out);
    io::write_signal_csv(stage.file("corrected_iir.csv"), corrected);
    if (s.fir_length > 0) {
        const FirTaps fir = design_residual_fir(corrected, target, s.fir_length, std::nullopt, s.fir_regularization);
        const Signal both = apply_fir(corrected, fir);
        doc["fir"] = io::fir_to_json(fir);
        doc["fir_nmse_db"] = io::round15(nmse_db(slice(target, w.begin, w.end), slice(both, w.begin, w.end)));
        io::write_signal_csv(stage.file("corrected_iir_fir.csv"), both);
    }
    io::write_json(stage.file("filters.json"), doc);
    stage.commit();
    return kExitOk;
}

int cmd_calibrate(const Context& ctx) {
    const CalibrationConfig c = parse_calibration_config(ctx.config);
    const CalibrationResult r = run_calibration(c);

    OutputStage stage(ctx.options.out);
    io::write_flux_response_csv(stage.file("flux_uncorrected.csv"), r.uncorrected);
    io::write_flux_response_csv(stage.file("flux_iir.csv"), r.after_iir);
    io::write_signal_csv(stage.file("predistorted_iir.csv"), r.predistorted_iir);
    if (r.after_fir) io::write_flux_response_csv(stage.file("flux_iir_fir.csv"), *r.after_fir);
    if (r.predistorted_fir) io::write_signal_csv(stage.file("predistorted_iir_fir.csv"), *r.predistorted_fir);
    io::write_json(stage.file("calibration_result.json"), calibration_result_to_json(r, ctx.hash));
    stage.commit();

    ctx.log << "max_dev_iir=" << io::format_number(r.report.max_dev_iir);
    if (r.report.max_dev_fir) ctx.log << " max_dev_fir=" << io::format_number(*r.report.max_dev_fir);
    ctx.log << " settle_index=" << r.settle_index << '\n';
    return kExitOk;
}

}  // namespace

std::string tool_version() { return FLUXDPD_VERSION; }

std::string config_hash(const Json& config) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : config.dump()) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

SynthesisSettings parse_synthesis(const Json& j) {
    const std::string w = "synthesis";
    if (!j.is_object()) throw ConfigError("config field 'synthesis' must be an object");
    SynthesisSettings s;
    s.feedback_taps = count_or(j, w, "feedback_taps", s.feedback_taps);
    s.feedforward_taps = count_or(j, w, "feedforward_taps", s.feedforward_taps);
    s.regularization = number_or(j, w, "regularization", s.regularization);
    s.search = flag_or(j, w, "search", s.search);
    s.threshold_db = number_or(j, w, "threshold_db", s.threshold_db);
    s.max_feedback_taps = count_or(j, w, "max_feedback_taps", s.max_feedback_taps);
    s.max_feedforward_taps = count_or(j, w, "max_feedforward_taps", s.max_feedforward_taps);
    s.fir_length = count_or(j, w, "fir_length", s.fir_length);
    s.fir_regularization = number_or(j, w, "fir_regularization", s.fir_regularization);
    if (j.contains("settle_index")) s.settle_index = count(j, w, "settle_index");
    if (s.feedforward_taps < 1) throw ConfigError("config field 'synthesis.feedforward_taps' must be >= 1");
    if (s.max_feedback_taps < 1 || s.max_feedforward_taps < 1)
        throw ConfigError("config fields 'synthesis.max_*_taps' must be >= 1");
    if (s.regularization < 0.0 || s.fir_regularization < 0.0)
        throw ConfigError("config field 'synthesis.*regularization' must be >= 0");
    return s;
}

CalibrationConfig parse_calibration_config(const Json& root) {
    CalibrationConfig c;
    c.sample_rate = positive(number(root, "", "sample_rate_hz"), "sample_rate_hz");
    c.distortion = parse_model(root, "distortion");
    parse_field("distortion", [&] { return discretize(c.distortion, c.sample_rate); });
    c.transmon = parse_transmon(root, "transmon");
    c.coherence = parse_field("coherence", [&] { return io::coherence_from_json(object(root, "", "coherence")); });
    c.amplitude = number(object(root, "", "pulse"), "pulse", "amplitude_v");
    c.sweep = parse_sweep(root);
    if (c.sweep.step < 1.0 / c.sample_rate * (1.0 - 1e-9))
        throw ConfigError("config field 'sweep.step_s' must be >= 1 / sample_rate_hz");
    if (root.contains("synthesis")) c.synthesis = parse_synthesis(object(root, "", "synthesis"));
    c.readout_noise_sd = parse_noise_sd(root);
    c.seed = parse_seed(root);
    return c;
}

CalibrationResult run_calibration(const CalibrationConfig& c) {
    const double ts = 1.0 / c.sample_rate;
    if (c.sweep.start != 0.0 || std::abs(c.sweep.step - ts) > 1e-9 * ts)
        throw ConfigError("calibrate needs sweep.start_s = 0 and sweep.step_s = 1 / sample_rate_hz");
    const std::size_t n = waveform_length(c.sweep.stop, c.sample_rate);
    const auto durations = duration_sweep(c.sweep.start, c.sweep.stop, c.sweep.step);
    if (durations.size() != n) throw ConfigError("sweep does not cover the pulse sample grid");
    const Signal target = unit_step(n, c.sample_rate);
    const SynthesisSettings& s = c.synthesis;

    const Measurement raw = measure(c, target, durations, c.seed);
    const Signal measured = raw.response.normalized_signal();

    const IirFilterSpec iir = design_iir(measured, target, s).filter;
    if (iir.stability() == Stability::Unstable) throw SingularSystem("designed IIR stage is unstable");

    const Signal pre_iir = apply_iir(target, iir);
    const Measurement m_iir = measure(c, pre_iir, durations, c.seed + 1);

    std::optional<FirTaps> fir;
    std::optional<Signal> pre_fir;
    std::optional<FluxResponse> after_fir;
    if (s.fir_length > 0) {
        fir = design_residual_fir(m_iir.response.normalized_signal(), target, s.fir_length, std::nullopt,
                                  s.fir_regularization);
        pre_fir = apply_fir(pre_iir, *fir);
        after_fir = measure(c, *pre_fir, durations, c.seed + 2).response;
    }

    // Deviations are read once the FIR has full memory.
    std::size_t settle = default_settle_index(target);
    if (s.fir_length > 0) settle = std::max(settle, s.fir_length - 1);
    settle = s.settle_index.value_or(settle);

    CalibrationResult r{iir,
                        fir,
                        settle,
                        evaluate_correction(c.distortion, iir, fir, target, settle),
                        raw.response,
                        m_iir.response,
                        after_fir,
                        0.0,
                        0.0,
                        std::nullopt,
                        pre_iir,
                        pre_fir};
    r.measured_dev_uncorrected = max_deviation(measured, 1.0, settle);
    r.measured_dev_iir = max_deviation(m_iir.response.normalized_signal(), 1.0, settle);
    if (after_fir) r.measured_dev_fir = max_deviation(after_fir->normalized_signal(), 1.0, settle);
    return r;
}

Json calibration_result_to_json(const CalibrationResult& r, const std::string& hash) {
    Json j{{"provenance", provenance(hash)},
           {"iir", io::filter_to_json(r.iir)},
           {"fir", r.fir ? io::fir_to_json(*r.fir) : Json(nullptr)},
           {"settle_index", r.settle_index},
           {"report", io::report_to_json(r.report)}};
    j["measured"] = {{"max_dev_uncorrected", io::round15(r.measured_dev_uncorrected)},
                     {"max_dev_iir", io::round15(r.measured_dev_iir)},
                     {"max_dev_fir", r.measured_dev_fir ? Json(io::round15(*r.measured_dev_fir)) : Json(nullptr)}};
    return j;
}

CorrectionReport reevaluate_calibration(const Json& result, const CalibrationConfig& c) {
    const IirFilterSpec iir = io::filter_from_json(result.at("iir"));
    std::optional<FirTaps> fir;
    if (!result.at("fir").is_null()) fir = io::fir_from_json(result.at("fir"));
    const std::size_t n = waveform_length(c.sweep.stop, c.sample_rate);
    return evaluate_correction(c.distortion, iir, fir, unit_step(n, c.sample_rate),
                               result.at("settle_index").get<std::size_t>());
}

int run_command(const std::string& command, const CommandOptions& options, std::ostream& log) {
    static const std::vector<std::pair<std::string, std::function<int(const Context&)>>> table = {
        {"simulate-distortion", cmd_simulate_distortion},
        {"cryoscope", cmd_cryoscope},
        {"reconstruct", cmd_reconstruct},
        {"spectroscopy", cmd_spectroscopy},
        {"fit-spectroscopy", cmd_fit_spectroscopy},
        {"design-dpd", cmd_design_dpd},
        {"calibrate", cmd_calibrate},
    };
    const auto it = std::find_if(table.begin(), table.end(), [&](const auto& e) { return e.first == command; });
    if (it == table.end()) {
        log << "error: unknown command '" << command << "'\n";
        return kExitConfig;
    }
    try {
        const Context ctx = load(options, log);
        return it->second(ctx);
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const OutOfRange& e) {
        log << "reconstruction error: " << e.what();
        if (e.index() != OutOfRange::kNoIndex) log << " (sample " << e.index() << ")";
        log << '\n';
        return kExitReconstructionRange;
    } catch (const FitDivergence& e) {
        log << "fit diverged: " << e.what() << "; best rms residual " << io::format_number(e.best().rms_residual_hz)
            << " Hz\n";
        return kExitFitDivergence;
    } catch (const IdentifiabilityError& e) {
        log << "identifiability error: " << e.what() << '\n';
        return kExitIdentifiability;
    } catch (const Json::exception& e) {
        log << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        log << "error: " << e.what() << '\n';
        return kExitFailure;
    }
}

}  // namespace fluxdpd::pipeline
