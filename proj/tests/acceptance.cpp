// One PASS/FAIL line per acceptance criterion; exits nonzero on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "fluxdpd/distortion.hpp"
#include "fluxdpd/io.hpp"
#include "fluxdpd/pipeline.hpp"
#include "fluxdpd/reconstruction.hpp"
#include "fluxdpd/signal.hpp"
#include "fluxdpd/synthesis.hpp"
#include "fluxdpd/transmon.hpp"

using namespace fluxdpd;

namespace {

constexpr double kRate = 2.4e9;
constexpr double kTs = 1.0 / kRate;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

bool report(int id, const char* name, bool ok, double runtime, double limit, const std::string& detail) {
    const bool pass = ok && runtime < limit;
    std::printf("%s #%d %s: %s [%.2f s, limit %.0f s]\n", pass ? "PASS" : "FAIL", id, name, detail.c_str(), runtime,
                limit);
    std::fflush(stdout);
    return pass;
}

double window_nmse(const Signal& target, const Signal& corrected, SampleWindow w) {
    return nmse_db(slice(target, w.begin, w.end), slice(corrected, w.begin, w.end));
}

bool criterion1() {
    const auto start = Clock::now();
    const Signal ideal = make_step(1.0, 0.0, 500e-9, kRate);
    const SampleWindow w = default_fit_window(ideal);
    char buf[512];
    std::string detail;
    bool ok = true;

    const Signal over = apply_distortion(ExponentialOvershoot{0.1, 100e-9}, ideal);
    const auto fixed = design_inverse_iir(over, ideal, SynthesisConfig{1, 2});
    const double over_db = window_nmse(ideal, apply_iir(over, fixed.filter), w);
    ok = ok && over_db <= -30.0 && fixed.stability != Stability::Unstable;
    std::snprintf(buf, sizeof buf, "overshoot (1,2) %.1f dB", over_db);
    detail += buf;

    const std::pair<const char*, DistortionModel> searched[] = {
        {"awg", SecondOrderAwg{kTwoPi / 20e-9, 0.6}},
        {"bias_tee", BiasTeeHighPass{100e-6}},
    };
    for (const auto& [name, model] : searched) {
        const auto r = search_min_taps(apply_distortion(model, ideal), ideal, -30.0, 2, 4);
        ok = ok && r.threshold_met;
        std::snprintf(buf, sizeof buf, "; %s (%zu,%zu) %.1f dB", name, r.config.feedback_taps,
                      r.config.feedforward_taps, r.nmse_db);
        detail += buf;
    }
    detail += " (bound -30 dB)";
    return report(1, "distortion model inversion", ok, seconds_since(start), 5.0, detail);
}

bool criterion2() {
    const auto start = Clock::now();
    const auto config =
        pipeline::parse_calibration_config(io::read_json(FLUXDPD_CONFIG_DIR "/fig5_calibration.json"));
    const auto result = pipeline::run_calibration(config);
    const double iir = result.report.max_dev_iir;
    const double fir = result.report.max_dev_fir.value_or(1.0);
    const bool ok = iir <= 0.0065 && fir <= 0.0017;
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "from sample %zu: IIR %.5f (bound 0.0065), FIR %.5f (bound 0.0017); reconstructed: "
                  "uncorrected %.5f, IIR %.5f, FIR %.5f",
                  result.settle_index, iir, fir, result.measured_dev_uncorrected, result.measured_dev_iir,
                  result.measured_dev_fir.value_or(-1.0));
    return report(2, "closed-loop calibration", ok, seconds_since(start), 30.0, buf);
}

bool criterion3() {
    const auto start = Clock::now();
    const TransmonParams q{0.2e9, 15e9, 1.0, 0.0};
    double flux_err = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const double flux = 0.5 * i / 999.0;
        flux_err = std::max(flux_err, std::abs(frequency_to_flux(q, flux_to_frequency(q, flux)) - flux));
    }

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> stepd(-0.99 * std::numbers::pi, 0.99 * std::numbers::pi);
    double unwrap_err = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> walk(200), wrapped(200);
        double x = 10.0 * stepd(rng);
        for (std::size_t i = 0; i < walk.size(); ++i) {
            if (i > 0) x += stepd(rng);
            walk[i] = x;
            wrapped[i] = wrap_phase(x);
        }
        const auto un = unwrap_phase(wrapped);
        const double shift = walk[0] - un[0];
        for (std::size_t i = 0; i < walk.size(); ++i) unwrap_err = std::max(unwrap_err, std::abs(un[i] + shift - walk[i]));
    }

    const double amp = 0.1, tau = 100e-9;
    const double r = std::exp(-kTs / tau);
    const Signal ideal = make_step(1.0, 0.0, 200e-9, kRate);
    const auto d = design_inverse_iir(apply_distortion(ExponentialOvershoot{amp, tau}, ideal), ideal, {1, 2});
    const double b0 = 1.0 / (1.0 + amp), b1 = -r / (1.0 + amp), a1 = (r + amp) / (1.0 + amp);
    const auto ff = d.filter.feedforward();
    const auto fb = d.filter.feedback();
    const double coef_err =
        std::max({std::abs(ff[0] - b0), std::abs(ff[1] - b1), std::abs(fb[0] - a1)});

    const bool ok = flux_err < 1e-12 && unwrap_err < 1e-9 && coef_err < 1e-9;
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "flux round trip %.2e (bound 1e-12); unwrap(wrap) %.2e over 1000 walks, up to 2 pi k; "
                  "inverse coefficients %.2e (bound 1e-9)",
                  flux_err, unwrap_err, coef_err);
    return report(3, "round-trip properties", ok, seconds_since(start), 5.0, buf);
}

double cryoscope_error(double noise_sd, std::uint64_t seed) {
    const TransmonParams q{0.2e9, 15e9, 0.27, 0.0};
    const std::size_t n = 1201;
    const Signal volts = apply_distortion(ExponentialOvershoot{0.1, 100e-9}, make_step(1.0, 0.0, n * kTs, kRate));
    std::vector<double> flux(n);
    for (std::size_t i = 0; i < n; ++i) flux[i] = voltage_to_flux(q, volts[i]);
    const double baseline = voltage_to_flux(q, 0.0);
    const auto durations = duration_sweep(0.0, (n - 1) * kTs, kTs);
    const auto trace = simulate_cryoscope(q, CoherenceParams{21.5e-6, 4.9e-6}, Signal(flux, kRate), baseline,
                                          durations, noise_sd, seed);
    const auto resp = detuning_to_flux_response(phase_to_detuning(extract_phase(trace)), q, baseline);
    double mean = 0.0;
    for (std::size_t i = resp.analysis_window.begin; i < resp.analysis_window.end; ++i) mean += volts[i];
    mean /= static_cast<double>(resp.analysis_window.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(resp.normalized_flux[i] - volts[i] / mean));
    return worst;
}

bool criterion4() {
    const auto start = Clock::now();
    const double clean = cryoscope_error(0.0, 1);
    const double noisy = cryoscope_error(0.01, 1);
    double lo = noisy, hi = noisy;
    for (std::uint64_t seed = 2; seed <= 20; ++seed) {
        const double e = cryoscope_error(0.01, seed);
        lo = std::min(lo, e);
        hi = std::max(hi, e);
    }
    const bool ok = clean < 1e-3 && noisy < 1e-2;
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "noiseless %.2e (bound 1e-3); noise sd 0.01 seed 1: %.2e (bound 1e-2); seeds 1-20 span "
                  "%.2e..%.2e",
                  clean, noisy, lo, hi);
    return report(4, "cryoscope reconstruction", ok, seconds_since(start), 10.0, buf);
}

double worst_param_error(const TransmonParams& fit, const TransmonParams& truth) {
    return std::max({std::abs(fit.ec_hz / truth.ec_hz - 1.0), std::abs(fit.ej_hz / truth.ej_hz - 1.0),
                     std::abs(fit.flux_per_volt / truth.flux_per_volt - 1.0),
                     std::abs(fit.flux_offset / truth.flux_offset - 1.0)});
}

bool criterion5() {
    const auto start = Clock::now();
    const auto cfg = io::read_json(FLUXDPD_CONFIG_DIR "/spectroscopy_oracle.json");
    const TransmonParams truth = io::transmon_from_json(cfg.at("transmon"));
    const TransmonParams guess = io::transmon_from_json(cfg.at("initial_guess"));
    std::vector<double> volts, probes;
    for (int i = 0; i < 41; ++i) volts.push_back(-0.5 + 0.025 * i);
    for (int i = 0; i < 201; ++i) probes.push_back(2.4e9 + 12e6 * i);

    auto run = [&](double noise_sd) {
        const auto map = simulate_spectroscopy(truth, volts, probes, 20e6, 0.5, noise_sd, 11);
        return worst_param_error(fit_spectroscopy(extract_peaks(map).peaks, guess).params, truth);
    };
    const double noiseless = run(0.0);
    const double noisy = run(0.001);
    const bool ok = noiseless < 1e-3 && noisy < 1e-2;
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "41x201 map, worst relative parameter error: noiseless %.2e (bound 1e-3), noise sd 0.001 "
                  "%.2e (bound 1e-2)",
                  noiseless, noisy);
    return report(5, "spectroscopy fit", ok, seconds_since(start), 10.0, buf);
}

}  // namespace

int main() {
    bool ok = true;
    for (auto* criterion : {criterion1, criterion2, criterion3, criterion4, criterion5}) {
        try {
            ok = criterion() && ok;
        } catch (const std::exception& e) {
            std::printf("FAIL: exception %s\n", e.what());
            ok = false;
        }
    }
    return ok ? 0 : 1;
}
