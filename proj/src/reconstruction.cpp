#include "fluxdpd/reconstruction.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fluxdpd/errors.hpp"

namespace fluxdpd {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kMinFluxSpan = 0.1;
constexpr double kMadToSigma = 1.4826;

double median(std::vector<double> v) {
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    double m = *mid;
    if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), mid));
    return m;
}

// Model value and gradient wrt (log ec, log ej, flux_per_volt, flux_offset).
struct ModelEval {
    double value;
    Eigen::Vector4d gradient;
};

ModelEval evaluate_model(const Eigen::Vector4d& theta, double voltage) {
    const double ec = std::exp(theta(0));
    const double ej = std::exp(theta(1));
    const double angle = kPi * (theta(2) * voltage + theta(3));
    const double cs = std::cos(angle);
    const double c = std::max(std::abs(cs), 1e-12);
    const double s = std::sqrt(8.0 * ec * ej * c);
    ModelEval out;
    out.value = s - ec;
    // ds/dangle = s / (2 c) * d|cos|/dangle
    const double ds_dangle = s / (2.0 * c) * (cs >= 0.0 ? -std::sin(angle) : std::sin(angle));
    out.gradient << 0.5 * s - ec, 0.5 * s, ds_dangle * kPi * voltage, ds_dangle * kPi;
    return out;
}

TransmonParams to_params(const Eigen::Vector4d& theta) {
    return {std::exp(theta(0)), std::exp(theta(1)), theta(2), theta(3)};
}

}  // namespace

Signal FluxResponse::normalized_signal() const {
    const double dt =
        times.size() > 1 ? (times.back() - times.front()) / static_cast<double>(times.size() - 1) : 1.0;
    return Signal(normalized_flux, 1.0 / dt);
}

double wrap_phase(double angle) {
    double w = std::remainder(angle, kTwoPi);  // [-pi, pi]
    if (w <= -kPi) w += kTwoPi;
    return w;
}

std::vector<double> unwrap_phase(const std::vector<double>& wrapped) {
    if (wrapped.empty()) throw InvalidArgument("unwrap_phase: empty input");
    std::vector<double> out(wrapped.size());
    out[0] = wrapped[0];
    double correction = 0.0;
    for (std::size_t i = 1; i < wrapped.size(); ++i) {
        const double d = wrapped[i] - wrapped[i - 1];
        if (std::abs(d) > kPi) correction -= kTwoPi * std::round(d / kTwoPi);
        out[i] = wrapped[i] + correction;
    }
    return out;
}

PhaseSeries extract_phase(const CryoscopeTrace& trace, double quality_floor) {
    trace.validate();
    PhaseSeries out;
    out.durations = trace.durations;
    std::vector<double> wrapped(trace.durations.size());
    out.quality.resize(trace.durations.size());
    std::size_t low = 0;
    std::size_t first_low = 0;
    for (std::size_t i = 0; i < wrapped.size(); ++i) {
        const double x = 2.0 * trace.p_x[i] - 1.0;
        const double y = 2.0 * trace.p_y[i] - 1.0;
        wrapped[i] = std::atan2(y, x);
        out.quality[i] = std::hypot(x, y);
        if (out.quality[i] < quality_floor && low++ == 0) first_low = i;
    }
    if (low > 0) {
        out.warnings.push_back("low contrast: " + std::to_string(low) + " point(s) below quality floor " +
                               std::to_string(quality_floor) + ", first at index " + std::to_string(first_low));
    }
    out.phase = unwrap_phase(wrapped);
    return out;
}

Signal phase_to_detuning(const PhaseSeries& phase) {
    const auto& t = phase.durations;
    const auto& p = phase.phase;
    if (t.size() < 2 || p.size() != t.size()) throw InvalidArgument("phase_to_detuning: need >= 2 matching points");
    const double step = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
    if (!(step > 0.0)) throw InvalidArgument("phase_to_detuning: durations must increase");
    for (std::size_t i = 1; i < t.size(); ++i) {
        if (std::abs((t[i] - t[i - 1]) - step) > 1e-9 * step)
            throw InvalidArgument("phase_to_detuning: non-uniform spacing at index " + std::to_string(i));
    }

    const std::size_t n = p.size();
    std::vector<double> detuning(n);
    detuning[0] = (p[1] - p[0]) / (step * kTwoPi);
    detuning[n - 1] = (p[n - 1] - p[n - 2]) / (step * kTwoPi);
    for (std::size_t i = 1; i + 1 < n; ++i) detuning[i] = (p[i + 1] - p[i - 1]) / (2.0 * step * kTwoPi);
    return Signal(std::move(detuning), 1.0 / step);
}

FluxResponse detuning_to_flux_response(const Signal& detuning, const TransmonParams& params, double baseline_flux,
                                       std::optional<SampleWindow> analysis_window) {
    const std::size_t n = detuning.size();
    const SampleWindow window = analysis_window.value_or(n > 1 ? SampleWindow{1, n} : SampleWindow{0, n});
    if (window.begin >= window.end || window.end > n)
        throw InvalidArgument("detuning_to_flux_response: analysis window outside trace");

    const double f_base = flux_to_frequency(params, baseline_flux);
    FluxResponse out;
    out.analysis_window = window;
    out.times.resize(n);
    out.raw_flux.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.times[i] = detuning.time(i);
        try {
            out.raw_flux[i] = frequency_to_flux(params, f_base + detuning[i]);
        } catch (const OutOfRange& e) {
            throw OutOfRange("detuning at sample " + std::to_string(i) + " out of band: " + e.what(), i);
        }
    }

    double sum = 0.0;
    for (std::size_t i = window.begin; i < window.end; ++i) sum += out.raw_flux[i];
    const double mean = sum / static_cast<double>(window.size());
    if (mean == 0.0) throw InvalidArgument("detuning_to_flux_response: zero mean flux, cannot normalize");
    out.normalized_flux.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.normalized_flux[i] = out.raw_flux[i] / mean;
    return out;
}

PeakExtraction extract_peaks(const SpectroscopyMap& map) {
    map.validate();
    PeakExtraction out;
    const auto& f = map.probe_frequencies;
    for (std::size_t v = 0; v < map.voltages.size(); ++v) {
        const auto& row = map.response[v];
        const auto k = static_cast<std::size_t>(std::min_element(row.begin(), row.end()) - row.begin());
        const double level = median(row);
        std::vector<double> spread(row.size());
        for (std::size_t i = 0; i < row.size(); ++i) spread[i] = std::abs(row[i] - level);
        const double noise = kMadToSigma * median(spread);
        const double dip = level - row[k];
        if (!(dip > 0.0) || dip <= 3.0 * noise) {
            out.skipped_rows.push_back(v);
            out.diagnostics.push_back("voltage index " + std::to_string(v) + ": no dip above 3x noise floor");
            continue;
        }

        double peak = f[k];
        if (k > 0 && k + 1 < row.size()) {
            const double x0 = f[k - 1], x1 = f[k], x2 = f[k + 1];
            double y0 = row[k - 1], y1 = row[k], y2 = row[k + 1];
            // 1 / dip is exactly quadratic in f for a Lorentzian line, so the
            // parabola goes through its negative when all three dips are real.
            if (level - y0 > 0.0 && level - y2 > 0.0) {
                y0 = -1.0 / (level - y0);
                y1 = -1.0 / (level - y1);
                y2 = -1.0 / (level - y2);
            }
            const double num = (x1 - x0) * (x1 - x0) * (y1 - y2) - (x1 - x2) * (x1 - x2) * (y1 - y0);
            const double den = (x1 - x0) * (y1 - y2) - (x1 - x2) * (y1 - y0);
            if (den != 0.0) peak = std::clamp(x1 - 0.5 * num / den, std::min(x0, x2), std::max(x0, x2));
        }
        out.peaks.push_back({map.voltages[v], peak});
    }
    return out;
}

FitReport fit_spectroscopy(const std::vector<SpectroscopyPeak>& points, const TransmonParams& initial_guess,
                           const FitOptions& options) {
    if (points.size() < 4)
        throw IdentifiabilityError("fit_spectroscopy: need at least 4 points for 4 parameters, got " +
                                   std::to_string(points.size()));
    if (!(initial_guess.ec_hz > 0.0) || !(initial_guess.ej_hz > 0.0))
        throw InvalidArgument("fit_spectroscopy: initial guess energies must be positive");
    const auto [vmin, vmax] = std::minmax_element(points.begin(), points.end(),
                                                  [](const auto& a, const auto& b) { return a.voltage < b.voltage; });
    const double span = std::abs(initial_guess.flux_per_volt) * (vmax->voltage - vmin->voltage);
    if (span < kMinFluxSpan) {
        throw IdentifiabilityError("fit_spectroscopy: points span " + std::to_string(span) +
                                   " flux quanta, below the 0.1 needed to identify the curve");
    }

    const auto m = static_cast<Eigen::Index>(points.size());
    auto residuals = [&](const Eigen::Vector4d& theta, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
        r.resize(m);
        if (jac) jac->resize(m, 4);
        for (Eigen::Index i = 0; i < m; ++i) {
            const auto e = evaluate_model(theta, points[static_cast<std::size_t>(i)].voltage);
            r(i) = points[static_cast<std::size_t>(i)].frequency - e.value;
            if (jac) jac->row(i) = e.gradient.transpose();
        }
        return r.squaredNorm();
    };

    Eigen::Vector4d theta(std::log(initial_guess.ec_hz), std::log(initial_guess.ej_hz), initial_guess.flux_per_volt,
                          initial_guess.flux_offset);
    Eigen::VectorXd r;
    Eigen::MatrixXd jac;
    double cost = residuals(theta, r, &jac);

    FitReport report;
    auto snapshot = [&](std::size_t iterations) {
        report.params = to_params(theta);
        report.rms_residual_hz = std::sqrt(cost / static_cast<double>(m));
        report.iterations = iterations;
        return report;
    };

    double lambda = 1e-3;
    for (std::size_t it = 1; it <= options.max_iterations; ++it) {
        if (cost == 0.0) return snapshot(it);
        const Eigen::Matrix4d jtj = jac.transpose() * jac;
        const Eigen::Vector4d g = jac.transpose() * r;
        Eigen::Matrix4d damped = jtj;
        for (int d = 0; d < 4; ++d) damped(d, d) += lambda * std::max(jtj(d, d), 1e-30);
        const Eigen::Vector4d step = damped.ldlt().solve(g);
        if (!step.allFinite()) throw IdentifiabilityError("fit_spectroscopy: normal matrix is singular");

        const double rel_step = step.norm() / (theta.norm() + 1e-12);
        const Eigen::Vector4d trial = theta + step;
        Eigen::VectorXd trial_r;
        const double trial_cost = residuals(trial, trial_r, nullptr);

        if (std::isfinite(trial_cost) && trial_cost <= cost) {
            const double rel_change = (cost - trial_cost) / cost;
            theta = trial;
            cost = residuals(theta, r, &jac);
            report.cost_history.push_back(cost);
            lambda = std::max(lambda / 10.0, 1e-12);
            if (rel_step < options.step_tolerance || rel_change < options.residual_tolerance) return snapshot(it);
        } else {
            if (rel_step < options.step_tolerance) return snapshot(it);
            lambda *= 10.0;
        }
    }
    throw FitDivergence("fit_spectroscopy: no convergence within " + std::to_string(options.max_iterations) +
                            " iterations",
                        snapshot(options.max_iterations));
}

}  // namespace fluxdpd
