#include "fluxdpd/synthesis.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

#include "fluxdpd/errors.hpp"

namespace fluxdpd {
namespace {

constexpr double kConditionLimit = 1e10;
constexpr double kRankThreshold = 1e-13;

struct LsSolution {
    Eigen::VectorXd coefficients;
    double relative_residual = 0.0;
    bool orthogonal = false;
};

std::string describe(const SampleWindow& w) {
    return "[" + std::to_string(w.begin) + ", " + std::to_string(w.end) + ")";
}

// Solves min ||A x - y||^2 + lambda ||x||^2. Normal equations when well
// conditioned, column-pivoted QR on the augmented system otherwise.
LsSolution solve_least_squares(const Eigen::MatrixXd& a, const Eigen::VectorXd& y, double lambda,
                               const SampleWindow& window) {
    const Eigen::Index p = a.cols();
    LsSolution out;

    Eigen::MatrixXd normal = a.transpose() * a;
    normal.diagonal().array() += lambda;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(normal, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();

    if (hi > 0.0 && lo > 0.0 && hi / lo <= kConditionLimit) {
        out.coefficients = normal.ldlt().solve(a.transpose() * y);
    } else {
        Eigen::MatrixXd aug(a.rows() + (lambda > 0.0 ? p : 0), p);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(aug.rows());
        aug.topRows(a.rows()) = a;
        rhs.head(a.rows()) = y;
        if (lambda > 0.0) aug.bottomRows(p) = std::sqrt(lambda) * Eigen::MatrixXd::Identity(p, p);

        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(aug);
        qr.setThreshold(kRankThreshold);
        if (qr.rank() < p) {
            throw SingularSystem("least-squares design matrix is rank deficient (rank " + std::to_string(qr.rank()) +
                                 " < " + std::to_string(p) + ") over fit window " + describe(window));
        }
        out.coefficients = qr.solve(rhs);
        out.orthogonal = true;
    }

    const double denom = y.squaredNorm();
    const double resid = (a * out.coefficients - y).squaredNorm();
    out.relative_residual = denom > 0.0 ? resid / denom : resid;
    return out;
}

SampleWindow resolve_window(const std::optional<SampleWindow>& requested, const Signal& target) {
    const SampleWindow w = requested.value_or(default_fit_window(target));
    if (w.begin >= w.end || w.end > target.size())
        throw InvalidArgument("fit window " + describe(w) + " outside trace of length " + std::to_string(target.size()));
    return w;
}

void require_compatible(const Signal& a, const Signal& b, const char* what) {
    if (a.size() != b.size()) throw InvalidArgument(std::string(what) + ": length mismatch");
    if (!same_rate(a.sample_rate(), b.sample_rate())) throw InvalidArgument(std::string(what) + ": sample rate mismatch");
}

double target_level(const Signal& target) {
    const double level = target.values().back();
    if (level == 0.0) throw InvalidArgument("target step must end at a nonzero level");
    return level;
}

}  // namespace

std::size_t step_edge(const Signal& target) {
    for (std::size_t n = 0; n < target.size(); ++n)
        if (target[n] != 0.0) return n;
    throw InvalidArgument("target step is all zero");
}

SampleWindow default_fit_window(const Signal& target) {
    return {step_edge(target), target.size()};
}

std::size_t default_settle_index(const Signal& target) {
    const double level = target_level(target);
    for (std::size_t n = 0; n < target.size(); ++n) {
        if (target[n] == level) return std::min(n + 1, target.size() - 1);
    }
    return target.size() - 1;
}

InverseIirDesign design_inverse_iir(const Signal& measured, const Signal& target, const SynthesisConfig& config) {
    require_compatible(measured, target, "design_inverse_iir");
    if (config.feedforward_taps < 1) throw InvalidArgument("design_inverse_iir: at least one feedforward tap required");
    if (config.regularization < 0.0) throw InvalidArgument("design_inverse_iir: regularization must be >= 0");
    const SampleWindow window = resolve_window(config.fit_window, target);
    const std::size_t mb = config.feedforward_taps;
    const std::size_t ma = config.feedback_taps;
    if (window.size() < ma + mb) {
        throw InvalidArgument("design_inverse_iir: fit window " + describe(window) + " has fewer rows than the " +
                              std::to_string(ma + mb) + " unknowns");
    }

    const auto rows = static_cast<Eigen::Index>(window.size());
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(rows, static_cast<Eigen::Index>(mb + ma));
    Eigen::VectorXd y(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const std::size_t n = window.begin + static_cast<std::size_t>(r);
        y(r) = target[n];
        for (std::size_t i = 0; i < mb && i <= n; ++i) a(r, static_cast<Eigen::Index>(i)) = measured[n - i];
        for (std::size_t j = 1; j <= ma && j <= n; ++j) a(r, static_cast<Eigen::Index>(mb + j - 1)) = target[n - j];
    }

    const LsSolution sol = solve_least_squares(a, y, config.regularization, window);
    std::vector<double> b(sol.coefficients.data(), sol.coefficients.data() + mb);
    std::vector<double> fb(sol.coefficients.data() + mb, sol.coefficients.data() + mb + ma);
    IirFilterSpec filter(std::move(b), std::move(fb));
    const Stability stability = filter.stability();
    return {std::move(filter), stability, sol.relative_residual, sol.orthogonal, window};
}

FirTaps design_residual_fir(const Signal& corrected, const Signal& target, std::size_t fir_length,
                            std::optional<SampleWindow> fit_window, double regularization) {
    require_compatible(corrected, target, "design_residual_fir");
    if (fir_length < 1) throw InvalidArgument("design_residual_fir: fir_length must be >= 1");
    if (regularization < 0.0) throw InvalidArgument("design_residual_fir: regularization must be >= 0");
    SampleWindow window = resolve_window(fit_window, target);
    if (window.size() < fir_length)
        throw InvalidArgument("design_residual_fir: fit window " + describe(window) + " shorter than fir_length");
    // Full memory: every tap multiplies a sample inside the trace.
    window.begin = std::max(window.begin, fir_length - 1);
    if (window.size() < fir_length) {
        throw InvalidArgument("design_residual_fir: fewer than fir_length full-memory rows in window " +
                              describe(window));
    }

    const auto rows = static_cast<Eigen::Index>(window.size());
    const auto cols = static_cast<Eigen::Index>(fir_length);
    Eigen::MatrixXd a(rows, cols);
    Eigen::VectorXd y(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const std::size_t n = window.begin + static_cast<std::size_t>(r);
        y(r) = target[n];
        for (std::size_t k = 0; k < fir_length; ++k) a(r, static_cast<Eigen::Index>(k)) = corrected[n - k];
    }
    const LsSolution sol = solve_least_squares(a, y, regularization, window);
    return FirTaps(std::vector<double>(sol.coefficients.data(), sol.coefficients.data() + cols));
}

TapSearchResult search_min_taps(const Signal& measured, const Signal& target, double threshold_db,
                                std::size_t max_feedback, std::size_t max_feedforward,
                                std::optional<SampleWindow> fit_window, double regularization) {
    require_compatible(measured, target, "search_min_taps");
    if (max_feedforward < 1) throw InvalidArgument("search_min_taps: max_feedforward must be >= 1");
    const SampleWindow window = resolve_window(fit_window, target);
    const Signal reference = slice(target, window.begin, window.end);

    TapSearchResult result{SynthesisConfig{}, InverseIirDesign{IirFilterSpec({1.0}), Stability::Stable, 0.0, false, {}},
                           0.0, false, {}};
    bool have_best = false;

    for (std::size_t total = 1; total <= max_feedback + max_feedforward; ++total) {
        for (std::size_t ma = 0; ma <= std::min(max_feedback, total - 1); ++ma) {
            const std::size_t mb = total - ma;
            if (mb < 1 || mb > max_feedforward) continue;

            TapCandidate cand{ma, mb, 0.0, 0.0, Stability::Stable, false};
            SynthesisConfig cfg{ma, mb, window, regularization};
            std::optional<InverseIirDesign> design;
            try {
                design = design_inverse_iir(measured, target, cfg);
            } catch (const SingularSystem&) {
                cand.skipped = true;
                result.candidates.push_back(cand);
                continue;
            }
            cand.stability = design->stability;
            cand.relative_residual = design->relative_residual;
            if (design->stability == Stability::Unstable) {
                cand.skipped = true;
                result.candidates.push_back(cand);
                continue;
            }
            const Signal corrected = apply_iir(measured, design->filter);
            cand.nmse_db = nmse_db(reference, slice(corrected, window.begin, window.end));
            result.candidates.push_back(cand);

            if (!have_best || cand.nmse_db < result.nmse_db) {
                have_best = true;
                result.config = cfg;
                result.design = *design;
                result.nmse_db = cand.nmse_db;
            }
            if (cand.nmse_db <= threshold_db) {
                result.config = cfg;
                result.design = std::move(*design);
                result.nmse_db = cand.nmse_db;
                result.threshold_met = true;
                return result;
            }
        }
    }
    if (!have_best) throw SingularSystem("search_min_taps: no stable, solvable candidate in the search grid");
    return result;
}

CorrectionReport evaluate_correction(const Plant& plant, const IirFilterSpec& iir, const std::optional<FirTaps>& fir,
                                     const Signal& test_step, std::size_t settle_index) {
    if (settle_index >= test_step.size()) throw InvalidArgument("evaluate_correction: settle_index out of range");
    const double level = target_level(test_step);

    CorrectionReport report;
    report.m_a = iir.feedback_taps();
    report.m_b = iir.feedforward_taps();
    report.stable = iir.stability() != Stability::Unstable;

    const Signal predistorted = apply_iir(test_step, iir);
    const Signal after_iir = plant(predistorted);
    report.max_dev_iir = max_deviation(after_iir, level, settle_index);
    if (fir) {
        report.fir_length = fir->size();
        const Signal after_fir = plant(apply_fir(predistorted, *fir));
        report.max_dev_fir = max_deviation(after_fir, level, settle_index);
        report.nmse_db = nmse_db(test_step, after_fir);
    } else {
        report.nmse_db = nmse_db(test_step, after_iir);
    }
    return report;
}

CorrectionReport evaluate_correction(const DistortionModel& distortion, const IirFilterSpec& iir,
                                     const std::optional<FirTaps>& fir, const Signal& test_step,
                                     std::size_t settle_index) {
    return evaluate_correction([&](const Signal& s) { return apply_distortion(distortion, s); }, iir, fir, test_step,
                               settle_index);
}

}  // namespace fluxdpd
