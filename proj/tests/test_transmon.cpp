#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fluxdpd/diagnostics.hpp"
#include "fluxdpd/errors.hpp"
#include "fluxdpd/transmon.hpp"

using namespace fluxdpd;

namespace {

constexpr double kRate = 2.4e9;
constexpr double kTs = 1.0 / kRate;
constexpr double kPi = std::numbers::pi;

TransmonParams qubit() { return TransmonParams{0.2e9, 15e9, 0.1, 0.0}; }

// Effectively infinite coherence.
CoherenceParams long_coherence() { return CoherenceParams{1e3, 1e3}; }

Signal constant(double value, std::size_t n) { return Signal(std::vector<double>(n, value), kRate); }

// Flux giving `detuning` above the frequency at `baseline`.
double flux_for_detuning(double baseline, double detuning) {
    return frequency_to_flux(qubit(), flux_to_frequency(qubit(), baseline) + detuning);
}

}  // namespace

TEST(TransmonParams, Validation) {
    EXPECT_THROW((TransmonParams{0.0, 15e9, 0.1, 0.0}.validate()), InvalidArgument);
    EXPECT_THROW((TransmonParams{0.2e9, -1.0, 0.1, 0.0}.validate()), InvalidArgument);
    EXPECT_THROW((TransmonParams{1e9, 0.5e9, 0.1, 0.0}.validate()), InvalidArgument);
    std::vector<std::string> warnings;
    ScopedWarningHandler guard([&](std::string_view m) { warnings.emplace_back(m); });
    TransmonParams{1e9, 5e9, 0.1, 0.0}.validate();
    EXPECT_EQ(warnings.size(), 1u);
    qubit().validate();
    EXPECT_EQ(warnings.size(), 1u);
}

TEST(CoherenceParams, Validation) {
    EXPECT_NO_THROW((CoherenceParams{21.5e-6, 4.9e-6}.validate()));
    EXPECT_THROW((CoherenceParams{1e-6, 3e-6}.validate()), InvalidArgument);
    EXPECT_THROW((CoherenceParams{0.0, 1e-6}.validate()), InvalidArgument);
}

TEST(FluxToFrequency, SweetSpot) {
    EXPECT_NEAR(flux_to_frequency(qubit(), 0.0), std::sqrt(24.0) * 1e9 - 0.2e9, 1e-3);
    EXPECT_NEAR(flux_to_frequency(qubit(), 0.0), 4.6990e9, 1e5);
    EXPECT_DOUBLE_EQ(max_frequency(qubit()), flux_to_frequency(qubit(), 0.0));
}

TEST(FluxToFrequency, HalfQuantumAndPeriod) {
    EXPECT_NEAR(flux_to_frequency(qubit(), 0.5), -0.2e9, 1e-3);
    EXPECT_NEAR(flux_to_frequency(qubit(), 1.0), flux_to_frequency(qubit(), 0.0), 1e-3);
}

TEST(FluxToFrequency, EvenAndPeriodicProperty) {
    for (int i = 0; i <= 200; ++i) {
        const double phi = -1.0 + 0.01 * i;
        const double f = flux_to_frequency(qubit(), phi);
        const double tol = 1e-12 * std::max(1.0, std::abs(f));
        EXPECT_NEAR(flux_to_frequency(qubit(), -phi), f, tol);
        EXPECT_NEAR(flux_to_frequency(qubit(), phi + 1.0), f, tol);
    }
}

TEST(FrequencyToFlux, RoundTripOnPrincipalBranch) {
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const double phi = 0.5 * i / 999.0;
        worst = std::max(worst, std::abs(frequency_to_flux(qubit(), flux_to_frequency(qubit(), phi)) - phi));
    }
    EXPECT_LT(worst, 1e-12);
    EXPECT_NEAR(frequency_to_flux(qubit(), flux_to_frequency(qubit(), 0.3)), 0.3, 1e-12);
}

TEST(FrequencyToFlux, Band) {
    EXPECT_EQ(frequency_to_flux(qubit(), max_frequency(qubit())), 0.0);
    EXPECT_THROW(frequency_to_flux(qubit(), max_frequency(qubit()) + 1.0), OutOfRange);
    EXPECT_THROW(frequency_to_flux(qubit(), -0.2e9 - 1.0), OutOfRange);
}

TEST(VoltageToFlux, Linear) {
    EXPECT_EQ(voltage_to_flux(TransmonParams{0.2e9, 15e9, 0.1, -0.05}, 0.0), -0.05);
    EXPECT_NEAR(voltage_to_flux(TransmonParams{0.2e9, 15e9, 0.1, -0.05}, 0.5), 0.0, 1e-15);
}

TEST(SimulateCryoscope, ConstantDetuningHalfTurn) {
    const double baseline = 0.3;
    const double flux = flux_for_detuning(baseline, 10e6);
    const auto sim = simulate_cryoscope_detailed(qubit(), long_coherence(), constant(flux, 200), baseline,
                                                 {0.0, 25e-9, 50e-9}, 0.0, 1);
    EXPECT_NEAR(sim.phase[2], kPi, 1e-6);
    EXPECT_NEAR(sim.trace.p_x[2], 0.0, 1e-9);
    EXPECT_NEAR(sim.trace.p_y[2], 0.5, 1e-6);
    EXPECT_NEAR(sim.trace.p_x[1], 0.5, 1e-6);
    EXPECT_NEAR(sim.trace.p_y[1], 1.0, 1e-9);
}

TEST(SimulateCryoscope, NoExcursionIsPureDecay) {
    const CoherenceParams coh{21.5e-6, 4.9e-6};
    const auto durations = duration_sweep(0.0, 400e-9, 4 * kTs);
    const auto trace = simulate_cryoscope(qubit(), coh, constant(0.1, 1000), 0.1, durations, 0.0, 1);
    for (std::size_t k = 0; k < durations.size(); ++k) {
        EXPECT_NEAR(trace.p_x[k], 0.5 * (1.0 + std::exp(-durations[k] / coh.t2_star)), 1e-12);
        EXPECT_NEAR(trace.p_y[k], 0.5, 1e-12);
    }
}

TEST(SimulateCryoscope, PhaseAdditiveForConstantDetuning) {
    const double baseline = 0.25;
    const double flux = flux_for_detuning(baseline, -37e6);
    const auto durations = duration_sweep(0.0, 300e-9, kTs);
    const auto sim = simulate_cryoscope_detailed(qubit(), long_coherence(), constant(flux, 800), baseline, durations,
                                                 0.0, 1);
    for (std::size_t i : {5u, 40u, 111u}) {
        for (std::size_t j : {1u, 17u, 300u}) {
            if (i + j >= durations.size()) continue;
            const double sum = sim.phase[i] + sim.phase[j];
            EXPECT_NEAR(sim.phase[i + j], sum, 1e-9 * std::abs(sum));
        }
    }
}

TEST(SimulateCryoscope, BlochLengthDependsOnlyOnDecay) {
    const CoherenceParams coh{21.5e-6, 0.2e-6};
    std::vector<double> wave(1200);
    for (std::size_t n = 0; n < wave.size(); ++n) wave[n] = 0.2 + 0.05 * std::exp(-double(n) / 80.0) * std::cos(double(n) / 7.0);
    const auto durations = duration_sweep(0.0, 400e-9, kTs);
    const auto trace = simulate_cryoscope(qubit(), coh, Signal(wave, kRate), 0.2, durations, 0.0, 1);
    for (std::size_t k = 0; k < durations.size(); ++k) {
        const double len2 = std::pow(2 * trace.p_x[k] - 1, 2) + std::pow(2 * trace.p_y[k] - 1, 2);
        EXPECT_NEAR(len2, std::exp(-2.0 * durations[k] / coh.t2_star), 1e-9);
    }
}

TEST(SimulateCryoscope, TrapezoidPhaseOnRamp) {
    // Detuning linear in time integrates exactly under the trapezoid rule.
    const double baseline = 0.2;
    const double f0 = flux_to_frequency(qubit(), baseline);
    std::vector<double> wave(300);
    for (std::size_t n = 0; n < wave.size(); ++n) wave[n] = frequency_to_flux(qubit(), f0 + 1e5 * n);
    const auto durations = duration_sweep(0.0, 100 * kTs, 10 * kTs);
    const auto sim =
        simulate_cryoscope_detailed(qubit(), long_coherence(), Signal(wave, kRate), baseline, durations, 0.0, 1);
    for (std::size_t k = 0; k < durations.size(); ++k) {
        const double n = 10.0 * k;
        EXPECT_NEAR(sim.phase[k], 2 * kPi * 1e5 * 0.5 * n * n * kTs, 1e-9);
    }
}

TEST(SimulateCryoscope, SeededNoiseIsDeterministicAndClamped) {
    const auto durations = duration_sweep(0.0, 200e-9, kTs);
    const Signal wave = constant(flux_for_detuning(0.3, 20e6), 600);
    const auto a = simulate_cryoscope(qubit(), long_coherence(), wave, 0.3, durations, 0.3, 42);
    const auto b = simulate_cryoscope(qubit(), long_coherence(), wave, 0.3, durations, 0.3, 42);
    const auto c = simulate_cryoscope(qubit(), long_coherence(), wave, 0.3, durations, 0.3, 43);
    EXPECT_EQ(a.p_x, b.p_x);
    EXPECT_EQ(a.p_y, b.p_y);
    EXPECT_NE(a.p_x, c.p_x);
    for (std::size_t k = 0; k < durations.size(); ++k) {
        EXPECT_GE(a.p_x[k], 0.0);
        EXPECT_LE(a.p_x[k], 1.0);
        EXPECT_GE(a.p_y[k], 0.0);
        EXPECT_LE(a.p_y[k], 1.0);
    }
}

TEST(SimulateCryoscope, Errors) {
    const Signal wave = constant(0.1, 100);
    EXPECT_THROW(simulate_cryoscope(qubit(), long_coherence(), wave, 0.1, {0.0, 100 * kTs}, 0.0, 1),
                 InvalidArgument);
    EXPECT_THROW(simulate_cryoscope(qubit(), long_coherence(), wave, 0.1, {}, 0.0, 1), InvalidArgument);
    EXPECT_THROW(simulate_cryoscope(qubit(), long_coherence(), wave, 0.1, {0.0, kTs, 3 * kTs}, 0.0, 1),
                 InvalidArgument);
    EXPECT_THROW(simulate_cryoscope(qubit(), long_coherence(), wave, 0.1, {0.0, kTs}, -0.1, 1), InvalidArgument);
}

TEST(DurationSweep, InclusiveStop) {
    const auto d = duration_sweep(0.0, 10e-9, 2.5e-9);
    ASSERT_EQ(d.size(), 5u);
    EXPECT_NEAR(d.back(), 10e-9, 1e-21);
    EXPECT_THROW(duration_sweep(0.0, 1e-9, 0.0), InvalidArgument);
}

TEST(SimulateSpectroscopy, DipAtQubitFrequency) {
    const TransmonParams p{0.2e9, 15e9, 0.6, -0.1};
    const double fq = flux_to_frequency(p, voltage_to_flux(p, 0.25));
    const std::vector<double> probes{fq - 20e6, fq - 10e6, fq, fq + 10e6, fq + 20e6};
    const auto map = simulate_spectroscopy(p, {0.25}, probes, 20e6, 0.5, 0.0, 1);
    const auto& row = map.response[0];
    EXPECT_EQ(std::min_element(row.begin(), row.end()) - row.begin(), 2);
    EXPECT_NEAR(row[2], 0.5, 1e-12);
    // Half depth half a linewidth away, 1/5 depth a full linewidth away.
    EXPECT_NEAR(row[1], 0.75, 1e-12);
    EXPECT_NEAR(row[3], 0.75, 1e-12);
    EXPECT_NEAR(row[0], 0.9, 1e-12);
    EXPECT_NEAR(row[4], 0.9, 1e-12);
}

TEST(SimulateSpectroscopy, ZeroContrastIsFlat) {
    const auto map = simulate_spectroscopy(qubit(), {-0.1, 0.0, 0.1}, {4e9, 4.5e9}, 20e6, 0.0, 0.0, 1);
    for (const auto& row : map.response)
        for (double v : row) EXPECT_EQ(v, 1.0);
}

TEST(SimulateSpectroscopy, SeededNoiseIsDeterministic) {
    const std::vector<double> volts{-0.2, 0.0, 0.2}, probes{4.0e9, 4.2e9, 4.4e9, 4.6e9};
    const auto a = simulate_spectroscopy(qubit(), volts, probes, 20e6, 0.5, 0.01, 9);
    const auto b = simulate_spectroscopy(qubit(), volts, probes, 20e6, 0.5, 0.01, 9);
    const auto c = simulate_spectroscopy(qubit(), volts, probes, 20e6, 0.5, 0.01, 10);
    EXPECT_EQ(a.response, b.response);
    EXPECT_NE(a.response, c.response);
}

TEST(SimulateSpectroscopy, Errors) {
    EXPECT_THROW(simulate_spectroscopy(qubit(), {}, {4e9}, 20e6, 0.5, 0.0, 1), InvalidArgument);
    EXPECT_THROW(simulate_spectroscopy(qubit(), {0.0}, {4e9}, 0.0, 0.5, 0.0, 1), InvalidArgument);
    EXPECT_THROW(simulate_spectroscopy(qubit(), {0.0}, {4e9}, 20e6, 0.5, -1.0, 1), InvalidArgument);
}

TEST(GaussianSource, ReproducibleMoments) {
    GaussianSource a(5), b(5);
    double sum = 0.0, sum2 = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double x = a.next();
        EXPECT_EQ(x, b.next());
        sum += x;
        sum2 += x * x;
    }
    EXPECT_NEAR(sum / n, 0.0, 0.01);
    EXPECT_NEAR(sum2 / n, 1.0, 0.01);
}
