#include <gtest/gtest.h>

#include <random>

#include "spinguard/drive.hpp"
#include "spinguard/spinops.hpp"

using namespace spinguard;

namespace {

// Least-squares amplitude/phase of the omega_- component of a sampled waveform,
// solved against a sin/cos basis at both sidebands.
struct ToneFit {
    double amplitude, theta;
};

ToneFit fit_image_tone(const MixerInput& m, bool use_mixer) {
    const double period = 1.0 / m.f_if_mhz;
    const int n = 4000;
    const double wp = units::two_pi * (m.f_lo_mhz + m.f_if_mhz), wm = units::two_pi * (m.f_lo_mhz - m.f_if_mhz);
    Eigen::MatrixXd a(n, 4);
    Eigen::VectorXd y(n);
    const auto tones = mixer_tones(m);
    for (int i = 0; i < n; ++i) {
        const double t = period * i / n;
        a(i, 0) = std::sin(wp * t + m.phase);
        a(i, 1) = std::cos(wp * t + m.phase);
        a(i, 2) = std::sin(wm * t - m.phase);
        a(i, 3) = std::cos(wm * t - m.phase);
        y(i) = use_mixer ? mixer_rf(m, t) : two_tone_rf(m, tones, t);
    }
    const Eigen::Vector4d c = a.colPivHouseholderQr().solve(y);
    // A_i sin(x - theta) = A_i cos(theta) sin x - A_i sin(theta) cos x
    return {std::hypot(c(2), c(3)), std::atan2(-c(3), c(2))};
}

} // namespace

TEST(MixerTones, AmplitudeImbalanceOnly) {
    MixerInput m;
    m.amplitude_imbalance = 0.1;
    const auto t = mixer_tones(m);
    EXPECT_DOUBLE_EQ(t.drive_amplitude, 1.0);
    EXPECT_DOUBLE_EQ(t.image_amplitude, 0.1);
    EXPECT_DOUBLE_EQ(t.image_phase, 0.0);
}

TEST(MixerTones, PhaseImbalanceMatchesWaveformFit) {
    MixerInput m;
    m.phase_imbalance = 0.01;
    m.f_lo_mhz = 100.0;
    m.f_if_mhz = 10.0;
    const auto t = mixer_tones(m);
    EXPECT_NEAR(t.image_amplitude, std::sin(0.01), 1e-15);
    EXPECT_NEAR(t.image_phase, units::pi / 2, 1e-15);
    const auto fit = fit_image_tone(m, true);
    EXPECT_NEAR(fit.amplitude, t.image_amplitude, 1e-9);
    EXPECT_NEAR(fit.theta, t.image_phase, 1e-7);
}

TEST(MixerTones, BalancedHasNoImage) {
    const auto t = mixer_tones(MixerInput{});
    EXPECT_EQ(t.image_amplitude, 0.0);
    EXPECT_EQ(t.drive_amplitude, 1.0);
}

TEST(MixerTones, GeneralImbalanceMatchesWaveformFit) {
    MixerInput m;
    m.amplitude = 0.8;
    m.amplitude_imbalance = -0.05;
    m.phase = 0.4;
    m.phase_imbalance = 0.07;
    m.f_lo_mhz = 150.0;
    m.f_if_mhz = 10.0;
    const auto t = mixer_tones(m);
    const auto fit = fit_image_tone(m, true);
    EXPECT_NEAR(fit.amplitude, t.image_amplitude, 1e-9);
    EXPECT_NEAR(std::remainder(fit.theta - t.image_phase, units::two_pi), 0.0, 1e-7);
}

TEST(MixerTones, InvalidInputs) {
    MixerInput m;
    m.amplitude_imbalance = 1.5;
    EXPECT_THROW(mixer_tones(m), InvalidArgument);
    m = MixerInput{};
    m.amplitude = 0.0;
    EXPECT_THROW(mixer_tones(m), InvalidArgument);
    m = MixerInput{};
    m.f_if_mhz = 20000.0;
    EXPECT_THROW(mixer_tones(m), InvalidArgument);
}

TEST(MixerTones, RandomReconstructionIdentity) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> ua(0.2, 2.0), ur(-0.9, 0.9), up(-3.0, 3.0), ud(-0.5, 0.5);
    double worst_full = 0.0, worst_leak_ratio = 0.0;
    for (int draw = 0; draw < 10000; ++draw) {
        MixerInput m;
        m.amplitude = ua(rng);
        m.amplitude_imbalance = ur(rng) * m.amplitude;
        m.phase = up(rng);
        m.phase_imbalance = ud(rng);
        m.f_lo_mhz = 9700.0;
        m.f_if_mhz = 10.0;
        const auto tones = mixer_tones(m);
        for (int k = 0; k < 16; ++k) {
            const double t = 0.1 * k / 16.0;
            const double ref = mixer_rf(m, t);
            worst_full = std::max(worst_full, std::abs(two_tone_rf(m, tones, t, true) - ref));
            if (tones.leak_amplitude != 0.0)
                worst_leak_ratio = std::max(worst_leak_ratio, std::abs(two_tone_rf(m, tones, t, false) - ref) /
                                                                  std::abs(tones.leak_amplitude));
        }
    }
    EXPECT_LT(worst_full, 1e-10);
    // without the leak term the residual is bounded by its amplitude
    EXPECT_LE(worst_leak_ratio, 1.0 + 1e-6);
}

TEST(MixerTones, CalibrationRatioInDecibels) {
    EXPECT_NEAR(amplitude_ratio_to_db(default_image_ratio), -18.4, 0.05);
    MixerInput m;
    m.amplitude_imbalance = 0.12;
    const auto t = mixer_tones(m);
    EXPECT_EQ(t.image_amplitude / t.drive_amplitude, m.amplitude_imbalance / m.amplitude);
}

TEST(DriveConfig, ValidationAndWarnings) {
    DriveConfig c{9734, 10, 17.3, 2.0, 0, 0};
    EXPECT_NO_THROW(c.validate());
    EXPECT_TRUE(c.warnings().empty());
    c.h_i_mhz = 10.0;
    EXPECT_EQ(c.warnings().size(), 1u);
    c.h_d_mhz = -1;
    EXPECT_THROW(c.validate(), InvalidArgument);
}

TEST(LabHamiltonian, FreeAndInitialLimits) {
    const DriveConfig off{9734, 10, 0, 0, 0.3, 0};
    const Matrix2 fz = 9734.0 * pauli::sz();
    EXPECT_LT((lab_hamiltonian(off, 0.0123) - fz).cwiseAbs().maxCoeff(), 1e-12);
    const DriveConfig on{9734, 10, 17, 2, 0, 0};
    EXPECT_LT((lab_hamiltonian(on, 0.0) - fz).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(LabHamiltonian, ImageTermSeparates) {
    const DriveConfig cfg{9734, 10, 17, 2, 0.4, 0.2};
    for (double t : {0.0, 0.0137, 0.5, 3.21}) {
        const double wm = units::two_pi * (cfg.f0_mhz - cfg.delta_mhz);
        const Matrix2 image = 2.0 * cfg.h_i_mhz * std::sin(wm * t - cfg.phi_rad - cfg.theta_rad) * pauli::sx();
        EXPECT_LT((lab_hamiltonian(cfg, t) - image - lab_hamiltonian(cfg.without_image(), t)).cwiseAbs().maxCoeff(),
                  1e-12);
    }
}

TEST(RotatingHamiltonian, StaticLimit) {
    const DriveConfig cfg{9734, 10, 17, 0, 0, 0};
    const Matrix2 expect = -10.0 * pauli::sz() - 17.0 * pauli::sy();
    EXPECT_LT((rotating_hamiltonian(cfg, 1.234) - expect).cwiseAbs().maxCoeff(), 1e-14);
    const auto eig = hermitian_eig(rotating_hamiltonian(cfg, 0.0));
    EXPECT_NEAR(eig.values(1) - eig.values(0), std::hypot(10.0, 17.0), 1e-12);
}

TEST(RotatingHamiltonian, ZeroDetuningIsStatic) {
    const DriveConfig cfg{9734, 0, 17, 3, 0.3, 0.1};
    EXPECT_LT((rotating_hamiltonian(cfg, 0.0) - rotating_hamiltonian(cfg, 0.77)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(RotatingHamiltonian, HermitianAndPhasePeriodic) {
    DriveConfig cfg{9734, 10, 17, 3, 0.3, 0.1};
    DriveConfig shifted = cfg;
    shifted.phi_rad += units::two_pi;
    for (double t = 0.0; t < 1.0; t += 0.0371) {
        const Matrix2 h = rotating_hamiltonian(cfg, t);
        EXPECT_LT((h - h.adjoint()).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT((h - rotating_hamiltonian(shifted, t)).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(RotatingHamiltonian, MatchesAveragedLabFrame) {
    // U = exp(i w+ t Sz) H_lab U^dagger - f+ Sz, averaged over one carrier period
    const DriveConfig cfg{9734, 9.734, 9.734 * std::sqrt(3.0), 0.12 * 9.734 * std::sqrt(3.0), 0.6, 0.2};
    const double fp = cfg.f0_mhz + cfg.delta_mhz;
    const double period = 1.0 / fp;
    for (double t0 : {0.0, 0.013, 0.051}) {
        Matrix2 avg = Matrix2::Zero();
        const int n = 400;
        for (int k = 0; k < n; ++k) {
            const double t = t0 + period * (k + 0.5) / n;
            Matrix2 u = Matrix2::Zero();
            u(0, 0) = std::polar(1.0, units::pi * fp * t);
            u(1, 1) = std::polar(1.0, -units::pi * fp * t);
            avg += u * lab_hamiltonian(cfg, t) * u.adjoint() - fp * pauli::sz();
        }
        avg /= n;
        const Matrix2 ref = rotating_hamiltonian(cfg, t0 + 0.5 * period);
        EXPECT_LT((avg - ref).cwiseAbs().maxCoeff(), 1e-3 * cfg.h_d_mhz) << t0;
    }
}
