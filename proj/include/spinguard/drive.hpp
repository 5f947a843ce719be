#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "spinguard/errors.hpp"
#include "spinguard/units.hpp"

namespace spinguard {

using Matrix2 = Eigen::Matrix2cd;

/// Spin-1/2 operators in the m = +1/2, -1/2 basis.
namespace pauli {
inline Matrix2 sx() {
    Matrix2 m;
    m << 0.0, 0.5, 0.5, 0.0;
    return m;
}
inline Matrix2 sy() {
    Matrix2 m;
    m << 0.0, std::complex<double>(0.0, -0.5), std::complex<double>(0.0, 0.5), 0.0;
    return m;
}
inline Matrix2 sz() {
    Matrix2 m;
    m << 0.5, 0.0, 0.0, -0.5;
    return m;
}
/// b . S for a real field vector b (MHz).
inline Matrix2 field_operator(const Eigen::Vector3d& b) {
    Matrix2 m;
    m << 0.5 * b.z(), std::complex<double>(0.5 * b.x(), -0.5 * b.y()), std::complex<double>(0.5 * b.x(), 0.5 * b.y()),
        -0.5 * b.z();
    return m;
}
} // namespace pauli

// ---------------------------------------------------------------------------
// Hartley mixer

struct MixerInput {
    double amplitude = 1.0;            ///< A = (A1 + A2)/2
    double amplitude_imbalance = 0.0;  ///< dA = (A1 - A2)/2
    double phase = 0.0;                ///< phi = (phi1 + phi2)/2, rad
    double phase_imbalance = 0.0;      ///< dphi = (phi1 - phi2)/2, rad
    double f_lo_mhz = 9700.0;
    double f_if_mhz = 10.0;

    void validate() const {
        if (!(amplitude > 0.0)) throw InvalidArgument("mixer: amplitude A must be positive");
        if (!(std::abs(amplitude_imbalance) < amplitude))
            throw InvalidArgument("mixer: |dA| must be smaller than A");
        if (!(f_if_mhz >= 0.0 && f_lo_mhz > f_if_mhz))
            throw InvalidArgument("mixer: need f_LO > f_IF >= 0");
    }
};

struct MixerTones {
    double drive_amplitude = 0.0;  ///< A_d
    double image_amplitude = 0.0;  ///< A_i
    double image_phase = 0.0;      ///< theta, rad
    /// Amplitude of the quadrature leak at omega_+ (dA sin dphi), dropped from DriveConfig.
    double leak_amplitude = 0.0;
};

/// Splits the mixer output into drive and image tones. The image amplitude and
/// phase come from A_i cos(theta) = dA cos(dphi), A_i sin(theta) = A sin(dphi),
/// which stays finite where cos(theta) = 0.
inline MixerTones mixer_tones(const MixerInput& m) {
    m.validate();
    MixerTones tones;
    tones.drive_amplitude = m.amplitude * std::cos(m.phase_imbalance);
    const double in_phase = m.amplitude_imbalance * std::cos(m.phase_imbalance);
    const double quadrature = m.amplitude * std::sin(m.phase_imbalance);
    tones.image_amplitude = std::hypot(quadrature, in_phase);
    tones.image_phase = (tones.image_amplitude == 0.0) ? 0.0 : std::atan2(quadrature, in_phase);
    tones.leak_amplitude = m.amplitude_imbalance * std::sin(m.phase_imbalance);
    return tones;
}

/// RF1 + RF2 built branch by branch from the unbalanced IF ports.
inline double mixer_rf(const MixerInput& m, double t_us) {
    const double a1 = m.amplitude + m.amplitude_imbalance;
    const double a2 = m.amplitude - m.amplitude_imbalance;
    const double phi1 = m.phase + m.phase_imbalance;
    const double phi2 = m.phase - m.phase_imbalance;
    const double w_plus = units::two_pi * (m.f_lo_mhz + m.f_if_mhz);
    const double w_minus = units::two_pi * (m.f_lo_mhz - m.f_if_mhz);
    const double rf1 = 0.5 * a1 * (std::sin(w_plus * t_us + phi1) + std::sin(w_minus * t_us - phi1));
    const double rf2 = 0.5 * a2 * (std::sin(w_plus * t_us + phi2) - std::sin(w_minus * t_us - phi2));
    return rf1 + rf2;
}

/// Drive tone plus image tone (and, optionally, the small omega_+ quadrature leak).
inline double two_tone_rf(const MixerInput& m, const MixerTones& tones, double t_us, bool include_leak = true) {
    const double w_plus = units::two_pi * (m.f_lo_mhz + m.f_if_mhz);
    const double w_minus = units::two_pi * (m.f_lo_mhz - m.f_if_mhz);
    double rf = tones.drive_amplitude * std::sin(w_plus * t_us + m.phase) +
                tones.image_amplitude * std::sin(w_minus * t_us - m.phase - tones.image_phase);
    if (include_leak) rf += tones.leak_amplitude * std::cos(w_plus * t_us + m.phase);
    return rf;
}

/// Power of the image relative to the drive, in dB, for an amplitude ratio.
inline double amplitude_ratio_to_db(double ratio) { return 20.0 * std::log10(ratio); }

// ---------------------------------------------------------------------------

/// Default image-to-drive amplitude ratio from spectrum-analyser calibration (about -18 dB).
inline constexpr double default_image_ratio = 0.12;

/// Two-tone excitation: drive at f0 + delta, image at f0 - delta.
struct DriveConfig {
    double f0_mhz = 0.0;
    double delta_mhz = 0.0;
    double h_d_mhz = 0.0;
    double h_i_mhz = 0.0;
    double phi_rad = 0.0;
    double theta_rad = 0.0;

    void validate() const {
        for (double v : {f0_mhz, delta_mhz, h_d_mhz, h_i_mhz, phi_rad, theta_rad})
            if (!std::isfinite(v)) throw InvalidArgument("drive: all fields must be finite");
        if (h_d_mhz < 0.0) throw InvalidArgument("drive: h_d must be >= 0");
        if (h_i_mhz < 0.0) throw InvalidArgument("drive: h_i must be >= 0");
    }

    std::vector<std::string> warnings() const {
        std::vector<std::string> out;
        if (h_i_mhz > 0.5 * h_d_mhz)
            out.push_back("image amplitude h_i exceeds h_d/2; the image is no longer a weak perturbation");
        return out;
    }

    /// Same configuration with both field amplitudes multiplied by `factor`.
    DriveConfig scaled(double factor) const {
        DriveConfig out = *this;
        out.h_d_mhz *= factor;
        out.h_i_mhz *= factor;
        return out;
    }

    DriveConfig without_image() const {
        DriveConfig out = *this;
        out.h_i_mhz = 0.0;
        return out;
    }
};

/// Lab-frame Hamiltonian (MHz) for a spin 1/2:
/// f0 Sz + 2 h_d Sx sin(w+ t + phi) + 2 h_i Sx sin(w- t - phi - theta).
inline Matrix2 lab_hamiltonian(const DriveConfig& cfg, double t_us) {
    const double w_plus = units::two_pi * (cfg.f0_mhz + cfg.delta_mhz);
    const double w_minus = units::two_pi * (cfg.f0_mhz - cfg.delta_mhz);
    const double bx = 2.0 * cfg.h_d_mhz * std::sin(w_plus * t_us + cfg.phi_rad) +
                      2.0 * cfg.h_i_mhz * std::sin(w_minus * t_us - cfg.phi_rad - cfg.theta_rad);
    return pauli::field_operator({bx, 0.0, cfg.f0_mhz});
}

/// Static part of the rotating-frame field: h_d (sin phi, -cos phi) in-plane and -delta along z.
inline Eigen::Vector3d drive_field(const DriveConfig& cfg) {
    return {cfg.h_d_mhz * std::sin(cfg.phi_rad), -cfg.h_d_mhz * std::cos(cfg.phi_rad), -cfg.delta_mhz};
}

/// Image field in the frame rotating at w+, turning at 2 delta.
inline Eigen::Vector3d image_field(const DriveConfig& cfg, double t_us) {
    const double arg = 2.0 * units::two_pi * cfg.delta_mhz * t_us + cfg.phi_rad + cfg.theta_rad;
    return {-cfg.h_i_mhz * std::sin(arg), -cfg.h_i_mhz * std::cos(arg), 0.0};
}

/// Total rotating-frame field b(t) with H_RF = b . S.
inline Eigen::Vector3d rotating_field(const DriveConfig& cfg, double t_us) {
    return drive_field(cfg) + image_field(cfg, t_us);
}

/// H_RF = -delta Sz + h_d (Sx sin phi - Sy cos phi)
///        - h_i [Sx sin(4 pi delta t + phi + theta) + Sy cos(4 pi delta t + phi + theta)].
inline Matrix2 rotating_hamiltonian(const DriveConfig& cfg, double t_us) {
    return pauli::field_operator(rotating_field(cfg, t_us));
}

} // namespace spinguard
