#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "spinguard/drive.hpp"
#include "spinguard/dynamics.hpp"
#include "spinguard/errors.hpp"
#include "spinguard/hamiltonians.hpp"
#include "spinguard/units.hpp"

namespace spinguard {

enum class PulseAxis { X, Y, MinusX, MinusY };

inline Eigen::Vector3d pulse_axis_vector(PulseAxis a) {
    switch (a) {
    case PulseAxis::X: return {1, 0, 0};
    case PulseAxis::Y: return {0, 1, 0};
    case PulseAxis::MinusX: return {-1, 0, 0};
    case PulseAxis::MinusY: return {0, -1, 0};
    }
    return {1, 0, 0};
}

namespace seg {
struct Prepare {
    Axis axis = Axis::PlusZ;  ///< +X, +Y or +Z
};
struct Burst {
    double duration_us = 0.0;
    bool image_on = true;
};
struct Wait {
    double duration_us = 0.0;
};
struct HardPulse {
    double angle_rad = units::pi;
    PulseAxis axis = PulseAxis::X;
};
struct AcquireEcho {
    double tau_free_us = 0.0;
};
struct AcquireFid {};
} // namespace seg

using PulseSegment = std::variant<seg::Prepare, seg::Burst, seg::Wait, seg::HardPulse, seg::AcquireEcho, seg::AcquireFid>;

enum class PulseMode { Ideal, Finite };

struct SequenceOptions {
    PulseMode pulse_mode = PulseMode::Ideal;
    double pi_half_us = 0.014;  ///< finite mode: rectangular pi/2 length
    double pi_us = 0.028;       ///< finite mode: rectangular pi length
    int ensemble_nodes = 64;
    double sample_step_us = 0.0;  ///< 0 = default sampling rule
    IntegratorOptions integrator;
};

struct SequenceResult {
    double signal = 0.0;
    TimeSeries trace;  ///< last burst window
    DensityState final_state;
    std::vector<std::string> warnings;
};

// ---------------------------------------------------------------------------
// ensemble helpers

struct Quadrature {
    std::vector<double> nodes, weights;
};

/// Gauss-Hermite rule for a standard normal variable (Golub-Welsch), weights summing to 1.
inline Quadrature gauss_hermite(int n) {
    if (n < 1) throw InvalidArgument("quadrature needs at least one node");
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) j(k, k - 1) = j(k - 1, k) = std::sqrt(static_cast<double>(k));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(j);
    Quadrature q;
    for (int k = 0; k < n; ++k) {
        q.nodes.push_back(es.eigenvalues()(k));
        q.weights.push_back(es.eigenvectors()(0, k) * es.eigenvectors()(0, k));
    }
    return q;
}

/// Gaussian sigma (MHz) for a half width at half maximum.
inline double sigma_from_hwhm(double hwhm) { return hwhm / std::sqrt(2.0 * std::log(2.0)); }

/// Free evolution of a Bloch vector for `t` at offset `detuning`, with T1/T2 relaxation.
inline Eigen::Vector3d free_evolution(const Eigen::Vector3d& s, double detuning_mhz, double t_us, double t1_us,
                                      double t2_us) {
    const double a = units::two_pi * detuning_mhz * t_us;
    const double c = std::cos(a), sn = std::sin(a);
    // dS/dt = 2 pi (0, 0, delta) x S: right-handed precession about +z
    Eigen::Vector3d out(c * s.x() - sn * s.y(), sn * s.x() + c * s.y(), s.z());
    const double e2 = std::isfinite(t2_us) ? std::exp(-t_us / t2_us) : 1.0;
    const double e1 = std::isfinite(t1_us) ? std::exp(-t_us / t1_us) : 1.0;
    out.x() *= e2;
    out.y() *= e2;
    out.z() = 0.5 + (out.z() - 0.5) * e1;
    return out;
}

/// Rotation about axis n by angle (Rodrigues), for Bloch vectors.
inline Eigen::Vector3d rotate_vector(const Eigen::Vector3d& s, const Eigen::Vector3d& n, double angle) {
    return Eigen::AngleAxisd(angle, n.normalized()) * s;
}

/// Hard pulse seen by an off-resonant ensemble member; ideal pulses ignore the offset.
inline Eigen::Vector3d apply_pulse(const Eigen::Vector3d& s, const Eigen::Vector3d& axis, double angle,
                                   double detuning_mhz, const SequenceOptions& opt) {
    if (opt.pulse_mode == PulseMode::Ideal || angle == 0.0) return rotate_vector(s, axis, angle);
    const double length = std::abs(angle - units::pi / 2) < 1e-12 ? opt.pi_half_us : opt.pi_us * angle / units::pi;
    const double h1 = angle / (units::two_pi * length);
    const Eigen::Vector3d field = h1 * axis.normalized() + Eigen::Vector3d(0, 0, detuning_mhz);
    return rotate_vector(s, field, units::two_pi * field.norm() * length);
}

namespace detail {

inline Eigen::Vector3d readout_vector(Axis a) {
    switch (a) {
    case Axis::PlusX:
    case Axis::MinusX: return {1, 0, 0};
    case Axis::PlusY:
    case Axis::MinusY: return {0, 1, 0};
    default: return {0, 0, 1};
    }
}

// Ensemble echo: Z readout is pi/2_x - tau - pi_x - tau; X/Y readout is tau - pi_axis - tau.
inline Eigen::Vector3d echo_vector(const Eigen::Vector3d& s0, Axis readout, double tau, const Environment& env,
                                   const Quadrature& q, double sigma, const SequenceOptions& opt) {
    const Eigen::Vector3d r = readout_vector(readout);
    const bool z_type = r.z() != 0.0;
    const Eigen::Vector3d pi_axis = z_type ? Eigen::Vector3d::UnitX() : r;
    const double t2 = env.effective_t2();
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    for (std::size_t k = 0; k < q.nodes.size(); ++k) {
        const double d = sigma * q.nodes[k];
        Eigen::Vector3d s = s0;
        if (z_type) s = apply_pulse(s, Eigen::Vector3d::UnitX(), units::pi / 2, d, opt);
        s = free_evolution(s, d, tau, env.t1_us, t2);
        s = apply_pulse(s, pi_axis, units::pi, d, opt);
        s = free_evolution(s, d, tau, env.t1_us, t2);
        sum += q.weights[k] * Eigen::Vector3d(s.x(), s.y(), 0.0);
    }
    return sum;
}

inline Eigen::Vector3d fid_vector(const Eigen::Vector3d& s0, Axis readout, const Quadrature& q, double sigma,
                                  const SequenceOptions& opt) {
    const bool z_type = readout_vector(readout).z() != 0.0;
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    for (std::size_t k = 0; k < q.nodes.size(); ++k) {
        Eigen::Vector3d s = s0;
        if (z_type) s = apply_pulse(s, Eigen::Vector3d::UnitX(), units::pi / 2, sigma * q.nodes[k], opt);
        sum += q.weights[k] * Eigen::Vector3d(s.x(), s.y(), 0.0);
    }
    return sum;
}

inline double project(const Eigen::Vector3d& v, const Eigen::Vector3d& ref) {
    const double n = ref.squaredNorm();
    if (!(n > 0.0)) throw SequenceError("readout reference vanished; echo delay too long for T2");
    return v.dot(ref) / n;
}

inline void check_duration(double d, const char* what) {
    if (!(d >= 0.0) || !std::isfinite(d)) throw InvalidArgument(std::string(what) + " duration must be >= 0");
}

} // namespace detail

/// Runs a pulse sequence. Prepare starts from the thermal ground state +Z; +X is reached with
/// an ideal pi/2 about y and +Y with pi/2 about -x. The readout axis follows the preparation.
/// Each burst starts its own clock at t = 0 and uses h_d, h_i scaled by tls.drive_scale.
/// The signal is normalised so that a fully polarised state along the readout axis gives 1.
inline SequenceResult run_sequence(const std::vector<PulseSegment>& segments, const DriveConfig& cfg,
                                   const Environment& env, const EffectiveTLS& tls,
                                   const SequenceOptions& opt = {}) {
    cfg.validate();
    env.validate();
    if (!(tls.drive_scale > 0.0)) throw InvalidArgument("drive_scale must be > 0");

    // structure check first, so nothing runs on a malformed list
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const bool acquire = std::holds_alternative<seg::AcquireEcho>(segments[i]) ||
                             std::holds_alternative<seg::AcquireFid>(segments[i]);
        if (acquire && i + 1 != segments.size()) throw SequenceError("acquire must be the last segment");
        if (const auto* b = std::get_if<seg::Burst>(&segments[i])) detail::check_duration(b->duration_us, "burst");
        if (const auto* w = std::get_if<seg::Wait>(&segments[i])) detail::check_duration(w->duration_us, "wait");
        if (const auto* e = std::get_if<seg::AcquireEcho>(&segments[i]))
            detail::check_duration(e->tau_free_us, "tau_free");
        if (const auto* p = std::get_if<seg::Prepare>(&segments[i]);
            p && !(p->axis == Axis::PlusX || p->axis == Axis::PlusY || p->axis == Axis::PlusZ))
            throw SequenceError("prepare axis must be +X, +Y or +Z");
    }

    SequenceResult res;
    DensityState state = DensityState::ground();
    Axis readout = Axis::PlusZ;
    const double t2 = env.effective_t2();
    const DriveConfig scaled = cfg.scaled(tls.drive_scale);
    for (const auto& w : scaled.warnings()) res.warnings.push_back(w);

    const Quadrature q = gauss_hermite(opt.ensemble_nodes);
    const double sigma = sigma_from_hwhm(tls.half_linewidth_mhz);
    bool acquired = false;

    for (const auto& segment : segments) {
        std::visit(
            [&](const auto& s) {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, seg::Prepare>) {
                    state = DensityState::ground();
                    if (s.axis == Axis::PlusX) state = rotate(state, Eigen::Vector3d::UnitY(), units::pi / 2);
                    if (s.axis == Axis::PlusY) state = rotate(state, -Eigen::Vector3d::UnitX(), units::pi / 2);
                    readout = s.axis;
                } else if constexpr (std::is_same_v<T, seg::Burst>) {
                    const DriveConfig drive = s.image_on ? scaled : scaled.without_image();
                    const auto grid = opt.sample_step_us > 0.0
                                          ? uniform_grid(s.duration_us, static_cast<std::size_t>(std::ceil(
                                                                            s.duration_us / opt.sample_step_us - 1e-9)) +
                                                                            1)
                                          : default_grid(drive, s.duration_us);
                    auto r = evolve(drive, env, state, grid, opt.integrator);
                    res.trace = std::move(r.series);
                    state = r.final_state;
                } else if constexpr (std::is_same_v<T, seg::Wait>) {
                    if (std::isfinite(t2) && s.duration_us < 3.0 * t2)
                        res.warnings.push_back("wait of " + std::to_string(s.duration_us) +
                                               " us is shorter than 3*T2; transverse coherence survives");
                    state = DensityState::from_spin(
                        free_evolution(state.spin(), 0.0, s.duration_us, env.t1_us, t2));
                } else if constexpr (std::is_same_v<T, seg::HardPulse>) {
                    state = rotate(state, pulse_axis_vector(s.axis), s.angle_rad);
                } else if constexpr (std::is_same_v<T, seg::AcquireEcho>) {
                    const Eigen::Vector3d r = detail::readout_vector(readout);
                    const Eigen::Vector3d ref = detail::echo_vector(0.5 * r, readout, s.tau_free_us, env, q, sigma, opt);
                    res.signal = detail::project(detail::echo_vector(state.spin(), readout, s.tau_free_us, env, q,
                                                                     sigma, opt),
                                                 ref);
                    acquired = true;
                } else if constexpr (std::is_same_v<T, seg::AcquireFid>) {
                    const Eigen::Vector3d r = detail::readout_vector(readout);
                    const Eigen::Vector3d ref = detail::fid_vector(0.5 * r, readout, q, sigma, opt);
                    res.signal = detail::project(detail::fid_vector(state.spin(), readout, q, sigma, opt), ref);
                    acquired = true;
                }
            },
            segment);
    }
    // no acquire segment: ideal projective readout along the readout axis
    if (!acquired) res.signal = 2.0 * state.spin().dot(detail::readout_vector(readout));
    res.final_state = state;
    return res;
}

// ---------------------------------------------------------------------------
// calibration sequences

/// Hahn echo amplitudes (pi/2 - tau - pi - tau) with ideal pulses, keyed by 2 tau.
inline std::vector<std::pair<double, double>> hahn_echo_decay(const Environment& env, const std::vector<double>& taus) {
    env.validate();
    std::vector<std::pair<double, double>> out;
    const double t2 = env.effective_t2();
    for (double tau : taus) {
        detail::check_duration(tau, "tau");
        Eigen::Vector3d s(0, 0, 0.5);
        s = rotate_vector(s, Eigen::Vector3d::UnitX(), units::pi / 2);
        s = free_evolution(s, 0.0, tau, env.t1_us, t2);
        s = rotate_vector(s, Eigen::Vector3d::UnitX(), units::pi);
        s = free_evolution(s, 0.0, tau, env.t1_us, t2);
        out.emplace_back(2.0 * tau, 2.0 * std::hypot(s.x(), s.y()));
    }
    return out;
}

enum class CpmgPattern { YAlternating, XYAlternating };

/// CPMG train: pi/2_x, then n pi pulses spaced 2 tau, over a Gaussian detuning ensemble of the
/// given full width at half maximum. Returns the ensemble <S> at each echo peak (t = 2 k tau).
inline TimeSeries cpmg(const Environment& env, int n_pulses, double tau_us, double linewidth_fwhm_mhz,
                       CpmgPattern pattern = CpmgPattern::YAlternating, const SequenceOptions& opt = {}) {
    env.validate();
    if (n_pulses < 1) throw InvalidArgument("cpmg: n_pulses must be >= 1");
    if (!(tau_us > 0.0)) throw InvalidArgument("cpmg: tau must be > 0");
    if (!(linewidth_fwhm_mhz >= 0.0)) throw InvalidArgument("cpmg: linewidth must be >= 0");
    const double sigma = linewidth_fwhm_mhz / (2.0 * std::sqrt(2.0 * std::log(2.0)));
    const Quadrature q = gauss_hermite(opt.ensemble_nodes);
    const double t2 = env.effective_t2();

    static const PulseAxis y_train[] = {PulseAxis::Y, PulseAxis::MinusY};
    static const PulseAxis xy_train[] = {PulseAxis::X, PulseAxis::Y, PulseAxis::MinusX, PulseAxis::MinusY};

    std::vector<Eigen::Vector3d> spins(q.nodes.size());
    for (std::size_t k = 0; k < q.nodes.size(); ++k)
        spins[k] = apply_pulse({0, 0, 0.5}, Eigen::Vector3d::UnitX(), units::pi / 2, sigma * q.nodes[k], opt);

    TimeSeries out;
    for (int p = 0; p < n_pulses; ++p) {
        const PulseAxis axis = pattern == CpmgPattern::YAlternating ? y_train[p % 2] : xy_train[p % 4];
        Eigen::Vector3d avg = Eigen::Vector3d::Zero();
        for (std::size_t k = 0; k < q.nodes.size(); ++k) {
            const double d = sigma * q.nodes[k];
            Eigen::Vector3d s = free_evolution(spins[k], d, tau_us, env.t1_us, t2);
            s = apply_pulse(s, pulse_axis_vector(axis), units::pi, d, opt);
            s = free_evolution(s, d, tau_us, env.t1_us, t2);
            spins[k] = s;
            avg += q.weights[k] * s;
        }
        out.push(2.0 * tau_us * (p + 1), avg);
    }
    return out;
}

/// Echo amplitudes of a CPMG trace, normalised to full polarisation.
inline std::vector<double> echo_amplitudes(const TimeSeries& ts) {
    std::vector<double> a;
    for (std::size_t i = 0; i < ts.size(); ++i) a.push_back(2.0 * std::hypot(ts.sx[i], ts.sy[i]));
    return a;
}

/// Inversion recovery: ideal pi pulse, free relaxation for each delay, <Sz> read out.
inline std::vector<std::pair<double, double>> inversion_recovery(const Environment& env,
                                                                 const std::vector<double>& delays) {
    env.validate();
    std::vector<std::pair<double, double>> out;
    for (double d : delays) {
        detail::check_duration(d, "delay");
        Eigen::Vector3d s = rotate_vector({0, 0, 0.5}, Eigen::Vector3d::UnitX(), units::pi);
        s = free_evolution(s, 0.0, d, env.t1_us, env.effective_t2());
        out.emplace_back(d, s.z());
    }
    return out;
}

} // namespace spinguard
