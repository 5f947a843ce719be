#pragma once

#include <Eigen/Dense>
#include <boost/numeric/odeint.hpp>

#include <array>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "spinguard/drive.hpp"
#include "spinguard/errors.hpp"
#include "spinguard/units.hpp"

namespace spinguard {

enum class Axis { PlusX, PlusY, PlusZ, MinusX, MinusY, MinusZ };

inline Eigen::Vector3d axis_vector(Axis a) {
    switch (a) {
    case Axis::PlusX: return {1, 0, 0};
    case Axis::PlusY: return {0, 1, 0};
    case Axis::PlusZ: return {0, 0, 1};
    case Axis::MinusX: return {-1, 0, 0};
    case Axis::MinusY: return {0, -1, 0};
    case Axis::MinusZ: return {0, 0, -1};
    }
    return {0, 0, 1};
}

/// Two-level density matrix, basis (m = +1/2, m = -1/2).
struct DensityState {
    Matrix2 rho = Matrix2::Zero();

    /// From <S> in spin-1/2 units: rho = 1/2 + 2 <S>.S
    static DensityState from_spin(const Eigen::Vector3d& s) {
        DensityState d;
        d.rho = 0.5 * Matrix2::Identity() + pauli::field_operator(2.0 * s);
        return d;
    }
    static DensityState pure(Axis a) { return from_spin(0.5 * axis_vector(a)); }
    static DensityState ground() { return pure(Axis::PlusZ); }

    /// <Sx>, <Sy>, <Sz>, each in [-1/2, 1/2].
    Eigen::Vector3d spin() const {
        return {std::real(rho(0, 1)), -std::imag(rho(0, 1)), 0.5 * std::real(rho(0, 0) - rho(1, 1))};
    }
    double purity() const { return std::real((rho * rho).trace()); }
    double trace_error() const { return std::abs(rho.trace() - 1.0); }
    double min_eigenvalue() const {
        Eigen::SelfAdjointEigenSolver<Matrix2> es(0.5 * (rho + rho.adjoint()));
        return es.eigenvalues()(0);
    }

    void validate(double tol = 1e-8) const {
        if (trace_error() > tol) throw InvalidArgument("density matrix trace deviates from 1");
        if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > 1e-10) throw InvalidArgument("density matrix not Hermitian");
        if (min_eigenvalue() < -tol) throw InvalidArgument("density matrix not positive");
    }
};

enum class DissipationModel { LindbladT2Eq2T1, BlochIndependent };

struct Environment {
    double t1_us = units::infinity;
    double t2_us = units::infinity;
    DissipationModel model = DissipationModel::BlochIndependent;

    /// T2 actually used: tied to 2 T1 for the Lindblad model.
    double effective_t2() const { return model == DissipationModel::LindbladT2Eq2T1 ? 2.0 * t1_us : t2_us; }

    void validate() const {
        if (!(t1_us > 0.0)) throw ValidationError("T1", "T1 must be positive (infinity allowed)");
        if (!(t2_us > 0.0)) throw ValidationError("T2", "T2 must be positive (infinity allowed)");
        if (std::isfinite(t1_us) && t2_us > 2.0 * t1_us * (1.0 + 1e-12))
            throw ValidationError("T2", "T2 must not exceed 2*T1");
    }

    static Environment lindblad(double t1) { return {t1, 2.0 * t1, DissipationModel::LindbladT2Eq2T1}; }
    static Environment bloch(double t1, double t2) { return {t1, t2, DissipationModel::BlochIndependent}; }
    static Environment closed() { return {units::infinity, units::infinity, DissipationModel::BlochIndependent}; }
};

struct TimeSeries {
    std::vector<double> t, sx, sy, sz;

    std::size_t size() const { return t.size(); }
    void push(double time, const Eigen::Vector3d& s) {
        t.push_back(time);
        sx.push_back(s.x());
        sy.push_back(s.y());
        sz.push_back(s.z());
    }
    Eigen::Vector3d at(std::size_t i) const { return {sx[i], sy[i], sz[i]}; }
    const std::vector<double>& component(char c) const {
        switch (c) {
        case 'x': return sx;
        case 'y': return sy;
        case 'z': return sz;
        }
        throw InvalidArgument(std::string("unknown component '") + c + "'");
    }
    double step() const { return t.size() > 1 ? t[1] - t[0] : 0.0; }

    void validate_uniform(double rel_tol = 1e-9) const {
        if (t.size() < 2) return;
        const double dt = step();
        if (!(dt > 0.0)) throw InvalidArgument("time grid must be strictly increasing");
        for (std::size_t i = 1; i < t.size(); ++i)
            if (std::abs((t[i] - t[i - 1]) - dt) > rel_tol * std::max(1.0, std::abs(t[i])) + 1e-12 * dt * i)
                throw InvalidArgument("time grid is not uniform");
    }
};

/// Uniform grid 0..duration with n samples.
inline std::vector<double> uniform_grid(double duration_us, std::size_t n) {
    if (!(duration_us >= 0.0)) throw InvalidArgument("duration must be >= 0");
    if (n < 2) return {0.0};
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = duration_us * static_cast<double>(i) / static_cast<double>(n - 1);
    return g;
}

/// Grid step honouring >= 40 samples per Rabi period and >= 20 per image beat 1/(2 delta).
inline double default_sample_step(const DriveConfig& cfg) {
    const double f_r = std::hypot(cfg.delta_mhz, cfg.h_d_mhz);
    double dt = 0.01;
    if (f_r > 0.0) dt = std::min(dt, 1.0 / (40.0 * f_r));
    if (cfg.delta_mhz != 0.0 && cfg.h_i_mhz > 0.0) dt = std::min(dt, 1.0 / (20.0 * 2.0 * std::abs(cfg.delta_mhz)));
    return dt;
}

inline std::vector<double> default_grid(const DriveConfig& cfg, double duration_us) {
    const double dt = default_sample_step(cfg);
    const auto n = static_cast<std::size_t>(std::ceil(duration_us / dt - 1e-9)) + 1;
    return uniform_grid(duration_us, std::max<std::size_t>(n, 2));
}

// ---------------------------------------------------------------------------

inline DensityState propagate_unitary(const Matrix2& h, const DensityState& state, double t_us) {
    Eigen::SelfAdjointEigenSolver<Matrix2> es(0.5 * (h + h.adjoint()));
    Eigen::Vector2cd ph;
    for (int i = 0; i < 2; ++i) ph(i) = std::polar(1.0, -units::two_pi * es.eigenvalues()(i) * t_us);
    const Matrix2 u = es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
    DensityState out;
    out.rho = u * state.rho * u.adjoint();
    return out;
}

/// Rotation of the spin by `angle` about unit vector n (right-handed), as a unitary.
inline Matrix2 rotation_unitary(const Eigen::Vector3d& n, double angle) {
    // exp(-i angle n.S) = cos(angle/2) - 2i sin(angle/2) n.S
    return std::cos(0.5 * angle) * Matrix2::Identity() -
           std::complex<double>(0.0, 2.0 * std::sin(0.5 * angle)) * pauli::field_operator(n.normalized());
}

inline DensityState rotate(const DensityState& s, const Eigen::Vector3d& n, double angle) {
    const Matrix2 u = rotation_unitary(n, angle);
    DensityState out;
    out.rho = u * s.rho * u.adjoint();
    return out;
}

// Tighter than 1e-9/1e-12: purity must hold to 1e-8 over 15 us of closed evolution.
struct IntegratorOptions {
    double abs_tol = 1e-14;
    double rel_tol = 1e-11;
    int max_steps_between_samples = 200000;
};

/// Matrix carrying -Z to +Z; relaxation drives the state to the ground state +Z.
inline Matrix2 relaxation_operator() {
    Matrix2 l = Matrix2::Zero();
    l(0, 1) = 1.0;
    return l;
}

namespace detail {

using State8 = std::array<double, 8>;
using State3 = std::array<double, 3>;

inline Matrix2 unpack(const State8& x) {
    Matrix2 m;
    m << std::complex<double>(x[0], x[1]), std::complex<double>(x[2], x[3]), std::complex<double>(x[4], x[5]),
        std::complex<double>(x[6], x[7]);
    return m;
}
inline void pack(const Matrix2& m, State8& x) {
    for (int i = 0; i < 4; ++i) {
        x[2 * i] = std::real(m(i / 2, i % 2));
        x[2 * i + 1] = std::imag(m(i / 2, i % 2));
    }
}

template <class State, class System, class Observer>
void integrate_on_grid(System&& sys, State& x, const std::vector<double>& grid, const IntegratorOptions& opt,
                       Observer&& obs) {
    namespace odeint = boost::numeric::odeint;
    if (grid.empty()) return;
    if (grid.size() == 1) {
        obs(x, grid.front());
        return;
    }
    double t_reached = grid.front();
    auto tracking_obs = [&](const State& s, double t) {
        t_reached = t;
        obs(s, t);
    };
    try {
        auto stepper = odeint::make_dense_output(opt.abs_tol, opt.rel_tol, odeint::runge_kutta_dopri5<State>());
        odeint::integrate_times(stepper, sys, x, grid.begin(), grid.end(), grid[1] - grid[0], tracking_obs,
                                odeint::max_step_checker(opt.max_steps_between_samples));
    } catch (const odeint::step_adjustment_error& e) {
        throw IntegrationFailure(std::string("step size adjustment failed: ") + e.what(), t_reached);
    } catch (const odeint::no_progress_error& e) {
        throw IntegrationFailure(std::string("no progress: ") + e.what(), t_reached);
    } catch (const odeint::odeint_error& e) {
        throw IntegrationFailure(e.what(), t_reached);
    }
    for (double v : x)
        if (!std::isfinite(v)) throw IntegrationFailure("state became non-finite", t_reached);
}

} // namespace detail

using HamiltonianFn = std::function<Matrix2(double)>;

/// Master equation d rho/dt = -i 2pi [H, rho] + (1/T1)(L rho L+ - {L+ L, rho}/2).
inline std::vector<DensityState> integrate_master_equation(const HamiltonianFn& h, double t1_us,
                                                           const DensityState& state0,
                                                           const std::vector<double>& grid,
                                                           const IntegratorOptions& opt = {}) {
    const Matrix2 l = relaxation_operator();
    const Matrix2 ldl = l.adjoint() * l;
    const double gamma = std::isfinite(t1_us) ? 1.0 / t1_us : 0.0;
    const std::complex<double> minus_i2pi(0.0, -units::two_pi);
    auto rhs = [&](const detail::State8& x, detail::State8& dxdt, double t) {
        const Matrix2 rho = detail::unpack(x);
        const Matrix2 hh = h(t);
        Matrix2 d = minus_i2pi * (hh * rho - rho * hh);
        if (gamma > 0.0) d += gamma * (l * rho * l.adjoint() - 0.5 * (ldl * rho + rho * ldl));
        detail::pack(d, dxdt);
    };
    detail::State8 x{};
    detail::pack(state0.rho, x);
    std::vector<DensityState> out;
    out.reserve(grid.size());
    detail::integrate_on_grid(rhs, x, grid, opt, [&](const detail::State8& s, double) {
        DensityState d;
        d.rho = detail::unpack(s);
        out.push_back(d);
    });
    return out;
}

inline TimeSeries to_series(const std::vector<DensityState>& states, const std::vector<double>& grid) {
    TimeSeries ts;
    for (std::size_t i = 0; i < states.size(); ++i) ts.push(grid[i], states[i].spin());
    return ts;
}

struct EvolutionResult {
    TimeSeries series;
    DensityState final_state;
};

inline void check_grid(const std::vector<double>& grid) {
    if (grid.empty()) throw InvalidArgument("time grid is empty");
    TimeSeries probe;
    probe.t = grid;
    probe.validate_uniform();
}

/// Rotating-frame evolution under H_RF(t) with amplitude damping at 1/T1 (T2 = 2 T1).
inline EvolutionResult evolve_lindblad_full(const DriveConfig& cfg, const Environment& env,
                                            const DensityState& state0, const std::vector<double>& grid,
                                            const IntegratorOptions& opt = {}) {
    cfg.validate();
    env.validate();
    if (env.model != DissipationModel::LindbladT2Eq2T1)
        throw InvalidArgument("evolve_lindblad requires the lindblad (T2 = 2 T1) model");
    check_grid(grid);
    const double t0 = grid.front();
    // burst clock starts at grid.front(); the phase of the image refers to that origin
    const auto states = integrate_master_equation(
        [&cfg, t0](double t) { return rotating_hamiltonian(cfg, t - t0); }, env.t1_us, state0, grid, opt);
    return {to_series(states, grid), states.back()};
}

inline TimeSeries evolve_lindblad(const DriveConfig& cfg, const Environment& env, const DensityState& state0,
                                  const std::vector<double>& grid, const IntegratorOptions& opt = {}) {
    return evolve_lindblad_full(cfg, env, state0, grid, opt).series;
}

/// Bloch equations dS/dt = 2pi b(t) x S - (Sx/T2, Sy/T2, (Sz - 1/2)/T1).
inline EvolutionResult evolve_bloch_full(const DriveConfig& cfg, const Environment& env, const DensityState& state0,
                                         const std::vector<double>& grid, const IntegratorOptions& opt = {}) {
    cfg.validate();
    env.validate();
    check_grid(grid);
    const double r1 = std::isfinite(env.t1_us) ? 1.0 / env.t1_us : 0.0;
    const double t2 = env.effective_t2();
    const double r2 = std::isfinite(t2) ? 1.0 / t2 : 0.0;
    const double t0 = grid.front();
    auto rhs = [&](const detail::State3& x, detail::State3& dxdt, double t) {
        const Eigen::Vector3d b = rotating_field(cfg, t - t0);
        const Eigen::Vector3d s(x[0], x[1], x[2]);
        const Eigen::Vector3d d = units::two_pi * b.cross(s);
        dxdt[0] = d.x() - r2 * s.x();
        dxdt[1] = d.y() - r2 * s.y();
        dxdt[2] = d.z() - r1 * (s.z() - 0.5);
    };
    const Eigen::Vector3d s0 = state0.spin();
    detail::State3 x{s0.x(), s0.y(), s0.z()};
    TimeSeries ts;
    detail::integrate_on_grid(rhs, x, grid, opt,
                              [&](const detail::State3& s, double t) { ts.push(t, {s[0], s[1], s[2]}); });
    // the purity part orthogonal to <S> is not tracked by the Bloch model
    return {ts, DensityState::from_spin(ts.at(ts.size() - 1))};
}

inline TimeSeries evolve_bloch(const DriveConfig& cfg, const Environment& env, const DensityState& state0,
                               const std::vector<double>& grid, const IntegratorOptions& opt = {}) {
    return evolve_bloch_full(cfg, env, state0, grid, opt).series;
}

/// Dispatches on env.model.
inline EvolutionResult evolve(const DriveConfig& cfg, const Environment& env, const DensityState& state0,
                              const std::vector<double>& grid, const IntegratorOptions& opt = {}) {
    return env.model == DissipationModel::LindbladT2Eq2T1 ? evolve_lindblad_full(cfg, env, state0, grid, opt)
                                                           : evolve_bloch_full(cfg, env, state0, grid, opt);
}

/// Closed evolution under the lab-frame Hamiltonian (no RWA). <Sz> is frame independent;
/// the transverse components are reported in the lab frame.
inline TimeSeries evolve_lab_frame(const DriveConfig& cfg, const DensityState& state0, const std::vector<double>& grid,
                                   const IntegratorOptions& opt = {}) {
    cfg.validate();
    check_grid(grid);
    const auto states = integrate_master_equation([&cfg](double t) { return lab_hamiltonian(cfg, t); },
                                                  units::infinity, state0, grid, opt);
    return to_series(states, grid);
}

// ---------------------------------------------------------------------------

struct TorqueTrace {
    std::vector<double> t, drive, image;
};

/// |<S> x b_d| and |<S> x b_i(t)| normalised by h_d/2 and h_i/2, the values for a spin of
/// length 1/2 orthogonal to the field. b_d is the static rotating-frame field, so a spin
/// locked along it carries zero drive torque.
inline TorqueTrace torque_trace(const TimeSeries& series, const DriveConfig& cfg) {
    TorqueTrace out;
    const Eigen::Vector3d bd = drive_field(cfg);
    const double nd = 0.5 * cfg.h_d_mhz;
    const double ni = 0.5 * cfg.h_i_mhz;
    for (std::size_t i = 0; i < series.size(); ++i) {
        const Eigen::Vector3d s = series.at(i);
        out.t.push_back(series.t[i]);
        out.drive.push_back(nd > 0.0 ? s.cross(bd).norm() / nd : 0.0);
        out.image.push_back(ni > 0.0 ? s.cross(image_field(cfg, series.t[i] - series.t.front())).norm() / ni : 0.0);
    }
    return out;
}

} // namespace spinguard
