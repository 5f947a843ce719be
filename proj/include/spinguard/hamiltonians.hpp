#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "spinguard/errors.hpp"
#include "spinguard/spinops.hpp"
#include "spinguard/units.hpp"

namespace spinguard {

/// Isotropic contact interaction, entering as -A S.I (MgO:Mn sign convention).
struct IsotropicHyperfine {
    double a_mhz = 0.0;
};

/// Axial tensor with its unique axis along crystal z, entering as +I[A]S.
struct AxialHyperfine {
    double a_perp_mhz = 0.0;
    double a_par_mhz = 0.0;
};

using Hyperfine = std::variant<std::monostate, IsotropicHyperfine, AxialHyperfine>;

struct SpinSystem {
    std::string label;
    double electron_spin = 0.5;
    double nuclear_spin = 0.0;  ///< 0 when there is no nucleus
    double g = 2.0023;
    Hyperfine hyperfine;
    /// Cubic crystal-field parameter a (MHz), with H_CF = a/6 [Sx^4 + Sy^4 + Sz^4 - S(S+1)(3S^2+1)/5].
    std::optional<double> cubic_a_mhz;
    StevensCoefficients stevens;
    /// Unit vector of B0 in the crystal frame.
    Eigen::Vector3d field_direction{0.0, 0.0, 1.0};
    /// Microwave field direction; when unset, the crystal-x axis projected
    /// perpendicular to B0 (crystal z if B0 lies along x).
    std::optional<Eigen::Vector3d> mw_direction;
    /// Half linewidth Gamma in mT (informational, feeds echo ensembles).
    double half_linewidth_mt = 0.0;
    /// Set when the material needs a crystal-field value the user must supply.
    bool requires_cubic_a = false;

    Spin spin() const { return Spin::from_value(electron_spin); }

    /// Hilbert-space dimension of the nucleus (1 when absent).
    Eigen::Index nuclear_dim() const {
        return nuclear_spin == 0.0 ? 1 : Spin::from_value(nuclear_spin).dim();
    }

    Eigen::Index dim() const { return spin().dim() * nuclear_dim(); }

    void validate() const {
        (void)spin();
        if (nuclear_spin < 0.0) throw InvalidArgument(label + ": nuclear spin must be >= 0");
        if (nuclear_spin != 0.0) (void)Spin::from_value(nuclear_spin);
        if (!(g > 0.0) || !std::isfinite(g)) throw InvalidArgument(label + ": g must be positive");
        if (const auto* iso = std::get_if<IsotropicHyperfine>(&hyperfine); iso && !std::isfinite(iso->a_mhz))
            throw InvalidArgument(label + ": hyperfine constant must be finite");
        if (const auto* ax = std::get_if<AxialHyperfine>(&hyperfine);
            ax && !(std::isfinite(ax->a_perp_mhz) && std::isfinite(ax->a_par_mhz)))
            throw InvalidArgument(label + ": hyperfine tensor must be finite");
        if (requires_cubic_a && !cubic_a_mhz)
            throw ValidationError("cubic_a_mhz", label + " needs the cubic crystal-field parameter a (no default)");
        if (std::abs(field_direction.norm() - 1.0) > 1e-9)
            throw InvalidArgument(label + ": field_direction must be a unit vector");
        for (const auto& [kq, value] : stevens.terms) {
            if (!stevens_supported(kq.first, kq.second))
                throw UnsupportedOperator(label + ": unsupported Stevens term (" + std::to_string(kq.first) + "," +
                                          std::to_string(kq.second) + ")");
            if (kq.first > spin().twice())
                throw InvalidArgument(label + ": Stevens rank exceeds 2S");
            if (!std::isfinite(value)) throw InvalidArgument(label + ": Stevens coefficient must be finite");
        }
    }
};

/// Electron-spin operators embedded in electron (x) nucleus space.
struct EmbeddedOperators {
    SpinMatrix sx, sy, sz;
    SpinMatrix ix, iy, iz;
};

inline EmbeddedOperators embedded_operators(const SpinSystem& sys) {
    const auto s = spin_matrices(sys.spin());
    const Eigen::Index nd = sys.nuclear_dim();
    const Eigen::Index ed = sys.spin().dim();
    EmbeddedOperators ops;
    ops.sx = kron(s.sx, identity(nd));
    ops.sy = kron(s.sy, identity(nd));
    ops.sz = kron(s.sz, identity(nd));
    if (sys.nuclear_spin > 0.0) {
        const auto n = spin_matrices(sys.nuclear_spin);
        ops.ix = kron(identity(ed), n.sx);
        ops.iy = kron(identity(ed), n.sy);
        ops.iz = kron(identity(ed), n.sz);
    } else {
        ops.ix = ops.iy = ops.iz = SpinMatrix::Zero(ed, ed);
    }
    return ops;
}

/// Identity-proportional constant of the cubic term exactly as printed in the
/// MgO:Mn Hamiltonian, S(S+1)(3S^2+1)/5. The textbook invariant uses
/// S(S+1)(3S^2+3S-1)/5; the difference is a multiple of the identity and
/// cannot change any transition frequency.
inline double cubic_field_constant(double s) { return s * (s + 1.0) * (3.0 * s * s + 1.0) / 5.0; }

/// Cubic crystal-field term on the electron space alone.
inline SpinMatrix cubic_field_term(Spin spin, double a_mhz, bool include_constant = true) {
    const auto s = spin_matrices(spin);
    const SpinMatrix sx2 = s.sx * s.sx, sy2 = s.sy * s.sy, sz2 = s.sz * s.sz;
    SpinMatrix quartic = sx2 * sx2 + sy2 * sy2 + sz2 * sz2;
    if (include_constant) quartic -= cubic_field_constant(spin.value()) * identity(spin.dim());
    return (a_mhz / 6.0) * quartic;
}

/// Static spin Hamiltonian in MHz at field b0_mt.
inline SpinMatrix build_hamiltonian(const SpinSystem& sys, double b0_mt) {
    if (!(b0_mt >= 0.0) || !std::isfinite(b0_mt))
        throw InvalidArgument("build_hamiltonian: B0 must be finite and >= 0 mT");
    sys.validate();

    const auto ops = embedded_operators(sys);
    const Eigen::Index nd = sys.nuclear_dim();
    const Eigen::Vector3d& n = sys.field_direction;
    const double zeeman = sys.g * units::bohr_mhz_per_mt * b0_mt;

    SpinMatrix h = zeeman * (n.x() * ops.sx + n.y() * ops.sy + n.z() * ops.sz);

    if (const auto* iso = std::get_if<IsotropicHyperfine>(&sys.hyperfine)) {
        h -= iso->a_mhz * (ops.sx * ops.ix + ops.sy * ops.iy + ops.sz * ops.iz);
    } else if (const auto* ax = std::get_if<AxialHyperfine>(&sys.hyperfine)) {
        h += ax->a_perp_mhz * (ops.ix * ops.sx + ops.iy * ops.sy) + ax->a_par_mhz * (ops.iz * ops.sz);
    }

    if (sys.cubic_a_mhz) h += kron(cubic_field_term(sys.spin(), *sys.cubic_a_mhz), identity(nd));

    for (const auto& [kq, coeff] : sys.stevens.terms)
        h += coeff * kron(stevens_operator(kq.first, kq.second, sys.spin()), identity(nd));

    return 0.5 * (h + h.adjoint());
}

inline Eigen::VectorXd energy_levels(const SpinSystem& sys, double b0_mt) {
    return hermitian_eig(build_hamiltonian(sys, b0_mt)).values;
}

/// Unit direction used for the microwave field.
inline Eigen::Vector3d microwave_direction(const SpinSystem& sys) {
    if (sys.mw_direction) {
        const double norm = sys.mw_direction->norm();
        if (!(norm > 0.0)) throw InvalidArgument(sys.label + ": mw_direction must be non-zero");
        return *sys.mw_direction / norm;
    }
    const Eigen::Vector3d& n = sys.field_direction;
    Eigen::Vector3d d = Eigen::Vector3d::UnitX() - n.x() * n;
    if (d.norm() < 1e-6) d = Eigen::Vector3d::UnitZ() - n.z() * n;
    return d.normalized();
}

/// Field direction tilted from a crystal axis by a polar misalignment (degrees)
/// about an azimuth (degrees) measured in the plane perpendicular to that axis.
inline Eigen::Vector3d tilted_direction(const Eigen::Vector3d& axis, double tilt_deg, double azimuth_deg = 0.0) {
    const Eigen::Vector3d a = axis.normalized();
    Eigen::Vector3d u = (std::abs(a.z()) < 0.9 ? Eigen::Vector3d::UnitZ() : Eigen::Vector3d::UnitX()).cross(a);
    u.normalize();
    const Eigen::Vector3d v = a.cross(u);
    const double t = units::deg_to_rad(tilt_deg), p = units::deg_to_rad(azimuth_deg);
    return (std::cos(t) * a + std::sin(t) * (std::cos(p) * u + std::sin(p) * v)).normalized();
}

// ---------------------------------------------------------------------------
// Presets

struct MaterialPreset {
    SpinSystem system;
    double b0_mt = 0.0;
    double f0_mhz = 0.0;
    double temperature_k = 0.0;
    std::optional<double> t1_us;
    std::optional<double> t2_us;
    double wait_us = 5.0;      ///< readout wait before the echo
    double tau_free_us = 0.0;  ///< defocus time for X/Y echo readout
};

inline MaterialPreset preset_p1() {
    MaterialPreset p;
    p.system.label = "P1";
    p.system.electron_spin = 0.5;
    p.system.nuclear_spin = 1.0;
    p.system.g = 2.0024;
    p.system.hyperfine = AxialHyperfine{81.0, 114.0};
    p.system.half_linewidth_mt = 0.2;  // 2 Gamma = 4 G
    p.b0_mt = 343.62;
    p.f0_mhz = 9645.0;
    p.temperature_k = 15.0;
    p.t2_us = 0.69;
    p.wait_us = 5.0;
    p.tau_free_us = 0.3;
    return p;
}

/// MgO:Mn2+. The cubic parameter a has no published value here and must be given.
inline MaterialPreset preset_mn_mgo(std::optional<double> cubic_a_mhz = std::nullopt) {
    MaterialPreset p;
    p.system.label = "MnMgO";
    p.system.electron_spin = 2.5;
    p.system.nuclear_spin = 2.5;
    p.system.g = 2.0014;
    p.system.hyperfine = IsotropicHyperfine{244.0};
    p.system.cubic_a_mhz = cubic_a_mhz;
    p.system.requires_cubic_a = true;
    p.system.half_linewidth_mt = 0.025;  // 2 Gamma = 0.5 G
    p.b0_mt = 353.7;
    p.f0_mhz = 9734.0;
    p.temperature_k = 40.0;
    p.t1_us = 15.0;
    p.t2_us = 3.0;
    p.wait_us = 6.0;
    p.tau_free_us = 0.0;  // FID readout
    return p;
}

inline MaterialPreset preset_gd_cawo4() {
    MaterialPreset p;
    p.system.label = "GdCaWO4";
    p.system.electron_spin = 3.5;
    p.system.g = 1.991;
    p.system.stevens.terms = {{{2, 0}, -916.0}, {{4, 0}, -1.14}, {{4, 4}, -7.02}, {{6, 0}, -5.94e-4}, {{6, 4}, 4.77}};
    p.system.field_direction = Eigen::Vector3d::UnitX();  // crystallographic a-axis
    p.system.half_linewidth_mt = 0.3;                     // 2 Gamma = 6 G
    p.b0_mt = 377.0;
    p.f0_mhz = 9633.0;
    p.temperature_k = 40.0;
    p.t2_us = 4.0;
    p.wait_us = 10.0;
    p.tau_free_us = 0.2;
    return p;
}

inline std::vector<std::string> preset_names() { return {"P1", "MnMgO", "GdCaWO4"}; }

inline MaterialPreset material_preset(const std::string& name) {
    if (name == "P1") return preset_p1();
    if (name == "MnMgO") return preset_mn_mgo();
    if (name == "GdCaWO4") return preset_gd_cawo4();
    throw ValidationError("material", "unknown material preset '" + name + "'");
}

// ---------------------------------------------------------------------------

struct LevelPair {
    Eigen::Index lower = 0;
    Eigen::Index upper = 1;

    friend bool operator==(const LevelPair&, const LevelPair&) = default;
};

struct ResonanceField {
    double b_mt;
    LevelPair levels;
};

struct ResonanceSearchOptions {
    double grid_step_mt = 0.1;
    double rel_tol = 1e-6;
};

/// Fields where an adjacent level splitting equals f0. Sign changes of
/// E_{j+1} - E_j - f0 are bracketed on a uniform grid and refined by bisection.
/// `max_roots` = 0 means no limit. Results are sorted by field.
inline std::vector<ResonanceField> resonance_fields(const SpinSystem& sys, double f0_mhz, double b_min_mt,
                                                    double b_max_mt, std::size_t max_roots = 0,
                                                    const ResonanceSearchOptions& opts = {}) {
    if (!(f0_mhz > 0.0)) throw InvalidArgument("resonance_fields: f0 must be positive");
    if (!(b_max_mt > b_min_mt) || b_min_mt < 0.0)
        throw InvalidArgument("resonance_fields: field range must be non-empty and non-negative");
    if (!(opts.grid_step_mt > 0.0)) throw InvalidArgument("resonance_fields: grid step must be positive");
    sys.validate();

    const auto n_steps = static_cast<std::size_t>(std::ceil((b_max_mt - b_min_mt) / opts.grid_step_mt));
    const double step = (b_max_mt - b_min_mt) / static_cast<double>(n_steps);
    const Eigen::Index levels = sys.dim();

    auto mismatch = [&](double b, Eigen::Index j) {
        const auto e = energy_levels(sys, b);
        return e(j + 1) - e(j) - f0_mhz;
    };

    std::vector<ResonanceField> roots;
    Eigen::VectorXd prev = energy_levels(sys, b_min_mt);
    for (std::size_t i = 1; i <= n_steps; ++i) {
        const double b_lo = b_min_mt + step * static_cast<double>(i - 1);
        const double b_hi = (i == n_steps) ? b_max_mt : b_min_mt + step * static_cast<double>(i);
        const Eigen::VectorXd cur = energy_levels(sys, b_hi);
        for (Eigen::Index j = 0; j + 1 < levels; ++j) {
            const double g_lo = prev(j + 1) - prev(j) - f0_mhz;
            const double g_hi = cur(j + 1) - cur(j) - f0_mhz;
            // A root exactly on a grid point is credited to the cell it closes.
            if (g_lo == 0.0 && i > 1) continue;
            if (g_lo * g_hi > 0.0) continue;
            double root = g_lo == 0.0 ? b_lo : b_hi;
            if (g_lo != 0.0 && g_hi != 0.0) {
                double lo = b_lo, hi = b_hi, f_lo = g_lo;
                for (int it = 0; it < 100; ++it) {
                    root = 0.5 * (lo + hi);
                    const double f_mid = mismatch(root, j);
                    if (f_mid == 0.0 || (std::abs(f_mid) <= 0.1 * opts.rel_tol * f0_mhz && hi - lo < 1e-9))
                        break;
                    if ((f_mid < 0.0) == (f_lo < 0.0)) {
                        lo = root;
                        f_lo = f_mid;
                    } else {
                        hi = root;
                    }
                }
            }
            roots.push_back({root, {j, j + 1}});
        }
        prev = cur;
    }
    std::stable_sort(roots.begin(), roots.end(),
                     [](const ResonanceField& a, const ResonanceField& b) { return a.b_mt < b.b_mt; });
    if (max_roots > 0 && roots.size() > max_roots) roots.resize(max_roots);
    return roots;
}

// ---------------------------------------------------------------------------

struct EffectiveTLS {
    LevelPair levels;
    double f_res_mhz = 0.0;
    /// Factor multiplying h_d (and h_i): 2 |<upper| S_mw |lower>|, equal to 1 for bare S = 1/2.
    double drive_scale = 1.0;
    double half_linewidth_mt = 0.0;
    /// Half linewidth converted to MHz with the system g-factor.
    double half_linewidth_mhz = 0.0;

    static EffectiveTLS bare_spin_half(double f_res_mhz = 0.0, double half_linewidth_mhz = 0.0) {
        EffectiveTLS tls;
        tls.f_res_mhz = f_res_mhz;
        tls.half_linewidth_mhz = half_linewidth_mhz;
        return tls;
    }
};

/// Reduces an adjacent level pair to an effective two-level system.
inline EffectiveTLS reduce_to_tls(const SpinSystem& sys, double b0_mt, LevelPair pair) {
    const auto h = build_hamiltonian(sys, b0_mt);
    const Eigen::Index n = h.rows();
    // Hyperfine multiplets interleave, so allowed pairs need not be neighbours in energy order.
    if (pair.lower < 0 || pair.upper >= n || pair.upper <= pair.lower)
        throw InvalidArgument("reduce_to_tls: need 0 <= lower < upper <= " + std::to_string(n - 1));
    const auto eig = hermitian_eig(h);
    EffectiveTLS tls;
    tls.levels = pair;
    tls.f_res_mhz = eig.values(pair.upper) - eig.values(pair.lower);
    if (!(tls.f_res_mhz > 0.0))
        throw InvalidArgument("reduce_to_tls: selected levels are degenerate");

    const auto ops = embedded_operators(sys);
    const Eigen::Vector3d d = microwave_direction(sys);
    const SpinMatrix s_mw = d.x() * ops.sx + d.y() * ops.sy + d.z() * ops.sz;
    const Complex element = eig.vectors.col(pair.upper).dot(s_mw * eig.vectors.col(pair.lower));
    tls.drive_scale = 2.0 * std::abs(element);
    if (tls.drive_scale < 1e-9)
        throw ForbiddenTransition("reduce_to_tls: levels " + std::to_string(pair.lower) + " and " +
                                  std::to_string(pair.upper) + " have no transverse matrix element");
    tls.half_linewidth_mt = sys.half_linewidth_mt;
    tls.half_linewidth_mhz = sys.g * units::bohr_mhz_per_mt * sys.half_linewidth_mt;
    return tls;
}

/// Allowed level pair (any lower < upper) whose splitting at b0 is closest to f0. Pairs whose
/// drive_scale is below `min_drive_scale` (nuclear-flip lines borrowed through mixing) are skipped.
inline LevelPair closest_allowed_pair(const SpinSystem& sys, double b0_mt, double f0_mhz,
                                      double min_drive_scale = 0.1) {
    const auto e = energy_levels(sys, b0_mt);
    std::optional<LevelPair> best;
    double best_gap = units::infinity;
    for (Eigen::Index i = 0; i < e.size(); ++i) {
        for (Eigen::Index j = i + 1; j < e.size(); ++j) {
            const double mismatch = std::abs(e(j) - e(i) - f0_mhz);
            if (mismatch >= best_gap || !(e(j) > e(i))) continue;
            try {
                if (reduce_to_tls(sys, b0_mt, {i, j}).drive_scale < min_drive_scale) continue;
            } catch (const ForbiddenTransition&) {
                continue;
            }
            best_gap = mismatch;
            best = LevelPair{i, j};
        }
    }
    if (!best) throw ForbiddenTransition("no allowed level pair for " + sys.label);
    return *best;
}

} // namespace spinguard
