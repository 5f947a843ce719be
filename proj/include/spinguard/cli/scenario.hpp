#pragma once

// Scenario files: JSON, strict keys, units spelled out in key names.

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "spinguard/analysis.hpp"
#include "spinguard/drive.hpp"
#include "spinguard/floquet.hpp"
#include "spinguard/hamiltonians.hpp"
#include "spinguard/sequences.hpp"

namespace spinguard::cli {

using json = nlohmann::ordered_json;

struct OutputSpec {
    std::string dir = ".";
    std::string prefix = "run";
};

struct Scenario {
    json source;
    std::string material_name;
    MaterialPreset material;
    double b0_mt = 0.0;
    double f0_mhz = 0.0;
    EffectiveTLS tls;
    std::string tls_note;  ///< set when the bare spin-1/2 fallback was used

    DriveConfig drive;  ///< bare spin-1/2 amplitudes; tls.drive_scale is applied at run time
    std::optional<double> h_i_ratio;
    bool image_on = true;

    Environment env;
    std::vector<PulseSegment> sequence;
    double duration_us = 0.0;
    Axis initial_axis = Axis::PlusZ;
    double sample_step_us = 0.0;
    SequenceOptions seq_opt;
    int n_blocks = 7;
    OutputSpec output;

    /// Drive as seen by the selected transition.
    DriveConfig effective_drive() const {
        const DriveConfig d = drive.scaled(tls.drive_scale);
        return image_on ? d : d.without_image();
    }
};

namespace detail {

inline void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& ctx) {
    if (!obj.is_object()) throw ValidationError(ctx.empty() ? "scenario" : ctx, "must be an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : obj.items())
        if (!ok.count(k)) throw ValidationError(ctx.empty() ? k : ctx + "." + k, "unknown key");
}

inline std::string key_path(const std::string& ctx, const char* key) { return ctx.empty() ? key : ctx + "." + key; }

inline double number(const json& obj, const char* key, const std::string& ctx) {
    const auto& v = obj.at(key);
    if (!v.is_number()) throw ValidationError(key_path(ctx, key), "must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ValidationError(key_path(ctx, key), "must be finite");
    return x;
}

inline std::optional<double> opt_number(const json& obj, const char* key, const std::string& ctx) {
    if (!obj.contains(key)) return std::nullopt;
    return number(obj, key, ctx);
}

inline double non_negative(const json& obj, const char* key, const std::string& ctx) {
    const double x = number(obj, key, ctx);
    if (x < 0.0) throw ValidationError(key_path(ctx, key), "must be >= 0");
    return x;
}

inline std::string string(const json& obj, const char* key, const std::string& ctx) {
    const auto& v = obj.at(key);
    if (!v.is_string()) throw ValidationError(key_path(ctx, key), "must be a string");
    return v.get<std::string>();
}

inline Axis parse_axis(const std::string& s, const std::string& key) {
    static const std::pair<const char*, Axis> table[] = {{"+X", Axis::PlusX},  {"+Y", Axis::PlusY},
                                                         {"+Z", Axis::PlusZ},  {"-X", Axis::MinusX},
                                                         {"-Y", Axis::MinusY}, {"-Z", Axis::MinusZ}};
    for (const auto& [name, a] : table)
        if (s == name) return a;
    throw ValidationError(key, "axis must be one of +X, +Y, +Z, -X, -Y, -Z");
}

inline PulseAxis parse_pulse_axis(const std::string& s, const std::string& key) {
    if (s == "x") return PulseAxis::X;
    if (s == "y") return PulseAxis::Y;
    if (s == "-x") return PulseAxis::MinusX;
    if (s == "-y") return PulseAxis::MinusY;
    throw ValidationError(key, "pulse axis must be one of x, y, -x, -y");
}

inline Eigen::Vector3d vec3(const json& obj, const char* key, const std::string& ctx) {
    const auto& v = obj.at(key);
    if (!v.is_array() || v.size() != 3) throw ValidationError(key_path(ctx, key), "must be a 3-vector");
    Eigen::Vector3d out;
    for (int i = 0; i < 3; ++i) {
        if (!v[i].is_number()) throw ValidationError(key_path(ctx, key), "must be a 3-vector");
        out(i) = v[i].get<double>();
    }
    if (!(out.norm() > 0.0)) throw ValidationError(key_path(ctx, key), "must be nonzero");
    return out.normalized();
}

inline SpinSystem parse_inline_material(const json& m) {
    const std::string ctx = "material";
    check_keys(m, {"label", "electron_spin", "nuclear_spin", "g", "hyperfine_iso_mhz", "hyperfine_perp_mhz",
                   "hyperfine_par_mhz", "stevens", "field_direction", "mw_direction", "half_linewidth_mt"},
               ctx);
    SpinSystem s;
    s.label = m.contains("label") ? string(m, "label", ctx) : "inline";
    if (m.contains("electron_spin")) s.electron_spin = number(m, "electron_spin", ctx);
    if (m.contains("nuclear_spin")) s.nuclear_spin = number(m, "nuclear_spin", ctx);
    if (m.contains("g")) s.g = number(m, "g", ctx);
    const bool iso = m.contains("hyperfine_iso_mhz");
    const bool axial = m.contains("hyperfine_perp_mhz") || m.contains("hyperfine_par_mhz");
    if (iso && axial) throw ValidationError("material.hyperfine_iso_mhz", "give either isotropic or axial hyperfine");
    if (iso) s.hyperfine = IsotropicHyperfine{number(m, "hyperfine_iso_mhz", ctx)};
    if (axial)
        s.hyperfine = AxialHyperfine{opt_number(m, "hyperfine_perp_mhz", ctx).value_or(0.0),
                                     opt_number(m, "hyperfine_par_mhz", ctx).value_or(0.0)};
    if (m.contains("stevens")) {
        const auto& list = m.at("stevens");
        if (!list.is_array()) throw ValidationError("material.stevens", "must be a list");
        for (std::size_t i = 0; i < list.size(); ++i) {
            const std::string c = "material.stevens[" + std::to_string(i) + "]";
            check_keys(list[i], {"k", "q", "b_mhz"}, c);
            const auto k = static_cast<int>(number(list[i], "k", c));
            const auto q = static_cast<int>(number(list[i], "q", c));
            s.stevens.terms[{k, q}] = number(list[i], "b_mhz", c);
        }
    }
    if (m.contains("field_direction")) s.field_direction = vec3(m, "field_direction", ctx);
    if (m.contains("mw_direction")) s.mw_direction = vec3(m, "mw_direction", ctx);
    if (m.contains("half_linewidth_mt")) s.half_linewidth_mt = non_negative(m, "half_linewidth_mt", ctx);
    try {
        (void)s.spin();
        if (s.nuclear_spin > 0.0) (void)Spin::from_value(s.nuclear_spin);
    } catch (const Error& e) {
        throw ValidationError("material.electron_spin", e.what());
    }
    return s;
}

inline PulseSegment parse_segment(const json& rec, std::size_t i) {
    const std::string ctx = "sequence[" + std::to_string(i) + "]";
    if (!rec.is_object() || !rec.contains("kind")) throw ValidationError(ctx + ".kind", "missing");
    const std::string kind = string(rec, "kind", ctx);
    if (kind == "prepare") {
        check_keys(rec, {"kind", "axis"}, ctx);
        const Axis a = parse_axis(string(rec, "axis", ctx), ctx + ".axis");
        if (a != Axis::PlusX && a != Axis::PlusY && a != Axis::PlusZ)
            throw ValidationError(ctx + ".axis", "prepare axis must be +X, +Y or +Z");
        return seg::Prepare{a};
    }
    if (kind == "burst") {
        check_keys(rec, {"kind", "duration_us", "image_on"}, ctx);
        seg::Burst b{non_negative(rec, "duration_us", ctx), true};
        if (rec.contains("image_on")) {
            if (!rec.at("image_on").is_boolean()) throw ValidationError(ctx + ".image_on", "must be true or false");
            b.image_on = rec.at("image_on").get<bool>();
        }
        return b;
    }
    if (kind == "wait") {
        check_keys(rec, {"kind", "duration_us"}, ctx);
        return seg::Wait{non_negative(rec, "duration_us", ctx)};
    }
    if (kind == "hard_pulse") {
        check_keys(rec, {"kind", "angle_deg", "axis"}, ctx);
        seg::HardPulse p;
        if (rec.contains("angle_deg")) p.angle_rad = units::deg_to_rad(number(rec, "angle_deg", ctx));
        if (rec.contains("axis")) p.axis = parse_pulse_axis(string(rec, "axis", ctx), ctx + ".axis");
        return p;
    }
    if (kind == "acquire_echo") {
        check_keys(rec, {"kind", "tau_free_us"}, ctx);
        return seg::AcquireEcho{rec.contains("tau_free_us") ? non_negative(rec, "tau_free_us", ctx) : 0.0};
    }
    if (kind == "acquire_fid") {
        check_keys(rec, {"kind"}, ctx);
        return seg::AcquireFid{};
    }
    throw ValidationError(ctx + ".kind",
                          "unknown segment kind '" + kind + "' (prepare, burst, wait, hard_pulse, acquire_echo, acquire_fid)");
}

} // namespace detail

/// Builds a scenario from parsed JSON. Every problem is reported as a ValidationError naming the key.
inline Scenario load_scenario(const json& j) {
    using namespace detail;
    check_keys(j, {"material", "cubic_a_mhz", "b0_mt", "f0_mhz", "tilt_deg", "tilt_azimuth_deg", "level_pair",
                   "drive", "environment", "sequence", "run", "ensemble_nodes", "pulses", "n_blocks", "output"},
               "");
    Scenario sc;
    sc.source = j;

    // material
    if (!j.contains("material")) throw ValidationError("material", "missing");
    const std::optional<double> cubic_a = opt_number(j, "cubic_a_mhz", "");
    if (j.at("material").is_string()) {
        sc.material_name = j.at("material").get<std::string>();
        sc.material = material_preset(sc.material_name);
        if (sc.material.system.requires_cubic_a) {
            if (!cubic_a) throw ValidationError("cubic_a_mhz", sc.material_name + " needs the cubic parameter a (MHz)");
            sc.material.system.cubic_a_mhz = cubic_a;
        }
    } else {
        sc.material.system = parse_inline_material(j.at("material"));
        sc.material_name = sc.material.system.label;
        sc.material.system.cubic_a_mhz = cubic_a;
    }
    sc.b0_mt = j.contains("b0_mt") ? non_negative(j, "b0_mt", "") : sc.material.b0_mt;
    sc.f0_mhz = j.contains("f0_mhz") ? non_negative(j, "f0_mhz", "") : sc.material.f0_mhz;
    if (j.contains("tilt_deg")) {
        const double az = opt_number(j, "tilt_azimuth_deg", "").value_or(0.0);
        sc.material.system.field_direction =
            tilted_direction(sc.material.system.field_direction, number(j, "tilt_deg", ""), az);
    } else if (j.contains("tilt_azimuth_deg")) {
        throw ValidationError("tilt_azimuth_deg", "needs tilt_deg");
    }

    // transition
    try {
        LevelPair pair;
        if (j.contains("level_pair")) {
            const auto& lp = j.at("level_pair");
            if (!lp.is_array() || lp.size() != 2 || !lp[0].is_number_integer() || !lp[1].is_number_integer())
                throw ValidationError("level_pair", "must be [lower, upper] level indices");
            pair = {lp[0].get<Eigen::Index>(), lp[1].get<Eigen::Index>()};
        } else {
            pair = closest_allowed_pair(sc.material.system, sc.b0_mt, sc.f0_mhz);
        }
        sc.tls = reduce_to_tls(sc.material.system, sc.b0_mt, pair);
    } catch (const ForbiddenTransition& e) {
        if (j.contains("level_pair")) throw ValidationError("level_pair", e.what());
        sc.tls = EffectiveTLS::bare_spin_half(sc.f0_mhz, sc.material.system.g * units::bohr_mhz_per_mt *
                                                             sc.material.system.half_linewidth_mt);
        sc.tls_note = std::string("no allowed transition; using a bare spin 1/2 (") + e.what() + ")";
    } catch (const InvalidArgument& e) {
        throw ValidationError(j.contains("level_pair") ? "level_pair" : "b0_mt", e.what());
    }

    // drive
    if (!j.contains("drive")) throw ValidationError("drive", "missing");
    {
        const auto& d = j.at("drive");
        check_keys(d, {"delta_mhz", "h_d_mhz", "resonance_order", "h_i_mhz", "h_i_ratio", "phi_deg", "theta_deg",
                       "image_on"},
                   "drive");
        sc.drive.f0_mhz = sc.f0_mhz;
        sc.drive.delta_mhz = number(d, "delta_mhz", "drive");
        if (d.contains("h_d_mhz") == d.contains("resonance_order"))
            throw ValidationError("drive.h_d_mhz", "give exactly one of h_d_mhz or resonance_order");
        if (d.contains("h_d_mhz")) {
            sc.drive.h_d_mhz = non_negative(d, "h_d_mhz", "drive");
        } else {
            if (!d.at("resonance_order").is_number_integer())
                throw ValidationError("drive.resonance_order", "must be an integer");
            try {
                sc.drive.h_d_mhz = resonant_drive(d.at("resonance_order").get<int>(), sc.drive.delta_mhz) /
                                   sc.tls.drive_scale;
            } catch (const InvalidArgument& e) {
                throw ValidationError("drive.resonance_order", e.what());
            }
        }
        if (d.contains("h_i_mhz") && d.contains("h_i_ratio"))
            throw ValidationError("drive.h_i_mhz", "give at most one of h_i_mhz or h_i_ratio");
        if (d.contains("h_i_mhz")) {
            sc.drive.h_i_mhz = non_negative(d, "h_i_mhz", "drive");
        } else {
            sc.h_i_ratio = d.contains("h_i_ratio") ? non_negative(d, "h_i_ratio", "drive") : default_image_ratio;
            sc.drive.h_i_mhz = *sc.h_i_ratio * sc.drive.h_d_mhz;
        }
        if (d.contains("phi_deg")) sc.drive.phi_rad = units::deg_to_rad(number(d, "phi_deg", "drive"));
        if (d.contains("theta_deg")) sc.drive.theta_rad = units::deg_to_rad(number(d, "theta_deg", "drive"));
        if (d.contains("image_on")) {
            if (!d.at("image_on").is_boolean()) throw ValidationError("drive.image_on", "must be true or false");
            sc.image_on = d.at("image_on").get<bool>();
        }
    }

    // environment; preset values fill the gaps
    {
        std::optional<double> t1 = sc.material.t1_us, t2 = sc.material.t2_us;
        std::string model = t1 && !t2 ? "lindblad" : "bloch";
        if (j.contains("environment")) {
            const auto& e = j.at("environment");
            check_keys(e, {"model", "t1_us", "t2_us"}, "environment");
            if (e.contains("t1_us")) t1 = number(e, "t1_us", "environment");
            if (e.contains("t2_us")) t2 = number(e, "t2_us", "environment");
            if (e.contains("model")) model = string(e, "model", "environment");
        }
        if (t1 && !(*t1 > 0.0)) throw ValidationError("T1", "T1 must be positive");
        if (t2 && !(*t2 > 0.0)) throw ValidationError("T2", "T2 must be positive");
        if (model == "lindblad") {
            if (!t1) throw ValidationError("environment.t1_us", "the lindblad model needs t1_us");
            if (t2 && std::abs(*t2 - 2.0 * *t1) > 1e-9 * *t1)
                throw ValidationError("T2", "the lindblad model ties T2 to 2*T1; drop t2_us or use model bloch");
            sc.env = Environment::lindblad(*t1);
        } else if (model == "bloch") {
            sc.env = Environment::bloch(t1.value_or(units::infinity), t2.value_or(units::infinity));
        } else if (model == "closed") {
            sc.env = Environment::closed();
        } else {
            throw ValidationError("environment.model", "must be lindblad, bloch or closed");
        }
        sc.env.validate();
    }

    // what to run
    if (j.contains("sequence") == j.contains("run"))
        throw ValidationError("run", "give exactly one of run or sequence");
    if (j.contains("sequence")) {
        const auto& s = j.at("sequence");
        if (!s.is_array() || s.empty()) throw ValidationError("sequence", "must be a non-empty list");
        for (std::size_t i = 0; i < s.size(); ++i) sc.sequence.push_back(parse_segment(s[i], i));
        for (std::size_t i = 0; i + 1 < sc.sequence.size(); ++i)
            if (std::holds_alternative<seg::AcquireEcho>(sc.sequence[i]) ||
                std::holds_alternative<seg::AcquireFid>(sc.sequence[i]))
                throw ValidationError("sequence[" + std::to_string(i) + "]", "acquire must be the last segment");
    } else {
        const auto& r = j.at("run");
        check_keys(r, {"duration_us", "initial_axis", "sample_step_us"}, "run");
        sc.duration_us = non_negative(r, "duration_us", "run");
        if (!(sc.duration_us > 0.0)) throw ValidationError("run.duration_us", "must be > 0");
        if (r.contains("initial_axis")) sc.initial_axis = parse_axis(string(r, "initial_axis", "run"), "run.initial_axis");
        if (r.contains("sample_step_us")) {
            sc.sample_step_us = number(r, "sample_step_us", "run");
            if (!(sc.sample_step_us > 0.0)) throw ValidationError("run.sample_step_us", "must be > 0");
        }
    }
    if (j.contains("ensemble_nodes")) {
        if (!j.at("ensemble_nodes").is_number_integer() || j.at("ensemble_nodes").get<int>() < 1)
            throw ValidationError("ensemble_nodes", "must be a positive integer");
        sc.seq_opt.ensemble_nodes = j.at("ensemble_nodes").get<int>();
    }
    if (j.contains("pulses")) {
        const auto& p = j.at("pulses");
        check_keys(p, {"mode", "pi_half_us", "pi_us"}, "pulses");
        if (p.contains("mode")) {
            const std::string m = string(p, "mode", "pulses");
            if (m == "ideal") sc.seq_opt.pulse_mode = PulseMode::Ideal;
            else if (m == "finite") sc.seq_opt.pulse_mode = PulseMode::Finite;
            else throw ValidationError("pulses.mode", "must be ideal or finite");
        }
        if (p.contains("pi_half_us")) sc.seq_opt.pi_half_us = number(p, "pi_half_us", "pulses");
        if (p.contains("pi_us")) sc.seq_opt.pi_us = number(p, "pi_us", "pulses");
        if (!(sc.seq_opt.pi_half_us > 0.0)) throw ValidationError("pulses.pi_half_us", "must be > 0");
        if (!(sc.seq_opt.pi_us > 0.0)) throw ValidationError("pulses.pi_us", "must be > 0");
    }
    if (j.contains("n_blocks")) {
        if (!j.at("n_blocks").is_number_integer() || j.at("n_blocks").get<int>() < 1)
            throw ValidationError("n_blocks", "must be a positive integer");
        sc.n_blocks = j.at("n_blocks").get<int>();
    }
    if (j.contains("output")) {
        const auto& o = j.at("output");
        check_keys(o, {"dir", "prefix"}, "output");
        if (o.contains("dir")) sc.output.dir = string(o, "dir", "output");
        if (o.contains("prefix")) sc.output.prefix = string(o, "prefix", "output");
        if (sc.output.prefix.empty() || sc.output.prefix.find('/') != std::string::npos)
            throw ValidationError("output.prefix", "must be a plain file name stem");
    }
    try {
        sc.drive.validate();
    } catch (const InvalidArgument& e) {
        throw ValidationError("drive", e.what());
    }
    return sc;
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("config", "cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError("config", std::string("JSON parse error: ") + e.what());
    }
}

inline Scenario load_scenario_file(const std::string& path) { return load_scenario(read_json_file(path)); }

} // namespace spinguard::cli
