#pragma once

#include <boost/version.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "spinguard/cli/scenario.hpp"

namespace spinguard::cli {

inline constexpr const char* tool_version = "0.1.0";

enum ExitCode { kOk = 0, kUsage = 2, kValidation = 3, kRuntime = 4 };

// ---------------------------------------------------------------------------
// output helpers

inline std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline std::ofstream open_output(const std::filesystem::path& p) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);  // binary: LF line endings everywhere
    if (!out) throw Error("cannot write '" + p.string() + "'");
    return out;
}

inline void write_series_csv(const std::filesystem::path& p, const TimeSeries& ts) {
    auto out = open_output(p);
    out << "t_us,sx,sy,sz\n";
    for (std::size_t i = 0; i < ts.size(); ++i)
        out << fmt(ts.t[i]) << ',' << fmt(ts.sx[i]) << ',' << fmt(ts.sy[i]) << ',' << fmt(ts.sz[i]) << '\n';
}

// first row: axis name then the swept values; first column: the t or f axis
inline void write_grid_csv(const std::filesystem::path& p, const std::string& axis_name, const SweepGrid& g) {
    auto out = open_output(p);
    out << axis_name;
    for (double v : g.values) out << ',' << fmt(v);
    out << '\n';
    for (std::size_t c = 0; c < g.axis.size(); ++c) {
        out << fmt(g.axis[c]);
        for (Eigen::Index r = 0; r < g.rows.rows(); ++r) out << ',' << fmt(g.rows(r, static_cast<Eigen::Index>(c)));
        out << '\n';
    }
}

inline json versions() {
    json v;
    v["spinguard"] = tool_version;
    v["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                 std::to_string(EIGEN_MINOR_VERSION);
    v["boost"] = BOOST_LIB_VERSION;
    v["json"] = std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                std::to_string(NLOHMANN_JSON_VERSION_PATCH);
#ifdef __VERSION__
    v["compiler"] = __VERSION__;
#endif
    return v;
}

inline json resolved(const Scenario& sc) {
    json r;
    r["material"] = sc.material_name;
    r["b0_mt"] = sc.b0_mt;
    r["f0_mhz"] = sc.f0_mhz;
    r["level_pair"] = {sc.tls.levels.lower, sc.tls.levels.upper};
    r["f_res_mhz"] = sc.tls.f_res_mhz;
    r["drive_scale"] = sc.tls.drive_scale;
    r["half_linewidth_mhz"] = sc.tls.half_linewidth_mhz;
    if (!sc.tls_note.empty()) r["note"] = sc.tls_note;
    const DriveConfig d = sc.effective_drive();
    r["effective_drive"] = {{"delta_mhz", d.delta_mhz}, {"h_d_mhz", d.h_d_mhz},       {"h_i_mhz", d.h_i_mhz},
                            {"phi_rad", d.phi_rad},     {"theta_rad", d.theta_rad},   {"rabi_mhz", rabi_frequency(d.delta_mhz, d.h_d_mhz)}};
    const auto num = [](double x) { return std::isfinite(x) ? json(x) : json(fmt(x)); };
    r["environment"] = {{"model", sc.env.model == DissipationModel::LindbladT2Eq2T1 ? "lindblad" : "bloch"},
                        {"t1_us", num(sc.env.t1_us)},
                        {"t2_us", num(sc.env.effective_t2())}};
    return r;
}

inline void write_manifest(const std::filesystem::path& p, const std::string& command, const Scenario& sc,
                           const json& results, const std::vector<std::string>& outputs,
                           const std::vector<std::string>& warnings) {
    json m;
    m["command"] = command;
    m["versions"] = versions();
    m["inputs"] = sc.source;
    m["resolved"] = resolved(sc);
    m["results"] = results;
    m["outputs"] = outputs;
    m["warnings"] = warnings;
    auto out = open_output(p);
    out << m.dump(2) << '\n';
}

inline void report(const std::vector<std::string>& files, const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
    for (const auto& f : files) std::cout << f << '\n';
}

// ---------------------------------------------------------------------------
// running a scenario

struct RunOutcome {
    TimeSeries series;
    std::optional<double> signal;
    std::vector<std::string> warnings;
};

/// Runs the scenario's sequence, or a raw drive from the initial axis. `step` > 0 forces the sample step.
inline RunOutcome run_scenario(const Scenario& sc, double step = 0.0) {
    RunOutcome out;
    if (!sc.tls_note.empty()) out.warnings.push_back(sc.tls_note);
    if (!sc.sequence.empty()) {
        SequenceOptions opt = sc.seq_opt;
        if (step > 0.0) opt.sample_step_us = step;
        const DriveConfig bare = sc.image_on ? sc.drive : sc.drive.without_image();
        auto res = run_sequence(sc.sequence, bare, sc.env, sc.tls, opt);
        out.series = std::move(res.trace);
        out.signal = res.signal;
        for (auto& w : res.warnings) out.warnings.push_back(std::move(w));
        return out;
    }
    const DriveConfig d = sc.effective_drive();
    for (const auto& w : d.warnings()) out.warnings.push_back(w);
    const double dt = step > 0.0 ? step : (sc.sample_step_us > 0.0 ? sc.sample_step_us : 0.0);
    const auto grid = dt > 0.0 ? uniform_grid(sc.duration_us,
                                              static_cast<std::size_t>(std::ceil(sc.duration_us / dt - 1e-9)) + 1)
                               : default_grid(d, sc.duration_us);
    const auto state0 = DensityState::from_spin(0.5 * axis_vector(sc.initial_axis));
    out.series = evolve(d, sc.env, state0, grid, sc.seq_opt.integrator).series;
    return out;
}

inline std::filesystem::path out_path(const Scenario& sc, const std::string& suffix) {
    return std::filesystem::path(sc.output.dir) / (sc.output.prefix + suffix);
}

inline int cmd_simulate(const Scenario& sc) {
    const auto r = run_scenario(sc);
    const auto csv = out_path(sc, ".csv"), manifest = out_path(sc, ".manifest.json");
    write_series_csv(csv, r.series);
    json results;
    results["samples"] = r.series.size();
    if (r.signal) results["signal"] = *r.signal;
    if (r.series.size() > 0) results["final_spin"] = {r.series.sx.back(), r.series.sy.back(), r.series.sz.back()};
    write_manifest(manifest, "simulate", sc, results, {csv.string()}, r.warnings);
    report({csv.string(), manifest.string()}, r.warnings);
    return kOk;
}

// ---------------------------------------------------------------------------
// sweep

inline const std::vector<std::string>& sweep_params() {
    static const std::vector<std::string> p{"delta_mhz", "phi_deg", "h_i_mhz", "h_d_mhz"};
    return p;
}

inline Scenario with_param(Scenario sc, const std::string& param, double v) {
    if (param == "delta_mhz") {
        sc.drive.delta_mhz = v;
    } else if (param == "phi_deg") {
        sc.drive.phi_rad = units::deg_to_rad(v);
    } else if (param == "h_i_mhz") {
        sc.drive.h_i_mhz = v;
        sc.h_i_ratio.reset();
    } else if (param == "h_d_mhz") {
        sc.drive.h_d_mhz = v;
        if (sc.h_i_ratio) sc.drive.h_i_mhz = *sc.h_i_ratio * v;  // image follows the drive
    } else {
        throw InvalidArgument("unknown sweep parameter '" + param + "'");
    }
    return sc;
}

struct SweepRequest {
    std::string param;
    double from = 0.0, to = 0.0;
    int steps = 1;
    unsigned jobs = 0;
};

inline std::vector<double> sweep_values(const SweepRequest& req) {
    if (req.steps < 1) throw InvalidArgument("--steps must be >= 1");
    if (req.steps == 1) return {req.from};
    std::vector<double> v;
    for (int i = 0; i < req.steps; ++i) v.push_back(req.from + (req.to - req.from) * i / (req.steps - 1));
    return v;
}

inline int cmd_sweep(const Scenario& base, const SweepRequest& req) {
    const auto values = sweep_values(req);
    // one sample step for every row, so the rows share a time axis
    double step = base.sample_step_us;
    if (!(step > 0.0)) {
        step = units::infinity;
        for (double v : values) step = std::min(step, default_sample_step(with_param(base, req.param, v).effective_drive()));
    }
    for (double v : values) with_param(base, req.param, v).drive.validate();

    std::vector<std::optional<double>> signals(values.size());
    std::vector<std::vector<std::string>> row_warnings(values.size());
    // rows are keyed by index so repeated values stay distinct
    std::vector<double> index(values.size());
    for (std::size_t i = 0; i < index.size(); ++i) index[i] = static_cast<double>(i);
    auto run = [&](double key) {
        const auto i = static_cast<std::size_t>(key);
        auto r = run_scenario(with_param(base, req.param, values[i]), step);
        signals[i] = r.signal;
        row_warnings[i] = r.warnings;
        if (r.series.size() == 0) throw SequenceError("scenario produced no burst trace");
        return r.series;
    };
    SweepGrid grid = sweep(req.param, index, run, {req.jobs, 'z'});
    grid.values = values;

    std::vector<std::string> files, warnings;
    const auto grid_csv = out_path(base, "_grid.csv");
    write_grid_csv(grid_csv, "t_us", grid);
    files.push_back(grid_csv.string());
    if (!grid.axis.empty() && grid.axis.size() >= 16) {
        const auto fft_csv = out_path(base, "_fft.csv");
        write_grid_csv(fft_csv, "f_mhz", fft_grid(grid, {}, true));
        files.push_back(fft_csv.string());
    } else {
        warnings.push_back("fewer than 16 samples per row; FFT grid skipped");
    }

    json rows = json::array();
    for (std::size_t i = 0; i < values.size(); ++i) {
        json row;
        row["value"] = values[i];
        if (signals[i]) row["signal"] = *signals[i];
        if (!grid.errors[i].empty()) {
            row["error"] = grid.errors[i];
            warnings.push_back(req.param + "=" + fmt(values[i]) + ": " + grid.errors[i]);
        }
        rows.push_back(row);
    }
    std::set<std::string> seen;
    for (const auto& ws : row_warnings)
        for (const auto& w : ws)
            if (seen.insert(w).second) warnings.push_back(w);

    json results;
    results["param"] = req.param;
    results["sample_step_us"] = step;
    results["rows"] = rows;
    const auto manifest = out_path(base, "_sweep.manifest.json");
    write_manifest(manifest, "sweep", base, results, files, warnings);
    files.push_back(manifest.string());
    report(files, warnings);
    return kOk;
}

// ---------------------------------------------------------------------------
// floquet

inline int cmd_floquet(const Scenario& sc, std::optional<int> n_blocks) {
    const DriveConfig d = sc.effective_drive();
    const FloquetSpec spec{d.delta_mhz, d.h_d_mhz, d.h_i_mhz, d.phi_rad, d.theta_rad, n_blocks.value_or(sc.n_blocks)};
    const auto q = quasi_energies(spec);
    std::vector<std::string> warnings;
    double perturbative = std::numeric_limits<double>::quiet_NaN();
    try {
        perturbative = perturbative_splitting(d.delta_mhz, d.h_d_mhz, d.h_i_mhz).splitting;
    } catch (const Error& e) {
        warnings.push_back(std::string("perturbative splitting unavailable: ") + e.what());
    }
    if (std::abs(d.h_d_mhz - std::sqrt(3.0) * d.delta_mhz) > 0.2 * std::abs(d.delta_mhz))
        warnings.push_back("h_d is outside the trust region of the perturbative formula (|h_d - sqrt(3) delta| < 0.2 delta)");

    const auto table = out_path(sc, "_quasi.csv"), summary = out_path(sc, "_floquet.csv");
    {
        auto out = open_output(table);
        out << "index,quasi_energy_mhz\n";
        for (Eigen::Index i = 0; i < q.quasi_energies.size(); ++i) out << i << ',' << fmt(q.quasi_energies(i)) << '\n';
    }
    {
        auto out = open_output(summary);
        out << "n_blocks,delta_mhz,h_d_mhz,h_i_mhz,rabi_mhz,splitting_numeric_mhz,splitting_perturbative_mhz\n";
        out << spec.n_blocks << ',' << fmt(d.delta_mhz) << ',' << fmt(d.h_d_mhz) << ',' << fmt(d.h_i_mhz) << ','
            << fmt(rabi_frequency(d.delta_mhz, d.h_d_mhz)) << ',' << fmt(q.splitting_at_resonance) << ','
            << fmt(perturbative) << '\n';
    }
    json results;
    results["n_blocks"] = spec.n_blocks;
    results["splitting_numeric_mhz"] = q.splitting_at_resonance;
    results["splitting_perturbative_mhz"] = std::isfinite(perturbative) ? json(perturbative) : json("nan");
    const auto manifest = out_path(sc, "_floquet.manifest.json");
    write_manifest(manifest, "floquet", sc, results, {table.string(), summary.string()}, warnings);
    report({table.string(), summary.string(), manifest.string()}, warnings);
    return kOk;
}

// ---------------------------------------------------------------------------
// fit

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> columns;

    const std::vector<double>& column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return columns[i];
        throw ValidationError("column", "no column '" + name + "'");
    }
};

inline Table read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("input", "cannot open '" + path + "'");
    Table t;
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("input", "empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) t.header.push_back(cell);
    }
    t.columns.resize(t.header.size());
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::size_t c = 0;
        while (std::getline(ss, cell, ',')) {
            if (c >= t.header.size()) throw ValidationError("input", "row " + std::to_string(row) + " has too many cells");
            try {
                std::size_t used = 0;
                t.columns[c].push_back(std::stod(cell, &used));
                if (used != cell.size()) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw ValidationError("input", "row " + std::to_string(row) + ": '" + cell + "' is not a number");
            }
            ++c;
        }
        if (c != t.header.size()) throw ValidationError("input", "row " + std::to_string(row) + " has too few cells");
    }
    return t;
}

struct FitRequest {
    std::string input;
    std::string model = "damped_cos";
    std::string column = "sz";
    std::string time_column = "t_us";
    std::string out;  ///< optional JSON output path
};

inline int cmd_fit(const FitRequest& req) {
    const Table tab = read_csv(req.input);
    const auto& t = tab.column(req.time_column);
    const auto& y = tab.column(req.column);
    const DecayModel model = req.model == "plain_exp" ? DecayModel::PlainExp : DecayModel::DampedCos;
    json r;
    r["input"] = req.input;
    r["column"] = req.column;
    r["model"] = req.model;
    try {
        const auto f = fit_exp_decay(t, y, model);
        r["t_decay_us"] = std::isfinite(f.t_decay_us) ? json(f.t_decay_us) : json("inf");
        r["params"] = f.params;
        r["residual"] = f.residual;
        r["converged"] = true;
    } catch (const FitFailure& e) {
        r["converged"] = false;
        r["best_params"] = e.best_params();
        r["best_residual"] = e.best_residual();
        std::cout << r.dump(2) << '\n';
        std::cerr << "error: " << e.what() << '\n';
        return kRuntime;
    } catch (const InvalidArgument& e) {
        throw ValidationError("input", e.what());
    }
    if (!req.out.empty()) {
        auto out = open_output(req.out);
        out << r.dump(2) << '\n';
    }
    std::cout << r.dump(2) << '\n';
    return kOk;
}

// ---------------------------------------------------------------------------

inline int cmd_materials() {
    std::cout << "name,electron_spin,nuclear_spin,g,b0_mt,f0_mhz,t1_us,t2_us,wait_us,tau_free_us,needs_cubic_a\n";
    for (const auto& name : preset_names()) {
        const auto p = material_preset(name);
        std::cout << name << ',' << fmt(p.system.electron_spin) << ',' << fmt(p.system.nuclear_spin) << ','
                  << fmt(p.system.g) << ',' << fmt(p.b0_mt) << ',' << fmt(p.f0_mhz) << ','
                  << (p.t1_us ? fmt(*p.t1_us) : "") << ',' << (p.t2_us ? fmt(*p.t2_us) : "") << ','
                  << fmt(p.wait_us) << ',' << fmt(p.tau_free_us) << ','
                  << (p.system.requires_cubic_a ? "yes" : "no") << '\n';
    }
    return kOk;
}

} // namespace spinguard::cli
