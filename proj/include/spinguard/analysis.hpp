#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>
#include <unsupported/Eigen/LevenbergMarquardt>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "spinguard/dynamics.hpp"
#include "spinguard/errors.hpp"
#include "spinguard/units.hpp"

namespace spinguard {

enum class Window { Hann, Rectangular };

inline const char* window_name(Window w) { return w == Window::Hann ? "hann" : "rectangular"; }

struct Spectrum {
    std::vector<double> freq;       ///< MHz, 0..Nyquist
    std::vector<double> amplitude;  ///< one-sided, >= 0
    Window window = Window::Hann;
    int zero_pad_factor = 4;
};

struct FftOptions {
    Window window = Window::Hann;
    int zero_pad_factor = 4;
};

/// Mean-subtracted, windowed, zero-padded one-sided magnitude spectrum of a uniformly sampled
/// signal. Scaled so that sum(amplitude^2) equals the energy of the windowed signal.
inline Spectrum fft_spectrum(const std::vector<double>& t, const std::vector<double>& y, const FftOptions& opt = {}) {
    if (t.size() != y.size()) throw InvalidArgument("fft_spectrum: t and y differ in length");
    if (t.size() < 16) throw InvalidArgument("fft_spectrum: need at least 16 samples");
    if (opt.zero_pad_factor < 1) throw InvalidArgument("fft_spectrum: zero_pad_factor must be >= 1");
    TimeSeries probe;
    probe.t = t;
    probe.validate_uniform();

    const std::size_t n = y.size();
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(n);

    std::size_t m = n * static_cast<std::size_t>(opt.zero_pad_factor);
    if (m % 2) ++m;
    std::vector<double> buf(m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double w = opt.window == Window::Hann
                             ? 0.5 - 0.5 * std::cos(units::two_pi * static_cast<double>(i) / static_cast<double>(n - 1))
                             : 1.0;
        buf[i] = w * (y[i] - mean);
    }
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> spec;
    fft.fwd(spec, buf);

    Spectrum out;
    out.window = opt.window;
    out.zero_pad_factor = opt.zero_pad_factor;
    const double dt = t[1] - t[0];
    const double md = static_cast<double>(m);
    for (std::size_t k = 0; k <= m / 2; ++k) {
        const double c = (k == 0 || k == m / 2) ? 1.0 : 2.0;
        out.freq.push_back(static_cast<double>(k) / (md * dt));
        out.amplitude.push_back(std::abs(spec[k]) * std::sqrt(c / md));
    }
    return out;
}

inline Spectrum fft_spectrum(const TimeSeries& series, char component = 'z', const FftOptions& opt = {}) {
    return fft_spectrum(series.t, series.component(component), opt);
}

// ---------------------------------------------------------------------------
// fitting

enum class DecayModel { PlainExp, DampedCos };

struct FitResult {
    double t_decay_us = 0.0;
    /// plain_exp: A, T, offset; damped_cos: A, T, F (MHz), psi (rad), offset
    std::vector<double> params;
    double residual = 0.0;  ///< 2-norm of y - model
};

namespace detail {

// parameters are (A, k, c) or (A, k, F, psi, c) with k = 1/T
struct DecayFunctor : Eigen::DenseFunctor<double> {
    const std::vector<double>* t;
    const std::vector<double>* y;
    DecayModel model;

    DecayFunctor(const std::vector<double>& tt, const std::vector<double>& yy, DecayModel m)
        : Eigen::DenseFunctor<double>(m == DecayModel::PlainExp ? 3 : 5, static_cast<int>(tt.size())), t(&tt),
          y(&yy), model(m) {}

    double eval(const Eigen::VectorXd& p, double tt) const {
        if (model == DecayModel::PlainExp) return p(0) * std::exp(-p(1) * tt) + p(2);
        return p(0) * std::exp(-p(1) * tt) * std::cos(units::two_pi * p(2) * tt + p(3)) + p(4);
    }

    int operator()(const Eigen::VectorXd& p, Eigen::VectorXd& f) const {
        for (std::size_t i = 0; i < t->size(); ++i) f(static_cast<Eigen::Index>(i)) = eval(p, (*t)[i]) - (*y)[i];
        return 0;
    }

    int df(const Eigen::VectorXd& p, Eigen::MatrixXd& j) const {
        for (std::size_t i = 0; i < t->size(); ++i) {
            const double tt = (*t)[i];
            const auto r = static_cast<Eigen::Index>(i);
            const double e = std::exp(-p(1) * tt);
            if (model == DecayModel::PlainExp) {
                j(r, 0) = e;
                j(r, 1) = -p(0) * tt * e;
                j(r, 2) = 1.0;
            } else {
                const double ph = units::two_pi * p(2) * tt + p(3);
                const double c = std::cos(ph), s = std::sin(ph);
                j(r, 0) = e * c;
                j(r, 1) = -p(0) * tt * e * c;
                j(r, 2) = -p(0) * e * s * units::two_pi * tt;
                j(r, 3) = -p(0) * e * s;
                j(r, 4) = 1.0;
            }
        }
        return 0;
    }
};

// Linear least squares for the amplitude-like parameters at fixed (k, F).
inline std::pair<Eigen::VectorXd, double> project_linear(const std::vector<double>& t, const std::vector<double>& y,
                                                         DecayModel model, double k, double f) {
    const auto n = static_cast<Eigen::Index>(t.size());
    const int cols = model == DecayModel::PlainExp ? 2 : 3;
    Eigen::MatrixXd a(n, cols);
    Eigen::VectorXd b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double e = std::exp(-k * t[i]);
        b(i) = y[i];
        if (model == DecayModel::PlainExp) {
            a(i, 0) = e;
            a(i, 1) = 1.0;
        } else {
            a(i, 0) = e * std::cos(units::two_pi * f * t[i]);
            a(i, 1) = e * std::sin(units::two_pi * f * t[i]);
            a(i, 2) = 1.0;
        }
    }
    const Eigen::VectorXd c = a.colPivHouseholderQr().solve(b);
    return {c, (a * c - b).norm()};
}

inline Eigen::VectorXd to_model_params(const Eigen::VectorXd& c, DecayModel model, double k, double f) {
    Eigen::VectorXd p(model == DecayModel::PlainExp ? 3 : 5);
    if (model == DecayModel::PlainExp) {
        p << c(0), k, c(1);
    } else {
        // a cos(wt) + b sin(wt) = A cos(wt + psi) with A = hypot, psi = atan2(-b, a)
        p << std::hypot(c(0), c(1)), k, f, std::atan2(-c(1), c(0)), c(2);
    }
    return p;
}

// Dominant frequency of y - mean: FFT peak on uniform grids, direct periodogram otherwise.
inline double dominant_frequency(const std::vector<double>& t, const std::vector<double>& y) {
    const std::size_t n = t.size();
    if (n >= 16) {
        TimeSeries probe;
        probe.t = t;
        bool uniform = true;
        try {
            probe.validate_uniform();
        } catch (const InvalidArgument&) {
            uniform = false;
        }
        if (uniform) {
            const Spectrum s = fft_spectrum(t, y, {Window::Rectangular, 4});
            std::size_t best = 1;
            for (std::size_t k = 1; k < s.amplitude.size(); ++k)
                if (s.amplitude[k] > s.amplitude[best]) best = k;
            return s.freq[best];
        }
    }
    const double span = t.back() - t.front();
    const double nyquist = 0.5 * static_cast<double>(n - 1) / span;
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(n);
    const double df = 0.25 / span;
    double best_f = 0.0, best_p = -1.0;
    for (double f = df; f < nyquist; f += df) {
        std::complex<double> acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += (y[i] - mean) * std::polar(1.0, -units::two_pi * f * t[i]);
        if (std::norm(acc) > best_p) {
            best_p = std::norm(acc);
            best_f = f;
        }
    }
    return best_f;
}

// Decay rate from a log-linear fit of per-period envelope maxima of |y - offset|.
inline double envelope_rate(const std::vector<double>& t, const std::vector<double>& y, double f, double offset) {
    const double span = t.back() - t.front();
    const double window = f > 0.0 ? 1.0 / f : span / 8.0;
    std::vector<double> tm, lm;
    std::size_t i = 0;
    while (i < t.size()) {
        const double end = t[i] + window;
        double best = 0.0, best_t = t[i];
        for (; i < t.size() && t[i] < end; ++i)
            if (std::abs(y[i] - offset) > best) {
                best = std::abs(y[i] - offset);
                best_t = t[i];
            }
        if (best > 0.0) {
            tm.push_back(best_t);
            lm.push_back(std::log(best));
        }
    }
    if (tm.size() < 2) return 1.0 / span;
    double st = 0, sl = 0, stt = 0, stl = 0;
    const double m = static_cast<double>(tm.size());
    for (std::size_t k = 0; k < tm.size(); ++k) {
        st += tm[k];
        sl += lm[k];
        stt += tm[k] * tm[k];
        stl += tm[k] * lm[k];
    }
    const double slope = (m * stl - st * sl) / (m * stt - st * st);
    return std::max(-slope, 1e-3 / span);
}

} // namespace detail

/// Least-squares fit of A e^{-t/T} + c or A e^{-t/T} cos(2 pi F t + psi) + c.
/// Initial values come from a deterministic variable-projection scan (T) and the
/// periodogram peak (F); Levenberg-Marquardt refines all parameters.
inline FitResult fit_exp_decay(const std::vector<double>& t, const std::vector<double>& y_in, DecayModel model,
                               int max_evaluations = 4000) {
    if (t.size() != y_in.size()) throw InvalidArgument("fit_exp_decay: t and y differ in length");
    if (t.size() < 8) throw InvalidArgument("fit_exp_decay: need at least 8 points");
    if (std::all_of(y_in.begin(), y_in.end(), [&](double v) { return v == y_in.front(); }))
        throw InvalidArgument("fit_exp_decay: y is constant");
    // work on y / max|y| so the stopping tests do not depend on the overall scale
    double scale = 0.0;
    for (double v : y_in) scale = std::max(scale, std::abs(v));
    std::vector<double> y(y_in.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = y_in[i] / scale;
    const double span = t.back() - t.front();
    if (!(span > 0.0)) throw InvalidArgument("fit_exp_decay: t must span a positive interval");

    double f0 = 0.0, k_center = 1.0 / span;
    if (model == DecayModel::DampedCos) {
        f0 = detail::dominant_frequency(t, y);
        double mean = 0.0;
        for (double v : y) mean += v;
        k_center = detail::envelope_rate(t, y, f0, mean / static_cast<double>(y.size()));
    }
    // scan k over three decades around the centre value
    double best_res = std::numeric_limits<double>::infinity();
    Eigen::VectorXd p0;
    for (int i = 0; i <= 120; ++i) {
        const double k = k_center * std::pow(10.0, -1.5 + 3.0 * i / 120.0);
        const auto [c, res] = detail::project_linear(t, y, model, k, f0);
        if (res < best_res) {
            best_res = res;
            p0 = detail::to_model_params(c, model, k, f0);
        }
    }

    detail::DecayFunctor functor(t, y, model);
    Eigen::LevenbergMarquardt<detail::DecayFunctor> lm(functor);
    lm.setMaxfev(max_evaluations);
    lm.setXtol(1e-14);
    lm.setFtol(1e-14);
    lm.setGtol(0.0);
    Eigen::VectorXd p = p0;
    const auto status = lm.minimize(p);

    Eigen::VectorXd f(static_cast<Eigen::Index>(t.size()));
    functor(p, f);
    const double residual = f.norm();
    const bool finite = p.allFinite() && std::isfinite(residual);
    using namespace Eigen::LevenbergMarquardtSpace;
    if (!finite || status == ImproperInputParameters || status == TooManyFunctionEvaluation || status == UserAsked) {
        Eigen::VectorXd best = (finite && residual < best_res) ? p : p0;
        best(0) *= scale;
        best(best.size() - 1) *= scale;
        throw FitFailure("fit_exp_decay did not converge", std::vector<double>(best.data(), best.data() + best.size()),
                         scale * std::min(best_res, finite ? residual : best_res));
    }
    p(0) *= scale;
    p(p.size() - 1) *= scale;

    FitResult out;
    out.residual = scale * residual;
    const double k = p(1);
    out.t_decay_us = k > 0.0 ? 1.0 / k : units::infinity;
    if (model == DecayModel::PlainExp) {
        out.params = {p(0), out.t_decay_us, p(2)};
    } else {
        double a = p(0), psi = p(3), freq = p(2);
        if (a < 0) {
            a = -a;
            psi += units::pi;
        }
        if (freq < 0) {
            freq = -freq;
            psi = -psi;
        }
        out.params = {a, out.t_decay_us, freq, std::remainder(psi, units::two_pi), p(4)};
    }
    return out;
}

// ---------------------------------------------------------------------------
// peaks

struct PeakOptions {
    double half_window_mhz = 0.0;       ///< 0 = whole spectrum
    double prominence_fraction = 0.05;  ///< of the largest amplitude inside the window
};

struct SplittingResult {
    int peak_count = 0;
    double splitting = 0.0;              ///< MHz, between the two dominant peaks
    std::vector<double> frequencies;     ///< refined, ascending
    std::vector<double> intensities;     ///< same order
};

/// Local maxima near `around` whose topographic prominence clears the threshold.
inline SplittingResult measure_splitting(const Spectrum& spec, double around, const PeakOptions& opt = {}) {
    if (spec.freq.empty() || spec.freq.size() != spec.amplitude.size())
        throw InvalidArgument("measure_splitting: empty spectrum");
    const auto& f = spec.freq;
    const auto& a = spec.amplitude;
    const std::size_t n = f.size();
    std::size_t lo = 0, hi = n - 1;
    if (opt.half_window_mhz > 0.0) {
        lo = static_cast<std::size_t>(std::lower_bound(f.begin(), f.end(), around - opt.half_window_mhz) - f.begin());
        hi = static_cast<std::size_t>(std::upper_bound(f.begin(), f.end(), around + opt.half_window_mhz) - f.begin());
        if (hi > 0) --hi;
    }
    SplittingResult out;
    if (lo >= hi) return out;
    const double top = *std::max_element(a.begin() + static_cast<std::ptrdiff_t>(lo),
                                         a.begin() + static_cast<std::ptrdiff_t>(hi) + 1);
    if (!(top > 0.0)) return out;
    const double threshold = opt.prominence_fraction * top;

    struct Peak {
        double freq, height;
    };
    std::vector<Peak> peaks;
    for (std::size_t i = lo + 1; i < hi; ++i) {
        if (!(a[i] > a[i - 1] && a[i] >= a[i + 1])) continue;
        double left_min = a[i], right_min = a[i];
        for (std::size_t j = i; j-- > lo;) {
            if (a[j] > a[i]) break;
            left_min = std::min(left_min, a[j]);
        }
        for (std::size_t j = i + 1; j <= hi; ++j) {
            if (a[j] > a[i]) break;
            right_min = std::min(right_min, a[j]);
        }
        if (a[i] - std::max(left_min, right_min) < threshold) continue;
        // parabolic refinement of position and height
        const double y0 = a[i - 1], y1 = a[i], y2 = a[i + 1];
        const double den = y0 - 2.0 * y1 + y2;
        const double shift = den != 0.0 ? 0.5 * (y0 - y2) / den : 0.0;
        const double step = f[i + 1] - f[i];
        peaks.push_back({f[i] + shift * step, y1 - 0.25 * (y0 - y2) * shift});
    }
    out.peak_count = static_cast<int>(peaks.size());
    for (const auto& p : peaks) {
        out.frequencies.push_back(p.freq);
        out.intensities.push_back(p.height);
    }
    if (peaks.size() >= 2) {
        std::vector<Peak> sorted = peaks;
        std::partial_sort(sorted.begin(), sorted.begin() + 2, sorted.end(),
                          [](const Peak& x, const Peak& y) { return x.height > y.height; });
        out.splitting = std::abs(sorted[0].freq - sorted[1].freq);
    }
    return out;
}

/// Amplitude-weighted width (FWHM by linear interpolation) of the highest point near `around`.
inline double peak_fwhm(const Spectrum& spec, double around, double half_window_mhz) {
    const auto& f = spec.freq;
    const auto& a = spec.amplitude;
    std::size_t best = 0;
    double best_a = -1.0;
    for (std::size_t i = 0; i < f.size(); ++i)
        if (std::abs(f[i] - around) <= half_window_mhz && a[i] > best_a) {
            best_a = a[i];
            best = i;
        }
    if (best_a <= 0.0) return units::infinity;
    const double half = 0.5 * best_a;
    std::size_t l = best, r = best;
    while (l > 0 && a[l] > half) --l;
    while (r + 1 < a.size() && a[r] > half) ++r;
    auto cross = [&](std::size_t i, std::size_t j) {
        if (a[i] == a[j]) return f[i];
        return f[i] + (half - a[i]) * (f[j] - f[i]) / (a[j] - a[i]);
    };
    return cross(r, r - 1) - cross(l, l + 1);
}

// ---------------------------------------------------------------------------
// sweeps

struct SweepGrid {
    std::string param;
    std::vector<double> values;  ///< swept parameter, one per row
    std::vector<double> axis;    ///< t (us) or f (MHz)
    Eigen::MatrixXd rows;        ///< values.size() x axis.size(); NaN rows for failed runs
    std::vector<std::string> errors;  ///< empty string where the run succeeded
};

struct SweepOptions {
    unsigned jobs = 0;  ///< 0 = hardware concurrency
    char component = 'z';
};

/// Runs `run(value) -> TimeSeries` for each value on a worker pool; results keep input order.
template <class Runner>
SweepGrid sweep(const std::string& param, const std::vector<double>& values, Runner&& run,
                const SweepOptions& opt = {}) {
    if (values.empty()) throw InvalidArgument("sweep: no values");
    std::vector<TimeSeries> results(values.size());
    std::vector<std::string> errors(values.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < values.size(); i = next++) {
            try {
                results[i] = run(values[i]);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    unsigned jobs = opt.jobs ? opt.jobs : std::max(1u, std::thread::hardware_concurrency());
    jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, values.size()));
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    SweepGrid grid;
    grid.param = param;
    grid.values = values;
    grid.errors = errors;
    for (std::size_t i = 0; i < values.size(); ++i)
        if (errors[i].empty()) {
            grid.axis = results[i].t;
            break;
        }
    const auto cols = static_cast<Eigen::Index>(grid.axis.size());
    grid.rows = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(values.size()), cols,
                                          std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!errors[i].empty()) continue;
        const auto& comp = results[i].component(opt.component);
        if (static_cast<Eigen::Index>(comp.size()) != cols) {
            grid.errors[i] = "time grid differs from the first row";
            continue;
        }
        for (Eigen::Index c = 0; c < cols; ++c) grid.rows(static_cast<Eigen::Index>(i), c) = comp[c];
    }
    return grid;
}

/// FFT of every row; optionally normalised to the global maximum.
inline SweepGrid fft_grid(const SweepGrid& time_grid, const FftOptions& fopt = {}, bool normalize = true) {
    SweepGrid out;
    out.param = time_grid.param;
    out.values = time_grid.values;
    out.errors = time_grid.errors;
    const auto nrow = static_cast<Eigen::Index>(time_grid.values.size());
    for (Eigen::Index r = 0; r < nrow; ++r) {
        if (!time_grid.errors[static_cast<std::size_t>(r)].empty()) continue;
        std::vector<double> y(time_grid.rows.cols());
        for (Eigen::Index c = 0; c < time_grid.rows.cols(); ++c) y[c] = time_grid.rows(r, c);
        const Spectrum s = fft_spectrum(time_grid.axis, y, fopt);
        if (out.axis.empty()) {
            out.axis = s.freq;
            out.rows = Eigen::MatrixXd::Constant(nrow, static_cast<Eigen::Index>(s.freq.size()),
                                                 std::numeric_limits<double>::quiet_NaN());
        }
        for (std::size_t c = 0; c < s.amplitude.size(); ++c) out.rows(r, static_cast<Eigen::Index>(c)) = s.amplitude[c];
    }
    if (normalize && out.rows.size() > 0) {
        double top = 0.0;
        for (Eigen::Index i = 0; i < out.rows.size(); ++i)
            if (std::isfinite(out.rows.data()[i])) top = std::max(top, out.rows.data()[i]);
        if (top > 0.0) out.rows /= top;
    }
    return out;
}

} // namespace spinguard
