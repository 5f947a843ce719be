#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "spinguard/errors.hpp"
#include "spinguard/spinops.hpp"
#include "spinguard/units.hpp"

namespace spinguard {

struct FloquetSpec {
    double delta_mhz = 0.0;
    double h_d_mhz = 0.0;
    double h_i_mhz = 0.0;
    double phi_rad = 0.0;
    double theta_rad = 0.0;
    int n_blocks = 7;

    void validate() const {
        if (n_blocks < 1) throw InvalidArgument("floquet: n_blocks must be >= 1");
        for (double v : {delta_mhz, h_d_mhz, h_i_mhz, phi_rad, theta_rad})
            if (!std::isfinite(v)) throw InvalidArgument("floquet: parameters must be finite");
    }
};

struct FloquetSpectrum {
    Eigen::VectorXd quasi_energies;  ///< ascending, MHz
    double splitting_at_resonance = 0.0;
    int truncation = 0;
};

inline double rabi_frequency(double delta_mhz, double h_d_mhz) { return std::hypot(delta_mhz, h_d_mhz); }

/// Drive amplitude for which the Rabi frequency equals n times the detuning.
inline double resonant_drive(int n, double delta_mhz) {
    if (n < 1) throw InvalidArgument("resonant_drive: n must be >= 1");
    if (!(delta_mhz > 0.0)) throw InvalidArgument("resonant_drive: delta must be > 0");
    return delta_mhz * std::sqrt(static_cast<double>(n) * n - 1.0);
}

namespace detail {
inline Eigen::Matrix2cd floquet_block(const FloquetSpec& s) {
    using namespace std::complex_literals;
    Eigen::Matrix2cd h0;
    const std::complex<double> off = 0.5 * s.h_d_mhz * std::exp(-1i * (s.phi_rad - units::pi / 2.0));
    h0 << 0.5 * s.delta_mhz, off, std::conj(off), -0.5 * s.delta_mhz;
    return h0;
}
} // namespace detail

/// Truncated Shirley-Floquet matrix. Block k (k = 0..n-1) holds H0 - 2k delta; neighbouring
/// blocks couple the lower state of block k to the upper state of block k+1 through the image.
inline SpinMatrix shirley_floquet_matrix(const FloquetSpec& s) {
    using namespace std::complex_literals;
    s.validate();
    const Eigen::Index n = 2 * static_cast<Eigen::Index>(s.n_blocks);
    SpinMatrix k = SpinMatrix::Zero(n, n);
    const Eigen::Matrix2cd h0 = detail::floquet_block(s);
    for (int b = 0; b < s.n_blocks; ++b) {
        k.block<2, 2>(2 * b, 2 * b) = h0 - Eigen::Matrix2cd::Identity() * (2.0 * b * s.delta_mhz);
    }
    const std::complex<double> img = 0.5 * s.h_i_mhz * std::exp(-1i * (s.phi_rad + units::pi / 2.0 + s.theta_rad));
    for (int b = 0; b + 1 < s.n_blocks; ++b) {
        k(2 * b + 1, 2 * b + 2) = img;
        k(2 * b + 2, 2 * b + 1) = std::conj(img);
    }
    return k;
}

/// Quasi-energies plus the gap opened at the central F_R = 2 delta crossing. The two
/// levels are followed by overlap with the image-free eigenvectors, not by ordering.
inline FloquetSpectrum quasi_energies(const FloquetSpec& s) {
    const SpinMatrix k = shirley_floquet_matrix(s);
    const auto eig = hermitian_eig(k);
    FloquetSpectrum out;
    out.quasi_energies = eig.values;
    out.truncation = s.n_blocks;
    if (s.n_blocks < 2 || s.h_i_mhz == 0.0) return out;

    // image-free reference: lower state of block c and upper state of block c+1
    const int c = (s.n_blocks - 2) / 2;
    const auto local = hermitian_eig(detail::floquet_block(s));
    SpinVector lower = SpinVector::Zero(k.rows()), upper = SpinVector::Zero(k.rows());
    lower.segment<2>(2 * c) = local.vectors.col(0);
    upper.segment<2>(2 * c + 2) = local.vectors.col(1);

    std::vector<std::pair<double, Eigen::Index>> weight;
    for (Eigen::Index j = 0; j < k.rows(); ++j) {
        const double w = std::norm(lower.dot(eig.vectors.col(j))) + std::norm(upper.dot(eig.vectors.col(j)));
        weight.emplace_back(w, j);
    }
    std::partial_sort(weight.begin(), weight.begin() + 2, weight.end(), std::greater<>());
    out.splitting_at_resonance = std::abs(eig.values(weight[0].second) - eig.values(weight[1].second));
    return out;
}

struct PerturbativeSplitting {
    double e_plus = 0.0;
    double e_minus = 0.0;
    double splitting = 0.0;  ///< image-induced part, 2 (h_i/4)^2 [..] / delta
};

/// Second-order closed form near h_d = sqrt(3) delta; trust region |h_d - sqrt(3) delta| < 0.2 delta.
inline PerturbativeSplitting perturbative_splitting(double delta_mhz, double h_d_mhz, double h_i_mhz) {
    if (delta_mhz == 0.0) throw DivisionByZero("perturbative_splitting: delta = 0");
    if (!(delta_mhz > 0.0)) throw InvalidArgument("perturbative_splitting: delta must be > 0");
    const double sqrt3 = std::sqrt(3.0);
    const double f_r = rabi_frequency(delta_mhz, h_d_mhz);
    const double q = h_i_mhz / 4.0;
    const double second = (q * q / delta_mhz) * (3.0 - 5.0 * sqrt3 * (h_d_mhz - delta_mhz * sqrt3) / (2.0 * delta_mhz));
    PerturbativeSplitting out;
    out.e_plus = -delta_mhz + (0.5 * f_r - delta_mhz) + second;
    out.e_minus = -delta_mhz - (0.5 * f_r - delta_mhz) - second;
    out.splitting = 2.0 * second;
    return out;
}

} // namespace spinguard
