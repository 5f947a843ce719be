#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include <cmath>
#include <complex>
#include <map>
#include <string>
#include <utility>

#include "spinguard/errors.hpp"
#include "spinguard/units.hpp"

namespace spinguard {

using Complex = std::complex<double>;
using SpinMatrix = Eigen::MatrixXcd;
using SpinVector = Eigen::VectorXcd;

/// Spin quantum number stored as 2S so that half-integers are exact.
class Spin {
public:
    static Spin from_value(double s) {
        const double twice = 2.0 * s;
        const double rounded = std::round(twice);
        if (!(s > 0.0) || std::abs(twice - rounded) > 1e-9)
            throw InvalidArgument("spin must be a positive half-integer, got " + std::to_string(s));
        return Spin(static_cast<int>(rounded));
    }
    static Spin from_twice(int twice) {
        if (twice <= 0) throw InvalidArgument("spin must be a positive half-integer");
        return Spin(twice);
    }

    double value() const noexcept { return 0.5 * twice_; }
    int twice() const noexcept { return twice_; }
    Eigen::Index dim() const noexcept { return twice_ + 1; }
    double casimir() const noexcept { return value() * (value() + 1.0); }

    /// Magnetic quantum number of basis row `i` (row 0 is m = +S).
    double m_of(Eigen::Index i) const noexcept { return value() - static_cast<double>(i); }

    friend bool operator==(Spin, Spin) = default;

private:
    explicit Spin(int twice) : twice_(twice) {}
    int twice_;
};

struct SpinOperators {
    SpinMatrix sx, sy, sz, splus, sminus;
};

/// Angular-momentum matrices in the basis m = +S, S-1, ..., -S.
inline SpinOperators spin_matrices(Spin spin) {
    const Eigen::Index n = spin.dim();
    const double s = spin.value();
    SpinOperators ops;
    ops.sz = SpinMatrix::Zero(n, n);
    ops.splus = SpinMatrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double m = spin.m_of(i);
        ops.sz(i, i) = m;
        // S+ |m> = sqrt(S(S+1) - m(m+1)) |m+1>, and |m+1> sits one row above |m>.
        if (i > 0) ops.splus(i - 1, i) = std::sqrt(s * (s + 1.0) - m * (m + 1.0));
    }
    ops.sminus = ops.splus.adjoint();
    ops.sx = 0.5 * (ops.splus + ops.sminus);
    ops.sy = (ops.splus - ops.sminus) / Complex(0.0, 2.0);
    return ops;
}

inline SpinOperators spin_matrices(double s) { return spin_matrices(Spin::from_value(s)); }

inline SpinMatrix identity(Eigen::Index n) { return SpinMatrix::Identity(n, n); }

inline SpinMatrix kron(const SpinMatrix& a, const SpinMatrix& b) {
    SpinMatrix out = Eigen::kroneckerProduct(a, b);
    return out;
}

inline double max_abs(const SpinMatrix& m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

/// Largest entrywise deviation from Hermiticity.
inline double hermiticity_error(const SpinMatrix& m) {
    return max_abs(m - m.adjoint());
}

inline bool is_hermitian(const SpinMatrix& m, double tol = 1e-10) {
    return m.rows() == m.cols() && hermiticity_error(m) <= tol * std::max(1.0, max_abs(m));
}

// ---------------------------------------------------------------------------
// Stevens operators (extended Stevens convention as tabulated by Abragam and
// Bleaney; identical to EasySpin's stev()). Only the five (k, q) pairs used by
// tetragonal crystal-field Hamiltonians are provided.

using StevensKey = std::pair<int, int>;

/// Crystal-field coefficients B_k^q in MHz keyed by (k, q).
struct StevensCoefficients {
    std::map<StevensKey, double> terms;

    bool empty() const noexcept { return terms.empty(); }
};

inline bool stevens_supported(int k, int q) {
    return (k == 2 && q == 0) || (k == 4 && (q == 0 || q == 4)) || (k == 6 && (q == 0 || q == 4));
}

inline SpinMatrix stevens_operator(int k, int q, Spin spin) {
    if (!stevens_supported(k, q))
        throw UnsupportedOperator("Stevens operator O_" + std::to_string(k) + "^" + std::to_string(q) +
                                  " is not supported");
    if (k > spin.twice())
        throw InvalidArgument("Stevens rank k = " + std::to_string(k) + " exceeds 2S for S = " +
                              std::to_string(spin.value()));

    const auto ops = spin_matrices(spin);
    const Eigen::Index n = spin.dim();
    const SpinMatrix one = identity(n);
    const double x = spin.casimir();
    const SpinMatrix sz2 = ops.sz * ops.sz;
    const SpinMatrix sz4 = sz2 * sz2;
    const SpinMatrix sz6 = sz4 * sz2;
    const SpinMatrix sp2 = ops.splus * ops.splus;
    const SpinMatrix sm2 = ops.sminus * ops.sminus;
    const SpinMatrix ladder4 = sp2 * sp2 + sm2 * sm2;

    SpinMatrix out;
    if (k == 2) {
        out = 3.0 * sz2 - x * one;
    } else if (k == 4 && q == 0) {
        out = 35.0 * sz4 - (30.0 * x - 25.0) * sz2 + (3.0 * x * x - 6.0 * x) * one;
    } else if (k == 4) {
        out = 0.5 * ladder4;
    } else if (q == 0) {
        out = 231.0 * sz6 - (315.0 * x - 735.0) * sz4 + (105.0 * x * x - 525.0 * x + 294.0) * sz2 +
              (-5.0 * x * x * x + 40.0 * x * x - 60.0 * x) * one;
    } else {
        const SpinMatrix inner = 11.0 * sz2 - (x + 38.0) * one;
        out = 0.25 * (inner * ladder4 + ladder4 * inner);
    }
    return out;
}

// ---------------------------------------------------------------------------

struct Eigensystem {
    Eigen::VectorXd values;  ///< ascending
    SpinMatrix vectors;      ///< columns are eigenvectors
};

/// Diagonalises a Hermitian matrix. The input is symmetrised as (M + M^dagger)/2
/// before solving so that assembly round-off does not leak into the spectrum.
inline Eigensystem hermitian_eig(const SpinMatrix& m, double tol = 1e-10) {
    if (m.rows() != m.cols() || m.rows() == 0)
        throw InvalidArgument("hermitian_eig: matrix must be square and non-empty");
    if (!is_hermitian(m, tol))
        throw InvalidArgument("hermitian_eig: matrix is not Hermitian (deviation " +
                              std::to_string(hermiticity_error(m)) + ")");
    const SpinMatrix sym = 0.5 * (m + m.adjoint());
    Eigen::SelfAdjointEigenSolver<SpinMatrix> solver(sym);
    if (solver.info() != Eigen::Success) throw Error("hermitian_eig: eigensolver did not converge");
    return {solver.eigenvalues(), solver.eigenvectors()};
}

/// U = exp(-i 2 pi H t) with H in MHz and t in microseconds.
inline SpinMatrix matrix_exp_unitary(const SpinMatrix& h, double t_us) {
    const auto eig = hermitian_eig(h);
    const Eigen::VectorXcd phases =
        eig.values.unaryExpr([t_us](double e) { return std::polar(1.0, -units::two_pi * e * t_us); });
    return eig.vectors * phases.asDiagonal() * eig.vectors.adjoint();
}

} // namespace spinguard
