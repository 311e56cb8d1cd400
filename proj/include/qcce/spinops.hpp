// spinops.hpp — Spin matrices, tensor-product embedding, Hermitian
// eigendecomposition, and unitary propagators.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "qcce/errors.hpp"

namespace qcce::spinops {

using cxd = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline bool is_half_integer(double s) {
    const double twice = 2.0 * s;
    return std::abs(twice - std::round(twice)) < 1e-9 && std::round(twice) >= 0.0;
}

// --------------------------- spin matrices ----------------------------------

// Angular-momentum matrices for spin s in the |s,m> basis ordered
// m = s, s-1, ..., -s (sz diagonal, descending). Dimensionless, hbar = 1.
// This basis ordering is frozen: every matrix element downstream depends
// on it, and multi-site operators put sites in declaration order.
struct SpinMatrixSet {
    double s = 0.0;
    Matrix sx, sy, sz;

    Eigen::Index dim() const { return sz.rows(); }
};

inline SpinMatrixSet spin_matrices(double s) {
    if (!is_half_integer(s)) {
        throw InvalidSpinError("spin_matrices: s = " + std::to_string(s) +
                               " is not a non-negative half-integer");
    }
    if (s > 20.0) {
        throw InvalidSpinError("spin_matrices: s = " + std::to_string(s) +
                               " exceeds the supported maximum of 20");
    }
    const int d = static_cast<int>(std::lround(2.0 * s)) + 1;
    SpinMatrixSet out;
    out.s = s;
    out.sz = Matrix::Zero(d, d);
    Matrix sp = Matrix::Zero(d, d); // raising operator
    for (int i = 0; i < d; ++i) {
        const double m = s - i;
        out.sz(i, i) = m;
        if (i > 0) sp(i - 1, i) = std::sqrt(s * (s + 1.0) - m * (m + 1.0));
    }
    const Matrix sm = sp.adjoint();
    out.sx = 0.5 * (sp + sm);
    out.sy = cxd(0.0, -0.5) * (sp - sm);
    return out;
}

// --------------------------- tensor-product embedding -----------------------

inline Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

// An operator on a product space together with the per-site dimensions that
// define its factorization.
struct ProductOperator {
    std::vector<int> site_dims;
    Matrix matrix;

    Eigen::Index dim() const { return matrix.rows(); }
};

// identity x ... x op x ... x identity, with op at position `site`.
inline ProductOperator embed(const Matrix& op, int site, const std::vector<int>& site_dims) {
    if (site < 0 || site >= static_cast<int>(site_dims.size())) {
        throw ShapeError("embed: site index " + std::to_string(site) + " out of range");
    }
    if (op.rows() != op.cols() || op.rows() != site_dims[static_cast<size_t>(site)]) {
        throw ShapeError("embed: operator dimension " + std::to_string(op.rows()) +
                         " does not match site dimension " +
                         std::to_string(site_dims[static_cast<size_t>(site)]));
    }
    Matrix acc = Matrix::Identity(1, 1);
    for (size_t k = 0; k < site_dims.size(); ++k) {
        if (static_cast<int>(k) == site) {
            acc = kron(acc, op);
        } else {
            acc = kron(acc, Matrix::Identity(site_dims[k], site_dims[k]));
        }
    }
    return ProductOperator{site_dims, std::move(acc)};
}

// Same with operators a, b at two distinct sites. Fills the product directly,
// never forming intermediate matmuls.
inline ProductOperator embed_two(const Matrix& a, int site_a, const Matrix& b, int site_b,
                                 const std::vector<int>& site_dims) {
    if (site_a == site_b) throw ShapeError("embed_two: sites must differ");
    Matrix acc = Matrix::Identity(1, 1);
    for (size_t k = 0; k < site_dims.size(); ++k) {
        if (static_cast<int>(k) == site_a) acc = kron(acc, a);
        else if (static_cast<int>(k) == site_b) acc = kron(acc, b);
        else acc = kron(acc, Matrix::Identity(site_dims[k], site_dims[k]));
    }
    return ProductOperator{site_dims, std::move(acc)};
}

// --------------------------- Hermitian eigensolve ---------------------------

struct EighResult {
    Eigen::VectorXd eigenvalues; // ascending
    Matrix eigenvectors;         // unitary, columns
};

inline void require_hermitian(const Matrix& h, double rel_tol, const char* who) {
    const double norm = h.norm();
    const double resid = (h - h.adjoint()).norm();
    if (resid > rel_tol * std::max(norm, 1.0)) {
        throw NumericalError(std::string(who) + ": input is not Hermitian (residual " +
                             std::to_string(resid) + ", norm " + std::to_string(norm) + ")");
    }
}

inline EighResult eigh(const Matrix& h) {
    require_hermitian(h, 1e-10, "eigh");
    Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (h + h.adjoint()));
    if (solver.info() != Eigen::Success) {
        throw NumericalError("eigh: eigensolver failed to converge");
    }
    EighResult out{solver.eigenvalues(), solver.eigenvectors()};
    const Eigen::Index d = h.rows();
    const double unit_resid = (out.eigenvectors.adjoint() * out.eigenvectors -
                               Matrix::Identity(d, d)).norm();
    if (unit_resid > 1e-10) {
        throw NumericalError("eigh: eigenvector matrix not unitary (residual " +
                             std::to_string(unit_resid) + ")");
    }
    return out;
}

// --------------------------- propagators ------------------------------------

// exp(-i H t) through the full eigendecomposition; exact for Hermitian input.
inline Matrix propagator(const Matrix& h, double t) {
    if (!std::isfinite(t)) throw ConfigError("propagator: time must be finite");
    const EighResult es = eigh(h);
    Vector phases(es.eigenvalues.size());
    for (Eigen::Index i = 0; i < phases.size(); ++i) {
        phases(i) = std::polar(1.0, -es.eigenvalues(i) * t);
    }
    return es.eigenvectors * phases.asDiagonal() * es.eigenvectors.adjoint();
}

} // namespace qcce::spinops
