#ifndef ALGOMIT_LINALG_HPP
#define ALGOMIT_LINALG_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "algomit/error.hpp"

namespace algomit {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

namespace linalg {

inline constexpr double hermitian_tolerance = 1e-10;
inline constexpr double unitary_tolerance = 1e-8;
inline constexpr double default_branch_guard = 1e-6;
inline constexpr double default_rank_tol = 1e-10;

/// Eigen-decomposition of a Hermitian matrix: ascending eigenvalues and the
/// matching orthonormal eigenvectors stored as columns.
struct Spectrum
{
    RVector eigenvalues;
    CMatrix eigenvectors;
};

namespace detail {

inline double max_abs(const CMatrix &a)
{
    return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
}

inline void require_square(const CMatrix &a, const char *op)
{
    if (a.rows() != a.cols()) {
        std::ostringstream msg;
        msg << op << ": expected a square matrix, got " << a.rows() << "x" << a.cols();
        throw ContractViolation(msg.str());
    }
}

inline void require_hermitian(const CMatrix &a, const char *op)
{
    require_square(a, op);
    const double scale = std::max(1.0, max_abs(a));
    const double asym = max_abs(a - a.adjoint());
    if (!(asym <= hermitian_tolerance * scale)) {
        std::ostringstream msg;
        msg << op << ": matrix is not Hermitian (max |A - A^H| = " << asym << ")";
        throw ContractViolation(msg.str());
    }
}

// Real symmetric inputs (every spin chain built here) take the cheaper real path.
inline bool is_real(const CMatrix &a)
{
    return a.size() == 0 || a.imag().cwiseAbs().maxCoeff() == 0.0;
}

} // namespace detail

/// Full eigendecomposition of a Hermitian matrix.
///
/// Throws ContractViolation if `a` departs from Hermiticity by more than
/// 1e-10 (relative to its largest entry). Only the Hermitian part is used.
inline Spectrum eig_hermitian(const CMatrix &a)
{
    detail::require_hermitian(a, "eig_hermitian");
    Spectrum out;
    if (detail::is_real(a)) {
        const RMatrix sym = 0.5 * (a.real() + a.real().transpose());
        Eigen::SelfAdjointEigenSolver<RMatrix> solver(sym);
        out.eigenvalues = solver.eigenvalues();
        out.eigenvectors = solver.eigenvectors().cast<cplx>();
        return out;
    }
    const CMatrix herm = 0.5 * (a + a.adjoint());
    Eigen::SelfAdjointEigenSolver<CMatrix> solver(herm);
    out.eigenvalues = solver.eigenvalues();
    out.eigenvectors = solver.eigenvectors();
    return out;
}

/// Eigenvalues only (ascending). Same contract as eig_hermitian.
inline RVector eigvals_hermitian(const CMatrix &a)
{
    detail::require_hermitian(a, "eigvals_hermitian");
    if (detail::is_real(a)) {
        const RMatrix sym = 0.5 * (a.real() + a.real().transpose());
        return Eigen::SelfAdjointEigenSolver<RMatrix>(sym, Eigen::EigenvaluesOnly).eigenvalues();
    }
    const CMatrix herm = 0.5 * (a + a.adjoint());
    return Eigen::SelfAdjointEigenSolver<CMatrix>(herm, Eigen::EigenvaluesOnly).eigenvalues();
}

inline double ground_energy(const CMatrix &a)
{
    return eigvals_hermitian(a)(0);
}

/// exp(-i H t) through the eigendecomposition of H.
inline CMatrix expm_unitary(const CMatrix &h, double t)
{
    const Spectrum spec = eig_hermitian(h);
    Eigen::VectorXcd phases(spec.eigenvalues.size());
    for (Eigen::Index j = 0; j < phases.size(); ++j) {
        phases(j) = std::exp(cplx(0.0, -spec.eigenvalues(j) * t));
    }
    return spec.eigenvectors * phases.asDiagonal() * spec.eigenvectors.adjoint();
}

/// Principal logarithm of a unitary matrix.
///
/// The complex Schur form of a unitary matrix is diagonal up to rounding, so
/// the logarithm is Q diag(i theta_j) Q^H with theta_j in (-pi, pi). Throws
/// BranchAmbiguity if any eigenphase lies within `guard` radians of +-pi.
inline CMatrix logm_principal(const CMatrix &u, double guard = default_branch_guard)
{
    detail::require_square(u, "logm_principal");
    const auto n = u.rows();
    const double defect = detail::max_abs(u.adjoint() * u - CMatrix::Identity(n, n));
    if (!(defect <= unitary_tolerance)) {
        std::ostringstream msg;
        msg << "logm_principal: matrix is not unitary (max |U^H U - I| = " << defect << ")";
        throw ContractViolation(msg.str());
    }
    Eigen::ComplexSchur<CMatrix> schur(u);
    const CMatrix &tri = schur.matrixT();
    const CMatrix &q = schur.matrixU();

    Eigen::VectorXcd logs(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const double theta = std::arg(tri(j, j));
        if (std::numbers::pi - std::abs(theta) < guard) {
            std::ostringstream msg;
            msg << "logm_principal: eigenphase " << theta << " is within " << guard
                << " rad of the branch cut at +-pi";
            throw BranchAmbiguity(msg.str());
        }
        logs(j) = cplx(0.0, theta);
    }
    return q * logs.asDiagonal() * q.adjoint();
}

/// Moore-Penrose pseudoinverse with its numerical rank.
struct Pseudoinverse
{
    RMatrix matrix;
    Eigen::Index rank = 0;
};

/// SVD pseudoinverse; singular values below `rank_tol * sigma_max` count as zero.
inline Pseudoinverse pinv_min_norm(const RMatrix &m, double rank_tol = default_rank_tol)
{
    Pseudoinverse out;
    out.matrix = RMatrix::Zero(m.cols(), m.rows());
    if (m.size() == 0) {
        return out;
    }
    Eigen::JacobiSVD<RMatrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const RVector &sigma = svd.singularValues();
    if (sigma.size() == 0 || sigma(0) == 0.0) {
        return out;
    }
    const double cutoff = rank_tol * sigma(0);
    for (Eigen::Index j = 0; j < sigma.size(); ++j) {
        if (sigma(j) > cutoff) {
            ++out.rank;
        }
    }
    const auto r = out.rank;
    out.matrix = svd.matrixV().leftCols(r) * sigma.head(r).cwiseInverse().asDiagonal() *
                 svd.matrixU().leftCols(r).transpose();
    return out;
}

} // namespace linalg
} // namespace algomit

#endif // ALGOMIT_LINALG_HPP
