#pragma once

// Conceptor matrix algebra: construction from feature batches, the
// pseudo-Boolean NOT/AND/OR operations, aperture adaptation and capacity.
// A conceptor is a symmetric n x n matrix with eigenvalues in [0, 1] acting
// as a soft projection onto the subspace occupied by a set of feature
// vectors. All operations here are pure functions of their inputs.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "codecl/errors.hpp"

namespace codecl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Batch of feature vectors, one row per sample (b x n).
using FeatureBatch = Matrix;

/// Matrix with mutually orthonormal columns (n x k).
using OrthonormalBasis = Matrix;

/// Relative singular-value threshold separating numerical null space from
/// signal at 64-bit precision.
inline constexpr double kDefaultRankTol = 1e-10;

struct Conceptor {
    Matrix matrix;

    Conceptor() = default;
    explicit Conceptor(Matrix m) : matrix(std::move(m)) {
        if (matrix.rows() != matrix.cols())
            throw ParameterError("conceptor matrix must be square");
    }

    Eigen::Index dim() const { return matrix.rows(); }

    static Conceptor zero(Eigen::Index n) { return Conceptor(Matrix::Zero(n, n)); }
    static Conceptor identity(Eigen::Index n) { return Conceptor(Matrix::Identity(n, n)); }
};

namespace detail {

inline Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

/// Eigendecomposition of a symmetric matrix with eigenvalues sorted
/// descending. Ties broken by the index of the first component of the
/// eigenvector exceeding 1e-12 in magnitude; that component is made
/// positive. Keeps direction selection deterministic across runs.
struct SymmetricEigen {
    Vector values;   // descending
    Matrix vectors;  // columns match values
};

inline Eigen::Index first_significant_row(const Eigen::Ref<const Vector>& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (std::abs(v(i)) > 1e-12) return i;
    return v.size();
}

inline SymmetricEigen symmetric_eigen_sorted(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(m);
    if (es.info() != Eigen::Success)
        throw DataError("eigendecomposition failed to converge");
    const Eigen::Index n = m.rows();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        if (es.eigenvalues()(a) != es.eigenvalues()(b))
            return es.eigenvalues()(a) > es.eigenvalues()(b);
        return first_significant_row(es.eigenvectors().col(a)) <
               first_significant_row(es.eigenvectors().col(b));
    });
    SymmetricEigen out;
    out.values.resize(n);
    out.vectors.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        out.values(i) = es.eigenvalues()(order[static_cast<std::size_t>(i)]);
        Vector col = es.eigenvectors().col(order[static_cast<std::size_t>(i)]);
        const Eigen::Index lead = first_significant_row(col);
        if (lead < n && col(lead) < 0.0) col = -col;
        out.vectors.col(i) = col;
    }
    return out;
}

/// Rebuilds a conceptor from an eigenvalue map, clamping the spectrum to [0, 1].
template <typename Map>
Conceptor remap_spectrum(const Conceptor& c, Map&& map) {
    SymmetricEigen eig = symmetric_eigen_sorted(c.matrix);
    Vector mapped(eig.values.size());
    for (Eigen::Index i = 0; i < eig.values.size(); ++i) {
        const double s = std::clamp(eig.values(i), 0.0, 1.0);
        mapped(i) = std::clamp(map(s), 0.0, 1.0);
    }
    return Conceptor(symmetrized(eig.vectors * mapped.asDiagonal() * eig.vectors.transpose()));
}

/// Moore-Penrose inverse of a symmetric matrix via eigendecomposition.
inline Matrix symmetric_pinv(const Matrix& m, double rank_tol) {
    SymmetricEigen eig = symmetric_eigen_sorted(m);
    const double cutoff = rank_tol * eig.values.cwiseAbs().maxCoeff();
    Vector inv = Vector::Zero(eig.values.size());
    for (Eigen::Index i = 0; i < eig.values.size(); ++i)
        if (std::abs(eig.values(i)) > cutoff) inv(i) = 1.0 / eig.values(i);
    return eig.vectors * inv.asDiagonal() * eig.vectors.transpose();
}

}  // namespace detail

/// Moore-Penrose pseudoinverse of a square matrix. Singular values at or
/// below tol times the largest singular value are treated as zero.
inline Matrix pseudo_inverse(const Matrix& a, double tol = kDefaultRankTol) {
    if (a.rows() != a.cols()) throw ParameterError("pseudo_inverse expects a square matrix");
    if (!a.allFinite()) throw DataError("pseudo_inverse: non-finite entries");
    Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& sv = svd.singularValues();
    if (sv.size() == 0) return a;
    const double cutoff = tol * sv(0);
    Vector inv = Vector::Zero(sv.size());
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > cutoff) inv(i) = 1.0 / sv(i);
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

/// Closed-form conceptor of a feature batch:
///   C = (X^T X / b) (X^T X / b + alpha^-2 I)^-1
/// computed through the eigendecomposition of X^T X / b, which maps each
/// eigenvalue s to s / (s + alpha^-2) and keeps the eigenvectors. The result
/// is explicitly symmetrized; its spectrum lies in [0, 1).
inline Conceptor conceptor_from_batch(const FeatureBatch& x, double alpha) {
    if (alpha <= 0.0) throw ParameterError("aperture alpha must be positive");
    if (x.rows() < 1 || x.cols() < 1) throw ParameterError("feature batch must be non-empty");
    if (!x.allFinite()) throw DataError("feature batch has non-finite entries");
    const double b = static_cast<double>(x.rows());
    const Matrix r = detail::symmetrized((x.transpose() * x) / b);
    const double inv_a2 = 1.0 / (alpha * alpha);
    detail::SymmetricEigen eig = detail::symmetric_eigen_sorted(r);
    Vector s(eig.values.size());
    for (Eigen::Index i = 0; i < eig.values.size(); ++i) {
        const double lam = std::max(eig.values(i), 0.0);
        s(i) = lam / (lam + inv_a2);
    }
    return Conceptor(
        detail::symmetrized(eig.vectors * s.asDiagonal() * eig.vectors.transpose()));
}

/// Logical NOT: the soft complement I - C.
inline Conceptor complement(const Conceptor& c) {
    return Conceptor(Matrix::Identity(c.dim(), c.dim()) - c.matrix);
}

/// Orthonormal basis for the intersection of the column spaces of C and B.
/// Counts eigenvalues above rank_tol (relative to the largest) in each
/// argument, collects the trailing eigenvectors (the numerical null spaces),
/// and returns the eigenvectors of the summed null-space projectors whose
/// eigenvalues fall below the threshold. Both full rank yields a full n x n
/// basis; disjoint column spaces yield an n x 0 matrix.
inline OrthonormalBasis intersection_basis(const Conceptor& c, const Conceptor& b,
                                           double rank_tol = kDefaultRankTol) {
    if (c.dim() != b.dim()) throw ParameterError("intersection_basis: dimension mismatch");
    if (rank_tol <= 0.0 || rank_tol >= 1.0)
        throw ParameterError("intersection_basis: rank_tol must lie in (0,1)");
    const Eigen::Index n = c.dim();
    auto null_basis = [&](const Conceptor& a) {
        detail::SymmetricEigen eig = detail::symmetric_eigen_sorted(a.matrix);
        const double cutoff = rank_tol * std::max(eig.values.cwiseAbs().maxCoeff(), 0.0);
        Eigen::Index k = 0;
        while (k < n && eig.values(k) > cutoff) ++k;
        return Matrix(eig.vectors.rightCols(n - k));
    };
    const Matrix nc = null_basis(c);
    const Matrix nb = null_basis(b);
    Matrix joined = Matrix::Zero(n, n);
    if (nc.cols() > 0) joined += nc * nc.transpose();
    if (nb.cols() > 0) joined += nb * nb.transpose();
    detail::SymmetricEigen eig = detail::symmetric_eigen_sorted(joined);
    const double cutoff = rank_tol * std::max(eig.values.cwiseAbs().maxCoeff(), 0.0);
    Eigen::Index k = 0;
    while (k < n && eig.values(k) > cutoff) ++k;
    return eig.vectors.rightCols(n - k);
}

/// Logical AND via the generalized form
///   C ^ B = D (D^T (C+ + B+ - I) D)^-1 D^T
/// where D spans the intersection of the column spaces and C+, B+ are
/// pseudoinverses. Valid for rank-deficient arguments; coincides with the
/// invertible-only form (C^-1 + B^-1 - I)^-1 when both arguments are full
/// rank. The spectrum of the result is clamped to [0, 1] to stop
/// floating-point drift from accumulating over repeated merges.
inline Conceptor intersect(const Conceptor& c, const Conceptor& b,
                           double rank_tol = kDefaultRankTol) {
    if (c.dim() != b.dim()) throw ParameterError("intersect: dimension mismatch");
    const Eigen::Index n = c.dim();
    const OrthonormalBasis d = intersection_basis(c, b, rank_tol);
    if (d.cols() == 0) return Conceptor::zero(n);
    const Matrix core = detail::symmetric_pinv(c.matrix, rank_tol) +
                        detail::symmetric_pinv(b.matrix, rank_tol) -
                        Matrix::Identity(n, n);
    const Matrix inner = d.transpose() * core * d;
    const Matrix raw = d * inner.partialPivLu().inverse() * d.transpose();
    return detail::remap_spectrum(Conceptor(detail::symmetrized(raw)),
                                  [](double s) { return s; });
}

/// Logical OR through De Morgan: C v B = NOT(NOT C ^ NOT B).
inline Conceptor unite(const Conceptor& c, const Conceptor& b,
                       double rank_tol = kDefaultRankTol) {
    if (c.dim() != b.dim()) throw ParameterError("unite: dimension mismatch");
    return complement(intersect(complement(c), complement(b), rank_tol));
}

/// Aperture adaptation psi(C, beta): rescales the aperture by beta through
/// the eigenvalue map s -> s / (s + beta^-2 (1 - s)). Eigenvectors are
/// unchanged; an eigenvalue of exactly 1 is a fixed point, so no singular
/// inverse of I - C is ever formed.
inline Conceptor aperture_adapt(const Conceptor& c, double beta) {
    if (beta <= 0.0) throw ParameterError("aperture scale beta must be positive");
    const double inv_b2 = 1.0 / (beta * beta);
    return detail::remap_spectrum(c, [inv_b2](double s) {
        const double denom = s + inv_b2 * (1.0 - s);
        return denom > 0.0 ? s / denom : 0.0;
    });
}

/// Capacity (memory usage) of a conceptor: the mean eigenvalue trace(C)/n.
/// 0 means empty, 1 means full.
inline double capacity(const Conceptor& c) {
    if (c.dim() == 0) return 0.0;
    return c.matrix.trace() / static_cast<double>(c.dim());
}

/// Eigenvectors of C for the K largest eigenvalues, sorted descending,
/// with the deterministic tie-breaking and sign convention of
/// detail::symmetric_eigen_sorted.
inline OrthonormalBasis top_k_directions(const Conceptor& c, Eigen::Index k) {
    if (k < 1 || k > c.dim())
        throw ParameterError("top_k_directions: K must lie in [1, n]");
    return detail::symmetric_eigen_sorted(c.matrix).vectors.leftCols(k);
}

}  // namespace codecl
