#pragma once

// Randomized property suite for the conceptor algebra. Each check draws
// fresh conceptor pairs (dimension <= 20) and records the worst deviation
// seen; a check passes when that deviation stays within its tolerance.
// Shared by the `algebra-check` CLI subcommand and the acceptance suite.

#include <random>
#include <string>
#include <vector>

#include "codecl/conceptor.hpp"

namespace codecl {

struct PropertyResult {
    std::string name;
    double worst = 0.0;
    double tolerance = 0.0;
    bool pass() const { return worst <= tolerance; }
};

struct AlgebraCheckReport {
    int pairs = 0;
    std::vector<PropertyResult> properties;
    bool all_pass() const {
        for (const auto& p : properties)
            if (!p.pass()) return false;
        return true;
    }
};

namespace detail {

inline Matrix random_orthogonal(Eigen::Index n, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix g(n, n);
    for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index c = 0; c < n; ++c) g(r, c) = gauss(rng);
    return Eigen::HouseholderQR<Matrix>(g).householderQ();
}

/// Random conceptor with spectrum drawn from [lo, hi]; a zero_fraction of
/// eigenvalues is zeroed to exercise the rank-deficient paths.
inline Conceptor random_conceptor(Eigen::Index n, std::mt19937_64& rng, double lo,
                                  double hi, double zero_fraction = 0.0) {
    const Matrix q = random_orthogonal(n, rng);
    std::uniform_real_distribution<double> unif(lo, hi);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    Vector s(n);
    for (Eigen::Index i = 0; i < n; ++i)
        s(i) = coin(rng) < zero_fraction ? 0.0 : unif(rng);
    return Conceptor(symmetrized(q * s.asDiagonal() * q.transpose()));
}

inline double min_eigenvalue(const Matrix& m) {
    return Eigen::SelfAdjointEigenSolver<Matrix>(m).eigenvalues().minCoeff();
}

inline double asymmetry(const Matrix& m) {
    return (m - m.transpose()).cwiseAbs().maxCoeff();
}

}  // namespace detail

inline AlgebraCheckReport run_algebra_check(int pairs, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<Eigen::Index> dim_dist(2, 20);

    AlgebraCheckReport report;
    report.pairs = pairs;
    PropertyResult symmetry{"symmetry of op results", 0.0, 1e-9};
    PropertyResult spectrum{"spectrum within [0,1]", 0.0, 1e-9};
    PropertyResult involution{"NOT involution", 0.0, 1e-15};
    PropertyResult loewner_and{"AND Loewner-dominated by both args", 0.0, 1e-8};
    PropertyResult loewner_or{"OR Loewner-dominates both args", 0.0, 1e-8};
    PropertyResult cap_and{"capacity(AND) <= min capacities", 0.0, 1e-8};
    PropertyResult cap_or{"capacity(OR) >= max capacities", 0.0, 1e-8};
    PropertyResult aperture_law{"aperture group law", 0.0, 1e-8};
    PropertyResult de_morgan{"De Morgan AND from OR", 0.0, 1e-7};
    PropertyResult general_vs_invertible{"general AND matches invertible form", 0.0, 1e-8};
    PropertyResult construction{"construction eigenvalue map", 0.0, 1e-8};
    PropertyResult or_identity{"OR with zero is identity element", 0.0, 1e-8};

    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> beta_dist(0.5, 2.0);
    auto bump = [](PropertyResult& p, double err) { p.worst = std::max(p.worst, err); };

    for (int it = 0; it < pairs; ++it) {
        const Eigen::Index n = dim_dist(rng);
        // General pair: spectrum in [0,1], roughly a quarter of directions empty.
        const Conceptor c = detail::random_conceptor(n, rng, 0.0, 1.0, 0.25);
        const Conceptor b = detail::random_conceptor(n, rng, 0.0, 1.0, 0.25);
        const Conceptor cb_and = intersect(c, b);
        const Conceptor cb_or = unite(c, b);

        bump(symmetry, detail::asymmetry(cb_and.matrix));
        bump(symmetry, detail::asymmetry(cb_or.matrix));
        for (const Conceptor* r : {&cb_and, &cb_or}) {
            Eigen::SelfAdjointEigenSolver<Matrix> es(r->matrix);
            bump(spectrum, std::max(-es.eigenvalues().minCoeff(),
                                    es.eigenvalues().maxCoeff() - 1.0));
        }
        bump(involution,
             (complement(complement(c)).matrix - c.matrix).cwiseAbs().maxCoeff());

        bump(loewner_and, -detail::min_eigenvalue(c.matrix - cb_and.matrix));
        bump(loewner_and, -detail::min_eigenvalue(b.matrix - cb_and.matrix));
        bump(loewner_or, -detail::min_eigenvalue(cb_or.matrix - c.matrix));
        bump(loewner_or, -detail::min_eigenvalue(cb_or.matrix - b.matrix));

        bump(cap_and, capacity(cb_and) - std::min(capacity(c), capacity(b)));
        bump(cap_or, std::max(capacity(c), capacity(b)) - capacity(cb_or));

        const double b1 = beta_dist(rng), b2 = beta_dist(rng);
        const Conceptor composed = aperture_adapt(aperture_adapt(c, b1), b2);
        const Conceptor direct = aperture_adapt(c, b1 * b2);
        bump(aperture_law, (composed.matrix - direct.matrix).cwiseAbs().maxCoeff());

        bump(or_identity,
             (unite(c, Conceptor::zero(n)).matrix - c.matrix).cwiseAbs().maxCoeff());

        // Invertible pair: spectrum bounded away from 0 and 1.
        const Conceptor ci = detail::random_conceptor(n, rng, 0.1, 0.9);
        const Conceptor bi = detail::random_conceptor(n, rng, 0.1, 0.9);
        const Conceptor general = intersect(ci, bi);
        const Matrix invertible_form =
            (ci.matrix.inverse() + bi.matrix.inverse() - Matrix::Identity(n, n)).inverse();
        bump(general_vs_invertible, (general.matrix - invertible_form).norm());
        const Conceptor via_de_morgan = complement(unite(complement(ci), complement(bi)));
        bump(de_morgan, (general.matrix - via_de_morgan.matrix).cwiseAbs().maxCoeff());

        // Construction: eigenvalues of the conceptor equal s/(s + alpha^-2)
        // applied to the spectrum of X^T X / b.
        const Eigen::Index rows = n + 2;
        Matrix x(rows, n);
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index cc = 0; cc < n; ++cc) x(r, cc) = gauss(rng);
        const double alpha = beta_dist(rng) + 0.5;
        const Conceptor built = conceptor_from_batch(x, alpha);
        const Matrix r_mat = (x.transpose() * x) / static_cast<double>(rows);
        Eigen::SelfAdjointEigenSolver<Matrix> er(r_mat);
        Eigen::SelfAdjointEigenSolver<Matrix> ec(built.matrix);
        const double inv_a2 = 1.0 / (alpha * alpha);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double lam = std::max(er.eigenvalues()(i), 0.0);
            bump(construction,
                 std::abs(ec.eigenvalues()(i) - lam / (lam + inv_a2)));
            bump(spectrum, std::max(-ec.eigenvalues()(i), ec.eigenvalues()(i) - 1.0));
        }
        bump(symmetry, detail::asymmetry(built.matrix));
    }

    report.properties = {symmetry,      spectrum,   involution,   loewner_and,
                         loewner_or,    cap_and,    cap_or,       aperture_law,
                         de_morgan,     general_vs_invertible,    construction,
                         or_identity};
    return report;
}

}  // namespace codecl
