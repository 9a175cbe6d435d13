#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "codecl/conceptor.hpp"
#include "oracles.hpp"

using namespace codecl;

namespace {

Conceptor diag(std::initializer_list<double> values) {
    Vector v(static_cast<Eigen::Index>(values.size()));
    Eigen::Index i = 0;
    for (double s : values) v(i++) = s;
    return Conceptor(Matrix(v.asDiagonal()));
}

Conceptor random_conceptor(Eigen::Index n, std::mt19937_64& rng, double lo, double hi) {
    const Matrix g = oracles::random_gaussian(n, n, rng);
    const Matrix q = Eigen::HouseholderQR<Matrix>(g).householderQ();
    std::uniform_real_distribution<double> unif(lo, hi);
    Vector s(n);
    for (Eigen::Index i = 0; i < n; ++i) s(i) = unif(rng);
    return Conceptor(detail::symmetrized(q * s.asDiagonal() * q.transpose()));
}

}  // namespace

TEST_CASE("conceptor_from_batch") {
    SECTION("two identical rows [1,0] with alpha=2 give diag(0.8, 0)") {
        FeatureBatch x(2, 2);
        x << 1, 0, 1, 0;
        const Conceptor c = conceptor_from_batch(x, 2.0);
        Matrix expected(2, 2);
        expected << 0.8, 0, 0, 0;
        REQUIRE((c.matrix - expected).cwiseAbs().maxCoeff() <= 1e-12);
    }
    SECTION("all-zero batch gives the zero conceptor") {
        const Conceptor c = conceptor_from_batch(Matrix::Zero(4, 3), 1.7);
        REQUIRE(c.dim() == 3);
        REQUIRE(c.matrix.cwiseAbs().maxCoeff() == 0.0);
    }
    SECTION("matches gradient-descent minimization of the objective") {
        std::mt19937_64 rng(101);
        const FeatureBatch x = oracles::random_gaussian(50, 8, rng);
        const Conceptor c = conceptor_from_batch(x, 3.0);
        const Matrix oracle = oracles::conceptor_objective_minimizer(x, 3.0);
        REQUIRE((c.matrix - oracle).norm() <= 1e-5);
    }
    SECTION("eigenvalues follow the map s/(s + alpha^-2) and stay below 1") {
        std::mt19937_64 rng(102);
        const FeatureBatch x = oracles::random_gaussian(12, 6, rng);
        const double alpha = 2.5;
        const Conceptor c = conceptor_from_batch(x, alpha);
        const Matrix r = (x.transpose() * x) / 12.0;
        Eigen::SelfAdjointEigenSolver<Matrix> er(r), ec(c.matrix);
        for (Eigen::Index i = 0; i < 6; ++i) {
            const double lam = std::max(er.eigenvalues()(i), 0.0);
            REQUIRE(ec.eigenvalues()(i) ==
                    Catch::Approx(lam / (lam + 1.0 / (alpha * alpha))).margin(1e-8));
            REQUIRE(ec.eigenvalues()(i) < 1.0);
        }
    }
    SECTION("rejects bad inputs") {
        REQUIRE_THROWS_AS(conceptor_from_batch(Matrix::Ones(2, 2), 0.0), ParameterError);
        REQUIRE_THROWS_AS(conceptor_from_batch(Matrix::Ones(2, 2), -1.0), ParameterError);
        Matrix bad = Matrix::Ones(2, 2);
        bad(0, 1) = std::numeric_limits<double>::quiet_NaN();
        REQUIRE_THROWS_AS(conceptor_from_batch(bad, 1.0), DataError);
    }
}

TEST_CASE("complement") {
    SECTION("zero maps to identity") {
        REQUIRE((complement(Conceptor::zero(3)).matrix - Matrix::Identity(3, 3))
                    .cwiseAbs()
                    .maxCoeff() == 0.0);
    }
    SECTION("diag(0.8, 0.3) maps to diag(0.2, 0.7)") {
        const Conceptor c = complement(diag({0.8, 0.3}));
        REQUIRE(c.matrix(0, 0) == Catch::Approx(0.2).margin(1e-15));
        REQUIRE(c.matrix(1, 1) == Catch::Approx(0.7).margin(1e-15));
    }
    SECTION("double complement is an involution to machine precision") {
        std::mt19937_64 rng(103);
        const Conceptor c = random_conceptor(7, rng, 0.0, 1.0);
        REQUIRE((complement(complement(c)).matrix - c.matrix).cwiseAbs().maxCoeff() <=
                1e-15);
    }
}

TEST_CASE("intersect") {
    SECTION("diag(0.5,0.5) AND itself gives diag(1/3, 1/3)") {
        const Conceptor c = diag({0.5, 0.5});
        const Conceptor both = intersect(c, c);
        REQUIRE(both.matrix(0, 0) == Catch::Approx(1.0 / 3.0).margin(1e-10));
        REQUIRE(both.matrix(1, 1) == Catch::Approx(1.0 / 3.0).margin(1e-10));
        REQUIRE(std::abs(both.matrix(0, 1)) <= 1e-12);
    }
    SECTION("AND with zero is zero") {
        std::mt19937_64 rng(104);
        const Conceptor c = random_conceptor(5, rng, 0.0, 1.0);
        REQUIRE(intersect(c, Conceptor::zero(5)).matrix.cwiseAbs().maxCoeff() <= 1e-10);
    }
    SECTION("matches the invertible-only formula on a full-rank 10x10 pair") {
        std::mt19937_64 rng(105);
        const Conceptor c = random_conceptor(10, rng, 0.1, 0.9);
        const Conceptor b = random_conceptor(10, rng, 0.1, 0.9);
        REQUIRE((intersect(c, b).matrix - oracles::invertible_and(c.matrix, b.matrix))
                    .norm() <= 1e-8);
    }
    SECTION("is Loewner-dominated by both arguments") {
        std::mt19937_64 rng(106);
        const Conceptor c = random_conceptor(6, rng, 0.0, 1.0);
        const Conceptor b = random_conceptor(6, rng, 0.0, 1.0);
        const Conceptor both = intersect(c, b);
        for (const Conceptor* upper : {&c, &b}) {
            Eigen::SelfAdjointEigenSolver<Matrix> es(upper->matrix - both.matrix);
            REQUIRE(es.eigenvalues().minCoeff() >= -1e-8);
        }
    }
    SECTION("dimension mismatch is rejected") {
        REQUIRE_THROWS_AS(intersect(Conceptor::zero(3), Conceptor::zero(4)), ParameterError);
    }
}

TEST_CASE("unite") {
    SECTION("diag(0.5,0) OR diag(0,0.5) gives diag(0.5, 0.5)") {
        const Conceptor u = unite(diag({0.5, 0.0}), diag({0.0, 0.5}));
        REQUIRE(u.matrix(0, 0) == Catch::Approx(0.5).margin(1e-9));
        REQUIRE(u.matrix(1, 1) == Catch::Approx(0.5).margin(1e-9));
    }
    SECTION("zero is the identity element") {
        std::mt19937_64 rng(107);
        const Conceptor c = random_conceptor(6, rng, 0.0, 1.0);
        REQUIRE((unite(c, Conceptor::zero(6)).matrix - c.matrix).cwiseAbs().maxCoeff() <=
                1e-8);
    }
    SECTION("capacity dominates both arguments") {
        std::mt19937_64 rng(108);
        const Conceptor c = random_conceptor(8, rng, 0.0, 1.0);
        const Conceptor b = random_conceptor(8, rng, 0.0, 1.0);
        REQUIRE(capacity(unite(c, b)) >= std::max(capacity(c), capacity(b)) - 1e-8);
    }
}

TEST_CASE("aperture_adapt") {
    SECTION("psi(diag(0.5), 2) = diag(0.8)") {
        const Conceptor c = aperture_adapt(diag({0.5}), 2.0);
        REQUIRE(c.matrix(0, 0) == Catch::Approx(0.8).margin(1e-12));
    }
    SECTION("beta = 1 is the identity") {
        std::mt19937_64 rng(109);
        const Conceptor c = random_conceptor(5, rng, 0.0, 1.0);
        REQUIRE((aperture_adapt(c, 1.0).matrix - c.matrix).cwiseAbs().maxCoeff() <= 1e-12);
    }
    SECTION("group law: composing scales multiplies them") {
        std::mt19937_64 rng(110);
        const Conceptor c = random_conceptor(6, rng, 0.0, 1.0);
        const Conceptor composed = aperture_adapt(aperture_adapt(c, 1.7), 0.6);
        const Conceptor direct = aperture_adapt(c, 1.7 * 0.6);
        REQUIRE((composed.matrix - direct.matrix).cwiseAbs().maxCoeff() <= 1e-8);
    }
    SECTION("an eigenvalue of exactly 1 is a fixed point") {
        const Conceptor c = aperture_adapt(diag({1.0, 0.5}), 3.0);
        REQUIRE(c.matrix(0, 0) == Catch::Approx(1.0).margin(1e-12));
    }
    SECTION("non-positive beta is rejected") {
        REQUIRE_THROWS_AS(aperture_adapt(Conceptor::zero(2), 0.0), ParameterError);
    }
}

TEST_CASE("capacity") {
    REQUIRE(capacity(Conceptor::zero(4)) == 0.0);
    REQUIRE(capacity(Conceptor::identity(4)) == 1.0);
    REQUIRE(capacity(diag({0.5, 0.25, 0.75, 0.5})) == Catch::Approx(0.5).margin(1e-15));
}

TEST_CASE("top_k_directions") {
    SECTION("diag(0.9, 0.2, 0.5) with K=2 selects e1 and e3") {
        const OrthonormalBasis b = top_k_directions(diag({0.9, 0.2, 0.5}), 2);
        Matrix expected(3, 2);
        expected << 1, 0, 0, 0, 0, 1;
        REQUIRE((b - expected).cwiseAbs().maxCoeff() <= 1e-12);
    }
    SECTION("identity with K=n yields an orthonormal basis fixed by C") {
        const Conceptor c = Conceptor::identity(5);
        const OrthonormalBasis b = top_k_directions(c, 5);
        REQUIRE((b.transpose() * b - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff() <= 1e-12);
        REQUIRE((c.matrix * b - b).cwiseAbs().maxCoeff() <= 1e-12);
    }
    SECTION("columns are eigenvectors for the top eigenvalues") {
        std::mt19937_64 rng(111);
        const Conceptor c = random_conceptor(9, rng, 0.0, 1.0);
        const OrthonormalBasis b = top_k_directions(c, 3);
        Eigen::SelfAdjointEigenSolver<Matrix> es(c.matrix);
        const Vector top = es.eigenvalues().reverse().head(3);
        REQUIRE((c.matrix * b - b * top.asDiagonal()).cwiseAbs().maxCoeff() <= 1e-8);
    }
    SECTION("K outside [1, n] is rejected") {
        REQUIRE_THROWS_AS(top_k_directions(Conceptor::zero(3), 4), ParameterError);
        REQUIRE_THROWS_AS(top_k_directions(Conceptor::zero(3), 0), ParameterError);
    }
}

TEST_CASE("intersection_basis") {
    SECTION("hard projectors diag(1,1,0) and diag(0,1,1) intersect in e2") {
        const OrthonormalBasis d =
            intersection_basis(diag({1, 1, 0}), diag({0, 1, 1}), 0.5);
        REQUIRE(d.cols() == 1);
        REQUIRE(std::abs(std::abs(d(1, 0)) - 1.0) <= 1e-10);
    }
    SECTION("two full-rank conceptors give a full basis") {
        std::mt19937_64 rng(112);
        const Conceptor c = random_conceptor(6, rng, 0.2, 0.9);
        const Conceptor b = random_conceptor(6, rng, 0.2, 0.9);
        const OrthonormalBasis d = intersection_basis(c, b);
        REQUIRE(d.cols() == 6);
        REQUIRE((d.transpose() * d - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff() <= 1e-8);
    }
    SECTION("range(D) lies inside both column spaces") {
        std::mt19937_64 rng(113);
        // Rank-deficient pair built from thin batches.
        const Conceptor c = conceptor_from_batch(oracles::random_gaussian(4, 8, rng), 20.0);
        const Conceptor b = conceptor_from_batch(oracles::random_gaussian(5, 8, rng), 20.0);
        const OrthonormalBasis d = intersection_basis(c, b);
        for (const Conceptor* a : {&c, &b}) {
            // Projector onto the column space of the argument.
            Eigen::SelfAdjointEigenSolver<Matrix> es(a->matrix);
            Matrix p = Matrix::Zero(8, 8);
            for (Eigen::Index i = 0; i < 8; ++i)
                if (es.eigenvalues()(i) > 1e-8)
                    p += es.eigenvectors().col(i) * es.eigenvectors().col(i).transpose();
            REQUIRE((p * d - d).cwiseAbs().maxCoeff() <= 1e-7);
        }
    }
    SECTION("invalid rank_tol is rejected") {
        REQUIRE_THROWS_AS(intersection_basis(Conceptor::zero(2), Conceptor::zero(2), 0.0),
                          ParameterError);
        REQUIRE_THROWS_AS(intersection_basis(Conceptor::zero(2), Conceptor::zero(2), 1.0),
                          ParameterError);
    }
}

TEST_CASE("pseudo_inverse") {
    SECTION("identity inverts to itself") {
        REQUIRE((pseudo_inverse(Matrix::Identity(4, 4)) - Matrix::Identity(4, 4))
                    .cwiseAbs()
                    .maxCoeff() <= 1e-12);
    }
    SECTION("diag(2, 0) inverts to diag(0.5, 0)") {
        Matrix a = Matrix::Zero(2, 2);
        a(0, 0) = 2.0;
        const Matrix inv = pseudo_inverse(a);
        REQUIRE(inv(0, 0) == Catch::Approx(0.5).margin(1e-12));
        REQUIRE(std::abs(inv(1, 1)) <= 1e-12);
    }
    SECTION("full-rank 6x6 multiplies back to the identity") {
        std::mt19937_64 rng(114);
        const Matrix a =
            oracles::random_gaussian(6, 6, rng) + 3.0 * Matrix::Identity(6, 6);
        REQUIRE((a * pseudo_inverse(a) - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff() <=
                1e-9);
    }
    SECTION("non-square input is rejected") {
        REQUIRE_THROWS_AS(pseudo_inverse(Matrix::Zero(2, 3)), ParameterError);
    }
}

TEST_CASE("De Morgan duality for AND") {
    std::mt19937_64 rng(115);
    const Conceptor c = random_conceptor(7, rng, 0.1, 0.9);
    const Conceptor b = random_conceptor(7, rng, 0.1, 0.9);
    const Conceptor direct = intersect(c, b);
    const Conceptor dual = complement(unite(complement(c), complement(b)));
    REQUIRE((direct.matrix - dual.matrix).cwiseAbs().maxCoeff() <= 1e-7);
}

TEST_CASE("operation results stay symmetric with spectrum in [0,1]") {
    std::mt19937_64 rng(116);
    for (int it = 0; it < 20; ++it) {
        const Conceptor c = random_conceptor(8, rng, 0.0, 1.0);
        const Conceptor b = random_conceptor(8, rng, 0.0, 1.0);
        for (const Conceptor& r : {intersect(c, b), unite(c, b), aperture_adapt(c, 1.3)}) {
            REQUIRE((r.matrix - r.matrix.transpose()).cwiseAbs().maxCoeff() <= 1e-9);
            Eigen::SelfAdjointEigenSolver<Matrix> es(r.matrix);
            REQUIRE(es.eigenvalues().minCoeff() >= -1e-9);
            REQUIRE(es.eigenvalues().maxCoeff() <= 1.0 + 1e-9);
        }
    }
}
