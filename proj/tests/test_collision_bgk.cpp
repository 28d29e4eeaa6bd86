#include "doctest.h"

#include "vpb/collision.hpp"

#include <Eigen/Eigenvalues>

#include <random>

using namespace vpb;

namespace {

TwoSpeciesDistribution random_dist(const HermiteBasis& basis, int nx, std::uint64_t seed,
                                   double amp = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, amp);
    TwoSpeciesDistribution f = TwoSpeciesDistribution::zero(basis.size(), nx);
    for (int m = 0; m < basis.size(); ++m) {
        for (int i = 0; i < nx; ++i) {
            f.plus(m, i) = dist(rng);
            f.minus(m, i) = dist(rng);
        }
    }
    return f;
}

Eigen::MatrixXd kernel_vectors(const HermiteBasis& basis) {
    const int M = basis.size();
    Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(2 * M, 6);
    Z.col(0).head(M) = basis.vec_one();
    Z.col(1).tail(M) = basis.vec_one();
    for (int i = 0; i < 3; ++i) {
        Z.col(2 + i).head(M) = basis.vec_v(i);
        Z.col(2 + i).tail(M) = basis.vec_v(i);
    }
    Z.col(5).head(M) = basis.vec_vsq() - 3.0 * basis.vec_one();
    Z.col(5).tail(M) = basis.vec_vsq() - 3.0 * basis.vec_one();
    return Z;
}

struct InvariantMoments {
    double mass_plus, mass_minus, momentum[3], energy;
};

InvariantMoments invariant_moments(const HermiteBasis& basis, const TwoSpeciesDistribution& f,
                                   int col) {
    InvariantMoments im{};
    im.mass_plus = basis.vec_one().dot(f.plus.col(col));
    im.mass_minus = basis.vec_one().dot(f.minus.col(col));
    for (int i = 0; i < 3; ++i) {
        im.momentum[i] = basis.vec_v(i).dot(f.plus.col(col) + f.minus.col(col));
    }
    im.energy = basis.vec_vsq().dot(f.plus.col(col) + f.minus.col(col));
    return im;
}

}  // namespace

TEST_CASE("relaxation operator has the six-dimensional kernel and flat spectrum") {
    HermiteBasis basis(4);
    CollisionOperator op = bgk_operator(basis);
    const int M = basis.size();
    REQUIRE(op.L.rows() == 2 * M);
    CHECK((op.L - op.L.transpose()).cwiseAbs().maxCoeff() < 1e-14);

    Eigen::MatrixXd Z = kernel_vectors(basis);
    CHECK((op.L * Z).cwiseAbs().maxCoeff() < 1e-12);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(op.L);
    const Eigen::VectorXd& ev = eig.eigenvalues();
    int zeros = 0;
    for (int i = 0; i < ev.size(); ++i) {
        if (std::abs(ev[i]) < 1e-12) ++zeros;
    }
    CHECK(zeros == 6);
    CHECK(ev.minCoeff() > -1e-12);
    for (int i = 0; i < ev.size(); ++i) {
        if (std::abs(ev[i]) >= 1e-12) CHECK(ev[i] == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("relaxation rate scales the nonzero spectrum") {
    HermiteBasis basis(3);
    CollisionOperator op = bgk_operator(basis, 2.5);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(op.L);
    const Eigen::VectorXd& ev = eig.eigenvalues();
    for (int i = 0; i < ev.size(); ++i) {
        const bool near_zero = std::abs(ev[i]) < 1e-12;
        const bool near_rate = std::abs(ev[i] - 2.5) < 1e-12;
        CHECK((near_zero || near_rate));
    }
    CHECK_THROWS_AS(bgk_operator(basis, 0.0), std::invalid_argument);
    HermiteBasis tiny(1);
    CHECK_THROWS_AS(bgk_operator(tiny), std::invalid_argument);
}

TEST_CASE("apply_L matches the stacked matrix action and kills hydro content") {
    HermiteBasis basis(4);
    CollisionOperator op = bgk_operator(basis);
    const int M = basis.size();
    TwoSpeciesDistribution f = random_dist(basis, 5, 11);

    TwoSpeciesDistribution lf = apply_L(op, f);
    for (int c = 0; c < 5; ++c) {
        Eigen::VectorXd stacked(2 * M);
        stacked.head(M) = f.plus.col(c);
        stacked.tail(M) = f.minus.col(c);
        Eigen::VectorXd ref = op.L * stacked;
        CHECK((lf.plus.col(c) - ref.head(M)).lpNorm<Eigen::Infinity>() < 1e-13);
        CHECK((lf.minus.col(c) - ref.tail(M)).lpNorm<Eigen::Infinity>() < 1e-13);
    }

    TwoSpeciesDistribution hydro = TwoSpeciesDistribution::zero(M, 2);
    hydro.plus.col(0) = basis.vec_one();
    hydro.plus.col(1) = 0.3 * basis.vec_v(1) + 0.2 * (basis.vec_vsq() - 3.0 * basis.vec_one());
    hydro.minus.col(1) = hydro.plus.col(1);
    TwoSpeciesDistribution lh = apply_L(op, hydro);
    CHECK(lh.plus.col(0).lpNorm<Eigen::Infinity>() < 1e-13);
    CHECK(lh.plus.col(1).lpNorm<Eigen::Infinity>() < 1e-13);
    CHECK(lh.minus.col(1).lpNorm<Eigen::Infinity>() < 1e-13);
}

TEST_CASE("the relaxation backend rejects bilinear evaluation") {
    HermiteBasis basis(3);
    CollisionOperator op = bgk_operator(basis);
    TwoSpeciesDistribution f = random_dist(basis, 2, 5);
    CHECK_THROWS_AS(apply_Gamma(op, f, f), std::logic_error);
}

TEST_CASE("relaxation transport coefficients take their closed-form values") {
    HermiteBasis basis(4);
    MomentEngine eng(basis);
    CollisionOperator op = bgk_operator(basis);
    TransportCoefficients tc = transport_coefficients(op, eng);

    CHECK(tc.nu == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(tc.kappa == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(tc.sigma == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(tc.nu_macro == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(tc.kappa_macro == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(tc.sigma_macro == doctest::Approx(2.0).epsilon(1e-10));

    // The relaxation closure leaves the Burnett fields untouched.
    CHECK((tc.hat_A[2] - eng.a_vec(0, 1)).lpNorm<Eigen::Infinity>() < 1e-10);
    CHECK((tc.hat_B[0] - eng.b_vec(0)).lpNorm<Eigen::Infinity>() < 1e-10);
    for (int i = 0; i < 3; ++i) {
        CHECK((tc.tilde_Phi[i] - basis.vec_v(i)).lpNorm<Eigen::Infinity>() < 1e-10);
    }
}

TEST_CASE("relaxation of an exact shifted maxwellian vanishes identically") {
    HermiteBasis basis(4);
    const int M = basis.size();
    const double rho = 1.1, T = 1.15, eps = 0.25;
    const Eigen::Vector3d u(0.2, -0.1, 0.05);

    // Hand-expanded Gaussian expectations of the probabilists' polynomials.
    auto he_moment = [&](int n, double uu) {
        const double d = T - 1.0;
        switch (n) {
            case 0: return 1.0;
            case 1: return uu;
            case 2: return uu * uu + d;
            case 3: return uu * uu * uu + 3.0 * uu * d;
            case 4: return uu * uu * uu * uu + 6.0 * uu * uu * d + 3.0 * d * d;
        }
        return 0.0;
    };
    auto fact = [](int n) { return n <= 1 ? 1.0 : n == 2 ? 2.0 : n == 3 ? 6.0 : 24.0; };

    TwoSpeciesDistribution f = TwoSpeciesDistribution::zero(M, 3);
    for (int m = 0; m < M; ++m) {
        const MultiIndex& k = basis.index(m);
        double c = rho;
        const int kk[3] = {k.k1, k.k2, k.k3};
        for (int ax = 0; ax < 3; ++ax) c *= he_moment(kk[ax], u[ax]) / std::sqrt(fact(kk[ax]));
        if (m == basis.find(0, 0, 0)) c -= 1.0;
        for (int col = 0; col < 3; ++col) {
            f.plus(m, col) = c / eps;
            f.minus(m, col) = c / eps;
        }
    }

    TwoSpeciesDistribution r = apply_bgk_collision(basis, f, eps);
    CHECK(std::sqrt(r.squared_sum()) < 1e-12);
}

TEST_CASE("relaxation output carries no invariant content") {
    HermiteBasis basis(4);
    TwoSpeciesDistribution f = random_dist(basis, 4, 77, 0.02);
    const double eps = 0.05;
    TwoSpeciesDistribution r = apply_bgk_collision(basis, f, eps);
    CHECK(std::sqrt(r.squared_sum()) > 1e-3);
    for (int c = 0; c < 4; ++c) {
        InvariantMoments im = invariant_moments(basis, r, c);
        CHECK(std::abs(im.mass_plus) < 1e-12);
        CHECK(std::abs(im.mass_minus) < 1e-12);
        for (int i = 0; i < 3; ++i) CHECK(std::abs(im.momentum[i]) < 1e-12);
        CHECK(std::abs(im.energy) < 1e-11);
    }
}

TEST_CASE("relaxation linearizes to the negated projection complement") {
    HermiteBasis basis(4);
    CollisionOperator op = bgk_operator(basis);
    TwoSpeciesDistribution f = random_dist(basis, 2, 123, 0.05);
    TwoSpeciesDistribution lf = apply_L(op, f);

    auto defect = [&](double eps) {
        TwoSpeciesDistribution r = apply_bgk_collision(basis, f, eps);
        r += lf;  // r should approach -Lf, so the sum is the defect
        return std::sqrt(r.squared_sum());
    };
    const double d1 = defect(0.02);
    const double d2 = defect(0.01);
    CHECK(d1 < 0.1);
    CHECK(d1 / d2 == doctest::Approx(2.0).epsilon(0.25));
}

TEST_CASE("relaxation rejects states outside the validity region") {
    HermiteBasis basis(4);
    const int M = basis.size();

    TwoSpeciesDistribution neg = TwoSpeciesDistribution::zero(M, 1);
    neg.plus.col(0) = -5.0 * basis.vec_one();
    CHECK_THROWS_AS(apply_bgk_collision(basis, neg, 0.5), StepRejected);

    TwoSpeciesDistribution cold = TwoSpeciesDistribution::zero(M, 1);
    cold.plus.col(0) = -3.0 * (basis.vec_vsq() - 3.0 * basis.vec_one());
    cold.minus.col(0) = cold.plus.col(0);
    CHECK_THROWS_AS(apply_bgk_collision(basis, cold, 0.4), StepRejected);

    TwoSpeciesDistribution ok = random_dist(basis, 1, 9, 0.01);
    CHECK_NOTHROW(apply_bgk_collision(basis, ok, 0.1));
    CHECK_THROWS_AS(apply_bgk_collision(basis, ok, 0.0), std::invalid_argument);
}

TEST_CASE("relaxation provenance tags are deterministic and parameter-sensitive") {
    HermiteBasis basis(3);
    CollisionOperator a = bgk_operator(basis);
    CollisionOperator b = bgk_operator(basis);
    CollisionOperator c = bgk_operator(basis, 2.0);
    CHECK(a.provenance == b.provenance);
    CHECK(a.provenance != c.provenance);
}
