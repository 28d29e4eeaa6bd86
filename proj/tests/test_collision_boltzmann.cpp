#include "doctest.h"

#include "vpb/collision.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>
#include <vector>

using namespace vpb;

namespace {

TwoSpeciesDistribution random_dist(const HermiteBasis& basis, int nx, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, 1.0);
    TwoSpeciesDistribution f = TwoSpeciesDistribution::zero(basis.size(), nx);
    for (int m = 0; m < basis.size(); ++m) {
        for (int i = 0; i < nx; ++i) {
            f.plus(m, i) = dist(rng);
            f.minus(m, i) = dist(rng);
        }
    }
    return f;
}

const CollisionOperator& default_k4_operator() {
    static CollisionOperator op = [] {
        HermiteBasis basis(4);
        return assemble_boltzmann(basis, KernelSpec{});
    }();
    return op;
}

Eigen::MatrixXd invariants(const HermiteBasis& basis) {
    const int M = basis.size();
    Eigen::MatrixXd xi = Eigen::MatrixXd::Zero(M, 5);
    xi.col(0) = basis.vec_one();
    for (int i = 0; i < 3; ++i) xi.col(1 + i) = basis.vec_v(i);
    xi.col(4) = (basis.vec_vsq() - 3.0 * basis.vec_one()) / std::sqrt(6.0);
    return xi;
}

Eigen::MatrixXd stacked_kernel(const HermiteBasis& basis) {
    const Eigen::MatrixXd xi = invariants(basis);
    const int M = basis.size();
    const double r = 1.0 / std::sqrt(2.0);
    Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(2 * M, 6);
    Z.col(0).head(M) = xi.col(0);
    Z.col(1).tail(M) = xi.col(0);
    for (int i = 0; i < 3; ++i) {
        Z.col(2 + i).head(M) = r * xi.col(1 + i);
        Z.col(2 + i).tail(M) = r * xi.col(1 + i);
    }
    Z.col(5).head(M) = r * xi.col(4);
    Z.col(5).tail(M) = r * xi.col(4);
    return Z;
}

// Independent Gauss-Legendre rule through Newton iteration on the Legendre
// recurrence, deliberately not sharing the production eigensolver path.
void newton_gauss_legendre(int n, double a, double b, std::vector<double>& x,
                           std::vector<double>& w) {
    x.assign(n, 0.0);
    w.assign(n, 0.0);
    for (int i = 0; i < n; ++i) {
        double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = z;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            pp = n * (z * p1 - p0) / (z * z - 1.0);
            const double dz = p1 / pp;
            z -= dz;
            if (std::abs(dz) < 1e-15) break;
        }
        x[i] = a + 0.5 * (b - a) * (z + 1.0);
        w[i] = (b - a) / ((1.0 - z * z) * pp * pp);
    }
}

// Reference tensor assembly: plain nested loops, a fixed-vector scattering
// frame instead of the production coordinate-axis one, and rank-one fiber
// accumulation.  Azimuthal exactness makes the frame choice immaterial, so
// agreement to rounding validates the production bookkeeping end to end.
Eigen::MatrixXd naive_tensor(const HermiteBasis& basis, const KernelSpec& ks) {
    const int M = basis.size();
    const int Nq = basis.node_count();
    const Eigen::MatrixXd& HP = basis.node_polys();
    const Eigen::VectorXd& W = basis.node_weights();

    std::vector<double> ytheta, wy;
    newton_gauss_legendre(ks.n_theta, std::pow(M_PI / 2.0, -2.0 * ks.s),
                          std::pow(ks.theta_min, -2.0 * ks.s), ytheta, wy);
    std::vector<double> ct(ks.n_theta), st(ks.n_theta), wt(ks.n_theta);
    for (int t = 0; t < ks.n_theta; ++t) {
        const double theta = std::pow(ytheta[t], -1.0 / (2.0 * ks.s));
        ct[t] = std::cos(theta);
        st[t] = std::sin(theta);
        wt[t] = wy[t] / (2.0 * ks.s);
    }
    double theta_mass = 0.0;
    for (double v : wt) theta_mass += v;
    const double wphi = 2.0 * M_PI / ks.n_phi;
    std::vector<double> cp(ks.n_phi), sp(ks.n_phi);
    for (int i = 0; i < ks.n_phi; ++i) {
        const double phi = 2.0 * M_PI * (i + 0.5) / ks.n_phi;
        cp[i] = std::cos(phi);
        sp[i] = std::sin(phi);
    }

    const Eigen::Vector3d ref(0.36, -0.48, 0.8);
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(M * M, M);
    Eigen::MatrixXd Gmn(M, M);
    Eigen::VectorXd loss(M);
    for (int a = 0; a < Nq; ++a) {
        const Eigen::Vector3d va = basis.node_point(a);
        Gmn.setZero();
        loss.setZero();
        for (int b = 0; b < Nq; ++b) {
            const Eigen::Vector3d vb = basis.node_point(b);
            const Eigen::Vector3d u = va - vb;
            const double unorm = u.norm();
            if (unorm < 1e-12) continue;
            const double bfac = ks.C_phi * std::pow(unorm, ks.gamma);
            loss += (W[b] * bfac * 2.0 * M_PI * theta_mass) * HP.row(b).transpose();
            const Eigen::Vector3d khat = u / unorm;
            Eigen::Vector3d r = ref;
            if (std::abs(khat.dot(r)) > 0.97) r = Eigen::Vector3d(1.0, 0.0, 0.0);
            const Eigen::Vector3d e1 = (r - khat.dot(r) * khat).normalized();
            const Eigen::Vector3d e2 = khat.cross(e1);
            const Eigen::Vector3d mid = 0.5 * (va + vb);
            for (int t = 0; t < ks.n_theta; ++t) {
                for (int i = 0; i < ks.n_phi; ++i) {
                    const Eigen::Vector3d sigma =
                        ct[t] * khat + st[t] * (cp[i] * e1 + sp[i] * e2);
                    const Eigen::Vector3d vpost = mid + 0.5 * unorm * sigma;
                    const Eigen::Vector3d vspost = mid - 0.5 * unorm * sigma;
                    const Eigen::VectorXd hm = basis.eval_polys(vspost);
                    const Eigen::VectorXd hn = basis.eval_polys(vpost);
                    Gmn.noalias() += (W[b] * bfac * wt[t] * wphi) * hm * hn.transpose();
                }
            }
        }
        Gmn.noalias() -= loss * HP.row(a);
        T.noalias() += Eigen::Map<const Eigen::VectorXd>(Gmn.data(), M * M) *
                       (W[a] * HP.row(a));
    }
    return T;
}

struct NaiveOperator {
    Eigen::MatrixXd sym;  // M^2 x M
    Eigen::MatrixXd L;    // 2M x 2M
};

NaiveOperator naive_operator(const HermiteBasis& basis, const KernelSpec& ks) {
    const int M = basis.size();
    const Eigen::MatrixXd T = naive_tensor(basis, ks);
    const Eigen::MatrixXd xi = invariants(basis);

    NaiveOperator out;
    out.sym.resize(M * M, M);
    Eigen::MatrixXd rec(M * M, M);
    for (int m = 0; m < M; ++m) {
        for (int n = 0; n < M; ++n) {
            Eigen::VectorXd ts =
                0.5 * (T.row(m + n * M) + T.row(n + m * M)).transpose();
            Eigen::VectorXd td =
                0.5 * (T.row(m + n * M) - T.row(n + m * M)).transpose();
            ts -= xi * (xi.transpose() * ts);
            td -= xi.col(0) * xi.col(0).dot(td);
            out.sym.row(m + n * M) = ts.transpose();
            rec.row(m + n * M) = (ts + td).transpose();
        }
    }

    Eigen::MatrixXd A1(M, M), A2(M, M);
    for (int n = 0; n < M; ++n) A1.col(n) = rec.row(0 + n * M).transpose();
    for (int m = 0; m < M; ++m) A2.col(m) = rec.row(m + 0 * M).transpose();
    const Eigen::MatrixXd La = -(2.0 * A1 + A2);
    const Eigen::MatrixXd Lb = -A2;
    Eigen::MatrixXd L(2 * M, 2 * M);
    L.topLeftCorner(M, M) = La;
    L.topRightCorner(M, M) = Lb;
    L.bottomLeftCorner(M, M) = Lb;
    L.bottomRightCorner(M, M) = La;
    L = 0.5 * (L + L.transpose()).eval();
    const Eigen::MatrixXd Z = stacked_kernel(basis);
    const Eigen::MatrixXd P = Eigen::MatrixXd::Identity(2 * M, 2 * M) - Z * Z.transpose();
    out.L = P * L * P;
    return out;
}

}  // namespace

TEST_CASE("polar kernel mass matches the closed form") {
    KernelSpec ks;
    ks.s = 0.5;
    ks.theta_min = 0.1;
    CHECK(angular_theta_mass(ks) == doctest::Approx(10.0 - 2.0 / M_PI).epsilon(1e-13));

    ks.s = 0.25;
    ks.theta_min = 0.3;
    const double exact = (std::pow(0.3, -0.5) - std::pow(M_PI / 2.0, -0.5)) / 0.5;
    CHECK(angular_theta_mass(ks) == doctest::Approx(exact).epsilon(1e-13));

    // The substitution renders the integrand constant, so the node count is
    // immaterial.
    ks.n_theta = 2;
    const double coarse = angular_theta_mass(ks);
    ks.n_theta = 48;
    CHECK(coarse == doctest::Approx(angular_theta_mass(ks)).epsilon(1e-14));
}

TEST_CASE("kernel validation rejects out-of-range parameters") {
    KernelSpec ks;
    CHECK_NOTHROW(ks.validate());

    KernelSpec bad = ks;
    bad.gamma = -3.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = ks;
    bad.s = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = ks;
    bad.s = 1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = ks;
    bad.C_phi = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = ks;
    bad.theta_min = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = ks;
    bad.theta_min = 1.6;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = ks;
    bad.n_theta = 1;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = ks;
    bad.n_phi = 3;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("assembled operator matches a plain-loop reference at low degree") {
    HermiteBasis basis(2);
    KernelSpec ks;
    ks.gamma = 0.0;
    ks.s = 0.5;
    ks.C_phi = 1.3;
    ks.theta_min = 0.3;
    ks.quad_order = 4;
    ks.n_theta = 6;
    ks.n_phi = 6;

    CollisionOperator op = assemble_boltzmann(basis, ks);
    NaiveOperator ref = naive_operator(basis, ks);

    const int M = basis.size();
    const double scale = ref.sym.cwiseAbs().maxCoeff();
    REQUIRE(scale > 1e-3);
    Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(M * M, M);
    REQUIRE(!op.gamma.empty());
    for (const GammaTriplet& t : op.gamma) {
        dense(static_cast<int>(t.m) + static_cast<int>(t.n) * M, static_cast<int>(t.p)) =
            t.value;
    }
    CHECK((dense - ref.sym).cwiseAbs().maxCoeff() < 1e-11 * scale + 1e-13);

    const double lscale = ref.L.cwiseAbs().maxCoeff();
    CHECK((op.L - ref.L).cwiseAbs().maxCoeff() < 1e-11 * lscale);
}

TEST_CASE("assembled operator at degree four has the collision structure") {
    const CollisionOperator& op = default_k4_operator();
    HermiteBasis basis(4);
    const int M = basis.size();
    REQUIRE(op.modes == M);
    REQUIRE(op.backend == CollisionBackend::Boltzmann);
    CHECK(op.kernel.n_phi == 2 * 4 + 2);

    const double lmax = op.L.cwiseAbs().maxCoeff();
    CHECK((op.L - op.L.transpose()).cwiseAbs().maxCoeff() < 1e-12 * lmax);

    Eigen::MatrixXd Z = stacked_kernel(basis);
    CHECK((op.L * Z).cwiseAbs().maxCoeff() < 1e-12 * lmax);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(op.L);
    const Eigen::VectorXd& ev = eig.eigenvalues();
    const double emax = ev.cwiseAbs().maxCoeff();
    int tight = 0, loose = 0;
    for (int i = 0; i < ev.size(); ++i) {
        if (std::abs(ev[i]) < 1e-10 * emax) ++tight;
        if (std::abs(ev[i]) < 1e-6 * emax) ++loose;
    }
    CHECK(tight == 6);
    CHECK(loose == 6);
    CHECK(ev.minCoeff() > -1e-10 * emax);

    // Sign symmetry of the velocity measure: entries whose total Hermite
    // degree is odd integrate to zero.
    double max_all = 0.0, max_odd = 0.0;
    for (const GammaTriplet& t : op.gamma) {
        const int deg = basis.index(static_cast<int>(t.m)).degree() +
                        basis.index(static_cast<int>(t.n)).degree() +
                        basis.index(static_cast<int>(t.p)).degree();
        max_all = std::max(max_all, std::abs(t.value));
        if (deg % 2 == 1) max_odd = std::max(max_odd, std::abs(t.value));
    }
    REQUIRE(max_all > 1e-3);
    CHECK(max_odd < 1e-10 * max_all);

    double lodd = 0.0;
    for (int p = 0; p < M; ++p) {
        for (int m = 0; m < M; ++m) {
            if ((basis.index(p).degree() + basis.index(m).degree()) % 2 == 1) {
                lodd = std::max(lodd, std::abs(op.L(p, m)));
                lodd = std::max(lodd, std::abs(op.L(p, M + m)));
            }
        }
    }
    CHECK(lodd < 1e-10 * lmax);
}

TEST_CASE("species-summed invariants of the bilinear form vanish for ordered pairs") {
    const CollisionOperator& op = default_k4_operator();
    HermiteBasis basis(4);

    for (int trial = 0; trial < 20; ++trial) {
        TwoSpeciesDistribution f = random_dist(basis, 1, 1000 + trial);
        TwoSpeciesDistribution g = random_dist(basis, 1, 5000 + trial);
        TwoSpeciesDistribution out = apply_Gamma(op, f, g);
        const Eigen::VectorXd S = out.plus.col(0) + out.minus.col(0);
        const double bound =
            1e-8 * std::sqrt(f.squared_sum()) * std::sqrt(g.squared_sum());
        CHECK(std::abs(basis.vec_one().dot(S)) < bound);
        for (int i = 0; i < 3; ++i) CHECK(std::abs(basis.vec_v(i).dot(S)) < bound);
        CHECK(std::abs(basis.vec_vsq().dot(S)) < bound);
    }

    TwoSpeciesDistribution ground = TwoSpeciesDistribution::zero(basis.size(), 1);
    ground.plus(0, 0) = 1.0;
    ground.minus(0, 0) = 1.0;
    TwoSpeciesDistribution gg = apply_Gamma(op, ground, ground);
    CHECK(std::sqrt(gg.squared_sum()) < 1e-12);
}

TEST_CASE("transport coefficients are positive and backend-consistent") {
    const CollisionOperator& op = default_k4_operator();
    HermiteBasis basis(4);
    MomentEngine eng(basis);
    TransportCoefficients tc = transport_coefficients(op, eng);

    CHECK(tc.nu > 0.0);
    CHECK(tc.kappa > 0.0);
    CHECK(tc.sigma > 0.0);
    CHECK(tc.nu_macro == doctest::Approx(tc.nu).epsilon(1e-10));
    CHECK(tc.kappa_macro == doctest::Approx(tc.kappa).epsilon(1e-10));
    CHECK(tc.sigma_macro == doctest::Approx(tc.sigma).epsilon(1e-10));
    for (int i = 0; i < 3; ++i) {
        CHECK(tc.tilde_Phi[i].allFinite());
        CHECK(tc.tilde_Phi[i].norm() > 0.0);
    }
    CHECK(tc.tilde_Psi.allFinite());
}

TEST_CASE("transport coefficients form a Cauchy sequence under cutoff refinement") {
    HermiteBasis basis(4);
    MomentEngine eng(basis);
    const double cutoffs[4] = {0.4, 0.2, 0.1, 0.05};
    double nu[4], kappa[4], sigma[4];
    for (int i = 0; i < 4; ++i) {
        KernelSpec ks;
        ks.theta_min = cutoffs[i];
        ks.n_theta = 24;
        CollisionOperator op = assemble_boltzmann(basis, ks);
        TransportCoefficients tc = transport_coefficients(op, eng);
        nu[i] = tc.nu;
        kappa[i] = tc.kappa;
        sigma[i] = tc.sigma;
        CHECK(tc.nu > 0.0);
        CHECK(tc.kappa > 0.0);
        CHECK(tc.sigma > 0.0);
    }
    auto cauchy = [](const double* c) {
        const double d1 = std::abs(c[1] - c[0]);
        const double d2 = std::abs(c[2] - c[1]);
        const double d3 = std::abs(c[3] - c[2]);
        REQUIRE(d1 > 0.0);
        CHECK(d2 < 0.6 * d1);
        CHECK(d3 < 0.6 * d2);
    };
    cauchy(nu);
    cauchy(kappa);
    cauchy(sigma);
}

TEST_CASE("hard and soft kernel exponents assemble cleanly") {
    HermiteBasis basis(3);
    MomentEngine eng(basis);
    Eigen::MatrixXd Z = stacked_kernel(basis);

    KernelSpec hard;
    hard.gamma = 0.5;
    hard.n_theta = 8;
    CollisionOperator oph = assemble_boltzmann(basis, hard);
    double lmax = oph.L.cwiseAbs().maxCoeff();
    CHECK((oph.L * Z).cwiseAbs().maxCoeff() < 1e-12 * lmax);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eh(oph.L);
    CHECK(eh.eigenvalues().minCoeff() > -1e-10 * lmax);
    TransportCoefficients th = transport_coefficients(oph, eng);
    CHECK(th.nu > 0.0);
    CHECK(th.sigma > 0.0);

    KernelSpec soft;
    soft.gamma = -2.0;
    soft.s = 0.9;
    soft.n_theta = 8;
    REQUIRE(WeightSpec{3.0, soft.gamma, soft.s}.soft_regime());
    CollisionOperator ops = assemble_boltzmann(basis, soft);
    lmax = ops.L.cwiseAbs().maxCoeff();
    CHECK((ops.L * Z).cwiseAbs().maxCoeff() < 1e-12 * lmax);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ops.L);
    CHECK(es.eigenvalues().minCoeff() > -1e-10 * lmax);
}

TEST_CASE("quadrature self-check reports refinement disagreement") {
    HermiteBasis basis(3, 5);
    KernelSpec ks;
    ks.theta_min = 0.3;
    ks.n_theta = 8;
    ks.n_phi = 4;
    ks.quad_order = 5;

    AssemblyOptions loose;
    loose.convergence_check = true;
    loose.convergence_tol = 0.5;
    CollisionOperator op = assemble_boltzmann(basis, ks, loose);
    CHECK(op.refinement_disagreement >= 0.0);
    CHECK(op.refinement_disagreement <= 0.5);

    AssemblyOptions tight;
    tight.convergence_check = true;
    tight.convergence_tol = 1e-12;
    CHECK_THROWS_WITH_AS(static_cast<void>(assemble_boltzmann(basis, ks, tight)),
                         doctest::Contains("disagree"), std::runtime_error);

    CollisionOperator plain = assemble_boltzmann(basis, ks);
    CHECK(plain.refinement_disagreement == -1.0);
}

TEST_CASE("assembly is deterministic") {
    HermiteBasis basis(3);
    KernelSpec ks;
    ks.n_theta = 8;
    CollisionOperator a = assemble_boltzmann(basis, ks);
    CollisionOperator b = assemble_boltzmann(basis, ks);
    CHECK(a.provenance == b.provenance);
    CHECK((a.L.array() == b.L.array()).all());
    REQUIRE(a.gamma.size() == b.gamma.size());

    KernelSpec other = ks;
    other.theta_min = 0.2;
    CollisionOperator c = assemble_boltzmann(basis, other);
    CHECK(a.provenance != c.provenance);
}
