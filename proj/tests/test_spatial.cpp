#include "doctest.h"

#include "vpb/spatial.hpp"

#include <cmath>
#include <random>

using vpb::TorusGrid;

namespace {

Eigen::VectorXd sample(const TorusGrid& g, double (*fn)(double)) {
    Eigen::VectorXd f(g.size());
    for (int i = 0; i < g.size(); ++i) f[i] = fn(g.point(i));
    return f;
}

}  // namespace

TEST_CASE("grid points are uniform on the torus") {
    TorusGrid g(16);
    CHECK(g.size() == 16);
    CHECK(g.dx() == doctest::Approx(2.0 * M_PI / 16).epsilon(1e-15));
    CHECK(g.point(0) == 0.0);
    CHECK(g.point(15) == doctest::Approx(15.0 * 2.0 * M_PI / 16).epsilon(1e-15));
    CHECK(g.points().size() == 16);
}

TEST_CASE("constructor rejects invalid sizes") {
    CHECK_THROWS_AS(TorusGrid(0), std::invalid_argument);
    CHECK_THROWS_AS(TorusGrid(4), std::invalid_argument);
    CHECK_THROWS_AS(TorusGrid(7), std::invalid_argument);
    CHECK_THROWS_AS(TorusGrid(12), std::invalid_argument);
    CHECK_THROWS_AS(TorusGrid(24), std::invalid_argument);
    CHECK_THROWS_AS(TorusGrid(16, -1.0), std::invalid_argument);
    CHECK_THROWS_AS(TorusGrid(16, 0.0), std::invalid_argument);
    CHECK_NOTHROW(TorusGrid(8));
    CHECK_NOTHROW(TorusGrid(64));
}

TEST_CASE("forward transform recovers trig coefficients") {
    TorusGrid g(32);
    Eigen::VectorXd f(g.size());
    for (int i = 0; i < g.size(); ++i) {
        const double x = g.point(i);
        f[i] = 1.5 + std::cos(3.0 * x) + 2.0 * std::sin(5.0 * x);
    }
    Eigen::VectorXcd spec = g.forward(f);
    for (int j = 0; j < g.size(); ++j) {
        const int m = g.mode_number(j);
        std::complex<double> expected(0.0, 0.0);
        if (m == 0) expected = 1.5;
        if (m == 3 || m == -3) expected = 0.5;
        if (m == 5) expected = std::complex<double>(0.0, -1.0);
        if (m == -5) expected = std::complex<double>(0.0, 1.0);
        CHECK(std::abs(spec[j] - expected) < 1e-12);
    }
}

TEST_CASE("forward and inverse round trip") {
    TorusGrid g(64);
    std::mt19937_64 rng(2026);
    std::normal_distribution<double> dist(0.0, 1.0);
    Eigen::VectorXd f(g.size());
    for (int i = 0; i < g.size(); ++i) f[i] = dist(rng);
    Eigen::VectorXd back = g.inverse(g.forward(f));
    CHECK((back - f).lpNorm<Eigen::Infinity>() < 1e-13);
}

TEST_CASE("spectral derivative is exact on resolved trig polynomials") {
    TorusGrid g(32);
    Eigen::VectorXd f(g.size());
    Eigen::VectorXd df_exact(g.size());
    for (int i = 0; i < g.size(); ++i) {
        const double x = g.point(i);
        f[i] = std::sin(7.0 * x) + 0.5 * std::cos(2.0 * x);
        df_exact[i] = 7.0 * std::cos(7.0 * x) - std::sin(2.0 * x);
    }
    CHECK((g.x_derivative(f) - df_exact).lpNorm<Eigen::Infinity>() < 1e-11);
    Eigen::VectorXd via_matrix = g.derivative_matrix() * f;
    CHECK((via_matrix - df_exact).lpNorm<Eigen::Infinity>() < 1e-11);
}

TEST_CASE("derivative orders compose and antiderivative inverts on zero-mean fields") {
    TorusGrid g(32);
    Eigen::VectorXd f = sample(g, [](double x) { return std::cos(4.0 * x); });
    Eigen::VectorXd d2 = g.x_derivative(f, 2);
    for (int i = 0; i < g.size(); ++i) {
        CHECK(d2[i] == doctest::Approx(-16.0 * std::cos(4.0 * g.point(i))).epsilon(1e-10));
    }
    Eigen::VectorXd anti = g.x_derivative(f, -1);
    Eigen::VectorXd back = g.x_derivative(anti, 1);
    CHECK((back - f).lpNorm<Eigen::Infinity>() < 1e-11);
    for (int i = 0; i < g.size(); ++i) {
        CHECK(anti[i] == doctest::Approx(0.25 * std::sin(4.0 * g.point(i))).epsilon(1e-10));
    }
}

TEST_CASE("derivative respects a scaled circumference") {
    TorusGrid g(16, 4.0 * M_PI);
    Eigen::VectorXd f(g.size());
    Eigen::VectorXd df_exact(g.size());
    for (int i = 0; i < g.size(); ++i) {
        const double x = g.point(i);
        f[i] = std::sin(0.5 * x);
        df_exact[i] = 0.5 * std::cos(0.5 * x);
    }
    CHECK((g.x_derivative(f) - df_exact).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("poisson solve inverts the one-dimensional laplacian with zero gauge") {
    TorusGrid g(32);
    Eigen::VectorXd n = sample(g, [](double x) { return std::cos(3.0 * x); });
    vpb::PoissonSolution sol = g.poisson_solve(n);
    for (int i = 0; i < g.size(); ++i) {
        const double x = g.point(i);
        CHECK(sol.phi[i] == doctest::Approx(std::cos(3.0 * x) / 9.0).epsilon(1e-12));
        CHECK(sol.grad_phi[i] == doctest::Approx(-std::sin(3.0 * x) / 3.0).epsilon(1e-12));
    }
    CHECK(std::abs(g.mean(sol.phi)) < 1e-13);
    Eigen::VectorXd residual = g.x_derivative(sol.phi, 2) + n;
    CHECK(g.l2_norm(residual) < 1e-10);
    CHECK((g.x_derivative(sol.phi, 1) - sol.grad_phi).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("poisson solve rejects charge with nonzero mean and names it") {
    TorusGrid g(16);
    Eigen::VectorXd n = Eigen::VectorXd::Constant(g.size(), 0.25);
    try {
        g.poisson_solve(n);
        FAIL("expected an exception");
    } catch (const std::invalid_argument& err) {
        const std::string what = err.what();
        CHECK(what.find("mean") != std::string::npos);
        CHECK(what.find("0.25") != std::string::npos);
    }
    Eigen::VectorXd tiny = sample(g, [](double x) { return std::sin(x); });
    CHECK_NOTHROW(g.poisson_solve(tiny));
}

TEST_CASE("leray projection in the slab reduction") {
    TorusGrid g(16);
    Eigen::MatrixXd u(3, g.size());
    for (int i = 0; i < g.size(); ++i) {
        const double x = g.point(i);
        u(0, i) = std::sin(x);
        u(1, i) = 0.0;
        u(2, i) = 0.0;
    }
    Eigen::MatrixXd pu = vpb::leray_project(g, u);
    CHECK(pu.cwiseAbs().maxCoeff() < 1e-14);

    for (int i = 0; i < g.size(); ++i) {
        const double x = g.point(i);
        u(0, i) = 0.0;
        u(1, i) = std::sin(x);
        u(2, i) = std::cos(2.0 * x);
    }
    pu = vpb::leray_project(g, u);
    CHECK((pu - u).cwiseAbs().maxCoeff() < 1e-14);

    for (int i = 0; i < g.size(); ++i) {
        const double x = g.point(i);
        u(0, i) = 0.75;
        u(1, i) = std::sin(x);
        u(2, i) = std::cos(x);
    }
    pu = vpb::leray_project(g, u);
    CHECK((pu - u).cwiseAbs().maxCoeff() < 1e-14);

    Eigen::MatrixXd twice = vpb::leray_project(g, pu);
    CHECK((twice - pu).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("two-thirds dealiasing keeps low modes and zeroes the rest") {
    TorusGrid g(16);
    Eigen::VectorXd f(g.size());
    for (int i = 0; i < g.size(); ++i) {
        const double x = g.point(i);
        f[i] = std::cos(2.0 * x) + std::cos(5.0 * x) + std::sin(7.0 * x);
    }
    Eigen::VectorXd fd = g.dealias(f);
    Eigen::VectorXcd spec = g.forward(fd);
    for (int j = 0; j < g.size(); ++j) {
        const int m = g.mode_number(j);
        if (std::abs(m) == 2) {
            CHECK(std::abs(spec[j] - std::complex<double>(0.5, 0.0)) < 1e-12);
        } else if (std::abs(m) == 5) {
            CHECK(std::abs(spec[j] - std::complex<double>(0.5, 0.0)) < 1e-12);
        } else {
            CHECK(std::abs(spec[j]) < 1e-12);
        }
    }
    CHECK(g.mode_kept(0));
    CHECK(g.mode_kept(5));
    CHECK_FALSE(g.mode_kept(6));
}

TEST_CASE("l2 norm matches analytic values and parseval") {
    TorusGrid g(32);
    Eigen::VectorXd f = sample(g, [](double x) { return std::cos(3.0 * x); });
    CHECK(g.l2_norm(f) == doctest::Approx(std::sqrt(M_PI)).epsilon(1e-12));
    Eigen::VectorXcd spec = g.forward(f);
    const double parseval = spec.squaredNorm() * g.length();
    CHECK(parseval == doctest::Approx(g.l2_norm(f) * g.l2_norm(f)).epsilon(1e-12));
}

TEST_CASE("mode numbering covers positive then negative frequencies") {
    TorusGrid g(8);
    CHECK(g.mode_number(0) == 0);
    CHECK(g.mode_number(1) == 1);
    CHECK(g.mode_number(4) == 4);
    CHECK(g.mode_number(5) == -3);
    CHECK(g.mode_number(7) == -1);
    CHECK(g.wavenumber(7) == doctest::Approx(-1.0).epsilon(1e-15));
}
