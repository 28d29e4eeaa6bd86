#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>

namespace vpb {

/* Periodic spatial grid.
 *
 * Uniform collocation points x_i = i L / n on the torus of circumference L
 * (default 2 pi), n a power of two.  Fields are real nodal vectors; spectra
 * are full-length complex DFT coefficient vectors normalized so that
 *   f(x) = sum_j c_j exp(i k_j x),  k_j = (2 pi / L) m_j,
 * with m_j = j for j <= n/2 and j - n otherwise.  Odd derivatives zero the
 * Nyquist mode; the Poisson solve fixes the gauge by zero spatial mean.
 */

struct PoissonSolution {
    Eigen::VectorXd phi;       // zero-mean potential
    Eigen::VectorXd grad_phi;  // d(phi)/dx (the only nonzero gradient component)
};

class TorusGrid {
  public:
    explicit TorusGrid(int n, double length = 2.0 * M_PI);

    int size() const { return n_; }
    double length() const { return length_; }
    double dx() const { return length_ / n_; }
    double point(int i) const { return i * dx(); }
    Eigen::VectorXd points() const;

    // Signed integer mode number m_j and physical wavenumber k_j for DFT slot j.
    int mode_number(int j) const { return j <= n_ / 2 ? j : j - n_; }
    double wavenumber(int j) const { return two_pi_over_L_ * mode_number(j); }

    Eigen::VectorXcd forward(const Eigen::VectorXd& f) const;
    Eigen::VectorXd inverse(const Eigen::VectorXcd& spec) const;

    // d^order/dx^order; negative order antidifferentiates the zero-mean part
    // (the mean maps to zero).  Odd total order zeroes the Nyquist mode.
    Eigen::VectorXd x_derivative(const Eigen::VectorXd& f, int order = 1) const;
    Eigen::VectorXd derivative(const Eigen::VectorXd& f) const { return x_derivative(f, 1); }
    // Dense differentiation matrix: (D f)_i = f'(x_i) for nodal vectors f.
    const Eigen::MatrixXd& derivative_matrix() const { return deriv_; }

    // Solve -phi'' = n with mean(phi) = 0.  The charge must be mean-free
    // (torus solvability); violations raise an error naming the mean.
    PoissonSolution poisson_solve(const Eigen::VectorXd& n) const;

    // Two-thirds rule: zero every mode with |m_j| > n/3 (Nyquist included).
    Eigen::VectorXd dealias(const Eigen::VectorXd& f) const;
    bool mode_kept(int j) const { return 3 * std::abs(mode_number(j)) <= n_; }

    double mean(const Eigen::VectorXd& f) const { return f.mean(); }
    // sqrt(int |f|^2 dx); the rectangle rule is exact for grid trig polynomials.
    double l2_norm(const Eigen::VectorXd& f) const {
        return std::sqrt(f.squaredNorm() * dx());
    }

  private:
    int n_ = 0;
    double length_ = 0.0;
    double two_pi_over_L_ = 0.0;
    Eigen::MatrixXd deriv_;
};

// Leray projection in the one-dimensional reduction: fields depend on x1 only,
// so divergence-free means the non-mean part of u1 vanishes; u2, u3 and the
// mean of u1 pass through.  u is 3 x n (component by grid point).
Eigen::MatrixXd leray_project(const TorusGrid& grid, const Eigen::MatrixXd& u);

}  // namespace vpb
