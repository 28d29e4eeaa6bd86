#include "vpb/spatial.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <sstream>

namespace vpb {

namespace {

Eigen::FFT<double>& fft_engine() {
    thread_local Eigen::FFT<double> fft;
    return fft;
}

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

}  // namespace

TorusGrid::TorusGrid(int n, double length) : n_(n), length_(length) {
    if (!is_power_of_two(n) || n < 8) {
        throw std::invalid_argument("TorusGrid: number of points must be a power of two >= 8, got " +
                                    std::to_string(n));
    }
    if (!(length > 0.0) || !std::isfinite(length)) {
        throw std::invalid_argument("TorusGrid: circumference must be positive and finite");
    }
    two_pi_over_L_ = 2.0 * M_PI / length_;

    deriv_.resize(n_, n_);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n_);
    for (int j = 0; j < n_; ++j) {
        e.setZero();
        e[j] = 1.0;
        deriv_.col(j) = x_derivative(e, 1);
    }
}

Eigen::VectorXd TorusGrid::points() const {
    Eigen::VectorXd x(n_);
    for (int i = 0; i < n_; ++i) x[i] = point(i);
    return x;
}

Eigen::VectorXcd TorusGrid::forward(const Eigen::VectorXd& f) const {
    if (f.size() != n_) throw std::invalid_argument("forward: field size mismatch");
    Eigen::VectorXcd spec(n_);
    fft_engine().fwd(spec, f);
    spec /= static_cast<double>(n_);
    return spec;
}

Eigen::VectorXd TorusGrid::inverse(const Eigen::VectorXcd& spec) const {
    if (spec.size() != n_) throw std::invalid_argument("inverse: spectrum size mismatch");
    Eigen::VectorXcd scaled = spec * static_cast<double>(n_);
    Eigen::VectorXd f(n_);
    fft_engine().inv(f, scaled);
    return f;
}

Eigen::VectorXd TorusGrid::x_derivative(const Eigen::VectorXd& f, int order) const {
    if (order == 0) return f;
    Eigen::VectorXcd spec = forward(f);
    const std::complex<double> i_unit(0.0, 1.0);
    for (int j = 0; j < n_; ++j) {
        const int m = mode_number(j);
        if (m == 0) {
            spec[j] = 0.0;
            continue;
        }
        if (std::abs(m) == n_ / 2 && (order % 2 != 0)) {
            spec[j] = 0.0;
            continue;
        }
        const std::complex<double> ik = i_unit * wavenumber(j);
        spec[j] *= std::pow(ik, order);
    }
    return inverse(spec);
}

PoissonSolution TorusGrid::poisson_solve(const Eigen::VectorXd& n) const {
    if (n.size() != n_) throw std::invalid_argument("poisson_solve: field size mismatch");
    const double m = n.mean();
    if (std::abs(m) > 1e-10) {
        std::ostringstream msg;
        msg << "poisson_solve: charge density must have zero spatial mean, got mean = " << m;
        throw std::invalid_argument(msg.str());
    }
    Eigen::VectorXcd spec = forward(n);
    Eigen::VectorXcd phi_spec(n_);
    Eigen::VectorXcd grad_spec(n_);
    const std::complex<double> i_unit(0.0, 1.0);
    for (int j = 0; j < n_; ++j) {
        const int mj = mode_number(j);
        if (mj == 0) {
            phi_spec[j] = 0.0;
            grad_spec[j] = 0.0;
            continue;
        }
        const double k = wavenumber(j);
        phi_spec[j] = spec[j] / (k * k);
        if (std::abs(mj) == n_ / 2) {
            grad_spec[j] = 0.0;
        } else {
            grad_spec[j] = i_unit * k * phi_spec[j];
        }
    }
    PoissonSolution sol;
    sol.phi = inverse(phi_spec);
    sol.grad_phi = inverse(grad_spec);
    return sol;
}

Eigen::VectorXd TorusGrid::dealias(const Eigen::VectorXd& f) const {
    Eigen::VectorXcd spec = forward(f);
    for (int j = 0; j < n_; ++j) {
        if (!mode_kept(j)) spec[j] = 0.0;
    }
    return inverse(spec);
}

Eigen::MatrixXd leray_project(const TorusGrid& grid, const Eigen::MatrixXd& u) {
    if (u.rows() != 3 || u.cols() != grid.size()) {
        throw std::invalid_argument("leray_project: expected a 3 x n velocity field");
    }
    Eigen::MatrixXd out = u;
    const double m = u.row(0).mean();
    out.row(0).setConstant(m);
    return out;
}

}  // namespace vpb
