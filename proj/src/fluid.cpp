#include "vpb/fluid.hpp"

#include "vpb/io_util.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace vpb {

namespace {

void check_shapes(const TorusGrid& grid, const FluidState& s, const char* where) {
    const int n = grid.size();
    if (s.u.rows() != 3 || s.u.cols() != n || s.theta.size() != n || s.n.size() != n) {
        throw std::invalid_argument(std::string(where) + ": field sizes do not match the grid");
    }
}

void check_coefficients(const FluidCoefficients& co) {
    if (!(co.nu > 0.0) || !(co.kappa > 0.0) || !(co.sigma > 0.0)) {
        throw std::invalid_argument("fluid coefficients nu, kappa, sigma must be positive");
    }
}

Eigen::VectorXd apply_factor(const TorusGrid& grid, const Eigen::VectorXd& f,
                             const Eigen::VectorXd& factor) {
    Eigen::VectorXcd spec = grid.forward(f);
    for (int j = 0; j < spec.size(); ++j) spec[j] *= factor[j];
    return grid.inverse(spec);
}

}  // namespace

FluidState prepared_fluid_state(const TorusGrid& grid, const Eigen::VectorXd& rho0,
                                const Eigen::MatrixXd& u0, const Eigen::VectorXd& theta0,
                                const Eigen::VectorXd& n0) {
    const int n = grid.size();
    if (rho0.size() != n || theta0.size() != n || n0.size() != n || u0.rows() != 3 ||
        u0.cols() != n) {
        throw std::invalid_argument("prepared_fluid_state: field sizes do not match the grid");
    }
    const double n_mean = n0.mean();
    if (std::abs(n_mean) > 1e-12) {
        std::ostringstream msg;
        msg << "prepared_fluid_state: n0 must have zero spatial mean, got mean = "
            << format_g17(n_mean);
        throw std::invalid_argument(msg.str());
    }
    FluidState s;
    s.t = 0.0;
    s.u = leray_project(grid, u0);
    s.theta = (3.0 / 5.0) * theta0 - (2.0 / 5.0) * rho0;
    s.n = n0;
    return s;
}

FluidRhs fluid_rhs(const TorusGrid& grid, const FluidState& s, const FluidCoefficients& co) {
    check_shapes(grid, s, "fluid_rhs");
    check_coefficients(co);
    const int n = grid.size();
    const Eigen::VectorXd u1 = s.u.row(0).transpose();

    FluidRhs out;
    out.du.resize(3, n);
    for (int r = 0; r < 3; ++r) {
        Eigen::VectorXd adv =
            u1.cwiseProduct(grid.x_derivative(s.u.row(r).transpose()));
        out.du.row(r) = -grid.dealias(adv).transpose();
    }
    PoissonSolution pot = grid.poisson_solve(s.n);
    out.du.row(0) -= 0.5 * grid.dealias(s.n.cwiseProduct(pot.grad_phi)).transpose();
    out.du = leray_project(grid, out.du);
    for (int r = 0; r < 3; ++r) {
        out.du.row(r) += co.nu * grid.x_derivative(s.u.row(r).transpose(), 2).transpose();
    }

    out.dtheta = -grid.dealias(u1.cwiseProduct(grid.x_derivative(s.theta))) +
                 co.kappa * grid.x_derivative(s.theta, 2);
    out.dn = -grid.dealias(u1.cwiseProduct(grid.x_derivative(s.n))) +
             0.5 * co.sigma * grid.x_derivative(s.n, 2) - co.sigma * s.n;
    return out;
}

OhmCurrent ohm_current(const TorusGrid& grid, const FluidState& s, const FluidCoefficients& co) {
    check_shapes(grid, s, "ohm_current");
    check_coefficients(co);
    OhmCurrent out;
    out.j.resize(3, grid.size());
    for (int r = 0; r < 3; ++r) {
        out.j.row(r) = s.n.cwiseProduct(s.u.row(r).transpose()).transpose();
    }
    PoissonSolution pot = grid.poisson_solve(s.n);
    out.j.row(0) -= co.sigma * (pot.grad_phi + 0.5 * grid.x_derivative(s.n)).transpose();
    out.omega = s.n.cwiseProduct(s.theta);
    return out;
}

FluidSolver::FluidSolver(const TorusGrid& grid, FluidCoefficients coeffs, FluidConfig config)
    : grid_(&grid), co_(coeffs), cfg_(config) {
    check_coefficients(co_);
    if (!(cfg_.dt > 0.0)) throw std::invalid_argument("fluid config: dt must be positive");
    if (cfg_.t_end < 0.0) throw std::invalid_argument("fluid config: t_end must be nonnegative");
    if (cfg_.record_every < 1) {
        throw std::invalid_argument("fluid config: record_every must be at least 1");
    }
    if (!(cfg_.blowup_limit > 0.0)) {
        throw std::invalid_argument("fluid config: blowup_limit must be positive");
    }
    const int n = grid.size();
    factor_u_.resize(n);
    factor_theta_.resize(n);
    factor_n_.resize(n);
    for (int j = 0; j < n; ++j) {
        const double k2 = grid.wavenumber(j) * grid.wavenumber(j);
        factor_u_[j] = std::exp(-co_.nu * k2 * cfg_.dt);
        factor_theta_[j] = std::exp(-co_.kappa * k2 * cfg_.dt);
        factor_n_[j] = std::exp(-(0.5 * co_.sigma * k2 + co_.sigma) * cfg_.dt);
    }
}

FluidSolver::Explicit FluidSolver::explicit_rhs(const FluidState& s) const {
    const TorusGrid& grid = *grid_;
    const Eigen::VectorXd u1 = s.u.row(0).transpose();
    Explicit out;
    out.u.resize(3, grid.size());
    for (int r = 0; r < 3; ++r) {
        Eigen::VectorXd adv = u1.cwiseProduct(grid.x_derivative(s.u.row(r).transpose()));
        out.u.row(r) = -grid.dealias(adv).transpose();
    }
    PoissonSolution pot = grid.poisson_solve(s.n);
    out.u.row(0) -= 0.5 * grid.dealias(s.n.cwiseProduct(pot.grad_phi)).transpose();
    out.u = leray_project(grid, out.u);
    out.theta = -grid.dealias(u1.cwiseProduct(grid.x_derivative(s.theta)));
    out.n = -grid.dealias(u1.cwiseProduct(grid.x_derivative(s.n)));
    return out;
}

void FluidSolver::check_bounds(const FluidState& s) const {
    const double sup_u = s.u.lpNorm<Eigen::Infinity>();
    const double sup_theta = s.theta.lpNorm<Eigen::Infinity>();
    const double sup_n = s.n.lpNorm<Eigen::Infinity>();
    const bool finite = s.u.allFinite() && s.theta.allFinite() && s.n.allFinite();
    if (!finite || sup_u > cfg_.blowup_limit || sup_theta > cfg_.blowup_limit ||
        sup_n > cfg_.blowup_limit) {
        std::ostringstream msg;
        msg << "fluid step diverged at t = " << format_g17(s.t)
            << ": sup|u| = " << format_g17(sup_u) << ", sup|theta| = " << format_g17(sup_theta)
            << ", sup|n| = " << format_g17(sup_n) << " (limit " << format_g17(cfg_.blowup_limit)
            << ")";
        throw std::runtime_error(msg.str());
    }
}

FluidState FluidSolver::step(const FluidState& s) const {
    check_shapes(*grid_, s, "fluid step");
    const TorusGrid& grid = *grid_;
    const double h = cfg_.dt;

    Explicit k1 = explicit_rhs(s);

    FluidState pred;
    pred.t = s.t + h;
    pred.u.resize(3, grid.size());
    for (int r = 0; r < 3; ++r) {
        pred.u.row(r) =
            apply_factor(grid, (s.u.row(r) + h * k1.u.row(r)).transpose(), factor_u_).transpose();
    }
    pred.theta = apply_factor(grid, s.theta + h * k1.theta, factor_theta_);
    pred.n = apply_factor(grid, s.n + h * k1.n, factor_n_);

    Explicit k2 = explicit_rhs(pred);

    FluidState next;
    next.t = s.t + h;
    next.u.resize(3, grid.size());
    for (int r = 0; r < 3; ++r) {
        next.u.row(r) = apply_factor(grid, (s.u.row(r) + 0.5 * h * k1.u.row(r)).transpose(),
                                     factor_u_)
                            .transpose() +
                        0.5 * h * k2.u.row(r);
    }
    next.u = leray_project(grid, next.u);
    next.theta = apply_factor(grid, s.theta + 0.5 * h * k1.theta, factor_theta_) +
                 0.5 * h * k2.theta;
    next.n = apply_factor(grid, s.n + 0.5 * h * k1.n, factor_n_) + 0.5 * h * k2.n;

    check_bounds(next);
    return next;
}

FluidTrajectory FluidSolver::run(const FluidState& initial) const {
    check_shapes(*grid_, initial, "fluid run");
    const Eigen::VectorXd div = initial.u.row(0).transpose() -
                                Eigen::VectorXd::Constant(grid_->size(), initial.u.row(0).mean());
    if (div.lpNorm<Eigen::Infinity>() > 1e-10) {
        throw std::invalid_argument(
            "fluid run: initial velocity is not divergence-free; apply the Leray projection");
    }
    if (std::abs(initial.n.mean()) > 1e-10) {
        throw std::invalid_argument("fluid run: initial charge must have zero spatial mean");
    }

    FluidTrajectory traj;
    FluidState state = initial;
    state.t = 0.0;
    const long n_steps = static_cast<long>(std::floor(cfg_.t_end / cfg_.dt + 1e-9));
    traj.snapshots.push_back(state);
    for (long k = 1; k <= n_steps; ++k) {
        state = step(state);
        if (k % cfg_.record_every == 0) traj.snapshots.push_back(state);
    }
    traj.steps = n_steps;
    return traj;
}

}  // namespace vpb
