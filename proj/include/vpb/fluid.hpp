#pragma once

#include "vpb/collision.hpp"
#include "vpb/spatial.hpp"

#include <vector>

namespace vpb {

/* Spectral solver for the limiting two-fluid incompressible system
 *
 *   dt u + u . grad u - nu lap u + grad P = -(1/2) n grad phi,   div u = 0,
 *   dt theta + u . grad theta - kappa lap theta = 0,              rho = -theta,
 *   dt n + u . grad n - (sigma/2) lap n + sigma n = 0,            -lap phi = n,
 *   j = n u - sigma (grad phi + (1/2) grad n),                    omega = n theta,
 *
 * reduced to fields of x1 on the torus.  The pressure is never formed: the
 * velocity equation is Leray-projected.  Advection and the electric force are
 * explicit with dealiased products; every linear diffusion (and the sigma n
 * drift) is folded into an exact per-mode integrating factor, combined in a
 * second-order exponential Heun step.
 */

struct FluidState {
    double t = 0.0;
    Eigen::MatrixXd u;  // 3 x n_x
    Eigen::VectorXd theta, n;

    Eigen::VectorXd rho() const { return -theta; }
};

struct FluidRhs {
    Eigen::MatrixXd du;
    Eigen::VectorXd dtheta, dn;
};

struct OhmCurrent {
    Eigen::MatrixXd j;  // 3 x n_x
    Eigen::VectorXd omega;
};

struct FluidCoefficients {
    double nu = 1.0;
    double kappa = 1.0;
    double sigma = 2.0;

    // The limit system runs on the macroscopic values.
    static FluidCoefficients from_transport(const TransportCoefficients& t) {
        return {t.nu_macro, t.kappa_macro, t.sigma_macro};
    }
};

struct FluidConfig {
    double dt = 1.0e-3;
    double t_end = 0.1;
    int record_every = 1;
    // Abort threshold for the sup norm of any evolved field.
    double blowup_limit = 1.0e6;
};

struct FluidTrajectory {
    std::vector<FluidState> snapshots;
    long steps = 0;
};

// Limit initial data: u(0) = P u0 (Leray), theta(0) = (3/5) theta0 - (2/5) rho0,
// n(0) = n0 with zero spatial mean.
FluidState prepared_fluid_state(const TorusGrid& grid, const Eigen::VectorXd& rho0,
                                const Eigen::MatrixXd& u0, const Eigen::VectorXd& theta0,
                                const Eigen::VectorXd& n0);

// Full time derivative of (u, theta, n); the velocity part is Leray-projected
// and quadratic products are dealiased.
FluidRhs fluid_rhs(const TorusGrid& grid, const FluidState& state, const FluidCoefficients& co);

// j = n u - sigma (grad phi + (1/2) grad n) with -lap phi = n, omega = n theta.
OhmCurrent ohm_current(const TorusGrid& grid, const FluidState& state,
                       const FluidCoefficients& co);

class FluidSolver {
  public:
    FluidSolver(const TorusGrid& grid, FluidCoefficients coeffs, FluidConfig config);

    const FluidConfig& config() const { return cfg_; }
    const FluidCoefficients& coefficients() const { return co_; }

    FluidRhs rhs(const FluidState& state) const { return fluid_rhs(*grid_, state, co_); }
    OhmCurrent ohm(const FluidState& state) const { return ohm_current(*grid_, state, co_); }

    FluidState step(const FluidState& state) const;

    // Integrate from t = 0 to t_end, recording every record_every steps (the
    // initial state included).  The initial velocity must be divergence-free
    // and the charge mean-free.
    FluidTrajectory run(const FluidState& initial) const;

  private:
    struct Explicit {
        Eigen::MatrixXd u;
        Eigen::VectorXd theta, n;
    };
    Explicit explicit_rhs(const FluidState& state) const;
    void check_bounds(const FluidState& state) const;

    const TorusGrid* grid_;
    FluidCoefficients co_;
    FluidConfig cfg_;
    Eigen::VectorXd factor_u_, factor_theta_, factor_n_;  // e^{lambda_k dt} per mode
};

}  // namespace vpb
