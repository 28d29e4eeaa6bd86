#pragma once

#include "vpb/fluid.hpp"
#include "vpb/kinetic.hpp"

namespace vpb {

/* Energy, dissipation, and limit diagnostics.
 *
 * For a snapshot f with potential phi, the unweighted instant energy is
 *   E_N = sum_{a <= N} ||dx^a f||^2 + sum_{a <= N+1} ||dx^a (d phi)||^2
 * and the dissipation rate is
 *   D_N = sum_{1 <= a <= N} ||dx^a P f||^2
 *       + (1/eps^2) sum_{a <= N} ||dx^a {I-P} f||^2_{N^s_gamma}
 *       + sum_{a <= N+1} ||dx^a (d phi)||^2.
 * The anisotropic norm N^s_gamma is reported through its two-sided surrogate
 * bounds built from <v>-weighted fractional Sobolev norms,
 *   lower^2 = ||<v>^{e+g/2+s} g||^2 + ||<v>^{e+g/2} g||^2_{H^s_v},
 *   upper^2 = ||<v>^{e+g/2+s} g||^2 + ||<v>^{e+g/2+s} g||^2_{H^s_v}.
 * The weighted functionals add, with w_l(a, b) the velocity weight tied to a
 * spatial and b velocity derivatives,
 *   E_{N,l} = E_N + sum_{a+|beta| <= N, a <= N-1} ||w_l d_beta dx^a {I-P} f||^2
 *           + eps sum_{a = N} ||w_l dx^a f||^2,
 *   D_{N,l} = D_N
 *           + (1/eps^2) sum_{a+|beta| <= N, a <= N-1}
 *                 ||w_l d_beta dx^a {I-P} f||^2_{N^s_gamma}
 *           + (1/eps) sum_{a = N} ||w_l dx^a {I-P} f||^2_{N^s_gamma}.
 * When the weight's field factor is enabled, the weighted terms carry the
 * species-signed factor exp(+-eps phi(x)) inside the x integral.
 */

struct EnergyOptions {
    int derivative_cap = 2;  // N above; velocity orders up to N must fit the basis
    WeightSpec weight;
    double eps = 1.0;
    double sigma = 2.0;  // conductivity in the Ohm residual
};

struct EnergyRow {
    double t = 0.0;
    double e_n = 0.0;
    double d_low = 0.0;
    double d_high = 0.0;
    // Same surrogates with the 1/eps^2 and 1/eps prefactors dropped.
    double d_low_scaled = 0.0;
    double d_high_scaled = 0.0;
    double e_weighted = 0.0;
    double d_weighted_low = 0.0;
    double d_weighted_high = 0.0;
    double micro_norm = 0.0;
    double boussinesq_dev = 0.0;
    double incompressibility_dev = 0.0;
    double ohm_residual = 0.0;
    // Centered-difference charge-continuity residual and relative species-mass
    // drift; filled by energy_report, zero for a lone snapshot.
    double charge_residual = 0.0;
    double mass_drift = 0.0;
};

struct EnergyReport {
    std::vector<EnergyRow> rows;
    // 4 x (rows - 2) residual norms of the local conservation laws at interior
    // times, rows ordered (rho, u, theta, n); empty when rows < 3.
    Eigen::MatrixXd moment_eq_residuals;
    double lambda_fit = 0.0;
};

EnergyRow energy_functionals(const MomentEngine& eng, const TorusGrid& grid,
                             const KineticState& snapshot, const EnergyOptions& opt);

EnergyReport energy_report(const MomentEngine& eng, const TorusGrid& grid,
                           const KineticTrajectory& traj, const EnergyOptions& opt);

// L2_x residual norms of the four local conservation laws
//   dt rho + (1/eps) dx u1 = 0,
//   dt u + (1/eps) dx(rho + theta) e1 + (1/eps) dx Theta_1.({I-P}(f_+ + f_-)/2)
//        = -(1/2) n (d phi) e1,
//   dt theta + (2/(3 eps)) dx u1 + (2/(3 eps)) dx (5 Lambda_1(same))
//        = -(eps/3) j1 (d phi),
//   dt n + dx j1 = 0,
// with centered time differences, evaluated at the interior snapshots.
Eigen::MatrixXd conservation_residuals(const MomentEngine& eng, const TorusGrid& grid,
                                       const KineticTrajectory& traj, double eps);

// Largest lambda for which t -> e_weighted(t) + lambda int_0^t d_weighted_low
// is non-increasing over the recorded rows (trapezoidal integral).  Returns 0
// when no interval constrains lambda and -infinity when monotonicity fails on
// an interval with zero recorded dissipation.
double fit_dissipation_lambda(const std::vector<EnergyRow>& rows);

struct LimitDeviation {
    std::vector<double> time;
    // 6 x n_times: L2_x errors of (rho, u, theta, n, j, omega) against the
    // fluid solution, the Ohm current, and n theta.
    Eigen::MatrixXd errors;
    double sup_rho = 0.0, sup_u = 0.0, sup_theta = 0.0;
    double sup_n = 0.0, sup_j = 0.0, sup_omega = 0.0;
};

// Compares kinetic macroscopic series against a fluid trajectory at the
// kinetic times.  Fluid states are linearly interpolated when the time grids
// differ; with interpolate = false any misalignment is an error.
LimitDeviation limit_deviation(const TorusGrid& grid, const std::vector<double>& kinetic_times,
                               const std::vector<FluidMoments>& kinetic_moments,
                               const FluidTrajectory& fluid, const FluidCoefficients& coeffs,
                               bool interpolate = true);

}  // namespace vpb
