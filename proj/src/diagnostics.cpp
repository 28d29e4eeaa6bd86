#include "vpb/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace vpb {

namespace {

struct SandwichSq {
    double low = 0.0;
    double high = 0.0;
};

SandwichSq nsg_squared(const MomentEngine& eng, const TorusGrid& grid,
                       const TwoSpeciesDistribution& g, double base_exponent,
                       const WeightSpec& w) {
    const double shared =
        std::pow(eng.weighted_norm(grid, g, base_exponent + 0.5 * w.gamma + w.s, 0.0), 2);
    SandwichSq out;
    out.low = shared +
              std::pow(eng.weighted_norm(grid, g, base_exponent + 0.5 * w.gamma, w.s), 2);
    out.high = shared +
               std::pow(eng.weighted_norm(grid, g, base_exponent + 0.5 * w.gamma + w.s, w.s), 2);
    return out;
}

TwoSpeciesDistribution x_derivative_of(const TorusGrid& grid,
                                       const TwoSpeciesDistribution& g) {
    return {apply_x_derivative(grid, g.plus), apply_x_derivative(grid, g.minus)};
}

TwoSpeciesDistribution v_derivative_of(const HermiteBasis& basis,
                                       const TwoSpeciesDistribution& g, int axis) {
    return {apply_v_derivative(basis, g.plus, axis), apply_v_derivative(basis, g.minus, axis)};
}

TwoSpeciesDistribution beta_derivative(const HermiteBasis& basis,
                                       const TwoSpeciesDistribution& g, int b1, int b2,
                                       int b3) {
    TwoSpeciesDistribution out = g;
    for (int k = 0; k < b1; ++k) out = v_derivative_of(basis, out, 0);
    for (int k = 0; k < b2; ++k) out = v_derivative_of(basis, out, 1);
    for (int k = 0; k < b3; ++k) out = v_derivative_of(basis, out, 2);
    return out;
}

void scale_species_columns(TwoSpeciesDistribution& g, const Eigen::VectorXd& cp,
                           const Eigen::VectorXd& cm) {
    g.plus.array().rowwise() *= cp.transpose().array();
    g.minus.array().rowwise() *= cm.transpose().array();
}

double stacked_l2(const TorusGrid& grid, const Eigen::MatrixXd& rows) {
    return std::sqrt(rows.squaredNorm() * grid.dx());
}

void check_snapshot(const MomentEngine& eng, const TorusGrid& grid,
                    const KineticState& snapshot) {
    if (snapshot.f.modes() != eng.basis().size() || snapshot.f.nx() != grid.size() ||
        snapshot.phi.size() != grid.size() || snapshot.grad_phi.size() != grid.size()) {
        throw std::invalid_argument("energy functionals: snapshot shape does not match the basis and grid");
    }
}

}  // namespace

EnergyRow energy_functionals(const MomentEngine& eng, const TorusGrid& grid,
                             const KineticState& snapshot, const EnergyOptions& opt) {
    const int N = opt.derivative_cap;
    const int K = eng.basis().degree_cap();
    if (N < 0 || N > K - N) {
        throw std::invalid_argument(
            "energy functionals: derivative budget exceeded (cap " + std::to_string(N) +
            " requires velocity orders up to " + std::to_string(N) + " within degree " +
            std::to_string(K) + ")");
    }
    if (!(opt.eps > 0.0)) {
        throw std::invalid_argument("energy functionals: eps must be positive");
    }
    check_snapshot(eng, grid, snapshot);

    const double eps = opt.eps;
    const WeightSpec& w = opt.weight;
    const HermiteBasis& basis = eng.basis();

    std::vector<TwoSpeciesDistribution> fx(N + 1), microx(N + 1), px(N + 1);
    fx[0] = snapshot.f;
    microx[0] = eng.micro_part(snapshot.f);
    px[0] = eng.apply_P(snapshot.f);
    for (int a = 1; a <= N; ++a) {
        fx[a] = x_derivative_of(grid, fx[a - 1]);
        microx[a] = x_derivative_of(grid, microx[a - 1]);
        px[a] = x_derivative_of(grid, px[a - 1]);
    }

    double phi_sq = std::pow(grid.l2_norm(snapshot.grad_phi), 2);
    for (int a = 1; a <= N + 1; ++a) {
        phi_sq += std::pow(grid.l2_norm(grid.x_derivative(snapshot.grad_phi, a)), 2);
    }

    EnergyRow row;
    row.t = snapshot.t;

    double f_sq = 0.0;
    for (int a = 0; a <= N; ++a) f_sq += std::pow(eng.weighted_norm(grid, fx[a], 0.0, 0.0), 2);
    row.e_n = f_sq + phi_sq;

    row.micro_norm = eng.weighted_norm(grid, microx[0], 0.0, 0.0);

    double p_sq = 0.0;
    for (int a = 1; a <= N; ++a) p_sq += std::pow(eng.weighted_norm(grid, px[a], 0.0, 0.0), 2);
    SandwichSq micro_nsg;
    for (int a = 0; a <= N; ++a) {
        const SandwichSq part = nsg_squared(eng, grid, microx[a], 0.0, w);
        micro_nsg.low += part.low;
        micro_nsg.high += part.high;
    }
    row.d_low = p_sq + micro_nsg.low / (eps * eps) + phi_sq;
    row.d_high = p_sq + micro_nsg.high / (eps * eps) + phi_sq;
    row.d_low_scaled = p_sq + micro_nsg.low + phi_sq;
    row.d_high_scaled = p_sq + micro_nsg.high + phi_sq;

    Eigen::VectorXd cp, cm;
    if (w.use_field_factor) {
        cp = (0.5 * eps * snapshot.phi.array()).exp();
        cm = (-0.5 * eps * snapshot.phi.array()).exp();
    }

    double wmicro_sq = 0.0;
    SandwichSq wmicro_nsg;
    for (int a = 0; a <= N - 1; ++a) {
        for (int b = 0; a + b <= N; ++b) {
            for (int b1 = b; b1 >= 0; --b1) {
                for (int b2 = b - b1; b2 >= 0; --b2) {
                    const int b3 = b - b1 - b2;
                    TwoSpeciesDistribution field = beta_derivative(basis, microx[a], b1, b2, b3);
                    if (w.use_field_factor) scale_species_columns(field, cp, cm);
                    const double e = w.exponent(a, b);
                    wmicro_sq += std::pow(eng.weighted_norm(grid, field, e, 0.0), 2);
                    const SandwichSq part = nsg_squared(eng, grid, field, e, w);
                    wmicro_nsg.low += part.low;
                    wmicro_nsg.high += part.high;
                }
            }
        }
    }

    TwoSpeciesDistribution top_f = fx[N];
    TwoSpeciesDistribution top_micro = microx[N];
    if (w.use_field_factor) {
        scale_species_columns(top_f, cp, cm);
        scale_species_columns(top_micro, cp, cm);
    }
    const double top_exp = w.exponent(N, 0);
    const double top_e_sq = std::pow(eng.weighted_norm(grid, top_f, top_exp, 0.0), 2);
    const SandwichSq top_nsg = nsg_squared(eng, grid, top_micro, top_exp, w);

    row.e_weighted = row.e_n + wmicro_sq + eps * top_e_sq;
    row.d_weighted_low = row.d_low + wmicro_nsg.low / (eps * eps) + top_nsg.low / eps;
    row.d_weighted_high = row.d_high + wmicro_nsg.high / (eps * eps) + top_nsg.high / eps;

    const FluidMoments mom = eng.moments(snapshot.f, eps);
    row.boussinesq_dev = grid.l2_norm(mom.rho + mom.theta);
    row.incompressibility_dev = grid.l2_norm(grid.x_derivative(mom.u.row(0).transpose()));

    const Eigen::MatrixXd pu = leray_project(grid, mom.u);
    Eigen::MatrixXd target(3, grid.size());
    for (int r = 0; r < 3; ++r) target.row(r) = mom.n.transpose().cwiseProduct(pu.row(r));
    const Eigen::VectorXd dn = grid.x_derivative(mom.n);
    target.row(0) -= opt.sigma * (snapshot.grad_phi + 0.5 * dn).transpose();
    row.ohm_residual = stacked_l2(grid, mom.j - target);

    return row;
}

Eigen::MatrixXd conservation_residuals(const MomentEngine& eng, const TorusGrid& grid,
                                       const KineticTrajectory& traj, double eps) {
    const int n = static_cast<int>(traj.snapshots.size());
    if (n < 3) {
        throw std::invalid_argument("conservation residuals need at least 3 snapshots, got " +
                                    std::to_string(n));
    }
    if (traj.moments.size() != traj.snapshots.size()) {
        throw std::invalid_argument("conservation residuals: moment series does not match the snapshots");
    }
    if (!(eps > 0.0)) {
        throw std::invalid_argument("conservation residuals: eps must be positive");
    }

    Eigen::MatrixXd out(4, n - 2);
    for (int k = 1; k + 1 < n; ++k) {
        const FluidMoments& prev = traj.moments[k - 1];
        const FluidMoments& mid = traj.moments[k];
        const FluidMoments& next = traj.moments[k + 1];
        const double span = traj.snapshots[k + 1].t - traj.snapshots[k - 1].t;
        const Eigen::VectorXd& gphi = traj.snapshots[k].grad_phi;

        const TwoSpeciesDistribution micro = eng.micro_part(traj.snapshots[k].f);
        const Eigen::MatrixXd w_half = 0.5 * (micro.plus + micro.minus);

        const Eigen::VectorXd r_mass =
            (next.rho - prev.rho) / span + grid.x_derivative(mid.u.row(0).transpose()) / eps;
        out(0, k - 1) = grid.l2_norm(r_mass);

        Eigen::MatrixXd r_mom(3, grid.size());
        for (int r = 0; r < 3; ++r) {
            Eigen::VectorXd res = ((next.u.row(r) - prev.u.row(r)) / span).transpose();
            res += grid.x_derivative(eng.theta_moment(w_half, 0, r)) / eps;
            if (r == 0) {
                res += grid.x_derivative(mid.rho + mid.theta) / eps;
                res += 0.5 * mid.n.cwiseProduct(gphi);
            }
            r_mom.row(r) = res.transpose();
        }
        out(1, k - 1) = stacked_l2(grid, r_mom);

        Eigen::VectorXd r_heat = (next.theta - prev.theta) / span;
        r_heat += (2.0 / (3.0 * eps)) * grid.x_derivative(mid.u.row(0).transpose());
        r_heat += (2.0 / (3.0 * eps)) * 5.0 * grid.x_derivative(eng.lambda_moment(w_half, 0));
        r_heat += (eps / 3.0) * mid.j.row(0).transpose().cwiseProduct(gphi);
        out(2, k - 1) = grid.l2_norm(r_heat);

        const Eigen::VectorXd r_charge =
            (next.n - prev.n) / span + grid.x_derivative(mid.j.row(0).transpose());
        out(3, k - 1) = grid.l2_norm(r_charge);
    }
    return out;
}

double fit_dissipation_lambda(const std::vector<EnergyRow>& rows) {
    double best = std::numeric_limits<double>::infinity();
    for (size_t k = 0; k + 1 < rows.size(); ++k) {
        const double dt = rows[k + 1].t - rows[k].t;
        const double integral = 0.5 * dt * (rows[k].d_weighted_low + rows[k + 1].d_weighted_low);
        const double de = rows[k + 1].e_weighted - rows[k].e_weighted;
        if (integral > 0.0) {
            best = std::min(best, -de / integral);
        } else if (de > 0.0) {
            return -std::numeric_limits<double>::infinity();
        }
    }
    if (std::isinf(best)) return 0.0;
    return best;
}

EnergyReport energy_report(const MomentEngine& eng, const TorusGrid& grid,
                           const KineticTrajectory& traj, const EnergyOptions& opt) {
    if (traj.moments.size() != traj.snapshots.size()) {
        throw std::invalid_argument("energy report: moment series does not match the snapshots");
    }
    const int n = static_cast<int>(traj.snapshots.size());

    EnergyReport report;
    report.rows.reserve(n);
    for (const KineticState& s : traj.snapshots) {
        report.rows.push_back(energy_functionals(eng, grid, s, opt));
    }

    const int e0 = eng.basis().find(0, 0, 0);
    std::vector<double> mass_plus(n), mass_minus(n);
    for (int k = 0; k < n; ++k) {
        mass_plus[k] = grid.dx() * traj.snapshots[k].f.plus.row(e0).sum();
        mass_minus[k] = grid.dx() * traj.snapshots[k].f.minus.row(e0).sum();
    }
    for (int k = 0; k < n; ++k) {
        const double dp =
            std::abs(mass_plus[k] - mass_plus[0]) / std::max(1.0, std::abs(mass_plus[0]));
        const double dm =
            std::abs(mass_minus[k] - mass_minus[0]) / std::max(1.0, std::abs(mass_minus[0]));
        report.rows[k].mass_drift = std::max(dp, dm);
    }

    if (n >= 3) {
        auto charge_rate = [&](int k) { return grid.x_derivative(traj.moments[k].j.row(0).transpose()); };
        for (int k = 0; k < n; ++k) {
            Eigen::VectorXd dndt;
            if (k == 0) {
                const double span = traj.snapshots[2].t - traj.snapshots[0].t;
                dndt = (-3.0 * traj.moments[0].n + 4.0 * traj.moments[1].n - traj.moments[2].n) /
                       span;
            } else if (k == n - 1) {
                const double span = traj.snapshots[n - 1].t - traj.snapshots[n - 3].t;
                dndt = (3.0 * traj.moments[n - 1].n - 4.0 * traj.moments[n - 2].n +
                        traj.moments[n - 3].n) /
                       span;
            } else {
                const double span = traj.snapshots[k + 1].t - traj.snapshots[k - 1].t;
                dndt = (traj.moments[k + 1].n - traj.moments[k - 1].n) / span;
            }
            report.rows[k].charge_residual = grid.l2_norm(dndt + charge_rate(k));
        }
        report.moment_eq_residuals = conservation_residuals(eng, grid, traj, opt.eps);
    } else {
        report.moment_eq_residuals = Eigen::MatrixXd(4, 0);
    }

    report.lambda_fit = fit_dissipation_lambda(report.rows);
    return report;
}

LimitDeviation limit_deviation(const TorusGrid& grid, const std::vector<double>& kinetic_times,
                               const std::vector<FluidMoments>& kinetic_moments,
                               const FluidTrajectory& fluid, const FluidCoefficients& coeffs,
                               bool interpolate) {
    if (kinetic_times.size() != kinetic_moments.size()) {
        throw std::invalid_argument("limit deviation: kinetic time and moment series differ in length");
    }
    if (fluid.snapshots.empty()) {
        throw std::invalid_argument("limit deviation: fluid series is empty");
    }
    const double tol = 1e-9;
    const int n = static_cast<int>(kinetic_times.size());
    const int nf = static_cast<int>(fluid.snapshots.size());

    LimitDeviation dev;
    dev.time = kinetic_times;
    dev.errors = Eigen::MatrixXd::Zero(6, n);

    for (int k = 0; k < n; ++k) {
        const double t = kinetic_times[k];
        if (t < fluid.snapshots.front().t - tol || t > fluid.snapshots.back().t + tol) {
            throw std::invalid_argument("limit deviation: kinetic time " + std::to_string(t) +
                                        " is outside the fluid time range");
        }
        int j = 0;
        while (j + 1 < nf && fluid.snapshots[j + 1].t <= t + tol) ++j;

        FluidState state;
        if (std::abs(fluid.snapshots[j].t - t) <= tol) {
            state = fluid.snapshots[j];
        } else {
            if (!interpolate) {
                throw std::invalid_argument(
                    "limit deviation: time series are misaligned; enable interpolation");
            }
            const FluidState& a = fluid.snapshots[j];
            const FluidState& b = fluid.snapshots[j + 1];
            const double wgt = (t - a.t) / (b.t - a.t);
            state.t = t;
            state.u = (1.0 - wgt) * a.u + wgt * b.u;
            state.theta = (1.0 - wgt) * a.theta + wgt * b.theta;
            state.n = (1.0 - wgt) * a.n + wgt * b.n;
        }

        const OhmCurrent ohm = ohm_current(grid, state, coeffs);
        const FluidMoments& kin = kinetic_moments[k];
        dev.errors(0, k) = grid.l2_norm(kin.rho - state.rho());
        dev.errors(1, k) = stacked_l2(grid, kin.u - state.u);
        dev.errors(2, k) = grid.l2_norm(kin.theta - state.theta);
        dev.errors(3, k) = grid.l2_norm(kin.n - state.n);
        dev.errors(4, k) = stacked_l2(grid, kin.j - ohm.j);
        dev.errors(5, k) = grid.l2_norm(kin.omega - ohm.omega);
    }

    dev.sup_rho = dev.errors.row(0).maxCoeff();
    dev.sup_u = dev.errors.row(1).maxCoeff();
    dev.sup_theta = dev.errors.row(2).maxCoeff();
    dev.sup_n = dev.errors.row(3).maxCoeff();
    dev.sup_j = dev.errors.row(4).maxCoeff();
    dev.sup_omega = dev.errors.row(5).maxCoeff();
    return dev;
}

}  // namespace vpb
