#include "vpb/harness.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

namespace vpb {

namespace {

void validate_modes(const ModeList& modes, const char* field) {
    for (const FourierMode& m : modes) {
        if (m.k < 1)
            throw std::invalid_argument(std::string(field) +
                                        ": mode numbers must be >= 1, got k=" + std::to_string(m.k));
        if (!std::isfinite(m.cos_amp) || !std::isfinite(m.sin_amp))
            throw std::invalid_argument(std::string(field) + ": mode amplitude is not finite");
    }
}

void validate_sweep(const SweepConfig& cfg, const CollisionOperator& op) {
    if (cfg.eps_ladder.empty()) throw std::invalid_argument("eps_ladder: must not be empty");
    for (std::size_t i = 0; i < cfg.eps_ladder.size(); ++i) {
        const double eps = cfg.eps_ladder[i];
        if (!(eps > 0.0) || !std::isfinite(eps))
            throw std::invalid_argument("eps_ladder: entries must be positive, entry " +
                                        std::to_string(i) + " is " + std::to_string(eps));
        if (i > 0 && !(eps < cfg.eps_ladder[i - 1]))
            throw std::invalid_argument("eps_ladder: must be strictly decreasing, entry " +
                                        std::to_string(i) + " does not decrease");
    }
    if (!(cfg.amplitude >= 0.0) || !std::isfinite(cfg.amplitude))
        throw std::invalid_argument("amplitude: must be a finite non-negative real");
    if (!(cfg.t_end > 0.0)) throw std::invalid_argument("t_end: must be positive");
    if (!(cfg.fluid_dt > 0.0)) throw std::invalid_argument("fluid_dt: must be positive");
    if (!(cfg.record_dt > 0.0)) throw std::invalid_argument("record_dt: must be positive");
    if (!(cfg.cfl_safety > 0.0) || cfg.cfl_safety > 1.0)
        throw std::invalid_argument("cfl_safety: must lie in (0, 1]");
    if (cfg.degree_cap < 2) throw std::invalid_argument("degree_cap: must be >= 2");
    if (op.backend != cfg.backend)
        throw std::invalid_argument("backend: collision operator backend does not match the sweep");
    if (op.degree_cap != cfg.degree_cap)
        throw std::invalid_argument("degree_cap: collision operator was assembled at cap " +
                                    std::to_string(op.degree_cap) + ", sweep requests " +
                                    std::to_string(cfg.degree_cap));
    validate_modes(cfg.rho_modes, "rho_modes");
    validate_modes(cfg.theta_modes, "theta_modes");
    validate_modes(cfg.n_modes, "n_modes");
    for (int r = 0; r < 3; ++r) validate_modes(cfg.u_modes[r], "u_modes");
}

struct FitResult {
    double slope = 0.0, intercept = 0.0, r2 = 0.0;
    bool defined = false;
};

FitResult fit_loglog(const std::vector<double>& eps, const Eigen::VectorXd& err) {
    FitResult out;
    const int n = static_cast<int>(eps.size());
    if (n < 2) return out;
    for (int j = 0; j < n; ++j)
        if (!(err[j] > 0.0) || !std::isfinite(err[j])) return out;

    Eigen::VectorXd x(n), y(n);
    for (int j = 0; j < n; ++j) {
        x[j] = std::log(eps[j]);
        y[j] = std::log(err[j]);
    }
    const double xm = x.mean(), ym = y.mean();
    const double sxx = (x.array() - xm).square().sum();
    if (sxx <= 0.0) return out;
    out.slope = ((x.array() - xm) * (y.array() - ym)).sum() / sxx;
    out.intercept = ym - out.slope * xm;
    const double ss_tot = (y.array() - ym).square().sum();
    const double ss_res = (y.array() - (out.intercept + out.slope * x.array())).square().sum();
    out.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
    out.defined = true;
    return out;
}

std::string format_eps(double eps) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", eps);
    return buf;
}

}  // namespace

Eigen::VectorXd synthesize_field(const TorusGrid& grid, const ModeList& modes, double amplitude) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(grid.size());
    for (const FourierMode& m : modes)
        for (int i = 0; i < grid.size(); ++i) {
            const double phase = m.k * grid.point(i);
            out[i] += amplitude * (m.cos_amp * std::cos(phase) + m.sin_amp * std::sin(phase));
        }
    return out;
}

ConvergenceResult run_sweep(const SweepConfig& cfg, const CollisionOperator& op,
                            SweepArtifacts* artifacts) {
    validate_sweep(cfg, op);

    const HermiteBasis basis(cfg.degree_cap);
    const MomentEngine eng(basis);
    const TorusGrid grid(cfg.x_modes);

    const Eigen::VectorXd rho0 = synthesize_field(grid, cfg.rho_modes, cfg.amplitude);
    const Eigen::VectorXd theta0 = synthesize_field(grid, cfg.theta_modes, cfg.amplitude);
    const Eigen::VectorXd n0 = synthesize_field(grid, cfg.n_modes, cfg.amplitude);
    Eigen::MatrixXd u0(3, grid.size());
    for (int r = 0; r < 3; ++r)
        u0.row(r) = synthesize_field(grid, cfg.u_modes[r], cfg.amplitude).transpose();

    const TwoSpeciesDistribution f0 = well_prepared_initial(eng, grid, rho0, u0, theta0, n0);
    if (cfg.backend == CollisionBackend::BGK) {
        const double eps_max = cfg.eps_ladder.front();
        try {
            apply_bgk_collision(basis, f0, eps_max, op.relaxation_rate);
        } catch (const StepRejected& e) {
            throw std::invalid_argument("amplitude: initial data violates relaxation positivity "
                                        "at eps=" +
                                        format_eps(eps_max) + ": " + e.what());
        }
    }

    const FluidCoefficients coeffs = FluidCoefficients::from_transport(
        transport_coefficients(op, eng));
    FluidConfig fcfg;
    fcfg.dt = cfg.fluid_dt;
    fcfg.t_end = cfg.t_end;
    fcfg.record_every = std::max(1, static_cast<int>(std::llround(cfg.record_dt / cfg.fluid_dt)));
    FluidTrajectory fluid;
    try {
        fluid = FluidSolver(grid, coeffs, fcfg).run(
            prepared_fluid_state(grid, rho0, u0, theta0, n0));
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("fluid solver aborted: ") + e.what());
    }

    const int n_eps = static_cast<int>(cfg.eps_ladder.size());
    ConvergenceResult result;
    result.eps_ladder = cfg.eps_ladder;
    result.sup_errors.resize(6, n_eps);
    result.boussinesq_at_end.resize(n_eps);
    result.div_u_at_end.resize(n_eps);
    if (artifacts) {
        artifacts->fluid = fluid;
        artifacts->kinetic.clear();
        artifacts->kinetic_dt.clear();
    }

    for (int j = 0; j < n_eps; ++j) {
        const double eps = cfg.eps_ladder[j];
        const double dt_cfl = cfg.cfl_safety * eps * grid.dx() / basis.max_node_speed();
        const long steps = std::max(1L, static_cast<long>(std::ceil(cfg.t_end / dt_cfl)));

        KineticConfig kcfg;
        kcfg.eps = eps;
        kcfg.dt = cfg.t_end / static_cast<double>(steps);
        kcfg.t_end = cfg.t_end;
        kcfg.collision_backend = cfg.backend;
        kcfg.cfl_safety = cfg.cfl_safety;
        kcfg.record_every =
            std::max(1, static_cast<int>(std::llround(cfg.record_dt / kcfg.dt)));

        KineticTrajectory traj;
        try {
            KineticSolver solver(eng, grid, op, kcfg);
            try {
                traj = solver.run(f0);
            } catch (const std::exception& e) {
                throw std::runtime_error("kinetic run at eps=" + format_eps(eps) + ": " +
                                         e.what());
            }
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument("kinetic setup at eps=" + format_eps(eps) + ": " +
                                        e.what());
        }
        for (const KineticState& s : traj.snapshots)
            if (!s.f.plus.allFinite() || !s.f.minus.allFinite())
                throw std::runtime_error("kinetic run at eps=" + format_eps(eps) +
                                         ": solution lost finiteness");

        std::vector<double> times;
        times.reserve(traj.snapshots.size());
        for (const KineticState& s : traj.snapshots) times.push_back(s.t);
        const LimitDeviation dev = limit_deviation(grid, times, traj.moments, fluid, coeffs);
        result.sup_errors(0, j) = dev.sup_rho;
        result.sup_errors(1, j) = dev.sup_u;
        result.sup_errors(2, j) = dev.sup_theta;
        result.sup_errors(3, j) = dev.sup_n;
        result.sup_errors(4, j) = dev.sup_j;
        result.sup_errors(5, j) = dev.sup_omega;

        const FluidMoments& last = traj.moments.back();
        result.boussinesq_at_end[j] = grid.l2_norm(last.rho + last.theta);
        result.div_u_at_end[j] = grid.l2_norm(grid.x_derivative(last.u.row(0).transpose()));

        if (artifacts) {
            artifacts->kinetic.push_back(std::move(traj));
            artifacts->kinetic_dt.push_back(kcfg.dt);
        }
    }

    result.slopes.setZero(6);
    result.intercepts.setZero(6);
    result.r_squared.setZero(6);
    for (int m = 0; m < 6; ++m) {
        const FitResult fit = fit_loglog(cfg.eps_ladder, result.sup_errors.row(m).transpose());
        result.slopes[m] = fit.slope;
        result.intercepts[m] = fit.intercept;
        result.r_squared[m] = fit.r2;
        result.slope_defined[m] = fit.defined;
    }
    for (int j = 0; j < n_eps; ++j) {
        result.boussinesq_constant =
            std::max(result.boussinesq_constant, result.boussinesq_at_end[j] / cfg.eps_ladder[j]);
        result.div_u_constant =
            std::max(result.div_u_constant, result.div_u_at_end[j] / cfg.eps_ladder[j]);
    }
    return result;
}

namespace {

double dot(const TwoSpeciesDistribution& a, const TwoSpeciesDistribution& b) {
    return a.plus.cwiseProduct(b.plus).sum() + a.minus.cwiseProduct(b.minus).sum();
}

TwoSpeciesDistribution random_distribution(std::mt19937_64& rng, int modes, int nx) {
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    TwoSpeciesDistribution f = TwoSpeciesDistribution::zero(modes, nx);
    for (int c = 0; c < nx; ++c)
        for (int m = 0; m < modes; ++m) {
            f.plus(m, c) = uni(rng);
            f.minus(m, c) = uni(rng);
        }
    return f;
}

SelftestItem max_error_item(std::string name, double measured, double bound, std::string note) {
    SelftestItem item;
    item.name = std::move(name);
    item.measured = measured;
    item.bound = bound;
    item.pass = std::isfinite(measured) && measured <= bound;
    item.note = std::move(note);
    return item;
}

double mms_error(const MomentEngine& eng, const TorusGrid& grid, const CollisionOperator& op,
                 double dt) {
    const HermiteBasis& basis = eng.basis();
    const double eps = 0.5;
    auto a_fun = [](double t) { return 1.0 + 0.4 * std::sin(1.7 * t); };
    auto adot_fun = [](double t) { return 0.4 * 1.7 * std::cos(1.7 * t); };
    const int i100 = basis.find(1, 0, 0);
    const int i200 = basis.find(2, 0, 0);
    const int i000 = basis.find(0, 0, 0);

    auto field = [&](double a) {
        TwoSpeciesDistribution f = TwoSpeciesDistribution::zero(basis.size(), grid.size());
        for (int c = 0; c < grid.size(); ++c) {
            f.plus(i100, c) = a * std::cos(grid.point(c));
            f.minus(i100, c) = f.plus(i100, c);
        }
        return f;
    };

    KineticConfig cfg;
    cfg.eps = eps;
    cfg.dt = dt;
    cfg.t_end = 0.24;
    cfg.collision_backend = CollisionBackend::Boltzmann;
    cfg.quadratic = false;
    cfg.source = [&, eps](double t) {
        TwoSpeciesDistribution s = TwoSpeciesDistribution::zero(basis.size(), grid.size());
        const double a = a_fun(t);
        const double adot = adot_fun(t);
        for (int c = 0; c < grid.size(); ++c) {
            const double x = grid.point(c);
            const double trans = a * std::sin(x) / eps;
            s.plus(i100, c) = adot * std::cos(x);
            s.plus(i000, c) = -trans;
            s.plus(i200, c) = -std::sqrt(2.0) * trans;
        }
        s.minus = s.plus;
        return s;
    };

    const KineticTrajectory traj = KineticSolver(eng, grid, op, cfg).run(field(a_fun(0.0)));
    TwoSpeciesDistribution diff = traj.snapshots.back().f;
    diff -= field(a_fun(traj.snapshots.back().t));
    return std::sqrt(diff.squared_sum());
}

}  // namespace

SelftestReport selftest(const SelftestOptions& opts) {
    SelftestReport report;
    std::mt19937_64 rng(opts.seed);

    const HermiteBasis basis4(4);
    const MomentEngine eng4(basis4);
    const CollisionOperator bgk4 = bgk_operator(basis4, 1.0);
    const int m4 = basis4.size();

    {
        const double asym = (bgk4.L - bgk4.L.transpose()).norm() / bgk4.L.norm();
        report.items.push_back(
            max_error_item("linearized symmetry", asym, 1e-10, "relative Frobenius asymmetry"));
    }
    {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
            0.5 * (bgk4.L + bgk4.L.transpose()));
        const double lo = es.eigenvalues().minCoeff();
        const double hi = es.eigenvalues().cwiseAbs().maxCoeff();
        SelftestItem item;
        item.name = "linearized psd";
        item.measured = lo / hi;
        item.bound = -1e-10;
        item.pass = item.measured >= item.bound;
        item.note = "smallest eigenvalue relative to the largest";
        report.items.push_back(item);
    }
    {
        std::vector<Eigen::VectorXd> kernel_vecs;
        auto stack = [&](const Eigen::VectorXd& p, const Eigen::VectorXd& m) {
            Eigen::VectorXd q(2 * m4);
            q.head(m4) = p;
            q.tail(m4) = m;
            return q;
        };
        const Eigen::VectorXd zero = Eigen::VectorXd::Zero(m4);
        kernel_vecs.push_back(stack(basis4.vec_one(), zero));
        kernel_vecs.push_back(stack(zero, basis4.vec_one()));
        for (int axis = 0; axis < 3; ++axis)
            kernel_vecs.push_back(stack(basis4.vec_v(axis), basis4.vec_v(axis)));
        kernel_vecs.push_back(stack(basis4.vec_vsq(), basis4.vec_vsq()));
        double worst = 0.0;
        for (const Eigen::VectorXd& q : kernel_vecs)
            worst = std::max(worst, (bgk4.L * q).norm() / q.norm());
        report.items.push_back(max_error_item("linearized kernel", worst, 1e-12,
                                              "six invariant directions through L"));
    }
    {
        const TwoSpeciesDistribution f = random_distribution(rng, m4, 4);
        const TwoSpeciesDistribution pf = eng4.apply_P(f);
        TwoSpeciesDistribution ppf = eng4.apply_P(pf);
        ppf -= pf;
        const double idem = std::sqrt(ppf.squared_sum() / f.squared_sum());
        report.items.push_back(max_error_item("projection idempotent", idem, 1e-10, ""));

        const TwoSpeciesDistribution g = random_distribution(rng, m4, 4);
        const double mismatch = std::abs(dot(eng4.apply_P(f), g) - dot(f, eng4.apply_P(g))) /
                                std::sqrt(f.squared_sum() * g.squared_sum());
        report.items.push_back(max_error_item("projection self-adjoint", mismatch, 1e-10, ""));
    }
    {
        double worst = 0.0;
        TwoSpeciesDistribution f = TwoSpeciesDistribution::zero(m4, 1);
        f.plus.col(0) = basis4.vec_vsq() - 3.0 * basis4.vec_one();
        f.minus.col(0) = f.plus.col(0);
        worst = std::max(worst, std::abs(eng4.hydro(f).c[0] - 1.0));

        f.plus.col(0) = basis4.vec_v(0);
        f.minus.col(0) = f.plus.col(0);
        worst = std::max(worst, std::abs(eng4.hydro(f).b(0, 0) - 1.0));

        Eigen::MatrixXd g = Eigen::MatrixXd::Zero(m4, 1);
        g(basis4.find(1, 1, 0), 0) = 1.0;
        worst = std::max(worst, std::abs(eng4.theta_moment(g, 0, 1)[0] - 1.0));

        g.setZero();
        g(basis4.find(3, 0, 0), 0) = std::sqrt(6.0) / 2.0;
        g(basis4.find(1, 2, 0), 0) = std::sqrt(2.0) / 2.0;
        g(basis4.find(1, 0, 2), 0) = std::sqrt(2.0) / 2.0;
        worst = std::max(worst, std::abs(eng4.lambda_moment(g, 0)[0] - 0.5));
        report.items.push_back(max_error_item(
            "moment examples", worst, 1e-10,
            "c and b1 normalization, Theta_12 and Lambda_1 worked values"));
    }
    {
        const TransportCoefficients tc = transport_coefficients(bgk4, eng4);
        const double worst = std::max({std::abs(tc.nu - 0.5), std::abs(tc.kappa - 0.5),
                                       std::abs(tc.sigma - 2.0)});
        char note[96];
        std::snprintf(note, sizeof(note), "nu=%.12f kappa=%.12f sigma=%.12f", tc.nu, tc.kappa,
                      tc.sigma);
        report.items.push_back(max_error_item("transport coefficients", worst, 1e-10, note));
    }
    {
        TorusGrid grid(16);
        FluidState init;
        init.u = Eigen::MatrixXd::Zero(3, grid.size());
        init.theta = Eigen::VectorXd::Zero(grid.size());
        init.n.resize(grid.size());
        for (int i = 0; i < grid.size(); ++i) init.n[i] = 0.1 * std::cos(grid.point(i));
        FluidConfig fcfg;
        fcfg.dt = 1e-3;
        fcfg.t_end = 0.5;
        fcfg.record_every = 500;
        const FluidTrajectory traj = FluidSolver(grid, {1.0, 1.0, 2.0}, fcfg).run(init);
        const double factor = std::exp(-1.5);
        const double worst = (traj.snapshots.back().n - factor * init.n).cwiseAbs().maxCoeff();
        report.items.push_back(max_error_item("fluid charge decay", worst, 1e-10,
                                              "single-mode decay against exp(-1.5)"));
    }
    {
        TorusGrid grid(16);
        Eigen::VectorXd rho0(grid.size()), theta0(grid.size()), n0(grid.size());
        Eigen::MatrixXd u0 = Eigen::MatrixXd::Zero(3, grid.size());
        for (int i = 0; i < grid.size(); ++i) {
            const double x = grid.point(i);
            rho0[i] = -0.05 * std::cos(x);
            theta0[i] = 0.05 * std::cos(x);
            n0[i] = 0.05 * std::cos(x);
            u0(1, i) = 0.05 * std::cos(x);
        }
        const TwoSpeciesDistribution f0 =
            well_prepared_initial(eng4, grid, rho0, u0, theta0, n0);
        KineticConfig kcfg;
        kcfg.eps = 0.2;
        kcfg.dt = 5e-3;
        kcfg.t_end = 0.02;
        kcfg.record_every = 4;
        auto run_once = [&] { return KineticSolver(eng4, grid, bgk4, kcfg).run(f0); };
        TwoSpeciesDistribution diff = run_once().snapshots.back().f;
        diff -= run_once().snapshots.back().f;
        SelftestItem item;
        item.name = "kinetic determinism";
        item.measured = std::sqrt(diff.squared_sum());
        item.bound = 0.0;
        item.pass = item.measured == 0.0;
        item.note = "bitwise repeat of a short relaxation run";
        report.items.push_back(item);
    }

    if (!opts.include_boltzmann) return report;

    const HermiteBasis basis3(3);
    const MomentEngine eng3(basis3);
    KernelSpec light;
    light.theta_min = 0.3;
    light.n_theta = 8;
    light.n_phi = 4;
    light.quad_order = 5;
    const CollisionOperator boltz3 = assemble_boltzmann(basis3, light);

    {
        double worst = 0.0;
        for (int trial = 0; trial < 100; ++trial) {
            const TwoSpeciesDistribution f = random_distribution(rng, basis3.size(), 1);
            const TwoSpeciesDistribution g = random_distribution(rng, basis3.size(), 1);
            const TwoSpeciesDistribution gamma = apply_Gamma(boltz3, f, g);
            const Eigen::VectorXd summed = gamma.plus.col(0) + gamma.minus.col(0);
            double residual = std::abs(basis3.vec_one().dot(summed));
            for (int axis = 0; axis < 3; ++axis)
                residual = std::max(residual, std::abs(basis3.vec_v(axis).dot(summed)));
            residual = std::max(residual, std::abs(basis3.vec_vsq().dot(summed)));
            worst = std::max(worst,
                             residual / std::sqrt(f.squared_sum() * g.squared_sum()));
        }
        report.items.push_back(max_error_item("bilinear invariants", worst, 1e-8,
                                              "species-summed mass, momentum, energy moments"));
    }
    {
        TorusGrid grid(16);
        const double e1 = mms_error(eng3, grid, boltz3, 0.012);
        const double e2 = mms_error(eng3, grid, boltz3, 0.006);
        const double e3 = mms_error(eng3, grid, boltz3, 0.003);
        SelftestItem item;
        item.name = "manufactured order";
        item.bound = 1.8;
        if (e2 > 0.0 && e3 > 0.0) {
            item.measured = std::min(std::log2(e1 / e2), std::log2(e2 / e3));
            item.pass = item.measured >= item.bound;
        }
        char note[96];
        std::snprintf(note, sizeof(note), "errors %.3e %.3e %.3e under dt halving", e1, e2, e3);
        item.note = note;
        report.items.push_back(item);
    }
    {
        SelftestItem item;
        item.name = "operator cache";
        item.bound = 0.0;
        const std::filesystem::path dir = opts.cache_dir.empty()
                                              ? std::filesystem::temp_directory_path()
                                              : std::filesystem::path(opts.cache_dir);
        const std::string path = (dir / "vpb_selftest_cache.vpbt").string();
        try {
            const HermiteBasis basis2(2);
            KernelSpec ks = light;
            ks.quad_order = 4;
            const CollisionOperator fresh = assemble_boltzmann(basis2, ks);
            if (!std::filesystem::exists(path)) cache_store(fresh, path);
            const CollisionOperator loaded = cache_load(basis2, path);
            item.measured = (loaded.L - fresh.L).norm();
            item.pass = item.measured == 0.0;
            item.note = "round trip through " + path;
        } catch (const std::exception& e) {
            item.pass = false;
            item.measured = std::numeric_limits<double>::quiet_NaN();
            item.note = e.what();
        }
        report.items.push_back(item);
    }
    {
        SelftestItem item;
        item.name = "angular cutoff Cauchy";
        item.bound = 0.6;
        if (opts.theta_min_ladder.size() < 3) {
            item.pass = false;
            item.note = "needs at least three cutoff values";
        } else {
            std::vector<Eigen::Vector3d> coeffs;
            for (double tm : opts.theta_min_ladder) {
                KernelSpec ks = light;
                ks.theta_min = tm;
                const TransportCoefficients tc =
                    transport_coefficients(assemble_boltzmann(basis3, ks), eng3);
                coeffs.emplace_back(tc.nu, tc.kappa, tc.sigma);
            }
            double worst = 0.0;
            for (int i = 0; i < 3; ++i) {
                const std::size_t last = coeffs.size() - 1;
                const double num = std::abs(coeffs[last][i] - coeffs[last - 1][i]);
                const double den = std::abs(coeffs[last - 1][i] - coeffs[last - 2][i]);
                if (den == 0.0) {
                    worst = std::max(worst, num == 0.0 ? 0.0
                                                       : std::numeric_limits<double>::infinity());
                } else {
                    worst = std::max(worst, num / den);
                }
            }
            item.measured = worst;
            item.pass = std::isfinite(worst) && worst < item.bound;
            std::ostringstream note;
            note << "(nu,kappa,sigma) per cutoff:";
            for (std::size_t j = 0; j < coeffs.size(); ++j)
                note << " [" << coeffs[j][0] << ", " << coeffs[j][1] << ", " << coeffs[j][2]
                     << "]";
            item.note = note.str();
        }
        report.items.push_back(item);
    }
    return report;
}

}  // namespace vpb
