#include "vpb/kinetic.hpp"

#include "vpb/io_util.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace vpb {

namespace {

constexpr int kMaxBisections = 10;

Eigen::MatrixXd dealias_rows(const TorusGrid& grid, const Eigen::MatrixXd& g) {
    Eigen::MatrixXd out(g.rows(), g.cols());
    Eigen::VectorXd row(g.cols());
    for (int m = 0; m < g.rows(); ++m) {
        row = g.row(m).transpose();
        out.row(m) = grid.dealias(row).transpose();
    }
    return out;
}

void axpy(TwoSpeciesDistribution& y, double a, const TwoSpeciesDistribution& x) {
    y.plus.noalias() += a * x.plus;
    y.minus.noalias() += a * x.minus;
}

}  // namespace

TwoSpeciesDistribution well_prepared_initial(const MomentEngine& eng, const TorusGrid& grid,
                                             const Eigen::VectorXd& rho0,
                                             const Eigen::MatrixXd& u0,
                                             const Eigen::VectorXd& theta0,
                                             const Eigen::VectorXd& n0) {
    const HermiteBasis& basis = eng.basis();
    const int nx = grid.size();
    if (rho0.size() != nx || theta0.size() != nx || n0.size() != nx || u0.rows() != 3 ||
        u0.cols() != nx) {
        throw std::invalid_argument("well_prepared_initial: field sizes do not match the grid");
    }
    const double n_mean = n0.mean();
    if (std::abs(n_mean) > 1e-12) {
        std::ostringstream msg;
        msg << "well_prepared_initial: n0 must have zero spatial mean, got mean = "
            << format_g17(n_mean);
        throw std::invalid_argument(msg.str());
    }

    const Eigen::VectorXd& e0 = basis.vec_one();
    Eigen::VectorXd theta_vec = 0.5 * (basis.vec_vsq() - 3.0 * basis.vec_one());

    TwoSpeciesDistribution f = TwoSpeciesDistribution::zero(basis.size(), nx);
    for (int c = 0; c < nx; ++c) {
        Eigen::VectorXd common = theta0[c] * theta_vec;
        for (int i = 0; i < 3; ++i) common += u0(i, c) * basis.vec_v(i);
        f.plus.col(c) = (rho0[c] + 0.5 * n0[c]) * e0 + common;
        f.minus.col(c) = (rho0[c] - 0.5 * n0[c]) * e0 + common;
    }
    return f;
}

KineticSolver::KineticSolver(const MomentEngine& eng, const TorusGrid& grid,
                             const CollisionOperator& op, KineticConfig config)
    : eng_(&eng), grid_(&grid), op_(&op), cfg_(std::move(config)) {
    const HermiteBasis& basis = eng.basis();
    if (!(cfg_.eps > 0.0) || cfg_.eps > 1.0) {
        throw std::invalid_argument("kinetic config: eps must lie in (0, 1]");
    }
    if (!(cfg_.dt > 0.0)) throw std::invalid_argument("kinetic config: dt must be positive");
    if (cfg_.t_end < 0.0) throw std::invalid_argument("kinetic config: t_end must be nonnegative");
    if (!(cfg_.cfl_safety > 0.0) || cfg_.cfl_safety > 1.0) {
        throw std::invalid_argument("kinetic config: cfl_safety must lie in (0, 1]");
    }
    if (cfg_.record_every < 1) {
        throw std::invalid_argument("kinetic config: record_every must be at least 1");
    }
    if (cfg_.collision_backend != op.backend) {
        throw std::invalid_argument(
            "kinetic config: collision_backend does not match the supplied operator");
    }
    if (op.modes != basis.size()) {
        throw std::invalid_argument("kinetic solver: operator and basis disagree on mode count");
    }
    const double limit = cfl_limit();
    if (cfg_.dt > limit * (1.0 + 1e-12)) {
        std::ostringstream msg;
        msg << "kinetic config: dt = " << format_g17(cfg_.dt)
            << " violates the advective CFL bound " << format_g17(limit);
        throw std::invalid_argument(msg.str());
    }
    e0_ = basis.find(0, 0, 0);
}

double KineticSolver::cfl_limit() const {
    return cfg_.cfl_safety * cfg_.eps * grid_->dx() / eng_->basis().max_node_speed();
}

KineticState KineticSolver::initial_state(const TwoSpeciesDistribution& f0) const {
    if (f0.modes() != eng_->basis().size() || f0.nx() != grid_->size()) {
        throw std::invalid_argument("kinetic solver: initial data does not match basis and grid");
    }
    return make_state(f0, 0.0);
}

KineticState KineticSolver::make_state(TwoSpeciesDistribution f, double t) const {
    // The state lives in the dealiased band: bins above the cutoff carry no
    // trusted content and the explicit stages amplify them from roundoff.
    f.plus = dealias_rows(*grid_, f.plus);
    f.minus = dealias_rows(*grid_, f.minus);
    Eigen::VectorXd charge = (f.plus.row(e0_) - f.minus.row(e0_)).transpose();
    PoissonSolution pot = grid_->poisson_solve(charge);
    return {t, std::move(f), std::move(pot.phi), std::move(pot.grad_phi)};
}

TwoSpeciesDistribution KineticSolver::nonstiff(const TwoSpeciesDistribution& f, double t) const {
    const HermiteBasis& basis = eng_->basis();
    const double eps = cfg_.eps;
    Eigen::VectorXd charge = (f.plus.row(e0_) - f.minus.row(e0_)).transpose();
    const Eigen::VectorXd field = grid_->poisson_solve(charge).grad_phi;
    const Eigen::VectorXd& v0 = basis.vec_v(0);

    TwoSpeciesDistribution out = TwoSpeciesDistribution::zero(f.modes(), f.nx());
    for (int sp = 0; sp < 2; ++sp) {
        const Eigen::MatrixXd& F = sp == 0 ? f.plus : f.minus;
        Eigen::MatrixXd& G = sp == 0 ? out.plus : out.minus;
        const double sgn = sp == 0 ? 1.0 : -1.0;
        G.noalias() =
            (-1.0 / eps) *
            apply_v_multiply(basis, apply_x_derivative(*grid_, F), 0, &trunc_.v_multiply);
        G.noalias() -= (sgn / eps) * v0 * field.transpose();
        Eigen::MatrixXd drift =
            apply_v_derivative(basis, F, 0, &trunc_.v_derivative) * field.asDiagonal();
        drift -= 0.5 * (apply_v_multiply(basis, F, 0, &trunc_.v_multiply) * field.asDiagonal());
        G += sgn * dealias_rows(*grid_, drift);
    }
    if (op_->backend == CollisionBackend::Boltzmann && cfg_.quadratic) {
        TwoSpeciesDistribution gam = apply_Gamma(*op_, f, f);
        out.plus += (1.0 / eps) * dealias_rows(*grid_, gam.plus);
        out.minus += (1.0 / eps) * dealias_rows(*grid_, gam.minus);
    }
    if (cfg_.source) out += cfg_.source(t);
    return out;
}

TwoSpeciesDistribution KineticSolver::stiff(const TwoSpeciesDistribution& f) const {
    const double inv_eps2 = 1.0 / (cfg_.eps * cfg_.eps);
    if (op_->backend == CollisionBackend::BGK) {
        TwoSpeciesDistribution r =
            apply_bgk_collision(eng_->basis(), f, cfg_.eps, op_->relaxation_rate);
        r *= inv_eps2;
        return r;
    }
    TwoSpeciesDistribution r = apply_L(*op_, f);
    r *= -inv_eps2;
    return r;
}

KineticRhs KineticSolver::rhs(const KineticState& state) const {
    return {stiff(state.f), nonstiff(state.f, state.t)};
}

TwoSpeciesDistribution KineticSolver::implicit_stage(const TwoSpeciesDistribution& r, double tau,
                                                     int depth) {
    const double eps = cfg_.eps;
    const double beta = tau / (eps * eps);
    if (op_->backend == CollisionBackend::BGK) {
        TwoSpeciesDistribution relax =
            apply_bgk_collision(eng_->basis(), r, eps, op_->relaxation_rate);
        TwoSpeciesDistribution g = r;
        axpy(g, beta / (1.0 + beta * op_->relaxation_rate), relax);
        return g;
    }
    auto it = stage_solver_.find(depth);
    if (it == stage_solver_.end()) {
        Eigen::MatrixXd A = beta * op_->L;
        A.diagonal().array() += 1.0;
        it = stage_solver_.emplace(depth, Eigen::LLT<Eigen::MatrixXd>(A)).first;
        if (it->second.info() != Eigen::Success) {
            throw std::runtime_error("kinetic implicit stage: factorization failed");
        }
    }
    const int M = eng_->basis().size();
    Eigen::MatrixXd rhs_mat(2 * M, r.nx());
    rhs_mat.topRows(M) = r.plus;
    rhs_mat.bottomRows(M) = r.minus;
    Eigen::MatrixXd sol = it->second.solve(rhs_mat);
    return {sol.topRows(M), sol.bottomRows(M)};
}

KineticState KineticSolver::single_step(const KineticState& state, double h, int depth) {
    if (cfg_.scheme == TimeScheme::IMEXEuler) {
        TwoSpeciesDistribution r = state.f;
        axpy(r, h, nonstiff(state.f, state.t));
        return make_state(implicit_stage(r, h, depth), state.t + h);
    }
    const double gamma = 1.0 - std::sqrt(0.5);
    const double delta = 1.0 - 1.0 / (2.0 * gamma);
    const double tau = gamma * h;

    TwoSpeciesDistribution n1 = nonstiff(state.f, state.t);
    TwoSpeciesDistribution r2 = state.f;
    axpy(r2, tau, n1);
    TwoSpeciesDistribution f2 = implicit_stage(r2, tau, depth);
    TwoSpeciesDistribution s2 = f2;
    s2 -= r2;
    s2 *= 1.0 / tau;
    TwoSpeciesDistribution n2 = nonstiff(f2, state.t + gamma * h);

    TwoSpeciesDistribution r3 = state.f;
    axpy(r3, h * delta, n1);
    axpy(r3, h * (1.0 - delta), n2);
    axpy(r3, h * (1.0 - gamma), s2);
    return make_state(implicit_stage(r3, tau, depth), state.t + h);
}

KineticState KineticSolver::advance(const KineticState& state, double h, int depth) {
    try {
        return single_step(state, h, depth);
    } catch (const StepRejected& rej) {
        if (depth >= kMaxBisections) {
            std::ostringstream msg;
            msg << "kinetic step aborted after " << kMaxBisections
                << " bisections of dt; last rejection: " << rej.what();
            throw std::runtime_error(msg.str());
        }
        ++bisections_;
        KineticState mid = advance(state, 0.5 * h, depth + 1);
        return advance(mid, 0.5 * h, depth + 1);
    }
}

Eigen::Vector2d KineticSolver::species_masses(const TwoSpeciesDistribution& f) const {
    const double dx = grid_->dx();
    return {f.plus.row(e0_).sum() * dx, f.minus.row(e0_).sum() * dx};
}

KineticState KineticSolver::step(const KineticState& state) {
    const Eigen::Vector2d before = species_masses(state.f);
    KineticState out = advance(state, cfg_.dt, 0);
    const Eigen::Vector2d after = species_masses(out.f);
    for (int sp = 0; sp < 2; ++sp) {
        const double drift = std::abs(after[sp] - before[sp]);
        if (drift > 1e-11 * std::max(1.0, std::abs(before[sp]))) {
            std::ostringstream msg;
            msg << "kinetic step lost species mass conservation: drift = " << format_g17(drift);
            throw std::runtime_error(msg.str());
        }
    }
    return out;
}

KineticTrajectory KineticSolver::run(const TwoSpeciesDistribution& f0) {
    KineticTrajectory traj;
    KineticState state = initial_state(f0);
    const long n_steps = static_cast<long>(std::floor(cfg_.t_end / cfg_.dt + 1e-9));
    const Eigen::Vector2d initial_mass = species_masses(state.f);

    auto record = [&](const KineticState& s) {
        traj.snapshots.push_back(s);
        traj.moments.push_back(eng_->moments(s.f, cfg_.eps));
    };
    record(state);
    for (long k = 1; k <= n_steps; ++k) {
        state = step(state);
        if (k % cfg_.record_every == 0) record(state);
    }

    const Eigen::Vector2d final_mass = species_masses(state.f);
    for (int sp = 0; sp < 2; ++sp) {
        const double drift = std::abs(final_mass[sp] - initial_mass[sp]);
        if (drift > 1e-8 * std::max(1.0, std::abs(initial_mass[sp]))) {
            std::ostringstream msg;
            msg << "kinetic run lost species mass conservation: drift = " << format_g17(drift);
            throw std::runtime_error(msg.str());
        }
    }
    traj.steps = n_steps;
    traj.bisections = bisections_;
    traj.truncation = trunc_;
    return traj;
}

}  // namespace vpb
