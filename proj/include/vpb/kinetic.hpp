#pragma once

#include "vpb/collision.hpp"
#include "vpb/distribution.hpp"
#include "vpb/spatial.hpp"

#include <Eigen/Cholesky>

#include <functional>
#include <map>
#include <vector>

namespace vpb {

/* IMEX integration of the perturbed two-species kinetic system
 *
 *   eps dt f_+- + v1 dx f_+- +- dx(phi) v1 sqrt(mu)
 *     = eps q0 dx(phi) (dv1 - v1/2) f_+- - (1/eps) L f_+- + Gamma(f, f),
 *   -dxx phi = <f_+ - f_-, sqrt(mu)>,
 *
 * written in the scaled form f' = stiff + nonstiff with
 *   stiff    = -(1/eps^2) L f            (relaxation backend: the full
 *                                         relaxation term divided by eps^2)
 *   nonstiff = -(1/eps) v1 dx f -+ (1/eps) dx(phi) v1 sqrt(mu)
 *              +- dx(phi) (dv1 - v1/2) f + (1/eps) Gamma(f, f) + source.
 *
 * The collision term is implicit (one Cholesky factorization of
 * I + c dt/eps^2 L shared by every spatial point and step; the relaxation
 * backend has a closed-form stage solve), everything else explicit, so dt
 * obeys the advective CFL bound dt <= cfl_safety * eps * dx / v_max.
 * Products of the self-consistent field with f and the bilinear collision
 * output are dealiased with the two-thirds rule.
 */

enum class TimeScheme { IMEXEuler, IMEXARS222 };

struct KineticConfig {
    double eps = 0.1;
    double dt = 1.0e-3;
    double t_end = 0.1;
    TimeScheme scheme = TimeScheme::IMEXARS222;
    CollisionBackend collision_backend = CollisionBackend::BGK;
    double cfl_safety = 0.9;
    int record_every = 1;
    // Keep the bilinear collision term (assembled backend only).
    bool quadratic = true;
    // Optional manufactured forcing, added to the nonstiff part at stage times.
    std::function<TwoSpeciesDistribution(double)> source;
};

struct KineticState {
    double t = 0.0;
    TwoSpeciesDistribution f;
    Eigen::VectorXd phi, grad_phi;
};

struct KineticRhs {
    TwoSpeciesDistribution stiff, nonstiff;
};

// Degree-(K+1) content generated by the velocity ladders is truncated; these
// counters record how often nonzero mass was dropped (diagnostic, not fatal).
struct TruncationCounters {
    long v_multiply = 0;
    long v_derivative = 0;
    long total() const { return v_multiply + v_derivative; }
};

struct KineticTrajectory {
    std::vector<KineticState> snapshots;
    std::vector<FluidMoments> moments;
    long steps = 0;
    long bisections = 0;
    TruncationCounters truncation;
};

// f_0,+- = (rho0 +- n0/2) sqrt(mu) + u0 . v sqrt(mu) + theta0 (|v|^2-3)/2 sqrt(mu);
// the data is macroscopic (micro part zero) and carries no current or heat flux.
// n0 must have zero spatial mean (torus solvability of the Poisson equation).
TwoSpeciesDistribution well_prepared_initial(const MomentEngine& eng, const TorusGrid& grid,
                                             const Eigen::VectorXd& rho0,
                                             const Eigen::MatrixXd& u0,
                                             const Eigen::VectorXd& theta0,
                                             const Eigen::VectorXd& n0);

class KineticSolver {
  public:
    // The operator backend must match config.collision_backend and the basis
    // under eng; dt must satisfy the advective CFL bound.
    KineticSolver(const MomentEngine& eng, const TorusGrid& grid, const CollisionOperator& op,
                  KineticConfig config);

    const KineticConfig& config() const { return cfg_; }
    double cfl_limit() const;

    // Wraps f with the self-consistent potential at time t = 0.
    KineticState initial_state(const TwoSpeciesDistribution& f0) const;

    // Split right-hand side at the state's own time; the potential is
    // recomputed from f, not taken from the state.
    KineticRhs rhs(const KineticState& state) const;

    // One step of size config.dt.  A positivity rejection from the relaxation
    // backend halves the step (recursively, at most 10 times) and retries;
    // persistent rejection aborts with a runtime error.
    KineticState step(const KineticState& state);

    // Integrate from t = 0 to t_end, recording every record_every steps
    // (the initial state included).
    KineticTrajectory run(const TwoSpeciesDistribution& f0);

    const TruncationCounters& truncation() const { return trunc_; }
    long bisections() const { return bisections_; }

  private:
    TwoSpeciesDistribution nonstiff(const TwoSpeciesDistribution& f, double t) const;
    TwoSpeciesDistribution stiff(const TwoSpeciesDistribution& f) const;
    TwoSpeciesDistribution implicit_stage(const TwoSpeciesDistribution& r, double tau, int depth);
    KineticState single_step(const KineticState& state, double h, int depth);
    KineticState advance(const KineticState& state, double h, int depth);
    KineticState make_state(TwoSpeciesDistribution f, double t) const;
    Eigen::Vector2d species_masses(const TwoSpeciesDistribution& f) const;

    const MomentEngine* eng_;
    const TorusGrid* grid_;
    const CollisionOperator* op_;
    KineticConfig cfg_;
    int e0_ = 0;
    mutable TruncationCounters trunc_;
    long bisections_ = 0;
    std::map<int, Eigen::LLT<Eigen::MatrixXd>> stage_solver_;
};

}  // namespace vpb
