#pragma once

#include "vpb/diagnostics.hpp"
#include "vpb/fluid.hpp"
#include "vpb/kinetic.hpp"

#include <array>
#include <string>
#include <vector>

namespace vpb {

/* Sweep orchestration: runs the limit fluid system once and the kinetic
 * system per Knudsen number from shared well-prepared data, measures the
 * deviation of the kinetic moments from the fluid solution, and fits the
 * log-log convergence order across the ladder.  Per-epsilon runs share no
 * mutable state and may execute concurrently; everything downstream of a
 * fixed config is deterministic.
 */

// One trigonometric component amplitude * (cos_amp cos(k x) + sin_amp sin(k x)).
struct FourierMode {
    int k = 1;
    double cos_amp = 0.0;
    double sin_amp = 0.0;
};

using ModeList = std::vector<FourierMode>;

Eigen::VectorXd synthesize_field(const TorusGrid& grid, const ModeList& modes, double amplitude);

struct SweepConfig {
    std::vector<double> eps_ladder{0.4, 0.2, 0.1, 0.05};
    double amplitude = 0.05;
    double t_end = 0.5;
    CollisionBackend backend = CollisionBackend::BGK;

    int degree_cap = 6;
    int x_modes = 64;
    double cfl_safety = 0.9;
    double fluid_dt = 1.0e-3;
    // Target spacing of recorded snapshots (both solvers round it to their
    // own step multiples).
    double record_dt = 1.0e-2;

    ModeList rho_modes{{1, -1.0, 0.0}};
    std::array<ModeList, 3> u_modes{ModeList{}, ModeList{{1, 1.0, 0.0}}, ModeList{{1, 0.0, 1.0}}};
    ModeList theta_modes{{1, 1.0, 0.0}};
    ModeList n_modes{{1, 1.0, 0.0}};
};

struct ConvergenceResult {
    static constexpr std::array<const char*, 6> moment_names{"rho", "u", "theta",
                                                             "n",   "j", "omega"};

    std::vector<double> eps_ladder;
    // Sup-over-time L2_x deviation from the fluid solution, one row per
    // moment in moment_names order, one column per ladder entry.
    Eigen::MatrixXd sup_errors;
    // Least-squares fit of log(error) against log(eps) per moment; the
    // defined flag is false when the ladder is degenerate or an error
    // vanishes, and the fit entries are zero in that case.
    Eigen::VectorXd slopes, intercepts, r_squared;
    std::array<bool, 6> slope_defined{};

    // ||rho + theta|| and ||dx u1|| at the final recorded time, per ladder
    // entry, with the smallest constants bounding them by C * eps.
    std::vector<double> boussinesq_at_end, div_u_at_end;
    double boussinesq_constant = 0.0;
    double div_u_constant = 0.0;
};

// Raw trajectories behind a ConvergenceResult, for report generation.
struct SweepArtifacts {
    FluidTrajectory fluid;
    std::vector<KineticTrajectory> kinetic;  // ladder order
    std::vector<double> kinetic_dt;
};

// The operator backend and degree cap must match cfg; relaxation positivity
// of the initial data is probed at the largest ladder entry before any run.
// Solver aborts are rethrown with the offending epsilon named.
ConvergenceResult run_sweep(const SweepConfig& cfg, const CollisionOperator& op,
                            SweepArtifacts* artifacts = nullptr);

/* Self-contained property suite.  Failures are data, not exceptions: every
 * item reports its measured value next to the bound it was held to.  The
 * assembled-backend items (bilinear invariants, manufactured order, operator
 * cache, angular cutoff study) are omitted entirely when include_boltzmann
 * is false rather than reported as passing.
 */
struct SelftestOptions {
    // Directory for the cache round-trip item; empty uses the system temp
    // directory.  A pre-existing file at the item's path is loaded and
    // verified instead of being rewritten.
    std::string cache_dir;
    bool include_boltzmann = true;
    std::vector<double> theta_min_ladder{0.2, 0.1, 0.05};
    unsigned seed = 20240822u;
};

struct SelftestItem {
    std::string name;
    bool pass = false;
    double measured = 0.0;
    double bound = 0.0;
    std::string note;
};

struct SelftestReport {
    std::vector<SelftestItem> items;

    bool all_pass() const {
        for (const SelftestItem& item : items)
            if (!item.pass) return false;
        return true;
    }
};

SelftestReport selftest(const SelftestOptions& opts = {});

}  // namespace vpb
