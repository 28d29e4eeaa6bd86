#pragma once

#include "vpb/harness.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace vpb {

/* Run configuration: flat sectioned key = value text.
 *
 *   # comment (also ;) when first on the line
 *   [section]
 *   key = value
 *
 * Scalars are plain tokens (reals, integers, true/false, bare strings),
 * lists are comma-separated, and initial-field dictionaries are comma lists
 * of k:cos_amp:sin_amp triples with k >= 1 ("none" clears a field).  Unknown
 * sections or keys and duplicate keys are errors; syntax errors carry the
 * line number; cross-field constraints are checked after parsing and name
 * the fields involved.  All charge fields are sums of k >= 1 harmonics and
 * therefore mean-free by construction.
 */

struct GridSection {
    int x_modes = 64;
    int degree_cap = 6;
    int quad_order = 0;
};

struct KernelSection {
    CollisionBackend backend = CollisionBackend::BGK;
    double relaxation_rate = 1.0;
    KernelSpec spec;
};

struct KineticSection {
    double eps = 0.1;
    double dt = 1.0e-3;
    double t_end = 0.5;
    TimeScheme scheme = TimeScheme::IMEXARS222;
    double cfl_safety = 0.9;
    int record_every = 1;
    bool quadratic = true;
};

struct FluidSection {
    double dt = 1.0e-3;
    double t_end = 0.5;
    int record_every = 10;
    double blowup_limit = 1.0e6;
    // When true the explicit (nu, kappa, sigma) replace the values derived
    // from the collision backend; the parser requires all three together.
    bool override_coefficients = false;
    double nu = 1.0;
    double kappa = 1.0;
    double sigma = 2.0;
};

struct InitialSection {
    double amplitude = 0.05;
    ModeList rho;
    std::array<ModeList, 3> u{ModeList{}, ModeList{{1, 1.0, 0.0}}, ModeList{{1, 0.0, 1.0}}};
    ModeList theta;
    ModeList n{{4, 1.0, 0.0}};
};

struct SweepSection {
    std::vector<double> eps_ladder{0.4, 0.2, 0.1, 0.05};
    double t_end = 0.5;
    double record_dt = 1.0e-2;
    double fluid_dt = 1.0e-3;
};

struct EnergySection {
    int cap = 0;
    double l = 0.0;
    double gamma = 0.0;
    double s = 0.5;
    bool field_factor = false;
};

struct OutputSection {
    std::string directory = "out";
    std::string cache_directory;
    std::uint64_t seed = 0;
};

struct RunConfig {
    GridSection grid;
    KernelSection kernel;
    KineticSection kinetic;
    FluidSection fluid;
    InitialSection initial;
    SweepSection sweep;
    EnergySection energy;
    OutputSection output;
};

RunConfig parse_config(const std::string& path);
RunConfig parse_config_text(const std::string& text, const std::string& name = "<config>");

SweepConfig sweep_config(const RunConfig& cfg);
KineticConfig kinetic_config(const RunConfig& cfg);
FluidConfig fluid_config(const RunConfig& cfg);
EnergyOptions energy_options(const RunConfig& cfg, double eps);

// Full effective configuration serialized as JSON (the manifest echo).
std::string config_echo_json(const RunConfig& cfg);

// Deterministic cache file name for an assembled operator.
std::string collision_cache_name(const KernelSpec& spec, int degree_cap);

struct OperatorSource {
    CollisionOperator op;
    std::string cache_path;  // empty for the relaxation backend
    bool from_cache = false;
    bool stored = false;
};

// Relaxation operators are built inline.  Assembled operators are loaded
// from cache_dir when present, otherwise assembled and stored (store
// failures are reported through `stored`, not fatal); a missing cache with
// assemble_forbidden raises a validation error.
OperatorSource resolve_operator(const RunConfig& cfg, const std::string& cache_dir,
                                bool assemble_forbidden);

inline constexpr const char* kTrajectoryCsvHeader =
    "t,x_index,rho,u1,u2,u3,theta,n,j1,j2,j3,omega,phi";
inline constexpr const char* kEnergyCsvHeader =
    "t,E_N,D_low,D_high,E_Nl,micro,boussinesq,divu,ohm,charge_res,mass_drift";

struct TrajectoryTable {
    std::vector<double> times;
    std::vector<FluidMoments> moments;
    std::vector<Eigen::VectorXd> phi;
};

TrajectoryTable trajectory_table(const KineticTrajectory& traj);
TrajectoryTable trajectory_table(const TorusGrid& grid, const FluidTrajectory& traj,
                                 const FluidCoefficients& co);

void write_trajectory_csv(const std::string& path, const TrajectoryTable& table);
void write_energy_csv(const std::string& path, const EnergyReport& report);

// Macroscopic lift of a fluid trajectory onto the kinetic representation
// (micro part zero, currents from the constitutive law), so the energy
// report runs through the same code path as for kinetic output.
KineticTrajectory lift_fluid_trajectory(const MomentEngine& eng, const TorusGrid& grid,
                                        const FluidTrajectory& traj,
                                        const FluidCoefficients& co);

/* Command-line front end.  Exit codes: 0 success, 1 configuration or
 * validation failure (including a missing cache with assembly forbidden),
 * 2 numerical abort or self-test failure.
 */
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vpb
