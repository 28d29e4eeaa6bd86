#pragma once

#include "vpb/distribution.hpp"

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace vpb {

enum class CollisionBackend { BGK, Boltzmann };

// Raised when a relaxation update meets a state outside its validity region
// (non-positive reconstructed distribution, density, or temperature).
class StepRejected : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/* Cutoff hard or moderately soft kernel
 *   B(|u|, cos t) = C_phi |u|^gamma b(cos t),  sin t b(cos t) = t^{-1-2s}
 * supported on t in (theta_min, pi/2].  The polar integral is computed after
 * the exact substitution y = t^{-2s}, which absorbs the near-grazing growth
 * into the measure, with Gauss-Legendre nodes in y and an even equispaced
 * azimuthal rule.
 */
struct KernelSpec {
    double gamma = 0.0;
    double s = 0.5;
    double C_phi = 1.0;
    double theta_min = 0.1;
    int quad_order = 0;  // Gauss nodes per velocity axis; 0 follows the basis
    int n_theta = 16;
    // 0 picks 2 * degree_cap + 2, the smallest even azimuthal count that is
    // exact for every product of basis polynomials, which keeps the assembled
    // operator independent of the scattering-frame convention.
    int n_phi = 0;

    void validate() const;
};

// int_{theta_min}^{pi/2} t^{-1-2s} dt under the same rule the assembler uses
// (exact for this integrand).
double angular_theta_mass(const KernelSpec& spec);

struct GammaTriplet {
    std::uint32_t m, n, p;
    double value;
};

/* Velocity-space collision data shared by both backends.
 *
 * L is the linearized two-species operator on stacked coefficients
 * [f_+; f_-], symmetrized and with its six conservation directions projected
 * out exactly, so ker L = span{ [1,0], [0,1], [v_i,v_i], [|v|^2,|v|^2] } sqrt(mu)
 * to machine precision.
 *
 * gamma holds the symmetric part of the Galerkin collision tensor with the
 * directions that vanish analytically (all five invariants of the
 * pair-symmetrized form) removed, so species-summed mass, momentum, and
 * energy of Gamma(f, g) vanish identically for arbitrary ordered pairs.
 */
struct CollisionOperator {
    CollisionBackend backend = CollisionBackend::BGK;
    int degree_cap = 0;
    int modes = 0;
    KernelSpec kernel;
    double relaxation_rate = 1.0;
    Eigen::MatrixXd L;  // 2M x 2M
    std::vector<GammaTriplet> gamma;
    std::array<std::uint8_t, 32> provenance{};
    double refinement_disagreement = -1.0;  // relative, when the check ran
};

struct AssemblyOptions {
    bool convergence_check = false;
    double convergence_tol = 1e-3;
};

CollisionOperator bgk_operator(const HermiteBasis& basis, double relaxation_rate = 1.0);
CollisionOperator assemble_boltzmann(const HermiteBasis& basis, const KernelSpec& spec,
                                     const AssemblyOptions& opts = {});

TwoSpeciesDistribution apply_L(const CollisionOperator& op, const TwoSpeciesDistribution& f);
// Gamma_+-(f, g) = T(f_+- + f_-+, g_+-) through the stored symmetric tensor;
// Boltzmann backend only.
TwoSpeciesDistribution apply_Gamma(const CollisionOperator& op, const TwoSpeciesDistribution& f,
                                   const TwoSpeciesDistribution& g);

// Relaxation toward the species-mass / shared-velocity / shared-temperature
// local Maxwellians: returns mu^{-1/2} (M_+-[F] - F_+-) / eps in perturbation
// coordinates.  Species masses, total momentum, and total energy of the
// output vanish to machine precision.  Rejects states with non-positive
// density, temperature, or nodal distribution values.
TwoSpeciesDistribution apply_bgk_collision(const HermiteBasis& basis,
                                           const TwoSpeciesDistribution& f, double eps,
                                           double relaxation_rate = 1.0);

/* Transport coefficients of the diffusive limit.
 *
 * Closure values solve the per-backend linearized operator against the
 * Burnett fields A_ij = v_i v_j - (|v|^2/3) d_ij and B_i = v_i(|v|^2 - 5)/2:
 *   nu    = (1/20) sum_ij <A-hat_ij, A_ij sqrt(mu)>
 *   kappa = (1/15) sum_i  <B-hat_i,  B_i  sqrt(mu)>
 *   sigma = (2/3)  sum_i  <Phi-tilde_i, v_i sqrt(mu)>
 * The _macro values are the coefficients that appear in the limiting
 * momentum and heat equations, solved against the species-summed operator.
 */
struct TransportCoefficients {
    double nu = 0.0;
    double kappa = 0.0;
    double sigma = 0.0;
    double nu_macro = 0.0;
    double kappa_macro = 0.0;
    double sigma_macro = 0.0;
    // hat_A components in the order (0,0), (1,1), (0,1), (0,2), (1,2);
    // the remaining ones follow from symmetry and tracelessness.
    std::array<Eigen::VectorXd, 5> hat_A;
    std::array<Eigen::VectorXd, 3> hat_B;
    std::array<Eigen::VectorXd, 3> tilde_Phi;
    Eigen::VectorXd tilde_Psi;
};

TransportCoefficients transport_coefficients(const CollisionOperator& op,
                                             const MomentEngine& eng);

// Binary cache of an assembled Boltzmann operator with an integrity digest
// over header and payload.  Loading validates magic, version, dimensions
// against the supplied basis, and the digest.
void cache_store(const CollisionOperator& op, const std::string& path);
CollisionOperator cache_load(const HermiteBasis& basis, const std::string& path);

}  // namespace vpb
