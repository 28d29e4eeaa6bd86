#pragma once

#include "vpb/hermite.hpp"
#include "vpb/spatial.hpp"

namespace vpb {

/* Two-species perturbation fields.
 *
 * The ion and electron perturbations f_+ and f_- are stored as Hermite
 * coefficient matrices of shape M x n_x: entry (m, i) is the coefficient of
 * psi_m at grid point x_i.  The kinetic distributions are
 *   F_+- = mu + eps sqrt(mu) f_+-.
 *
 * The macroscopic projection P maps onto the six-dimensional subspace
 *   { a_+ [1,0] + a_- [0,1] + b . v [1,1] + c (|v|^2 - 3) [1,1] } sqrt(mu)
 * with a_+- = <sqrt(mu), f_+->, b = (1/2) <v sqrt(mu), f_+ + f_->,
 * c = (1/12) <(|v|^2 - 3) sqrt(mu), f_+ + f_->.
 */

struct TwoSpeciesDistribution {
    Eigen::MatrixXd plus, minus;

    static TwoSpeciesDistribution zero(int modes, int nx) {
        return {Eigen::MatrixXd::Zero(modes, nx), Eigen::MatrixXd::Zero(modes, nx)};
    }
    int modes() const { return static_cast<int>(plus.rows()); }
    int nx() const { return static_cast<int>(plus.cols()); }

    TwoSpeciesDistribution& operator+=(const TwoSpeciesDistribution& o) {
        plus += o.plus;
        minus += o.minus;
        return *this;
    }
    TwoSpeciesDistribution& operator-=(const TwoSpeciesDistribution& o) {
        plus -= o.plus;
        minus -= o.minus;
        return *this;
    }
    TwoSpeciesDistribution& operator*=(double a) {
        plus *= a;
        minus *= a;
        return *this;
    }
    double squared_sum() const { return plus.squaredNorm() + minus.squaredNorm(); }
};

struct HydroProjection {
    Eigen::VectorXd a_plus, a_minus, c;  // n_x entries each
    Eigen::MatrixXd b;                   // 3 x n_x
};

struct FluidMoments {
    Eigen::VectorXd rho, theta, n, omega;  // n_x entries each
    Eigen::MatrixXd u, j;                  // 3 x n_x
};

class MomentEngine {
  public:
    explicit MomentEngine(const HermiteBasis& basis);

    const HermiteBasis& basis() const { return *basis_; }

    HydroProjection hydro(const TwoSpeciesDistribution& f) const;
    TwoSpeciesDistribution apply_P(const TwoSpeciesDistribution& f) const;
    TwoSpeciesDistribution micro_part(const TwoSpeciesDistribution& f) const;

    // rho = (1/2)<f, q2 sqrt(mu)>, u = (1/2)<f, q2 v sqrt(mu)>,
    // theta = (1/2)<f, q2 (|v|^2/3 - 1) sqrt(mu)>, n = <f, q1 sqrt(mu)>,
    // j = (1/eps)<f, q1 v sqrt(mu)>, omega = (1/eps)<f, q1 (|v|^2/3 - 1) sqrt(mu)>.
    FluidMoments moments(const TwoSpeciesDistribution& f, double eps) const;

    // Theta_ij(g) = int (v_i v_j - delta_ij) sqrt(mu) g dv for a single-species
    // coefficient field g (M x n_x), returned per grid point.
    Eigen::VectorXd theta_moment(const Eigen::MatrixXd& g, int i, int j) const;
    // Lambda_i(g) = (1/10) int (|v|^2 - 5) v_i sqrt(mu) g dv.
    Eigen::VectorXd lambda_moment(const Eigen::MatrixXd& g, int i) const;

    // Contraction vectors for A_ij = v_i v_j - (|v|^2/3) delta_ij and
    // B_i = v_i (|v|^2 - 5) / 2, as coefficient vectors of A_ij sqrt(mu) etc.
    const Eigen::VectorXd& a_vec(int i, int j) const { return a_vec_[3 * i + j]; }
    const Eigen::VectorXd& b_vec(int i) const { return b_vec_[i]; }

    // L2 norm in v of <v>^e (1 - Laplacian_v)^{o/2} applied columnwise, then
    // the L2 norm in x with the grid measure, both species summed in square.
    double weighted_norm(const TorusGrid& grid, const TwoSpeciesDistribution& f,
                         double exponent, double sobolev_order) const;
    // Dissipation-flavored norm: total velocity weight <v>^{w.exponent() + gamma/2}
    // with the Sobolev order restricted to {0, s, 1, 1 + s}.
    double weighted_norm(const TorusGrid& grid, const TwoSpeciesDistribution& f,
                         const WeightSpec& w, double sobolev_order) const;
    // Same without the x integration: squared v-norms per grid column.
    Eigen::VectorXd weighted_norm_sq_columns(const Eigen::MatrixXd& g, double exponent,
                                             double sobolev_order) const;

  private:
    const HermiteBasis* basis_;
    int e0_ = 0;
    int ev_[3] = {-1, -1, -1};
    int h2_[3] = {-1, -1, -1};
    Eigen::VectorXd a_vec_[9], b_vec_[3];
    Eigen::VectorXd node_vsq_;  // |v_q|^2 at the quadrature nodes
};

// d/dv_axis applied to every x column of a coefficient field.
Eigen::MatrixXd apply_v_derivative(const HermiteBasis& basis, const Eigen::MatrixXd& g,
                                   int axis, long* truncated = nullptr);
// v_axis multiplication applied to every x column.
Eigen::MatrixXd apply_v_multiply(const HermiteBasis& basis, const Eigen::MatrixXd& g,
                                 int axis, long* truncated = nullptr);
// Spectral x-derivative of a coefficient field (acts on the column index).
Eigen::MatrixXd apply_x_derivative(const TorusGrid& grid, const Eigen::MatrixXd& g);

}  // namespace vpb
