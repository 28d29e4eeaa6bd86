#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace vpb {

/* Velocity-space discretization.
 *
 * Distributions are expanded in tensor Hermite functions
 *   psi_k(v) = h_{k1}(v1) h_{k2}(v2) h_{k3}(v3) sqrt(mu(v)),
 * where mu(v) = (2 pi)^{-3/2} exp(-|v|^2/2) and h_n is the orthonormal
 * probabilists' Hermite polynomial (h_0 = 1, h_1 = x, ...).  The basis is
 * truncated at total degree K and is orthonormal in L^2(dv).  Quadrature is
 * a tensor Gauss-Hermite rule for the unit-Gaussian weight; node weights
 * carry the Maxwellian factor, so sum_q W_q G(v_q) = int G(v) mu(v) dv.
 */

struct MultiIndex {
    int k1 = 0, k2 = 0, k3 = 0;
    int degree() const { return k1 + k2 + k3; }
    int component(int axis) const { return axis == 0 ? k1 : (axis == 1 ? k2 : k3); }
};

class HermiteBasis {
  public:
    // quad_order_per_dim == 0 selects the default K + 2 nodes per dimension.
    explicit HermiteBasis(int degree_cap, int quad_order_per_dim = 0);

    int degree_cap() const { return K_; }
    int size() const { return static_cast<int>(indices_.size()); }
    const MultiIndex& index(int m) const { return indices_[m]; }
    // Returns -1 when the multi-index lies outside the truncated set.
    int find(int k1, int k2, int k3) const;

    int quad_order() const { return q_; }
    const Eigen::VectorXd& nodes_1d() const { return nodes1d_; }
    const Eigen::VectorXd& weights_1d() const { return weights1d_; }

    int node_count() const { return q_ * q_ * q_; }
    Eigen::Vector3d node_point(int q) const;
    // Tensor weights including the Maxwellian factor; they sum to 1.
    const Eigen::VectorXd& node_weights() const { return node_weights_; }
    // node_polys()(q, m) = psi_m(v_q) / sqrt(mu(v_q)), the polynomial factor.
    const Eigen::MatrixXd& node_polys() const { return node_polys_; }
    double max_node_speed() const { return max_speed_; }

    // Evaluate the polynomial factors H_m at an arbitrary point (all m at once).
    void eval_polys(const Eigen::Vector3d& v, double* out) const;
    Eigen::VectorXd eval_polys(const Eigen::Vector3d& v) const;

    // Coefficient vectors of g(v) sqrt(mu) for the collision-invariant moments,
    // exact in the basis: g = 1, v_i, |v|^2.
    const Eigen::VectorXd& vec_one() const { return vec_one_; }
    const Eigen::VectorXd& vec_v(int axis) const { return vec_v_[axis]; }
    const Eigen::VectorXd& vec_vsq() const { return vec_vsq_; }

    // Multiplication by v_axis through the three-term recurrence.  Entries that
    // would exceed total degree K are dropped; *truncated counts them.
    Eigen::VectorXd multiply_v(int axis, const Eigen::VectorXd& c, long* truncated = nullptr) const;
    // d/dv_axis through the ladder relation; same truncation accounting.
    Eigen::VectorXd derivative_v(int axis, const Eigen::VectorXd& c, long* truncated = nullptr) const;

    // Galerkin matrix of (1 - Laplacian_v) on the truncated span (exact, SPD).
    const Eigen::MatrixXd& one_minus_laplacian() const { return one_minus_lap_; }
    // (1 - Laplacian_v)^p through the symmetric eigendecomposition.
    Eigen::MatrixXd fractional_power(double p) const;

  private:
    int K_ = 0;
    int q_ = 0;
    std::vector<MultiIndex> indices_;
    std::vector<int> lookup_;
    Eigen::VectorXd nodes1d_, weights1d_;
    Eigen::VectorXd node_weights_;
    Eigen::MatrixXd node_polys_;
    Eigen::VectorXd vec_one_, vec_vsq_;
    Eigen::VectorXd vec_v_[3];
    Eigen::MatrixXd one_minus_lap_;
    Eigen::MatrixXd lap_eigvec_;
    Eigen::VectorXd lap_eigval_;
    double max_speed_ = 0.0;
};

// Polynomial-weight bookkeeping for weighted norms: the weight is
// <v>^{exponent(|alpha|, |beta|)} with <v> = sqrt(1 + |v|^2).  The exponent
// depends on the kernel regime: for gamma >= -2s the loss per derivative is
// one power; for -3 < gamma < -2s the softer bookkeeping applies.
struct WeightSpec {
    double l = 3.0;
    double gamma = 0.0;
    double s = 0.5;
    int alpha_order = 0;            // spatial derivative count the weight is tied to
    int beta_order = 0;             // velocity derivative count the weight is tied to
    bool use_field_factor = false;  // optional exp(+-eps phi) factor in x

    bool soft_regime() const { return gamma < -2.0 * s; }
    double exponent(int a, int b) const {
        if (!soft_regime()) return l - a - b;
        const double r = -3.0 * gamma / s;
        return l - (r + gamma) * a - r * b;
    }
    double exponent() const { return exponent(alpha_order, beta_order); }
};

}  // namespace vpb
