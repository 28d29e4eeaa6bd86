#include "vpb/hermite.hpp"

#include <cmath>

namespace vpb {

namespace {

// Gauss-Hermite rule for the weight exp(-x^2/2)/sqrt(2 pi) via the symmetric
// tridiagonal Jacobi matrix of the probabilists' polynomials.
void gauss_hermite_unit(int n, Eigen::VectorXd& nodes, Eigen::VectorXd& weights) {
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i) {
        const double b = std::sqrt(static_cast<double>(i));
        J(i, i - 1) = b;
        J(i - 1, i) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    nodes = es.eigenvalues();
    weights.resize(n);
    for (int i = 0; i < n; ++i) {
        const double v0 = es.eigenvectors()(0, i);
        weights[i] = v0 * v0;
    }
}

void hermite_values(int K, double x, std::vector<double>& h) {
    h.resize(K + 1);
    h[0] = 1.0;
    if (K >= 1) h[1] = x;
    for (int n = 1; n < K; ++n)
        h[n + 1] = (x * h[n] - std::sqrt(static_cast<double>(n)) * h[n - 1]) /
                   std::sqrt(static_cast<double>(n + 1));
}

}  // namespace

HermiteBasis::HermiteBasis(int degree_cap, int quad_order_per_dim) : K_(degree_cap) {
    if (K_ < 0) throw std::invalid_argument("HermiteBasis: degree cap must be non-negative");
    q_ = quad_order_per_dim > 0 ? quad_order_per_dim : K_ + 2;
    if (q_ < K_ + 1)
        throw std::invalid_argument("HermiteBasis: quadrature order below basis exactness minimum");

    for (int d = 0; d <= K_; ++d)
        for (int k1 = 0; k1 <= d; ++k1)
            for (int k2 = 0; k2 <= d - k1; ++k2)
                indices_.push_back({k1, k2, d - k1 - k2});
    const int M = static_cast<int>(indices_.size());

    lookup_.assign((K_ + 1) * (K_ + 1) * (K_ + 1), -1);
    for (int m = 0; m < M; ++m) {
        const MultiIndex& k = indices_[m];
        lookup_[(k.k1 * (K_ + 1) + k.k2) * (K_ + 1) + k.k3] = m;
    }

    gauss_hermite_unit(q_, nodes1d_, weights1d_);

    const int nq = node_count();
    node_weights_.resize(nq);
    node_polys_.resize(nq, M);
    std::vector<double> h1(K_ + 1), h2(K_ + 1), h3(K_ + 1);
    std::vector<double> tmp;
    max_speed_ = 0.0;
    for (int a = 0; a < q_; ++a) {
        hermite_values(K_, nodes1d_[a], tmp);
        h1 = tmp;
        for (int b = 0; b < q_; ++b) {
            hermite_values(K_, nodes1d_[b], tmp);
            h2 = tmp;
            for (int c = 0; c < q_; ++c) {
                hermite_values(K_, nodes1d_[c], tmp);
                h3 = tmp;
                const int q = (a * q_ + b) * q_ + c;
                node_weights_[q] = weights1d_[a] * weights1d_[b] * weights1d_[c];
                const double speed = std::sqrt(nodes1d_[a] * nodes1d_[a] +
                                               nodes1d_[b] * nodes1d_[b] +
                                               nodes1d_[c] * nodes1d_[c]);
                max_speed_ = std::max(max_speed_, speed);
                for (int m = 0; m < M; ++m) {
                    const MultiIndex& k = indices_[m];
                    node_polys_(q, m) = h1[k.k1] * h2[k.k2] * h3[k.k3];
                }
            }
        }
    }

    vec_one_ = Eigen::VectorXd::Zero(M);
    vec_one_[find(0, 0, 0)] = 1.0;
    for (int axis = 0; axis < 3; ++axis) {
        vec_v_[axis] = Eigen::VectorXd::Zero(M);
        if (K_ >= 1) {
            int k[3] = {0, 0, 0};
            k[axis] = 1;
            vec_v_[axis][find(k[0], k[1], k[2])] = 1.0;
        }
    }
    // |v|^2 = sum_i (sqrt(2) h_2(v_i) + 1)
    vec_vsq_ = Eigen::VectorXd::Zero(M);
    vec_vsq_[find(0, 0, 0)] = 3.0;
    if (K_ >= 2) {
        vec_vsq_[find(2, 0, 0)] = std::sqrt(2.0);
        vec_vsq_[find(0, 2, 0)] = std::sqrt(2.0);
        vec_vsq_[find(0, 0, 2)] = std::sqrt(2.0);
    }

    // Exact Galerkin matrix of (1 - Laplacian): 1-D stiffness blocks
    //   <d(h_j w), d(h_k w)> = (2j+1)/4 on the diagonal,
    //   -sqrt((j+1)(j+2))/4 on the second off-diagonals,
    // summed over the three axes with Kronecker deltas elsewhere.
    one_minus_lap_ = Eigen::MatrixXd::Identity(M, M);
    for (int m = 0; m < M; ++m) {
        const MultiIndex& km = indices_[m];
        for (int axis = 0; axis < 3; ++axis) {
            const int j = km.component(axis);
            one_minus_lap_(m, m) += (2.0 * j + 1.0) / 4.0;
            int k[3] = {km.k1, km.k2, km.k3};
            k[axis] = j + 2;
            const int n = (j + 2 <= K_) ? find(k[0], k[1], k[2]) : -1;
            if (n >= 0 && km.degree() + 2 <= K_) {
                const double off = -std::sqrt(static_cast<double>((j + 1) * (j + 2))) / 4.0;
                one_minus_lap_(m, n) += off;
                one_minus_lap_(n, m) += off;
            }
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(one_minus_lap_);
    lap_eigvec_ = es.eigenvectors();
    lap_eigval_ = es.eigenvalues();
}

int HermiteBasis::find(int k1, int k2, int k3) const {
    if (k1 < 0 || k2 < 0 || k3 < 0 || k1 + k2 + k3 > K_) return -1;
    return lookup_[(k1 * (K_ + 1) + k2) * (K_ + 1) + k3];
}

Eigen::Vector3d HermiteBasis::node_point(int q) const {
    const int c = q % q_;
    const int b = (q / q_) % q_;
    const int a = q / (q_ * q_);
    return {nodes1d_[a], nodes1d_[b], nodes1d_[c]};
}

void HermiteBasis::eval_polys(const Eigen::Vector3d& v, double* out) const {
    std::vector<double> h1, h2, h3;
    hermite_values(K_, v[0], h1);
    hermite_values(K_, v[1], h2);
    hermite_values(K_, v[2], h3);
    const int M = size();
    for (int m = 0; m < M; ++m) {
        const MultiIndex& k = indices_[m];
        out[m] = h1[k.k1] * h2[k.k2] * h3[k.k3];
    }
}

Eigen::VectorXd HermiteBasis::eval_polys(const Eigen::Vector3d& v) const {
    Eigen::VectorXd out(size());
    eval_polys(v, out.data());
    return out;
}

Eigen::VectorXd HermiteBasis::multiply_v(int axis, const Eigen::VectorXd& c, long* truncated) const {
    const int M = size();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(M);
    long dropped = 0;
    for (int m = 0; m < M; ++m) {
        const double cm = c[m];
        if (cm == 0.0) continue;
        const MultiIndex& k = indices_[m];
        const int j = k.component(axis);
        int idx[3] = {k.k1, k.k2, k.k3};
        // x h_j = sqrt(j+1) h_{j+1} + sqrt(j) h_{j-1}
        if (k.degree() + 1 <= K_) {
            idx[axis] = j + 1;
            out[find(idx[0], idx[1], idx[2])] += std::sqrt(static_cast<double>(j + 1)) * cm;
        } else {
            ++dropped;
        }
        if (j >= 1) {
            idx[axis] = j - 1;
            out[find(idx[0], idx[1], idx[2])] += std::sqrt(static_cast<double>(j)) * cm;
        }
    }
    if (truncated) *truncated += dropped;
    return out;
}

Eigen::VectorXd HermiteBasis::derivative_v(int axis, const Eigen::VectorXd& c, long* truncated) const {
    const int M = size();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(M);
    long dropped = 0;
    for (int m = 0; m < M; ++m) {
        const double cm = c[m];
        if (cm == 0.0) continue;
        const MultiIndex& k = indices_[m];
        const int j = k.component(axis);
        int idx[3] = {k.k1, k.k2, k.k3};
        // d/dx (h_j w) = (sqrt(j)/2) h_{j-1} w - (sqrt(j+1)/2) h_{j+1} w
        if (j >= 1) {
            idx[axis] = j - 1;
            out[find(idx[0], idx[1], idx[2])] += 0.5 * std::sqrt(static_cast<double>(j)) * cm;
        }
        if (k.degree() + 1 <= K_) {
            idx[axis] = j + 1;
            out[find(idx[0], idx[1], idx[2])] -= 0.5 * std::sqrt(static_cast<double>(j + 1)) * cm;
        } else {
            ++dropped;
        }
    }
    if (truncated) *truncated += dropped;
    return out;
}

Eigen::MatrixXd HermiteBasis::fractional_power(double p) const {
    Eigen::VectorXd lam = lap_eigval_;
    for (int i = 0; i < lam.size(); ++i) lam[i] = std::pow(lam[i], p);
    return lap_eigvec_ * lam.asDiagonal() * lap_eigvec_.transpose();
}

}  // namespace vpb
