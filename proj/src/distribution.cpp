#include "vpb/distribution.hpp"

namespace vpb {

MomentEngine::MomentEngine(const HermiteBasis& basis) : basis_(&basis) {
    if (basis.degree_cap() < 2) {
        throw std::invalid_argument(
            "MomentEngine: the macroscopic projection needs Hermite degree >= 2, got cap " +
            std::to_string(basis.degree_cap()));
    }
    const int M = basis.size();
    e0_ = basis.find(0, 0, 0);
    for (int i = 0; i < 3; ++i) {
        int k[3] = {0, 0, 0};
        k[i] = 1;
        ev_[i] = basis.find(k[0], k[1], k[2]);
        k[i] = 2;
        h2_[i] = basis.find(k[0], k[1], k[2]);
    }

    // A_ij sqrt(mu): off-diagonal v_i v_j = psi_{e_i + e_j}; diagonal
    // v_i^2 - |v|^2/3 = sqrt(2) ((2/3) h2_i - (1/3) h2_j - (1/3) h2_k).
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            Eigen::VectorXd a = Eigen::VectorXd::Zero(M);
            if (i != j) {
                int k[3] = {0, 0, 0};
                k[i] = 1;
                k[j] = 1;
                const int idx = basis.find(k[0], k[1], k[2]);
                if (idx >= 0) a[idx] = 1.0;
            } else {
                for (int p = 0; p < 3; ++p) {
                    if (h2_[p] < 0) continue;
                    a[h2_[p]] = std::sqrt(2.0) * (p == i ? 2.0 / 3.0 : -1.0 / 3.0);
                }
            }
            a_vec_[3 * i + j] = a;
        }
    }

    // B_i sqrt(mu) with B_i = v_i (|v|^2 - 5)/2:
    //   (|v|^2 - 5) v_i = sqrt(6) psi_{3 e_i} + sqrt(2) psi_{e_i + 2 e_j}
    //                     + sqrt(2) psi_{e_i + 2 e_k}.
    for (int i = 0; i < 3; ++i) {
        Eigen::VectorXd b = Eigen::VectorXd::Zero(M);
        int k[3] = {0, 0, 0};
        k[i] = 3;
        int idx = basis.find(k[0], k[1], k[2]);
        if (idx >= 0) b[idx] = 0.5 * std::sqrt(6.0);
        for (int p = 0; p < 3; ++p) {
            if (p == i) continue;
            int kk[3] = {0, 0, 0};
            kk[i] = 1;
            kk[p] = 2;
            idx = basis.find(kk[0], kk[1], kk[2]);
            if (idx >= 0) b[idx] = 0.5 * std::sqrt(2.0);
        }
        b_vec_[i] = b;
    }

    node_vsq_.resize(basis.node_count());
    for (int q = 0; q < basis.node_count(); ++q)
        node_vsq_[q] = basis.node_point(q).squaredNorm();
}

HydroProjection MomentEngine::hydro(const TwoSpeciesDistribution& f) const {
    HydroProjection h;
    h.a_plus = f.plus.row(e0_);
    h.a_minus = f.minus.row(e0_);
    h.b.resize(3, f.nx());
    for (int i = 0; i < 3; ++i) {
        if (ev_[i] >= 0)
            h.b.row(i) = 0.5 * (f.plus.row(ev_[i]) + f.minus.row(ev_[i]));
        else
            h.b.row(i).setZero();
    }
    h.c = Eigen::VectorXd::Zero(f.nx());
    for (int i = 0; i < 3; ++i) {
        if (h2_[i] < 0) continue;
        h.c += (std::sqrt(2.0) / 12.0) *
               (f.plus.row(h2_[i]) + f.minus.row(h2_[i])).transpose();
    }
    return h;
}

TwoSpeciesDistribution MomentEngine::apply_P(const TwoSpeciesDistribution& f) const {
    HydroProjection h = hydro(f);
    TwoSpeciesDistribution out = TwoSpeciesDistribution::zero(f.modes(), f.nx());
    out.plus.row(e0_) = h.a_plus;
    out.minus.row(e0_) = h.a_minus;
    for (int i = 0; i < 3; ++i) {
        if (ev_[i] >= 0) {
            out.plus.row(ev_[i]) = h.b.row(i);
            out.minus.row(ev_[i]) = h.b.row(i);
        }
        if (h2_[i] >= 0) {
            out.plus.row(h2_[i]) = std::sqrt(2.0) * h.c;
            out.minus.row(h2_[i]) = std::sqrt(2.0) * h.c;
        }
    }
    return out;
}

TwoSpeciesDistribution MomentEngine::micro_part(const TwoSpeciesDistribution& f) const {
    TwoSpeciesDistribution out = f;
    out -= apply_P(f);
    return out;
}

FluidMoments MomentEngine::moments(const TwoSpeciesDistribution& f, double eps) const {
    FluidMoments m;
    const int nx = f.nx();
    m.rho = 0.5 * (f.plus.row(e0_) + f.minus.row(e0_));
    m.n = f.plus.row(e0_) - f.minus.row(e0_);
    m.u.resize(3, nx);
    m.j.resize(3, nx);
    for (int i = 0; i < 3; ++i) {
        if (ev_[i] >= 0) {
            m.u.row(i) = 0.5 * (f.plus.row(ev_[i]) + f.minus.row(ev_[i]));
            m.j.row(i) = (f.plus.row(ev_[i]) - f.minus.row(ev_[i])) / eps;
        } else {
            m.u.row(i).setZero();
            m.j.row(i).setZero();
        }
    }
    m.theta = Eigen::VectorXd::Zero(nx);
    m.omega = Eigen::VectorXd::Zero(nx);
    for (int i = 0; i < 3; ++i) {
        if (h2_[i] < 0) continue;
        m.theta += (std::sqrt(2.0) / 6.0) *
                   (f.plus.row(h2_[i]) + f.minus.row(h2_[i])).transpose();
        m.omega += (std::sqrt(2.0) / (3.0 * eps)) *
                   (f.plus.row(h2_[i]) - f.minus.row(h2_[i])).transpose();
    }
    return m;
}

Eigen::VectorXd MomentEngine::theta_moment(const Eigen::MatrixXd& g, int i, int j) const {
    if (i != j) {
        int k[3] = {0, 0, 0};
        k[i] = 1;
        k[j] = 1;
        const int idx = basis_->find(k[0], k[1], k[2]);
        if (idx < 0) return Eigen::VectorXd::Zero(g.cols());
        return g.row(idx);
    }
    if (h2_[i] < 0) return Eigen::VectorXd::Zero(g.cols());
    return std::sqrt(2.0) * g.row(h2_[i]);
}

Eigen::VectorXd MomentEngine::lambda_moment(const Eigen::MatrixXd& g, int i) const {
    // (1/10) <(|v|^2 - 5) v_i sqrt(mu), g> = (1/5) <B_i sqrt(mu), g>.
    return (0.2 * (b_vec_[i].transpose() * g)).transpose();
}

Eigen::VectorXd MomentEngine::weighted_norm_sq_columns(const Eigen::MatrixXd& g,
                                                       double exponent,
                                                       double sobolev_order) const {
    const Eigen::MatrixXd* coeffs = &g;
    Eigen::MatrixXd smoothed;
    if (sobolev_order != 0.0) {
        smoothed = basis_->fractional_power(0.5 * sobolev_order) * g;
        coeffs = &smoothed;
    }
    Eigen::MatrixXd vals = basis_->node_polys() * (*coeffs);  // nodes x nx
    Eigen::VectorXd wf(basis_->node_count());
    for (int q = 0; q < basis_->node_count(); ++q)
        wf[q] = basis_->node_weights()[q] * std::pow(1.0 + node_vsq_[q], exponent);
    return (vals.array().square().colwise() * wf.array()).colwise().sum();
}

double MomentEngine::weighted_norm(const TorusGrid& grid, const TwoSpeciesDistribution& f,
                                   double exponent, double sobolev_order) const {
    Eigen::VectorXd sp = weighted_norm_sq_columns(f.plus, exponent, sobolev_order);
    Eigen::VectorXd sm = weighted_norm_sq_columns(f.minus, exponent, sobolev_order);
    return std::sqrt((sp.sum() + sm.sum()) * grid.dx());
}

double MomentEngine::weighted_norm(const TorusGrid& grid, const TwoSpeciesDistribution& f,
                                   const WeightSpec& w, double sobolev_order) const {
    const double tol = 1e-12;
    const bool admissible = std::abs(sobolev_order) < tol ||
                            std::abs(sobolev_order - w.s) < tol ||
                            std::abs(sobolev_order - 1.0) < tol ||
                            std::abs(sobolev_order - (1.0 + w.s)) < tol;
    if (!admissible) {
        throw std::invalid_argument("weighted_norm: Sobolev order must be 0, s, 1, or 1+s; got " +
                                    std::to_string(sobolev_order));
    }
    return weighted_norm(grid, f, w.exponent() + 0.5 * w.gamma, sobolev_order);
}

Eigen::MatrixXd apply_v_derivative(const HermiteBasis& basis, const Eigen::MatrixXd& g,
                                   int axis, long* truncated) {
    Eigen::MatrixXd out(g.rows(), g.cols());
    for (int c = 0; c < g.cols(); ++c)
        out.col(c) = basis.derivative_v(axis, g.col(c), truncated);
    return out;
}

Eigen::MatrixXd apply_v_multiply(const HermiteBasis& basis, const Eigen::MatrixXd& g,
                                 int axis, long* truncated) {
    Eigen::MatrixXd out(g.rows(), g.cols());
    for (int c = 0; c < g.cols(); ++c)
        out.col(c) = basis.multiply_v(axis, g.col(c), truncated);
    return out;
}

Eigen::MatrixXd apply_x_derivative(const TorusGrid& grid, const Eigen::MatrixXd& g) {
    return g * grid.derivative_matrix().transpose();
}

}  // namespace vpb
