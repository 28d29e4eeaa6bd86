#include "vpb/collision.hpp"

#include "vpb/io_util.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstring>
#include <memory>
#include <sstream>

namespace vpb {

namespace {

constexpr std::uint32_t kCacheVersion = 1;
constexpr char kCacheMagic[4] = {'V', 'P', 'B', 'T'};
constexpr int kAssemblyChunk = 4096;

void gauss_legendre(int n, double a, double b, Eigen::VectorXd& x, Eigen::VectorXd& w) {
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        const double off = k / std::sqrt(4.0 * k * k - 1.0);
        J(k - 1, k) = off;
        J(k, k - 1) = off;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(J);
    if (eig.info() != Eigen::Success) throw std::runtime_error("gauss_legendre: eigensolve failed");
    x.resize(n);
    w.resize(n);
    for (int i = 0; i < n; ++i) {
        x[i] = a + 0.5 * (b - a) * (eig.eigenvalues()[i] + 1.0);
        const double v0 = eig.eigenvectors()(0, i);
        w[i] = (b - a) * v0 * v0;
    }
}

struct AngularRule {
    Eigen::VectorXd cos_t, sin_t, w_t;
    Eigen::VectorXd cos_p, sin_p;
    double w_p = 0.0;
    double theta_mass = 0.0;
};

AngularRule build_angular(const KernelSpec& ks) {
    AngularRule ar;
    const double y_lo = std::pow(M_PI / 2.0, -2.0 * ks.s);
    const double y_hi = std::pow(ks.theta_min, -2.0 * ks.s);
    Eigen::VectorXd y, wy;
    gauss_legendre(ks.n_theta, y_lo, y_hi, y, wy);
    ar.cos_t.resize(ks.n_theta);
    ar.sin_t.resize(ks.n_theta);
    ar.w_t.resize(ks.n_theta);
    for (int t = 0; t < ks.n_theta; ++t) {
        const double theta = std::pow(y[t], -1.0 / (2.0 * ks.s));
        ar.cos_t[t] = std::cos(theta);
        ar.sin_t[t] = std::sin(theta);
        ar.w_t[t] = wy[t] / (2.0 * ks.s);
    }
    ar.theta_mass = ar.w_t.sum();
    ar.cos_p.resize(ks.n_phi);
    ar.sin_p.resize(ks.n_phi);
    for (int i = 0; i < ks.n_phi; ++i) {
        const double phi = 2.0 * M_PI * (i + 0.5) / ks.n_phi;
        ar.cos_p[i] = std::cos(phi);
        ar.sin_p[i] = std::sin(phi);
    }
    ar.w_p = 2.0 * M_PI / ks.n_phi;
    return ar;
}

void scattering_frame(const Eigen::Vector3d& khat, Eigen::Vector3d& e1, Eigen::Vector3d& e2) {
    int axis = 0;
    double best = std::abs(khat[0]);
    for (int a = 1; a < 3; ++a) {
        if (std::abs(khat[a]) < best) {
            best = std::abs(khat[a]);
            axis = a;
        }
    }
    Eigen::Vector3d ea = Eigen::Vector3d::Zero();
    ea[axis] = 1.0;
    e1 = (ea - khat.dot(ea) * khat).normalized();
    e2 = khat.cross(e1);
}

// Orthonormal single-species collision invariants in coefficient space:
// columns mass, v_1, v_2, v_3, (|v|^2 - 3)/sqrt(6).
Eigen::MatrixXd invariant_columns(const HermiteBasis& basis) {
    const int M = basis.size();
    Eigen::MatrixXd xi = Eigen::MatrixXd::Zero(M, 5);
    xi.col(0) = basis.vec_one();
    for (int i = 0; i < 3; ++i) xi.col(1 + i) = basis.vec_v(i);
    xi.col(4) = (basis.vec_vsq() - 3.0 * basis.vec_one()) / std::sqrt(6.0);
    return xi;
}

// Flattened pair index for the M x M x M tensor: row m + n * M holds the
// output fiber of the ordered argument pair (m, n).
inline int pair_row(int m, int n, int M) { return m + n * M; }

Eigen::MatrixXd assemble_raw_tensor(const HermiteBasis& basis, const KernelSpec& ks) {
    AngularRule ang = build_angular(ks);

    std::unique_ptr<HermiteBasis> own;
    const HermiteBasis* nb = &basis;
    if (ks.quad_order != 0 && ks.quad_order != basis.quad_order()) {
        own = std::make_unique<HermiteBasis>(basis.degree_cap(), ks.quad_order);
        nb = own.get();
    }
    const int M = basis.size();
    const int Nq = nb->node_count();
    const Eigen::MatrixXd& HP = nb->node_polys();
    const Eigen::VectorXd& W = nb->node_weights();
    const double ang_total = 2.0 * M_PI * ang.theta_mass;

    Eigen::MatrixXd Cmat(M * M, Nq);
    Eigen::MatrixXd Hw(Nq, M);
    for (int a = 0; a < Nq; ++a) Hw.row(a) = W[a] * HP.row(a);

    Eigen::MatrixXd U(M, kAssemblyChunk), V(M, kAssemblyChunk);
    Eigen::VectorXd wcol(kAssemblyChunk);
    Eigen::MatrixXd Ga(M, M);
    Eigen::VectorXd Pa(M);

    for (int a = 0; a < Nq; ++a) {
        const Eigen::Vector3d va = nb->node_point(a);
        Ga.setZero();
        Pa.setZero();
        int col = 0;
        auto flush = [&]() {
            if (col == 0) return;
            Ga.noalias() +=
                (U.leftCols(col).array().rowwise() * wcol.head(col).transpose().array())
                    .matrix() *
                V.leftCols(col).transpose();
            col = 0;
        };
        for (int b = 0; b < Nq; ++b) {
            const Eigen::Vector3d vb = nb->node_point(b);
            const Eigen::Vector3d u = va - vb;
            const double unorm = u.norm();
            if (unorm < 1e-12) continue;
            const double bfac = ks.C_phi * std::pow(unorm, ks.gamma);
            Pa.noalias() += (W[b] * bfac * ang_total) * HP.row(b).transpose();
            const Eigen::Vector3d khat = u / unorm;
            Eigen::Vector3d e1, e2;
            scattering_frame(khat, e1, e2);
            const Eigen::Vector3d mid = 0.5 * (va + vb);
            const double half_u = 0.5 * unorm;
            const double wb = W[b] * bfac;
            for (int t = 0; t < ks.n_theta; ++t) {
                const Eigen::Vector3d axial = ang.cos_t[t] * khat;
                const double wt = wb * ang.w_t[t] * ang.w_p;
                for (int i = 0; i < ks.n_phi; ++i) {
                    const Eigen::Vector3d sigma =
                        axial + ang.sin_t[t] * (ang.cos_p[i] * e1 + ang.sin_p[i] * e2);
                    const Eigen::Vector3d vp = mid + half_u * sigma;
                    const Eigen::Vector3d vsp = mid - half_u * sigma;
                    nb->eval_polys(vsp, U.col(col).data());
                    nb->eval_polys(vp, V.col(col).data());
                    wcol[col] = wt;
                    if (++col == kAssemblyChunk) flush();
                }
            }
        }
        flush();
        Ga.noalias() -= Pa * HP.row(a);
        Cmat.col(a) = Eigen::Map<const Eigen::VectorXd>(Ga.data(), M * M);
    }
    return Cmat * Hw;
}

struct ProjectedTensors {
    Eigen::MatrixXd sym;  // M^2 x M, symmetric part, invariant-free fibers
    Eigen::MatrixXd rec;  // M^2 x M, recombined with the cleaned antisymmetric part
};

/* Fiber cleanup.
 *
 * For the pair-symmetrized tensor every collision invariant component of an
 * output fiber vanishes analytically; for the antisymmetric part only the
 * mass component does, while momentum and energy exchange between the
 * arguments is genuine and must be kept.  Projecting exactly those
 * components removes pure quadrature error and makes the bilinear-form
 * invariances hold identically.
 */
ProjectedTensors project_tensor(const Eigen::MatrixXd& Tflat, const Eigen::MatrixXd& xi,
                                int M) {
    ProjectedTensors out;
    out.sym.resize(M * M, M);
    out.rec.resize(M * M, M);
    Eigen::VectorXd ts(M), td(M);
    for (int m = 0; m < M; ++m) {
        for (int n = m; n < M; ++n) {
            const int r1 = pair_row(m, n, M);
            const int r2 = pair_row(n, m, M);
            ts = 0.5 * (Tflat.row(r1) + Tflat.row(r2)).transpose();
            td = 0.5 * (Tflat.row(r1) - Tflat.row(r2)).transpose();
            ts.noalias() -= xi * (xi.transpose() * ts);
            td.noalias() -= xi.col(0) * xi.col(0).dot(td);
            out.sym.row(r1) = ts.transpose();
            out.sym.row(r2) = ts.transpose();
            out.rec.row(r1) = (ts + td).transpose();
            out.rec.row(r2) = (ts - td).transpose();
        }
    }
    return out;
}

Eigen::MatrixXd two_species_L(const Eigen::MatrixXd& Trec, int M) {
    Eigen::MatrixXd A1(M, M), A2(M, M);
    for (int n = 0; n < M; ++n) A1.col(n) = Trec.row(pair_row(0, n, M)).transpose();
    for (int m = 0; m < M; ++m) A2.col(m) = Trec.row(pair_row(m, 0, M)).transpose();
    Eigen::MatrixXd La = -(2.0 * A1 + A2);
    Eigen::MatrixXd Lb = -A2;
    Eigen::MatrixXd L(2 * M, 2 * M);
    L.topLeftCorner(M, M) = La;
    L.topRightCorner(M, M) = Lb;
    L.bottomLeftCorner(M, M) = Lb;
    L.bottomRightCorner(M, M) = La;
    return L;
}

Eigen::MatrixXd two_species_kernel_columns(const Eigen::MatrixXd& xi) {
    const int M = static_cast<int>(xi.rows());
    const double r = 1.0 / std::sqrt(2.0);
    Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(2 * M, 6);
    Z.col(0).head(M) = xi.col(0);
    Z.col(1).tail(M) = xi.col(0);
    for (int i = 0; i < 3; ++i) {
        Z.col(2 + i).head(M) = r * xi.col(1 + i);
        Z.col(2 + i).tail(M) = r * xi.col(1 + i);
    }
    Z.col(5).head(M) = r * xi.col(4);
    Z.col(5).tail(M) = r * xi.col(4);
    return Z;
}

Eigen::MatrixXd enforce_symmetry_and_kernel(const Eigen::MatrixXd& L,
                                            const Eigen::MatrixXd& xi) {
    Eigen::MatrixXd Ls = 0.5 * (L + L.transpose());
    Eigen::MatrixXd Z = two_species_kernel_columns(xi);
    Eigen::MatrixXd P =
        Eigen::MatrixXd::Identity(L.rows(), L.cols()) - Z * Z.transpose();
    return P * Ls * P;
}

std::vector<GammaTriplet> extract_triplets(const Eigen::MatrixXd& Tsym, int M) {
    const double maxabs = Tsym.cwiseAbs().maxCoeff();
    const double tol = 1e-14 * maxabs;
    std::vector<GammaTriplet> out;
    for (int n = 0; n < M; ++n) {
        for (int m = 0; m < M; ++m) {
            const auto row = Tsym.row(pair_row(m, n, M));
            for (int p = 0; p < M; ++p) {
                if (std::abs(row[p]) > tol) {
                    out.push_back({static_cast<std::uint32_t>(m), static_cast<std::uint32_t>(n),
                                   static_cast<std::uint32_t>(p), row[p]});
                }
            }
        }
    }
    return out;
}

std::vector<std::uint8_t> serialize_operator(const CollisionOperator& op,
                                             std::array<std::uint8_t, 32>* digest_out) {
    ByteSink header;
    header.put_raw(kCacheMagic, 4);
    header.put_u32(kCacheVersion);
    header.put_u32(static_cast<std::uint32_t>(op.degree_cap));
    header.put_u32(static_cast<std::uint32_t>(op.modes));
    header.put_u32(1);  // collision data does not depend on the spatial point
    header.put_f64(op.kernel.gamma);
    header.put_f64(op.kernel.s);
    header.put_f64(op.kernel.C_phi);
    header.put_f64(op.kernel.theta_min);

    ByteSink payload;
    const int twoM = 2 * op.modes;
    for (int r = 0; r < twoM; ++r) {
        for (int c = 0; c < twoM; ++c) payload.put_f64(op.L(r, c));
    }
    payload.put_u64(op.gamma.size());
    for (const GammaTriplet& t : op.gamma) {
        payload.put_u32(t.m);
        payload.put_u32(t.n);
        payload.put_u32(t.p);
        payload.put_f64(t.value);
    }

    std::vector<std::uint8_t> hashed = header.bytes;
    hashed.insert(hashed.end(), payload.bytes.begin(), payload.bytes.end());
    const std::array<std::uint8_t, 32> digest = sha256_bytes(hashed.data(), hashed.size());
    if (digest_out != nullptr) *digest_out = digest;

    std::vector<std::uint8_t> image;
    image.reserve(header.bytes.size() + digest.size() + payload.bytes.size());
    image.insert(image.end(), header.bytes.begin(), header.bytes.end());
    image.insert(image.end(), digest.begin(), digest.end());
    image.insert(image.end(), payload.bytes.begin(), payload.bytes.end());
    return image;
}

Eigen::MatrixXd assembled_L(const HermiteBasis& basis, const KernelSpec& ks,
                            Eigen::MatrixXd* sym_out) {
    const Eigen::MatrixXd xi = invariant_columns(basis);
    const Eigen::MatrixXd Tflat = assemble_raw_tensor(basis, ks);
    ProjectedTensors proj = project_tensor(Tflat, xi, basis.size());
    if (sym_out != nullptr) *sym_out = std::move(proj.sym);
    return enforce_symmetry_and_kernel(two_species_L(proj.rec, basis.size()), xi);
}

}  // namespace

void KernelSpec::validate() const {
    if (!(gamma > -3.0)) throw std::invalid_argument("kernel: gamma must exceed -3");
    if (!(s > 0.0 && s < 1.0)) throw std::invalid_argument("kernel: s must lie in (0, 1)");
    if (!(C_phi > 0.0)) throw std::invalid_argument("kernel: C_phi must be positive");
    if (!(theta_min > 0.0 && theta_min < M_PI / 2.0)) {
        throw std::invalid_argument("kernel: theta_min must lie in (0, pi/2)");
    }
    if (quad_order < 0) throw std::invalid_argument("kernel: quad_order must be nonnegative");
    if (n_theta < 2) throw std::invalid_argument("kernel: n_theta must be at least 2");
    if (n_phi != 0 && (n_phi < 2 || n_phi % 2 != 0)) {
        throw std::invalid_argument("kernel: n_phi must be even and at least 2, or 0 for automatic");
    }
}

double angular_theta_mass(const KernelSpec& spec) {
    spec.validate();
    KernelSpec ks = spec;
    if (ks.n_phi == 0) ks.n_phi = 8;
    return build_angular(ks).theta_mass;
}

CollisionOperator bgk_operator(const HermiteBasis& basis, double relaxation_rate) {
    if (basis.degree_cap() < 2) {
        throw std::invalid_argument("bgk_operator: degree cap must be at least 2");
    }
    if (!(relaxation_rate > 0.0)) {
        throw std::invalid_argument("bgk_operator: relaxation rate must be positive");
    }
    const int M = basis.size();
    const Eigen::MatrixXd xi = invariant_columns(basis);
    const Eigen::MatrixXd Z = two_species_kernel_columns(xi);

    CollisionOperator op;
    op.backend = CollisionBackend::BGK;
    op.degree_cap = basis.degree_cap();
    op.modes = M;
    op.relaxation_rate = relaxation_rate;
    op.L = relaxation_rate *
           (Eigen::MatrixXd::Identity(2 * M, 2 * M) - Z * Z.transpose());

    std::ostringstream tag;
    tag << "bgk|" << op.degree_cap << "|" << M << "|" << format_g17(relaxation_rate);
    const std::string tag_str = tag.str();
    op.provenance = sha256_bytes(tag_str.data(), tag_str.size());
    return op;
}

CollisionOperator assemble_boltzmann(const HermiteBasis& basis, const KernelSpec& spec,
                                     const AssemblyOptions& opts) {
    spec.validate();
    if (basis.degree_cap() < 2) {
        throw std::invalid_argument("assemble_boltzmann: degree cap must be at least 2");
    }

    CollisionOperator op;
    op.backend = CollisionBackend::Boltzmann;
    op.degree_cap = basis.degree_cap();
    op.modes = basis.size();
    op.kernel = spec;
    if (op.kernel.n_phi == 0) op.kernel.n_phi = 2 * basis.degree_cap() + 2;

    Eigen::MatrixXd sym;
    op.L = assembled_L(basis, op.kernel, &sym);
    op.gamma = extract_triplets(sym, basis.size());

    if (opts.convergence_check) {
        KernelSpec fine = op.kernel;
        fine.n_theta += 8;
        fine.n_phi *= 2;
        fine.quad_order = (spec.quad_order == 0 ? basis.quad_order() : spec.quad_order) + 2;
        const Eigen::MatrixXd Lf = assembled_L(basis, fine, nullptr);
        const double scale = Lf.cwiseAbs().maxCoeff();
        const double diff = (op.L - Lf).cwiseAbs().maxCoeff();
        op.refinement_disagreement = scale > 0.0 ? diff / scale : 0.0;
        if (op.refinement_disagreement > opts.convergence_tol) {
            std::ostringstream msg;
            msg << "assemble_boltzmann: quadrature has not converged; coarse and refined "
                   "operators disagree by "
                << format_g17(op.refinement_disagreement) << " relative (norms "
                << format_g17(op.L.cwiseAbs().maxCoeff()) << " vs " << format_g17(scale)
                << ")";
            throw std::runtime_error(msg.str());
        }
    }

    serialize_operator(op, &op.provenance);
    return op;
}

TwoSpeciesDistribution apply_L(const CollisionOperator& op, const TwoSpeciesDistribution& f) {
    const int M = op.modes;
    if (f.modes() != M) throw std::invalid_argument("apply_L: mode count mismatch");
    const int nx = f.nx();
    Eigen::MatrixXd F(2 * M, nx);
    F.topRows(M) = f.plus;
    F.bottomRows(M) = f.minus;
    Eigen::MatrixXd O = op.L * F;
    TwoSpeciesDistribution out;
    out.plus = O.topRows(M);
    out.minus = O.bottomRows(M);
    return out;
}

TwoSpeciesDistribution apply_Gamma(const CollisionOperator& op, const TwoSpeciesDistribution& f,
                                   const TwoSpeciesDistribution& g) {
    if (op.backend != CollisionBackend::Boltzmann) {
        throw std::logic_error("apply_Gamma: the relaxation backend carries no bilinear form");
    }
    const int M = op.modes;
    if (f.modes() != M || g.modes() != M || f.nx() != g.nx()) {
        throw std::invalid_argument("apply_Gamma: operand shape mismatch");
    }
    const Eigen::MatrixXd w = f.plus + f.minus;
    TwoSpeciesDistribution out = TwoSpeciesDistribution::zero(M, f.nx());
    for (const GammaTriplet& t : op.gamma) {
        const auto wm = w.row(t.m).array();
        out.plus.row(t.p) += (t.value * wm * g.plus.row(t.n).array()).matrix();
        out.minus.row(t.p) += (t.value * wm * g.minus.row(t.n).array()).matrix();
    }
    return out;
}

TwoSpeciesDistribution apply_bgk_collision(const HermiteBasis& basis,
                                           const TwoSpeciesDistribution& f, double eps,
                                           double relaxation_rate) {
    if (!(eps > 0.0)) throw std::invalid_argument("apply_bgk_collision: eps must be positive");
    if (f.modes() != basis.size()) {
        throw std::invalid_argument("apply_bgk_collision: mode count mismatch");
    }
    const int M = basis.size();
    const int nx = f.nx();
    const int K = basis.degree_cap();
    const int e0 = basis.find(0, 0, 0);
    int ev[3], h2[3];
    for (int i = 0; i < 3; ++i) {
        int k[3] = {0, 0, 0};
        k[i] = 1;
        ev[i] = basis.find(k[0], k[1], k[2]);
        k[i] = 2;
        h2[i] = basis.find(k[0], k[1], k[2]);
    }

    std::vector<double> inv_sqrt_fact(K + 1);
    double fact = 1.0;
    for (int n = 0; n <= K; ++n) {
        if (n > 0) fact *= n;
        inv_sqrt_fact[n] = 1.0 / std::sqrt(fact);
    }

    // Nodal positivity of the reconstructed distributions F = mu (1 + eps P f).
    const Eigen::MatrixXd nodal_plus = basis.node_polys() * f.plus;
    const Eigen::MatrixXd nodal_minus = basis.node_polys() * f.minus;
    const double floor_plus = nodal_plus.minCoeff();
    const double floor_minus = nodal_minus.minCoeff();
    const double floor_all = std::min(floor_plus, floor_minus);
    if (1.0 + eps * floor_all <= 0.0) {
        std::ostringstream msg;
        msg << "relaxation state rejected: reconstructed distribution reaches "
            << format_g17(1.0 + eps * floor_all) << " at a quadrature node";
        throw StepRejected(msg.str());
    }

    TwoSpeciesDistribution out = TwoSpeciesDistribution::zero(M, nx);
    const double sqrt2 = std::sqrt(2.0);
    Eigen::MatrixXd he_mom(3, K + 1);
    Eigen::VectorXd coeff(M);

    for (int c = 0; c < nx; ++c) {
        const double a_p = f.plus(e0, c);
        const double a_m = f.minus(e0, c);
        const double rho_p = 1.0 + eps * a_p;
        const double rho_m = 1.0 + eps * a_m;
        if (rho_p <= 0.0 || rho_m <= 0.0) {
            std::ostringstream msg;
            msg << "relaxation state rejected: species density " << format_g17(rho_p) << " / "
                << format_g17(rho_m) << " at column " << c;
            throw StepRejected(msg.str());
        }
        const double rho_tot = rho_p + rho_m;
        Eigen::Vector3d u;
        for (int i = 0; i < 3; ++i) {
            u[i] = eps * (f.plus(ev[i], c) + f.minus(ev[i], c)) / rho_tot;
        }
        double energy_pert = 3.0 * (a_p + a_m);
        for (int i = 0; i < 3; ++i) {
            energy_pert += sqrt2 * (f.plus(h2[i], c) + f.minus(h2[i], c));
        }
        const double energy_tot = 6.0 + eps * energy_pert;
        const double T = (energy_tot - rho_tot * u.squaredNorm()) / (3.0 * rho_tot);
        if (T <= 0.0) {
            std::ostringstream msg;
            msg << "relaxation state rejected: temperature " << format_g17(T) << " at column "
                << c;
            throw StepRejected(msg.str());
        }

        for (int i = 0; i < 3; ++i) {
            he_mom(i, 0) = 1.0;
            if (K >= 1) he_mom(i, 1) = u[i];
            for (int n = 2; n <= K; ++n) {
                he_mom(i, n) = u[i] * he_mom(i, n - 1) + (T - 1.0) * (n - 1) * he_mom(i, n - 2);
            }
        }
        for (int m = 0; m < M; ++m) {
            const MultiIndex& k = basis.index(m);
            coeff[m] = he_mom(0, k.k1) * inv_sqrt_fact[k.k1] * he_mom(1, k.k2) *
                       inv_sqrt_fact[k.k2] * he_mom(2, k.k3) * inv_sqrt_fact[k.k3];
        }
        Eigen::VectorXd target_p = rho_p * coeff;
        Eigen::VectorXd target_m = rho_m * coeff;
        target_p[e0] -= 1.0;
        target_m[e0] -= 1.0;
        out.plus.col(c) = relaxation_rate * (target_p / eps - f.plus.col(c));
        out.minus.col(c) = relaxation_rate * (target_m / eps - f.minus.col(c));
    }
    return out;
}

namespace {

struct PinvSolver {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;
    const Eigen::MatrixXd* mat;
    double null_cut;

    PinvSolver(const Eigen::MatrixXd& A, const char* label) : eig(A), mat(&A) {
        if (eig.info() != Eigen::Success) {
            throw std::runtime_error(std::string("transport_coefficients: eigensolve failed for ") +
                                     label);
        }
        null_cut = 1e-8 * eig.eigenvalues().cwiseAbs().maxCoeff();
    }

    Eigen::VectorXd solve(const Eigen::VectorXd& rhs, const char* label) const {
        Eigen::VectorXd y = eig.eigenvectors().transpose() * rhs;
        for (int i = 0; i < y.size(); ++i) {
            const double lam = eig.eigenvalues()[i];
            y[i] = std::abs(lam) > null_cut ? y[i] / lam : 0.0;
        }
        Eigen::VectorXd x = eig.eigenvectors() * y;
        const double resid = (*mat * x - rhs).norm();
        if (resid > 1e-10 * std::max(1.0, rhs.norm())) {
            std::ostringstream msg;
            msg << "transport_coefficients: restricted solve for " << label
                << " left residual " << format_g17(resid)
                << "; the field is not in the operator range";
            throw std::runtime_error(msg.str());
        }
        return x;
    }
};

}  // namespace

TransportCoefficients transport_coefficients(const CollisionOperator& op,
                                             const MomentEngine& eng) {
    const int M = op.modes;
    if (eng.basis().size() != M) {
        throw std::invalid_argument("transport_coefficients: basis mismatch");
    }
    const Eigen::MatrixXd La = op.L.topLeftCorner(M, M);
    const Eigen::MatrixXd Lb = op.L.topRightCorner(M, M);
    const Eigen::MatrixXd Sg = La + Lb;
    const Eigen::MatrixXd Sp = La - Lb;
    const Eigen::MatrixXd Cclo =
        op.backend == CollisionBackend::BGK ? Sg : Eigen::MatrixXd(0.5 * Sg);

    PinvSolver closure(Cclo, "the closure operator");
    PinvSolver summed(Sg, "the species-summed operator");
    PinvSolver diff(Sp, "the species-difference operator");

    TransportCoefficients tc;
    const std::array<std::pair<int, int>, 5> pairs = {
        {{0, 0}, {1, 1}, {0, 1}, {0, 2}, {1, 2}}};

    auto nine_sum = [&](const std::array<Eigen::VectorXd, 5>& hats,
                        auto rhs_of) {
        const double d00 = hats[0].dot(rhs_of(0, 0));
        const double d11 = hats[1].dot(rhs_of(1, 1));
        const double d22 = (hats[0] + hats[1]).dot(rhs_of(0, 0) + rhs_of(1, 1));
        const double off = hats[2].dot(rhs_of(0, 1)) + hats[3].dot(rhs_of(0, 2)) +
                           hats[4].dot(rhs_of(1, 2));
        return d00 + d11 + d22 + 2.0 * off;
    };
    auto a_rhs = [&](int i, int j) { return eng.a_vec(i, j); };

    for (std::size_t k = 0; k < pairs.size(); ++k) {
        tc.hat_A[k] = closure.solve(eng.a_vec(pairs[k].first, pairs[k].second),
                                    "a shear stress field");
    }
    for (int i = 0; i < 3; ++i) {
        tc.hat_B[i] = closure.solve(eng.b_vec(i), "a heat flux field");
    }
    tc.nu = nine_sum(tc.hat_A, a_rhs) / 20.0;
    double bsum = 0.0;
    for (int i = 0; i < 3; ++i) bsum += tc.hat_B[i].dot(eng.b_vec(i));
    tc.kappa = bsum / 15.0;

    const HermiteBasis& basis = eng.basis();
    double iso[3];
    for (int i = 0; i < 3; ++i) {
        tc.tilde_Phi[i] = diff.solve(basis.vec_v(i), "a momentum field");
        iso[i] = tc.tilde_Phi[i].dot(basis.vec_v(i));
    }
    const double iso_mean = (iso[0] + iso[1] + iso[2]) / 3.0;
    for (int i = 0; i < 3; ++i) {
        if (std::abs(iso[i] - iso_mean) > 1e-8 * std::max(1.0, std::abs(iso_mean))) {
            throw std::runtime_error(
                "transport_coefficients: conductivity solve lost rotational symmetry");
        }
    }
    tc.sigma = 2.0 * iso_mean;  // (2/3) times the three-component sum
    tc.tilde_Psi =
        diff.solve(0.5 * (basis.vec_vsq() - 3.0 * basis.vec_one()), "a thermal field");

    std::array<Eigen::VectorXd, 5> hats_g;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        hats_g[k] = summed.solve(eng.a_vec(pairs[k].first, pairs[k].second),
                                 "a shear stress field");
    }
    tc.nu_macro = nine_sum(hats_g, a_rhs) / 10.0;
    double bsum_g = 0.0;
    for (int i = 0; i < 3; ++i) {
        bsum_g += summed.solve(eng.b_vec(i), "a heat flux field").dot(eng.b_vec(i));
    }
    tc.kappa_macro = 2.0 * bsum_g / 15.0;
    tc.sigma_macro = tc.sigma;
    return tc;
}

void cache_store(const CollisionOperator& op, const std::string& path) {
    if (op.backend != CollisionBackend::Boltzmann) {
        throw std::invalid_argument("cache_store: only assembled operators are cached");
    }
    write_file_bytes(path, serialize_operator(op, nullptr));
}

CollisionOperator cache_load(const HermiteBasis& basis, const std::string& path) {
    const std::vector<std::uint8_t> bytes = read_file_bytes(path);
    const std::size_t header_len = 4 + 4 + 4 + 4 + 4 + 4 * 8;
    if (bytes.size() < header_len + 32) {
        throw std::runtime_error("collision cache: truncated file " + path);
    }
    ByteSource src(bytes);
    char magic[4];
    src.take_raw(magic, 4);
    if (std::memcmp(magic, kCacheMagic, 4) != 0) {
        throw std::runtime_error("collision cache: bad magic in " + path);
    }
    const std::uint32_t version = src.take_u32();
    if (version != kCacheVersion) {
        throw std::runtime_error("collision cache: unsupported version " +
                                 std::to_string(version));
    }
    const std::uint32_t K = src.take_u32();
    const std::uint32_t M = src.take_u32();
    const std::uint32_t x_independent = src.take_u32();
    KernelSpec ks;
    ks.gamma = src.take_f64();
    ks.s = src.take_f64();
    ks.C_phi = src.take_f64();
    ks.theta_min = src.take_f64();
    std::array<std::uint8_t, 32> stored{};
    src.take_raw(stored.data(), stored.size());

    const std::size_t payload_off = src.pos;
    std::vector<std::uint8_t> hashed(bytes.begin(), bytes.begin() + header_len);
    hashed.insert(hashed.end(), bytes.begin() + payload_off, bytes.end());
    const std::array<std::uint8_t, 32> digest = sha256_bytes(hashed.data(), hashed.size());
    if (digest != stored) {
        throw std::runtime_error("collision cache: integrity digest mismatch in " + path);
    }

    if (x_independent != 1) {
        throw std::runtime_error("collision cache: unsupported layout flag");
    }
    if (static_cast<int>(K) != basis.degree_cap() || static_cast<int>(M) != basis.size()) {
        std::ostringstream msg;
        msg << "collision cache: basis mismatch (file has degree " << K << ", " << M
            << " modes; basis has degree " << basis.degree_cap() << ", " << basis.size()
            << " modes)";
        throw std::runtime_error(msg.str());
    }

    CollisionOperator op;
    op.backend = CollisionBackend::Boltzmann;
    op.degree_cap = static_cast<int>(K);
    op.modes = static_cast<int>(M);
    op.kernel = ks;
    op.provenance = stored;

    const int twoM = 2 * op.modes;
    op.L.resize(twoM, twoM);
    for (int r = 0; r < twoM; ++r) {
        for (int c = 0; c < twoM; ++c) op.L(r, c) = src.take_f64();
    }
    const std::uint64_t count = src.take_u64();
    if (src.remaining() != count * 20) {
        throw std::runtime_error("collision cache: corrupt triplet section in " + path);
    }
    op.gamma.resize(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        GammaTriplet& t = op.gamma[i];
        t.m = src.take_u32();
        t.n = src.take_u32();
        t.p = src.take_u32();
        t.value = src.take_f64();
        if (t.m >= M || t.n >= M || t.p >= M) {
            throw std::runtime_error("collision cache: corrupt triplet section in " + path);
        }
    }
    return op;
}

}  // namespace vpb
