#include "hartree/profiles.hpp"

#include <Eigen/SparseLU>

#include <cmath>
#include <functional>
#include <sstream>

namespace hartree {

namespace {

int pow3(int ell) {
    int p = 1;
    for (int i = 0; i < ell; ++i) p *= 3;
    return p;
}

int parity_of(int ell) { return ell % 2 == 0 ? 1 : -1; }

// Legendre P_l(a . n) written as a symmetric traceless tensor contracted with n^l.
std::vector<double> legendre_tensor(int l, const Vec3& a) {
    std::vector<double> t(pow3(l), 0.0);
    auto d = [](int i, int j) { return i == j ? 1.0 : 0.0; };
    switch (l) {
    case 0: t[0] = 1; break;
    case 1:
        for (int i = 0; i < 3; ++i) t[i] = a[i];
        break;
    case 2:
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) t[3 * i + j] = 0.5 * (3 * a[i] * a[j] - d(i, j));
        break;
    case 3:
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                for (int k = 0; k < 3; ++k)
                    t[9 * i + 3 * j + k] =
                        0.5 * (5 * a[i] * a[j] * a[k] - (a[i] * d(j, k) + a[j] * d(i, k) + a[k] * d(i, j)));
        break;
    default: throw ProfileError("unsupported Legendre degree " + std::to_string(l));
    }
    return t;
}

Vec radial_power(const RadialGrid& g, int p) {
    Vec v(g.size());
    for (int i = 0; i < g.size(); ++i) v[i] = std::pow(g.r[i], p);
    return v;
}

Vec quadrature_weights(const RadialGrid& g) {
    Vec w = g.cell_even.transpose() * Vec::Ones(g.cell_even.rows());
    for (int i = 0; i < g.size(); ++i) w[i] *= 4.0 * M_PI * g.r[i] * g.r[i];
    return w;
}

double far_decay(const GroundState& gs) {
    const RadialGrid& g = gs.grid;
    const double rm = g.r_max;
    double v = 1.0 + gs.phi[g.size() - 1];
    double dv = gs.mass_sq / (4.0 * M_PI * rm * rm);
    return std::sqrt(v) + dv / (4.0 * v) + 1.0 / rm;
}

Vec potential(const Vec& rho, int ell, const GroundState& gs) { return newtonian_potential_radial(rho, ell, gs.grid); }

// Shared sparse solver for the radial L+ / L- problems with an optional kernel border.
Vec solve_radial(const Vec& f, int ell, const GroundState& gs, bool plus, double tol) {
    if (ell < 0 || ell > kMaxSolveDegree) throw ProfileError("unsupported harmonic degree " + std::to_string(ell));
    const RadialGrid& g = gs.grid;
    const int n = g.size();
    if (f.size() != n) throw ProfileError("profile size does not match the grid");
    const int parity = parity_of(ell);

    const Vec* kernel = nullptr;
    if (plus && ell == 1) kernel = &gs.dq;
    if (!plus && ell == 0) kernel = &gs.q;
    const Vec w = quadrature_weights(g);

    if (kernel) {
        double fk = (w.array() * f.array() * kernel->array()).sum();
        double ff = std::sqrt((w.array() * f.array().square()).sum());
        double kk = std::sqrt((w.array() * kernel->array().square()).sum());
        double overlap = ff > 0 ? fk / (ff * kk) : 0.0;
        if (std::abs(overlap) > tol) {
            std::ostringstream msg;
            msg << "right-hand side not orthogonal to the kernel (relative overlap " << overlap << ")";
            throw OrthogonalityError(msg.str(), overlap);
        }
    }

    const int nu = plus ? 2 * n : n;
    const int ntot = nu + (kernel ? 1 : 0);
    SpMat lap = radial_laplacian(g, ell);
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(30 * ntot);
    Vec rhs = Vec::Zero(ntot);

    for (int k = 0; k < lap.outerSize(); ++k)
        for (SpMat::InnerIterator e(lap, k); e; ++e) {
            if (e.row() == n - 1 || (ell > 0 && e.row() == 0)) continue;
            t.emplace_back(e.row(), e.col(), -e.value());
            if (plus) t.emplace_back(n + e.row(), n + e.col(), e.value());
        }
    const int first = ell > 0 ? 1 : 0;
    for (int i = first; i < n - 1; ++i) {
        t.emplace_back(i, i, 1.0 + gs.phi[i]);
        rhs[i] = f[i];
        if (plus) {
            t.emplace_back(i, n + i, 2.0 * gs.q[i]);
            t.emplace_back(n + i, i, -gs.q[i]);
        }
        if (kernel) t.emplace_back(i, nu, (*kernel)[i]);
    }
    if (ell > 0) {
        t.emplace_back(0, 0, 1.0);
        if (plus) t.emplace_back(n, n, 1.0);
    }
    for (auto& [c, v] : robin_row(g, parity, far_decay(gs))) t.emplace_back(n - 1, c, v);
    if (plus)
        for (auto& [c, v] : robin_row(g, parity, (ell + 1.0) / g.r_max)) t.emplace_back(2 * n - 1, n + c, v);
    if (kernel)
        for (int i = 0; i < n; ++i) t.emplace_back(nu, i, w[i] * (*kernel)[i]);

    SpMat a(ntot, ntot);
    a.setFromTriplets(t.begin(), t.end());
    Eigen::SparseLU<SpMat> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success) throw ProfileError("singular linearized-operator matrix");
    Vec x = lu.solve(rhs);
    return x.head(n);
}

Vec times_r_derivative(const Vec& f, const RadialGrid& g) {
    RadialDiff d = radial_diff(g, 1);
    Vec df = d.d1 * f;
    Vec out(g.size());
    for (int i = 0; i < g.size(); ++i) out[i] = g.r[i] * df[i];
    out[0] = 0;
    return out;
}

Vec lambda_op(const Vec& f, const RadialGrid& g) { return 2.0 * f + times_r_derivative(f, g); }

}  // namespace

double multipole_F(int n, const Vec3& alpha, const Vec3& zeta) {
    const double a = alpha.norm();
    if (!(a > 0)) throw ProfileError("multipole expansion needs alpha != 0");
    const double ad = alpha.dot(zeta), z2 = zeta.squaredNorm(), a2 = a * a;
    switch (n) {
    case 1: return 1.0 / a;
    case 2: return ad / (a2 * a);
    case 3: return (3 * ad * ad - a2 * z2) / (2 * a2 * a2 * a);
    case 4: return (5 * ad * ad * ad - 3 * ad * a2 * z2) / (2 * a2 * a2 * a2 * a);
    default: throw ProfileError("unsupported multipole order " + std::to_string(n));
    }
}

double Harmonic::angular(const Vec3& u) const {
    switch (ell) {
    case 0: return tensor[0];
    case 1: return tensor[0] * u[0] + tensor[1] * u[1] + tensor[2] * u[2];
    default: {
        double s = 0;
        const int nt = pow3(ell);
        for (int idx = 0; idx < nt; ++idx) {
            double p = tensor[idx];
            int r = idx;
            for (int k = 0; k < ell; ++k) {
                p *= u[r % 3];
                r /= 3;
            }
            s += p;
        }
        return s;
    }
    }
}

std::vector<double> scalar_tensor(double s) { return {s}; }
std::vector<double> vector_tensor(const Vec3& v) { return {v[0], v[1], v[2]}; }
std::vector<double> matrix_tensor(const Eigen::Matrix3d& a) {
    Eigen::Matrix3d s = 0.5 * (a + a.transpose());
    s -= s.trace() / 3.0 * Eigen::Matrix3d::Identity();
    std::vector<double> t(9);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) t[3 * i + j] = s(i, j);
    return t;
}

double HarmonicProfile::value(const GroundState& gs, const Vec3& y) const {
    const double r = y.norm();
    if (r > gs.grid.r_max) return 0.0;
    Vec3 u = r > 0 ? Vec3(y / r) : Vec3(0, 0, 1);
    double s = 0;
    for (const auto& h : terms) {
        if (h.ell > 0 && r == 0) continue;
        RadialSpline sp(gs.grid, h.radial, parity_of(h.ell));
        s += sp(r) * h.angular(u);
    }
    return s;
}

HarmonicProfile HarmonicProfile::degree(int ell) const {
    HarmonicProfile out;
    for (const auto& h : terms)
        if (h.ell == ell) out.add(h);
    return out;
}

HarmonicProfile& HarmonicProfile::add(const Harmonic& h) {
    for (auto& t : terms)
        if (t.ell == h.ell && t.tensor == h.tensor && t.radial.size() == h.radial.size()) {
            t.radial += h.radial;
            return *this;
        }
    terms.push_back(h);
    return *this;
}

HarmonicProfile HarmonicProfile::scaled(double s) const {
    HarmonicProfile out = *this;
    for (auto& t : out.terms) t.radial *= s;
    return out;
}

HarmonicProfile psi_n(int n, int j, int k, const Params& P, const GroundState& gs) {
    if (n < 1 || n > 4) throw ProfileError("unsupported multipole order " + std::to_string(n));
    if (j == k) throw ProfileError("psi_n needs two distinct solitons");
    const Vec3 a = P.alpha[j] - P.alpha[k];
    const double d = a.norm();
    if (!(d > 0)) throw ProfileError("colliding solitons");
    const double lj = P.lambda[j], lk = P.lambda[k];
    // Q^2 is radial and F_n is harmonic in zeta, so the xi-integral collapses onto F_n(alpha, -lambda_j y).
    const double coef = -lj * lj * gs.mass_sq / (4.0 * M_PI * lk) * std::pow(-lj, n - 1) / std::pow(d, n);
    Harmonic h;
    h.ell = n - 1;
    h.tensor = legendre_tensor(n - 1, a / d);
    for (double& x : h.tensor) x *= coef;
    h.radial = radial_power(gs.grid, n - 1);
    HarmonicProfile out;
    out.terms.push_back(h);
    return out;
}

Vec apply_Lminus_radial(const Vec& f, int ell, const GroundState& gs) {
    SpMat lap = radial_laplacian(gs.grid, ell);
    Vec out = -(lap * f) + f + gs.phi.cwiseProduct(f);
    if (ell > 0) out[0] = f[0];
    return out;
}

Vec apply_Lplus_radial(const Vec& f, int ell, const GroundState& gs) {
    Vec out = apply_Lminus_radial(f, ell, gs);
    Vec pot = potential(gs.q.cwiseProduct(f), ell, gs);
    out += 2.0 * pot.cwiseProduct(gs.q);
    if (ell > 0) out[0] = f[0];
    return out;
}

namespace {

HarmonicProfile termwise(const HarmonicProfile& f, const std::function<Vec(const Vec&, int)>& op) {
    HarmonicProfile out;
    for (const auto& h : f.terms) {
        Harmonic r = h;
        r.radial = op(h.radial, h.ell);
        out.terms.push_back(r);
    }
    return out;
}

}  // namespace

HarmonicProfile apply_Lplus(const HarmonicProfile& f, const GroundState& gs) {
    return termwise(f, [&](const Vec& v, int ell) { return apply_Lplus_radial(v, ell, gs); });
}

HarmonicProfile apply_Lminus(const HarmonicProfile& f, const GroundState& gs) {
    return termwise(f, [&](const Vec& v, int ell) { return apply_Lminus_radial(v, ell, gs); });
}

Vec solve_Lplus_radial(const Vec& f, int ell, const GroundState& gs, double tol) {
    return solve_radial(f, ell, gs, true, tol);
}

Vec solve_Lminus_radial(const Vec& f, int ell, const GroundState& gs, double tol) {
    return solve_radial(f, ell, gs, false, tol);
}

HarmonicProfile solve_Lplus(const HarmonicProfile& f, const GroundState& gs, double tol) {
    return termwise(f, [&](const Vec& v, int ell) { return solve_radial(v, ell, gs, true, tol); });
}

HarmonicProfile solve_Lminus(const HarmonicProfile& f, const GroundState& gs, double tol) {
    return termwise(f, [&](const Vec& v, int ell) { return solve_radial(v, ell, gs, false, tol); });
}

// ---------------------------------------------------------------------------

Coefficients::Coefficients(int order, const ProfileConstants& k) : order_(order), k_(k) {
    if (order < 0 || order > kMaxProfileOrder)
        throw ProfileError("order N <= " + std::to_string(kMaxProfileOrder) + " supported");
}

std::vector<double> Coefficients::c(const Params& P) const {
    const int m = P.m();
    std::vector<double> out(m, 0.0);
    for (int j = 0; j < m; ++j)
        for (int k = 0; k < m; ++k)
            if (k != j) {
                double r = (P.alpha[j] - P.alpha[k]).norm();
                out[j] -= P.lambda[j] * P.lambda[j] * k_.mass_sq / (8.0 * M_PI * P.lambda[k] * r);
            }
    return out;
}

std::vector<double> Coefficients::e(const Params& P) const {
    const int m = P.m();
    auto cc = c(P);
    std::vector<double> out(m, 0.0);
    for (int j = 0; j < m; ++j)
        for (int k = 0; k < m; ++k)
            if (k != j) {
                double r = (P.alpha[j] - P.alpha[k]).norm();
                out[j] += P.lambda[j] * P.lambda[j] * cc[k] * k_.mass_sq / (4.0 * M_PI * P.lambda[k] * r);
            }
    return out;
}

std::vector<double> Coefficients::h(const Params& P) const {
    const int m = P.m();
    auto cc = c(P);
    auto ee = e(P);
    std::vector<double> out(m, 0.0);
    for (int j = 0; j < m; ++j)
        for (int k = 0; k < m; ++k)
            if (k != j) {
                double r = (P.alpha[j] - P.alpha[k]).norm();
                double n2 = cc[k] * cc[k] * (k_.lq_norm_sq + 2.0 * k_.tau_q) - 0.5 * ee[k] * k_.mass_sq;
                out[j] += P.lambda[j] * P.lambda[j] * n2 / (4.0 * M_PI * P.lambda[k] * r);
            }
    return out;
}

std::vector<double> Coefficients::dc_alpha(const Params& P) const {
    const int m = P.m();
    std::vector<double> out(m, 0.0);
    for (int j = 0; j < m; ++j)
        for (int k = 0; k < m; ++k)
            if (k != j) {
                Vec3 a = P.alpha[j] - P.alpha[k];
                Vec3 b = P.beta[j] - P.beta[k];
                double r = a.norm();
                out[j] += P.lambda[j] * P.lambda[j] * k_.mass_sq * a.dot(b) / (4.0 * M_PI * P.lambda[k] * r * r * r);
            }
    return out;
}

std::vector<double> Coefficients::dc_lambda(const Params& P) const {
    const int m = P.m();
    auto cc = c(P);
    auto mm = m2(P);
    std::vector<double> out(m, 0.0);
    for (int j = 0; j < m; ++j) {
        out[j] = 2.0 * cc[j] * mm[j] / P.lambda[j];
        for (int k = 0; k < m; ++k)
            if (k != j) {
                double r = (P.alpha[j] - P.alpha[k]).norm();
                out[j] += P.lambda[j] * P.lambda[j] * k_.mass_sq * mm[k] / (8.0 * M_PI * P.lambda[k] * P.lambda[k] * r);
            }
    }
    return out;
}

std::vector<double> Coefficients::de_alpha(const Params& P) const {
    const int m = P.m();
    auto cc = c(P);
    auto dc = dc_alpha(P);
    std::vector<double> out(m, 0.0);
    for (int j = 0; j < m; ++j)
        for (int k = 0; k < m; ++k)
            if (k != j) {
                Vec3 a = P.alpha[j] - P.alpha[k];
                Vec3 b = P.beta[j] - P.beta[k];
                double r = a.norm();
                double pre = P.lambda[j] * P.lambda[j] * k_.mass_sq / (4.0 * M_PI * P.lambda[k]);
                out[j] += pre * (dc[k] / r - 2.0 * cc[k] * a.dot(b) / (r * r * r));
            }
    return out;
}

std::vector<Eigen::Matrix3d> Coefficients::quadrupole(const Params& P) const {
    const int m = P.m();
    std::vector<Eigen::Matrix3d> out(m, Eigen::Matrix3d::Zero());
    for (int j = 0; j < m; ++j)
        for (int k = 0; k < m; ++k)
            if (k != j) {
                Vec3 a = P.alpha[j] - P.alpha[k];
                double r = a.norm(), r2 = r * r;
                double l2 = P.lambda[j] * P.lambda[j];
                double pre = -l2 * l2 * k_.mass_sq / (8.0 * M_PI * P.lambda[k] * r2 * r2 * r);
                out[j] += pre * (3.0 * a * a.transpose() - r2 * Eigen::Matrix3d::Identity());
            }
    return out;
}

std::vector<Vec3> Coefficients::b2(const Params& P) const {
    const int m = P.m();
    std::vector<Vec3> out(m, Vec3::Zero());
    for (int j = 0; j < m; ++j)
        for (int k = 0; k < m; ++k)
            if (k != j) {
                Vec3 a = P.alpha[j] - P.alpha[k];
                double r = a.norm();
                out[j] -= k_.mass_sq * a / (4.0 * M_PI * P.lambda[k] * r * r * r);
            }
    return out;
}

std::vector<Vec3> Coefficients::b3(const Params& P) const {
    const int m = P.m();
    auto cc = c(P);
    std::vector<Vec3> out(m, Vec3::Zero());
    for (int j = 0; j < m; ++j)
        for (int k = 0; k < m; ++k)
            if (k != j) {
                Vec3 a = P.alpha[j] - P.alpha[k];
                double r = a.norm();
                out[j] -= cc[k] * k_.mass_sq * a / (4.0 * M_PI * P.lambda[k] * r * r * r);
            }
    return out;
}

std::vector<double> Coefficients::m2(const Params& P) const {
    auto dc = dc_alpha(P);
    for (int j = 0; j < P.m(); ++j) dc[j] *= P.lambda[j];
    return dc;
}

std::vector<double> Coefficients::m3(const Params& P) const {
    const int m = P.m();
    auto cc = c(P);
    auto dca = dc_alpha(P);
    auto dcl = dc_lambda(P);
    auto dea = de_alpha(P);
    std::vector<double> out(m);
    for (int j = 0; j < m; ++j)
        out[j] = P.lambda[j] * (2.0 * cc[j] * dca[j] * k_.kappa1 / k_.mass_sq + dcl[j] - 0.5 * dea[j]);
    return out;
}

std::vector<Vec3> Coefficients::B(const Params& P) const {
    std::vector<Vec3> out(P.m(), Vec3::Zero());
    if (order_ >= 2) {
        auto b = b2(P);
        for (int j = 0; j < P.m(); ++j) out[j] += b[j];
    }
    if (order_ >= 3) {
        auto b = b3(P);
        for (int j = 0; j < P.m(); ++j) out[j] += b[j];
    }
    return out;
}

std::vector<double> Coefficients::M(const Params& P) const {
    std::vector<double> out(P.m(), 0.0);
    if (order_ >= 2) {
        auto v = m2(P);
        for (int j = 0; j < P.m(); ++j) out[j] += v[j];
    }
    if (order_ >= 3) {
        auto v = m3(P);
        for (int j = 0; j < P.m(); ++j) out[j] += v[j];
    }
    return out;
}

// ---------------------------------------------------------------------------

RadialBasis build_radial_basis(const GroundState& gs, int order) {
    const RadialGrid& g = gs.grid;
    const Vec& q = gs.q;
    RadialBasis b;
    b.lq = gs.lambda_q;
    b.llq = lambda_op(b.lq, g);
    const int n = g.size();
    b.tau = b.x_ccc = b.x_cs = b.x_ce = b.x_h = b.u2 = b.w1 = Vec::Zero(n);
    if (order < 2) return b;

    const Vec lq = b.lq;
    const Vec p_qlq = potential(q.cwiseProduct(lq), 0, gs);
    const Vec p_lq2 = potential(lq.cwiseAbs2(), 0, gs);
    b.tau = solve_Lplus_radial(-2.0 * p_qlq.cwiseProduct(lq) - p_lq2.cwiseProduct(q) - 2.0 * lq, 0, gs);
    if (order < 3) return b;

    const Vec& tau = b.tau;
    const Vec p_qtau = potential(q.cwiseProduct(tau), 0, gs);
    const Vec p_lqtau = potential(lq.cwiseProduct(tau), 0, gs);
    Vec fa = -(2.0 * p_qlq.cwiseProduct(tau) + p_lq2.cwiseProduct(lq) + 2.0 * p_qtau.cwiseProduct(lq) +
               2.0 * p_lqtau.cwiseProduct(q));
    Vec fb = -(4.0 * p_qlq.cwiseProduct(lq) + 2.0 * p_lq2.cwiseProduct(q));
    b.x_ccc = solve_Lplus_radial(fa - 2.0 * tau, 0, gs);
    b.x_cs = solve_Lplus_radial(fb, 0, gs);
    b.x_ce = solve_Lplus_radial(lq, 0, gs);
    b.x_h = solve_Lplus_radial(q, 0, gs);
    Vec r2q(n);
    for (int i = 0; i < n; ++i) r2q[i] = -g.r[i] * g.r[i] * q[i];
    b.u2 = solve_Lplus_radial(r2q, 2, gs);

    Vec g1 = 2.0 * tau - b.llq;
    double k1 = dot_r2(g, g1, q);
    b.w1 = solve_Lminus_radial(g1 - (k1 / (0.5 * gs.mass_sq)) * lq, 0, gs);
    return b;
}

ProfileConstants profile_constants(const GroundState& gs, const RadialBasis& b) {
    ProfileConstants k;
    k.mass_sq = gs.mass_sq;
    k.lq_norm_sq = dot_r2(gs.grid, b.lq, b.lq);
    k.tau_q = dot_r2(gs.grid, b.tau, gs.q);
    k.kappa1 = dot_r2(gs.grid, 2.0 * b.tau - b.llq, gs.q);
    return k;
}

ProfileSet::ProfileSet(int order, std::shared_ptr<const GroundState> gs) : order_(order), gs_(std::move(gs)) {
    if (order < 0 || order > kMaxProfileOrder)
        throw ProfileError("order N <= " + std::to_string(kMaxProfileOrder) + " supported");
    if (!gs_) throw ProfileError("missing ground state");
    basis_ = build_radial_basis(*gs_, order);
    coeffs_ = Coefficients(order, profile_constants(*gs_, basis_));

    const RadialGrid& g = gs_->grid;
    Vec g2 = basis_.u2;
    RadialDiff d = radial_diff(g, 1);
    Vec d2 = d.d2 * basis_.u2;
    for (int i = 1; i < g.size(); ++i) g2[i] = basis_.u2[i] / (g.r[i] * g.r[i]);
    g2[0] = 0.5 * d2[0];
    const std::initializer_list<const Vec*> arrays = {&gs_->q,       &basis_.lq,   &basis_.tau,
                                                      &basis_.x_ccc, &basis_.x_cs, &basis_.x_ce,
                                                      &basis_.x_h,   &g2,          &basis_.w1};
    for (const Vec* v : arrays) spl_.emplace_back(g, *v, 1);
}

std::vector<ProfileCoefficients> ProfileSet::at(const Params& P) const {
    const int m = P.m();
    std::vector<ProfileCoefficients> out(m);
    if (order_ == 0) return out;
    auto cc = coeffs_.c(P);
    std::vector<double> ee(m, 0.0);
    if (order_ >= 2) ee = coeffs_.e(P);
    for (int j = 0; j < m; ++j) {
        auto& pc = out[j];
        pc.lq = cc[j];
        if (order_ >= 2) {
            pc.tau = cc[j] * cc[j];
            pc.lq -= 0.5 * ee[j];
        }
    }
    if (order_ >= 3) {
        auto hh = coeffs_.h(P);
        auto quad = coeffs_.quadrupole(P);
        auto dca = coeffs_.dc_alpha(P);
        for (int j = 0; j < m; ++j) {
            auto& pc = out[j];
            const double c = cc[j], s = -0.5 * ee[j];
            pc.x_ccc = c * c * c;
            pc.x_cs = c * s;
            pc.x_ce = 2.0 * c * ee[j];
            pc.x_h = hh[j];
            pc.quad = quad[j];
            pc.w1 = P.lambda[j] * P.lambda[j] * c * dca[j];
        }
    }
    return out;
}

HarmonicProfile ProfileSet::correction(int n, int j, const Params& P) const {
    if (n < 1 || n > order_) throw ProfileError("correction order out of range");
    auto cc = coeffs_.c(P);
    HarmonicProfile out;
    Harmonic h;
    h.ell = 0;
    h.tensor = scalar_tensor(1.0);
    if (n == 1) {
        h.radial = cc[j] * basis_.lq;
    } else if (n == 2) {
        auto ee = coeffs_.e(P);
        h.radial = cc[j] * cc[j] * basis_.tau - 0.5 * ee[j] * basis_.lq;
    } else {
        auto pc = at(P)[j];
        h.radial = pc.x_ccc * basis_.x_ccc + pc.x_cs * basis_.x_cs + pc.x_ce * basis_.x_ce + pc.x_h * basis_.x_h;
        Harmonic q2;
        q2.ell = 2;
        q2.tensor = matrix_tensor(pc.quad);
        q2.radial = basis_.u2;
        out.terms.push_back(h);
        out.terms.push_back(q2);
        return out;
    }
    out.terms.push_back(h);
    return out;
}

HarmonicProfile ProfileSet::real_part(int j, const Params& P) const {
    HarmonicProfile out;
    Harmonic q;
    q.ell = 0;
    q.tensor = scalar_tensor(1.0);
    q.radial = gs_->q;
    out.add(q);
    for (int n = 1; n <= order_; ++n)
        for (const auto& h : correction(n, j, P).terms) out.add(h);
    return out;
}

HarmonicProfile ProfileSet::imag_part(int j, const Params& P) const {
    HarmonicProfile out;
    if (order_ >= 3) {
        Harmonic h;
        h.ell = 0;
        h.tensor = scalar_tensor(1.0);
        h.radial = at(P)[j].w1 * basis_.w1;
        out.add(h);
    }
    return out;
}

Vec ProfileSet::radial_profile(const ProfileCoefficients& pc) const {
    if (order_ >= 3) throw ProfileError("order-3 profiles are not radial");
    return gs_->q * pc.q + basis_.lq * pc.lq + basis_.tau * pc.tau;
}

ProfileSet::Sample ProfileSet::sample(const ProfileCoefficients& pc, const Vec3& y) const {
    Sample s;
    const double r = y.norm();
    const GroundState& gs = *gs_;
    if (r > gs.grid.r_max) {
        double v = gs.value(r) * pc.q;
        s.v = v;
        s.grad = (-(gs.tail_kappa + 1.0 / r) * v / r * y).cast<std::complex<double>>();
        return s;
    }
    const Vec3 u = r > 0 ? Vec3(y / r) : Vec3::Zero();
    const double w[] = {pc.q, pc.lq, pc.tau, pc.x_ccc, pc.x_cs, pc.x_ce, pc.x_h};
    double f = 0, df = 0;
    const int nb = order_ >= 3 ? 7 : (order_ == 2 ? 3 : (order_ == 1 ? 2 : 1));
    for (int b = 0; b < nb; ++b) {
        if (w[b] == 0) continue;
        f += w[b] * spl_[b](r);
        df += w[b] * spl_[b].prime(r);
    }
    Vec3 grad = df * u;
    if (order_ >= 3) {
        const double g2 = spl_[7](r), dg2 = spl_[7].prime(r);
        const Vec3 ay = pc.quad * y;
        const double yay = y.dot(ay);
        f += g2 * yay;
        grad += dg2 * yay * u + 2.0 * g2 * ay;
        const double wi = pc.w1 * spl_[8](r), dwi = pc.w1 * spl_[8].prime(r);
        s.v = std::complex<double>(f, wi);
        s.grad = grad.cast<std::complex<double>>() + std::complex<double>(0, 1) * (dwi * u).cast<std::complex<double>>();
        return s;
    }
    s.v = f;
    s.grad = grad.cast<std::complex<double>>();
    return s;
}

ProfileSet build_profiles(int order, std::shared_ptr<const GroundState> gs) { return ProfileSet(order, std::move(gs)); }

}  // namespace hartree
