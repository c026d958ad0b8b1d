#include "hartree/ansatz.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hartree {

namespace {

constexpr cplx I{0.0, 1.0};

Params shifted(const Params& P, const Params& dP, double s) {
    Params Q = P;
    for (int j = 0; j < P.m(); ++j) {
        Q.alpha[j] += s * dP.alpha[j];
        Q.beta[j] += s * dP.beta[j];
        Q.lambda[j] += s * dP.lambda[j];
    }
    return Q;
}

// Orthonormal frame with the third axis along d (any frame when d = 0).
Eigen::Matrix3d frame_along(const Vec3& d) {
    Eigen::Matrix3d F = Eigen::Matrix3d::Identity();
    if (d.norm() == 0) return F;
    const Vec3 e3 = d.normalized();
    Vec3 t = std::abs(e3.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    const Vec3 e1 = (t - t.dot(e3) * e3).normalized();
    F.col(0) = e1;
    F.col(1) = e3.cross(e1);
    F.col(2) = e3;
    return F;
}

// Radius (soliton frame) beyond which the profile is below `level`; at least the radial grid.
double patch_radius(const GroundState& gs, double level) {
    double lo = gs.grid.r_max, hi = lo;
    if (gs.value(lo) <= level) return lo;
    while (gs.value(hi) > level) hi *= 1.5;
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (gs.value(mid) > level ? lo : hi) = mid;
    }
    return hi;
}

}  // namespace

void check_placement(const ProfileSet& ps, const ModulationState& g, double L, double boundary_tol) {
    const GroundState& gs = ps.ground_state();
    for (int j = 0; j < g.m(); ++j) {
        const double lam = g.P.lambda[j];
        if (!(lam > 0)) throw FieldError("non-positive scale");
        double d = 0.5 * L;
        for (int c = 0; c < 3; ++c) d = std::min(d, 0.5 * L - std::abs(g.P.alpha[j][c]));
        const double tail = d > 0 ? gs.value(d / lam) / (lam * lam) : HUGE_VAL;
        if (tail > boundary_tol) {
            std::ostringstream os;
            os << "soliton " << j << " is " << d << " from the box boundary; profile there " << tail << " > "
               << boundary_tol;
            throw PlacementError(os.str());
        }
    }
}

Ansatz build_ansatz(const ProfileSet& ps, const ModulationState& g, int n, double L, double boundary_tol,
                    bool with_directions) {
    check_placement(ps, g, L, boundary_tol);
    Ansatz a;
    a.R = ComplexField3D(n, L);
    const auto pcs = ps.at(g.P);
    const double h = L / n;
    for (int j = 0; j < g.m(); ++j) {
        const Vec3& al = g.P.alpha[j];
        const Vec3& be = g.P.beta[j];
        const double lam = g.P.lambda[j];
        const double rcut = patch_radius(ps.ground_state(), 1e-2 * boundary_tol * lam * lam), rho = lam * rcut;
        SolitonPatch p;
        p.j = j;
        int lo[3], hi[3];
        for (int c = 0; c < 3; ++c) {
            lo[c] = std::max(0, static_cast<int>(std::ceil((al[c] - rho + 0.5 * L) / h)));
            hi[c] = std::min(n - 1, static_cast<int>(std::floor((al[c] + rho + 0.5 * L) / h)));
        }
        for (int i0 = lo[0]; i0 <= hi[0]; ++i0)
            for (int i1 = lo[1]; i1 <= hi[1]; ++i1)
                for (int i2 = lo[2]; i2 <= hi[2]; ++i2) {
                    const Vec3 x(a.R.coord(i0), a.R.coord(i1), a.R.coord(i2));
                    const Vec3 y = (x - al) / lam;
                    if (y.norm() > rcut) continue;
                    const auto s = ps.sample(pcs[j], y);
                    const cplx e = std::exp(I * (be.dot(x) - g.gamma[j])) / (lam * lam);
                    const std::size_t idx = a.R.index(i0, i1, i2);
                    const cplx val = e * s.v;
                    a.R.data[idx] += val;
                    p.idx.push_back(idx);
                    p.value.push_back(val);
                    if (!with_directions) continue;
                    p.dir[0].push_back(val);
                    for (int c = 0; c < 3; ++c) p.dir[1 + c].push_back(val * y[c]);
                    const cplx yg = y.cast<cplx>().dot(s.grad);  // dot() conjugates the first argument; y is real
                    p.dir[4].push_back(I * e * (2.0 * s.v + yg));
                    for (int c = 0; c < 3; ++c) p.dir[5 + c].push_back(I * e * s.grad[c]);
                }
        a.patches.push_back(std::move(p));
    }
    return a;
}

ComplexField3D assemble_R(const ProfileSet& ps, const ModulationState& g, int n, double L, double boundary_tol) {
    return build_ansatz(ps, g, n, L, boundary_tol, false).R;
}

std::vector<double> orthogonality_conditions(const ComplexField3D& eps, const Ansatz& a) {
    if (!eps.same_grid(a.R)) throw FieldError("orthogonality: grid mismatch");
    const double h3 = std::pow(eps.h(), 3);
    std::vector<double> out;
    out.reserve(a.patches.size() * kConditionsPerSoliton);
    for (const auto& p : a.patches) {
        if (p.dir[0].size() != p.idx.size()) throw FieldError("ansatz built without directions");
        for (int d = 0; d < kConditionsPerSoliton; ++d) {
            double s = 0;
            for (std::size_t q = 0; q < p.idx.size(); ++q) s += std::real(eps.data[p.idx[q]] * std::conj(p.dir[d][q]));
            out.push_back(s * h3);
        }
    }
    return out;
}

std::vector<ComplexField3D> orthogonality_directions(const Ansatz& a) {
    std::vector<ComplexField3D> out;
    for (const auto& p : a.patches) {
        if (p.dir[0].size() != p.idx.size()) throw FieldError("ansatz built without directions");
        for (int d = 0; d < kConditionsPerSoliton; ++d) {
            ComplexField3D f(a.R.n, a.R.L);
            for (std::size_t q = 0; q < p.idx.size(); ++q) f.data[p.idx[q]] = p.dir[d][q];
            out.push_back(std::move(f));
        }
    }
    return out;
}

ResidualReport residual_semianalytic(const ProfileSet& ps, const Params& P, int n_phi) {
    if (ps.order() > 2) throw ProfileError("soliton-frame residual needs radial profiles (order <= 2)");
    if (n_phi < 1) throw ProfileError("n_phi must be positive");
    using GL = boost::math::quadrature::gauss<double, 30>;
    const GroundState& gs = ps.ground_state();
    const RadialGrid& g = gs.grid;
    const int m = P.m(), nr = g.size();
    const auto pcs = ps.at(P);
    const Params dP = modulation_rhs(P, ps.coefficients());

    std::vector<Vec> V(m), phi(m);
    std::vector<RadialSpline> phi_spl(m);
    std::vector<double> mass(m);
    for (int j = 0; j < m; ++j) {
        V[j] = ps.radial_profile(pcs[j]);
        phi[j] = newtonian_potential_radial(V[j].cwiseAbs2(), 0, g);
        phi_spl[j] = RadialSpline(g, phi[j], 1);
        mass[j] = integrate_r2(g, V[j].cwiseAbs2());
    }

    // d/dt of the lq, tau coefficients along the modulation flow; centred differences with one Richardson step
    double vmax = 1;
    for (int j = 0; j < m; ++j) vmax = std::max(vmax, dP.alpha[j].norm());
    const double a_min = m > 1 ? P.min_separation() : 1.0;
    const double hs = 1e-3 * a_min / vmax;
    auto coef_rate = [&](double s) {
        const auto p = ps.at(shifted(P, dP, s)), q = ps.at(shifted(P, dP, -s));
        std::vector<std::array<double, 2>> r(m);
        for (int j = 0; j < m; ++j) r[j] = {(p[j].lq - q[j].lq) / (2 * s), (p[j].tau - q[j].tau) / (2 * s)};
        return r;
    };
    const auto r1 = coef_rate(hs), r2 = coef_rate(0.5 * hs);

    const RadialDiff diff = radial_diff(g, 1);
    const SpMat lap = radial_laplacian(g, 0);

    std::vector<double> mu, wmu;
    for (std::size_t i = 0; i < GL::abscissa().size(); ++i) {
        const double x = GL::abscissa()[i], w = GL::weights()[i];
        mu.push_back(x);
        wmu.push_back(w);
        if (x != 0) {
            mu.push_back(-x);
            wmu.push_back(w);
        }
    }

    ResidualReport rep;
    double total = 0;
    for (int j = 0; j < m; ++j) {
        const double lam = P.lambda[j];
        Vec dtV = Vec::Zero(nr);
        if (ps.order() >= 1) {
            const double dlq = (4 * r2[j][0] - r1[j][0]) / 3, dtau = (4 * r2[j][1] - r1[j][1]) / 3;
            dtV = dlq * ps.basis().lq;
            if (ps.order() >= 2) dtV += dtau * ps.basis().tau;
        }
        Vec rad(nr);
        for (int i = 0; i < nr; ++i) rad[i] = g.r[i];
        const Vec lamV = 2 * V[j] + rad.cwiseProduct(diff.d1 * V[j]);
        const Vec re = lap * V[j] - V[j] - phi[j].cwiseProduct(V[j]);
        const Vec im = lam * lam * dtV - lam * dP.lambda[j] * lamV;

        // others in units of y_j: y_k = (lam_j y + alpha_j - alpha_k) / lam_k
        const Eigen::Matrix3d F = frame_along(m > 1 ? Vec3(P.alpha[(j + 1) % m] - P.alpha[j]) : Vec3::Zero());
        std::vector<std::pair<double, double>> cs(n_phi);
        for (int q = 0; q < n_phi; ++q) cs[q] = {std::cos(2 * M_PI * q / n_phi), std::sin(2 * M_PI * q / n_phi)};

        Vec mean(nr);
        double sup = 0;
        for (int i = 0; i < nr; ++i) {
            const double r = g.r[i];
            double acc = 0;
            for (std::size_t a = 0; a < mu.size(); ++a) {
                const double st = std::sqrt(std::max(0.0, 1 - mu[a] * mu[a]));
                double ring = 0;
                for (int q = 0; q < n_phi; ++q) {
                    const Vec3 y = r * (F.col(0) * st * cs[q].first + F.col(1) * st * cs[q].second + F.col(2) * mu[a]);
                    double pot = lam * lam * lam * dP.beta[j].dot(y);
                    for (int k = 0; k < m; ++k) {
                        if (k == j) continue;
                        const double rk = ((lam * y + P.alpha[j] - P.alpha[k]) / P.lambda[k]).norm();
                        const double pk = rk <= g.r_max ? phi_spl[k](rk) : -mass[k] / (4 * M_PI * rk);
                        pot += std::pow(lam / P.lambda[k], 2) * pk;
                    }
                    const cplx psi(re[i] - pot * V[j][i], im[i]);
                    const double a2 = std::norm(psi);
                    ring += a2;
                    sup = std::max(sup, std::sqrt(a2));
                }
                acc += wmu[a] * ring / n_phi;
            }
            mean[i] = 0.5 * acc;  // angular mean: (1/4pi) * 2pi * int dmu
        }
        const double nj = integrate_r2(g, mean) * std::pow(lam, -5);
        rep.per_soliton_l2.push_back(std::sqrt(std::max(0.0, nj)));
        rep.sup = std::max(rep.sup, sup * std::pow(lam, -4));
        total += nj;
    }
    rep.l2 = std::sqrt(std::max(0.0, total));
    return rep;
}

ResidualField residual_Psi(const ProfileSet& ps, const CorrectedTrajectory& traj, double t, int n, double L,
                           PotentialMode mode, double boundary_tol, double max_gap) {
    const ModulationState g0 = traj.state_at(t);
    Spectral sp(n, L, mode);
    const ComplexField3D R = assemble_R(ps, g0, n, L, boundary_tol);
    const double h = 1e-4 * t;
    auto central = [&](double s) {
        const ComplexField3D a = assemble_R(ps, traj.state_at(t + s), n, L, boundary_tol);
        const ComplexField3D b = assemble_R(ps, traj.state_at(t - s), n, L, boundary_tol);
        ComplexField3D d = a - b;
        for (auto& v : d.data) v /= 2 * s;
        return d;
    };
    const ComplexField3D d1 = central(h), d2 = central(0.5 * h);

    ResidualField out;
    const double nd2 = std::sqrt(l2_norm_sq(d2));
    out.richardson_gap = nd2 > 0 ? std::sqrt(l2_norm_sq(d1 - d2)) / nd2 : 0;
    if (out.richardson_gap > max_gap) {
        std::ostringstream os;
        os << "time-derivative step too coarse: Richardson gap " << out.richardson_gap << " > " << max_gap;
        throw FieldError(os.str());
    }

    const ComplexField3D lapR = sp.laplacian(R);
    const std::vector<double> phi = sp.potential_of(R);
    out.psi = ComplexField3D(n, L);
    out.psi.time = t;
    for (std::size_t i = 0; i < R.size(); ++i) {
        const cplx dt = (4.0 * d2.data[i] - d1.data[i]) / 3.0;
        out.psi.data[i] = I * dt + lapR.data[i] - phi[i] * R.data[i];
    }

    // norms, split among solitons by nearest centre
    const int m = g0.m();
    std::vector<double> part(m, 0.0);
    double sup = 0;
    for (std::size_t i = 0; i < R.size(); ++i) {
        const double a2 = std::norm(out.psi.data[i]);
        sup = std::max(sup, std::sqrt(a2));
        const Vec3 x = out.psi.point(i);
        int best = 0;
        double bd = HUGE_VAL;
        for (int j = 0; j < m; ++j) {
            const double d = (x - g0.P.alpha[j]).norm();
            if (d < bd) {
                bd = d;
                best = j;
            }
        }
        part[best] += a2;
    }
    const double h3 = std::pow(R.h(), 3);
    double total = 0;
    for (double& p : part) {
        total += p * h3;
        out.norms.per_soliton_l2.push_back(std::sqrt(p * h3));
    }
    out.norms.l2 = std::sqrt(total);
    out.norms.sup = sup;
    return out;
}

}  // namespace hartree
