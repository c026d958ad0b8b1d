#include "hartree/analysis.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace hartree {

namespace {

// 5-point derivative of a sampled series at every node (stencil clamped at the ends).
std::vector<double> derivative(const std::vector<double>& t, const std::vector<double>& y) {
    const int n = static_cast<int>(t.size());
    if (n < 5) throw RangeError("derivative needs at least 5 samples");
    std::vector<double> d(n);
    for (int i = 0; i < n; ++i) {
        const int lo = std::clamp(i - 2, 0, n - 5);
        std::vector<double> xs(t.begin() + lo, t.begin() + lo + 5);
        const auto w = fd_weights(t[i], xs, 1);
        double s = 0;
        for (int k = 0; k < 5; ++k) s += w[1][k] * y[lo + k];
        d[i] = s;
    }
    return d;
}

double smooth_f(double x) { return x > 0 ? std::exp(-1.0 / x) : 0.0; }
double smooth_fp(double x) { return x > 0 ? std::exp(-1.0 / x) / (x * x) : 0.0; }

// S(x): 0 for x <= 0, 1 for x >= 1
double step(double x) {
    if (x <= 0) return 0;
    if (x >= 1) return 1;
    const double a = smooth_f(x), b = smooth_f(1 - x);
    return a / (a + b);
}
double step_prime(double x) {
    if (x <= 0 || x >= 1) return 0;
    const double a = smooth_f(x), b = smooth_f(1 - x), ap = smooth_fp(x), bp = smooth_fp(1 - x);
    return (ap * b + a * bp) / ((a + b) * (a + b));
}

double phi0(double rho, double ri, double ro) { return step((ro - rho) / (ro - ri)); }
double phi0_prime(double rho, double ri, double ro) { return -step_prime((ro - rho) / (ro - ri)) / (ro - ri); }

// Square roots of a partition built from centres at scale s, and their gradients, at one point.
struct Roots {
    std::vector<double> v;
    std::vector<Vec3> grad;
};

Roots partition_roots(const Vec3& x, const std::vector<Vec3>& c, double s, double ri, double ro) {
    const int m = static_cast<int>(c.size());
    Roots out;
    out.v.assign(m, 0.0);
    out.grad.assign(m, Vec3::Zero());
    if (m == 1) {
        out.v[0] = 1;
        return out;
    }
    out.v[m - 1] = 1;
    for (int j = 0; j < m - 1; ++j) {
        const Vec3 d = (x - c[j]) / s;
        const double rho = d.norm();
        if (rho >= ro) continue;
        const double p0 = phi0(rho, ri, ro), p0p = phi0_prime(rho, ri, ro);
        const double P = 1 - (1 - p0) * (1 - p0), Pp = 2 * (1 - p0) * p0p;
        const Vec3 u = rho > 0 ? Vec3(d / rho) : Vec3::Zero();
        out.v[j] = P;
        out.grad[j] = Pp / s * u;
        // sqrt(1 - P^2) = (1 - p0) sqrt(1 + P); supports are disjoint so one j is active
        const double sq = std::sqrt(1 + P);
        out.v[m - 1] = (1 - p0) * sq;
        out.grad[m - 1] = (-p0p * sq + (1 - p0) * Pp / (2 * sq)) / s * u;
    }
    return out;
}

double min_separation(const std::vector<Vec3>& c) {
    double a = HUGE_VAL;
    for (std::size_t j = 0; j < c.size(); ++j)
        for (std::size_t k = j + 1; k < c.size(); ++k) a = std::min(a, (c[j] - c[k]).norm());
    return a;
}

}  // namespace

ModulationErrorSeries modulation_error(const std::vector<double>& t, const std::vector<ModulationState>& g,
                                       const Coefficients& co) {
    if (t.size() != g.size()) throw AnalysisError("modulation_error: sizes differ");
    const int n = static_cast<int>(t.size());
    if (n < 5) throw RangeError("modulation_error needs at least 5 samples");
    for (int i = 1; i < n; ++i)
        if (!(t[i] > t[i - 1]) && !(t[i] < t[i - 1])) throw AnalysisError("modulation_error: repeated times");
    const int m = g.front().m();
    ModulationErrorSeries out;
    out.t = t;
    out.mod.assign(n, 0.0);
    out.per_soliton.assign(m, std::vector<double>(n, 0.0));

    // order the samples by time (backward runs arrive in decreasing t)
    std::vector<int> ord(n);
    std::iota(ord.begin(), ord.end(), 0);
    std::sort(ord.begin(), ord.end(), [&](int a, int b) { return t[a] < t[b]; });
    std::vector<double> ts(n);
    for (int i = 0; i < n; ++i) ts[i] = t[ord[i]];

    for (int j = 0; j < m; ++j) {
        std::vector<std::vector<double>> series(8, std::vector<double>(n));
        for (int i = 0; i < n; ++i) {
            const auto& s = g[ord[i]];
            for (int c = 0; c < 3; ++c) {
                series[c][i] = s.P.alpha[j][c];
                series[3 + c][i] = s.P.beta[j][c];
            }
            series[6][i] = s.P.lambda[j];
            series[7][i] = s.gamma[j];
        }
        for (int i = 1; i < n; ++i) {  // unwrap the phase
            double d = series[7][i] - series[7][i - 1];
            series[7][i] -= 2 * M_PI * std::round(d / (2 * M_PI));
        }
        std::vector<std::vector<double>> rate(8);
        for (int c = 0; c < 8; ++c) rate[c] = derivative(ts, series[c]);
        for (int i = 0; i < n; ++i) {
            const auto& s = g[ord[i]];
            const Vec3 B = co.B(s.P)[j];
            const double M = co.M(s.P)[j];
            const Vec3 da(rate[0][i], rate[1][i], rate[2][i]), db(rate[3][i], rate[4][i], rate[5][i]);
            const Vec3& al = s.P.alpha[j];
            const Vec3& be = s.P.beta[j];
            const double lam = s.P.lambda[j];
            const double v = (da - 2 * be).norm() + (db - B).norm() + std::abs(rate[6][i] - M) +
                             std::abs(rate[7][i] + 1 / (lam * lam) - be.squaredNorm() - db.dot(al));
            out.per_soliton[j][ord[i]] = v;
            out.mod[ord[i]] += v;
        }
    }
    return out;
}

double cutoff_profile(double rho, double r_in, double r_out) {
    const double p0 = phi0(rho, r_in, r_out);
    return 1 - (1 - p0) * (1 - p0);
}

double cutoff_profile_prime(double rho, double r_in, double r_out) {
    return 2 * (1 - phi0(rho, r_in, r_out)) * phi0_prime(rho, r_in, r_out);
}

CutoffFamily build_cutoffs(const std::vector<Vec3>& alpha, int n, double L,
                           const std::vector<std::vector<int>>& clusters, double r_in, double r_out) {
    const int m = static_cast<int>(alpha.size());
    if (m < 1) throw AnalysisError("build_cutoffs: no solitons");
    if (!(0 < r_in && r_in < r_out && r_out < 0.5)) throw AnalysisError("cutoff radii must satisfy 0 < r < R < 1/2");
    CutoffFamily cf;
    cf.n = n;
    cf.L = L;
    cf.r_in = r_in;
    cf.r_out = r_out;
    const double h = L / n;

    std::vector<std::vector<int>> cl = clusters;
    if (cl.empty())
        for (int j = 0; j < m; ++j) cl.push_back({j});
    std::vector<int> owner(m, -1);
    for (std::size_t J = 0; J < cl.size(); ++J)
        for (int j : cl[J]) {
            if (j < 0 || j >= m || owner[j] >= 0) throw AnalysisError("clusters must partition the solitons");
            owner[j] = static_cast<int>(J);
        }
    for (int o : owner)
        if (o < 0) throw AnalysisError("clusters must partition the solitons");

    std::vector<Vec3> centre(cl.size(), Vec3::Zero());
    for (std::size_t J = 0; J < cl.size(); ++J) {
        for (int j : cl[J]) centre[J] += alpha[j];
        centre[J] /= static_cast<double>(cl[J].size());
    }
    const double s_out = cl.size() > 1 ? min_separation(centre) : 0;
    cf.scale = m > 1 ? min_separation(alpha) : 0;
    if (m > 1 && cf.scale < 16 * h) {
        std::ostringstream os;
        os << "solitons " << cf.scale << " apart: cutoff supports need at least 16 grid spacings (" << 16 * h << ")";
        throw AnalysisError(os.str());
    }
    std::vector<double> s_in(cl.size(), 0);
    std::vector<std::vector<Vec3>> members(cl.size());
    for (std::size_t J = 0; J < cl.size(); ++J) {
        for (int j : cl[J]) members[J].push_back(alpha[j]);
        if (cl[J].size() > 1) s_in[J] = min_separation(members[J]);
        if (cl.size() > 1)
            for (const Vec3& a : members[J])
                if ((a - centre[J]).norm() > r_in * s_out)
                    throw AnalysisError("cluster wider than the inner radius of its cutoff; support overlap");
    }
    const bool mixed = !clusters.empty();
    if (mixed) cf.clusters = cl;

    const std::size_t total = static_cast<std::size_t>(n) * n * n;
    cf.phi.assign(m, std::vector<double>(total));
    cf.grad_norm.assign(m, std::vector<double>(total));
    cf.grad_sqrt.assign(m, std::vector<double>(total));
    if (mixed) cf.cluster_phi.assign(cl.size(), std::vector<double>(total));

    ComplexField3D grid(n, L);
    for (std::size_t q = 0; q < total; ++q) {
        const Vec3 x = grid.point(q);
        const Roots outer = partition_roots(x, centre, s_out, r_in, r_out);
        for (std::size_t J = 0; J < cl.size(); ++J) {
            if (mixed) cf.cluster_phi[J][q] = outer.v[J] * outer.v[J];
            const Roots inner = cl[J].size() > 1 ? partition_roots(x, members[J], s_in[J], r_in, r_out)
                                                 : Roots{{1.0}, {Vec3::Zero()}};
            for (std::size_t k = 0; k < cl[J].size(); ++k) {
                const int j = cl[J][k];
                const double sv = outer.v[J] * inner.v[k];
                const Vec3 sg = inner.v[k] * outer.grad[J] + outer.v[J] * inner.grad[k];
                cf.phi[j][q] = sv * sv;
                cf.grad_sqrt[j][q] = sg.norm();
                cf.grad_norm[j][q] = 2 * sv * sg.norm();
            }
        }
    }
    return cf;
}

GFunctional functional_G(const ComplexField3D& eps, const ComplexField3D& R, const ModulationState& g,
                         const CutoffFamily& cut, const Spectral& sp) {
    if (!eps.same_grid(R) || eps.n != cut.n || eps.L != cut.L) throw AnalysisError("functional_G: grid mismatch");
    if (static_cast<int>(cut.phi.size()) != g.m()) throw AnalysisError("functional_G: cutoff count differs from m");
    const std::size_t N = eps.size();
    const double h3 = std::pow(eps.h(), 3);
    std::vector<double> e2(N), w(N), r2(N);
    for (std::size_t i = 0; i < N; ++i) {
        e2[i] = std::norm(eps.data[i]);
        w[i] = std::real(eps.data[i] * std::conj(R.data[i]));
        r2[i] = std::norm(R.data[i]);
    }
    const auto phiR = sp.potential(r2), phiW = sp.potential(w), phiE = sp.potential(e2);
    double a = 0, b = 0, c = 0, d = 0;
    for (std::size_t i = 0; i < N; ++i) {
        a += phiR[i] * e2[i];
        b += phiW[i] * w[i];  // = -int |grad phi_w|^2
        c += phiW[i] * e2[i];
        d += phiE[i] * e2[i];  // = -int |grad phi_{|eps|^2}|^2
    }
    GFunctional G;
    G.G1 = sp.gradient_norm_sq(eps) + h3 * (a + 2 * b + 2 * c + 0.5 * d);

    const auto grad = sp.gradient(eps);
    for (int j = 0; j < g.m(); ++j) {
        const double lam = g.P.lambda[j];
        const Vec3& be = g.P.beta[j];
        double mass = 0;
        Vec3 mom = Vec3::Zero();
        for (std::size_t i = 0; i < N; ++i) {
            const double p = cut.phi[j][i];
            if (p == 0) continue;
            mass += p * e2[i];
            for (int k = 0; k < 3; ++k) mom[k] += p * std::imag(grad[k].data[i] * std::conj(eps.data[i]));
        }
        G.G2 += (1 / (lam * lam) + be.squaredNorm()) * mass * h3;
        G.G3 += -2 * be.dot(mom) * h3;
    }
    G.G = G.G1 + G.G2 + G.G3;
    return G;
}

OrthogonalSampler::OrthogonalSampler(const Ansatz& a, const Spectral& sp) : sp_(sp), dirs_(orthogonality_directions(a)) {
    const auto& k2 = sp.k2();
    for (const auto& d : dirs_) {
        ComplexField3D r = d;
        sp.forward(r.data);
        for (std::size_t q = 0; q < r.size(); ++q) r.data[q] /= 1.0 + k2[q];
        sp.inverse(r.data);
        riesz_.push_back(std::move(r));
    }
    const int k = static_cast<int>(dirs_.size());
    Eigen::MatrixXd G(k, k);
    for (int p = 0; p < k; ++p)
        for (int q = 0; q < k; ++q) G(p, q) = std::real(inner(riesz_[q], dirs_[p]));
    gram_.compute(0.5 * (G + G.transpose()));
}

void OrthogonalSampler::project(ComplexField3D& f) const {
    const int k = static_cast<int>(dirs_.size());
    Eigen::VectorXd b(k);
    for (int p = 0; p < k; ++p) b[p] = std::real(inner(f, dirs_[p]));
    const Eigen::VectorXd c = gram_.solve(b);
    for (int p = 0; p < k; ++p)
        for (std::size_t i = 0; i < f.size(); ++i) f.data[i] -= c[p] * riesz_[p].data[i];
}

ComplexField3D OrthogonalSampler::draw(std::mt19937_64& rng, double h1_norm, double k_band) const {
    std::normal_distribution<double> N01;
    ComplexField3D f(sp_.n(), sp_.L());
    const auto& k2 = sp_.k2();
    for (std::size_t q = 0; q < f.size(); ++q) {
        const double re = N01(rng), im = N01(rng);
        f.data[q] = cplx(re, im) * std::exp(-0.5 * k2[q] / (k_band * k_band));
    }
    sp_.inverse(f.data);
    project(f);
    const double norm = std::sqrt(sp_.h1_norm_sq(f));
    for (auto& z : f.data) z *= h1_norm / norm;
    return f;
}

std::string to_string(LinearOperator op) { return op == LinearOperator::Lplus ? "Lplus" : "Lminus"; }

CoercivityResult coercivity_spectrum(const GroundState& gs, LinearOperator op, int ell, int count, double kernel_tol) {
    if (ell < 0 || ell > kMaxPotentialDegree) throw AnalysisError("harmonic degree out of range");
    const RadialGrid& g = gs.grid;
    const int n = g.size();
    const int parity = ell % 2 == 0 ? 1 : -1;
    const Mat D = Mat(radial_diff(g, parity).d1);
    Vec wr2(n), w0(n);
    for (int i = 0; i < n; ++i) {
        w0[i] = g.w[i];
        wr2[i] = g.w[i] * g.r[i] * g.r[i];
    }
    // H^1 form and the quadratic form of L on the degree-ell component
    Mat B = D.transpose() * wr2.asDiagonal() * D;
    B.diagonal() += ell * (ell + 1) * w0 + wr2;
    Mat A = B;
    A.diagonal() += wr2.cwiseProduct(gs.phi);
    if (op == LinearOperator::Lplus) {
        const Mat P = potential_matrix(g, ell);
        Mat Nl = 2.0 * wr2.cwiseProduct(gs.q).asDiagonal() * P * gs.q.asDiagonal();
        A += 0.5 * (Nl + Nl.transpose());
    }
    A = 0.5 * (A + A.transpose());
    B = 0.5 * (B + B.transpose());
    // odd components vanish at r = 0
    const int first = ell > 0 ? 1 : 0;
    const int k = n - first;
    A = A.bottomRightCorner(k, k).eval();
    B = B.bottomRightCorner(k, k).eval();

    CoercivityResult res;
    res.op = op;
    res.ell = ell;
    res.grid_points = n;
    auto smallest = [&](const Mat& a, const Mat& b) {
        Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(a, b, Eigen::EigenvaluesOnly);
        if (es.info() != Eigen::Success) throw AnalysisError("generalized eigenproblem failed");
        const Vec ev = es.eigenvalues();
        return std::vector<double>(ev.data(), ev.data() + std::min<Eigen::Index>(count, ev.size()));
    };
    res.unprojected = smallest(A, B);

    Vec c;
    if (op == LinearOperator::Lplus && ell == 0) {
        c = wr2.cwiseProduct(gs.q);
        res.projection = "Q";
    } else if (op == LinearOperator::Lplus && ell == 1) {
        Vec rq(n);
        for (int i = 0; i < n; ++i) rq[i] = g.r[i] * gs.q[i];
        c = wr2.cwiseProduct(rq);
        res.projection = "x Q";
    } else if (op == LinearOperator::Lminus && ell == 0) {
        c = wr2.cwiseProduct(gs.lambda_q);
        res.projection = "Lambda Q";
    } else if (op == LinearOperator::Lminus && ell == 1) {
        c = wr2.cwiseProduct(gs.dq);
        res.projection = "grad Q";
    }
    const bool kernel = (op == LinearOperator::Lplus && ell == 1) || (op == LinearOperator::Lminus && ell == 0);
    if (kernel) {
        double best = HUGE_VAL;
        for (double e : res.unprojected) best = std::min(best, std::abs(e));
        if (best > kernel_tol) {
            std::ostringstream os;
            os << to_string(op) << " on degree " << ell << ": kernel eigenvalue " << best << " not resolved (tol "
               << kernel_tol << ")";
            throw ResolutionError(os.str(), best);
        }
    }
    if (c.size() == 0) {
        res.projected = res.unprojected;
        res.projection = "none";
        return res;
    }
    // Null space of c^T v = 0 by eliminating the pivot p: v_p = -s^T v_rest with s = c_rest / c_p,
    // so Z^T M Z = M_rr - m s^T - s m^T + M_pp s s^T with m = M_rp.
    const Vec ck = c.tail(k);
    Eigen::Index p = 0;
    ck.cwiseAbs().maxCoeff(&p);
    std::vector<int> rest;
    for (int i = 0; i < k; ++i)
        if (i != p) rest.push_back(i);
    Vec s(k - 1);
    for (int i = 0; i < k - 1; ++i) s[i] = ck[rest[i]] / ck[p];
    auto reduce = [&](const Mat& M) {
        Mat R = M(rest, rest);
        Vec m(k - 1);
        for (int i = 0; i < k - 1; ++i) m[i] = M(rest[i], p);
        R -= m * s.transpose() + s * m.transpose();
        R += M(p, p) * s * s.transpose();
        return Mat(0.5 * (R + R.transpose()));
    };
    res.projected = smallest(reduce(A), reduce(B));
    return res;
}

PowerFit fit_power_law(const std::vector<double>& t, const std::vector<double>& y) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < t.size() && i < y.size(); ++i)
        if (t[i] > 0 && y[i] > 0) {
            lx.push_back(std::log(t[i]));
            ly.push_back(std::log(y[i]));
        }
    const std::size_t n = lx.size();
    if (n < 3) throw RangeError("power-law fit needs at least 3 positive samples");
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / n, my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    if (sxx <= 0) throw RangeError("power-law fit needs distinct times");
    PowerFit f;
    f.exponent = sxy / sxx;
    f.prefactor = std::exp(my - f.exponent * mx);
    double sse = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = ly[i] - (my + f.exponent * (lx[i] - mx));
        sse += r * r;
    }
    f.r2 = syy > 0 ? 1 - sse / syy : 1;
    const double se = std::sqrt(sse / (n - 2) / sxx);
    const boost::math::students_t dist(static_cast<double>(n - 2));
    const double q = boost::math::quantile(boost::math::complement(dist, 0.025));
    f.ci_low = f.exponent - q * se;
    f.ci_high = f.exponent + q * se;
    return f;
}

EnvelopeReport envelope(const std::string& name, const std::vector<double>& t, const std::vector<double>& y) {
    if (t.size() != y.size()) throw AnalysisError("envelope: sizes differ");
    std::vector<int> ord(t.size());
    std::iota(ord.begin(), ord.end(), 0);
    std::sort(ord.begin(), ord.end(), [&](int a, int b) { return t[a] < t[b]; });
    std::vector<double> ts(t.size()), env(t.size());
    double run = 0;
    for (int i = static_cast<int>(ord.size()) - 1; i >= 0; --i) {
        run = std::max(run, std::abs(y[ord[i]]));
        ts[i] = t[ord[i]];
        env[i] = run;
    }
    EnvelopeReport r;
    r.name = name;
    r.fit = fit_power_law(ts, env);
    for (std::size_t i = 0; i < t.size(); ++i)
        if (std::abs(y[i]) > 2 * r.fit.prefactor * std::pow(t[i], r.fit.exponent)) ++r.violations;
    r.decaying = r.fit.ci_high < 0;
    return r;
}

GronwallReport gronwall_report(const std::vector<double>& t, const std::vector<double>& eps_h1,
                               const std::vector<double>& G, const std::vector<double>& mod) {
    const std::size_t n = t.size();
    if (eps_h1.size() != n || G.size() != n || mod.size() != n) throw AnalysisError("gronwall_report: sizes differ");
    if (n < 30) throw RangeError("gronwall_report needs at least 30 samples, got " + std::to_string(n));
    const auto [lo, hi] = std::minmax_element(t.begin(), t.end());
    if (!(*lo > 0) || *hi / *lo < 10 * (1 - 1e-9)) throw RangeError("gronwall_report needs one decade of t");
    std::vector<int> ord(n);
    std::iota(ord.begin(), ord.end(), 0);
    std::sort(ord.begin(), ord.end(), [&](int a, int b) { return t[a] < t[b]; });
    std::vector<double> ts(n), gs(n);
    for (std::size_t i = 0; i < n; ++i) {
        ts[i] = t[ord[i]];
        gs[i] = G[ord[i]];
    }
    const auto dg = derivative(ts, gs);
    GronwallReport r;
    r.eps_h1 = envelope("eps_H1", t, eps_h1);
    r.G = envelope("G", t, G);
    r.dG = envelope("dG/dt", ts, dg);
    r.mod = envelope("Mod", t, mod);
    return r;
}

}  // namespace hartree
