#include "hartree/trajectory.hpp"

#include "hartree/radial.hpp"

#include <boost/numeric/odeint.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

namespace odeint = boost::numeric::odeint;

namespace hartree {

using cplx = std::complex<double>;

namespace {

// Integral of the cubic through four nodes over [x[1], x[2]] (or another adjacent pair), by 2-point Gauss.
template <class T>
T cubic_interval(const double* x, const T* y, double a, double b) {
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a), off = half / std::sqrt(3.0);
    T sum = T(0);
    for (double s : {mid - off, mid + off}) {
        T v = T(0);
        for (int p = 0; p < 4; ++p) {
            double w = 1;
            for (int q = 0; q < 4; ++q)
                if (q != p) w *= (s - x[q]) / (x[p] - x[q]);
            v += w * y[p];
        }
        sum += v;
    }
    return sum * half;
}

// Integrals over [t_i, t_{i+1}], in the variable s = log t when t > 0.
template <class T>
std::vector<T> interval_integrals(const std::vector<double>& t, const std::vector<T>& f) {
    const std::size_t n = t.size();
    if (n < 4 || f.size() != n) throw TrajectoryError("quadrature needs at least four matching samples");
    const bool logt = t.front() > 0;
    std::vector<double> s(n);
    std::vector<T> g(n);
    for (std::size_t i = 0; i < n; ++i) {
        s[i] = logt ? std::log(t[i]) : t[i];
        g[i] = logt ? f[i] * t[i] : f[i];
        if (i > 0 && !(s[i] > s[i - 1])) throw TrajectoryError("quadrature nodes must increase");
    }
    std::vector<T> out(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        std::size_t lo = i == 0 ? 0 : std::min(i - 1, n - 4);
        out[i] = cubic_interval(&s[lo], &g[lo], s[i], s[i + 1]);
    }
    return out;
}

template <class T>
std::vector<T> cumulative_to_end(const std::vector<double>& t, const std::vector<T>& f) {
    auto iv = interval_integrals(t, f);
    std::vector<T> out(t.size(), T(0));
    for (std::size_t i = t.size() - 1; i-- > 0;) out[i] = out[i + 1] + iv[i];
    return out;
}

template <class T>
std::vector<T> cumulative_from_start(const std::vector<double>& t, const std::vector<T>& f) {
    auto iv = interval_integrals(t, f);
    std::vector<T> out(t.size(), T(0));
    for (std::size_t i = 1; i < t.size(); ++i) out[i] = out[i - 1] + iv[i - 1];
    return out;
}

// Local decay exponent -d log|f| / d log t at the horizon, or p when f is not a clean power there.
double tail_exponent(const std::vector<double>& t, const std::vector<double>& f, double p) {
    const std::size_t n = t.size();
    if (n < 5) return p;
    std::vector<double> s(5), lf(5);
    for (int i = 0; i < 5; ++i) {
        const double v = f[n - 5 + i];
        if (v == 0 || (v > 0) != (f[n - 1] > 0)) return p;
        s[i] = std::log(t[n - 5 + i]);
        lf[i] = std::log(std::abs(v));
    }
    const auto w = fd_weights(s[4], s, 1)[1];
    double q = 0;
    for (int i = 0; i < 5; ++i) q -= w[i] * lf[i];
    return std::abs(q - p) < 0.5 ? q : p;
}

// int_t^inf f past the horizon H from f ~ (tau + d)^{-p}, with the shift d matched to the local exponent.
std::vector<double> improper_tail(const std::vector<double>& t, const std::vector<double>& f, double p) {
    auto out = cumulative_to_end(t, f);
    const double q = tail_exponent(t, f, p);
    const double tail = f.back() * t.back() * p / (q * (p - 1));
    for (auto& v : out) v += tail;
    return out;
}

Params zero_like(const Params& P) {
    Params Z;
    Z.alpha.assign(P.alpha.size(), Vec3::Zero());
    Z.beta.assign(P.beta.size(), Vec3::Zero());
    Z.lambda.assign(P.lambda.size(), 0.0);
    return Z;
}

struct Weights {
    double a, b, l;
};

// sum_j sup_t of the weighted deviations.
double weighted_norm(const std::vector<double>& t, const std::vector<Params>& d, const Weights& w) {
    if (d.empty()) return 0;
    const int m = d.front().m();
    double total = 0;
    for (int j = 0; j < m; ++j) {
        double sup = 0;
        for (std::size_t i = 0; i < t.size(); ++i) {
            double v = std::pow(t[i], w.a) * d[i].alpha[j].norm() + std::pow(t[i], w.b) * d[i].beta[j].norm() +
                       std::pow(t[i], w.l) * std::abs(d[i].lambda[j]);
            sup = std::max(sup, v);
        }
        total += sup;
    }
    return total;
}

std::vector<Params> difference(const std::vector<Params>& a, const std::vector<Params>& b) {
    std::vector<Params> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = zero_like(a[i]);
        for (int j = 0; j < a[i].m(); ++j) {
            out[i].alpha[j] = a[i].alpha[j] - b[i].alpha[j];
            out[i].beta[j] = a[i].beta[j] - b[i].beta[j];
            out[i].lambda[j] = a[i].lambda[j] - b[i].lambda[j];
        }
    }
    return out;
}

Params add(const Params& a, const Params& d) {
    Params out = a;
    for (int j = 0; j < a.m(); ++j) {
        out.alpha[j] += d.alpha[j];
        out.beta[j] += d.beta[j];
        out.lambda[j] += d.lambda[j];
    }
    return out;
}

[[maybe_unused]] Params with_lambda(const Params& P, const std::vector<double>& lambda) {
    Params out = P;
    out.lambda = lambda;
    return out;
}

// Records one Picard step and enforces the contraction check above the round-off floor.
void record_step(CorrectedTrajectory& tr, double diff, const PicardOptions& opt) {
    if (!tr.differences.empty()) {
        const double prev = tr.differences.back();
        const double ratio = prev > 0 ? diff / prev : 0.0;
        tr.ratios.push_back(ratio);
        if (ratio > opt.max_ratio && prev > 1e3 * opt.tol && tr.differences.size() >= 2)
            throw ContractionError("Picard iteration is not contracting (ratio " + std::to_string(ratio) +
                                       "); increase T0",
                                   ratio);
    }
    tr.differences.push_back(diff);
    tr.iterations = static_cast<int>(tr.differences.size());
}

void check_options(const PicardOptions& opt) {
    if (!(opt.T0 > 0) || !(opt.horizon > opt.T0)) throw TrajectoryError("need 0 < T0 < horizon");
    if (opt.nodes < 8) throw TrajectoryError("too few time nodes");
}

}  // namespace

std::vector<double> integrate_to_end(const std::vector<double>& t, const std::vector<double>& f) {
    return cumulative_to_end(t, f);
}

std::vector<double> integrate_from_start(const std::vector<double>& t, const std::vector<double>& f) {
    return cumulative_from_start(t, f);
}

std::vector<double> geometric_nodes(double t0, double t1, int n) {
    if (!(t0 > 0) || !(t1 > t0) || n < 2) throw TrajectoryError("geometric nodes need 0 < t0 < t1 and n >= 2");
    std::vector<double> t(n);
    const double q = std::log(t1 / t0) / (n - 1);
    for (int i = 0; i < n; ++i) t[i] = t0 * std::exp(q * i);
    t.back() = t1;
    return t;
}

Params modulation_rhs(const Params& P, const Coefficients& co) {
    Params d = zero_like(P);
    const auto B = co.B(P);
    const auto Mv = co.M(P);
    for (int j = 0; j < P.m(); ++j) {
        d.alpha[j] = 2.0 * P.beta[j];
        d.beta[j] = B[j];
        d.lambda[j] = Mv[j];
    }
    return d;
}

std::vector<double> gamma_rate(const Params& P, const Params& dP) {
    std::vector<double> g(P.m());
    for (int j = 0; j < P.m(); ++j)
        g[j] = -1.0 / (P.lambda[j] * P.lambda[j]) + P.beta[j].squaredNorm() + dP.beta[j].dot(P.alpha[j]);
    return g;
}

std::vector<Params> sample_reference(const BodyConfig& config, const std::vector<double>& times) {
    const NBodyPath path = integrate_at(config, times);
    std::vector<Params> out(path.size());
    for (std::size_t i = 0; i < path.size(); ++i) {
        out[i].alpha = path.alpha[i];
        out[i].beta = path.beta[i];
        out[i].lambda = config.lambdas;
    }
    return out;
}

std::vector<Params> build_tilde_trajectory(const std::vector<Params>& reference, double mass_sq) {
    std::vector<Params> out = reference;
    for (auto& P : out) {
        const int m = P.m();
        std::vector<double> lam = P.lambda;
        for (int j = 0; j < m; ++j)
            for (int k = 0; k < m; ++k) {
                if (k == j) continue;
                const double r = (P.alpha[j] - P.alpha[k]).norm();
                lam[j] -= std::pow(P.lambda[j], 3) * mass_sq / (8.0 * M_PI * P.lambda[k] * r);
            }
        P.lambda = lam;
    }
    return out;
}

Eigen::MatrixXd force_jacobian(const Params& P, double mass_sq) {
    const int m = P.m();
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(3 * m, 3 * m);
    for (int j = 0; j < m; ++j)
        for (int k = 0; k < m; ++k) {
            if (k == j) continue;
            const Vec3 d = P.alpha[j] - P.alpha[k];
            const double r = d.norm();
            const double mu = mass_sq / (4.0 * M_PI * P.lambda[k]);
            // d/d alpha_j of -mu d / r^3
            Eigen::Matrix3d H = -mu * (Eigen::Matrix3d::Identity() / std::pow(r, 3) - 3.0 * d * d.transpose() / std::pow(r, 5));
            J.block<3, 3>(3 * j, 3 * j) += H;
            J.block<3, 3>(3 * j, 3 * k) -= H;
        }
    return J;
}

// ---------------------------------------------------------------------------------------------
// Green operators

namespace {

bool from_base(cplx a, double kappa) { return a.real() <= -kappa + 1e-9; }

void check_green_input(const std::vector<double>& t, const std::vector<cplx>& f, double kappa, double tail_power) {
    if (t.size() != f.size() || t.size() < 4) throw TrajectoryError("green operator needs matching samples");
    if (!(t.front() > 0)) throw TrajectoryError("green operator needs positive times");
    if (!(kappa > 0)) throw TrajectoryError("kappa must be positive");
    (void)tail_power;
}

}  // namespace

GreenResult green_G(cplx a, const std::vector<double>& t, const std::vector<cplx>& f, double kappa, double tail_power) {
    check_green_input(t, f, kappa, tail_power);
    const std::size_t n = t.size();
    std::vector<cplx> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = std::pow(cplx(t[i]), 1.0 - a) * f[i];
    GreenResult r;
    r.x.resize(n);
    r.dx.resize(n);
    if (from_base(a, kappa)) {
        auto I = cumulative_from_start(t, g);
        for (std::size_t i = 0; i < n; ++i) r.x[i] = std::pow(cplx(t[i]), a) * I[i];
    } else {
        const double q = tail_power + a.real() - 2.0;
        if (!(q > 0)) throw TrajectoryError("divergent tail in green operator; horizon insufficient for this decay");
        auto I = cumulative_to_end(t, g);
        const double H = t.back();
        const cplx tail = f.back() * std::pow(cplx(H), 2.0 - a) / (tail_power + a - 2.0);
        for (std::size_t i = 0; i < n; ++i) r.x[i] = -std::pow(cplx(t[i]), a) * (I[i] + tail);
    }
    for (std::size_t i = 0; i < n; ++i) r.dx[i] = a * r.x[i] / t[i] + t[i] * f[i];
    return r;
}

GreenResult green_G_da(cplx a, const std::vector<double>& t, const std::vector<cplx>& f, double kappa, double tail_power) {
    check_green_input(t, f, kappa, tail_power);
    const std::size_t n = t.size();
    const GreenResult G = green_G(a, t, f, kappa, tail_power);
    std::vector<cplx> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = std::log(t[i]) * std::pow(cplx(t[i]), 1.0 - a) * f[i];
    GreenResult r;
    r.x.resize(n);
    r.dx.resize(n);
    if (from_base(a, kappa)) {
        auto I = cumulative_from_start(t, g);
        for (std::size_t i = 0; i < n; ++i) r.x[i] = std::log(t[i]) * G.x[i] - std::pow(cplx(t[i]), a) * I[i];
    } else {
        auto I = cumulative_to_end(t, g);
        const double H = t.back();
        const cplx q = tail_power + a - 2.0;
        const cplx tail = f.back() * std::pow(cplx(H), 2.0 - a) * (std::log(H) / q + 1.0 / (q * q));
        for (std::size_t i = 0; i < n; ++i) r.x[i] = std::log(t[i]) * G.x[i] + std::pow(cplx(t[i]), a) * (I[i] + tail);
    }
    for (std::size_t i = 0; i < n; ++i) r.dx[i] = (G.x[i] + a * r.x[i]) / t[i];
    return r;
}

GreenResult green_operator(cplx c, const std::vector<double>& t, const std::vector<cplx>& f, double kappa,
                           double tail_power) {
    const cplx disc = std::sqrt(1.0 + 4.0 * c);
    const cplx a = 0.5 * (1.0 + disc), b = 0.5 * (1.0 - disc);
    if (std::abs(a - b) < 1e-7) return green_G_da(a, t, f, kappa, tail_power);
    const GreenResult Ga = green_G(a, t, f, kappa, tail_power);
    const GreenResult Gb = green_G(b, t, f, kappa, tail_power);
    GreenResult r;
    r.x.resize(t.size());
    r.dx.resize(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        r.x[i] = (Ga.x[i] - Gb.x[i]) / (a - b);
        r.dx[i] = (Ga.dx[i] - Gb.dx[i]) / (a - b);
    }
    return r;
}

// ---------------------------------------------------------------------------------------------
// Picard schemes

CorrectedTrajectory picard_hyperbolic(const BodyConfig& reference, const Coefficients& co, const PicardOptions& opt) {
    check_options(opt);
    reference.check();
    CorrectedTrajectory tr;
    tr.kind = OrbitClass::hyperbolic;
    tr.T0 = opt.T0;
    tr.horizon = opt.horizon;
    tr.epsilon = opt.epsilon;
    tr.coeffs = co;
    tr.times = geometric_nodes(opt.T0, opt.horizon, opt.nodes);
    tr.ref = sample_reference(reference, tr.times);
    const auto& t = tr.times;
    const std::size_t n = t.size();
    const int m = reference.m();
    const Weights w{1 - 3 * opt.epsilon, 2 - 2 * opt.epsilon, 1 - opt.epsilon};

    std::vector<Params> d(n, zero_like(tr.ref[0]));
    std::vector<Vec3> b2ref(n * m);
    for (std::size_t i = 0; i < n; ++i) {
        auto b = co.b2(tr.ref[i]);
        for (int j = 0; j < m; ++j) b2ref[i * m + j] = b[j];
    }
    for (int it = 0; it < opt.max_iter; ++it) {
        // Sweep lambda, then beta with the new lambda, then alpha with the new beta
        // (or plain Jacobi updates when not sequential).
        std::vector<Params> next = d;
        std::vector<double> fb(n), fl(n), fa(n);
        for (int j = 0; j < m; ++j) {
            for (std::size_t i = 0; i < n; ++i) fl[i] = co.M(add(tr.ref[i], d[i]))[j];
            auto Il = improper_tail(t, fl, 2.0);
            for (std::size_t i = 0; i < n; ++i) next[i].lambda[j] = -Il[i];
        }
        std::vector<std::vector<Vec3>> Bv(n);
        for (std::size_t i = 0; i < n; ++i) Bv[i] = co.B(add(tr.ref[i], opt.sequential ? next[i] : d[i]));
        for (int j = 0; j < m; ++j)
            for (int c = 0; c < 3; ++c) {
                for (std::size_t i = 0; i < n; ++i) fb[i] = Bv[i][j][c] - b2ref[i * m + j][c];
                auto Ib = improper_tail(t, fb, 3.0);
                for (std::size_t i = 0; i < n; ++i) next[i].beta[j][c] = -Ib[i];
                for (std::size_t i = 0; i < n; ++i) fa[i] = 2.0 * (opt.sequential ? next : d)[i].beta[j][c];
                auto Ia = improper_tail(t, fa, 2.0);
                for (std::size_t i = 0; i < n; ++i) next[i].alpha[j][c] = -Ia[i];
            }
        const double diff = weighted_norm(t, difference(next, d), w);
        d = std::move(next);
        record_step(tr, diff, opt);
        if (diff < opt.tol) break;
    }
    tr.P.resize(n);
    for (std::size_t i = 0; i < n; ++i) tr.P[i] = add(tr.ref[i], d[i]);
    tr.weighted_norm = weighted_norm(t, d, w);
    tr.gamma = gamma_integrate(t, tr.P, co);
    return tr;
}

CorrectedTrajectory picard_parabolic(const BodyConfig& reference, const Coefficients& co, const PicardOptions& opt) {
    check_options(opt);
    reference.check();
    if (co.order() < 3) throw TrajectoryError("parabolic construction needs N >= 3");
    CorrectedTrajectory tr;
    tr.kind = reference.kind == OrbitClass::mixed ? OrbitClass::mixed : OrbitClass::parabolic;
    tr.T0 = opt.T0;
    tr.horizon = opt.horizon;
    tr.epsilon = opt.epsilon;
    tr.coeffs = co;
    tr.times = geometric_nodes(opt.T0, opt.horizon, opt.nodes);
    tr.ref = sample_reference(reference, tr.times);
    const double Msq = reference.mass_sq;
    tr.tilde = build_tilde_trajectory(tr.ref, Msq);
    const auto& t = tr.times;
    const std::size_t n = t.size();
    const int m = reference.m();
    const int dim = 3 * m;
    const Weights w{1.0 / 3 - 3 * opt.epsilon, 4.0 / 3 - 2 * opt.epsilon, 1 - opt.epsilon};
    const double tail_power = 2.0 + opt.kappa;

    // Frozen linear part 2 t^2 db/dalpha at the horizon.
    Eigen::MatrixXd A = 2.0 * t.back() * t.back() * force_jacobian(tr.ref.back(), Msq);
    Eigen::EigenSolver<Eigen::MatrixXd> es(A);
    Eigen::MatrixXcd V = es.eigenvectors();
    Eigen::VectorXcd ev = es.eigenvalues();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(V);
    const double cond = svd.singularValues()(0) / svd.singularValues()(dim - 1);
    if (!(cond < 1e8)) {
        // Near-defective (eigenvalue -1/4 with a Jordan block): shift by c0 I.
        A += 1e-3 * Eigen::MatrixXd::Identity(dim, dim);
        es.compute(A);
        V = es.eigenvectors();
        ev = es.eigenvalues();
    }
    const Eigen::MatrixXcd Vinv = V.inverse();

    // Reference force and d(lambda~)/dt = m^(2) at P~ with lambda^inf.
    std::vector<std::vector<Vec3>> b2ref(n);
    std::vector<std::vector<double>> ltdot(n);
    for (std::size_t i = 0; i < n; ++i) {
        b2ref[i] = co.b2(tr.ref[i]);
        ltdot[i] = co.m2(tr.ref[i]);
    }

    std::vector<Eigen::VectorXd> x(n, Eigen::VectorXd::Zero(dim)), dx(n, Eigen::VectorXd::Zero(dim));
    std::vector<std::vector<double>> y(n, std::vector<double>(m, 0.0));
    auto assemble = [&](std::size_t i) {
        Params P = tr.tilde[i];
        for (int j = 0; j < m; ++j) {
            P.alpha[j] += x[i].segment<3>(3 * j);
            P.beta[j] += 0.5 * dx[i].segment<3>(3 * j);
            P.lambda[j] += y[i][j];
        }
        return P;
    };
    auto deviations = [&]() {
        std::vector<Params> d(n, zero_like(tr.ref[0]));
        for (std::size_t i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j) {
                d[i].alpha[j] = x[i].segment<3>(3 * j);
                d[i].beta[j] = 0.5 * dx[i].segment<3>(3 * j);
                d[i].lambda[j] = y[i][j];
            }
        return d;
    };

    std::vector<Params> dprev = deviations();
    for (int it = 0; it < opt.max_iter; ++it) {
        // y first, then the force remainder with the updated y when sequential.
        std::vector<std::vector<double>> yn(n, std::vector<double>(m));
        {
            std::vector<std::vector<double>> fy(m, std::vector<double>(n));
            for (std::size_t i = 0; i < n; ++i) {
                const auto Mv = co.M(assemble(i));
                for (int j = 0; j < m; ++j) fy[j][i] = Mv[j] - ltdot[i][j];
            }
            for (int j = 0; j < m; ++j) {
                auto I = improper_tail(t, fy[j], 2.0);
                for (std::size_t i = 0; i < n; ++i) yn[i][j] = -I[i];
            }
        }
        if (opt.sequential) y = yn;
        std::vector<Eigen::VectorXd> F(n, Eigen::VectorXd::Zero(dim));
        for (std::size_t i = 0; i < n; ++i) {
            const auto B = co.B(assemble(i));
            for (int j = 0; j < m; ++j) F[i].segment<3>(3 * j) = 2.0 * (B[j] - b2ref[i][j]);
            F[i] -= A * x[i] / (t[i] * t[i]);
        }
        std::vector<Eigen::VectorXd> xn(n, Eigen::VectorXd::Zero(dim)), dxn(n, Eigen::VectorXd::Zero(dim));
        std::vector<Eigen::VectorXcd> xc(n, Eigen::VectorXcd::Zero(dim)), dxc(n, Eigen::VectorXcd::Zero(dim));
        for (int e = 0; e < dim; ++e) {
            std::vector<cplx> fe(n);
            for (std::size_t i = 0; i < n; ++i) fe[i] = Vinv.row(e) * F[i].cast<cplx>();
            const GreenResult g = green_operator(ev(e), t, fe, opt.kappa, tail_power);
            for (std::size_t i = 0; i < n; ++i) {
                xc[i] += V.col(e) * g.x[i];
                dxc[i] += V.col(e) * g.dx[i];
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            xn[i] = xc[i].real();
            dxn[i] = dxc[i].real();
        }
        x = std::move(xn);
        dx = std::move(dxn);
        y = std::move(yn);
        std::vector<Params> dnew = deviations();
        const double diff = weighted_norm(t, difference(dnew, dprev), w);
        dprev = std::move(dnew);
        record_step(tr, diff, opt);
        if (diff < opt.tol) break;
    }
    tr.P.resize(n);
    for (std::size_t i = 0; i < n; ++i) tr.P[i] = assemble(i);
    tr.weighted_norm = weighted_norm(t, difference(tr.P, tr.ref), w);
    tr.gamma = gamma_integrate(t, tr.P, co);
    return tr;
}

// ---------------------------------------------------------------------------------------------

std::vector<std::vector<double>> gamma_integrate(const std::vector<double>& times, const std::vector<Params>& P,
                                                 const Coefficients& co) {
    const std::size_t n = times.size();
    if (P.size() != n || n == 0) throw TrajectoryError("gamma_integrate: size mismatch");
    const int m = P.front().m();
    std::vector<std::vector<double>> rate(m, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = gamma_rate(P[i], modulation_rhs(P[i], co));
        for (int j = 0; j < m; ++j) rate[j][i] = r[j];
    }
    std::vector<std::vector<double>> out(n, std::vector<double>(m));
    for (int j = 0; j < m; ++j) {
        const auto I = cumulative_from_start(times, rate[j]);
        for (std::size_t i = 0; i < n; ++i) out[i][j] = I[i];
    }
    return out;
}

namespace {

using OdeState = std::vector<double>;

OdeState pack_state(const Params& P, const std::vector<double>& gamma) {
    OdeState s;
    for (int j = 0; j < P.m(); ++j) {
        for (int c = 0; c < 3; ++c) s.push_back(P.alpha[j][c]);
        for (int c = 0; c < 3; ++c) s.push_back(P.beta[j][c]);
        s.push_back(P.lambda[j]);
        s.push_back(gamma[j]);
    }
    return s;
}

void unpack_state(const OdeState& s, Params& P, std::vector<double>& gamma) {
    const int m = static_cast<int>(s.size() / 8);
    P.alpha.resize(m);
    P.beta.resize(m);
    P.lambda.resize(m);
    gamma.resize(m);
    for (int j = 0; j < m; ++j) {
        const double* p = &s[8 * j];
        P.alpha[j] = Vec3(p[0], p[1], p[2]);
        P.beta[j] = Vec3(p[3], p[4], p[5]);
        P.lambda[j] = p[6];
        gamma[j] = p[7];
    }
}

}  // namespace

ModulationState CorrectedTrajectory::state_at(double t) const {
    if (times.empty()) throw TrajectoryError("empty trajectory");
    if (!(t > 0)) throw TrajectoryError("state_at needs t > 0");
    std::size_t k = 0;
    double best = std::abs(std::log(t / times[0]));
    for (std::size_t i = 1; i < times.size(); ++i) {
        const double dist = std::abs(std::log(t / times[i]));
        if (dist < best) {
            best = dist;
            k = i;
        }
    }
    ModulationState out;
    if (t == times[k]) {
        out.P = P[k];
        out.gamma = gamma[k];
        return out;
    }
    OdeState s = pack_state(P[k], gamma[k]);
    const Coefficients& co = coeffs;
    auto sys = [&co](const OdeState& x, OdeState& dxdt, double) {
        Params Q;
        std::vector<double> g;
        unpack_state(x, Q, g);
        const Params d = modulation_rhs(Q, co);
        const auto gr = gamma_rate(Q, d);
        dxdt = pack_state(d, gr);
    };
    auto stepper = odeint::make_controlled(1e-13, 1e-13, odeint::runge_kutta_fehlberg78<OdeState>());
    const double span = t - times[k];
    odeint::integrate_adaptive(stepper, sys, s, times[k], t, span / 16);
    unpack_state(s, out.P, out.gamma);
    return out;
}

CorrectedTrajectory::Deviation CorrectedTrajectory::deviation(std::size_t i) const {
    Deviation d;
    double sq = 0;
    for (int j = 0; j < P[i].m(); ++j) {
        const double da = (P[i].alpha[j] - ref[i].alpha[j]).norm();
        const double db = (P[i].beta[j] - ref[i].beta[j]).norm();
        const double dl = std::abs(P[i].lambda[j] - ref[i].lambda[j]);
        d.alpha = std::max(d.alpha, da);
        d.beta = std::max(d.beta, db);
        d.lambda = std::max(d.lambda, dl);
        sq += da * da + db * db + dl * dl;
    }
    d.total = std::sqrt(sq);
    return d;
}

double fixed_point_residual(const CorrectedTrajectory& traj) {
    const std::size_t n = traj.size();
    if (n < 5) throw TrajectoryError("trajectory too short for the residual check");
    std::vector<double> s(n);
    for (std::size_t i = 0; i < n; ++i) s[i] = std::log(traj.times[i]);
    double worst = 0;
    for (std::size_t i = 2; i + 2 < n; ++i) {
        const std::vector<double> xs(s.begin() + i - 2, s.begin() + i + 3);
        const auto w = fd_weights(s[i], xs, 1)[1];
        const Params F = modulation_rhs(traj.P[i], traj.coeffs);
        for (int j = 0; j < traj.P[i].m(); ++j) {
            Vec3 da = Vec3::Zero(), db = Vec3::Zero();
            double dl = 0;
            for (int q = 0; q < 5; ++q) {
                const Params& Pq = traj.P[i - 2 + q];
                da += w[q] * Pq.alpha[j];
                db += w[q] * Pq.beta[j];
                dl += w[q] * Pq.lambda[j];
            }
            const double ti = traj.times[i];
            da /= ti;
            db /= ti;
            dl /= ti;
            auto rel = [](double err, double scale) { return scale > 1e-300 ? err / scale : 0.0; };
            worst = std::max(worst, rel((da - F.alpha[j]).norm(), F.alpha[j].norm()));
            worst = std::max(worst, rel((db - F.beta[j]).norm(), F.beta[j].norm()));
            worst = std::max(worst, rel(std::abs(dl - F.lambda[j]), std::abs(F.lambda[j])));
        }
    }
    return worst;
}

void write_trajectory_csv(const CorrectedTrajectory& traj, const std::string& file) {
    std::ofstream out(file);
    if (!out) throw TrajectoryError("cannot open " + file);
    out << std::setprecision(17);
    const int m = traj.P.empty() ? 0 : traj.P.front().m();
    out << "t";
    for (int j = 0; j < m; ++j) {
        for (const char* c : {"ax", "ay", "az", "bx", "by", "bz"}) out << ',' << c << j;
        out << ",lambda" << j << ",gamma" << j;
        for (const char* c : {"ref_ax", "ref_ay", "ref_az", "ref_bx", "ref_by", "ref_bz"}) out << ',' << c << j;
        out << ",ref_lambda" << j;
    }
    out << ",dev_alpha,dev_beta,dev_lambda\n";
    for (std::size_t i = 0; i < traj.size(); ++i) {
        out << traj.times[i];
        for (int j = 0; j < m; ++j) {
            const auto& P = traj.P[i];
            const auto& R = traj.ref[i];
            for (int c = 0; c < 3; ++c) out << ',' << P.alpha[j][c];
            for (int c = 0; c < 3; ++c) out << ',' << P.beta[j][c];
            out << ',' << P.lambda[j] << ',' << traj.gamma[i][j];
            for (int c = 0; c < 3; ++c) out << ',' << R.alpha[j][c];
            for (int c = 0; c < 3; ++c) out << ',' << R.beta[j][c];
            out << ',' << R.lambda[j];
        }
        const auto d = traj.deviation(i);
        out << ',' << d.alpha << ',' << d.beta << ',' << d.lambda << '\n';
    }
}

void write_trajectory_json(const CorrectedTrajectory& traj, const std::string& file) {
    nlohmann::json j;
    j["kind"] = to_string(traj.kind);
    j["T0"] = traj.T0;
    j["horizon"] = traj.horizon;
    j["epsilon"] = traj.epsilon;
    j["order"] = traj.coeffs.order();
    j["nodes"] = traj.size();
    j["iterations"] = traj.iterations;
    j["differences"] = traj.differences;
    j["contraction_ratios"] = traj.ratios;
    j["weighted_norm"] = traj.weighted_norm;
    double sup_half = 0, sup_quarter = 0;
    for (std::size_t i = 0; i < traj.size(); ++i) {
        const auto d = traj.deviation(i);
        const double t = traj.times[i];
        sup_half = std::max(sup_half, std::sqrt(t) * (traj.kind == OrbitClass::hyperbolic ? d.total : d.beta + d.lambda));
        sup_quarter = std::max(sup_quarter, std::pow(t, 0.25) * d.alpha);
    }
    j["sup_sqrt_t_deviation"] = sup_half;
    j["sup_t_quarter_alpha_deviation"] = sup_quarter;
    std::ofstream out(file);
    if (!out) throw TrajectoryError("cannot open " + file);
    out << std::setw(2) << j << '\n';
}

}  // namespace hartree
