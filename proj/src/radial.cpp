#include "hartree/radial.hpp"

#include <cmath>
#include <limits>

namespace hartree {

namespace {

constexpr int kHalf = 4;  // 9-point stencils, 8-node interpolants

// Node j of the extended grid folded back onto [0, n). Ghost nodes below zero
// carry the parity sign.
std::pair<int, double> fold(int j, int parity) {
    if (j >= 0) return {j, 1.0};
    return {-j, static_cast<double>(parity)};
}

std::vector<int> stencil(int i, int n, int width, int left) {
    int first = i - left;
    if (first + width > n) first = n - width;
    std::vector<int> s(width);
    for (int k = 0; k < width; ++k) s[k] = first + k;
    return s;
}

const double kGaussX[8] = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
                           -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
                           0.7966664774136267,  0.9602898564975363};
const double kGaussW[8] = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
                           0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
                           0.2223810344533745, 0.1012285362903763};

// Integration weights of int_{xi_i}^{xi_{i+1}} over an 8-node interpolant.
std::vector<std::pair<int, double>> interval_weights(const RadialGrid& g, int i, int parity) {
    auto nodes = stencil(i, g.n_points, 2 * kHalf, kHalf - 1);
    std::vector<double> x(nodes.size());
    for (size_t k = 0; k < nodes.size(); ++k) x[k] = nodes[k] * g.h;
    std::vector<double> acc(nodes.size(), 0.0);
    const double a = i * g.h, b = (i + 1) * g.h;
    for (int q = 0; q < 8; ++q) {
        double xq = 0.5 * (a + b) + 0.5 * (b - a) * kGaussX[q];
        auto c = fd_weights(xq, x, 0);
        for (size_t k = 0; k < nodes.size(); ++k) acc[k] += 0.5 * (b - a) * kGaussW[q] * c[0][k];
    }
    std::vector<std::pair<int, double>> out;
    for (size_t k = 0; k < nodes.size(); ++k) {
        auto [col, sgn] = fold(nodes[k], parity);
        out.emplace_back(col, sgn * acc[k] * g.dr[col]);
    }
    return out;
}

double map_xi(double radius, double r_max, double stretch) {
    if (stretch == 0) return radius / r_max;
    return std::asinh(radius * std::sinh(stretch) / r_max) / stretch;
}

double map_dr(double xi, double r_max, double stretch) {
    if (stretch == 0) return r_max;
    return r_max / std::sinh(stretch) * stretch * std::cosh(stretch * xi);
}

}  // namespace

RadialGrid RadialGrid::sinh_map(int n, double r_max, double stretch) {
    if (n < 256) throw RadialError("radial grid needs at least 256 points");
    if (r_max <= 0 || stretch <= 0) throw RadialError("radial grid needs r_max > 0 and stretch > 0");
    RadialGrid g;
    g.n_points = n;
    g.r_max = r_max;
    g.stretch = stretch;
    g.h = 1.0 / (n - 1);
    const double s = stretch, norm = r_max / std::sinh(s);
    g.r.resize(n);
    g.dr.resize(n);
    g.d2r.resize(n);
    g.w.resize(n);
    for (int i = 0; i < n; ++i) {
        double xi = i * g.h;
        g.r[i] = norm * std::sinh(s * xi);
        g.dr[i] = norm * s * std::cosh(s * xi);
        g.d2r[i] = norm * s * s * std::sinh(s * xi);
        g.w[i] = g.h * g.dr[i];
    }
    g.r[n - 1] = r_max;
    g.w[0] *= 0.5;
    g.w[n - 1] *= 0.5;
    g.build_cells();
    return g;
}

RadialGrid RadialGrid::uniform(int n, double r_max) {
    if (n < 256) throw RadialError("radial grid needs at least 256 points");
    if (r_max <= 0) throw RadialError("radial grid needs r_max > 0");
    RadialGrid g;
    g.n_points = n;
    g.r_max = r_max;
    g.h = 1.0 / (n - 1);
    g.r.resize(n);
    g.dr.assign(n, r_max);
    g.d2r.assign(n, 0.0);
    g.w.assign(n, g.h * r_max);
    for (int i = 0; i < n; ++i) g.r[i] = r_max * i * g.h;
    g.w[0] *= 0.5;
    g.w[n - 1] *= 0.5;
    g.build_cells();
    return g;
}

void RadialGrid::build_cells() {
    for (int parity : {1, -1}) {
        std::vector<Eigen::Triplet<double>> t;
        for (int i = 0; i + 1 < n_points; ++i)
            for (auto& [col, wt] : interval_weights(*this, i, parity)) t.emplace_back(i, col, wt);
        SpMat& m = parity > 0 ? cell_even : cell_odd;
        m.resize(n_points - 1, n_points);
        m.setFromTriplets(t.begin(), t.end());
    }
}

double RadialGrid::xi_of(double radius) const { return map_xi(radius, r_max, stretch); }

double RadialGrid::dr_at(double xi) const { return map_dr(xi, r_max, stretch); }

std::vector<std::vector<double>> fd_weights(double x0, const std::vector<double>& x, int m) {
    const int n = static_cast<int>(x.size());
    std::vector<std::vector<double>> c(m + 1, std::vector<double>(n, 0.0));
    double c1 = 1.0, c4 = x[0] - x0;
    c[0][0] = 1.0;
    for (int i = 1; i < n; ++i) {
        int mn = std::min(i, m);
        double c2 = 1.0, c5 = c4;
        c4 = x[i] - x0;
        for (int j = 0; j < i; ++j) {
            double c3 = x[i] - x[j];
            c2 *= c3;
            if (j == i - 1) {
                for (int k = mn; k >= 1; --k)
                    c[k][i] = c1 * (k * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for (int k = mn; k >= 1; --k) c[k][j] = (c4 * c[k][j] - k * c[k - 1][j]) / c3;
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    return c;
}

RadialDiff radial_diff(const RadialGrid& g, int parity) {
    const int n = g.n_points;
    std::vector<Eigen::Triplet<double>> t1, t2;
    for (int i = 0; i < n; ++i) {
        auto nodes = stencil(i, n, 2 * kHalf + 1, kHalf);
        std::vector<double> x(nodes.size());
        for (size_t k = 0; k < nodes.size(); ++k) x[k] = nodes[k] * g.h;
        auto c = fd_weights(i * g.h, x, 2);
        const double j1 = g.dr[i], j2 = g.d2r[i];
        for (size_t k = 0; k < nodes.size(); ++k) {
            auto [col, sgn] = fold(nodes[k], parity);
            double a1 = sgn * c[1][k] / j1;
            double a2 = sgn * (c[2][k] - (j2 / j1) * c[1][k]) / (j1 * j1);
            t1.emplace_back(i, col, a1);
            t2.emplace_back(i, col, a2);
        }
    }
    RadialDiff d;
    d.d1.resize(n, n);
    d.d2.resize(n, n);
    d.d1.setFromTriplets(t1.begin(), t1.end());
    d.d2.setFromTriplets(t2.begin(), t2.end());
    d.d1.prune(0.0);
    d.d2.prune(0.0);
    return d;
}

SpMat radial_laplacian(const RadialGrid& g, int ell) {
    const int n = g.n_points;
    const int parity = (ell % 2 == 0) ? 1 : -1;
    RadialDiff d = radial_diff(g, parity);
    std::vector<Eigen::Triplet<double>> t;
    const double ll = ell * (ell + 1.0);
    for (int k = 0; k < d.d2.outerSize(); ++k)
        for (SpMat::InnerIterator it(d.d2, k); it; ++it) {
            if (it.row() == 0) {
                if (ell == 0) t.emplace_back(0, it.col(), 3.0 * it.value());
            } else {
                t.emplace_back(it.row(), it.col(), it.value());
            }
        }
    for (int k = 0; k < d.d1.outerSize(); ++k)
        for (SpMat::InnerIterator it(d.d1, k); it; ++it)
            if (it.row() > 0) t.emplace_back(it.row(), it.col(), 2.0 / g.r[it.row()] * it.value());
    if (ell > 0)
        for (int i = 1; i < n; ++i) t.emplace_back(i, i, -ll / (g.r[i] * g.r[i]));
    SpMat lap(n, n);
    lap.setFromTriplets(t.begin(), t.end());
    lap.prune(0.0);
    return lap;
}

std::vector<std::pair<int, double>> robin_row(const RadialGrid& g, int parity, double kappa) {
    const int n = g.n_points, i = n - 1;
    auto nodes = stencil(i, n, 2 * kHalf + 1, kHalf);
    std::vector<double> x(nodes.size());
    for (size_t k = 0; k < nodes.size(); ++k) x[k] = nodes[k] * g.h;
    auto c = fd_weights(i * g.h, x, 1);
    std::vector<std::pair<int, double>> row;
    for (size_t k = 0; k < nodes.size(); ++k) {
        auto [col, sgn] = fold(nodes[k], parity);
        double v = sgn * c[1][k] / g.dr[i];
        if (col == i) v += kappa;
        row.emplace_back(col, v);
    }
    return row;
}

Vec cumulative_integral(const RadialGrid& g, const Vec& f, int parity) {
    const int n = g.n_points;
    Vec cells = (parity > 0 ? g.cell_even : g.cell_odd) * f;
    Vec out = Vec::Zero(n);
    for (int i = 0; i + 1 < n; ++i) out[i + 1] = out[i] + cells[i];
    return out;
}

Mat cumulative_matrix(const RadialGrid& g, int parity) {
    const int n = g.n_points;
    const SpMat& cells = parity > 0 ? g.cell_even : g.cell_odd;
    Mat c = Mat::Zero(n, n);
    for (int i = 0; i + 1 < n; ++i) c.row(i + 1) = c.row(i) + Eigen::RowVectorXd(cells.row(i));
    return c;
}

double integrate_r2(const RadialGrid& g, const Vec& f) {
    Vec r2f(g.n_points);
    for (int i = 0; i < g.n_points; ++i) r2f[i] = g.r[i] * g.r[i] * f[i];
    return 4.0 * M_PI * (g.cell_even * r2f).sum();
}

double dot_r2(const RadialGrid& g, const Vec& a, const Vec& b) {
    return integrate_r2(g, a.cwiseProduct(b));
}

Vec newtonian_potential_radial(const Vec& density, int ell, const RadialGrid& g) {
    if (ell < 0 || ell > kMaxPotentialDegree)
        throw RadialError("unsupported harmonic degree " + std::to_string(ell));
    const int n = g.n_points;
    if (density.size() != n) throw RadialError("density size does not match grid");
    Vec inner(n), outer(n);
    for (int i = 0; i < n; ++i) {
        double s = g.r[i];
        inner[i] = std::pow(s, ell + 2) * density[i];
        outer[i] = (i == 0 && ell > 1) ? 0.0 : std::pow(s, 1 - ell) * density[i];
    }
    Vec a = cumulative_integral(g, inner, 1);
    Vec b = cumulative_integral(g, outer, -1);
    const double btot = b[n - 1];
    Vec phi(n);
    const double pre = -1.0 / (2 * ell + 1);
    phi[0] = (ell == 0) ? -btot : 0.0;
    for (int i = 1; i < n; ++i) {
        double r = g.r[i];
        phi[i] = pre * (a[i] / std::pow(r, ell + 1) + std::pow(r, ell) * (btot - b[i]));
    }
    return phi;
}

Mat potential_matrix(const RadialGrid& g, int ell) {
    if (ell < 0 || ell > kMaxPotentialDegree)
        throw RadialError("unsupported harmonic degree " + std::to_string(ell));
    const int n = g.n_points;
    Mat ca = cumulative_matrix(g, 1);
    Mat cb = cumulative_matrix(g, -1);
    Vec sin(n), sout(n);
    for (int i = 0; i < n; ++i) {
        sin[i] = std::pow(g.r[i], ell + 2);
        sout[i] = (i == 0 && ell > 1) ? 0.0 : std::pow(g.r[i], 1 - ell);
    }
    Mat p(n, n);
    const double pre = -1.0 / (2 * ell + 1);
    for (int i = 0; i < n; ++i) {
        if (i == 0) {
            p.row(0) = (ell == 0) ? Eigen::RowVectorXd(-cb.row(n - 1).cwiseProduct(sout.transpose()))
                                  : Eigen::RowVectorXd::Zero(n);
            continue;
        }
        double r = g.r[i];
        p.row(i) = pre * (ca.row(i).cwiseProduct(sin.transpose()) / std::pow(r, ell + 1) +
                          std::pow(r, ell) * (cb.row(n - 1) - cb.row(i)).cwiseProduct(sout.transpose()));
    }
    return p;
}

Vec to_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), v.size()); }

RadialSpline::RadialSpline(const RadialGrid& g, const Vec& f, int parity)
    : spline_(f.data(), static_cast<size_t>(f.size()), 0.0, g.h, parity > 0 ? 0.0 : std::numeric_limits<double>::quiet_NaN()),
      r_max_(g.r_max),
      stretch_(g.stretch),
      parity_(parity) {}

double RadialSpline::operator()(double radius) const {
    double r = std::abs(radius);
    double v = spline_(map_xi(std::min(r, r_max_), r_max_, stretch_));
    return (radius < 0 && parity_ < 0) ? -v : v;
}

double RadialSpline::prime(double radius) const {
    double xi = map_xi(std::min(std::abs(radius), r_max_), r_max_, stretch_);
    double d = spline_.prime(xi) / map_dr(xi, r_max_, stretch_);
    return (radius < 0 && parity_ > 0) ? -d : d;
}

}  // namespace hartree
