#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>

#include <stdexcept>
#include <vector>

namespace hartree {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;

// Radial nodes r_i = r(xi_i) on a uniform computational grid xi_i = i*h in [0,1].
// The map is odd in xi, so a function with parity p in r has parity p in xi and
// ghost nodes below r = 0 are obtained by reflection.
struct RadialGrid {
    std::vector<double> r;
    std::vector<double> dr;   // dr/dxi
    std::vector<double> d2r;  // d2r/dxi2
    std::vector<double> w;    // trapezoid weights for int_0^rmax f dr
    SpMat cell_even, cell_odd; // row i: int over [r_i, r_{i+1}] of an 8-node interpolant
    double r_max = 0;
    double stretch = 0;       // 0 means uniform
    double h = 0;
    int n_points = 0;

    static RadialGrid sinh_map(int n, double r_max, double stretch = 2.0);
    static RadialGrid uniform(int n, double r_max);

    double xi_of(double radius) const;
    double dr_at(double xi) const;
    int size() const { return n_points; }
    void build_cells();
};

class RadialError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Finite-difference weights (Fornberg) for derivatives 0..m at x0 on nodes x.
std::vector<std::vector<double>> fd_weights(double x0, const std::vector<double>& x, int m);

// 8th-order differentiation in r. parity = +1 / -1 fixes the ghost reflection at r = 0.
struct RadialDiff {
    SpMat d1;  // d/dr
    SpMat d2;  // d2/dr2
};
RadialDiff radial_diff(const RadialGrid& g, int parity);

// Radial part of the Laplacian on degree ell: f'' + 2f'/r - ell(ell+1) f / r^2.
// Row 0 holds the r -> 0 limit (3 f''(0) for ell = 0, zero otherwise).
SpMat radial_laplacian(const RadialGrid& g, int ell);

// Outward log-derivative row for a one-sided Robin condition f' + kappa f = 0 at r_max.
std::vector<std::pair<int, double>> robin_row(const RadialGrid& g, int parity, double kappa);

// int_0^{r_i} f dr for every node, with the integrand parity used for ghost reflection.
Vec cumulative_integral(const RadialGrid& g, const Vec& f, int parity);
Mat cumulative_matrix(const RadialGrid& g, int parity);

// int_{R^3} f(|x|) dx for a radial profile, and the r^2 weighted dot product.
double integrate_r2(const RadialGrid& g, const Vec& f);
double dot_r2(const RadialGrid& g, const Vec& a, const Vec& b);

constexpr int kMaxPotentialDegree = 4;

// Radial factor of Delta^{-1}(rho Y_lm).
Vec newtonian_potential_radial(const Vec& density, int ell, const RadialGrid& g);
// Same map as a dense matrix acting on density samples.
Mat potential_matrix(const RadialGrid& g, int ell);

Vec to_vec(const std::vector<double>& v);

// Cubic B-spline of a nodal profile, uniform in the computational variable xi.
class RadialSpline {
public:
    RadialSpline() = default;
    RadialSpline(const RadialGrid& g, const Vec& f, int parity);
    double operator()(double radius) const;
    double prime(double radius) const;

private:
    boost::math::interpolators::cardinal_cubic_b_spline<double> spline_;
    double r_max_ = 0, stretch_ = 0;
    int parity_ = 1;
};

}  // namespace hartree
