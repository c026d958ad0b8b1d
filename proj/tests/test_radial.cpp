#include "hartree/radial.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <doctest.h>

#include <cmath>

using namespace hartree;
using boost::math::quadrature::gauss_kronrod;

namespace {

// Radial factor of Delta^{-1}(rho Y_lm) by adaptive quadrature of the Green kernel.
double potential_oracle(const std::function<double(double)>& rho, int ell, double r) {
    auto inner = [&](double s) { return std::pow(s, ell + 2) * rho(s); };
    auto outer = [&](double s) { return std::pow(s, 1 - ell) * rho(s); };
    double a = gauss_kronrod<double, 61>::integrate(inner, 0.0, r, 15, 1e-14);
    double b = gauss_kronrod<double, 61>::integrate(outer, r, 30.0, 15, 1e-14);
    return -(std::pow(r, -ell - 1) * a + std::pow(r, ell) * b) / (2 * ell + 1);
}

}  // namespace

TEST_CASE("grid construction") {
    auto g = RadialGrid::sinh_map(512, 20.0);
    CHECK(g.size() == 512);
    CHECK(g.r.front() == 0.0);
    CHECK(g.r.back() == doctest::Approx(20.0));
    for (int i = 1; i < g.size(); ++i) CHECK(g.r[i] > g.r[i - 1]);
    CHECK(g.xi_of(g.r[100]) == doctest::Approx(100 * g.h));
    CHECK_THROWS_AS(RadialGrid::sinh_map(100, 20.0), RadialError);
}

TEST_CASE("finite-difference weights reproduce polynomials") {
    std::vector<double> x = {-2, -1, 0, 1, 2};
    auto w = fd_weights(0.0, x, 2);
    double d1 = 0, d2 = 0;
    for (int i = 0; i < 5; ++i) {
        double f = 1 + x[i] + 3 * x[i] * x[i] - x[i] * x[i] * x[i];
        d1 += w[1][i] * f;
        d2 += w[2][i] * f;
    }
    CHECK(d1 == doctest::Approx(1.0));
    CHECK(d2 == doctest::Approx(6.0));
}

TEST_CASE("laplacian of a Gaussian") {
    auto g = RadialGrid::sinh_map(1024, 20.0);
    Vec f(g.size()), ex(g.size());
    for (int i = 0; i < g.size(); ++i) {
        double r = g.r[i];
        f[i] = std::exp(-r * r);
        ex[i] = (4 * r * r - 6) * std::exp(-r * r);
    }
    Vec lf = radial_laplacian(g, 0) * f;
    CHECK((lf - ex).head(g.size() - 8).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("laplacian converges at high order") {
    auto err = [](int n) {
        auto g = RadialGrid::sinh_map(n, 20.0);
        Vec f(g.size()), ex(g.size());
        for (int i = 0; i < g.size(); ++i) {
            double r = g.r[i];
            f[i] = std::exp(-r * r);
            ex[i] = (4 * r * r - 6) * std::exp(-r * r);
        }
        Vec lf = radial_laplacian(g, 0) * f;
        return (lf - ex).head(g.size() - 8).cwiseAbs().maxCoeff();
    };
    double e1 = err(256), e2 = err(512);
    MESSAGE("laplacian errors " << e1 << " " << e2);
    CHECK(e1 / e2 > 64.0);
}

TEST_CASE("integrals") {
    auto g = RadialGrid::sinh_map(1024, 20.0);
    Vec f(g.size());
    for (int i = 0; i < g.size(); ++i) f[i] = std::exp(-g.r[i] * g.r[i]);
    CHECK(integrate_r2(g, f) == doctest::Approx(std::pow(M_PI, 1.5)).epsilon(1e-12));
    Vec c = cumulative_integral(g, f, 1);
    CHECK(c[500] == doctest::Approx(0.5 * std::sqrt(M_PI) * std::erf(g.r[500])).epsilon(1e-12));
}

TEST_CASE("monopole potential of a Gaussian") {
    auto g = RadialGrid::sinh_map(1024, 20.0);
    Vec rho(g.size());
    for (int i = 0; i < g.size(); ++i) rho[i] = std::exp(-g.r[i] * g.r[i]);
    Vec phi = newtonian_potential_radial(rho, 0, g);
    for (int i : {0, 100, 400, 800, 1023}) {
        double r = g.r[i];
        double exact = r > 0 ? -std::pow(M_PI, 1.5) * std::erf(r) / (4 * M_PI * r) : -0.5;
        CHECK(phi[i] == doctest::Approx(exact).epsilon(1e-10));
    }
    CHECK(newtonian_potential_radial(Vec::Zero(g.size()), 0, g).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("higher-degree potentials against quadrature") {
    auto g = RadialGrid::sinh_map(1024, 20.0);
    for (int ell = 0; ell <= kMaxPotentialDegree; ++ell) {
        auto rho = [&](double s) { return std::pow(s, ell) * std::exp(-s * s / 2); };
        Vec d(g.size());
        for (int i = 0; i < g.size(); ++i) d[i] = rho(g.r[i]);
        Vec phi = newtonian_potential_radial(d, ell, g);
        for (int i : {50, 300, 700, 1000}) {
            double ex = potential_oracle(rho, ell, g.r[i]);
            CHECK(phi[i] == doctest::Approx(ex).epsilon(1e-9));
        }
    }
    Vec d = Vec::Ones(g.size());
    CHECK_THROWS_AS(newtonian_potential_radial(d, kMaxPotentialDegree + 1, g), RadialError);
}

TEST_CASE("dense potential matrix matches the vector form") {
    auto g = RadialGrid::sinh_map(256, 20.0);
    Vec rho(g.size());
    for (int i = 0; i < g.size(); ++i) rho[i] = g.r[i] * std::exp(-g.r[i]);
    Mat p = potential_matrix(g, 1);
    CHECK((p * rho - newtonian_potential_radial(rho, 1, g)).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("spline interpolation") {
    auto g = RadialGrid::sinh_map(1024, 20.0);
    Vec f(g.size());
    for (int i = 0; i < g.size(); ++i) f[i] = std::exp(-g.r[i] * g.r[i] / 3);
    RadialSpline s(g, f, 1);
    for (double r : {0.0, 0.013, 0.77, 2.5, 9.1, 19.99}) {
        CHECK(s(r) == doctest::Approx(std::exp(-r * r / 3)).epsilon(1e-7));
        CHECK(s.prime(r) == doctest::Approx(-2 * r / 3 * std::exp(-r * r / 3)).epsilon(1e-5));
    }
}
