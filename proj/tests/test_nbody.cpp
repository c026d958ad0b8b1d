#include "hartree/nbody.hpp"

#include <doctest.h>

#include <cmath>

using namespace hartree;

namespace {

constexpr double kMass = 44.0;  // any positive value; the force law only sees mu_k

BodyConfig two_body(double l1, double l2, Vec3 a1, Vec3 a2, Vec3 b1, Vec3 b2, double t0 = 0) {
    BodyConfig c;
    c.lambdas = {l1, l2};
    c.mass_sq = kMass;
    c.alpha0 = {a1, a2};
    c.beta0 = {b1, b2};
    c.t0 = t0;
    return c;
}

double rel_drift(const NBodyPath& p, const std::vector<double>& mu) {
    double e0 = energy(p.alpha[0], p.beta[0], mu);
    double kin = 0;
    for (std::size_t j = 0; j < mu.size(); ++j) kin += mu[j] * p.beta[0][j].squaredNorm();
    double worst = 0;
    for (std::size_t i = 0; i < p.size(); ++i)
        worst = std::max(worst, std::abs(energy(p.alpha[i], p.beta[i], mu) - e0));
    return worst / std::max(std::abs(e0), kin);
}

}  // namespace

TEST_CASE("rhs antisymmetry for a symmetric pair") {
    auto c = two_body(1, 1, Vec3(1, 0.5, 0), Vec3(-1, -0.5, 0), Vec3(0, 0.2, 0.1), Vec3(0, -0.2, -0.1));
    auto d = rhs(pack(c.alpha0, c.beta0), c.masses());
    for (int i = 0; i < 3; ++i) {
        CHECK(d[i] == doctest::Approx(-d[3 + i]));
        CHECK(d[6 + i] == doctest::Approx(-d[9 + i]));
    }
}

TEST_CASE("single body has no force") {
    auto d = rhs({1, 2, 3, 0.5, 0, 0}, {3.0});
    CHECK(d[0] == 1.0);
    CHECK(d[3] == 0.0);
    CHECK(d[4] == 0.0);
    CHECK(d[5] == 0.0);
}

TEST_CASE("equilateral triple points every force at the centroid") {
    std::vector<Vec3> a;
    for (int j = 0; j < 3; ++j) a.emplace_back(std::cos(2 * M_PI * j / 3), std::sin(2 * M_PI * j / 3), 0.3);
    std::vector<double> mu(3, 2.5);
    auto f = forces(a, mu);
    Vec3 centroid = (a[0] + a[1] + a[2]) / 3;
    // side sqrt(3); two pulls of mu/3 at 30 degrees give mu/sqrt(3) toward the centroid
    double expected = 2.5 / std::sqrt(3.0);
    for (int j = 0; j < 3; ++j) {
        Vec3 dir = (centroid - a[j]).normalized();
        CHECK(f[j].norm() == doctest::Approx(expected).epsilon(1e-14));
        CHECK(f[j].dot(dir) == doctest::Approx(expected).epsilon(1e-14));
    }
}

TEST_CASE("collision is detected") {
    auto c = two_body(1, 1, Vec3(1, 0, 0), Vec3(-1, 0, 0), Vec3::Zero(), Vec3::Zero());
    CHECK_THROWS_AS(integrate(c, 100.0), CollisionError);
    CHECK_THROWS_AS(rhs(pack(c.alpha0, c.beta0), c.masses(), 5.0), CollisionError);
}

TEST_CASE("circular two-body orbit has the Kepler period") {
    // relative motion obeys r'' = -2 (mu1 + mu2) r / |r|^3
    auto c = two_body(1.0, 2.0, Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero());
    auto mu = c.masses();
    const double d = 7.0, mt = mu[0] + mu[1];
    const double omega = std::sqrt(2.0 * mt / (d * d * d));
    c.alpha0 = {Vec3(d * mu[1] / mt, 0, 0), Vec3(-d * mu[0] / mt, 0, 0)};
    for (int j = 0; j < 2; ++j) c.beta0[j] = 0.5 * omega * Vec3(-c.alpha0[j].y(), c.alpha0[j].x(), 0);
    const double period = 2 * M_PI / omega;
    auto p = integrate_at(c, {0.5 * period, period}, 1e-13);
    REQUIRE(p.size() == 2);
    CHECK((p.alpha[0][0] + c.alpha0[0]).norm() < 1e-6 * d);
    CHECK((p.alpha[1][0] - c.alpha0[0]).norm() < 1e-6 * d);
    CHECK((p.alpha[1][1] - c.alpha0[1]).norm() < 1e-6 * d);
}

TEST_CASE("energy and weighted momentum are conserved") {
    BodyConfig c;
    c.lambdas = {1.0, 0.7, 1.4};
    c.mass_sq = kMass;
    c.alpha0 = {Vec3(10, 0, 0), Vec3(-5, 8, 1), Vec3(-3, -9, -2)};
    c.beta0 = {Vec3(0.1, 0.4, 0), Vec3(-0.3, 0, 0.2), Vec3(0.2, -0.2, -0.1)};
    auto p = integrate(c, 1000.0, 1e-13);
    auto mu = c.masses();
    CHECK(rel_drift(p, mu) < 1e-9);
    Vec3 p0 = weighted_momentum(p.beta.front(), c.lambdas);
    Vec3 p1 = weighted_momentum(p.beta.back(), c.lambdas);
    CHECK((p1 - p0).norm() < 1e-10 * (1 + p0.norm()));
}

TEST_CASE("forward then backward returns the initial state") {
    BodyConfig c;
    c.lambdas = {1.0, 1.3};
    c.mass_sq = kMass;
    c.alpha0 = {Vec3(6, 1, 0), Vec3(-6, -1, 0)};
    c.beta0 = {Vec3(0, 0.6, 0), Vec3(0, -0.4, 0.1)};
    auto fwd = integrate_at(c, {50.0}, 1e-14);
    BodyConfig back = c;
    back.t0 = 50.0;
    back.alpha0 = fwd.alpha.back();
    back.beta0 = fwd.beta.back();
    auto bwd = integrate_at(back, {0.0}, 1e-14);
    for (int j = 0; j < 2; ++j) {
        CHECK((bwd.alpha.back()[j] - c.alpha0[j]).norm() < 1e-8);
        CHECK((bwd.beta.back()[j] - c.beta0[j]).norm() < 1e-8);
    }
}

TEST_CASE("hyperbolic leading-order data") {
    AsymptoticTargets tg;
    tg.a = {Vec3(1, 0, 0), Vec3(-1, 0, 0)};
    auto c = make_asymptotic_initial_data(OrbitClass::hyperbolic, tg, {1, 1}, kMass, 50.0);
    CHECK(c.alpha0[0].isApprox(Vec3(50, 0, 0)));
    CHECK(c.beta0[1].isApprox(Vec3(-0.5, 0, 0)));
    CHECK(c.clusters.size() == 2);
    tg.a[1] = tg.a[0];
    CHECK_THROWS_AS(make_asymptotic_initial_data(OrbitClass::hyperbolic, tg, {1, 1}, kMass, 50.0), ConfigError);
}

TEST_CASE("parabolic two-body escape follows c t^(2/3)") {
    const std::vector<double> lam = {1.0, 2.0};
    BodyConfig probe;
    probe.lambdas = lam;
    probe.mass_sq = kMass;
    auto mu = probe.masses();
    const double mt = mu[0] + mu[1];
    AsymptoticTargets tg;
    tg.b = {Vec3(mu[1] / mt, 0, 0), Vec3(-mu[0] / mt, 0, 0)};
    auto c = make_asymptotic_initial_data(OrbitClass::parabolic, tg, lam, kMass, 10.0);
    // r = c t^(2/3) solves r'' = -2 mt / r^2 exactly when c^3 = 9 mt
    const double cc = std::cbrt(9.0 * mt);
    CHECK((c.alpha0[0] - c.alpha0[1]).norm() == doctest::Approx(cc * std::cbrt(100.0)).epsilon(1e-12));
    CHECK(std::abs(energy(c.alpha0, c.beta0, mu)) < 1e-12 * mt);
    auto p = integrate(c, 1e4, 1e-13);
    auto rates = fit_asymptotic_rates(p, 10.0);
    REQUIRE(rates.size() == 1);
    CHECK(rates[0].slope == doctest::Approx(2.0 / 3.0).epsilon(1e-6));
    CHECK(rates[0].prefactor == doctest::Approx(cc).epsilon(1e-5));
    CHECK(rates[0].classified == OrbitClass::parabolic);
}

TEST_CASE("non-central parabolic shape is rejected") {
    AsymptoticTargets tg;
    tg.b = {Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(-1, -1, 0)};
    CHECK_THROWS_AS(make_asymptotic_initial_data(OrbitClass::parabolic, tg, {1, 1, 1}, kMass, 10.0), ConfigError);
}

TEST_CASE("mixed data builds one cluster per distinct a") {
    AsymptoticTargets tg;
    tg.a = {Vec3(3, 0, 0), Vec3(3, 0, 0), Vec3(-3, 0, 0), Vec3(-3, 0, 0)};
    tg.b = {Vec3(0, 0.5, 0), Vec3(0, -0.5, 0), Vec3(0, 0, 0.5), Vec3(0, 0, -0.5)};
    auto c = make_asymptotic_initial_data(OrbitClass::mixed, tg, {1, 1, 1, 1}, kMass, 100.0);
    REQUIRE(c.clusters.size() == 2);
    CHECK(c.clusters[0] == std::vector<int>{0, 1});
    CHECK(c.clusters[1] == std::vector<int>{2, 3});
}

TEST_CASE("rate fit needs two decades") {
    auto c = two_body(1, 1, Vec3(10, 0, 0), Vec3(-10, 0, 0), Vec3(1, 0, 0), Vec3(-1, 0, 0), 1.0);
    auto p = integrate(c, 50.0);
    CHECK_THROWS_AS(fit_asymptotic_rates(p), std::range_error);
}

TEST_CASE("hyperbolic and mixed rate classification") {
    AsymptoticTargets h;
    h.a = {Vec3(1, 0, 0), Vec3(-0.5, 0.8, 0), Vec3(-0.5, -0.8, 0.1)};
    auto ch = make_asymptotic_initial_data(OrbitClass::hyperbolic, h, {1, 1, 1}, kMass, 100.0);
    auto ph = integrate(ch, 1e4, 1e-12);
    for (const auto& r : fit_asymptotic_rates(ph)) {
        MESSAGE("hyperbolic pair " << r.j << r.k << " slope " << r.slope);
        CHECK(std::abs(r.slope - 1.0) < 0.02);
    }

    AsymptoticTargets mx;
    mx.a = {Vec3(3, 0, 0), Vec3(3, 0, 0), Vec3(-3, 0, 0), Vec3(-3, 0, 0)};
    mx.b = {Vec3(0, 0.5, 0), Vec3(0, -0.5, 0), Vec3(0, 0, 0.5), Vec3(0, 0, -0.5)};
    auto cm = make_asymptotic_initial_data(OrbitClass::mixed, mx, {1, 1, 1, 1}, kMass, 100.0);
    auto pm = integrate(cm, 1e4, 1e-12);
    for (const auto& r : fit_asymptotic_rates(pm)) {
        MESSAGE("mixed pair " << r.j << r.k << " slope " << r.slope);
        CHECK(std::abs(r.slope - (r.same_cluster ? 2.0 / 3.0 : 1.0)) < 0.02);
    }
}
