#include "hartree/nbody.hpp"
#include "hartree/profiles.hpp"

#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>

using namespace hartree;

namespace {

std::shared_ptr<const GroundState> state() {
    static auto gs = std::make_shared<const GroundState>(solve_ground_state(RadialGrid::sinh_map(2048, 20.0)));
    return gs;
}

const ProfileSet& profiles3() {
    static const ProfileSet p(3, state());
    return p;
}

Params two_body(double d) {
    Params P;
    P.alpha = {Vec3(0.3 * d, 0.8 * d, -0.52 * d), Vec3(-0.2 * d, 0.1 * d, 0.3 * d)};
    P.beta = {Vec3(0.11, -0.05, 0.02), Vec3(-0.03, 0.07, -0.04)};
    P.lambda = {1.0, 1.3};
    return P;
}

Params three_body(double s) {
    Params P;
    P.alpha = {s * Vec3(1.0, 0.2, -0.3), s * Vec3(-0.6, 0.9, 0.1), s * Vec3(-0.1, -0.8, 0.5)};
    P.beta = {Vec3(0.05, 0.02, -0.01), Vec3(-0.04, 0.03, 0.06), Vec3(0.01, -0.07, 0.02)};
    P.lambda = {0.9, 1.1, 1.25};
    return P;
}

// Interior sup norm, skipping the boundary rows.
double interior_max(const Vec& v) { return v.segment(1, v.size() - 3).cwiseAbs().maxCoeff(); }

Vec smooth_random(const RadialGrid& g, int ell, std::mt19937& rng) {
    std::uniform_real_distribution<double> u(-1, 1);
    Vec f = Vec::Zero(g.size());
    for (int k = 0; k < 4; ++k) {
        double a = u(rng), w = 0.3 + 0.2 * (k + u(rng));
        for (int i = 0; i < g.size(); ++i) f[i] += a * std::pow(g.r[i], ell) * std::exp(-w * g.r[i] * g.r[i]);
    }
    return f;
}

Vec project_out(const RadialGrid& g, const Vec& f, const Vec& k) {
    return f - (dot_r2(g, f, k) / dot_r2(g, k, k)) * k;
}

}  // namespace

TEST_CASE("multipole terms sum to the Coulomb kernel") {
    const Vec3 alpha(3.0, -4.0, 12.0);
    const Vec3 dir = Vec3(0.4, 0.7, -0.2).normalized();
    for (double eps : {0.1, 0.05}) {
        const Vec3 zeta = eps * alpha.norm() * dir;
        const double exact = 1.0 / (alpha - zeta).norm();
        double sum = 0;
        for (int n = 1; n <= 4; ++n) {
            sum += multipole_F(n, alpha, zeta);
            const double err = std::abs(exact - sum) * alpha.norm();
            CHECK(err <= 1.5 * std::pow(eps, n));
        }
    }
    CHECK(multipole_F(1, alpha, Vec3::Zero()) == doctest::Approx(1.0 / 13.0));
    CHECK_THROWS_AS(multipole_F(5, alpha, alpha), ProfileError);
    CHECK_THROWS_AS(multipole_F(1, Vec3::Zero(), alpha), ProfileError);
}

TEST_CASE("psi_n reproduces the exterior potential of the other soliton") {
    const auto& gs = *state();
    Params P = two_body(20.0);
    const Vec3 a = P.alpha[0] - P.alpha[1];
    const double lj = P.lambda[0], lk = P.lambda[1];
    HarmonicProfile psi[5];
    for (int n = 1; n <= 4; ++n) psi[n] = psi_n(n, 0, 1, P, gs);
    CHECK(psi[1].terms[0].ell == 0);
    CHECK(psi[3].terms[0].ell == 2);
    for (const Vec3& y : {Vec3(0.5, -0.3, 1.0), Vec3(-1.5, 0.8, 0.2), Vec3(0.0, 0.0, 0.7)}) {
        // Exact rescaled potential of |Q|^2 placed at alpha_k, seen from frame j.
        const double dist = (a + lj * y).norm() / lk;
        const double exact = std::pow(lj / lk, 2) * -gs.mass_sq / (4 * M_PI * dist);
        double sum = 0;
        for (int n = 1; n <= 4; ++n) {
            sum += psi[n].value(gs, y);
            const double eps = lj * y.norm() / a.norm();
            CHECK(std::abs(sum - exact) <= 1.5 * std::abs(exact) * std::pow(eps, n));
        }
    }
    CHECK_THROWS_AS(psi_n(1, 0, 0, P, gs), ProfileError);
}

TEST_CASE("L+ and L- kernels and scaling identity") {
    const auto& gs = *state();
    CHECK(interior_max(apply_Lplus_radial(gs.lambda_q, 0, gs) + 2.0 * gs.q) <= 1e-6);
    CHECK(interior_max(apply_Lminus_radial(gs.q, 0, gs)) <= 1e-8);
    CHECK(interior_max(apply_Lplus_radial(gs.dq, 1, gs)) <= 1e-6);

    Vec lq = solve_Lplus_radial(-2.0 * gs.q, 0, gs);
    CHECK((lq - gs.lambda_q).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("linearized solves invert the integral-form operators") {
    const auto& gs = *state();
    const auto& g = gs.grid;
    std::mt19937 rng(7);
    for (int ell = 0; ell <= kMaxSolveDegree; ++ell) {
        Vec f = smooth_random(g, ell, rng);
        if (ell == 1) f = project_out(g, f, gs.dq);
        Vec u = solve_Lplus_radial(f, ell, gs);
        CHECK(interior_max(apply_Lplus_radial(u, ell, gs) - f) <= 1e-8 * f.cwiseAbs().maxCoeff() + 1e-9);
        if (ell == 1) CHECK(std::abs(dot_r2(g, u, gs.dq)) <= 1e-8);

        Vec f2 = smooth_random(g, ell, rng);
        if (ell == 0) f2 = project_out(g, f2, gs.q);
        Vec v = solve_Lminus_radial(f2, ell, gs);
        CHECK(interior_max(apply_Lminus_radial(v, ell, gs) - f2) <= 1e-8 * f2.cwiseAbs().maxCoeff() + 1e-9);
        if (ell == 0) CHECK(std::abs(dot_r2(g, v, gs.q)) <= 1e-8);
    }
}

TEST_CASE("solvability violations are reported") {
    const auto& gs = *state();
    try {
        solve_Lminus_radial(gs.q, 0, gs);
        FAIL("expected OrthogonalityError");
    } catch (const OrthogonalityError& e) {
        CHECK(std::abs(e.overlap) == doctest::Approx(1.0).epsilon(1e-6));
    }
    CHECK_THROWS_AS(solve_Lplus_radial(gs.dq, 1, gs), OrthogonalityError);
    CHECK_THROWS_AS(solve_Lplus_radial(gs.q, 3, gs), ProfileError);
}

TEST_CASE("radial basis satisfies its defining equations") {
    const auto& gs = *state();
    const auto& g = gs.grid;
    const auto& b = profiles3().basis();
    const double M = gs.mass_sq;

    Vec p_qlq = newtonian_potential_radial(gs.q.cwiseProduct(b.lq), 0, g);
    Vec p_lq2 = newtonian_potential_radial(b.lq.cwiseAbs2(), 0, g);
    Vec rhs_tau = -2.0 * p_qlq.cwiseProduct(b.lq) - p_lq2.cwiseProduct(gs.q) - 2.0 * b.lq;
    CHECK(interior_max(apply_Lplus_radial(b.tau, 0, gs) - rhs_tau) <= 1e-7);
    CHECK(interior_max(apply_Lplus_radial(b.x_ce, 0, gs) - b.lq) <= 1e-7);
    CHECK(interior_max(apply_Lplus_radial(b.x_h, 0, gs) - gs.q) <= 1e-7);

    Vec r2q(g.size());
    for (int i = 0; i < g.size(); ++i) r2q[i] = -g.r[i] * g.r[i] * gs.q[i];
    CHECK(interior_max(apply_Lplus_radial(b.u2, 2, gs) - r2q) <= 1e-7);

    // (Lambda Lambda Q, Q) = M/2 - ||Lambda Q||^2 and (Lambda Q, Q) = M/2.
    CHECK(dot_r2(g, b.llq, gs.q) == doctest::Approx(M / 2 - dot_r2(g, b.lq, b.lq)).epsilon(1e-8));
    CHECK(dot_r2(g, b.lq, gs.q) == doctest::Approx(M / 2).epsilon(1e-8));

    const auto& k = profiles3().coefficients().constants();
    Vec g1 = 2.0 * b.tau - b.llq;
    CHECK(k.kappa1 == doctest::Approx(dot_r2(g, g1, gs.q)));
    Vec rhs_w = g1 - (k.kappa1 / (M / 2)) * b.lq;
    CHECK(std::abs(dot_r2(g, rhs_w, gs.q)) <= 1e-8 * M);
    CHECK(interior_max(apply_Lminus_radial(b.w1, 0, gs) - rhs_w) <= 1e-7);
}

TEST_CASE("first correction balances the monopole of the interaction") {
    const auto& gs = *state();
    const auto& ps = profiles3();
    Params P = two_body(20.0);
    // -L+ T1 - psi^(1) Q = 0 at the first order.
    for (int j = 0; j < 2; ++j) {
        HarmonicProfile t1 = ps.correction(1, j, P);
        HarmonicProfile psi = psi_n(1, j, 1 - j, P, gs);
        Vec res = apply_Lplus_radial(t1.terms[0].radial, 0, gs) +
                  psi.terms[0].tensor[0] * psi.terms[0].radial.cwiseProduct(gs.q);
        CHECK(interior_max(res) <= 1e-8);
        const double r = (P.alpha[0] - P.alpha[1]).norm();
        const double c = -P.lambda[j] * P.lambda[j] * gs.mass_sq / (8 * M_PI * P.lambda[1 - j] * r);
        CHECK(ps.coefficients().c(P)[j] == doctest::Approx(c).epsilon(1e-14));
    }
}

TEST_CASE("force and scale-rate coefficients") {
    const auto& gs = *state();
    const auto& co = profiles3().coefficients();
    const double M = gs.mass_sq;
    Params P = three_body(15.0);
    const int m = P.m();

    std::vector<double> mu(m);
    for (int j = 0; j < m; ++j) mu[j] = M / (4 * M_PI * P.lambda[j]);
    auto f = forces(P.alpha, mu);
    auto b2 = co.b2(P);
    for (int j = 0; j < m; ++j) CHECK((b2[j] - f[j]).norm() <= 1e-14 * f[j].norm());

    // Time derivatives along alpha' = 2 beta and lambda' = m2 by central differences.
    auto shifted = [&](double dt, bool move_alpha, bool move_lambda) {
        Params Q = P;
        auto m2 = co.m2(P);
        for (int j = 0; j < m; ++j) {
            if (move_alpha) Q.alpha[j] += 2 * dt * P.beta[j];
            if (move_lambda) Q.lambda[j] += dt * m2[j];
        }
        return Q;
    };
    const double dt = 1e-4;
    auto dc = co.dc_alpha(P);
    auto dl = co.dc_lambda(P);
    auto de = co.de_alpha(P);
    auto m2 = co.m2(P);
    for (int j = 0; j < m; ++j) {
        double fd = (co.c(shifted(dt, true, false))[j] - co.c(shifted(-dt, true, false))[j]) / (2 * dt);
        CHECK(dc[j] == doctest::Approx(fd).epsilon(1e-7));
        CHECK(m2[j] == doctest::Approx(P.lambda[j] * dc[j]).epsilon(1e-14));
        double fl = (co.c(shifted(dt, false, true))[j] - co.c(shifted(-dt, false, true))[j]) / (2 * dt);
        CHECK(dl[j] == doctest::Approx(fl).epsilon(1e-7));
        double fe = (co.e(shifted(dt, true, false))[j] - co.e(shifted(-dt, true, false))[j]) / (2 * dt);
        CHECK(de[j] == doctest::Approx(fe).epsilon(1e-7));
    }

    // Two-body b3 in closed form.
    Params T = two_body(20.0);
    auto b3 = co.b3(T);
    const Vec3 a = T.alpha[0] - T.alpha[1];
    const double r = a.norm();
    Vec3 expect = T.lambda[1] * M * M * a / (32 * M_PI * M_PI * T.lambda[0] * std::pow(r, 4));
    CHECK((b3[0] - expect).norm() <= 1e-13 * expect.norm());
    T.lambda = {1.2, 1.2};
    b3 = co.b3(T);
    CHECK((b3[0] + b3[1]).norm() <= 1e-14 * b3[0].norm());
}

TEST_CASE("coefficients are homogeneous in the separation") {
    const auto& co = profiles3().coefficients();
    Params P = three_body(10.0);
    for (double s : {2.0, 10.0}) {
        Params Q = P;
        for (auto& a : Q.alpha) a *= s;
        for (int j = 0; j < P.m(); ++j) {
            CHECK(co.c(Q)[j] == doctest::Approx(co.c(P)[j] / s).epsilon(1e-12));
            CHECK(co.e(Q)[j] == doctest::Approx(co.e(P)[j] / (s * s)).epsilon(1e-12));
            CHECK(co.h(Q)[j] == doctest::Approx(co.h(P)[j] / (s * s * s)).epsilon(1e-12));
            CHECK((co.b2(Q)[j] - co.b2(P)[j] / (s * s)).norm() <= 1e-12 * co.b2(P)[j].norm());
            CHECK((co.b3(Q)[j] - co.b3(P)[j] / (s * s * s)).norm() <= 1e-12 * co.b3(P)[j].norm());
            CHECK(co.m2(Q)[j] == doctest::Approx(co.m2(P)[j] / (s * s)).epsilon(1e-12));
            CHECK(co.m3(Q)[j] == doctest::Approx(co.m3(P)[j] / (s * s * s)).epsilon(1e-12));
            CHECK((co.quadrupole(Q)[j] - co.quadrupole(P)[j] / (s * s * s)).norm() <=
                  1e-12 * co.quadrupole(P)[j].norm());
        }
    }
    Coefficients c2(2, co.constants());
    CHECK((c2.B(P)[0] - co.b2(P)[0]).norm() == 0);
    CHECK_THROWS_AS(Coefficients(4, co.constants()), ProfileError);
}

TEST_CASE("point samples agree with harmonic profiles") {
    const auto& ps = profiles3();
    const auto& gs = *state();
    Params P = three_body(12.0);
    auto pcs = ps.at(P);
    for (int j = 0; j < P.m(); ++j) {
        HarmonicProfile re = ps.real_part(j, P), im = ps.imag_part(j, P);
        for (const Vec3& y : {Vec3(0.4, -0.2, 0.9), Vec3(2.0, 1.0, -1.5), Vec3(0.01, 0.0, 0.0)}) {
            auto s = ps.sample(pcs[j], y);
            CHECK(s.v.real() == doctest::Approx(re.value(gs, y)).epsilon(1e-9));
            CHECK(s.v.imag() == doctest::Approx(im.value(gs, y)).epsilon(1e-9));
            const double h = 1e-5;
            for (int d = 0; d < 3; ++d) {
                Vec3 e = Vec3::Zero();
                e[d] = h;
                auto fd = (ps.sample(pcs[j], y + e).v - ps.sample(pcs[j], y - e).v) / (2 * h);
                CHECK(std::abs(s.grad[d] - fd) <= 1e-6);
            }
        }
    }
    // Order-2 profiles are radial.
    ProfileSet p2(2, state());
    auto pc2 = p2.at(P)[0];
    Vec prof = p2.radial_profile(pc2);
    CHECK(p2.sample(pc2, Vec3(0, 0, gs.grid.r[300])).v.real() == doctest::Approx(prof[300]).epsilon(1e-10));
    CHECK_THROWS_AS(ps.radial_profile(pcs[0]), ProfileError);
}
