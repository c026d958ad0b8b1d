#include "hartree/analysis.hpp"
#include "hartree/trajectory.hpp"

#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>

using namespace hartree;

namespace {

std::shared_ptr<const GroundState> ground() {
    static auto gs = std::make_shared<const GroundState>(solve_ground_state(RadialGrid::sinh_map(2048, 20.0)));
    return gs;
}

const ProfileSet& profiles(int order) {
    static std::vector<std::unique_ptr<ProfileSet>> cache(kMaxProfileOrder + 1);
    if (!cache[order]) cache[order] = std::make_unique<ProfileSet>(order, ground());
    return *cache[order];
}

ModulationState single(const Vec3& beta = Vec3::Zero()) {
    ModulationState g;
    g.P.alpha = {Vec3::Zero()};
    g.P.beta = {beta};
    g.P.lambda = {1.0};
    g.gamma = {0.0};
    return g;
}

ModulationState pair(double a) {
    ModulationState g;
    g.P.alpha = {Vec3(0.5 * a, 0.4, -0.3), Vec3(-0.5 * a, -0.2, 0.1)};
    g.P.beta = {Vec3(0.1, 0.2, -0.05), Vec3(-0.15, 0.0, 0.1)};
    g.P.lambda = {1.05, 0.95};
    g.gamma = {0.3, -1.2};
    return g;
}

double sup(const std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); }

}  // namespace

TEST_CASE("cutoff profile") {
    CHECK(cutoff_profile(0.0) == 1.0);
    CHECK(cutoff_profile(0.2) == 1.0);
    CHECK(cutoff_profile(0.4) == 0.0);
    CHECK(cutoff_profile(1.0) == 0.0);
    double prev = 1;
    for (double r = 0.2; r <= 0.4; r += 1e-3) {
        const double v = cutoff_profile(r);
        CHECK(v <= prev + 1e-15);
        prev = v;
        const double fd = (cutoff_profile(r + 1e-6) - cutoff_profile(r - 1e-6)) / 2e-6;
        CHECK(cutoff_profile_prime(r) == doctest::Approx(fd).epsilon(1e-5).scale(1));
    }
}

TEST_CASE("two-soliton partition") {
    const int n = 48;
    const double L = 48;  // h = 1, centres on nodes
    const std::vector<Vec3> alpha = {Vec3(8, 0, 0), Vec3(-8, 0, 0)};
    const CutoffFamily cf = build_cutoffs(alpha, n, L);
    CHECK(cf.scale == 16.0);
    ComplexField3D grid(n, L);
    double worst = 0, lo = 1, hi = 0;
    for (std::size_t q = 0; q < grid.size(); ++q) {
        worst = std::max(worst, std::abs(cf.phi[0][q] + cf.phi[1][q] - 1));
        lo = std::min({lo, cf.phi[0][q], cf.phi[1][q]});
        hi = std::max({hi, cf.phi[0][q], cf.phi[1][q]});
        const Vec3 x = grid.point(q);
        if ((x - alpha[0]).norm() < 1e-12) {
            CHECK(cf.phi[0][q] == 1.0);
            CHECK(cf.phi[1][q] == 0.0);
        }
        if ((x - alpha[1]).norm() < 1e-12) CHECK(cf.phi[1][q] == 1.0);
    }
    CHECK(worst <= 1e-15);
    CHECK(lo >= 0.0);
    CHECK(hi <= 1.0);

    // on the axis both gradients come from the profile of soliton 0 at scale 16
    auto idx = [&](int i) { return (static_cast<std::size_t>(i) * n + n / 2) * n + n / 2; };
    for (int i = 0; i < n; ++i) {
        const double rho = std::abs(grid.coord(i) - 8) / 16;
        const double P = cutoff_profile(rho), dP = cutoff_profile_prime(rho);
        CHECK(cf.grad_norm[0][idx(i)] == doctest::Approx(std::abs(2 * P * dP) / 16).epsilon(1e-12));
        CHECK(cf.grad_norm[1][idx(i)] == doctest::Approx(cf.grad_norm[0][idx(i)]).epsilon(1e-12));
        CHECK(cf.grad_sqrt[0][idx(i)] == doctest::Approx(std::abs(dP) / 16).epsilon(1e-12));
    }

    CHECK_THROWS_AS(build_cutoffs({Vec3(4, 0, 0), Vec3(-4, 0, 0)}, n, L), AnalysisError);
}

TEST_CASE("cutoff gradients scale like 1/a over a decade of t") {
    AsymptoticTargets tg;
    tg.a = {Vec3(1.2, 0.2, 0.0), Vec3(-1.0, -0.2, 0.1), Vec3(0.0, 1.4, -0.2)};
    const auto cfg = make_asymptotic_initial_data(OrbitClass::hyperbolic, tg, {1.0, 1.0, 1.0},
                                                  ground()->mass_sq, 30);
    const auto path = integrate_at(cfg, {30, 100, 300});
    std::vector<double> c1, c2;
    for (std::size_t i = 0; i < path.size(); ++i) {
        const double a = path.min_separation(i);
        const double L = 4 * a;  // grid follows the configuration
        const CutoffFamily cf = build_cutoffs(path.alpha[i], 96, L);
        double g1 = 0, g2 = 0, worst = 0;
        for (int j = 0; j < 3; ++j) {
            g1 = std::max(g1, sup(cf.grad_norm[j]));
            g2 = std::max(g2, sup(cf.grad_sqrt[j]));
        }
        for (std::size_t q = 0; q < cf.phi[0].size(); ++q)
            worst = std::max(worst, std::abs(cf.phi[0][q] + cf.phi[1][q] + cf.phi[2][q] - 1));
        CHECK(worst < 1e-14);
        c1.push_back(a * g1);
        c2.push_back(a * g2);
        MESSAGE("t = " << path.times[i] << ": a = " << a << ", a sup|grad phi| = " << c1.back()
                       << ", a sup|grad sqrt phi| = " << c2.back());
    }
    // sharp constants from the unit profile
    double k1 = 0, k2 = 0;
    for (double r = 0.2; r <= 0.4; r += 1e-5) {
        k1 = std::max(k1, std::abs(2 * cutoff_profile(r) * cutoff_profile_prime(r)));
        k2 = std::max(k2, std::abs(cutoff_profile_prime(r)));
    }
    for (std::size_t i = 0; i < c1.size(); ++i) {
        CHECK(c1[i] <= k1 * (1 + 1e-6));
        CHECK(c1[i] >= 0.8 * k1);
        CHECK(c2[i] >= 0.8 * k2);
        CHECK(c1[i] == doctest::Approx(c1[0]).epsilon(0.25));
        CHECK(c2[i] == doctest::Approx(c2[0]).epsilon(0.25));
    }
}

TEST_CASE("mixed partition composes cluster and inner weights") {
    const int n = 96;
    const double L = 96;
    const std::vector<Vec3> alpha = {Vec3(-33, 0, 0), Vec3(-17, 0, 0), Vec3(25, 0, 0)};
    const CutoffFamily cf = build_cutoffs(alpha, n, L, {{0, 1}, {2}});
    REQUIRE(cf.cluster_phi.size() == 2);
    ComplexField3D grid(n, L);
    double worst = 0, worst_c = 0;
    for (std::size_t q = 0; q < grid.size(); ++q) {
        worst = std::max(worst, std::abs(cf.phi[0][q] + cf.phi[1][q] + cf.phi[2][q] - 1));
        worst_c = std::max(worst_c, std::abs(cf.cluster_phi[0][q] + cf.cluster_phi[1][q] - 1));
        CHECK(cf.phi[0][q] + cf.phi[1][q] <= cf.cluster_phi[0][q] + 1e-15);
        for (int j = 0; j < 3; ++j)
            if ((grid.point(q) - alpha[j]).norm() < 1e-12) CHECK(cf.phi[j][q] == doctest::Approx(1.0).epsilon(1e-15));
    }
    CHECK(worst < 1e-14);
    CHECK(worst_c < 1e-14);
    // cluster too wide for its cutoff
    CHECK_THROWS_AS(build_cutoffs({Vec3(-40, 0, 0), Vec3(-10, 0, 0), Vec3(25, 0, 0)}, n, L, {{0, 1}, {2}}),
                    AnalysisError);
    CHECK_THROWS_AS(build_cutoffs(alpha, n, L, {{0, 1}}), AnalysisError);
}

TEST_CASE("G on the ground-state direction") {
    const auto& ps = profiles(0);
    const int n = 64;
    const double L = 40;
    Spectral sp(n, L, PotentialMode::isolated);
    const ModulationState g = single();
    const ComplexField3D R = assemble_R(ps, g, n, L, 1e-7);
    const CutoffFamily cut = build_cutoffs(g.P.alpha, n, L);

    const ComplexField3D zero(n, L);
    const GFunctional g0 = functional_G(zero, R, g, cut, sp);
    CHECK(g0.G == 0.0);
    CHECK(g0.G1 == 0.0);
    CHECK(g0.G2 == 0.0);
    CHECK(g0.G3 == 0.0);

    // L+ Q = 2 phi Q = -2 (1 - Delta) Q, so G(delta Q) = -2 ||delta Q||_{H^1}^2
    const double delta = 1e-3;
    ComplexField3D eps = R;
    for (auto& z : eps.data) z *= delta;
    const double h1 = sp.h1_norm_sq(eps);
    const GFunctional gq = functional_G(eps, R, g, cut, sp);
    MESSAGE("G(delta Q) / ||delta Q||^2 = " << gq.G / h1);
    CHECK(gq.G / h1 == doctest::Approx(-2.0).epsilon(2e-3));
    CHECK(gq.G3 == 0.0);

    // Galilean invariance: boosting soliton and perturbation together leaves G unchanged
    const Vec3 b(0.3, -0.1, 0.2);
    const ModulationState gb = single(b);
    const ComplexField3D Rb = assemble_R(ps, gb, n, L, 1e-7);
    ComplexField3D eb = Rb;
    for (auto& z : eb.data) z *= delta;
    const GFunctional gbq = functional_G(eb, Rb, gb, cut, sp);
    CHECK(gbq.G == doctest::Approx(gq.G).epsilon(1e-6));
    CHECK(gbq.G3 == doctest::Approx(-2 * b.squaredNorm() * l2_norm_sq(eb)).epsilon(1e-6));
}

TEST_CASE("G is positive on random orthogonal perturbations") {
    const auto& ps = profiles(2);
    const int n = 64;
    const double L = 62;
    Spectral sp(n, L, PotentialMode::isolated);
    const ModulationState g = pair(20);
    const Ansatz a = build_ansatz(ps, g, n, L, 1e-6, true);
    const CutoffFamily cut = build_cutoffs(g.P.alpha, n, L);
    const OrthogonalSampler sampler(a, sp);
    std::mt19937_64 rng(2024);
    double lo = HUGE_VAL;
    for (int s = 0; s < 5; ++s) {
        const ComplexField3D eps = sampler.draw(rng, 1e-3);
        CHECK(std::sqrt(sp.h1_norm_sq(eps)) == doctest::Approx(1e-3).epsilon(1e-12));
        for (double c : orthogonality_conditions(eps, a)) CHECK(std::abs(c) < 1e-13);
        const GFunctional G = functional_G(eps, a.R, g, cut, sp);
        CHECK(G.G == doctest::Approx(G.G1 + G.G2 + G.G3).epsilon(1e-14));
        lo = std::min(lo, G.G / sp.h1_norm_sq(eps));
    }
    MESSAGE("min G / ||eps||^2 over 5 samples = " << lo);
    CHECK(lo > 0);

    // the same seed reproduces the same field
    std::mt19937_64 r1(5), r2(5);
    const auto e1 = sampler.draw(r1, 1e-3), e2 = sampler.draw(r2, 1e-3);
    CHECK(e1.data == e2.data);
}

TEST_CASE("coercivity spectra") {
    const GroundState gs = solve_ground_state(RadialGrid::sinh_map(512, 20.0));
    const GroundState fine = solve_ground_state(RadialGrid::sinh_map(1024, 20.0));

    const auto p1 = coercivity_spectrum(gs, LinearOperator::Lplus, 1);
    const auto m0 = coercivity_spectrum(gs, LinearOperator::Lminus, 0);
    CHECK(std::abs(p1.unprojected[0]) < 1e-4);
    CHECK(std::abs(m0.unprojected[0]) < 1e-4);
    CHECK(p1.projected[0] > 0);
    CHECK(m0.projected[0] > 0);
    const auto p1f = coercivity_spectrum(fine, LinearOperator::Lplus, 1);
    const auto m0f = coercivity_spectrum(fine, LinearOperator::Lminus, 0);
    CHECK(p1f.projected[0] == doctest::Approx(p1.projected[0]).epsilon(0.05));
    CHECK(m0f.projected[0] == doctest::Approx(m0.projected[0]).epsilon(0.05));
    MESSAGE("projected: L+ l=1 " << p1f.projected[0] << ", L- l=0 " << m0f.projected[0]);

    // Q is an exact generalized eigenvector of L+ with value -2
    const auto p0 = coercivity_spectrum(gs, LinearOperator::Lplus, 0);
    CHECK(p0.unprojected[0] == doctest::Approx(-2.0).epsilon(1e-8));
    CHECK(p0.projected[0] > 0);
    CHECK(p0.projection == "Q");

    const auto p2 = coercivity_spectrum(gs, LinearOperator::Lplus, 2);
    CHECK(p2.projection == "none");
    CHECK(p2.projected == p2.unprojected);
    CHECK(p2.unprojected[0] > 0);

    CHECK_THROWS_AS(coercivity_spectrum(gs, LinearOperator::Lminus, 0, 4, 1e-20), ResolutionError);
    CHECK_THROWS_AS(coercivity_spectrum(gs, LinearOperator::Lminus, 7), AnalysisError);
}

TEST_CASE("power-law fits and envelopes") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> noise(0, 0.02);
    std::vector<double> t, y;
    for (int i = 0; i < 60; ++i) {
        t.push_back(10 * std::pow(10.0, i / 59.0));
        y.push_back(5 * std::pow(t.back(), -3) * std::exp(noise(rng)));
    }
    const PowerFit f = fit_power_law(t, y);
    CHECK(f.exponent == doctest::Approx(-3).epsilon(0.05 / 3));
    CHECK(f.ci_low < -3);
    CHECK(f.ci_high > -3);
    CHECK(f.r2 > 0.99);

    const EnvelopeReport e = envelope("G", t, y);
    CHECK(e.decaying);
    CHECK(e.violations == 0);
    CHECK(e.fit.exponent == doctest::Approx(-3).epsilon(0.05 / 3));

    // one spike breaks the envelope pointwise
    std::vector<double> spiked = y;
    spiked[40] *= 30;
    CHECK(envelope("G", t, spiked).violations >= 1);

    const GronwallReport r = gronwall_report(t, y, y, y);
    CHECK(r.dG.fit.exponent == doctest::Approx(-4).epsilon(0.05));

    std::vector<double> t29(t.begin(), t.begin() + 29), y29(y.begin(), y.begin() + 29);
    CHECK_THROWS_AS(gronwall_report(t29, y29, y29, y29), RangeError);
    std::vector<double> narrow(60);
    for (int i = 0; i < 60; ++i) narrow[i] = 10 + 0.1 * i;
    CHECK_THROWS_AS(gronwall_report(narrow, y, y, y), RangeError);
    CHECK_THROWS_AS(fit_power_law({1, 2}, {1, 1}), RangeError);
}

TEST_CASE("modulation error") {
    // free soliton with a prescribed beta' = delta: only the beta bracket is nonzero
    const Coefficients co(0, profiles(0).coefficients().constants());
    const Vec3 a0(1, -2, 0.5), b0(0.3, 0.1, -0.2);
    for (double delta : {0.0, 1e-3}) {
        std::vector<double> t;
        std::vector<ModulationState> g;
        for (int i = 0; i < 40; ++i) {
            const double s = 1 + 0.25 * i;
            ModulationState q = single();
            q.P.beta[0] = b0 + Vec3(delta * s, 0, 0);
            q.P.alpha[0] = a0 + 2 * b0 * s + Vec3(delta * s * s, 0, 0);
            q.gamma[0] = -s + b0.squaredNorm() * s + 2 * delta * b0.x() * s * s + 2 * delta * delta * s * s * s / 3 +
                         delta * a0.x() * s;
            t.push_back(s);
            g.push_back(q);
        }
        const auto m = modulation_error(t, g, co);
        for (double v : m.mod) CHECK(std::abs(v - delta) < 1e-12);

        // phase jumps by 2 pi are unwrapped
        for (std::size_t i = 0; i < g.size(); i += 3) g[i].gamma[0] += 2 * M_PI;
        const auto w = modulation_error(t, g, co);
        for (std::size_t i = 0; i < t.size(); ++i) CHECK(std::abs(w.mod[i] - m.mod[i]) < 1e-12);
    }

    // samples of a corrected trajectory
    AsymptoticTargets tg;
    tg.a = {Vec3(0.6, 0.1, 0.0), Vec3(-0.5, -0.1, 0.05)};
    const auto& ps = profiles(2);
    PicardOptions opt;
    const auto cfg = make_asymptotic_initial_data(OrbitClass::hyperbolic, tg, {1.0, 1.2},
                                                  ps.coefficients().constants().mass_sq, opt.T0);
    const CorrectedTrajectory tr = picard_hyperbolic(cfg, ps.coefficients(), opt);
    std::vector<double> t;
    std::vector<ModulationState> g;
    for (int i = 0; i <= 100; ++i) {
        t.push_back(200 - 0.25 * i);  // decreasing, as recorded by a backward run
        g.push_back(tr.state_at(t.back()));
    }
    const auto m = modulation_error(t, g, tr.coeffs);
    MESSAGE("max Mod along the corrected trajectory: " << sup(m.mod));
    CHECK(sup(m.mod) <= 10 * opt.tol);
    CHECK(m.per_soliton.size() == 2);

    CHECK_THROWS_AS(modulation_error({1, 2, 3}, {g[0], g[1], g[2]}, co), RangeError);
}
