#include "hartree/groundstate.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

using namespace hartree;

namespace {

const GroundState& default_state() {
    static const GroundState gs = solve_ground_state(RadialGrid::sinh_map(2048, 20.0));
    return gs;
}

}  // namespace

TEST_CASE("shooting brackets the unit profile") {
    auto s = shoot_unit_profile();
    CHECK(s.phi0 < 0);
    CHECK(s.energy > 0);
    CHECK(s.scale == doctest::Approx(1.0 / std::sqrt(s.energy)));
    CHECK(s.r_valid > 5);
}

TEST_CASE("ground state invariants") {
    const auto& gs = default_state();
    const int n = gs.grid.size();
    CHECK(gs.residual <= 1e-10);
    for (int i = 0; i < n; ++i) {
        REQUIRE(gs.q[i] > 0);
        REQUIRE(gs.phi[i] < 0);
        if (i > 0) REQUIRE(gs.q[i] < gs.q[i - 1]);
    }
    const double far = gs.grid.r.back() * gs.phi[n - 1];
    CHECK(far == doctest::Approx(-gs.mass_sq / (4 * M_PI)).epsilon(1e-8));
    CHECK(gs.lambda_q[0] == doctest::Approx(2 * gs.q[0]));
}

TEST_CASE("ground state identities") {
    auto id = ground_state_identities(default_state());
    CHECK(std::abs(id.pohozaev_rel) < 1e-6);
    CHECK(std::abs(id.lambda_pair_rel) < 1e-6);
    CHECK(id.tail_slope < 0);
}

TEST_CASE("tail slope stabilizes") {
    // local slope of log(r q) on successive windows approaches the fitted decay rate
    const auto& gs = default_state();
    auto slope_between = [&](double a, double b) {
        return (std::log(b * gs.value(b)) - std::log(a * gs.value(a))) / (b - a);
    };
    double s1 = slope_between(12, 14), s2 = slope_between(16, 18), s3 = slope_between(18, 20);
    CHECK(std::abs(s3 - s2) < std::abs(s2 - s1));
    CHECK(std::abs(s3 + gs.tail_kappa) < 0.02);
}

TEST_CASE("gradient flow cross-check of the mass") {
    const auto& gs = default_state();
    auto fl = gradient_flow_ground_state(gs.grid);
    CHECK(fl.residual < 1e-9);
    CHECK(fl.mass_sq == doctest::Approx(gs.mass_sq).epsilon(1e-6));
}

TEST_CASE("coarse grids agree on the mass") {
    const double ref = default_state().mass_sq;
    for (int n : {256, 512, 1024}) {
        auto gs = solve_ground_state(RadialGrid::sinh_map(n, 20.0));
        CHECK(gs.mass_sq == doctest::Approx(ref).epsilon(1e-9));
    }
}

TEST_CASE("3D evaluation") {
    const auto& gs = default_state();
    auto v = evaluate_Q_3d(gs, {{0, 0, 0}, {20, 0, 0}, {0, 0, 25}});
    CHECK(v[0] == doctest::Approx(gs.q[0]).epsilon(1e-14));
    CHECK(v[1] == doctest::Approx(gs.q[gs.grid.size() - 1]).epsilon(1e-10));
    CHECK(v[2] > 0);
    CHECK(v[2] < v[1]);

    // refined-grid oracle between nodes
    static const GroundState fine = solve_ground_state(RadialGrid::sinh_map(4096, 20.0), 1e-9);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 15.0);
    for (int k = 0; k < 50; ++k) {
        double r = u(rng);
        CHECK(gs.value(r) == doctest::Approx(fine.value(r)).epsilon(1e-7));
    }
}

TEST_CASE("invalid input") {
    CHECK_THROWS_AS(solve_ground_state(RadialGrid::sinh_map(512, 20.0), -1.0), SolverError);
    CHECK_THROWS_AS(solve_ground_state(RadialGrid::sinh_map(512, 10.0)), SolverError);
    try {
        solve_ground_state(RadialGrid::sinh_map(512, 20.0), 1e-10, 1);
        FAIL("expected non-convergence");
    } catch (const SolverError& e) {
        CHECK(e.last_residual > 1e-10);
    }
}

TEST_CASE("GSQ1 and CSV round trip") {
    const auto& gs = default_state();
    const std::string bin = "gs_roundtrip.gsq1", csv = "gs_roundtrip.csv";
    write_gsq1(gs, bin);
    {
        std::ifstream f(bin, std::ios::binary);
        char magic[4];
        f.read(magic, 4);
        CHECK(std::string(magic, 4) == "GSQ1");
    }
    auto back = read_gsq1(bin);
    CHECK(back.mass_sq == gs.mass_sq);
    CHECK((back.q - gs.q).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.phi - gs.phi).cwiseAbs().maxCoeff() == 0.0);
    CHECK(back.value(3.3) == doctest::Approx(gs.value(3.3)).epsilon(1e-14));
    write_ground_state_csv(gs, csv);
    std::ifstream c(csv);
    std::string header;
    std::getline(c, header);
    CHECK(header == "r,q,phi");
    std::remove(bin.c_str());
    std::remove(csv.c_str());
    std::ofstream bad(bin, std::ios::binary);
    bad << "XXXX";
    bad.close();
    CHECK_THROWS(read_gsq1(bin));
    std::remove(bin.c_str());
}
