#include "commands.hpp"

#include "svg.hpp"

#include "hartree/analysis.hpp"
#include "hartree/evolution.hpp"
#include "hartree/groundstate.hpp"
#include "hartree/nbody.hpp"
#include "hartree/profiles.hpp"
#include "hartree/trajectory.hpp"

#include <boost/algorithm/string.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <random>
#include <sstream>

namespace hartree::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class Csv {
public:
    Csv(const std::string& path, const std::vector<std::string>& header) : out_(path) {
        if (!out_) throw std::runtime_error("cannot write " + path);
        out_ << boost::join(header, ",") << "\n" << std::setprecision(17);
    }
    void row(const std::vector<double>& v) {
        for (std::size_t i = 0; i < v.size(); ++i) out_ << (i ? "," : "") << v[i];
        out_ << "\n";
    }

private:
    std::ofstream out_;
};

void write_json(Context& ctx, const std::string& name, const json& j) {
    std::ofstream out(ctx.file(name));
    if (!out) throw std::runtime_error("cannot write " + (ctx.out / name).string());
    out << std::setw(2) << j << "\n";
}

void summary(Context& ctx, const std::string& cmd, json j, const std::vector<Check>& checks) {
    j["subcommand"] = cmd;
    j["checks"] = to_json(checks);
    write_json(ctx, cmd + "_summary.json", j);
    if (!ctx.verbose) return;
    for (const auto& c : checks)
        std::cout << "  [" << (c.pass ? "pass" : "FAIL") << "] " << c.name << ": " << c.value << " (limit " << c.limit
                  << ")\n";
}

std::shared_ptr<const GroundState> load_ground_state(const Context& ctx) {
    const fs::path p = ctx.out / "ground_state.gsq1";
    if (!fs::exists(p))
        throw DependencyError("missing " + p.string() + "; run the `groundstate` subcommand first");
    return std::make_shared<const GroundState>(read_gsq1(p.string()));
}

BodyConfig body_config(const Config& cfg, double mass_sq) {
    const auto cls = orbit_class_from_string(cfg.str("nbody.class"));
    AsymptoticTargets tg;
    if (cls == OrbitClass::parabolic) tg.b = cfg.vectors("nbody.targets");
    else tg.a = cfg.vectors("nbody.targets");
    if (cls == OrbitClass::mixed) tg.b = cfg.vectors("nbody.shape");
    BodyConfig bc = make_asymptotic_initial_data(cls, tg, cfg.list("nbody.lambdas"), mass_sq, cfg.num("nbody.t0"));
    const auto off = cfg.vectors("nbody.offsets");
    for (std::size_t j = 0; j < off.size() && j < bc.alpha0.size(); ++j) bc.alpha0[j] += off[j];
    return bc;
}

CorrectedTrajectory corrected_trajectory(const Config& cfg, const ProfileSet& ps, double T0) {
    const BodyConfig bc = body_config(cfg, ps.coefficients().constants().mass_sq);
    PicardOptions opt;
    opt.T0 = T0;
    opt.horizon = cfg.num("trajectory.horizon");
    opt.nodes = cfg.integer("trajectory.nodes");
    opt.tol = cfg.num("trajectory.tol");
    opt.epsilon = cfg.num("trajectory.epsilon");
    opt.max_iter = cfg.integer("trajectory.max_iter");
    if (bc.kind == OrbitClass::hyperbolic) return picard_hyperbolic(bc, ps.coefficients(), opt);
    if (bc.kind == OrbitClass::parabolic) return picard_parabolic(bc, ps.coefficients(), opt);
    throw ValidationError("trajectory: corrected trajectories exist for hyperbolic and parabolic data only");
}

PotentialMode potential_mode(const std::string& s) {
    try {
        return potential_mode_from_string(s);
    } catch (const std::exception& e) {
        throw ValidationError(e.what());
    }
}

double interior_max(const Vec& v) { return v.segment(1, v.size() - 3).cwiseAbs().maxCoeff(); }

double log_slope(const std::vector<double>& x, const std::vector<double>& y) { return fit_power_law(x, y).exponent; }

// --- groundstate ----------------------------------------------------------------------------------

int cmd_groundstate(Context& ctx) {
    const auto& c = ctx.cfg;
    const RadialGrid grid = RadialGrid::sinh_map(c.integer("groundstate.n"), c.num("groundstate.r_max"),
                                                 c.num("groundstate.stretch"));
    const GroundState gs = solve_ground_state(grid, c.num("groundstate.tol"));
    const auto id = ground_state_identities(gs);
    const double lplus = interior_max(apply_Lplus_radial(gs.lambda_q, 0, gs) + 2.0 * gs.q);

    write_gsq1(gs, ctx.file("ground_state.gsq1"));
    if (ctx.wants("csv")) write_ground_state_csv(gs, ctx.file("ground_state.csv"));
    if (ctx.wants("svg")) {
        Plot p{"ground state", "r", "", false, true, {}};
        Series q{"Q", {}, {}}, phi{"-phi", {}, {}};
        for (int i = 0; i < grid.size(); ++i) {
            q.x.push_back(grid.r[i]);
            q.y.push_back(gs.q[i]);
            phi.x.push_back(grid.r[i]);
            phi.y.push_back(-gs.phi[i]);
        }
        p.series = {q, phi};
        write_svg(p, ctx.file("ground_state.svg"));
    }
    json j;
    j["grid_points"] = grid.size();
    j["r_max"] = grid.r_max;
    j["mass_sq"] = gs.mass_sq;
    j["q0"] = gs.q[0];
    j["phi0"] = gs.phi[0];
    j["residual"] = gs.residual;
    j["pohozaev_rel"] = id.pohozaev_rel;
    j["lambda_pair_rel"] = id.lambda_pair_rel;
    j["grad_q_sq"] = id.grad_q_sq;
    j["grad_phi_sq"] = id.grad_phi_sq;
    j["tail_slope"] = id.tail_slope;
    j["lplus_lambda_q_residual"] = lplus;
    summary(ctx, "groundstate", j,
            {{1, "Pohozaev relation (relative)", std::abs(id.pohozaev_rel) <= 1e-6, std::abs(id.pohozaev_rel), 1e-6},
             {1, "(Lambda Q, Q) = ||Q||^2 / 2 (relative)", std::abs(id.lambda_pair_rel) <= 1e-6,
              std::abs(id.lambda_pair_rel), 1e-6},
             {3, "sup |L+ Lambda Q + 2 Q|", lplus <= 1e-6, lplus, 1e-6}});
    return 0;
}

// --- nbody ----------------------------------------------------------------------------------------

int cmd_nbody(Context& ctx) {
    const auto& c = ctx.cfg;
    const BodyConfig bc = body_config(c, 44.049);
    const double horizon = c.num("nbody.horizon");
    const NBodyPath path = integrate(bc, horizon, c.num("nbody.tol"));
    const auto rates = bc.m() > 1 ? fit_asymptotic_rates(path, horizon / 1000) : std::vector<PairRate>{};

    const auto mu = bc.masses();
    const double e0 = energy(path.alpha[0], path.beta[0], mu);
    double kin = 0, drift = 0;
    for (int j = 0; j < bc.m(); ++j) kin += mu[j] * path.beta[0][j].squaredNorm();
    for (std::size_t i = 0; i < path.size(); ++i) drift = std::max(drift, std::abs(energy(path.alpha[i], path.beta[i], mu) - e0));
    drift /= std::max(std::abs(e0), kin);
    const double per_1000 = drift * 1000 / (horizon - bc.t0);

    if (ctx.wants("csv")) write_path_csv(path, ctx.file("nbody_path.csv"));
    if (ctx.wants("json")) write_rates_json(rates, ctx.file("nbody_rates.json"));
    std::vector<Check> checks;
    json pairs = json::array();
    double worst = 0;
    for (const auto& r : rates) {
        const double expect = bc.kind == OrbitClass::parabolic || (bc.kind == OrbitClass::mixed && r.same_cluster) ? 2.0 / 3.0 : 1.0;
        worst = std::max(worst, std::abs(r.slope - expect));
        pairs.push_back({{"j", r.j}, {"k", r.k}, {"slope", r.slope}, {"expected", expect}, {"same_cluster", r.same_cluster}});
    }
    if (!rates.empty()) checks.push_back({4, "max |separation slope - expected|", worst <= 0.02, worst, 0.02});
    checks.push_back({4, "relative energy drift per 1000 time units", per_1000 <= 1e-9, per_1000, 1e-9});
    if (ctx.wants("svg") && bc.m() > 1) {
        Plot p{"pair separations", "t", "|alpha_j - alpha_k|", true, true, {}};
        for (int j = 0; j < bc.m(); ++j)
            for (int k = j + 1; k < bc.m(); ++k) {
                Series s{"pair " + std::to_string(j) + std::to_string(k), {}, {}};
                const std::size_t stride = std::max<std::size_t>(1, path.size() / 2000);
                for (std::size_t i = 0; i < path.size(); i += stride) {
                    s.x.push_back(path.times[i]);
                    s.y.push_back((path.alpha[i][j] - path.alpha[i][k]).norm());
                }
                p.series.push_back(s);
            }
        write_svg(p, ctx.file("nbody_separations.svg"));
    }
    json j;
    j["class"] = to_string(bc.kind);
    j["m"] = bc.m();
    j["steps"] = path.size();
    j["t0"] = bc.t0;
    j["horizon"] = horizon;
    j["energy_drift"] = drift;
    j["pairs"] = pairs;
    j["clusters"] = bc.clusters;
    summary(ctx, "nbody", j, checks);
    return 0;
}

// --- trajectory -----------------------------------------------------------------------------------

int cmd_trajectory(Context& ctx) {
    const auto gs = load_ground_state(ctx);
    const ProfileSet ps(ctx.cfg.integer("trajectory.N"), gs);
    const CorrectedTrajectory tr = corrected_trajectory(ctx.cfg, ps, ctx.cfg.num("trajectory.T0"));
    if (ctx.wants("csv")) write_trajectory_csv(tr, ctx.file("trajectory.csv"));
    write_trajectory_json(tr, ctx.file("trajectory.json"));

    double ratio = 0;
    for (double r : tr.ratios) ratio = std::max(ratio, r);
    std::vector<Check> checks;
    double s_half = 0, s_alpha = 0, s_bl = 0;
    Series env{"deviation envelope", {}, {}};
    for (std::size_t i = 0; i < tr.size(); ++i) {
        const double t = tr.times[i];
        const auto d = tr.deviation(i);
        s_half = std::max(s_half, std::sqrt(t) * d.total);
        s_alpha = std::max(s_alpha, std::pow(t, 0.25) * d.alpha);
        for (int j = 0; j < tr.P[i].m(); ++j)
            s_bl = std::max(s_bl, std::sqrt(t) * ((tr.P[i].beta[j] - tr.ref[i].beta[j]).norm() +
                                                  std::abs(tr.P[i].lambda[j] - tr.ref[i].lambda[j])));
        env.x.push_back(t);
        env.y.push_back(d.total);
    }
    if (tr.kind == OrbitClass::hyperbolic) {
        checks.push_back({5, "sup t^1/2 |P - P_inf|", s_half <= 1, s_half, 1});
    } else {
        checks.push_back({5, "sup t^1/4 |alpha - alpha_inf|", s_alpha <= 1, s_alpha, 1});
        checks.push_back({5, "sup t^1/2 (|beta - beta_inf| + |lambda - lambda_inf|)", s_bl <= 1, s_bl, 1});
    }
    checks.push_back({5, "max contraction ratio", ratio <= 0.6, ratio, 0.6});
    if (ctx.wants("svg")) {
        Plot p{"corrected trajectory", "t", "|P^(N) - P_inf|", true, true, {env}};
        Series ref{"t^-1/2", {}, {}, false, true};
        for (double t : {tr.times.front(), tr.times.back()}) {
            ref.x.push_back(t);
            ref.y.push_back(1 / std::sqrt(t));
        }
        p.series.push_back(ref);
        write_svg(p, ctx.file("trajectory_deviation.svg"));
    }
    json j;
    j["class"] = to_string(tr.kind);
    j["order"] = ps.order();
    j["iterations"] = tr.iterations;
    j["fixed_point_residual"] = fixed_point_residual(tr);
    summary(ctx, "trajectory", j, checks);
    return 0;
}

// --- profile --------------------------------------------------------------------------------------

int cmd_profile(Context& ctx) {
    const auto gs = load_ground_state(ctx);
    const int N = ctx.cfg.integer("profiles.N");
    const ProfileSet ps(N, gs);
    const auto& b = ps.basis();
    const auto& k = ps.coefficients().constants();
    const RadialGrid& g = gs->grid;
    std::vector<std::pair<std::string, const Vec*>> cols = {{"Q", &gs->q}, {"LambdaQ", &b.lq}};
    if (N >= 2) {
        cols.push_back({"LambdaLambdaQ", &b.llq});
        cols.push_back({"tau", &b.tau});
        cols.push_back({"u2", &b.u2});
    }
    if (N >= 3)
        for (auto [name, v] : std::vector<std::pair<std::string, const Vec*>>{
                 {"x_ccc", &b.x_ccc}, {"x_cs", &b.x_cs}, {"x_ce", &b.x_ce}, {"x_h", &b.x_h}, {"w1", &b.w1}})
            cols.push_back({name, v});
    if (ctx.wants("csv")) {
        std::vector<std::string> header = {"r"};
        for (const auto& col : cols) header.push_back(col.first);
        Csv csv(ctx.file("profiles.csv"), header);
        for (int i = 0; i < g.size(); ++i) {
            std::vector<double> row = {g.r[i]};
            for (const auto& col : cols) row.push_back(col.second->size() ? (*col.second)[i] : 0.0);
            csv.row(row);
        }
    }
    if (ctx.wants("svg")) {
        Plot p{"radial profiles", "r", "", false, false, {}};
        for (const auto& col : cols) {
            if (!col.second->size()) continue;
            Series s{col.first, {}, {}};
            for (int i = 0; i < g.size() && g.r[i] <= 12; ++i) {
                s.x.push_back(g.r[i]);
                s.y.push_back((*col.second)[i]);
            }
            p.series.push_back(s);
        }
        write_svg(p, ctx.file("profiles.svg"));
    }
    json j;
    j["order"] = N;
    j["ell_max"] = ctx.cfg.integer("profiles.ell_max");
    j["mass_sq"] = k.mass_sq;
    j["lambda_q_norm_sq"] = k.lq_norm_sq;
    j["tau_q"] = k.tau_q;
    j["kappa1"] = k.kappa1;
    summary(ctx, "profile", j, {});
    return 0;
}

// --- residual -------------------------------------------------------------------------------------

int cmd_residual(Context& ctx) {
    const auto gs = load_ground_state(ctx);
    if (!fs::exists(ctx.out / "profile_summary.json"))
        throw DependencyError("residual needs the profile artifacts; run the `profile` subcommand first");
    const auto& c = ctx.cfg;
    const auto seps = c.list("residual.separations");
    const Vec3 beta = c.vectors("residual.beta").at(0);
    const auto lam = c.list("residual.lambdas");
    std::unique_ptr<Csv> csv;
    if (ctx.wants("csv")) csv = std::make_unique<Csv>(ctx.file("residual.csv"), std::vector<std::string>{"N", "a", "l2", "sup"});
    std::vector<Check> checks;
    json orders = json::array();
    Plot plot{"residual vs separation", "a", "||Psi^(N)||", true, true, {}};
    for (double Nd : c.list("residual.orders")) {
        const int N = static_cast<int>(Nd);
        const ProfileSet ps(N, gs);
        std::vector<double> l2;
        for (double a : seps) {
            Params P;
            P.alpha = {Vec3(0.5 * a, 0, 0), Vec3(-0.5 * a, 0, 0)};
            P.beta = {beta, -beta};
            P.lambda = {lam[0], lam[1]};
            const auto r = residual_semianalytic(ps, P);
            l2.push_back(r.l2);
            if (csv) csv->row({Nd, a, r.l2, r.sup});
        }
        const double slope = log_slope(seps, l2);
        orders.push_back({{"N", N}, {"slope", slope}, {"l2", l2}});
        if (N >= 1) checks.push_back({6, "slope of log ||Psi|| vs log a, N = " + std::to_string(N), slope <= -(N + 1) + 0.2, slope, -(N + 1) + 0.2});
        plot.series.push_back({"N = " + std::to_string(N), seps, l2, true});
    }
    if (ctx.wants("svg")) write_svg(plot, ctx.file("residual.svg"));
    json j;
    j["separations"] = seps;
    j["orders"] = orders;
    summary(ctx, "residual", j, checks);
    return 0;
}

// --- evolve ---------------------------------------------------------------------------------------

int evolve_standing(Context& ctx, const std::shared_ptr<const GroundState>& gs) {
    const auto& c = ctx.cfg;
    const int n = c.integer("evolution.n");
    const double L = c.num("evolution.L"), dt = c.num("evolution.dt"), T = c.num("evolution.T_end");
    const ProfileSet ps(0, gs);
    ModulationState g;
    g.P.alpha = {Vec3::Zero()};
    g.P.beta = {Vec3::Zero()};
    g.P.lambda = {1.0};
    g.gamma = {0.0};
    const ComplexField3D Q = assemble_R(ps, g, n, L, c.num("evolution.boundary_tol"));
    ComplexField3D u = Q;
    Evolver ev(n, L, potential_mode(c.str("evolution.mode")));
    const double q2 = l2_norm_sq(Q);
    const Conserved c0 = conserved_quantities(Q, ev.spectral());
    std::vector<double> ts, dev, mass, ham;
    auto observe = [&](const ComplexField3D& v, long) {
        double d = 0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double e = std::abs(v.data[i]) - std::abs(Q.data[i]);
            d += e * e;
        }
        const Conserved cq = conserved_quantities(v, ev.spectral());
        ts.push_back(v.time);
        dev.push_back(std::sqrt(d * std::pow(v.h(), 3) / q2));
        mass.push_back(std::abs(cq.mass - c0.mass) / c0.mass);
        ham.push_back(std::abs(cq.hamiltonian - c0.hamiltonian) / std::abs(c0.hamiltonian));
    };
    observe(u, 0);
    const long steps = std::lround(T / dt);
    ev.run(u, dt, steps, c.integer("evolution.snapshot_every"), observe);
    if (ctx.wants("csv")) {
        Csv csv(ctx.file("evolution.csv"), {"t", "abs_deviation", "mass_drift", "hamiltonian_drift"});
        for (std::size_t i = 0; i < ts.size(); ++i) csv.row({ts[i], dev[i], mass[i], ham[i]});
    }
    if (c.flag("evolution.write_fields")) write_cf3d(u, ctx.file("final_field.cf3d"));
    if (ctx.wants("svg"))
        write_svg({"standing wave", "t", "relative", false, true,
                   {{"| |u| - Q | / |Q|", ts, dev}, {"mass drift", ts, mass}, {"H drift", ts, ham}}},
                  ctx.file("evolution.svg"));
    const double max_dev = *std::max_element(dev.begin(), dev.end());
    const double max_mass = *std::max_element(mass.begin(), mass.end());
    json j;
    j["kind"] = "standing";
    j["steps"] = steps;
    j["max_hamiltonian_drift"] = *std::max_element(ham.begin(), ham.end());
    j["cfl_warnings"] = ev.cfl_warnings();
    summary(ctx, "evolve", j,
            {{7, "max || |u| - Q || / ||Q||", max_dev <= 1e-5, max_dev, 1e-5},
             {7, "mass drift", max_mass <= 1e-10, max_mass, 1e-10}});
    return 0;
}

int evolve_backward(Context& ctx, const std::shared_ptr<const GroundState>& gs) {
    const auto& c = ctx.cfg;
    const ProfileSet ps(c.integer("trajectory.N"), gs);
    const CorrectedTrajectory tr =
        corrected_trajectory(c, ps, std::min(c.num("trajectory.T0"), c.num("evolution.T_end")));
    EvolveConfig ec;
    ec.n = c.integer("evolution.n");
    ec.L = c.num("evolution.L");
    ec.dt = c.num("evolution.dt");
    ec.mode = potential_mode(c.str("evolution.mode"));
    ec.boundary_tol = c.num("evolution.boundary_tol");
    ec.fit = c.flag("evolution.fit");
    ec.fit_options.boundary_tol = ec.boundary_tol;
    const Spectral sp(ec.n, ec.L, ec.mode);

    struct Row {
        double t, eps_h1, G, G1, G2, G3, sep;
        ModulationState g;
    };
    std::vector<Row> rows;
    ComplexField3D last(ec.n, ec.L);
    auto observe = [&](const ComplexField3D& u, const EvolutionRecord& rec) {
        last = u;
        if (!rec.fit) return;
        const auto& f = *rec.fit;
        const ComplexField3D R = assemble_R(ps, f.g, ec.n, ec.L, ec.boundary_tol);
        const CutoffFamily cut = build_cutoffs(f.g.P.alpha, ec.n, ec.L);
        const GFunctional G = functional_G(f.eps, R, f.g, cut, sp);
        rows.push_back({rec.t, f.eps_h1, G.G, G.G1, G.G2, G.G3, f.g.P.min_separation(), f.g});
        if (ctx.verbose) std::clog << "  t = " << rec.t << "  ||eps||_H1 = " << f.eps_h1 << "  ||u - R||_H1 = " << rec.h1_error << "\n";
    };
    const EvolutionSummary s = evolve_backward_from_ansatz(ps, tr, c.num("evolution.T_n"), c.num("evolution.T_end"), ec,
                                                           c.integer("evolution.snapshot_every"), observe);
    if (ctx.wants("csv")) write_evolution_csv(s, ctx.file("evolution.csv"));
    if (c.flag("evolution.write_fields")) write_cf3d(last, ctx.file("final_field.cf3d"));

    std::vector<double> t, h1;
    for (const auto& r : s.records) {
        t.push_back(r.t);
        h1.push_back(r.h1_error);
    }
    std::vector<Check> checks;
    const double drift = std::max(s.mass_drift, s.hamiltonian_drift);
    checks.push_back({10, "conservation drift (mass, H)", drift <= 1e-6, drift, 1e-6});
    json j;
    j["kind"] = "backward";
    j["steps"] = s.steps;
    j["mass_drift"] = s.mass_drift;
    j["hamiltonian_drift"] = s.hamiltonian_drift;
    j["cfl_warnings"] = s.cfl_warnings;
    j["records"] = s.records.size();

    const bool report = rows.size() >= 5;
    std::vector<double> tf, eps, G, mod;
    if (report) {
        std::vector<ModulationState> gs_path;
        for (const auto& r : rows) {
            tf.push_back(r.t);
            eps.push_back(r.eps_h1);
            G.push_back(r.G);
            gs_path.push_back(r.g);
        }
        mod = modulation_error(tf, gs_path, tr.coeffs).mod;
        // Mod against eps / a^2 + a^-(N+1) + eps^2; the ratio should stay O(1)
        std::vector<double> bound, ratio;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const double a = rows[i].sep, e = rows[i].eps_h1;
            bound.push_back(e / (a * a) + std::pow(a, -(ps.order() + 1)) + e * e);
            ratio.push_back(mod[i] / bound.back());
        }
        j["mod_over_estimate"] = {{"min", *std::min_element(ratio.begin(), ratio.end())},
                                  {"max", *std::max_element(ratio.begin(), ratio.end())}};
        if (ctx.wants("csv")) {
            Csv csv(ctx.file("analysis.csv"), {"t", "separation", "eps_H1", "G", "G1", "G2", "G3", "Mod", "Mod_estimate"});
            for (std::size_t i = 0; i < rows.size(); ++i) {
                const auto& r = rows[i];
                csv.row({r.t, r.sep, r.eps_h1, r.G, r.G1, r.G2, r.G3, mod[i], bound[i]});
            }
        }
    }
    try {
        if (!report) throw RangeError("no modulation fits recorded (evolution.fit = false)");
        const GronwallReport g = gronwall_report(tf, eps, G, mod);
        const EnvelopeReport e = envelope("||u - R||_H1", t, h1);
        auto rep = [](const EnvelopeReport& r) {
            return json{{"exponent", r.fit.exponent}, {"ci", {r.fit.ci_low, r.fit.ci_high}}, {"prefactor", r.fit.prefactor},
                        {"r2", r.fit.r2}, {"violations", r.violations}, {"decaying", r.decaying}};
        };
        j["envelopes"] = {{"u_minus_R", rep(e)}, {"eps_H1", rep(g.eps_h1)}, {"G", rep(g.G)}, {"dG_dt", rep(g.dG)}, {"Mod", rep(g.mod)}};
        checks.push_back({10, "||u - R||_H1 envelope exponent (upper 95% bound)", e.decaying, e.fit.ci_high, 0});
        checks.push_back({10, "samples above twice the envelope", e.violations == 0, double(e.violations), 0});
    } catch (const RangeError& err) {
        j["envelopes"] = nullptr;
        j["envelope_note"] = err.what();
        if (ctx.verbose) std::cout << "  envelope report skipped: " << err.what() << "\n";
    }
    if (ctx.wants("svg")) {
        Plot p{"backward evolution", "t", "H^1 norm", true, true, {{"||u - R(t)||", t, h1}}};
        if (report) p.series.push_back({"||eps|| (fitted)", tf, eps});
        if (report) p.series.push_back({"Mod", tf, mod});
        write_svg(p, ctx.file("evolution.svg"));
        std::vector<double> md, hd;
        for (const auto& r : s.records) {
            md.push_back(std::abs(r.c.mass / s.records.front().c.mass - 1));
            hd.push_back(std::abs(r.c.hamiltonian / s.records.front().c.hamiltonian - 1));
        }
        write_svg({"conservation", "t", "relative drift", false, true, {{"mass", t, md}, {"H", t, hd}}},
                  ctx.file("conservation.svg"));
    }
    summary(ctx, "evolve", j, checks);
    return 0;
}

int cmd_evolve(Context& ctx) {
    const auto gs = load_ground_state(ctx);
    return ctx.cfg.str("evolution.kind") == "standing" ? evolve_standing(ctx, gs) : evolve_backward(ctx, gs);
}

// --- fit ------------------------------------------------------------------------------------------

ModulationState random_pair(std::mt19937_64& rng, double sep) {
    std::uniform_real_distribution<double> U(-1, 1);
    const Vec3 dir = Vec3(1, 0.2 * U(rng), 0.2 * U(rng)).normalized();
    const double a = sep + 0.5 * (1 + U(rng));
    const Vec3 centre(U(rng), U(rng), U(rng));
    ModulationState g;
    g.P.alpha = {centre + 0.5 * a * dir, centre - 0.5 * a * dir};
    g.P.beta = {0.2 * Vec3(U(rng), U(rng), U(rng)), 0.2 * Vec3(U(rng), U(rng), U(rng))};
    g.P.lambda = {1 + 0.1 * U(rng), 1 + 0.1 * U(rng)};
    g.gamma = {M_PI * U(rng), M_PI * U(rng)};
    return g;
}

int cmd_fit(Context& ctx) {
    const auto gs = load_ground_state(ctx);
    const auto& c = ctx.cfg;
    const ProfileSet ps(c.integer("profiles.N"), gs);
    const int n = c.integer("analysis.n");
    const double L = c.num("analysis.L");
    const Spectral sp(n, L, PotentialMode::isolated);
    FitOptions fo;
    fo.boundary_tol = 1e-6;
    std::mt19937_64 rng(ctx.seed);
    std::uniform_real_distribution<double> U(-1, 1);
    std::unique_ptr<Csv> csv;
    if (ctx.wants("csv"))
        csv = std::make_unique<Csv>(ctx.file("fit_trials.csv"),
                                    std::vector<std::string>{"trial", "separation", "max_error", "iterations", "condition_norm", "jacobian_cond"});
    double worst = 0;
    std::vector<double> idx, errs;
    for (int k = 0; k < c.integer("analysis.fit_trials"); ++k) {
        const ModulationState g = random_pair(rng, c.num("analysis.separation"));
        const ComplexField3D R = assemble_R(ps, g, n, L, fo.boundary_tol);
        Eigen::VectorXd x = flatten(g);
        for (Eigen::Index i = 0; i < x.size(); ++i) x[i] += 1e-3 * U(rng);
        const FitResult f = fit_modulation(R, ps, unflatten(x), sp, fo);
        const double e = (flatten(f.g) - flatten(g)).cwiseAbs().maxCoeff();
        worst = std::max(worst, e);
        idx.push_back(k);
        errs.push_back(e);
        if (csv) csv->row({double(k), g.P.min_separation(), e, double(f.iterations), f.condition_norm, f.jacobian_cond});
    }
    if (ctx.wants("svg"))
        write_svg({"modulation fit round trip", "trial", "max component error", false, true, {{"error", idx, errs, true}}},
                  ctx.file("fit_trials.svg"));
    json j;
    j["trials"] = idx.size();
    j["max_error"] = worst;
    summary(ctx, "fit", j, {{8, "max parameter error over trials", worst <= 1e-8, worst, 1e-8}});
    return 0;
}

// --- coercivity -----------------------------------------------------------------------------------

void coercivity_spectra(Context& ctx, json& j, std::vector<Check>& checks) {
    const auto& c = ctx.cfg;
    const auto grids = c.list("analysis.coercivity_grids");
    const int ell_max = c.integer("analysis.ell_max");
    const double ktol = c.num("analysis.kernel_tol");
    std::unique_ptr<Csv> csv;
    if (ctx.wants("csv"))
        csv = std::make_unique<Csv>(ctx.file("coercivity.csv"),
                                    std::vector<std::string>{"grid", "operator", "ell", "index", "unprojected", "projected"});
    // smallest projected value per (op, ell) on each grid
    std::map<std::pair<int, int>, std::vector<double>> proj;
    double kernel = 0;
    json spectra = json::array();
    for (double gd : grids) {
        const int npts = static_cast<int>(gd);
        const GroundState gs = solve_ground_state(
            RadialGrid::sinh_map(npts, c.num("groundstate.r_max"), c.num("groundstate.stretch")), c.num("groundstate.tol"));
        kernel = 0;
        for (int op = 0; op < 2; ++op)
            for (int ell = 0; ell <= ell_max; ++ell) {
                const auto r = coercivity_spectrum(gs, op ? LinearOperator::Lminus : LinearOperator::Lplus, ell, 4, ktol);
                for (std::size_t i = 0; i < r.unprojected.size(); ++i)
                    if (csv) csv->row({gd, double(op), double(ell), double(i), r.unprojected[i], r.projected[i]});
                proj[{op, ell}].push_back(r.projected[0]);
                if ((op == 0 && ell == 1) || (op == 1 && ell == 0)) kernel = std::max(kernel, std::abs(r.unprojected[0]));
                spectra.push_back({{"grid", npts}, {"operator", to_string(r.op)}, {"ell", ell}, {"projection", r.projection},
                                   {"unprojected", r.unprojected}, {"projected", r.projected}});
            }
    }
    checks.push_back({2, "kernel eigenvalue (L+ l=1, L- l=0), finest grid", kernel <= 1e-4, kernel, 1e-4});
    double lo = HUGE_VAL, cauchy = 0;
    for (const auto& [key, v] : proj) {
        lo = std::min(lo, v.back());
        for (std::size_t i = 1; i < v.size(); ++i) cauchy = std::max(cauchy, std::abs(v[i] / v[i - 1] - 1));
    }
    checks.push_back({2, "smallest projected quotient", lo > 0, lo, 0});
    if (grids.size() > 1) checks.push_back({2, "relative change under refinement", cauchy <= 0.05, cauchy, 0.05});
    if (ctx.wants("svg")) {
        Plot p{"coercivity under refinement", "radial grid points", "smallest projected quotient", true, false, {}};
        for (const auto& [key, v] : proj)
            p.series.push_back({std::string(key.first ? "L-" : "L+") + " l=" + std::to_string(key.second), grids, v, true});
        write_svg(p, ctx.file("coercivity.svg"));
    }
    j["spectra"] = spectra;
}

// G on random orthogonal perturbations around a seeded pair.
void coercivity_functional(Context& ctx, json& j, std::vector<Check>& checks) {
    const auto& c = ctx.cfg;
    const ProfileSet ps(c.integer("profiles.N"), load_ground_state(ctx));
    const int n = c.integer("analysis.n");
    const double L = c.num("analysis.L");
    const Spectral sp(n, L, PotentialMode::isolated);
    std::mt19937_64 rng(ctx.seed);
    const ModulationState g = random_pair(rng, c.num("analysis.separation"));
    const Ansatz a = build_ansatz(ps, g, n, L, 1e-6, true);
    const CutoffFamily cut = build_cutoffs(g.P.alpha, n, L);
    const OrthogonalSampler sampler(a, sp);
    const double norm = c.num("analysis.eps_norm");
    std::vector<double> idx, ratio;
    std::unique_ptr<Csv> csv;
    if (ctx.wants("csv"))
        csv = std::make_unique<Csv>(ctx.file("gfunctional.csv"), std::vector<std::string>{"sample", "G", "G1", "G2", "G3", "ratio"});
    for (int k = 0; k < c.integer("analysis.samples"); ++k) {
        const ComplexField3D eps = sampler.draw(rng, norm);
        const GFunctional G = functional_G(eps, a.R, g, cut, sp);
        idx.push_back(k);
        ratio.push_back(G.G / (norm * norm));
        if (csv) csv->row({double(k), G.G, G.G1, G.G2, G.G3, ratio.back()});
    }
    const double min_ratio = *std::min_element(ratio.begin(), ratio.end());
    checks.push_back({9, "min G / ||eps||^2 over random orthogonal eps", min_ratio > 0, min_ratio, 0});
    if (ctx.wants("svg"))
        write_svg({"G on orthogonal perturbations", "sample", "G / ||eps||^2", false, false, {{"ratio", idx, ratio, true}}},
                  ctx.file("gfunctional.svg"));
    j["samples"] = idx.size();
    j["min_G_ratio"] = min_ratio;
    j["pair"] = {{"separation", g.P.min_separation()}, {"lambda", g.P.lambda}};
}

int cmd_coercivity(Context& ctx) {
    load_ground_state(ctx);
    const std::string parts = ctx.cfg.str("analysis.parts");
    json j;
    std::vector<Check> checks;
    if (boost::contains(parts, "spectra")) coercivity_spectra(ctx, j, checks);
    if (boost::contains(parts, "functional")) coercivity_functional(ctx, j, checks);
    summary(ctx, "coercivity", j, checks);
    return 0;
}

// --- report ---------------------------------------------------------------------------------------

int cmd_report(Context& ctx) {
    const std::vector<std::string> sources = {"groundstate", "coercivity", "nbody", "trajectory", "residual", "evolve", "fit"};
    json rows = json::array();
    bool failed = false;
    std::vector<std::string> missing;
    for (const auto& s : sources) {
        const fs::path p = ctx.out / (s + "_summary.json");
        if (!fs::exists(p)) {
            missing.push_back(s);
            continue;
        }
        std::ifstream in(p);
        const json j = json::parse(in);
        for (const auto& ch : j.at("checks")) {
            json row = ch;
            row["source"] = s;
            rows.push_back(row);
            failed |= !ch.at("pass").get<bool>();
        }
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const json& a, const json& b) { return a.at("criterion").get<int>() < b.at("criterion").get<int>(); });
    std::ostringstream md;
    md << "| criterion | check | value | limit | result |\n|---|---|---|---|---|\n";
    for (const auto& r : rows)
        md << "| " << r["criterion"].get<int>() << " | " << r["name"].get<std::string>() << " | " << r["value"].get<double>()
           << " | " << r["limit"].get<double>() << " | " << (r["pass"].get<bool>() ? "pass" : "FAIL") << " |\n";
    for (const auto& m : missing) md << "| - | " << m << " | not run | | |\n";
    {
        std::ofstream out(ctx.file("report.md"));
        out << md.str();
    }
    write_json(ctx, "report.json", {{"checks", rows}, {"missing", missing}, {"all_pass", !failed}});
    if (ctx.verbose) std::cout << md.str();
    return failed ? 4 : 0;
}

}  // namespace

bool Context::wants(const std::string& format) const {
    return boost::contains(cfg.str("output.formats"), format);
}

std::string Context::file(const std::string& name) {
    if (std::find(artifacts.begin(), artifacts.end(), name) == artifacts.end()) artifacts.push_back(name);
    return (out / name).string();
}

nlohmann::json to_json(const std::vector<Check>& checks) {
    json a = json::array();
    for (const auto& c : checks)
        a.push_back({{"criterion", c.criterion}, {"name", c.name}, {"pass", c.pass}, {"value", c.value}, {"limit", c.limit}});
    return a;
}

const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> s = {"groundstate", "nbody", "trajectory", "profile", "residual", "evolve",
                                               "fit", "coercivity", "report", "validate"};
    return s;
}

int run_subcommand(const std::string& name, Context& ctx) {
    const auto t0 = std::chrono::steady_clock::now();
    int status = 0;
    if (name == "groundstate") status = cmd_groundstate(ctx);
    else if (name == "nbody") status = cmd_nbody(ctx);
    else if (name == "trajectory") status = cmd_trajectory(ctx);
    else if (name == "profile") status = cmd_profile(ctx);
    else if (name == "residual") status = cmd_residual(ctx);
    else if (name == "evolve") status = cmd_evolve(ctx);
    else if (name == "fit") status = cmd_fit(ctx);
    else if (name == "coercivity") status = cmd_coercivity(ctx);
    else if (name == "report") status = cmd_report(ctx);
    else throw ValidationError("unknown subcommand '" + name + "'");
    if (ctx.verbose)
        std::clog << name << " finished in " << std::fixed << std::setprecision(1)
              << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() << " s\n";
    return status;
}

}  // namespace hartree::cli
