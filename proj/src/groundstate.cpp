#include "hartree/groundstate.hpp"

#include <Eigen/SparseLU>
#include <boost/numeric/odeint.hpp>

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace hartree {

namespace odeint = boost::numeric::odeint;

namespace {

using ShotState = std::array<double, 5>;  // U, U', Phi, Phi', enclosed mass

struct ShotRhs {
    void operator()(const ShotState& y, ShotState& d, double r) const {
        d[0] = y[1];
        d[1] = y[2] * y[0] - 2.0 * y[1] / r;
        d[2] = y[3];
        d[3] = y[0] * y[0] - 2.0 * y[3] / r;
        d[4] = 4.0 * M_PI * r * r * y[0] * y[0];
    }
};

constexpr double kShotStart = 1e-3;
constexpr double kShotEnd = 40.0;

ShotState shot_start(double p) {
    const double r = kShotStart;
    return {1.0 + p * r * r / 6.0, p * r / 3.0, p + r * r / 6.0, r / 3.0, 4.0 * M_PI * r * r * r / 3.0};
}

// +1: profile turns upward (Phi(0) too high), -1: profile crosses zero.
struct ShotOutcome {
    int side = 1;
    double r_event = kShotEnd;
};

ShotOutcome classify(double p, std::vector<std::pair<double, double>>* samples = nullptr) {
    auto stepper = odeint::make_controlled(1e-14, 1e-14, odeint::runge_kutta_fehlberg78<ShotState>());
    ShotState y = shot_start(p);
    double r = kShotStart, dr = 1e-3;
    ShotOutcome out;
    while (r < kShotEnd) {
        if (r + dr > kShotEnd) dr = kShotEnd - r;
        if (stepper.try_step(ShotRhs{}, y, r, dr) != odeint::success) continue;
        if (samples) samples->emplace_back(r, y[0]);
        if (y[0] < 0) return {-1, r};
        if (y[1] > 0) return {1, r};
    }
    return out;
}

double sample_at(const std::vector<std::pair<double, double>>& s, double r) {
    auto it = std::lower_bound(s.begin(), s.end(), std::make_pair(r, -1e300));
    if (it == s.begin()) return it->second;
    if (it == s.end()) return s.back().second;
    auto prev = it - 1;
    double t = (r - prev->first) / (it->first - prev->first);
    return prev->second + t * (it->second - prev->second);
}

struct Robin {
    std::vector<std::pair<int, double>> row;
};

// Outward log-derivative of the decaying solution of u'' = (E + phi) u, u = r q.
double decay_rate(double energy, double mass, double r) {
    double v = energy - mass / (4.0 * M_PI * r);
    double dv = mass / (4.0 * M_PI * r * r);
    if (v <= 0) v = 1e-3;
    return std::sqrt(v) + dv / (4.0 * v) + 1.0 / r;
}

}  // namespace

ShootingResult shoot_unit_profile(double tol) {
    double lo = -5.0, hi = 0.0;
    if (classify(lo).side != -1 || classify(hi).side != 1)
        throw SolverError("shooting bracket does not straddle the ground state", NAN);
    for (int it = 0; it < 200 && hi - lo > tol * std::abs(lo); ++it) {
        double mid = 0.5 * (lo + hi);
        if (classify(mid).side < 0)
            lo = mid;
        else
            hi = mid;
    }
    std::vector<std::pair<double, double>> slo, shi;
    classify(lo, &slo);
    classify(hi, &shi);
    ShootingResult res;
    res.phi0 = 0.5 * (lo + hi);
    double rv = kShotStart;
    for (const auto& [r, u] : slo) {
        if (r > shi.back().first) break;
        if (std::abs(sample_at(shi, r) - u) > 1e-4 * std::abs(u)) break;
        rv = r;
    }
    res.r_valid = std::max(kShotStart, rv - 1.0);

    // Energy from Phi(r) + m(r)/(4 pi r) where the tail of U^2 is negligible.
    auto stepper = odeint::make_dense_output(1e-14, 1e-14, odeint::runge_kutta_dopri5<ShotState>());
    ShotState y = shot_start(res.phi0);
    odeint::integrate_adaptive(stepper, ShotRhs{}, y, kShotStart, res.r_valid, 1e-3);
    res.energy = y[2] + y[4] / (4.0 * M_PI * res.r_valid);
    if (!(res.energy > 0)) throw SolverError("shooting produced a non-positive frequency", NAN);
    res.scale = 1.0 / std::sqrt(res.energy);
    return res;
}

namespace {

Vec initial_guess_from_shot(const RadialGrid& grid, const ShootingResult& shot) {
    const int n = grid.size();
    Vec q(n);
    std::vector<double> times;
    for (int i = 0; i < n; ++i) {
        double rs = shot.scale * grid.r[i];
        if (rs > shot.r_valid) break;
        times.push_back(std::max(rs, kShotStart));
    }
    std::vector<double> values;
    ShotState y = shot_start(shot.phi0);
    auto stepper = odeint::make_dense_output(1e-13, 1e-13, odeint::runge_kutta_dopri5<ShotState>());
    odeint::integrate_times(stepper, ShotRhs{}, y, times.begin(), times.end(), 1e-3,
                            [&](const ShotState& s, double) { values.push_back(s[0]); });
    const double l2 = shot.scale * shot.scale;
    int m = static_cast<int>(values.size());
    for (int i = 0; i < m; ++i) q[i] = l2 * values[i];
    const double rc = grid.r[m - 1], qc = q[m - 1];
    for (int i = m; i < n; ++i) q[i] = qc * (rc / grid.r[i]) * std::exp(-(grid.r[i] - rc));
    return q;
}

}  // namespace

GroundState solve_ground_state(const RadialGrid& grid, double tol, int max_iter) {
    if (!(tol > 0)) throw SolverError("tolerance must be positive", NAN);
    if (grid.r_max < 15) throw SolverError("ground state needs r_max >= 15", NAN);
    const int n = grid.size();
    ShootingResult shot = shoot_unit_profile();
    Vec q = initial_guess_from_shot(grid, shot);
    Vec phi = newtonian_potential_radial(q.cwiseAbs2(), 0, grid);

    SpMat lap = radial_laplacian(grid, 0);
    const double rmax = grid.r_max;
    double residual = INFINITY;
    int it = 0;
    for (; it < max_iter; ++it) {
        double mass = integrate_r2(grid, q.cwiseAbs2());
        auto rq = robin_row(grid, 1, decay_rate(1.0, mass, rmax));
        auto rp = robin_row(grid, 1, 1.0 / rmax);

        Vec lq = lap * q, lp = lap * phi;
        Vec f(2 * n);
        for (int i = 0; i < n - 1; ++i) {
            f[i] = lq[i] - phi[i] * q[i] - q[i];
            f[n + i] = lp[i] - q[i] * q[i];
        }
        f[n - 1] = 0;
        f[2 * n - 1] = 0;
        for (auto& [c, v] : rq) f[n - 1] += v * q[c];
        for (auto& [c, v] : rp) f[2 * n - 1] += v * phi[c];
        residual = f.head(n - 1).cwiseAbs().maxCoeff();
        double total = f.cwiseAbs().maxCoeff();
        if (total < 0.01 * tol) break;

        std::vector<Eigen::Triplet<double>> t;
        t.reserve(40 * n);
        for (int k = 0; k < lap.outerSize(); ++k)
            for (SpMat::InnerIterator e(lap, k); e; ++e) {
                if (e.row() == n - 1) continue;
                t.emplace_back(e.row(), e.col(), e.value());
                t.emplace_back(n + e.row(), n + e.col(), e.value());
            }
        for (int i = 0; i < n - 1; ++i) {
            t.emplace_back(i, i, -(phi[i] + 1.0));
            t.emplace_back(i, n + i, -q[i]);
            t.emplace_back(n + i, i, -2.0 * q[i]);
        }
        for (auto& [c, v] : rq) t.emplace_back(n - 1, c, v);
        for (auto& [c, v] : rp) t.emplace_back(2 * n - 1, n + c, v);
        SpMat jac(2 * n, 2 * n);
        jac.setFromTriplets(t.begin(), t.end());
        Eigen::SparseLU<SpMat> lu;
        lu.compute(jac);
        if (lu.info() != Eigen::Success) throw SolverError("singular Newton matrix", residual);
        Vec dx = lu.solve(-f);
        q += dx.head(n);
        phi += dx.tail(n);
        if (dx.cwiseAbs().maxCoeff() < 1e-13) break;
    }
    residual = (lap * q - phi.cwiseProduct(q) - q).head(n - 1).cwiseAbs().maxCoeff();
    if (!(residual <= tol)) {
        std::ostringstream msg;
        msg << "ground state Newton did not converge after " << it << " iterations, residual " << std::scientific
            << residual;
        throw SolverError(msg.str(), residual);
    }
    for (int i = 0; i < n; ++i)
        if (!(q[i] > 0)) throw SolverError("ground state became non-positive", residual);

    GroundState gs;
    gs.grid = grid;
    gs.q = q;
    gs.phi = phi;
    gs.finalize();
    gs.residual = ground_state_residual(gs);
    return gs;
}

void GroundState::finalize() {
    RadialDiff d = radial_diff(grid, 1);
    dq = d.d1 * q;
    dq[0] = 0;
    lambda_q = 2.0 * q + to_vec(grid.r).cwiseProduct(dq);
    mass_sq = integrate_r2(grid, q.cwiseAbs2());
    spline = RadialSpline(grid, q, 1);
    // Exponential tail fit over the outer tenth of the grid.
    const int n = grid.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int cnt = 0;
    for (int i = 0; i < n; ++i) {
        if (grid.r[i] < 0.9 * grid.r_max) continue;
        double x = grid.r[i], y = std::log(q[i] * grid.r[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++cnt;
    }
    double slope = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
    double icpt = (sy - slope * sx) / cnt;
    tail_kappa = -slope;
    tail_amp = std::exp(icpt);
}

double GroundState::value(double r) const {
    r = std::abs(r);
    if (r <= grid.r_max) return spline(r);
    return tail_amp * std::exp(-tail_kappa * r) / r;
}

double ground_state_residual(const GroundState& gs) {
    SpMat lap = radial_laplacian(gs.grid, 0);
    Vec res = lap * gs.q - gs.phi.cwiseProduct(gs.q) - gs.q;
    return res.head(gs.grid.size() - 1).cwiseAbs().maxCoeff();
}

GradientFlowResult gradient_flow_ground_state(const RadialGrid& grid, double mass0, double tol, int max_iter) {
    // Implicit flow with the potential frozen per step, i.e. shifted inverse
    // iteration on Delta - phi_n; its fixed points are exact eigenfunctions.
    const int n = grid.size();
    const double shift = 0.1;
    SpMat lap = radial_laplacian(grid, 0);
    Vec u(n);
    for (int i = 0; i < n; ++i) u[i] = std::exp(-0.5 * grid.r[i] * grid.r[i] / 4.0);
    u *= std::sqrt(mass0 / integrate_r2(grid, u.cwiseAbs2()));

    GradientFlowResult res;
    res.mass0 = mass0;
    double energy = 1.0;
    Eigen::SparseLU<SpMat> lu;
    for (int it = 1; it <= max_iter; ++it) {
        Vec phi = newtonian_potential_radial(u.cwiseAbs2(), 0, grid);
        Vec hu = lap * u - phi.cwiseProduct(u);
        energy = dot_r2(grid, hu, u) / mass0;
        res.residual = (hu - energy * u).head(n - 1).cwiseAbs().maxCoeff() / u.cwiseAbs().maxCoeff();
        res.iterations = it - 1;
        if (res.residual < tol) break;

        std::vector<Eigen::Triplet<double>> t;
        for (int k = 0; k < lap.outerSize(); ++k)
            for (SpMat::InnerIterator e(lap, k); e; ++e)
                if (e.row() < n - 1) t.emplace_back(e.row(), e.col(), -e.value());
        for (int i = 0; i < n - 1; ++i) t.emplace_back(i, i, energy + shift + phi[i]);
        for (auto& [c, v] : robin_row(grid, 1, decay_rate(energy, mass0, grid.r_max))) t.emplace_back(n - 1, c, v);
        SpMat a(n, n);
        a.setFromTriplets(t.begin(), t.end());
        lu.compute(a);
        Vec b = u;
        b[n - 1] = 0;
        u = lu.solve(b);
        u *= std::sqrt(mass0 / integrate_r2(grid, u.cwiseAbs2()));
    }
    res.u = u;
    res.energy = energy;
    res.mass_sq = mass0 / std::sqrt(energy);
    return res;
}

GroundStateIdentities ground_state_identities(const GroundState& gs) {
    const RadialGrid& g = gs.grid;
    RadialDiff d = radial_diff(g, 1);
    Vec dphi = d.d1 * gs.phi;
    dphi[0] = 0;
    GroundStateIdentities id;
    id.mass_sq = gs.mass_sq;
    id.grad_q_sq = integrate_r2(g, gs.dq.cwiseAbs2());
    id.grad_phi_sq = integrate_r2(g, dphi.cwiseAbs2()) + gs.mass_sq * gs.mass_sq / (4.0 * M_PI * g.r_max);
    id.pohozaev_rel = (id.grad_q_sq - id.grad_phi_sq + id.mass_sq) / id.mass_sq;
    id.lambda_pair_rel = (dot_r2(g, gs.lambda_q, gs.q) - 0.5 * gs.mass_sq) / (0.5 * gs.mass_sq);
    id.tail_slope = -gs.tail_kappa;
    return id;
}

std::vector<double> evaluate_Q_3d(const GroundState& gs, const std::vector<std::array<double, 3>>& points) {
    std::vector<double> out;
    out.reserve(points.size());
    for (const auto& p : points) out.push_back(gs.value(std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2])));
    return out;
}

namespace {

static_assert(std::endian::native == std::endian::little, "GSQ1 io assumes a little-endian host");

void put_u32(std::ostream& o, std::uint32_t v) { o.write(reinterpret_cast<const char*>(&v), 4); }
void put_u64(std::ostream& o, std::uint64_t v) { o.write(reinterpret_cast<const char*>(&v), 8); }
std::uint32_t get_u32(std::istream& i) {
    std::uint32_t v = 0;
    i.read(reinterpret_cast<char*>(&v), 4);
    return v;
}
std::uint64_t get_u64(std::istream& i) {
    std::uint64_t v = 0;
    i.read(reinterpret_cast<char*>(&v), 8);
    return v;
}

void put_record(std::ostream& o, const std::string& name, const double* data, std::size_t count) {
    put_u32(o, static_cast<std::uint32_t>(name.size()));
    o.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u64(o, count);
    o.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(8 * count));
}

}  // namespace

void write_gsq1(const GroundState& gs, const std::string& path) {
    std::ofstream o(path, std::ios::binary);
    if (!o) throw std::runtime_error("cannot open " + path);
    o.write("GSQ1", 4);
    put_u32(o, 1);
    const double scalars[] = {gs.mass_sq, gs.grid.r_max, gs.grid.stretch, gs.residual, gs.tail_amp, gs.tail_kappa};
    const char* names[] = {"mass_sq", "r_max", "stretch", "residual", "tail_amp", "tail_kappa"};
    put_u32(o, 11);
    for (int k = 0; k < 6; ++k) put_record(o, names[k], &scalars[k], 1);
    put_record(o, "r", gs.grid.r.data(), gs.grid.r.size());
    put_record(o, "q", gs.q.data(), gs.q.size());
    put_record(o, "phi", gs.phi.data(), gs.phi.size());
    put_record(o, "dq", gs.dq.data(), gs.dq.size());
    put_record(o, "lambda_q", gs.lambda_q.data(), gs.lambda_q.size());
}

GroundState read_gsq1(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != "GSQ1") throw std::runtime_error(path + " is not a GSQ1 file");
    if (get_u32(in) != 1) throw std::runtime_error(path + ": unsupported GSQ1 version");
    std::uint32_t count = get_u32(in);
    std::map<std::string, std::vector<double>> rec;
    for (std::uint32_t k = 0; k < count; ++k) {
        std::string name(get_u32(in), '\0');
        in.read(name.data(), static_cast<std::streamsize>(name.size()));
        std::vector<double> data(get_u64(in));
        in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(8 * data.size()));
        if (!in) throw std::runtime_error(path + ": truncated record " + name);
        rec[name] = std::move(data);
    }
    for (const char* key : {"r", "q", "phi", "r_max", "stretch"})
        if (!rec.count(key)) throw std::runtime_error(path + ": missing record " + key);
    const int n = static_cast<int>(rec["r"].size());
    double stretch = rec["stretch"][0], rmax = rec["r_max"][0];
    GroundState gs;
    gs.grid = stretch > 0 ? RadialGrid::sinh_map(n, rmax, stretch) : RadialGrid::uniform(n, rmax);
    for (int i = 0; i < n; ++i)
        if (std::abs(gs.grid.r[i] - rec["r"][i]) > 1e-12 * rmax)
            throw std::runtime_error(path + ": radial nodes do not match a known grid family");
    gs.q = to_vec(rec["q"]);
    gs.phi = to_vec(rec["phi"]);
    gs.finalize();
    gs.residual = rec.count("residual") ? rec["residual"][0] : ground_state_residual(gs);
    return gs;
}

void write_ground_state_csv(const GroundState& gs, const std::string& path) {
    std::ofstream o(path);
    if (!o) throw std::runtime_error("cannot open " + path);
    o << "r,q,phi\n" << std::setprecision(17);
    for (int i = 0; i < gs.grid.size(); ++i) o << gs.grid.r[i] << ',' << gs.q[i] << ',' << gs.phi[i] << '\n';
}

}  // namespace hartree
