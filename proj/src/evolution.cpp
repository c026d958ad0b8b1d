#include "hartree/evolution.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace hartree {

std::vector<double> hartree_potential(const ComplexField3D& u, const Spectral& sp) { return sp.potential_of(u); }

Conserved conserved_quantities(const ComplexField3D& u, const Spectral& sp) {
    Conserved c;
    const double h3 = std::pow(u.h(), 3);
    c.mass = l2_norm_sq(u);
    const auto grad = sp.gradient(u);
    for (int d = 0; d < 3; ++d) {
        double s = 0;
        for (std::size_t i = 0; i < u.size(); ++i) s += std::imag(grad[d].data[i] * std::conj(u.data[i]));
        c.momentum[d] = s * h3;
    }
    const auto phi = sp.potential_of(u);
    double pe = 0;
    for (std::size_t i = 0; i < u.size(); ++i) pe += phi[i] * std::norm(u.data[i]);
    // -1/2 int |grad phi|^2 = 1/2 int phi |u|^2
    c.hamiltonian = sp.gradient_norm_sq(u) + 0.5 * pe * h3;
    return c;
}

Evolver::Evolver(int n, double L, PotentialMode mode, bool nonlinear)
    : sp_(std::make_shared<Spectral>(n, L, mode)), nonlinear_(nonlinear) {}

void Evolver::potential_phase(ComplexField3D& u, double dt) {
    if (!nonlinear_) return;
    const auto phi = sp_->potential_of(u);
    double pmax = 0;
    for (double p : phi) pmax = std::max(pmax, std::abs(p));
    const double cfl = std::abs(dt) * pmax;
    max_cfl_ = std::max(max_cfl_, cfl);
    if (cfl > cfl_limit) {
        if (cfl_warnings_ == 0)
            std::clog << "warning: dt*max|phi| = " << cfl << " exceeds " << cfl_limit << "; splitting error may be large\n";
        ++cfl_warnings_;
    }
    for (std::size_t i = 0; i < u.size(); ++i) u.data[i] *= std::polar(1.0, -phi[i] * dt);
}

void Evolver::step(ComplexField3D& u, double dt) { run(u, dt, 1); }

void Evolver::run(ComplexField3D& u, double dt, long n_steps, long every,
                  const std::function<void(const ComplexField3D&, long)>& observe) {
    if (n_steps <= 0) return;
    if (u.n != sp_->n() || u.L != sp_->L()) throw FieldError("evolver: grid mismatch");
    const double t0 = u.time;
    sp_->free_propagate(u, 0.5 * dt);
    for (long s = 1; s <= n_steps; ++s) {
        potential_phase(u, dt);
        if (s == n_steps) {
            sp_->free_propagate(u, 0.5 * dt);
            u.time = t0 + s * dt;
            if (observe) observe(u, s);
            break;
        }
        if (observe && every > 0 && s % every == 0) {
            sp_->free_propagate(u, 0.5 * dt);
            u.time = t0 + s * dt;
            observe(u, s);
            sp_->free_propagate(u, 0.5 * dt);
        } else {
            sp_->free_propagate(u, dt);
        }
    }
}

namespace {

struct Eval {
    Ansatz a;
    ComplexField3D eps;
    Eigen::VectorXd F;
};

Eval evaluate(const ComplexField3D& u, const ProfileSet& ps, const Eigen::VectorXd& x, const FitOptions& opt) {
    Eval e;
    e.a = build_ansatz(ps, unflatten(x), u.n, u.L, opt.boundary_tol, true);
    e.eps = u - e.a.R;
    const auto c = orthogonality_conditions(e.eps, e.a);
    e.F = Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
    return e;
}

Eigen::MatrixXd fd_jacobian(const ComplexField3D& u, const ProfileSet& ps, const Eigen::VectorXd& x,
                            const Eigen::VectorXd& F0, const FitOptions& opt) {
    Eigen::MatrixXd J(F0.size(), x.size());
    for (Eigen::Index c = 0; c < x.size(); ++c) {
        Eigen::VectorXd xp = x;
        xp[c] += opt.fd_step;
        J.col(c) = (evaluate(u, ps, xp, opt).F - F0) / opt.fd_step;
    }
    return J;
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

FitResult fit_modulation(const ComplexField3D& u, const ProfileSet& ps, const ModulationState& g_init,
                         const Spectral& sp, const FitOptions& opt) {
    Eigen::VectorXd x = flatten(g_init);
    Eval cur = evaluate(u, ps, x, opt);
    double res = cur.F.cwiseAbs().maxCoeff();
    Eigen::MatrixXd J;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr;
    bool fresh = false;
    double jcond = 0;
    int it = 0, stalls = 0;
    auto refresh = [&] {
        J = fd_jacobian(u, ps, x, cur.F, opt);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(J);
        const auto& s = svd.singularValues();
        jcond = s[s.size() - 1] > 0 ? s[0] / s[s.size() - 1] : HUGE_VAL;
        if (jcond > opt.max_cond) {
            std::ostringstream os;
            os << "modulation Jacobian condition number " << jcond << " exceeds " << opt.max_cond
               << "; solitons too close to separate";
            throw SeparationError(os.str(), jcond);
        }
        qr.compute(J);
        fresh = true;
    };
    while (res > opt.tol) {
        if (it >= opt.max_iter)
            throw FitError("modulation fit did not converge in " + std::to_string(opt.max_iter) + " iterations", to_std(cur.F));
        if (J.size() == 0) refresh();
        const Eigen::VectorXd dx = qr.solve(-cur.F);
        Eval next = evaluate(u, ps, x + dx, opt);
        const double r_next = next.F.cwiseAbs().maxCoeff();
        ++it;
        if (!(r_next < res) && fresh) {
            if (++stalls >= 3) throw FitError("modulation fit stagnated (outside the basin)", to_std(cur.F));
        }
        if (r_next < res || fresh) {
            x += dx;
            cur = std::move(next);
            const double ratio = r_next / res;
            res = r_next;
            fresh = false;
            if (ratio > 0.5 && res > opt.tol) refresh();
        } else {
            refresh();  // chord step failed; retry with a new Jacobian
        }
    }
    if (jcond == 0) {
        Eigen::MatrixXd J0 = fd_jacobian(u, ps, x, cur.F, opt);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(J0);
        const auto& s = svd.singularValues();
        jcond = s[s.size() - 1] > 0 ? s[0] / s[s.size() - 1] : HUGE_VAL;
    }

    FitResult out;
    out.g = unflatten(x);
    out.eps = std::move(cur.eps);
    out.conditions = to_std(cur.F);
    out.condition_norm = res;
    out.eps_l2 = std::sqrt(l2_norm_sq(out.eps));
    out.eps_h1 = std::sqrt(sp.h1_norm_sq(out.eps));
    out.jacobian_cond = jcond;
    out.iterations = it;
    return out;
}

EvolutionSummary evolve_backward_from_ansatz(const ProfileSet& ps, const CorrectedTrajectory& traj, double T_n,
                                             double T_end, const EvolveConfig& config, long snapshot_every,
                                             const SnapshotObserver& observer) {
    if (!(T_end < T_n)) throw FieldError("backward evolution needs T_end < T_n");
    if (!(config.dt > 0)) throw FieldError("time step must be positive");
    const long n_steps = static_cast<long>(std::ceil((T_n - T_end) / config.dt - 1e-9));
    const double dt = -(T_n - T_end) / n_steps;

    // the trajectory must stay inside the box
    const int checks = 64;
    for (int q = 0; q <= checks; ++q) {
        const double t = T_n + (T_end - T_n) * q / checks;
        try {
            check_placement(ps, traj.state_at(t), config.L, config.boundary_tol);
        } catch (const PlacementError& e) {
            std::ostringstream os;
            os << "at t = " << t << ": " << e.what();
            throw DomainError(os.str());
        }
    }

    Evolver ev(config.n, config.L, config.mode);
    const Spectral& sp = ev.spectral();
    ComplexField3D u = assemble_R(ps, traj.state_at(T_n), config.n, config.L, config.boundary_tol);
    u.time = T_n;

    EvolutionSummary sum;
    std::optional<ModulationState> last_fit;
    auto record = [&](const ComplexField3D& v) {
        EvolutionRecord rec;
        rec.t = v.time;
        rec.c = conserved_quantities(v, sp);
        const ModulationState g = traj.state_at(v.time);
        const ComplexField3D R = assemble_R(ps, g, config.n, config.L, config.boundary_tol);
        rec.h1_error = std::sqrt(sp.h1_norm_sq(v - R));
        if (config.fit) {
            rec.fit = fit_modulation(v, ps, last_fit ? *last_fit : g, sp, config.fit_options);
            last_fit = rec.fit->g;
        }
        if (observer) observer(v, rec);
        sum.records.push_back(std::move(rec));
    };
    record(u);
    ev.run(u, dt, n_steps, snapshot_every, [&](const ComplexField3D& v, long) { record(v); });

    const Conserved& c0 = sum.records.front().c;
    for (const auto& r : sum.records) {
        sum.mass_drift = std::max(sum.mass_drift, std::abs(r.c.mass - c0.mass) / c0.mass);
        sum.hamiltonian_drift =
            std::max(sum.hamiltonian_drift, std::abs(r.c.hamiltonian - c0.hamiltonian) / std::max(std::abs(c0.hamiltonian), 1e-300));
    }
    sum.steps = n_steps;
    sum.cfl_warnings = ev.cfl_warnings();
    return sum;
}

void write_evolution_csv(const EvolutionSummary& s, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw FieldError("cannot write " + path);
    f << std::setprecision(17);
    int m = 0;
    for (const auto& r : s.records)
        if (r.fit) m = std::max(m, r.fit->g.m());
    f << "t,mass,momentum_x,momentum_y,momentum_z,hamiltonian,H1_error";
    for (int j = 0; j < m; ++j)
        for (const char* c : {"alpha_x", "alpha_y", "alpha_z", "beta_x", "beta_y", "beta_z", "lambda", "gamma"})
            f << ',' << c << '_' << j;
    f << '\n';
    for (const auto& r : s.records) {
        f << r.t << ',' << r.c.mass << ',' << r.c.momentum.x() << ',' << r.c.momentum.y() << ',' << r.c.momentum.z() << ','
          << r.c.hamiltonian << ',' << r.h1_error;
        if (r.fit) {
            const Eigen::VectorXd x = flatten(r.fit->g);
            for (Eigen::Index i = 0; i < x.size(); ++i) f << ',' << x[i];
        } else {
            for (int i = 0; i < 8 * m; ++i) f << ',';
        }
        f << '\n';
    }
}

}  // namespace hartree
