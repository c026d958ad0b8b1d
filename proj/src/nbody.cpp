#include "hartree/nbody.hpp"

#include <boost/numeric/odeint.hpp>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>

namespace odeint = boost::numeric::odeint;

namespace hartree {

std::string to_string(OrbitClass c) {
    switch (c) {
    case OrbitClass::hyperbolic: return "hyperbolic";
    case OrbitClass::parabolic: return "parabolic";
    case OrbitClass::mixed: return "mixed";
    }
    return "unknown";
}

OrbitClass orbit_class_from_string(const std::string& s) {
    if (s == "hyperbolic") return OrbitClass::hyperbolic;
    if (s == "parabolic") return OrbitClass::parabolic;
    if (s == "mixed") return OrbitClass::mixed;
    throw ConfigError("unknown orbit class '" + s + "'");
}

std::vector<double> BodyConfig::masses() const {
    std::vector<double> mu(lambdas.size());
    for (std::size_t j = 0; j < mu.size(); ++j) mu[j] = mass_sq / (4.0 * M_PI * lambdas[j]);
    return mu;
}

void BodyConfig::check() const {
    const int n = m();
    if (n < 1) throw ConfigError("at least one body required");
    if (static_cast<int>(alpha0.size()) != n || static_cast<int>(beta0.size()) != n)
        throw ConfigError("alpha0/beta0 size does not match lambdas");
    if (!(mass_sq > 0)) throw ConfigError("mass_sq must be positive");
    for (double l : lambdas)
        if (!(l > 0)) throw ConfigError("lambda must be positive");
    for (int j = 0; j < n; ++j)
        for (int k = j + 1; k < n; ++k)
            if ((alpha0[j] - alpha0[k]).norm() == 0)
                throw ConfigError("bodies " + std::to_string(j) + " and " + std::to_string(k) + " coincide");
}

State pack(const std::vector<Vec3>& alpha, const std::vector<Vec3>& beta) {
    const std::size_t m = alpha.size();
    State x(6 * m);
    for (std::size_t j = 0; j < m; ++j)
        for (int d = 0; d < 3; ++d) {
            x[3 * j + d] = alpha[j][d];
            x[3 * (m + j) + d] = beta[j][d];
        }
    return x;
}

void unpack(const State& x, std::vector<Vec3>& alpha, std::vector<Vec3>& beta) {
    const std::size_t m = x.size() / 6;
    alpha.resize(m);
    beta.resize(m);
    for (std::size_t j = 0; j < m; ++j) {
        alpha[j] = Vec3(x[3 * j], x[3 * j + 1], x[3 * j + 2]);
        beta[j] = Vec3(x[3 * (m + j)], x[3 * (m + j) + 1], x[3 * (m + j) + 2]);
    }
}

std::vector<Vec3> forces(const std::vector<Vec3>& alpha, const std::vector<double>& mu) {
    const std::size_t m = alpha.size();
    std::vector<Vec3> f(m, Vec3::Zero());
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t k = j + 1; k < m; ++k) {
            Vec3 d = alpha[j] - alpha[k];
            double r = d.norm();
            Vec3 u = d / (r * r * r);
            f[j] -= mu[k] * u;
            f[k] += mu[j] * u;
        }
    return f;
}

namespace {

double min_pair_distance(const State& x, std::size_t m) {
    double dmin = INFINITY;
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t k = j + 1; k < m; ++k) {
            double s = 0;
            for (int d = 0; d < 3; ++d) s += std::pow(x[3 * j + d] - x[3 * k + d], 2);
            dmin = std::min(dmin, std::sqrt(s));
        }
    return dmin;
}

void rhs_into(const State& x, State& dx, const std::vector<double>& mu, double min_distance, double t) {
    const std::size_t m = mu.size();
    dx.resize(x.size());
    if (min_distance > 0 && min_pair_distance(x, m) < min_distance) {
        std::ostringstream msg;
        msg << "collision at t = " << t;
        throw CollisionError(msg.str(), t);
    }
    for (std::size_t i = 0; i < 3 * m; ++i) dx[i] = 2.0 * x[3 * m + i];
    for (std::size_t i = 3 * m; i < 6 * m; ++i) dx[i] = 0;
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t k = j + 1; k < m; ++k) {
            double d[3], s = 0;
            for (int c = 0; c < 3; ++c) {
                d[c] = x[3 * j + c] - x[3 * k + c];
                s += d[c] * d[c];
            }
            double inv3 = 1.0 / (s * std::sqrt(s));
            for (int c = 0; c < 3; ++c) {
                dx[3 * (m + j) + c] -= mu[k] * d[c] * inv3;
                dx[3 * (m + k) + c] += mu[j] * d[c] * inv3;
            }
        }
}

double initial_scale(const BodyConfig& c) {
    double a = INFINITY;
    for (int j = 0; j < c.m(); ++j)
        for (int k = j + 1; k < c.m(); ++k) a = std::min(a, (c.alpha0[j] - c.alpha0[k]).norm());
    return std::isfinite(a) ? a : 1.0;
}

void record(NBodyPath& p, const State& x, double t) {
    std::vector<Vec3> a, b;
    unpack(x, a, b);
    p.times.push_back(t);
    p.alpha.push_back(std::move(a));
    p.beta.push_back(std::move(b));
}

NBodyPath empty_path(const BodyConfig& c) {
    NBodyPath p;
    p.kind = c.kind;
    p.clusters = c.clusters;
    p.lambdas = c.lambdas;
    p.mass_sq = c.mass_sq;
    return p;
}

}  // namespace

State rhs(const State& x, const std::vector<double>& mu, double min_distance, double t) {
    State dx;
    rhs_into(x, dx, mu, min_distance, t);
    return dx;
}

double energy(const std::vector<Vec3>& alpha, const std::vector<Vec3>& beta, const std::vector<double>& mu) {
    double e = 0;
    for (std::size_t j = 0; j < alpha.size(); ++j) {
        e += mu[j] * beta[j].squaredNorm();
        for (std::size_t k = j + 1; k < alpha.size(); ++k) e -= mu[j] * mu[k] / (alpha[j] - alpha[k]).norm();
    }
    return e;
}

Vec3 weighted_momentum(const std::vector<Vec3>& beta, const std::vector<double>& lambdas) {
    Vec3 p = Vec3::Zero();
    for (std::size_t j = 0; j < beta.size(); ++j) p += beta[j] / lambdas[j];
    return p;
}

double NBodyPath::min_separation(std::size_t i) const {
    double a = INFINITY;
    const auto& al = alpha[i];
    for (std::size_t j = 0; j < al.size(); ++j)
        for (std::size_t k = j + 1; k < al.size(); ++k) a = std::min(a, (al[j] - al[k]).norm());
    return a;
}

NBodyPath integrate(const BodyConfig& config, double t1, double tol) {
    config.check();
    if (!(t1 > config.t0)) throw ConfigError("integrate requires t0 < t1");
    const auto mu = config.masses();
    const double guard = 1e-6 * initial_scale(config);
    auto sys = [&](const State& x, State& dx, double t) { rhs_into(x, dx, mu, guard, t); };
    NBodyPath path = empty_path(config);
    State x = pack(config.alpha0, config.beta0);
    auto stepper = odeint::make_controlled(tol, tol, odeint::runge_kutta_fehlberg78<State>());
    double dt0 = 1e-3 * std::max(1.0, std::abs(config.t0));
    odeint::integrate_adaptive(stepper, sys, x, config.t0, t1, dt0,
                               [&](const State& s, double t) { record(path, s, t); });
    return path;
}

NBodyPath integrate_at(const BodyConfig& config, const std::vector<double>& times, double tol) {
    config.check();
    if (times.empty()) throw ConfigError("no sample times");
    const auto mu = config.masses();
    const double guard = 1e-6 * initial_scale(config);
    auto sys = [&](const State& x, State& dx, double t) { rhs_into(x, dx, mu, guard, t); };
    NBodyPath path = empty_path(config);
    State x = pack(config.alpha0, config.beta0);
    std::vector<double> ts;
    ts.reserve(times.size() + 1);
    if (times.front() != config.t0) ts.push_back(config.t0);
    ts.insert(ts.end(), times.begin(), times.end());
    if (ts.size() == 1) {
        record(path, x, ts[0]);
        return path;
    }
    const double dir = ts.back() > ts.front() ? 1.0 : -1.0;
    for (std::size_t i = 1; i < ts.size(); ++i)
        if ((ts[i] - ts[i - 1]) * dir <= 0) throw ConfigError("sample times must be strictly monotone");
    auto stepper = odeint::make_controlled(tol, tol, odeint::runge_kutta_fehlberg78<State>());
    double dt0 = dir * 1e-3 * std::min(std::abs(ts[1] - ts[0]), std::max(1.0, std::abs(config.t0)));
    const bool skip_first = times.front() != config.t0;
    bool first = true;
    odeint::integrate_times(stepper, sys, x, ts.begin(), ts.end(), dt0, [&](const State& s, double t) {
        if (first && skip_first) {
            first = false;
            return;
        }
        first = false;
        record(path, s, t);
    });
    return path;
}

double parabolic_prefactor(const std::vector<Vec3>& b, const std::vector<double>& mu) {
    const std::size_t m = b.size();
    if (m < 2) throw ConfigError("parabolic cluster needs at least two bodies");
    double num = 0, den = 0;
    std::vector<Vec3> f(m, Vec3::Zero());
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t k = 0; k < m; ++k) {
            if (k == j) continue;
            Vec3 d = b[j] - b[k];
            double r = d.norm();
            if (r == 0) throw ConfigError("coincident parabolic targets");
            f[j] += 9.0 * mu[k] * d / (r * r * r);
        }
    for (std::size_t j = 0; j < m; ++j) {
        num += f[j].dot(b[j]);
        den += b[j].squaredNorm();
    }
    if (!(den > 0) || !(num > 0)) throw ConfigError("parabolic shape is not a central configuration");
    double c3 = num / den;
    double err = 0, scale = 0;
    for (std::size_t j = 0; j < m; ++j) {
        err = std::max(err, (f[j] - c3 * b[j]).norm());
        scale = std::max(scale, f[j].norm());
    }
    if (err > 1e-8 * scale)
        throw ConfigError("parabolic shape is not a central configuration (mismatch " + std::to_string(err / scale) + ")");
    return std::cbrt(c3);
}

BodyConfig make_asymptotic_initial_data(OrbitClass kind, const AsymptoticTargets& targets,
                                        const std::vector<double>& lambdas, double mass_sq, double t_start) {
    const std::size_t m = lambdas.size();
    if (!(t_start > 0)) throw ConfigError("t_start must be positive");
    BodyConfig c;
    c.lambdas = lambdas;
    c.mass_sq = mass_sq;
    c.t0 = t_start;
    c.kind = kind;
    c.alpha0.assign(m, Vec3::Zero());
    c.beta0.assign(m, Vec3::Zero());
    const auto mu = c.masses();
    const double tol = 1e-12;

    auto need = [&](const std::vector<Vec3>& v, const char* name) {
        if (v.size() != m) throw ConfigError(std::string("expected ") + std::to_string(m) + " " + name + " targets");
    };

    if (kind == OrbitClass::hyperbolic) {
        need(targets.a, "a");
        for (std::size_t j = 0; j < m; ++j)
            for (std::size_t k = j + 1; k < m; ++k)
                if ((targets.a[j] - targets.a[k]).norm() <= tol) throw ConfigError("coincident hyperbolic targets");
        for (std::size_t j = 0; j < m; ++j) {
            c.alpha0[j] = targets.a[j] * t_start;
            c.beta0[j] = 0.5 * targets.a[j];
            c.clusters.push_back({static_cast<int>(j)});
        }
        return c;
    }

    need(targets.b, "b");
    std::vector<Vec3> a = targets.a;
    if (kind == OrbitClass::parabolic) a.assign(m, Vec3::Zero());
    need(a, "a");

    std::vector<int> owner(m, -1);
    for (std::size_t j = 0; j < m; ++j) {
        if (owner[j] >= 0) continue;
        owner[j] = static_cast<int>(c.clusters.size());
        c.clusters.push_back({static_cast<int>(j)});
        for (std::size_t k = j + 1; k < m; ++k)
            if (owner[k] < 0 && (a[j] - a[k]).norm() <= tol) {
                owner[k] = owner[j];
                c.clusters.back().push_back(static_cast<int>(k));
            }
    }
    if (kind == OrbitClass::mixed && c.clusters.size() < 2) throw ConfigError("mixed data needs at least two distinct a");

    for (const auto& cl : c.clusters) {
        if (cl.size() == 1) {
            int j = cl[0];
            c.alpha0[j] = a[j] * t_start;
            c.beta0[j] = 0.5 * a[j];
            continue;
        }
        std::vector<Vec3> b;
        std::vector<double> mu_c;
        for (int j : cl) {
            b.push_back(targets.b[j]);
            mu_c.push_back(mu[j]);
        }
        double cc = parabolic_prefactor(b, mu_c);
        const double s = std::cbrt(t_start * t_start);
        for (int j : cl) {
            c.alpha0[j] = a[j] * t_start + cc * targets.b[j] * s;
            c.beta0[j] = 0.5 * a[j] + cc * targets.b[j] / (3.0 * std::cbrt(t_start));
        }
    }
    return c;
}

std::vector<PairRate> fit_asymptotic_rates(const NBodyPath& path, double t_from) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < path.size(); ++i)
        if (path.times[i] >= t_from && path.times[i] > 0) idx.push_back(i);
    if (idx.size() < 3) throw std::range_error("too few samples for a rate fit");
    const double t_lo = path.times[idx.front()], t_hi = path.times[idx.back()];
    if (t_hi < 100.0 * t_lo) throw std::range_error("rate fit needs at least two decades in t");

    std::map<int, int> owner;
    for (std::size_t c = 0; c < path.clusters.size(); ++c)
        for (int j : path.clusters[c]) owner[j] = static_cast<int>(c);

    // Samples are weighted uniformly in log t so dense early steps do not dominate.
    const int m = static_cast<int>(path.alpha.front().size());
    std::vector<PairRate> out;
    for (int j = 0; j < m; ++j)
        for (int k = j + 1; k < m; ++k) {
            double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
            for (std::size_t q = 0; q < idx.size(); ++q) {
                std::size_t i = idx[q];
                double x = std::log(path.times[i]);
                double y = std::log((path.alpha[i][j] - path.alpha[i][k]).norm());
                double xl = q > 0 ? std::log(path.times[idx[q - 1]]) : x;
                double xr = q + 1 < idx.size() ? std::log(path.times[idx[q + 1]]) : x;
                double w = 0.5 * (xr - xl);
                sw += w;
                sx += w * x;
                sy += w * y;
                sxx += w * x * x;
                sxy += w * x * y;
            }
            PairRate r;
            r.j = j;
            r.k = k;
            r.slope = (sw * sxy - sx * sy) / (sw * sxx - sx * sx);
            r.prefactor = std::exp((sy - r.slope * sx) / sw);
            r.same_cluster = owner.count(j) && owner.count(k) && owner[j] == owner[k];
            r.classified = std::abs(r.slope - 1.0) < std::abs(r.slope - 2.0 / 3.0) ? OrbitClass::hyperbolic
                                                                                    : OrbitClass::parabolic;
            out.push_back(r);
        }
    return out;
}

void write_path_csv(const NBodyPath& path, const std::string& file) {
    std::ofstream o(file);
    if (!o) throw std::runtime_error("cannot write " + file);
    const std::size_t m = path.alpha.empty() ? 0 : path.alpha.front().size();
    o << "t";
    for (std::size_t j = 0; j < m; ++j)
        for (const char* c : {"ax", "ay", "az", "bx", "by", "bz"}) o << ',' << c << j;
    o << '\n' << std::setprecision(17);
    for (std::size_t i = 0; i < path.size(); ++i) {
        o << path.times[i];
        for (std::size_t j = 0; j < m; ++j) {
            for (int d = 0; d < 3; ++d) o << ',' << path.alpha[i][j][d];
            for (int d = 0; d < 3; ++d) o << ',' << path.beta[i][j][d];
        }
        o << '\n';
    }
}

void write_rates_json(const std::vector<PairRate>& rates, const std::string& file) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : rates)
        j.push_back({{"j", r.j},
                     {"k", r.k},
                     {"slope", r.slope},
                     {"prefactor", r.prefactor},
                     {"same_cluster", r.same_cluster},
                     {"class", to_string(r.classified)}});
    std::ofstream o(file);
    if (!o) throw std::runtime_error("cannot write " + file);
    o << j.dump(2) << '\n';
}

}  // namespace hartree
