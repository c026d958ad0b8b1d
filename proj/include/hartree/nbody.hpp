#pragma once

#include "hartree/params.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace hartree {

enum class OrbitClass { hyperbolic, parabolic, mixed };

std::string to_string(OrbitClass c);
OrbitClass orbit_class_from_string(const std::string& s);

class CollisionError : public std::runtime_error {
public:
    CollisionError(const std::string& what, double time) : std::runtime_error(what), time(time) {}
    double time;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// alpha' = 2 beta, beta_j' = -sum_k mu_k alpha_jk / |alpha_jk|^3 with mu_k = mass_sq / (4 pi lambda_k).
struct BodyConfig {
    std::vector<double> lambdas;
    double mass_sq = 0;
    std::vector<Vec3> alpha0, beta0;
    double t0 = 0;
    OrbitClass kind = OrbitClass::hyperbolic;
    std::vector<std::vector<int>> clusters;  // filled for mixed data

    int m() const { return static_cast<int>(lambdas.size()); }
    std::vector<double> masses() const;
    void check() const;
};

// Flat state layout: alpha_0, ..., alpha_{m-1}, beta_0, ..., beta_{m-1}.
using State = std::vector<double>;
State pack(const std::vector<Vec3>& alpha, const std::vector<Vec3>& beta);
void unpack(const State& x, std::vector<Vec3>& alpha, std::vector<Vec3>& beta);

// Derivative of the flat state. min_distance <= 0 disables the collision guard.
State rhs(const State& x, const std::vector<double>& mu, double min_distance = 0, double t = 0);

// Acceleration of beta (the force law) for given positions.
std::vector<Vec3> forces(const std::vector<Vec3>& alpha, const std::vector<double>& mu);

double energy(const std::vector<Vec3>& alpha, const std::vector<Vec3>& beta, const std::vector<double>& mu);
Vec3 weighted_momentum(const std::vector<Vec3>& beta, const std::vector<double>& lambdas);

struct NBodyPath {
    std::vector<double> times;
    std::vector<std::vector<Vec3>> alpha, beta;
    OrbitClass kind = OrbitClass::hyperbolic;
    std::vector<std::vector<int>> clusters;
    std::vector<double> lambdas;
    double mass_sq = 0;

    std::size_t size() const { return times.size(); }
    double min_separation(std::size_t i) const;
};

// Adaptive RKF78 from config.t0 to t1; records every accepted step.
NBodyPath integrate(const BodyConfig& config, double t1, double tol = 1e-12);
// Same system sampled at the requested (monotone) times, which may run backwards.
NBodyPath integrate_at(const BodyConfig& config, const std::vector<double>& times, double tol = 1e-12);

struct AsymptoticTargets {
    std::vector<Vec3> a;  // hyperbolic velocities (equal within a cluster for mixed data)
    std::vector<Vec3> b;  // parabolic shape, centered per cluster
};

// Leading-order data at t_start. For parabolic shapes the prefactor c solves
// c^3 b_j = 9 sum_k mu_k b_jk / |b_jk|^3, which requires a central configuration.
BodyConfig make_asymptotic_initial_data(OrbitClass kind, const AsymptoticTargets& targets,
                                        const std::vector<double>& lambdas, double mass_sq, double t_start);

// Prefactor c of a parabolic cluster; throws ConfigError if b is not central.
double parabolic_prefactor(const std::vector<Vec3>& b, const std::vector<double>& mu);

struct PairRate {
    int j = 0, k = 0;
    double slope = 0;
    double prefactor = 0;  // exp(intercept)
    bool same_cluster = false;
    OrbitClass classified = OrbitClass::hyperbolic;
};

// Least-squares slope of log |alpha_jk| against log t over samples with t >= t_from.
std::vector<PairRate> fit_asymptotic_rates(const NBodyPath& path, double t_from = 0);

void write_path_csv(const NBodyPath& path, const std::string& file);
void write_rates_json(const std::vector<PairRate>& rates, const std::string& file);

}  // namespace hartree
