#pragma once

#include "hartree/radial.hpp"

#include <array>
#include <string>
#include <vector>

namespace hartree {

class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, double last_residual)
        : std::runtime_error(what), last_residual(last_residual) {}
    double last_residual;
};

// Radial ground state of Delta Q - phi_{Q^2} Q = Q.
struct GroundState {
    RadialGrid grid;
    Vec q;
    Vec phi;
    Vec dq;
    Vec lambda_q;  // 2Q + r Q'
    double mass_sq = 0;
    double residual = 0;
    // q ~ tail_amp * exp(-tail_kappa r) / r beyond r_max
    double tail_amp = 0, tail_kappa = 1;
    RadialSpline spline;

    double value(double r) const;
    void finalize();  // derived arrays, spline, tail fit
};

struct ShootingResult {
    double phi0 = 0;     // Phi(0) of the unit-height profile
    double energy = 0;   // eigenvalue E of the unit-height profile
    double scale = 0;    // lambda = E^{-1/2}
    double r_valid = 0;  // radius up to which the shot is trusted (unscaled)
};

// Bisection on Phi(0) for U(0) = 1, Delta U = Phi U, Delta Phi = U^2.
ShootingResult shoot_unit_profile(double tol = 1e-15);

GroundState solve_ground_state(const RadialGrid& grid, double tol = 1e-10, int max_iter = 40);

// Normalized imaginary-time flow at fixed mass; used as an independent check.
struct GradientFlowResult {
    Vec u;
    double energy = 0;   // Delta u - phi u = energy * u
    double mass0 = 0;
    double mass_sq = 0;  // mass of the rescaled profile with unit frequency
    double residual = 0;
    int iterations = 0;
};
GradientFlowResult gradient_flow_ground_state(const RadialGrid& grid, double mass0 = 40.0,
                                              double tol = 1e-9, int max_iter = 2000);

struct GroundStateIdentities {
    double grad_q_sq = 0;    // ||grad Q||^2
    double grad_phi_sq = 0;  // ||grad phi||^2 including the exterior monopole tail
    double mass_sq = 0;
    double pohozaev_rel = 0;  // (||grad Q||^2 - ||grad phi||^2 + ||Q||^2) / ||Q||^2
    double lambda_pair_rel = 0;  // ((Lambda Q, Q) - M/2) / (M/2)
    double tail_slope = 0;
};
GroundStateIdentities ground_state_identities(const GroundState& gs);

// Discrete residual Delta Q - phi Q - Q (sup over interior nodes).
double ground_state_residual(const GroundState& gs);

std::vector<double> evaluate_Q_3d(const GroundState& gs, const std::vector<std::array<double, 3>>& points);

void write_gsq1(const GroundState& gs, const std::string& path);
GroundState read_gsq1(const std::string& path);
void write_ground_state_csv(const GroundState& gs, const std::string& path);

}  // namespace hartree
