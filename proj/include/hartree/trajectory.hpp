#pragma once

#include "hartree/nbody.hpp"
#include "hartree/profiles.hpp"

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace hartree {

class TrajectoryError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Contraction failed: the Picard differences stopped shrinking fast enough.
class ContractionError : public TrajectoryError {
public:
    ContractionError(const std::string& what, double ratio) : TrajectoryError(what), ratio(ratio) {}
    double ratio;
};

using CoefficientFunctions = Coefficients;

struct PicardOptions {
    double T0 = 100;
    double horizon = 1e5;
    int nodes = 3000;          // geometric time nodes on [T0, horizon]
    double epsilon = 0.1;      // weight exponent; 1/100 is used for parabolic data
    double tol = 1e-10;
    int max_iter = 60;
    double max_ratio = 0.6;
    double kappa = 1.0 / 3.0;  // decay margin of the parabolic remainder, F ~ t^{-2-kappa}
    bool sequential = true;    // update lambda, then beta, then alpha within one sweep
};

struct CorrectedTrajectory {
    OrbitClass kind = OrbitClass::hyperbolic;
    double T0 = 0, horizon = 0, epsilon = 0;
    std::vector<double> times;
    std::vector<Params> P;       // P^(N)
    std::vector<Params> ref;     // P^infinity (constant lambda)
    std::vector<Params> tilde;   // parabolic comparison path (empty for hyperbolic)
    std::vector<std::vector<double>> gamma;
    Coefficients coeffs;
    int iterations = 0;
    std::vector<double> differences;  // weighted norm of successive iterates
    std::vector<double> ratios;

    std::size_t size() const { return times.size(); }
    // Parameters and phase at any t, by integrating the modulation system from the nearest node.
    ModulationState state_at(double t) const;
    double weighted_norm = 0;  // final deviation from the reference in the contraction norm

    // Pointwise max_j |alpha_j - alpha_j^inf| etc.; total is the Euclidean norm of the stacked difference.
    struct Deviation {
        double alpha = 0, beta = 0, lambda = 0, total = 0;
    };
    Deviation deviation(std::size_t i) const;
};

// Time derivative of P under alpha' = 2 beta, beta' = B(P), lambda' = M(P).
Params modulation_rhs(const Params& P, const Coefficients& co);
// Phase law gamma' = -1/lambda^2 + |beta|^2 + beta'.alpha.
std::vector<double> gamma_rate(const Params& P, const Params& dP);

// Sample an m-body path at the given times; lambdas are held constant.
std::vector<Params> sample_reference(const BodyConfig& config, const std::vector<double>& times);

CorrectedTrajectory picard_hyperbolic(const BodyConfig& reference, const Coefficients& co, const PicardOptions& opt);
CorrectedTrajectory picard_parabolic(const BodyConfig& reference, const Coefficients& co, const PicardOptions& opt);

// lambda~_j = lambda_j - sum_k lambda_j^3 M / (8 pi lambda_k |alpha_jk|) along the reference path.
std::vector<Params> build_tilde_trajectory(const std::vector<Params>& reference, double mass_sq);

// d b^(2) / d alpha at P (3m x 3m), block (j, k) = d b_j / d alpha_k.
Eigen::MatrixXd force_jacobian(const Params& P, double mass_sq);

// Green operators for x'' - a(a-1) x / t^2 = f on the samples (t_i, f_i).
// G_a integrates from times.front() when Re(a) <= -kappa and from infinity otherwise;
// the tail past times.back() assumes f ~ t^{-tail_power}.
struct GreenResult {
    std::vector<std::complex<double>> x, dx;
};
GreenResult green_G(std::complex<double> a, const std::vector<double>& t, const std::vector<std::complex<double>>& f,
                    double kappa, double tail_power);
// d/da G_a f.
GreenResult green_G_da(std::complex<double> a, const std::vector<double>& t, const std::vector<std::complex<double>>& f,
                       double kappa, double tail_power);
// G_{a,b} with a, b the roots of s^2 - s = c; solves x'' = c x / t^2 + f.
GreenResult green_operator(std::complex<double> c, const std::vector<double>& t,
                           const std::vector<std::complex<double>>& f, double kappa, double tail_power = 2.5);

// Phases by quadrature of the phase law with gamma(times.front()) = 0.
std::vector<std::vector<double>> gamma_integrate(const std::vector<double>& times, const std::vector<Params>& P,
                                                 const Coefficients& co);

// max over interior nodes of |P' - F(P)| using 4th-order differences on the log grid, per unit |P'|.
double fixed_point_residual(const CorrectedTrajectory& traj);

// Cumulative integral from each node to the last one.
// Nodes need not be geometric; piecewise cubic in log t (in t when t starts at or below 0).
std::vector<double> integrate_to_end(const std::vector<double>& t, const std::vector<double>& f);
std::vector<double> integrate_from_start(const std::vector<double>& t, const std::vector<double>& f);
std::vector<double> geometric_nodes(double t0, double t1, int n);

void write_trajectory_csv(const CorrectedTrajectory& traj, const std::string& file);
void write_trajectory_json(const CorrectedTrajectory& traj, const std::string& file);

}  // namespace hartree
