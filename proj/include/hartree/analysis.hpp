#pragma once

#include "hartree/ansatz.hpp"
#include "hartree/evolution.hpp"

#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace hartree {

class AnalysisError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Coercivity problem too coarse: the known kernel does not show up near zero.
class ResolutionError : public AnalysisError {
public:
    ResolutionError(const std::string& what, double eigenvalue) : AnalysisError(what), eigenvalue(eigenvalue) {}
    double eigenvalue;
};

// Fewer samples or a shorter time range than a power-law fit needs.
class RangeError : public AnalysisError {
public:
    using AnalysisError::AnalysisError;
};

// Mod(t) = sum_j |alpha' - 2 beta| + |beta' - B_j(P)| + |lambda' - M_j(P)| + |gamma' + 1/lambda^2 - |beta|^2 - beta'.alpha|
// with time derivatives by 5-point differences on the (possibly nonuniform) sample times.
struct ModulationErrorSeries {
    std::vector<double> t, mod;
    std::vector<std::vector<double>> per_soliton;
};
ModulationErrorSeries modulation_error(const std::vector<double>& t, const std::vector<ModulationState>& g,
                                       const Coefficients& co);

// Smooth partition of unity attached to the solitons: phi_j = Phi^2((x - alpha_j)/s) for j < m-1 and the
// complement for the last one, with s the minimal separation and Phi = 1 - (1 - Phi_0)^2, Phi_0 a
// smooth step equal to 1 on B_r and 0 outside B_R.
struct CutoffFamily {
    int n = 0;
    double L = 0;
    double scale = 0;  // s
    double r_in = 0.2, r_out = 0.4;
    std::vector<std::vector<double>> phi;          // per soliton
    std::vector<std::vector<double>> grad_norm;    // |grad phi_j|
    std::vector<std::vector<double>> grad_sqrt;    // |grad sqrt(phi_j)|
    std::vector<std::vector<double>> cluster_phi;  // mixed case: phi_J per cluster
    std::vector<std::vector<int>> clusters;
};

// Phi on the unit scale and its radial derivative.
double cutoff_profile(double rho, double r_in = 0.2, double r_out = 0.4);
double cutoff_profile_prime(double rho, double r_in = 0.2, double r_out = 0.4);

// Clusters empty: one weight per soliton. Otherwise phi_j = phi_J psi_j with phi_J built from cluster
// centres at the inter-cluster scale and psi_j from positions inside the cluster at its own scale.
CutoffFamily build_cutoffs(const std::vector<Vec3>& alpha, int n, double L,
                           const std::vector<std::vector<int>>& clusters = {}, double r_in = 0.2,
                           double r_out = 0.4);

struct GFunctional {
    double G = 0, G1 = 0, G2 = 0, G3 = 0;
};
GFunctional functional_G(const ComplexField3D& eps, const ComplexField3D& R, const ModulationState& g,
                         const CutoffFamily& cut, const Spectral& sp);

// Band-limited Gaussian fields with the 8m orthogonality functionals removed by the H^1-orthogonal
// projection (Riesz representers (1 - Delta)^{-1} D_k), scaled to a given H^1 norm.
class OrthogonalSampler {
public:
    OrthogonalSampler(const Ansatz& a, const Spectral& sp);
    ComplexField3D draw(std::mt19937_64& rng, double h1_norm, double k_band = 1.5) const;
    // Removes the orthogonality components of any field (in place).
    void project(ComplexField3D& f) const;

private:
    const Spectral& sp_;
    std::vector<ComplexField3D> dirs_, riesz_;
    Eigen::LDLT<Eigen::MatrixXd> gram_;
};

enum class LinearOperator { Lplus, Lminus };
std::string to_string(LinearOperator op);

struct CoercivityResult {
    LinearOperator op = LinearOperator::Lplus;
    int ell = 0;
    int grid_points = 0;
    std::vector<double> unprojected;  // smallest generalized eigenvalues (L v, v) / ||v||_{H^1}^2
    std::vector<double> projected;    // after removing the orthogonality directions
    std::string projection;           // description of the removed directions
};

// Rayleigh quotients of L+ or L- on the harmonic degree ell against the H^1 form, dense generalized
// eigenproblem on the radial grid of gs. ell = 0, 1 carry the orthogonality projections.
CoercivityResult coercivity_spectrum(const GroundState& gs, LinearOperator op, int ell, int count = 4,
                                     double kernel_tol = 1e-3);

struct PowerFit {
    double exponent = 0, prefactor = 0;
    double ci_low = 0, ci_high = 0;  // 95% interval of the exponent
    double r2 = 0;
};
PowerFit fit_power_law(const std::vector<double>& t, const std::vector<double>& y);

struct EnvelopeReport {
    std::string name;
    PowerFit fit;             // fit of the running envelope sup_{s >= t} |y(s)|
    int violations = 0;       // samples above twice the fitted envelope
    bool decaying = false;    // exponent and its upper confidence bound negative
};

struct GronwallReport {
    EnvelopeReport eps_h1, G, dG, mod;
};

// Needs >= 30 samples spanning >= one decade of t.
GronwallReport gronwall_report(const std::vector<double>& t, const std::vector<double>& eps_h1,
                               const std::vector<double>& G, const std::vector<double>& mod);
EnvelopeReport envelope(const std::string& name, const std::vector<double>& t, const std::vector<double>& y);

}  // namespace hartree
