#pragma once

#include "hartree/ansatz.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace hartree {

// Solitons leave the box during an evolution.
class DomainError : public FieldError {
public:
    using FieldError::FieldError;
};

// Modulation fit left its basin (stagnating Newton iteration).
class FitError : public std::runtime_error {
public:
    FitError(const std::string& what, std::vector<double> conditions)
        : std::runtime_error(what), conditions(std::move(conditions)) {}
    std::vector<double> conditions;
};

// Fit Jacobian near-singular: solitons too close to be told apart.
class SeparationError : public std::runtime_error {
public:
    SeparationError(const std::string& what, double cond) : std::runtime_error(what), cond(cond) {}
    double cond;
};

struct Conserved {
    double mass = 0;
    Vec3 momentum = Vec3::Zero();  // Im int grad u conj(u)
    double hamiltonian = 0;        // int |grad u|^2 - 1/2 int |grad phi|^2
};

Conserved conserved_quantities(const ComplexField3D& u, const Spectral& sp);
std::vector<double> hartree_potential(const ComplexField3D& u, const Spectral& sp);

// Strang splitting for i u_t = -Delta u + phi_{|u|^2} u.
class Evolver {
public:
    Evolver(int n, double L, PotentialMode mode = PotentialMode::isolated, bool nonlinear = true);

    const Spectral& spectral() const { return *sp_; }
    bool nonlinear() const { return nonlinear_; }
    double cfl_limit = 0.5;  // dt * max|phi| above this triggers a warning

    // One step K(dt/2) P(dt) K(dt/2); dt < 0 runs backwards.
    void step(ComplexField3D& u, double dt);
    // n_steps steps of size dt with the inner half steps fused; observe(u, k) after every `every` steps
    // and after the last one (u.time is kept current).
    void run(ComplexField3D& u, double dt, long n_steps, long every = 0,
             const std::function<void(const ComplexField3D&, long)>& observe = {});

    long cfl_warnings() const { return cfl_warnings_; }
    double max_cfl() const { return max_cfl_; }

private:
    void potential_phase(ComplexField3D& u, double dt);

    std::shared_ptr<Spectral> sp_;
    bool nonlinear_;
    long cfl_warnings_ = 0;
    double max_cfl_ = 0;
};

struct FitOptions {
    double tol = 1e-10;        // on every condition
    int max_iter = 30;
    double fd_step = 1e-6;     // Jacobian columns by forward differences
    double max_cond = 1e8;
    double boundary_tol = 1e-10;
};

struct FitResult {
    ModulationState g;
    ComplexField3D eps;
    std::vector<double> conditions;
    double condition_norm = 0;  // max |condition|
    double eps_l2 = 0, eps_h1 = 0;
    double jacobian_cond = 0;
    int iterations = 0;
};

// Newton on the 8m orthogonality conditions Re<u - R_g, D_k(g)> = 0.
FitResult fit_modulation(const ComplexField3D& u, const ProfileSet& ps, const ModulationState& g_init,
                         const Spectral& sp, const FitOptions& opt = {});

struct EvolveConfig {
    int n = 96;
    double L = 48;
    double dt = 5e-3;
    PotentialMode mode = PotentialMode::isolated;
    double boundary_tol = 1e-10;
    bool fit = false;          // fit the modulation parameters at every snapshot
    FitOptions fit_options;
};

struct EvolutionRecord {
    double t = 0;
    Conserved c;
    double h1_error = 0;  // ||u(t) - R(t)||_{H^1} along the trajectory
    std::optional<FitResult> fit;
};

struct EvolutionSummary {
    std::vector<EvolutionRecord> records;
    double mass_drift = 0;         // max relative
    double hamiltonian_drift = 0;  // max relative
    long steps = 0;
    long cfl_warnings = 0;
};

// Solve backwards from u(T_n) = R_{g(T_n)} to T_end along traj; snapshot every `snapshot_every` steps.
using SnapshotObserver = std::function<void(const ComplexField3D& u, const EvolutionRecord& rec)>;
EvolutionSummary evolve_backward_from_ansatz(const ProfileSet& ps, const CorrectedTrajectory& traj, double T_n,
                                             double T_end, const EvolveConfig& config, long snapshot_every = 0,
                                             const SnapshotObserver& observer = {});

void write_evolution_csv(const EvolutionSummary& s, const std::string& path);

}  // namespace hartree
