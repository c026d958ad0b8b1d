#pragma once

#include "hartree/field.hpp"
#include "hartree/profiles.hpp"
#include "hartree/trajectory.hpp"

#include <array>
#include <vector>

namespace hartree {

// A soliton sits too close to the box boundary (its tail there exceeds the tolerance).
class PlacementError : public FieldError {
public:
    using FieldError::FieldError;
};

// Number of orthogonality conditions per soliton.
constexpr int kConditionsPerSoliton = 8;

// Values of g_j V_j on the ball around alpha_j outside which the profile is below 1% of the
// boundary tolerance, and the eight directions whose
// real inner products with epsilon are the orthogonality conditions:
//   V, y_1 V, y_2 V, y_3 V, i Lambda V, i d_1 V, i d_2 V, i d_3 V (all acted on by g_j).
struct SolitonPatch {
    int j = 0;
    std::vector<std::size_t> idx;
    std::vector<cplx> value;
    std::array<std::vector<cplx>, kConditionsPerSoliton> dir;
};

struct Ansatz {
    ComplexField3D R;
    std::vector<SolitonPatch> patches;
};

// R_g = sum_j lambda_j^{-2} V_j((x - alpha_j)/lambda_j) e^{-i gamma_j + i beta_j.x}.
// Throws PlacementError when lambda^{-2} Q(d / lambda) > boundary_tol at the nearest box face.
Ansatz build_ansatz(const ProfileSet& ps, const ModulationState& g, int n, double L, double boundary_tol = 1e-10,
                    bool with_directions = false);
ComplexField3D assemble_R(const ProfileSet& ps, const ModulationState& g, int n, double L, double boundary_tol = 1e-10);
void check_placement(const ProfileSet& ps, const ModulationState& g, double L, double boundary_tol);

// Re<eps, D> for every direction of every soliton (8 m values, soliton-major).
std::vector<double> orthogonality_conditions(const ComplexField3D& eps, const Ansatz& a);
// Directions as full fields, same order as the conditions.
std::vector<ComplexField3D> orthogonality_directions(const Ansatz& a);

// Residual Psi = i d_t R + Delta R - phi_{|R|^2} R.
struct ResidualReport {
    double l2 = 0;
    double sup = 0;
    std::vector<double> per_soliton_l2;
};

// Soliton-frame evaluation for radial profiles (N <= 2): each Psi_j is assembled on the radial
// grid with the exact potentials of the other solitons and integrated over (r, angle).
// Cross terms between solitons (O(e^{-a})) are dropped.
ResidualReport residual_semianalytic(const ProfileSet& ps, const Params& P, int n_phi = 16);

// Spectral residual on a grid along a trajectory; d_t R by centred differences with a Richardson check.
struct ResidualField {
    ComplexField3D psi;
    ResidualReport norms;
    double richardson_gap = 0;  // relative disagreement of the two difference steps
};
ResidualField residual_Psi(const ProfileSet& ps, const CorrectedTrajectory& traj, double t, int n, double L,
                           PotentialMode mode = PotentialMode::padded, double boundary_tol = 1e-10,
                           double max_gap = 1e-3);

}  // namespace hartree
