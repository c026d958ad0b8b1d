#pragma once

#include "hartree/groundstate.hpp"
#include "hartree/params.hpp"

#include <complex>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace hartree {

constexpr int kMaxProfileOrder = 3;
constexpr int kMaxSolveDegree = 2;

class ProfileError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Solvability failure of L+ or L-; carries the offending normalized inner product.
class OrthogonalityError : public ProfileError {
public:
    OrthogonalityError(const std::string& what, double overlap) : ProfileError(what), overlap(overlap) {}
    double overlap;
};

// n-th term of 1/|alpha - zeta| = sum_n F_n, i.e. |zeta|^{n-1} P_{n-1}(cos) / |alpha|^n.
double multipole_F(int n, const Vec3& alpha, const Vec3& zeta);

// One term f(r) T[n, ..., n] with T symmetric and traceless of rank ell (flattened, 3^ell entries).
struct Harmonic {
    int ell = 0;
    std::vector<double> tensor;
    Vec radial;

    double angular(const Vec3& unit) const;
};

std::vector<double> scalar_tensor(double s);
std::vector<double> vector_tensor(const Vec3& v);
std::vector<double> matrix_tensor(const Eigen::Matrix3d& a);  // traceless part of a symmetric matrix

// Real-valued profile as a sum of harmonic terms on the ground-state grid.
struct HarmonicProfile {
    std::vector<Harmonic> terms;

    double value(const GroundState& gs, const Vec3& y) const;
    // Components of degree ell merged into one radial array per distinct tensor.
    HarmonicProfile degree(int ell) const;
    HarmonicProfile& add(const Harmonic& h);
    HarmonicProfile scaled(double s) const;
};

// Multipole term psi^(n)_{Q^2,k} seen from soliton j; a harmonic polynomial of degree n-1 in y_j.
HarmonicProfile psi_n(int n, int j, int k, const Params& P, const GroundState& gs);

// L+ f = -Delta f + f + phi f + 2 phi_{Qf} Q and L- f = -Delta f + f + phi f, applied termwise.
HarmonicProfile apply_Lplus(const HarmonicProfile& f, const GroundState& gs);
HarmonicProfile apply_Lminus(const HarmonicProfile& f, const GroundState& gs);
Vec apply_Lplus_radial(const Vec& f, int ell, const GroundState& gs);
Vec apply_Lminus_radial(const Vec& f, int ell, const GroundState& gs);

// Inverses on the complement of the kernel; the returned solution is orthogonal to the kernel.
// Throws OrthogonalityError when the data overlaps the kernel beyond tol (relative).
HarmonicProfile solve_Lplus(const HarmonicProfile& f, const GroundState& gs, double tol = 1e-6);
HarmonicProfile solve_Lminus(const HarmonicProfile& f, const GroundState& gs, double tol = 1e-6);
Vec solve_Lplus_radial(const Vec& f, int ell, const GroundState& gs, double tol = 1e-6);
Vec solve_Lminus_radial(const Vec& f, int ell, const GroundState& gs, double tol = 1e-6);

// Ground-state constants entering the coefficient functions.
struct ProfileConstants {
    double mass_sq = 0;
    double lq_norm_sq = 0;  // ||Lambda Q||^2
    double tau_q = 0;       // (tau, Q)
    double kappa1 = 0;      // (2 tau - Lambda Lambda Q, Q)
};

// Closed-form coefficient functions of the expansion; every output is per soliton.
class Coefficients {
public:
    Coefficients() = default;
    Coefficients(int order, const ProfileConstants& k);

    int order() const { return order_; }
    const ProfileConstants& constants() const { return k_; }

    std::vector<double> c(const Params& P) const;         // T^(1) = c Lambda Q
    std::vector<double> e(const Params& P) const;         // T^(2) = c^2 tau - e/2 Lambda Q
    std::vector<double> h(const Params& P) const;         // monopole shift from ||V_k||^2 at degree 2
    std::vector<double> dc_alpha(const Params& P) const;  // sum_k dc/dalpha_k . 2 beta_k
    std::vector<double> dc_lambda(const Params& P) const; // sum_k dc/dlambda_k m_k^(2)
    std::vector<double> de_alpha(const Params& P) const;
    std::vector<Eigen::Matrix3d> quadrupole(const Params& P) const;  // sum_k psi^(3) = y^T A y

    std::vector<Vec3> b2(const Params& P) const;
    std::vector<Vec3> b3(const Params& P) const;
    std::vector<double> m2(const Params& P) const;
    std::vector<double> m3(const Params& P) const;

    // B^(N) and M^(N); B^(1) = M^(1) = 0.
    std::vector<Vec3> B(const Params& P) const;
    std::vector<double> M(const Params& P) const;

private:
    int order_ = 0;
    ProfileConstants k_;
};

// Fixed radial functions the corrections are built from.
struct RadialBasis {
    Vec lq;      // Lambda Q
    Vec llq;     // Lambda Lambda Q
    Vec tau;     // L+ tau = -2 phi_{Q LQ} LQ - phi_{LQ^2} Q - 2 LQ
    Vec x_ccc;   // L+^{-1}(F_A - 2 tau)
    Vec x_cs;    // L+^{-1} F_B
    Vec x_ce;    // L+^{-1} Lambda Q
    Vec x_h;     // L+^{-1} Q
    Vec u2;      // degree-2 solution of L+ u = -r^2 Q
    Vec w1;      // L-^{-1} of (2 tau - LLQ) with its Q component moved onto Lambda Q
};

RadialBasis build_radial_basis(const GroundState& gs, int order);
ProfileConstants profile_constants(const GroundState& gs, const RadialBasis& basis);

// Per-soliton profile coefficients at a parameter point.
struct ProfileCoefficients {
    double q = 1;        // Q
    double lq = 0;       // Lambda Q
    double tau = 0;
    double x_ccc = 0, x_cs = 0, x_ce = 0, x_h = 0;
    Eigen::Matrix3d quad = Eigen::Matrix3d::Zero();  // u2(r) y^T A y / r^2
    double w1 = 0;       // imaginary part
};

class ProfileSet {
public:
    ProfileSet() = default;
    ProfileSet(int order, std::shared_ptr<const GroundState> gs);

    int order() const { return order_; }
    const GroundState& ground_state() const { return *gs_; }
    std::shared_ptr<const GroundState> ground_state_ptr() const { return gs_; }
    const RadialBasis& basis() const { return basis_; }
    const Coefficients& coefficients() const { return coeffs_; }

    std::vector<ProfileCoefficients> at(const Params& P) const;
    // Real and imaginary parts of V_j^(N) at P as harmonic profiles.
    HarmonicProfile real_part(int j, const Params& P) const;
    HarmonicProfile imag_part(int j, const Params& P) const;
    // T_j^(n) for one order n (real part; the imaginary part only appears at n = 3).
    HarmonicProfile correction(int n, int j, const Params& P) const;

    // Point evaluation of V, its gradient and Lambda V in the soliton frame.
    struct Sample {
        std::complex<double> v;
        Eigen::Vector3cd grad;
    };
    Sample sample(const ProfileCoefficients& pc, const Vec3& y) const;

    // Radial profile of a radial V (order <= 2) and its splines.
    Vec radial_profile(const ProfileCoefficients& pc) const;

private:
    int order_ = 0;
    std::shared_ptr<const GroundState> gs_;
    RadialBasis basis_;
    Coefficients coeffs_;
    std::vector<RadialSpline> spl_;  // q, lq, tau, x_ccc, x_cs, x_ce, x_h, u2, w1
};

ProfileSet build_profiles(int order, std::shared_ptr<const GroundState> gs);

}  // namespace hartree
