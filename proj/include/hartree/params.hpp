#pragma once

#include <Eigen/Dense>

#include <vector>

namespace hartree {

using Vec3 = Eigen::Vector3d;

// P = (alpha, beta, lambda) for m solitons.
struct Params {
    std::vector<Vec3> alpha, beta;
    std::vector<double> lambda;

    int m() const { return static_cast<int>(lambda.size()); }
    double min_separation() const;
};

// g = (P, gamma).
struct ModulationState {
    Params P;
    std::vector<double> gamma;

    int m() const { return P.m(); }
};

// Flat layout per soliton: alpha(3), beta(3), lambda, gamma.
Eigen::VectorXd flatten(const ModulationState& g);
ModulationState unflatten(const Eigen::VectorXd& v);

}  // namespace hartree
