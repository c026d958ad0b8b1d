#include "hartree/params.hpp"

#include <cmath>

namespace hartree {

double Params::min_separation() const {
    double a = INFINITY;
    for (int j = 0; j < m(); ++j)
        for (int k = j + 1; k < m(); ++k) a = std::min(a, (alpha[j] - alpha[k]).norm());
    return a;
}

Eigen::VectorXd flatten(const ModulationState& g) {
    const int m = g.m();
    Eigen::VectorXd v(8 * m);
    for (int j = 0; j < m; ++j) {
        v.segment<3>(8 * j) = g.P.alpha[j];
        v.segment<3>(8 * j + 3) = g.P.beta[j];
        v[8 * j + 6] = g.P.lambda[j];
        v[8 * j + 7] = g.gamma[j];
    }
    return v;
}

ModulationState unflatten(const Eigen::VectorXd& v) {
    const int m = static_cast<int>(v.size() / 8);
    ModulationState g;
    g.P.alpha.resize(m);
    g.P.beta.resize(m);
    g.P.lambda.resize(m);
    g.gamma.resize(m);
    for (int j = 0; j < m; ++j) {
        g.P.alpha[j] = v.segment<3>(8 * j);
        g.P.beta[j] = v.segment<3>(8 * j + 3);
        g.P.lambda[j] = v[8 * j + 6];
        g.gamma[j] = v[8 * j + 7];
    }
    return g;
}

}  // namespace hartree
