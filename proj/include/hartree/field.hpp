#pragma once

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace hartree {

using cplx = std::complex<double>;

class FieldError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Complex field on the periodic cube [-L/2, L/2)^3, n nodes per axis, row-major (x slowest).
struct ComplexField3D {
    int n = 0;
    double L = 0;
    double time = 0;
    std::vector<cplx> data;

    ComplexField3D() = default;
    ComplexField3D(int n, double L);

    double h() const { return L / n; }
    double coord(int i) const { return -0.5 * L + i * h(); }
    std::size_t size() const { return data.size(); }
    std::size_t index(int i, int j, int k) const {
        return (static_cast<std::size_t>(i) * n + j) * n + k;
    }
    cplx& operator()(int i, int j, int k) { return data[index(i, j, k)]; }
    const cplx& operator()(int i, int j, int k) const { return data[index(i, j, k)]; }
    Eigen::Vector3d point(std::size_t idx) const;
    bool same_grid(const ComplexField3D& o) const { return n == o.n && L == o.L; }
    void check() const;
};

// Grid sizes with only the prime factors 2, 3, 5 (the FFT stays fast).
bool fft_friendly(int n);

// Binary snapshot: "CF3D", int32 nx, ny, nz, float64 box length, float64 time, then little-endian (re, im) pairs.
void write_cf3d(const ComplexField3D& f, const std::string& path);
ComplexField3D read_cf3d(const std::string& path);

// h^3 sums.
double l2_norm_sq(const ComplexField3D& f);
cplx inner(const ComplexField3D& a, const ComplexField3D& b);  // int a conj(b)
ComplexField3D operator-(const ComplexField3D& a, const ComplexField3D& b);
ComplexField3D operator+(const ComplexField3D& a, const ComplexField3D& b);

// Newtonian potential modes.
//  periodic: Fourier multiplier -1/|k|^2 with the zero mode dropped.
//  isolated: truncated kernel on the same grid, exact for sources and targets within a ball of diameter L/2.
//  padded:   truncated kernel on the doubled grid, exact within diameter L.
enum class PotentialMode { periodic, isolated, padded };

std::string to_string(PotentialMode m);
PotentialMode potential_mode_from_string(const std::string& s);

// FFT workspace for one grid. Not safe for concurrent use.
class Spectral {
public:
    Spectral(int n, double L, PotentialMode mode = PotentialMode::isolated);
    ~Spectral();
    Spectral(const Spectral&) = delete;
    Spectral& operator=(const Spectral&) = delete;

    int n() const { return n_; }
    double L() const { return L_; }
    PotentialMode mode() const { return mode_; }
    std::size_t size() const;

    // Unnormalized forward transform and normalized inverse, in place.
    void forward(std::vector<cplx>& a) const;
    void inverse(std::vector<cplx>& a) const;

    double wavenumber(int i) const;           // k along one axis for index i
    double wavenumber_odd(int i) const;       // same with the Nyquist mode zeroed
    const std::vector<double>& k2() const;    // |k|^2 on the full grid

    // phi = Delta^{-1} rho.
    std::vector<double> potential(const std::vector<double>& rho) const;
    std::vector<double> potential_of(const ComplexField3D& u) const;  // of |u|^2

    // e^{i s Delta} u in place.
    void free_propagate(ComplexField3D& u, double s) const;
    ComplexField3D laplacian(const ComplexField3D& u) const;
    std::array<ComplexField3D, 3> gradient(const ComplexField3D& u) const;

    double h1_norm_sq(const ComplexField3D& u) const;
    double gradient_norm_sq(const ComplexField3D& u) const;  // int |grad u|^2

private:
    struct Impl;
    int n_;
    double L_;
    PotentialMode mode_;
    std::unique_ptr<Impl> impl_;
};

}  // namespace hartree
