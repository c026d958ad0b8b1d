#include "hartree/field.hpp"

#include <fftw3.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace hartree {

ComplexField3D::ComplexField3D(int n_, double L_) : n(n_), L(L_) {
    if (n < 2 || !(L > 0)) throw FieldError("field needs n >= 2 and L > 0");
    data.assign(static_cast<std::size_t>(n) * n * n, cplx(0));
}

Eigen::Vector3d ComplexField3D::point(std::size_t idx) const {
    const std::size_t nn = static_cast<std::size_t>(n);
    const int k = static_cast<int>(idx % nn), j = static_cast<int>((idx / nn) % nn), i = static_cast<int>(idx / (nn * nn));
    return {coord(i), coord(j), coord(k)};
}

void ComplexField3D::check() const {
    if (!fft_friendly(n)) throw FieldError("grid size " + std::to_string(n) + " must be even with factors 2, 3, 5");
    if (data.size() != static_cast<std::size_t>(n) * n * n) throw FieldError("field data size mismatch");
    for (const auto& v : data)
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) throw FieldError("non-finite field value");
}

bool fft_friendly(int n) {
    if (n < 2 || n % 2) return false;
    for (int p : {2, 3, 5})
        while (n % p == 0) n /= p;
    return n == 1;
}

void write_cf3d(const ComplexField3D& f, const std::string& path) {
    static_assert(std::endian::native == std::endian::little, "snapshot IO assumes a little-endian host");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FieldError("cannot open " + path);
    out.write("CF3D", 4);
    const std::int32_t dims[3] = {f.n, f.n, f.n};
    out.write(reinterpret_cast<const char*>(dims), sizeof dims);
    const double meta[2] = {f.L, f.time};
    out.write(reinterpret_cast<const char*>(meta), sizeof meta);
    out.write(reinterpret_cast<const char*>(f.data.data()), static_cast<std::streamsize>(f.data.size() * sizeof(cplx)));
    if (!out) throw FieldError("write failed for " + path);
}

ComplexField3D read_cf3d(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FieldError("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "CF3D", 4) != 0) throw FieldError(path + " is not a CF3D snapshot");
    std::int32_t dims[3];
    double meta[2];
    in.read(reinterpret_cast<char*>(dims), sizeof dims);
    in.read(reinterpret_cast<char*>(meta), sizeof meta);
    if (!in || dims[0] != dims[1] || dims[1] != dims[2] || dims[0] < 2) throw FieldError("unsupported CF3D header in " + path);
    ComplexField3D f(dims[0], meta[0]);
    f.time = meta[1];
    in.read(reinterpret_cast<char*>(f.data.data()), static_cast<std::streamsize>(f.data.size() * sizeof(cplx)));
    if (!in) throw FieldError("truncated CF3D data in " + path);
    return f;
}

double l2_norm_sq(const ComplexField3D& f) {
    double s = 0;
    for (const auto& v : f.data) s += std::norm(v);
    return s * std::pow(f.h(), 3);
}

cplx inner(const ComplexField3D& a, const ComplexField3D& b) {
    if (!a.same_grid(b)) throw FieldError("inner product of fields on different grids");
    cplx s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.data[i] * std::conj(b.data[i]);
    return s * std::pow(a.h(), 3);
}

ComplexField3D operator-(const ComplexField3D& a, const ComplexField3D& b) {
    if (!a.same_grid(b)) throw FieldError("difference of fields on different grids");
    ComplexField3D c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c.data[i] -= b.data[i];
    return c;
}

ComplexField3D operator+(const ComplexField3D& a, const ComplexField3D& b) {
    if (!a.same_grid(b)) throw FieldError("sum of fields on different grids");
    ComplexField3D c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c.data[i] += b.data[i];
    return c;
}

std::string to_string(PotentialMode m) {
    switch (m) {
    case PotentialMode::periodic: return "periodic";
    case PotentialMode::isolated: return "isolated";
    case PotentialMode::padded: return "padded";
    }
    return "unknown";
}

PotentialMode potential_mode_from_string(const std::string& s) {
    if (s == "periodic") return PotentialMode::periodic;
    if (s == "isolated") return PotentialMode::isolated;
    if (s == "padded") return PotentialMode::padded;
    throw FieldError("unknown potential mode '" + s + "'");
}

// ---------------------------------------------------------------------------------------------

struct Spectral::Impl {
    int n = 0;
    std::size_t total = 0;
    fftw_complex* work = nullptr;
    fftw_plan fwd = nullptr, bwd = nullptr;
    std::vector<double> k1, k1odd, k2;

    // potential grid (m = n or 2n), r2c layout m x m x (m/2 + 1)
    int m = 0;
    double* rbuf = nullptr;
    fftw_complex* cbuf = nullptr;
    fftw_plan r2c = nullptr, c2r = nullptr;
    std::vector<double> kernel;  // includes 1/m^3

    ~Impl() {
        for (fftw_plan p : {fwd, bwd, r2c, c2r})
            if (p) fftw_destroy_plan(p);
        if (work) fftw_free(work);
        if (rbuf) fftw_free(rbuf);
        if (cbuf) fftw_free(cbuf);
    }
};

namespace {

unsigned plan_flags(int n) { return n <= 128 ? FFTW_MEASURE : FFTW_ESTIMATE; }

}  // namespace

Spectral::Spectral(int n, double L, PotentialMode mode) : n_(n), L_(L), mode_(mode), impl_(std::make_unique<Impl>()) {
    if (!fft_friendly(n)) throw FieldError("grid size " + std::to_string(n) + " must be even with factors 2, 3, 5");
    if (!(L > 0)) throw FieldError("box length must be positive");
    Impl& I = *impl_;
    I.n = n;
    I.total = static_cast<std::size_t>(n) * n * n;
    I.work = fftw_alloc_complex(I.total);
    I.fwd = fftw_plan_dft_3d(n, n, n, I.work, I.work, FFTW_FORWARD, plan_flags(n));
    I.bwd = fftw_plan_dft_3d(n, n, n, I.work, I.work, FFTW_BACKWARD, plan_flags(n));
    I.k1.resize(n);
    I.k1odd.resize(n);
    for (int i = 0; i < n; ++i) {
        const int s = i <= n / 2 ? i : i - n;
        I.k1[i] = 2.0 * M_PI * s / L;
        I.k1odd[i] = i == n / 2 ? 0.0 : I.k1[i];
    }
    I.k2.resize(I.total);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                I.k2[(static_cast<std::size_t>(i) * n + j) * n + k] = I.k1[i] * I.k1[i] + I.k1[j] * I.k1[j] + I.k1[k] * I.k1[k];

    I.m = mode == PotentialMode::padded ? 2 * n : n;
    const int m = I.m;
    const double Lm = mode == PotentialMode::padded ? 2 * L : L;
    const double R = mode == PotentialMode::padded ? L : 0.5 * L;
    const std::size_t mh = m / 2 + 1;
    I.rbuf = fftw_alloc_real(static_cast<std::size_t>(m) * m * m);
    I.cbuf = fftw_alloc_complex(static_cast<std::size_t>(m) * m * mh);
    I.r2c = fftw_plan_dft_r2c_3d(m, m, m, I.rbuf, I.cbuf, plan_flags(m));
    I.c2r = fftw_plan_dft_c2r_3d(m, m, m, I.cbuf, I.rbuf, plan_flags(m));
    I.kernel.resize(static_cast<std::size_t>(m) * m * mh);
    const double norm = 1.0 / (static_cast<double>(m) * m * m);
    auto km = [&](int i) { return 2.0 * M_PI * (i <= m / 2 ? i : i - m) / Lm; };
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            for (std::size_t k = 0; k < mh; ++k) {
                const double kk = std::sqrt(km(i) * km(i) + km(j) * km(j) + km(static_cast<int>(k)) * km(static_cast<int>(k)));
                double g;
                if (mode == PotentialMode::periodic)
                    g = kk == 0 ? 0.0 : -1.0 / (kk * kk);
                else
                    g = kk == 0 ? -0.5 * R * R : -(1.0 - std::cos(kk * R)) / (kk * kk);
                I.kernel[(static_cast<std::size_t>(i) * m + j) * mh + k] = g * norm;
            }
}

Spectral::~Spectral() = default;

std::size_t Spectral::size() const { return impl_->total; }

void Spectral::forward(std::vector<cplx>& a) const {
    if (a.size() != impl_->total) throw FieldError("FFT size mismatch");
    std::memcpy(impl_->work, a.data(), a.size() * sizeof(cplx));
    fftw_execute(impl_->fwd);
    std::memcpy(static_cast<void*>(a.data()), impl_->work, a.size() * sizeof(cplx));
}

void Spectral::inverse(std::vector<cplx>& a) const {
    if (a.size() != impl_->total) throw FieldError("FFT size mismatch");
    std::memcpy(impl_->work, a.data(), a.size() * sizeof(cplx));
    fftw_execute(impl_->bwd);
    const double s = 1.0 / static_cast<double>(impl_->total);
    const cplx* w = reinterpret_cast<const cplx*>(impl_->work);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = w[i] * s;
}

double Spectral::wavenumber(int i) const { return impl_->k1[i]; }
double Spectral::wavenumber_odd(int i) const { return impl_->k1odd[i]; }
const std::vector<double>& Spectral::k2() const { return impl_->k2; }

std::vector<double> Spectral::potential(const std::vector<double>& rho) const {
    Impl& I = *impl_;
    if (rho.size() != I.total) throw FieldError("density size mismatch");
    const int n = I.n, m = I.m;
    const std::size_t mh = m / 2 + 1;
    if (m == n) {
        std::memcpy(I.rbuf, rho.data(), rho.size() * sizeof(double));
    } else {
        std::memset(I.rbuf, 0, sizeof(double) * static_cast<std::size_t>(m) * m * m);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                std::memcpy(I.rbuf + (static_cast<std::size_t>(i) * m + j) * m, rho.data() + (static_cast<std::size_t>(i) * n + j) * n,
                            n * sizeof(double));
    }
    fftw_execute(I.r2c);
    const std::size_t nc = static_cast<std::size_t>(m) * m * mh;
    for (std::size_t q = 0; q < nc; ++q) {
        I.cbuf[q][0] *= I.kernel[q];
        I.cbuf[q][1] *= I.kernel[q];
    }
    fftw_execute(I.c2r);
    std::vector<double> phi(I.total);
    if (m == n) {
        std::memcpy(phi.data(), I.rbuf, phi.size() * sizeof(double));
    } else {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                std::memcpy(phi.data() + (static_cast<std::size_t>(i) * n + j) * n, I.rbuf + (static_cast<std::size_t>(i) * m + j) * m,
                            n * sizeof(double));
    }
    return phi;
}

std::vector<double> Spectral::potential_of(const ComplexField3D& u) const {
    std::vector<double> rho(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) rho[i] = std::norm(u.data[i]);
    return potential(rho);
}

void Spectral::free_propagate(ComplexField3D& u, double s) const {
    Impl& I = *impl_;
    if (u.size() != I.total) throw FieldError("field size mismatch");
    std::memcpy(I.work, u.data.data(), u.size() * sizeof(cplx));
    fftw_execute(I.fwd);
    cplx* w = reinterpret_cast<cplx*>(I.work);
    const double norm = 1.0 / static_cast<double>(I.total);
    for (std::size_t q = 0; q < I.total; ++q) w[q] *= std::polar(norm, -s * I.k2[q]);
    fftw_execute(I.bwd);
    std::memcpy(static_cast<void*>(u.data.data()), I.work, u.size() * sizeof(cplx));
}

ComplexField3D Spectral::laplacian(const ComplexField3D& u) const {
    ComplexField3D out = u;
    forward(out.data);
    for (std::size_t q = 0; q < out.size(); ++q) out.data[q] *= -impl_->k2[q];
    inverse(out.data);
    return out;
}

std::array<ComplexField3D, 3> Spectral::gradient(const ComplexField3D& u) const {
    std::vector<cplx> hat = u.data;
    forward(hat);
    std::array<ComplexField3D, 3> g{u, u, u};
    const int n = n_;
    for (int d = 0; d < 3; ++d) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k) {
                    const std::size_t q = (static_cast<std::size_t>(i) * n + j) * n + k;
                    const int idx = d == 0 ? i : (d == 1 ? j : k);
                    g[d].data[q] = cplx(0, impl_->k1odd[idx]) * hat[q];
                }
        inverse(g[d].data);
    }
    return g;
}

double Spectral::gradient_norm_sq(const ComplexField3D& u) const {
    std::vector<cplx> hat = u.data;
    forward(hat);
    double s = 0;
    for (std::size_t q = 0; q < hat.size(); ++q) s += impl_->k2[q] * std::norm(hat[q]);
    return s * std::pow(u.h(), 3) / static_cast<double>(hat.size());
}

double Spectral::h1_norm_sq(const ComplexField3D& u) const {
    std::vector<cplx> hat = u.data;
    forward(hat);
    double s = 0;
    for (std::size_t q = 0; q < hat.size(); ++q) s += (1.0 + impl_->k2[q]) * std::norm(hat[q]);
    return s * std::pow(u.h(), 3) / static_cast<double>(hat.size());
}

}  // namespace hartree
