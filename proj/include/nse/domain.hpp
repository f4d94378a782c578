#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace nse {

using complexd = std::complex<double>;

constexpr double pi = 3.14159265358979323846;

/// Periodic box [0,L]^3 discretized on an N^3 collocation grid.
struct DomainSpec {
    double L = 2.0 * pi;
    int N = 32;               // grid points per dimension, even, >= 4
    double nu = 1.0;          // kinematic viscosity
    double dealias_fraction = 2.0 / 3.0;

    DomainSpec() = default;
    DomainSpec(double L_, int N_, double nu_, double frac = 2.0 / 3.0)
        : L(L_), N(N_), nu(nu_), dealias_fraction(frac) {
        validate();
    }

    void validate() const {
        if (N < 4 || N % 2 != 0)
            throw std::invalid_argument("DomainSpec: N must be even and >= 4");
        if (L <= 0.0 || nu <= 0.0)
            throw std::invalid_argument("DomainSpec: L and nu must be positive");
        if (dealias_fraction <= 0.0 || dealias_fraction > 1.0)
            throw std::invalid_argument("DomainSpec: dealias_fraction in (0,1]");
    }

    // smallest Stokes eigenvalue
    double lambda1() const { return (2.0 * pi / L) * (2.0 * pi / L); }

    int modes() const { return N * N * N; }

    // signed integer wavenumber for storage index 0..N-1
    int wavenumber(int idx) const { return idx <= N / 2 ? idx : idx - N; }

    // physical wavenumber magnitude squared |2*pi*k/L|^2
    double ksq(int i, int j, int k) const {
        const double f = 2.0 * pi / L;
        const double a = f * wavenumber(i), b = f * wavenumber(j), c = f * wavenumber(k);
        return a * a + b * b + c * c;
    }

    int dealias_limit() const {
        return static_cast<int>(std::floor(dealias_fraction * (N / 2)));
    }

    bool operator==(const DomainSpec& o) const {
        return L == o.L && N == o.N && nu == o.nu && dealias_fraction == o.dealias_fraction;
    }
};

inline std::size_t flat_index(int N, int i, int j, int k) {
    return (static_cast<std::size_t>(i) * N + j) * N + k;
}

/// Fourier coefficients of a 3-component zero-mean real vector field.
/// Component c, index (i,j,k) stores u_hat_c at wavevector
/// (wavenumber(i), wavenumber(j), wavenumber(k)).
struct SpectralVelocity {
    DomainSpec domain;
    std::vector<complexd> coeffs;   // 3 * N^3, component-major

    SpectralVelocity() = default;
    explicit SpectralVelocity(const DomainSpec& d)
        : domain(d), coeffs(3 * static_cast<std::size_t>(d.modes()), complexd(0.0, 0.0)) {}

    complexd& at(int c, int i, int j, int k) {
        return coeffs[static_cast<std::size_t>(c) * domain.modes() + flat_index(domain.N, i, j, k)];
    }
    const complexd& at(int c, int i, int j, int k) const {
        return coeffs[static_cast<std::size_t>(c) * domain.modes() + flat_index(domain.N, i, j, k)];
    }

    complexd* component(int c) { return coeffs.data() + static_cast<std::size_t>(c) * domain.modes(); }
    const complexd* component(int c) const {
        return coeffs.data() + static_cast<std::size_t>(c) * domain.modes();
    }

    // storage index of the wavevector -k
    int reflect(int idx) const { return idx == 0 ? 0 : domain.N - idx; }

    double max_abs() const {
        double m = 0.0;
        for (const auto& z : coeffs) m = std::max(m, std::abs(z));
        return m;
    }
};

/// Real 3-component field on the N^3 collocation grid, component-major.
struct PhysicalField {
    DomainSpec domain;
    std::vector<double> values;   // 3 * N^3

    PhysicalField() = default;
    explicit PhysicalField(const DomainSpec& d)
        : domain(d), values(3 * static_cast<std::size_t>(d.modes()), 0.0) {}

    double& at(int c, int i, int j, int k) {
        return values[static_cast<std::size_t>(c) * domain.modes() + flat_index(domain.N, i, j, k)];
    }
    double at(int c, int i, int j, int k) const {
        return values[static_cast<std::size_t>(c) * domain.modes() + flat_index(domain.N, i, j, k)];
    }

    double* component(int c) { return values.data() + static_cast<std::size_t>(c) * domain.modes(); }
    const double* component(int c) const {
        return values.data() + static_cast<std::size_t>(c) * domain.modes();
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : values) m = std::max(m, std::abs(v));
        return m;
    }
};

}  // namespace nse
