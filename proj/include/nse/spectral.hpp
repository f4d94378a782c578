#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>

#include "nse/domain.hpp"
#include "nse/fft.hpp"
#include "nse/rng.hpp"

namespace nse {

inline FftWorkspace& workspace_for(int N) {
    thread_local std::map<int, std::unique_ptr<FftWorkspace>> cache;
    auto it = cache.find(N);
    if (it == cache.end())
        it = cache.emplace(N, std::make_unique<FftWorkspace>(N)).first;
    return *it->second;
}

inline PhysicalField to_physical(const SpectralVelocity& u) {
    PhysicalField p(u.domain);
    auto& w = workspace_for(u.domain.N);
    for (int c = 0; c < 3; ++c) w.backward(u.component(c), p.component(c));
    return p;
}

inline void zero_mean(SpectralVelocity& u) {
    for (int c = 0; c < 3; ++c) u.at(c, 0, 0, 0) = complexd(0.0, 0.0);
}

inline SpectralVelocity to_spectral(const PhysicalField& p) {
    SpectralVelocity u(p.domain);
    auto& w = workspace_for(p.domain.N);
    for (int c = 0; c < 3; ++c) w.forward(p.component(c), u.component(c));
    zero_mean(u);
    return u;
}

/// Re-impose uhat(-k) = conj(uhat(k)) by pair averaging; self-conjugate
/// modes are forced real.
inline void symmetrize(SpectralVelocity& u) {
    const int N = u.domain.N;
    for (int c = 0; c < 3; ++c) {
        complexd* a = u.component(c);
        for (int i = 0; i < N; ++i) {
            const int ri = i == 0 ? 0 : N - i;
            for (int j = 0; j < N; ++j) {
                const int rj = j == 0 ? 0 : N - j;
                for (int k = 0; k < N; ++k) {
                    const int rk = k == 0 ? 0 : N - k;
                    const std::size_t m = flat_index(N, i, j, k);
                    const std::size_t rm = flat_index(N, ri, rj, rk);
                    if (m < rm) {
                        const complexd half = 0.5 * (a[m] + std::conj(a[rm]));
                        a[m] = half;
                        a[rm] = std::conj(half);
                    } else if (m == rm) {
                        a[m] = complexd(a[m].real(), 0.0);
                    }
                }
            }
        }
    }
}

/// Zero all modes with any |k_i| above the dealias cutoff (sharp 2/3 mask).
inline void dealias(SpectralVelocity& u) {
    const int N = u.domain.N;
    const int lim = u.domain.dealias_limit();
    for (int c = 0; c < 3; ++c) {
        complexd* a = u.component(c);
        for (int i = 0; i < N; ++i) {
            const int ki = std::abs(u.domain.wavenumber(i));
            for (int j = 0; j < N; ++j) {
                const int kj = std::abs(u.domain.wavenumber(j));
                for (int k = 0; k < N; ++k) {
                    const int kk = std::abs(u.domain.wavenumber(k));
                    if (ki > lim || kj > lim || kk > lim)
                        a[flat_index(N, i, j, k)] = complexd(0.0, 0.0);
                }
            }
        }
    }
}

inline SpectralVelocity leray_project(const SpectralVelocity& u) {
    SpectralVelocity out = u;
    const int N = u.domain.N;
    const double f = 2.0 * pi / u.domain.L;
    for (int i = 0; i < N; ++i) {
        const double kx = f * u.domain.wavenumber(i);
        for (int j = 0; j < N; ++j) {
            const double ky = f * u.domain.wavenumber(j);
            for (int k = 0; k < N; ++k) {
                const double kz = f * u.domain.wavenumber(k);
                const double k2 = kx * kx + ky * ky + kz * kz;
                if (k2 == 0.0) continue;
                const std::size_t m = flat_index(N, i, j, k);
                const complexd dot =
                    kx * out.component(0)[m] + ky * out.component(1)[m] + kz * out.component(2)[m];
                const complexd s = dot / k2;
                out.component(0)[m] -= kx * s;
                out.component(1)[m] -= ky * s;
                out.component(2)[m] -= kz * s;
            }
        }
    }
    zero_mean(out);
    return out;
}

inline double divergence_residual(const SpectralVelocity& u) {
    const int N = u.domain.N;
    const double f = 2.0 * pi / u.domain.L;
    double worst = 0.0;
    for (int i = 0; i < N; ++i) {
        const double kx = f * u.domain.wavenumber(i);
        for (int j = 0; j < N; ++j) {
            const double ky = f * u.domain.wavenumber(j);
            for (int k = 0; k < N; ++k) {
                const double kz = f * u.domain.wavenumber(k);
                const std::size_t m = flat_index(N, i, j, k);
                const complexd dot =
                    kx * u.component(0)[m] + ky * u.component(1)[m] + kz * u.component(2)[m];
                worst = std::max(worst, std::abs(dot));
            }
        }
    }
    return worst;
}

inline SpectralVelocity apply_stokes(const SpectralVelocity& u) {
    SpectralVelocity out = u;
    const int N = u.domain.N;
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
            for (int k = 0; k < N; ++k) {
                const double k2 = u.domain.ksq(i, j, k);
                const std::size_t m = flat_index(N, i, j, k);
                for (int c = 0; c < 3; ++c) out.component(c)[m] *= k2;
            }
    return out;
}

// Parseval sums; the L^3 factor matches the continuum L^2(Omega) integrals.
inline double l2_inner(const SpectralVelocity& u, const SpectralVelocity& v) {
    double s = 0.0;
    const std::size_t n = u.coeffs.size();
    for (std::size_t m = 0; m < n; ++m)
        s += (u.coeffs[m] * std::conj(v.coeffs[m])).real();
    return s * u.domain.L * u.domain.L * u.domain.L;
}

inline double l2_norm(const SpectralVelocity& u) {
    return std::sqrt(std::max(0.0, l2_inner(u, u)));
}

/// Collocation-grid quadrature of the L^2 norm (trapezoid = exact for
/// resolved periodic integrands).
inline double l2_norm(const PhysicalField& p) {
    double s = 0.0;
    for (double v : p.values) s += v * v;
    const double cell = p.domain.L * p.domain.L * p.domain.L / p.domain.modes();
    return std::sqrt(s * cell);
}

inline double weighted_norm(const SpectralVelocity& u, int power) {
    const int N = u.domain.N;
    double s = 0.0;
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
            for (int k = 0; k < N; ++k) {
                const double k2 = u.domain.ksq(i, j, k);
                const double w = power == 1 ? k2 : k2 * k2;
                const std::size_t m = flat_index(N, i, j, k);
                double a = 0.0;
                for (int c = 0; c < 3; ++c) a += std::norm(u.component(c)[m]);
                s += w * a;
            }
    return std::sqrt(s * u.domain.L * u.domain.L * u.domain.L);
}

inline double h1_norm(const SpectralVelocity& u) { return weighted_norm(u, 1); }
inline double h2_seminorm(const SpectralVelocity& u) { return weighted_norm(u, 2); }

inline double h1_inner(const SpectralVelocity& u, const SpectralVelocity& v) {
    const int N = u.domain.N;
    double s = 0.0;
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
            for (int k = 0; k < N; ++k) {
                const double k2 = u.domain.ksq(i, j, k);
                const std::size_t m = flat_index(N, i, j, k);
                for (int c = 0; c < 3; ++c)
                    s += k2 * (u.component(c)[m] * std::conj(v.component(c)[m])).real();
            }
    return s * u.domain.L * u.domain.L * u.domain.L;
}

/// Spectral derivative d/dx_dim of one component into a scalar coefficient array.
inline std::vector<complexd> derivative(const SpectralVelocity& u, int comp, int dim) {
    const int N = u.domain.N;
    const double f = 2.0 * pi / u.domain.L;
    std::vector<complexd> out(static_cast<std::size_t>(u.domain.modes()));
    const complexd* a = u.component(comp);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
            for (int k = 0; k < N; ++k) {
                const int kv[3] = {u.domain.wavenumber(i), u.domain.wavenumber(j),
                                   u.domain.wavenumber(k)};
                const std::size_t m = flat_index(N, i, j, k);
                out[m] = complexd(0.0, f * kv[dim]) * a[m];
            }
    return out;
}

/// Pseudo-spectral Leray-projected B(u,v) = P_sigma((u.grad)v), dealiased.
inline SpectralVelocity bilinear(const SpectralVelocity& u, const SpectralVelocity& v) {
    const DomainSpec& d = u.domain;
    auto& w = workspace_for(d.N);
    const std::size_t n = static_cast<std::size_t>(d.modes());

    PhysicalField up = to_physical(u);

    PhysicalField advp(d);
    std::vector<double> dv(n);
    for (int c = 0; c < 3; ++c) {
        double* out = advp.component(c);
        for (int dim = 0; dim < 3; ++dim) {
            std::vector<complexd> dspec = derivative(v, c, dim);
            w.backward(dspec.data(), dv.data());
            const double* uj = up.component(dim);
            for (std::size_t m = 0; m < n; ++m) out[m] += uj[m] * dv[m];
        }
    }

    SpectralVelocity b = to_spectral(advp);
    dealias(b);
    b = leray_project(b);
    symmetrize(b);
    return b;
}

struct ForcingSpec {
    std::string pattern = "taylor-green";   // or "explicit"
    double amplitude = 0.0;
    // explicit coefficient list: (k, component amplitudes); Hermitian partner added
    struct Mode {
        int k[3];
        complexd f[3];
    };
    std::vector<Mode> modes;
};

/// Taylor-Green pattern a*(sin x cos y cos z, -cos x sin y cos z, 0) with
/// x scaled to the box; solenoidal, supported on |k_i| = 1.
inline SpectralVelocity taylor_green(const DomainSpec& d, double a) {
    SpectralVelocity f(d);
    // sin X cos Y cos Z = sum over sx,sy,sz in {+-1}: (sx/(8i)) e^{i(sx X + sy Y + sz Z)}
    // cos X sin Y cos Z analogous with sy/(8i).
    for (int sx : {1, -1})
        for (int sy : {1, -1})
            for (int sz : {1, -1}) {
                const int i = sx == 1 ? 1 : d.N - 1;
                const int j = sy == 1 ? 1 : d.N - 1;
                const int k = sz == 1 ? 1 : d.N - 1;
                const complexd inv8i(0.0, -0.125);
                f.at(0, i, j, k) = a * static_cast<double>(sx) * inv8i;
                f.at(1, i, j, k) = -a * static_cast<double>(sy) * inv8i;
            }
    return f;
}

inline SpectralVelocity make_forcing(const ForcingSpec& spec, const DomainSpec& d) {
    if (spec.pattern == "taylor-green") return taylor_green(d, spec.amplitude);
    if (spec.pattern == "explicit") {
        SpectralVelocity f(d);
        const double fac = 2.0 * pi / d.L;
        for (const auto& mode : spec.modes) {
            complexd dot(0.0, 0.0);
            double k2 = 0.0;
            for (int c = 0; c < 3; ++c) {
                dot += fac * mode.k[c] * mode.f[c];
                k2 += fac * mode.k[c] * fac * mode.k[c];
            }
            double mag = 0.0;
            for (int c = 0; c < 3; ++c) mag = std::max(mag, std::abs(mode.f[c]));
            if (std::abs(dot) > 1e-12 * std::sqrt(k2) * std::max(mag, 1e-300))
                throw std::invalid_argument("make_forcing: explicit mode is not solenoidal");
            int idx[3];
            for (int c = 0; c < 3; ++c) {
                int kk = mode.k[c];
                if (kk < -d.N / 2 || kk > d.N / 2)
                    throw std::invalid_argument("make_forcing: mode outside resolvable range");
                idx[c] = kk >= 0 ? kk : d.N + kk;
            }
            for (int c = 0; c < 3; ++c) {
                f.at(c, idx[0], idx[1], idx[2]) += spec.amplitude * mode.f[c];
                f.at(c, f.reflect(idx[0]), f.reflect(idx[1]), f.reflect(idx[2])) +=
                    spec.amplitude * std::conj(mode.f[c]);
            }
        }
        zero_mean(f);
        symmetrize(f);
        return f;
    }
    throw std::invalid_argument("make_forcing: unknown pattern '" + spec.pattern + "'");
}

struct SpectrumSpec {
    double k0 = 4.0;
    double slope = 4.0;
    double energy = 1.0;
};

/// Seeded, divergence-free random field with shell spectrum
/// ~ k^slope * exp(-k^2/k0^2), rescaled so that 0.5*|u|^2 = energy.
inline SpectralVelocity random_divfree_field(std::uint64_t seed, const SpectrumSpec& spec,
                                             const DomainSpec& d) {
    if (spec.energy < 0.0)
        throw std::invalid_argument("random_divfree_field: energy must be >= 0");
    SpectralVelocity u(d);
    Rng rng(seed);
    const int kmax = d.dealias_limit();
    const int N = d.N;
    // fixed lexicographic order over signed wavevectors for determinism;
    // fill k and set -k by conjugation, visiting each pair once
    for (int a = -kmax; a <= kmax; ++a)
        for (int b = -kmax; b <= kmax; ++b)
            for (int c = -kmax; c <= kmax; ++c) {
                if (a == 0 && b == 0 && c == 0) continue;
                // canonical representative of the (k,-k) pair
                if (a < 0 || (a == 0 && (b < 0 || (b == 0 && c < 0)))) continue;
                const double kn = std::sqrt(double(a * a + b * b + c * c));
                // shell-averaged E(k) ~ k^slope exp(-k^2/k0^2); shells hold ~k^2 modes
                const double amp = std::pow(kn, (spec.slope - 2.0) / 2.0) *
                                   std::exp(-kn * kn / (2.0 * spec.k0 * spec.k0));
                complexd g[3];
                for (int q = 0; q < 3; ++q) g[q] = complexd(rng.normal(), rng.normal()) * amp;
                const int i = a >= 0 ? a : N + a;
                const int j = b >= 0 ? b : N + b;
                const int k = c >= 0 ? c : N + c;
                for (int q = 0; q < 3; ++q) u.at(q, i, j, k) = g[q];
            }
    symmetrize(u);
    u = leray_project(u);
    const double e = 0.5 * l2_inner(u, u);
    if (spec.energy == 0.0 || e == 0.0) {
        for (auto& z : u.coeffs) z = complexd(0.0, 0.0);
        return u;
    }
    const double scale = std::sqrt(spec.energy / e);
    for (auto& z : u.coeffs) z *= scale;
    return u;
}

/// Keep only modes whose Stokes eigenvalue is within the first n distinct
/// spherical shells |k|^2 <= n (integer wavevector ball of radius sqrt(n)).
inline SpectralVelocity galerkin_truncate(const SpectralVelocity& u, int ksq_max) {
    SpectralVelocity out = u;
    const int N = u.domain.N;
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
            for (int k = 0; k < N; ++k) {
                const int a = u.domain.wavenumber(i), b = u.domain.wavenumber(j),
                          c = u.domain.wavenumber(k);
                if (a * a + b * b + c * c > ksq_max) {
                    const std::size_t m = flat_index(N, i, j, k);
                    for (int q = 0; q < 3; ++q) out.component(q)[m] = complexd(0.0, 0.0);
                }
            }
    return out;
}

/// L^4 norm by quadrature on a 2x oversampled grid (controls aliasing in
/// the quartic integrand).
inline double l4_norm(const SpectralVelocity& u) {
    const DomainSpec& d = u.domain;
    DomainSpec fine(d.L, 2 * d.N, d.nu, d.dealias_fraction);
    SpectralVelocity uf(fine);
    const int N = d.N, M = fine.N;
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j)
                for (int k = 0; k < N; ++k) {
                    const int a = d.wavenumber(i), b = d.wavenumber(j), cc = d.wavenumber(k);
                    uf.at(c, a >= 0 ? a : M + a, b >= 0 ? b : M + b, cc >= 0 ? cc : M + cc) =
                        u.at(c, i, j, k);
                }
    PhysicalField p = to_physical(uf);
    const std::size_t n = static_cast<std::size_t>(fine.modes());
    double s = 0.0;
    for (std::size_t m = 0; m < n; ++m) {
        const double v2 = p.component(0)[m] * p.component(0)[m] +
                          p.component(1)[m] * p.component(1)[m] +
                          p.component(2)[m] * p.component(2)[m];
        s += v2 * v2;
    }
    const double cell = d.L * d.L * d.L / static_cast<double>(n);
    return std::pow(s * cell, 0.25);
}

}  // namespace nse
