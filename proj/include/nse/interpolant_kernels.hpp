#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "nse/observers.hpp"
#include "nse/spectral.hpp"

namespace nse {

/// Exact quadratic functionals of the cell interpolants.
///
/// Both the piecewise-constant interpolant I_h and the mollified one
/// I~ v = sum_a v_a phi_a, phi_a = rho_eps * chi_{Q_a}, are linear in the
/// cell data, so every L2 quantity is a quadratic form
///     sum_{D in {-1,0,1}^3} K(D) corr_D(v),  corr_D(v) = sum_a v_a v_{a+D},
/// over neighboring cells (the supports only reach one cell over, since
/// 2 eps < s). K(D) depends only on the number of nonzero offsets in D and
/// reduces, via phi_a * phi_b = (rho*rho) conv (chi star chi), to integrals
/// of the radial bump autocorrelation against tent products. No collocation
/// grid enters, so the values are exact regardless of how thin the mollified
/// skins are relative to the grid.
struct InterpolantKernels {
    ObservationGrid grid;
    double s = 0.0;     // cell side
    double eps = 0.0;   // mollification radius h/10
    // index = number of unit offsets in D (0..3)
    std::array<double, 4> k_phi{};    // int phi_0 phi_D
    std::array<double, 4> k_grad{};   // int grad phi_0 . grad phi_D
    std::array<double, 4> k_gap{};    // int (phi_0 - chi_0)(phi_D - chi_D)
};

namespace detail {

/// Autocorrelation of the unit bump rho_1(y) = K_0 exp(-1/(1-|y|^2)):
/// Q(r) = (rho_1 * rho_1)(r e_1), tabulated on [0,2]. Scale-free, so the
/// table is computed once per process.
inline const std::vector<double>& bump_autocorrelation_table() {
    static const std::vector<double> table = [] {
        const int n_r = 4096;
        const double k0 = 1.0 / bump_ball_integral();
        const auto& q = gauss_legendre(128);
        std::vector<double> t(n_r + 1, 0.0);
        for (int ir = 0; ir <= n_r; ++ir) {
            const double r = 2.0 * ir / n_r;
            double acc = 0.0;
            for (std::size_t i = 0; i < q.nodes.size(); ++i) {
                const double u = 0.5 * (q.nodes[i] + 1.0);   // radius in [0,1]
                const double wu = 0.5 * q.weights[i];
                const double bu = bump(u * u);
                if (bu == 0.0) continue;
                double inner = 0.0;
                for (std::size_t j = 0; j < q.nodes.size(); ++j) {
                    const double c = q.nodes[j];   // cos(angle) in [-1,1]
                    const double d2 = u * u + r * r - 2.0 * u * r * c;
                    inner += q.weights[j] * bump(d2);
                }
                acc += wu * u * u * bu * inner;
            }
            t[ir] = 2.0 * pi * k0 * k0 * acc;
        }
        return t;
    }();
    return table;
}

/// Q(r) by linear interpolation; zero outside [0,2].
inline double bump_autocorrelation(double r) {
    const auto& t = bump_autocorrelation_table();
    if (r >= 2.0) return 0.0;
    const double x = r * 0.5 * (t.size() - 1);
    const std::size_t i = static_cast<std::size_t>(x);
    const double f = x - i;
    return t[i] * (1.0 - f) + t[i + 1] * f;
}

/// Unit bump as a radial density: rho_1(r), normalized to unit mass.
inline double bump_radial(double r) {
    static const double k0 = 1.0 / bump_ball_integral();
    return k0 * bump(r * r);
}

/// Fourier transform of rho_eps at radial frequency kappa:
/// 4 pi int_0^eps r^2 rho_eps(r) sinc(kappa r) dr; equals 1 at kappa = 0.
inline double mollifier_transform(double kappa_eps) {
    const auto& q = gauss_legendre(64);
    double acc = 0.0;
    for (std::size_t i = 0; i < q.nodes.size(); ++i) {
        const double t = 0.5 * (q.nodes[i] + 1.0);
        const double a = kappa_eps * t;
        const double sinc = std::abs(a) < 1e-8 ? 1.0 - a * a / 6.0 : std::sin(a) / a;
        acc += 0.5 * q.weights[i] * t * t * bump_radial(t) * sinc;
    }
    return 4.0 * pi * acc;
}

/// Tensor Gauss-Legendre over [-r0,r0]^dim split at 0 per axis (the tent
/// factors have kinks there). f receives the point coordinates.
template <int Dim, typename F>
inline double kernel_quadrature(double r0, const F& f) {
    const auto& q = gauss_legendre(32);
    const std::size_t m = q.nodes.size();
    std::vector<double> xs(2 * m), ws(2 * m);
    for (std::size_t i = 0; i < m; ++i) {
        const double x = 0.5 * r0 * (q.nodes[i] + 1.0);   // (0, r0)
        const double w = 0.5 * r0 * q.weights[i];
        xs[i] = -r0 + x;   // left half (-r0, 0)
        ws[i] = w;
        xs[m + i] = x;
        ws[m + i] = w;
    }
    const std::size_t total = 2 * m;
    double acc = 0.0;
    std::array<double, 3> p{0.0, 0.0, 0.0};
    if constexpr (Dim == 2) {
        for (std::size_t i = 0; i < total; ++i)
            for (std::size_t j = 0; j < total; ++j) {
                p[0] = xs[i];
                p[1] = xs[j];
                acc += ws[i] * ws[j] * f(p);
            }
    } else {
        for (std::size_t i = 0; i < total; ++i)
            for (std::size_t j = 0; j < total; ++j)
                for (std::size_t k = 0; k < total; ++k) {
                    p[0] = xs[i];
                    p[1] = xs[j];
                    p[2] = xs[k];
                    acc += ws[i] * ws[j] * ws[k] * f(p);
                }
    }
    return acc;
}

}  // namespace detail

/// Assemble the neighbor kernels for one observation grid.
inline InterpolantKernels build_interpolant_kernels(const ObservationGrid& grid) {
    InterpolantKernels ker;
    ker.grid = grid;
    const double s = grid.cell_side();
    const double eps = grid.h() / 10.0;
    ker.s = s;
    ker.eps = eps;
    if (2.0 * eps >= s)
        throw std::invalid_argument("build_interpolant_kernels: eps must be < s/2");

    // tent factor per axis: offset 0 -> s - |y|; offset 1 -> max(0, y)
    // (valid because |y| <= 2 eps < s on the integration box)
    const auto tents = [s](const std::array<double, 3>& y, int ones, int dim) {
        double t = 1.0;
        for (int d = 0; d < dim; ++d)
            t *= d < ones ? std::max(0.0, y[d]) : s - std::abs(y[d]);
        return t;
    };

    // 3D: int R2(|y|) * tents, radius 2 eps, and the rho version at radius eps
    std::array<double, 4> p_rho{};
    for (int c = 0; c <= 3; ++c) {
        ker.k_phi[c] = detail::kernel_quadrature<3>(2.0 * eps, [&](const auto& y) {
            const double r = std::sqrt(y[0] * y[0] + y[1] * y[1] + y[2] * y[2]);
            return detail::bump_autocorrelation(r / eps) / (eps * eps * eps) *
                   tents(y, c, 3);
        });
        p_rho[c] = detail::kernel_quadrature<3>(eps, [&](const auto& y) {
            const double r = std::sqrt(y[0] * y[0] + y[1] * y[1] + y[2] * y[2]);
            return detail::bump_radial(r / eps) / (eps * eps * eps) * tents(y, c, 3);
        });
        ker.k_gap[c] = ker.k_phi[c] - 2.0 * p_rho[c] + (c == 0 ? s * s * s : 0.0);
    }

    // gradient kernels from the distributional Laplacian of the tent product:
    // K1(D) = sum_d w(D_d) J2(ones of D without axis d), w(0) = +2, w(1) = -1
    std::array<double, 3> j2{};
    for (int c = 0; c <= 2; ++c)
        j2[c] = detail::kernel_quadrature<2>(2.0 * eps, [&](const auto& y) {
            const double r = std::sqrt(y[0] * y[0] + y[1] * y[1]);
            return detail::bump_autocorrelation(r / eps) / (eps * eps * eps) *
                   tents(y, c, 2);
        });
    for (int c = 0; c <= 3; ++c) {
        double v = 0.0;
        if (c <= 2) v += 2.0 * (3 - c) * j2[c];   // axes with zero offset
        if (c >= 1) v -= c * j2[c - 1];           // axes with unit offset
        ker.k_grad[c] = v;
    }
    return ker;
}

namespace detail {

/// corr sums grouped by symmetry class: sum over D with c unit offsets of
/// sum_a v_a . v_{a+D} (periodic in the cell index, all three components).
inline std::array<double, 4> offset_correlations(const ObservationSet& obs) {
    const int n = obs.grid.n_cells;
    std::array<double, 4> corr{};
    for (int dx = -1; dx <= 1; ++dx)
        for (int dy = -1; dy <= 1; ++dy)
            for (int dz = -1; dz <= 1; ++dz) {
                const int cls = std::abs(dx) + std::abs(dy) + std::abs(dz);
                double acc = 0.0;
                for (int a = 0; a < n; ++a) {
                    const int a2 = (a + dx + n) % n;
                    for (int b = 0; b < n; ++b) {
                        const int b2 = (b + dy + n) % n;
                        for (int c = 0; c < n; ++c) {
                            const int c2 = (c + dz + n) % n;
                            const double* u = &obs.values[3 * flat_index(n, a, b, c)];
                            const double* v = &obs.values[3 * flat_index(n, a2, b2, c2)];
                            acc += u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
                        }
                    }
                }
                corr[cls] += acc;
            }
    return corr;
}

inline double quad_form(const std::array<double, 4>& k, const std::array<double, 4>& corr) {
    double s = 0.0;
    for (int c = 0; c <= 3; ++c) s += k[c] * corr[c];
    return s;
}

}  // namespace detail

/// ||I_h v||^2 for the piecewise-constant interpolant (exact: the cells are
/// disjoint, so the norm is just the weighted coefficient sum).
inline double pc_l2_sq(const ObservationSet& obs) {
    const double s = obs.grid.cell_side();
    return s * s * s * obs.sum_sq();
}

inline double smoothed_l2_sq(const ObservationSet& obs, const InterpolantKernels& ker) {
    return detail::quad_form(ker.k_phi, detail::offset_correlations(obs));
}

/// |grad I~ v|^2 (the H1 seminorm squared of the mollified interpolant).
inline double smoothed_h1_sq(const ObservationSet& obs, const InterpolantKernels& ker) {
    return std::max(0.0, detail::quad_form(ker.k_grad, detail::offset_correlations(obs)));
}

/// ||I~ v - I_h v||^2 with both interpolants built from the same nodal data.
inline double gap_l2_sq(const ObservationSet& obs, const InterpolantKernels& ker) {
    return std::max(0.0, detail::quad_form(ker.k_gap, detail::offset_correlations(obs)));
}

/// (I~ data, v)_{L2}: the mollified-cell overlaps against a band-limited
/// field are exact in spectral space, phi_hat(k) = rhohat(|k|) chihat(k),
/// and the per-cell phases fold onto the center lattice.
inline double smoothed_inner(const ObservationSet& obs, const SpectralVelocity& v,
                             const InterpolantKernels& ker) {
    const DomainSpec& d = v.domain;
    const int N = d.N;
    const int n = obs.grid.n_cells;
    const double L = d.L;
    const double s = ker.s;

    // rhohat by integer |k|^2 (few hundred distinct shells)
    const int max_ksq = 3 * (N / 2) * (N / 2);
    std::vector<double> rhohat(static_cast<std::size_t>(max_ksq) + 1);
    for (int m = 0; m <= max_ksq; ++m)
        rhohat[m] = detail::mollifier_transform(2.0 * pi * std::sqrt(double(m)) / L * ker.eps);

    SpectralVelocity g(d);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
            for (int k = 0; k < N; ++k) {
                const int kv[3] = {d.wavenumber(i), d.wavenumber(j), d.wavenumber(k)};
                double w = rhohat[static_cast<std::size_t>(kv[0] * kv[0] + kv[1] * kv[1] +
                                                           kv[2] * kv[2])];
                for (int dim = 0; dim < 3; ++dim) {
                    const double a = pi * kv[dim] * s / L;
                    w *= std::abs(a) < 1e-12 ? 1.0 : std::sin(a) / a;
                }
                w *= (s / L) * (s / L) * (s / L);
                const std::size_t m = flat_index(N, i, j, k);
                for (int c = 0; c < 3; ++c) g.component(c)[m] = w * v.component(c)[m];
            }
    const std::vector<double> at_centers = detail::fold_evaluate(g, n, false);
    double acc = 0.0;
    for (std::size_t m = 0; m < at_centers.size(); ++m) acc += obs.values[m] * at_centers[m];
    return L * L * L * acc;
}

/// |I~ v - v|^2 expanded through the exact pieces above.
inline double smoothed_error_sq(const ObservationSet& obs, const SpectralVelocity& v,
                                const InterpolantKernels& ker) {
    const double vv = l2_inner(v, v);
    return std::max(0.0, vv - 2.0 * smoothed_inner(obs, v, ker) + smoothed_l2_sq(obs, ker));
}

}  // namespace nse
