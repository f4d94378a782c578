#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "nse/quadrature.hpp"
#include "nse/spectral.hpp"

namespace nse {

/// Uniform partition of [0,L]^3 into n_cells^3 cubes of side L/n_cells and
/// diameter h = sqrt(3) L / n_cells; representative points at cell centers.
struct ObservationGrid {
    int n_cells = 8;
    double L = 2.0 * pi;

    ObservationGrid() = default;
    ObservationGrid(int n, double L_) : n_cells(n), L(L_) {
        if (n_cells < 1) throw std::invalid_argument("ObservationGrid: n_cells >= 1");
    }

    double cell_side() const { return L / n_cells; }
    double h() const { return std::sqrt(3.0) * L / n_cells; }
    int cell_count() const { return n_cells * n_cells * n_cells; }

    std::array<double, 3> center(int a, int b, int c) const {
        const double s = cell_side();
        return {(a + 0.5) * s, (b + 0.5) * s, (c + 0.5) * s};
    }
};

enum class ObsKind { Modal, Volume, Nodal };

inline const char* to_string(ObsKind k) {
    switch (k) {
        case ObsKind::Modal: return "modal";
        case ObsKind::Volume: return "volume";
        case ObsKind::Nodal: return "nodal";
    }
    return "?";
}

struct ObservationSet {
    ObsKind kind = ObsKind::Nodal;
    ObservationGrid grid;      // Volume/Nodal
    int n_obs = 0;             // Modal spectral-ball radius
    double L = 2.0 * pi;

    // Modal payload: retained wavevectors (all of |k| <= n_obs, k != 0,
    // Hermitian partners included) and 3 coefficients per wavevector.
    std::vector<std::array<int, 3>> modes;
    std::vector<complexd> mode_vals;   // 3 per mode

    // Volume/Nodal payload: 3 reals per cell, cell-major, cells in
    // lexicographic (a,b,c) order.
    std::vector<double> values;

    // h correspondence: cell diameter, or L/(2 pi n_obs) for modal data
    double h() const {
        return kind == ObsKind::Modal ? L / (2.0 * pi * n_obs) : grid.h();
    }

    // sum over the payload of |observation|^2 (modal: H1-weighted, see mh)
    double sum_sq() const {
        double s = 0.0;
        for (double v : values) s += v * v;
        return s;
    }
};

/// Spectral-ball projection: retain coefficients with |k| <= n_obs.
inline ObservationSet observe_modal(const SpectralVelocity& u, int n_obs) {
    if (n_obs < 1 || n_obs > u.domain.N / 2)
        throw std::invalid_argument("observe_modal: need 1 <= N_obs <= N/2");
    ObservationSet obs;
    obs.kind = ObsKind::Modal;
    obs.n_obs = n_obs;
    obs.L = u.domain.L;
    const int N = u.domain.N;
    for (int i = 0; i < N; ++i) {
        const int a = u.domain.wavenumber(i);
        for (int j = 0; j < N; ++j) {
            const int b = u.domain.wavenumber(j);
            for (int k = 0; k < N; ++k) {
                const int c = u.domain.wavenumber(k);
                const int k2 = a * a + b * b + c * c;
                if (k2 == 0 || k2 > n_obs * n_obs) continue;
                bool nonzero = false;
                for (int q = 0; q < 3; ++q)
                    if (u.at(q, i, j, k) != complexd(0.0, 0.0)) nonzero = true;
                if (!nonzero) continue;
                obs.modes.push_back({a, b, c});
                for (int q = 0; q < 3; ++q) obs.mode_vals.push_back(u.at(q, i, j, k));
            }
        }
    }
    return obs;
}

namespace detail {

/// Evaluate sum_k uhat(k) w(k) exp(2 pi i k.(alpha+1/2)/n) on the n^3 grid of
/// cell centers by aliasing the weighted coefficients onto an n^3 cube and
/// applying a small inverse DFT. Exact for every resolvable mode.
inline std::vector<double> fold_evaluate(const SpectralVelocity& u, int n, bool volume_weights) {
    const int N = u.domain.N;
    const std::size_t cells = static_cast<std::size_t>(n) * n * n;
    std::vector<double> out(3 * cells, 0.0);
    auto& ws = workspace_for(n);
    std::vector<complexd> bins(cells);
    std::vector<double> vals(cells);

    // per-dimension weight: half-cell phase shift, plus cell-average sinc
    auto weight1d = [&](int k) -> complexd {
        const double t = pi * k / static_cast<double>(n);
        complexd w = std::polar(1.0, t);
        if (volume_weights && k != 0) w *= std::sin(t) / t;
        return w;
    };
    std::vector<complexd> w1(static_cast<std::size_t>(N));
    for (int i = 0; i < N; ++i) w1[i] = weight1d(u.domain.wavenumber(i));

    auto bin1d = [&](int i) {
        const int k = u.domain.wavenumber(i);
        return ((k % n) + n) % n;
    };
    std::vector<int> b1(static_cast<std::size_t>(N));
    for (int i = 0; i < N; ++i) b1[i] = bin1d(i);

    for (int c = 0; c < 3; ++c) {
        std::fill(bins.begin(), bins.end(), complexd(0.0, 0.0));
        const complexd* a = u.component(c);
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j)
                for (int k = 0; k < N; ++k) {
                    const complexd z = a[flat_index(N, i, j, k)];
                    if (z == complexd(0.0, 0.0)) continue;
                    bins[flat_index(n, b1[i], b1[j], b1[k])] += z * (w1[i] * w1[j] * w1[k]);
                }
        ws.backward(bins.data(), vals.data());
        for (std::size_t m = 0; m < cells; ++m) out[3 * m + c] = vals[m];
    }
    return out;
}

}  // namespace detail

/// Cell averages by closed-form spectral integration over each cube.
inline ObservationSet observe_volume(const SpectralVelocity& u, const ObservationGrid& grid) {
    ObservationSet obs;
    obs.kind = ObsKind::Volume;
    obs.grid = grid;
    obs.L = u.domain.L;
    obs.values = detail::fold_evaluate(u, grid.n_cells, true);
    return obs;
}

/// Point values at cell centers by exact Fourier summation.
inline ObservationSet observe_nodal(const SpectralVelocity& u, const ObservationGrid& grid) {
    ObservationSet obs;
    obs.kind = ObsKind::Nodal;
    obs.grid = grid;
    obs.L = u.domain.L;
    obs.values = detail::fold_evaluate(u, grid.n_cells, false);
    return obs;
}

/// Pointwise field evaluation by direct Fourier summation (test oracle).
inline std::array<double, 3> evaluate_at(const SpectralVelocity& u, double x, double y, double z) {
    const int N = u.domain.N;
    const double f = 2.0 * pi / u.domain.L;
    std::array<double, 3> out{0.0, 0.0, 0.0};
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
            for (int k = 0; k < N; ++k) {
                const double phase = f * (u.domain.wavenumber(i) * x + u.domain.wavenumber(j) * y +
                                          u.domain.wavenumber(k) * z);
                const complexd e = std::polar(1.0, phase);
                const std::size_t m = flat_index(N, i, j, k);
                for (int c = 0; c < 3; ++c) out[c] += (u.component(c)[m] * e).real();
            }
    return out;
}

/// Smoothed cell indicators phi_alpha = rho_eps * chi_Q with eps = h/10.
/// All cells are translates of one another on the periodic box, so a single
/// compactly supported table is stored and shifted per cell; this requires
/// the collocation grid to align with cell boundaries (N % n_cells == 0).
struct MollifierTable {
    ObservationGrid grid;
    DomainSpec domain;
    double epsilon = 0.0;
    double k0_norm = 0.0;        // K_0 of the bump normalization
    int lo = 0, hi = 0;          // support box offsets (grid units, inclusive)
    std::vector<double> phi0;    // (hi-lo+1)^3 values for the cell at [0,s]^3

    int box() const { return hi - lo + 1; }
    double phi0_at(int ox, int oy, int oz) const {
        const int b = box();
        return phi0[(static_cast<std::size_t>(ox - lo) * b + (oy - lo)) * b + (oz - lo)];
    }

    /// phi_alpha sampled on the full N^3 grid (for tests/diagnostics).
    std::vector<double> phi_field(int a, int b, int c) const {
        const int N = domain.N;
        const int stride = N / grid.n_cells;
        std::vector<double> out(static_cast<std::size_t>(N) * N * N, 0.0);
        for (int ox = lo; ox <= hi; ++ox)
            for (int oy = lo; oy <= hi; ++oy)
                for (int oz = lo; oz <= hi; ++oz) {
                    const int gx = ((a * stride + ox) % N + N) % N;
                    const int gy = ((b * stride + oy) % N + N) % N;
                    const int gz = ((c * stride + oz) % N + N) % N;
                    out[flat_index(N, gx, gy, gz)] += phi0_at(ox, oy, oz);
                }
        return out;
    }
};

namespace detail {

inline double bump(double r2) {   // exp(-1/(1-r^2)) on r^2 < 1, flat zero outside
    return r2 < 1.0 ? std::exp(-1.0 / (1.0 - r2)) : 0.0;
}

inline double bump_ball_integral() {
    // int_{|x|<1} exp(-1/(1-|x|^2)) dx = 4 pi int_0^1 r^2 bump(r^2) dr
    const auto& q = gauss_legendre(200);
    double s = 0.0;
    for (std::size_t i = 0; i < q.nodes.size(); ++i) {
        const double r = 0.5 * (q.nodes[i] + 1.0);
        s += 0.5 * q.weights[i] * r * r * bump(r * r);
    }
    return 4.0 * pi * s;
}

}  // namespace detail

/// Assemble the mollified indicator of one reference cell by adaptive-free
/// tensor Gauss-Legendre integration of rho_eps over the clipped box
/// {z : x - z in Q} cap [-eps,eps]^3. The integrand is C-infinity, so fixed
/// moderate order reaches ~1e-9 absolute.
inline MollifierTable build_mollifier(const ObservationGrid& grid, const DomainSpec& domain,
                                      bool require_resolved = false, int quad_order = 32) {
    MollifierTable t;
    t.grid = grid;
    t.domain = domain;
    const double s = grid.cell_side();
    t.epsilon = grid.h() / 10.0;
    if (domain.N % grid.n_cells != 0)
        throw std::invalid_argument("build_mollifier: N must be a multiple of n_cells");
    const double dx = domain.L / domain.N;
    if (require_resolved && dx > t.epsilon / 2.0)
        throw std::invalid_argument("build_mollifier: epsilon under-resolved (L/N > eps/2)");

    t.k0_norm = 1.0 / detail::bump_ball_integral();
    const double eps = t.epsilon;
    const double rho_scale = t.k0_norm / (eps * eps * eps);

    t.lo = static_cast<int>(std::floor(-eps / dx));
    t.hi = static_cast<int>(std::ceil((s + eps) / dx));
    const int b = t.box();
    t.phi0.assign(static_cast<std::size_t>(b) * b * b, 0.0);

    const auto& q = gauss_legendre(quad_order);
    const int m = quad_order;

    std::vector<double> zs(m), zw(m);
    auto clip = [&](double x, double& a_, double& b_) {
        a_ = std::max(x - s, -eps);
        b_ = std::min(x, eps);
        return b_ > a_;
    };

    for (int ox = t.lo; ox <= t.hi; ++ox)
        for (int oy = t.lo; oy <= t.hi; ++oy)
            for (int oz = t.lo; oz <= t.hi; ++oz) {
                const double x = ox * dx, y = oy * dx, z = oz * dx;
                double ax, bx, ay, by, az, bz;
                if (!clip(x, ax, bx) || !clip(y, ay, by) || !clip(z, az, bz)) continue;
                double val;
                if (ax <= -eps && bx >= eps && ay <= -eps && by >= eps && az <= -eps &&
                    bz >= eps) {
                    val = 1.0;   // clipped box contains the whole support
                } else {
                    val = 0.0;
                    for (int i = 0; i < m; ++i) {
                        const double zx = 0.5 * (bx - ax) * q.nodes[i] + 0.5 * (bx + ax);
                        const double wx = 0.5 * (bx - ax) * q.weights[i];
                        for (int j = 0; j < m; ++j) {
                            const double zy = 0.5 * (by - ay) * q.nodes[j] + 0.5 * (by + ay);
                            const double wy = 0.5 * (by - ay) * q.weights[j];
                            const double r2xy = (zx * zx + zy * zy) / (eps * eps);
                            if (r2xy >= 1.0) continue;
                            double inner = 0.0;
                            for (int k = 0; k < m; ++k) {
                                const double zz = 0.5 * (bz - az) * q.nodes[k] + 0.5 * (bz + az);
                                inner += 0.5 * (bz - az) * q.weights[k] *
                                         detail::bump(r2xy + zz * zz / (eps * eps));
                            }
                            val += wx * wy * inner;
                        }
                    }
                    val = std::clamp(val * rho_scale, 0.0, 1.0);
                }
                t.phi0[(static_cast<std::size_t>(ox - t.lo) * b + (oy - t.lo)) * b +
                       (oz - t.lo)] = val;
            }
    return t;
}

enum class InterpMode { PiecewiseConstant, Smoothed };

/// Reconstruct a physical-space field from observations.
/// Volume/Nodal piecewise-constant: sum_a value_a chi_{Q_a}.
/// Nodal smoothed: sum_a value_a phi_a. Modal: spectral truncation.
inline PhysicalField interpolate(const ObservationSet& obs, InterpMode mode,
                                 const DomainSpec& domain, const MollifierTable* mollifier = nullptr);

/// Modal observation as a spectral field on the given domain.
inline SpectralVelocity modal_field(const ObservationSet& obs, const DomainSpec& domain) {
    if (obs.kind != ObsKind::Modal)
        throw std::invalid_argument("modal_field: observation kind mismatch");
    SpectralVelocity u(domain);
    const int N = domain.N;
    for (std::size_t m = 0; m < obs.modes.size(); ++m) {
        int idx[3];
        for (int c = 0; c < 3; ++c) {
            const int k = obs.modes[m][c];
            idx[c] = k >= 0 ? k : N + k;
        }
        for (int c = 0; c < 3; ++c) u.at(c, idx[0], idx[1], idx[2]) = obs.mode_vals[3 * m + c];
    }
    return u;
}

inline PhysicalField interpolate(const ObservationSet& obs, InterpMode mode,
                                 const DomainSpec& domain, const MollifierTable* mollifier) {
    if (obs.kind == ObsKind::Modal) {
        if (mode == InterpMode::Smoothed)
            throw std::invalid_argument("interpolate: smoothed mode needs nodal data");
        return to_physical(modal_field(obs, domain));
    }
    const int N = domain.N;
    const int n = obs.grid.n_cells;
    PhysicalField out(domain);
    if (mode == InterpMode::PiecewiseConstant) {
        for (int gx = 0; gx < N; ++gx) {
            const int a = std::min(gx * n / N, n - 1);
            for (int gy = 0; gy < N; ++gy) {
                const int b = std::min(gy * n / N, n - 1);
                for (int gz = 0; gz < N; ++gz) {
                    const int c = std::min(gz * n / N, n - 1);
                    const std::size_t cell = flat_index(n, a, b, c);
                    const std::size_t m = flat_index(N, gx, gy, gz);
                    for (int q = 0; q < 3; ++q)
                        out.component(q)[m] = obs.values[3 * cell + q];
                }
            }
        }
        return out;
    }
    // Smoothed
    if (obs.kind != ObsKind::Nodal)
        throw std::invalid_argument("interpolate: smoothed mode needs nodal data");
    if (mollifier == nullptr)
        throw std::invalid_argument("interpolate: smoothed mode needs a MollifierTable");
    if (mollifier->grid.n_cells != n || !(mollifier->domain == domain))
        throw std::invalid_argument("interpolate: mollifier grid/domain mismatch");
    const int stride = N / n;
    const MollifierTable& t = *mollifier;
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            for (int c = 0; c < n; ++c) {
                const std::size_t cell = flat_index(n, a, b, c);
                const double* v = &obs.values[3 * cell];
                for (int ox = t.lo; ox <= t.hi; ++ox) {
                    const int gx = ((a * stride + ox) % N + N) % N;
                    for (int oy = t.lo; oy <= t.hi; ++oy) {
                        const int gy = ((b * stride + oy) % N + N) % N;
                        for (int oz = t.lo; oz <= t.hi; ++oz) {
                            const double p = t.phi0_at(ox, oy, oz);
                            if (p == 0.0) continue;
                            const int gz = ((c * stride + oz) % N + N) % N;
                            const std::size_t m = flat_index(N, gx, gy, gz);
                            for (int q = 0; q < 3; ++q) out.component(q)[m] += v[q] * p;
                        }
                    }
                }
            }
    return out;
}

/// One summand of M_h^2 for a single observation snapshot.
/// Modal: ||P_N u||^2 (H1 norm of the retained ball; see mu window notes).
/// Volume/Nodal: C h sum_a |v_a|^2.
inline double mh_square_sample(const ObservationSet& obs, double C = 1.0) {
    if (obs.kind == ObsKind::Modal) {
        const double f = 2.0 * pi / obs.L;
        double s = 0.0;
        for (std::size_t m = 0; m < obs.modes.size(); ++m) {
            const auto& k = obs.modes[m];
            const double k2 = f * f * (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]);
            for (int c = 0; c < 3; ++c) s += k2 * std::norm(obs.mode_vals[3 * m + c]);
        }
        return s * obs.L * obs.L * obs.L;
    }
    return C * obs.h() * obs.sum_sq();
}

/// sup-in-time observable energy over a sampled series; returns M_h.
inline double compute_Mh(const std::vector<ObservationSet>& series, double C = 1.0) {
    if (series.empty()) throw std::invalid_argument("compute_Mh: empty series");
    const ObsKind kind = series.front().kind;
    double m2 = 0.0;
    for (const auto& obs : series) {
        if (obs.kind != kind) throw std::invalid_argument("compute_Mh: mixed kinds");
        m2 = std::max(m2, mh_square_sample(obs, C));
    }
    return std::sqrt(m2);
}

/// Streaming variant for long runs.
struct MhAccumulator {
    double C = 1.0;
    double m2 = 0.0;
    long samples = 0;
    void add(const ObservationSet& obs) {
        m2 = std::max(m2, mh_square_sample(obs, C));
        ++samples;
    }
    double value() const { return std::sqrt(m2); }
};

}  // namespace nse
