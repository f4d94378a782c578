#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nse/assimilation.hpp"
#include "nse/quadrature.hpp"
#include "nse/spectral.hpp"

using namespace nse;

namespace {

DomainSpec small() { return DomainSpec(2.0 * pi, 8, 1.0); }

SpectralVelocity random_field(std::uint64_t seed, const DomainSpec& d, double energy = 1.0) {
    return random_divfree_field(seed, SpectrumSpec{2.0, 4.0, energy}, d);
}

/// Brute-force B(u,v): convolution of the advection term in coefficient
/// space, then dealias + project. Independent of the FFT path.
SpectralVelocity bilinear_oracle(const SpectralVelocity& u, const SpectralVelocity& v) {
    const DomainSpec& d = u.domain;
    const int N = d.N;
    const double f = 2.0 * pi / d.L;
    SpectralVelocity adv(d);
    // (u.grad v)^(k) = sum_{p+q=k} uhat_j(p) * (i f q_j) vhat_c(q)
    for (int c = 0; c < 3; ++c)
        for (int pi_ = 0; pi_ < N; ++pi_)
            for (int pj = 0; pj < N; ++pj)
                for (int pk = 0; pk < N; ++pk)
                    for (int qi = 0; qi < N; ++qi)
                        for (int qj = 0; qj < N; ++qj)
                            for (int qk = 0; qk < N; ++qk) {
                                const int a = d.wavenumber(pi_) + d.wavenumber(qi);
                                const int b = d.wavenumber(pj) + d.wavenumber(qj);
                                const int cc = d.wavenumber(pk) + d.wavenumber(qk);
                                // modes outside storage alias on the collocation
                                // grid exactly as the FFT path does
                                const int ia = ((a % N) + N) % N;
                                const int ib = ((b % N) + N) % N;
                                const int ic = ((cc % N) + N) % N;
                                const int q[3] = {d.wavenumber(qi), d.wavenumber(qj),
                                                  d.wavenumber(qk)};
                                complexd s(0.0, 0.0);
                                for (int dim = 0; dim < 3; ++dim)
                                    s += u.at(dim, pi_, pj, pk) * complexd(0.0, f * q[dim]) *
                                         v.at(c, qi, qj, qk);
                                adv.at(c, ia, ib, ic) += s;
                            }
    zero_mean(adv);
    dealias(adv);
    adv = leray_project(adv);
    symmetrize(adv);
    return adv;
}

double rel_diff(const SpectralVelocity& a, const SpectralVelocity& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t m = 0; m < a.coeffs.size(); ++m) {
        num += std::norm(a.coeffs[m] - b.coeffs[m]);
        den += std::norm(b.coeffs[m]);
    }
    return std::sqrt(num / std::max(den, 1e-300));
}

}  // namespace

TEST_CASE("fft round trip is identity to 1e-12") {
    const DomainSpec d = small();
    SpectralVelocity u = random_field(1, d);
    SpectralVelocity back = to_spectral(to_physical(u));
    CHECK(rel_diff(back, u) < 1e-12);
}

TEST_CASE("single-mode transform matches the analytic field") {
    const DomainSpec d = small();
    SpectralVelocity u(d);
    // u_x = cos(2x + y) -> coefficients 1/2 at k = +-(2,1,0)
    u.at(0, 2, 1, 0) = complexd(0.5, 0.0);
    u.at(0, d.N - 2, d.N - 1, 0) = complexd(0.5, 0.0);
    PhysicalField p = to_physical(u);
    const double dx = d.L / d.N;
    for (int i = 0; i < d.N; ++i)
        for (int j = 0; j < d.N; ++j) {
            const double expect = std::cos(2.0 * i * dx + j * dx);
            CHECK(p.at(0, i, j, 3) == doctest::Approx(expect).epsilon(1e-12));
        }
}

TEST_CASE("parseval: spectral l2 equals grid quadrature") {
    const DomainSpec d = small();
    SpectralVelocity u = random_field(2, d);
    CHECK(l2_norm(u) == doctest::Approx(l2_norm(to_physical(u))).epsilon(1e-12));
}

TEST_CASE("leray projection is idempotent and kills divergence") {
    const DomainSpec d = small();
    SpectralVelocity u = random_field(3, d);
    // perturb with a gradient part
    u.at(0, 1, 0, 0) += complexd(0.3, -0.2);
    SpectralVelocity p1 = leray_project(u);
    SpectralVelocity p2 = leray_project(p1);
    CHECK(divergence_residual(p1) < 1e-10);
    CHECK(rel_diff(p2, p1) < 1e-14);
}

TEST_CASE("leray projection is self-adjoint and a contraction") {
    const DomainSpec d = small();
    SpectralVelocity u = random_field(4, d);
    SpectralVelocity v = random_field(5, d);
    u.at(1, 0, 2, 0) += complexd(0.1, 0.1);   // non-solenoidal parts
    v.at(2, 0, 0, 1) += complexd(-0.2, 0.05);
    symmetrize(u);
    symmetrize(v);
    CHECK(l2_inner(leray_project(u), v) ==
          doctest::Approx(l2_inner(u, leray_project(v))).epsilon(1e-10));
    CHECK(l2_norm(leray_project(u)) <= l2_norm(u) * (1.0 + 1e-14));
}

TEST_CASE("stokes operator: eigenrelation and (Au,v) = ((u,v))") {
    const DomainSpec d = small();
    SpectralVelocity e(d);
    e.at(0, 0, 2, 1) = complexd(0.0, 0.5);   // divergence-free: k.(1,0,0)=0... k=(0,2,1)
    e.at(0, 0, d.N - 2, d.N - 1) = complexd(0.0, -0.5);
    SpectralVelocity ae = apply_stokes(e);
    const double lam = d.ksq(0, 2, 1);
    for (std::size_t m = 0; m < e.coeffs.size(); ++m)
        CHECK(std::abs(ae.coeffs[m] - lam * e.coeffs[m]) < 1e-14);

    SpectralVelocity u = random_field(6, d);
    SpectralVelocity v = random_field(7, d);
    CHECK(l2_inner(apply_stokes(u), v) == doctest::Approx(h1_inner(u, v)).epsilon(1e-12));
    CHECK(l2_inner(apply_stokes(u), u) == doctest::Approx(std::pow(h1_norm(u), 2)).epsilon(1e-12));
}

TEST_CASE("poincare: lambda1 |u|^2 <= ||u||^2") {
    const DomainSpec d = small();
    for (std::uint64_t s = 10; s < 20; ++s) {
        SpectralVelocity u = random_field(s, d);
        CHECK(d.lambda1() * l2_norm(u) * l2_norm(u) <=
              h1_norm(u) * h1_norm(u) * (1.0 + 1e-12));
    }
}

TEST_CASE("bilinear matches brute-force convolution oracle at N=8") {
    const DomainSpec d = small();
    for (std::uint64_t s = 0; s < 3; ++s) {
        SpectralVelocity u = random_field(100 + s, d);
        SpectralVelocity v = random_field(200 + s, d);
        dealias(u);
        dealias(v);
        SpectralVelocity fast = bilinear(u, v);
        SpectralVelocity slow = bilinear_oracle(u, v);
        CHECK(rel_diff(fast, slow) < 1e-12);
    }
}

TEST_CASE("bilinear cancellation (B(u,w),w) = 0 over 100 dealiased triples") {
    const DomainSpec d = small();
    for (std::uint64_t s = 0; s < 100; ++s) {
        SpectralVelocity u = random_field(1000 + 2 * s, d);
        SpectralVelocity w = random_field(1001 + 2 * s, d);
        dealias(u);
        dealias(w);
        const double num = std::abs(l2_inner(bilinear(u, w), w));
        const double den = h1_norm(u) * h1_norm(w) * l2_norm(w);
        REQUIRE(den > 0.0);
        CHECK(num / den < 1e-10);
    }
}

TEST_CASE("taylor-green forcing: solenoidal, correct norm, correct pattern") {
    const DomainSpec d = small();
    const double a = 2.5;
    SpectralVelocity f = taylor_green(d, a);
    CHECK(divergence_residual(f) < 1e-14);
    // |f|^2 = a^2 * 2 * (1/8) * L^3 (two components, each mean-square 1/8)
    CHECK(l2_norm(f) ==
          doctest::Approx(a * std::sqrt(0.25 * d.L * d.L * d.L)).epsilon(1e-12));
    PhysicalField p = to_physical(f);
    const double dx = d.L / d.N;
    const double x = 2 * dx, y = 5 * dx, z = 3 * dx;
    CHECK(p.at(0, 2, 5, 3) ==
          doctest::Approx(a * std::sin(x) * std::cos(y) * std::cos(z)).epsilon(1e-12));
    CHECK(p.at(1, 2, 5, 3) ==
          doctest::Approx(-a * std::cos(x) * std::sin(y) * std::cos(z)).epsilon(1e-12));
    CHECK(p.at(2, 2, 5, 3) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("explicit forcing rejects non-solenoidal modes") {
    const DomainSpec d = small();
    ForcingSpec spec;
    spec.pattern = "explicit";
    spec.amplitude = 1.0;
    spec.modes.push_back({{1, 0, 0}, {complexd(1.0, 0.0), complexd(0.0, 0.0), complexd(0.0, 0.0)}});
    CHECK_THROWS_AS(make_forcing(spec, d), std::invalid_argument);
    spec.modes[0] = {{1, 0, 0}, {complexd(0.0, 0.0), complexd(1.0, 0.0), complexd(0.0, 0.0)}};
    SpectralVelocity f = make_forcing(spec, d);
    CHECK(divergence_residual(f) < 1e-14);
    CHECK(f.at(1, 1, 0, 0) == complexd(1.0, 0.0));
    CHECK(f.at(1, d.N - 1, 0, 0) == complexd(1.0, 0.0));
}

TEST_CASE("random field: divergence-free, hermitian, energy rescaled") {
    const DomainSpec d = small();
    SpectralVelocity u = random_field(42, d, 1.7);
    CHECK(divergence_residual(u) < 1e-10);
    CHECK(0.5 * l2_inner(u, u) == doctest::Approx(1.7).epsilon(1e-12));
    // realness: conjugate symmetry
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < d.N; ++i)
            for (int j = 0; j < d.N; ++j)
                for (int k = 0; k < d.N; ++k) {
                    const complexd z = u.at(c, i, j, k);
                    const complexd zr =
                        u.at(c, u.reflect(i), u.reflect(j), u.reflect(k));
                    CHECK(std::abs(z - std::conj(zr)) < 1e-14);
                }
}

TEST_CASE("random field is deterministic in the seed") {
    const DomainSpec d = small();
    SpectralVelocity a = random_field(99, d);
    SpectralVelocity b = random_field(99, d);
    SpectralVelocity c = random_field(98, d);
    CHECK(a.coeffs == b.coeffs);
    CHECK(a.coeffs != c.coeffs);
}

TEST_CASE("dealias zeroes exactly the modes above the cutoff") {
    const DomainSpec d = small();   // N=8, limit = floor(2/3 * 4) = 2
    CHECK(d.dealias_limit() == 2);
    SpectralVelocity u(d);
    for (auto& z : u.coeffs) z = complexd(1.0, 0.0);
    dealias(u);
    for (int i = 0; i < d.N; ++i)
        for (int j = 0; j < d.N; ++j)
            for (int k = 0; k < d.N; ++k) {
                const bool keep = std::abs(d.wavenumber(i)) <= 2 &&
                                  std::abs(d.wavenumber(j)) <= 2 &&
                                  std::abs(d.wavenumber(k)) <= 2;
                CHECK(u.at(0, i, j, k) == (keep ? complexd(1.0, 0.0) : complexd(0.0, 0.0)));
            }
}

TEST_CASE("galerkin truncation is an l2 projection and idempotent") {
    const DomainSpec d = small();
    SpectralVelocity u = random_field(7, d);
    SpectralVelocity t = galerkin_truncate(u, 4);
    CHECK(l2_norm(t) <= l2_norm(u));
    SpectralVelocity tt = galerkin_truncate(t, 4);
    CHECK(t.coeffs == tt.coeffs);
    CHECK(t.at(0, 1, 1, 0) == u.at(0, 1, 1, 0));       // |k|^2 = 2 <= 4, kept
    CHECK(t.at(0, 1, 2, 0) == complexd(0.0, 0.0));     // |k|^2 = 5 > 4, dropped
}

TEST_CASE("l4 norm matches closed form for a single harmonic") {
    const DomainSpec d = small();
    SpectralVelocity u(d);
    u.at(0, 1, 0, 0) = complexd(0.5, 0.0);
    u.at(0, d.N - 1, 0, 0) = complexd(0.5, 0.0);   // u_x = cos x
    // int cos^4 = (3/8) L over one period, times L^2 from y,z
    const double expect = std::pow(3.0 / 8.0 * d.L * d.L * d.L, 0.25);
    CHECK(l4_norm(u) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("gauss-legendre nodes reproduce known values and integrate exactly") {
    const auto& q = gauss_legendre(5);
    CHECK(q.nodes[2] == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(q.nodes[4] == doctest::Approx(0.906179845938664).epsilon(1e-12));
    CHECK(q.weights[2] == doctest::Approx(0.568888888888889).epsilon(1e-12));
    // degree-9 polynomial integrated exactly
    double s = 0.0;
    for (std::size_t i = 0; i < q.nodes.size(); ++i) {
        const double x = q.nodes[i];
        s += q.weights[i] * (5.0 * std::pow(x, 9) + x * x * x * x - 2.0 * x + 1.0);
    }
    CHECK(s == doctest::Approx(2.0 / 5.0 + 2.0).epsilon(1e-13));
}
