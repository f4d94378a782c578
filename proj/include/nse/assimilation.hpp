#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nse/observers.hpp"
#include "nse/spectral.hpp"

namespace nse {

enum class FeedbackInterp { Smoothed, PiecewiseConstant };

struct NudgingConfig {
    double mu = 0.0;
    ObsKind kind = ObsKind::Nodal;
    int n_cells = 8;          // Volume/Nodal observation grid
    int n_obs = 4;            // Modal ball radius
    bool smoothed = true;     // nodal feedback through the mollified operator
    double dt = 1e-3;
    double T = 1.0;
    std::optional<int> galerkin_ksq;      // P_n truncation: keep |k|^2 <= value
    std::optional<SpectralVelocity> w0;   // default w(0) = 0

    void validate() const {
        if (mu < 0.0) throw std::invalid_argument("NudgingConfig: mu >= 0");
        if (dt <= 0.0) throw std::invalid_argument("NudgingConfig: dt > 0");
        if (T < 0.0) throw std::invalid_argument("NudgingConfig: T >= 0");
    }

    FeedbackInterp feedback() const {
        return (kind == ObsKind::Nodal && smoothed) ? FeedbackInterp::Smoothed
                                                    : FeedbackInterp::PiecewiseConstant;
    }
};

struct StepDiag {
    double cfl = 0.0;       // max |u| dt / dx
    bool cfl_violation = false;
    bool finite = true;
};

namespace detail {

/// f - B(u,u), plus the largest pointwise speed for the CFL diagnostic.
inline SpectralVelocity nse_rhs(const SpectralVelocity& u, const SpectralVelocity& f,
                                double* umax_out) {
    const DomainSpec& d = u.domain;
    auto& w = workspace_for(d.N);
    const std::size_t n = static_cast<std::size_t>(d.modes());

    PhysicalField up = to_physical(u);
    if (umax_out) {
        double m2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double v2 = up.component(0)[i] * up.component(0)[i] +
                              up.component(1)[i] * up.component(1)[i] +
                              up.component(2)[i] * up.component(2)[i];
            m2 = std::max(m2, v2);
        }
        *umax_out = std::sqrt(m2);
    }

    PhysicalField advp(d);
    std::vector<double> dv(n);
    for (int c = 0; c < 3; ++c) {
        double* out = advp.component(c);
        for (int dim = 0; dim < 3; ++dim) {
            std::vector<complexd> dspec = derivative(u, c, dim);
            w.backward(dspec.data(), dv.data());
            const double* uj = up.component(dim);
            for (std::size_t m = 0; m < n; ++m) out[m] += uj[m] * dv[m];
        }
    }
    SpectralVelocity b = to_spectral(advp);
    dealias(b);
    b = leray_project(b);
    symmetrize(b);

    SpectralVelocity g = f;
    for (std::size_t m = 0; m < g.coeffs.size(); ++m) g.coeffs[m] -= b.coeffs[m];
    return g;
}

inline void viscous_factor(SpectralVelocity& u, double nu_dt) {
    const int N = u.domain.N;
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
            for (int k = 0; k < N; ++k) {
                const double e = std::exp(-nu_dt * u.domain.ksq(i, j, k));
                const std::size_t m = flat_index(N, i, j, k);
                for (int c = 0; c < 3; ++c) u.component(c)[m] *= e;
            }
}

/// Integrating-factor Heun step for du/dt + nu A u = g(u), with g supplied
/// as a callable of the stage state. Viscosity is exact per mode.
template <class Rhs>
SpectralVelocity if_heun_step(const SpectralVelocity& u, double dt, Rhs&& rhs) {
    const double nu = u.domain.nu;
    SpectralVelocity g1 = rhs(u);

    SpectralVelocity mid = u;
    for (std::size_t m = 0; m < mid.coeffs.size(); ++m) mid.coeffs[m] += dt * g1.coeffs[m];
    viscous_factor(mid, nu * dt);

    SpectralVelocity g2 = rhs(mid);

    SpectralVelocity out = u;
    viscous_factor(out, nu * dt);
    viscous_factor(g1, nu * dt);
    for (std::size_t m = 0; m < out.coeffs.size(); ++m)
        out.coeffs[m] += 0.5 * dt * (g1.coeffs[m] + g2.coeffs[m]);
    zero_mean(out);
    symmetrize(out);
    return out;
}

}  // namespace detail

/// One truth step of the functional-form momentum equation.
inline SpectralVelocity step_nse(const SpectralVelocity& u, const SpectralVelocity& f, double dt,
                                 StepDiag* diag = nullptr) {
    double umax = 0.0;
    bool first = true;
    auto rhs = [&](const SpectralVelocity& s) {
        SpectralVelocity g = detail::nse_rhs(s, f, first ? &umax : nullptr);
        first = false;
        return g;
    };
    SpectralVelocity out = detail::if_heun_step(u, dt, rhs);
    if (diag) {
        const double dx = u.domain.L / u.domain.N;
        diag->cfl = umax * dt / dx;
        diag->cfl_violation = diag->cfl > 0.5;
        diag->finite = std::isfinite(out.max_abs());
    }
    return out;
}

/// Observation-side machinery shared by nudged steps: observes a state with
/// the configured operator and maps the observation back into H.
class Observer {
public:
    Observer(const NudgingConfig& cfg, const DomainSpec& domain) : cfg_(cfg), domain_(domain) {
        if (cfg.kind != ObsKind::Modal) {
            grid_ = ObservationGrid(cfg.n_cells, domain.L);
            if (cfg.feedback() == FeedbackInterp::Smoothed)
                mollifier_ = build_mollifier(grid_, domain);
        }
    }

    ObservationSet observe(const SpectralVelocity& u) const {
        switch (cfg_.kind) {
            case ObsKind::Modal: return observe_modal(u, cfg_.n_obs);
            case ObsKind::Volume: return observe_volume(u, grid_);
            case ObsKind::Nodal: return observe_nodal(u, grid_);
        }
        throw std::logic_error("unreachable");
    }

    /// Interpolant of an observation, mean-zeroed and Leray-projected.
    SpectralVelocity lift(const ObservationSet& obs) const {
        if (obs.kind != cfg_.kind)
            throw std::invalid_argument("Observer: observation kind mismatch");
        if (cfg_.kind == ObsKind::Modal) return modal_field(obs, domain_);
        const InterpMode mode = cfg_.feedback() == FeedbackInterp::Smoothed
                                    ? InterpMode::Smoothed
                                    : InterpMode::PiecewiseConstant;
        PhysicalField p = interpolate(obs, mode, domain_,
                                      mollifier_ ? &*mollifier_ : nullptr);
        SpectralVelocity s = to_spectral(p);
        dealias(s);
        s = leray_project(s);
        symmetrize(s);
        return s;
    }

    /// |I u| of the raw interpolant (no projection), by grid quadrature.
    double interpolant_l2(const ObservationSet& obs) const {
        if (cfg_.kind == ObsKind::Modal) return l2_norm(modal_field(obs, domain_));
        const InterpMode mode = cfg_.feedback() == FeedbackInterp::Smoothed
                                    ? InterpMode::Smoothed
                                    : InterpMode::PiecewiseConstant;
        return l2_norm(interpolate(obs, mode, domain_, mollifier_ ? &*mollifier_ : nullptr));
    }

    const ObservationGrid& grid() const { return grid_; }
    const MollifierTable* mollifier() const { return mollifier_ ? &*mollifier_ : nullptr; }

private:
    NudgingConfig cfg_;
    DomainSpec domain_;
    ObservationGrid grid_;
    std::optional<MollifierTable> mollifier_;
};

/// One nudged step. The feedback mu (I u - I w) is evaluated from the
/// supplied observation of u and an observation of w taken at step start,
/// then held constant across both stages (zero-order hold).
inline SpectralVelocity step_nudged(const SpectralVelocity& w, const ObservationSet& obs_of_u,
                                    const SpectralVelocity& f, double mu, double dt,
                                    const Observer& observer, const NudgingConfig& cfg,
                                    StepDiag* diag = nullptr) {
    SpectralVelocity feedback(w.domain);
    if (mu != 0.0) {
        const SpectralVelocity iu = observer.lift(obs_of_u);
        const SpectralVelocity iw = observer.lift(observer.observe(w));
        feedback = iu;
        for (std::size_t m = 0; m < feedback.coeffs.size(); ++m)
            feedback.coeffs[m] = mu * (feedback.coeffs[m] - iw.coeffs[m]);
    }
    double umax = 0.0;
    bool first = true;
    auto rhs = [&](const SpectralVelocity& s) {
        SpectralVelocity g = detail::nse_rhs(s, f, first ? &umax : nullptr);
        first = false;
        if (mu != 0.0)
            for (std::size_t m = 0; m < g.coeffs.size(); ++m) g.coeffs[m] += feedback.coeffs[m];
        return g;
    };
    SpectralVelocity out = detail::if_heun_step(w, dt, rhs);
    if (cfg.galerkin_ksq) out = galerkin_truncate(out, *cfg.galerkin_ksq);
    if (diag) {
        const double dx = w.domain.L / w.domain.N;
        diag->cfl = umax * dt / dx;
        diag->cfl_violation = diag->cfl > 0.5;
        diag->finite = std::isfinite(out.max_abs());
    }
    return out;
}

struct TwinRecord {
    double t;
    double err_l2;      // |u - w|
    double err_h1;      // ||u - w||
    double u_h1, w_h1;  // ||u||, ||w||
    double u_h2, w_h2;  // |Au|, |Aw|
    double energy_residual;
    // extra diagnostics kept outside the CSV schema
    double u_l2 = 0.0;
    double f_dot_u = 0.0;
};

struct TwinSeries {
    std::vector<TwinRecord> records;
    bool aborted = false;
    std::string abort_reason;
    double max_cfl = 0.0;
    bool cfl_violation = false;
};

struct RunHooks {
    // called once per step with the post-step states (t is the new time)
    std::function<void(double t, const SpectralVelocity& u, const SpectralVelocity& w)> on_step;
};

/// Twin experiment: evolve truth u and assimilated w jointly from w(0)=0,
/// observing u at every step.
inline TwinSeries run_twin(const SpectralVelocity& u0, const NudgingConfig& cfg,
                           const SpectralVelocity& f, int sample_every,
                           const RunHooks* hooks = nullptr) {
    cfg.validate();
    const DomainSpec& d = u0.domain;
    Observer observer(cfg, d);

    SpectralVelocity u = leray_project(u0);
    dealias(u);
    symmetrize(u);
    SpectralVelocity w = cfg.w0 ? *cfg.w0 : SpectralVelocity(d);

    TwinSeries series;
    const double u0_l2 = l2_norm(u);
    const double blowup = 1e6 * std::max(u0_l2, 1.0);

    double t = 0.0;
    double energy_int = 0.0;     // 2 nu int ||u||^2 - 2 int (f,u), trapezoid
    double prev_integrand = 2.0 * d.nu * h1_norm(u) * h1_norm(u) - 2.0 * l2_inner(f, u);
    const double e0 = l2_norm(u) * l2_norm(u);

    auto record = [&]() {
        SpectralVelocity diff = u;
        for (std::size_t m = 0; m < diff.coeffs.size(); ++m) diff.coeffs[m] -= w.coeffs[m];
        TwinRecord r;
        r.t = t;
        r.err_l2 = l2_norm(diff);
        r.err_h1 = h1_norm(diff);
        r.u_h1 = h1_norm(u);
        r.w_h1 = h1_norm(w);
        r.u_h2 = h2_seminorm(u);
        r.w_h2 = h2_seminorm(w);
        r.u_l2 = l2_norm(u);
        r.f_dot_u = l2_inner(f, u);
        r.energy_residual = r.u_l2 * r.u_l2 - e0 + energy_int;
        series.records.push_back(r);
    };

    record();
    const long nsteps = static_cast<long>(std::llround(cfg.T / cfg.dt));
    for (long step = 1; step <= nsteps; ++step) {
        StepDiag du, dw;
        ObservationSet obs = observer.observe(u);
        SpectralVelocity un = step_nse(u, f, cfg.dt, &du);
        SpectralVelocity wn = step_nudged(w, obs, f, cfg.mu, cfg.dt, observer, cfg, &dw);
        u = std::move(un);
        w = std::move(wn);
        t = step * cfg.dt;

        series.max_cfl = std::max({series.max_cfl, du.cfl, dw.cfl});
        if (du.cfl_violation || dw.cfl_violation) series.cfl_violation = true;

        const double ul2 = l2_norm(u);
        if (!du.finite || !dw.finite || !std::isfinite(ul2) || ul2 > blowup) {
            series.aborted = true;
            series.abort_reason = "instability at step " + std::to_string(step) + " (t=" +
                                  std::to_string(t) + ", CFL=" + std::to_string(series.max_cfl) +
                                  ")";
            record();
            return series;
        }

        const double integrand =
            2.0 * d.nu * h1_norm(u) * h1_norm(u) - 2.0 * l2_inner(f, u);
        energy_int += 0.5 * cfg.dt * (prev_integrand + integrand);
        prev_integrand = integrand;

        if (hooks && hooks->on_step) hooks->on_step(t, u, w);
        if (sample_every > 0 && (step % sample_every == 0 || step == nsteps)) record();
    }
    return series;
}

/// Truth-only run: same stepper and diagnostics with the assimilated state
/// absent (w columns zero).
inline TwinSeries run_truth(const SpectralVelocity& u0, const SpectralVelocity& f, double dt,
                            double T, int sample_every, const RunHooks* hooks = nullptr) {
    const DomainSpec& d = u0.domain;
    SpectralVelocity u = leray_project(u0);
    dealias(u);
    symmetrize(u);

    TwinSeries series;
    const double blowup = 1e6 * std::max(l2_norm(u), 1.0);
    double t = 0.0;
    double energy_int = 0.0;
    double prev_integrand = 2.0 * d.nu * h1_norm(u) * h1_norm(u) - 2.0 * l2_inner(f, u);
    const double e0 = l2_norm(u) * l2_norm(u);

    auto record = [&]() {
        TwinRecord r{};
        r.t = t;
        r.u_h1 = h1_norm(u);
        r.u_h2 = h2_seminorm(u);
        r.u_l2 = l2_norm(u);
        r.f_dot_u = l2_inner(f, u);
        r.energy_residual = r.u_l2 * r.u_l2 - e0 + energy_int;
        series.records.push_back(r);
    };

    record();
    const long nsteps = static_cast<long>(std::llround(T / dt));
    for (long step = 1; step <= nsteps; ++step) {
        StepDiag diag;
        u = step_nse(u, f, dt, &diag);
        t = step * dt;
        series.max_cfl = std::max(series.max_cfl, diag.cfl);
        if (diag.cfl_violation) series.cfl_violation = true;
        const double ul2 = l2_norm(u);
        if (!diag.finite || !std::isfinite(ul2) || ul2 > blowup) {
            series.aborted = true;
            series.abort_reason = "instability at step " + std::to_string(step) + " (t=" +
                                  std::to_string(t) + ", CFL=" + std::to_string(series.max_cfl) +
                                  ")";
            record();
            return series;
        }
        const double integrand = 2.0 * d.nu * h1_norm(u) * h1_norm(u) - 2.0 * l2_inner(f, u);
        energy_int += 0.5 * dt * (prev_integrand + integrand);
        prev_integrand = integrand;
        if (hooks && hooks->on_step) hooks->on_step(t, u, u);
        if (sample_every > 0 && (step % sample_every == 0 || step == nsteps)) record();
    }
    return series;
}

struct EnergyBudgetReport {
    double residual = 0.0;        // |u(t)|^2 + 2 nu int ||u||^2 - |u(s)|^2 - 2 int (f,u)
    double relative_residual = 0.0;
    double sup_u_l2 = 0.0;        // the M(u_0) estimate
};

/// Trapezoid-rule energy budget over a uniformly sampled segment
/// [first, last] of a twin series (indices into records).
inline EnergyBudgetReport energy_budget(const TwinSeries& series, std::size_t first,
                                        std::size_t last, double nu) {
    if (last >= series.records.size() || first > last)
        throw std::invalid_argument("energy_budget: bad segment");
    const auto& rec = series.records;
    double visc = 0.0, work = 0.0, sup = 0.0;
    for (std::size_t i = first; i <= last; ++i) sup = std::max(sup, rec[i].u_l2);
    for (std::size_t i = first; i < last; ++i) {
        const double dt = rec[i + 1].t - rec[i].t;
        visc += 0.5 * dt *
                (rec[i].u_h1 * rec[i].u_h1 + rec[i + 1].u_h1 * rec[i + 1].u_h1);
        work += 0.5 * dt * (rec[i].f_dot_u + rec[i + 1].f_dot_u);
    }
    EnergyBudgetReport rep;
    rep.residual = rec[last].u_l2 * rec[last].u_l2 - rec[first].u_l2 * rec[first].u_l2 +
                   2.0 * nu * visc - 2.0 * work;
    const double scale = std::max({rec[first].u_l2 * rec[first].u_l2, 2.0 * nu * visc,
                                   std::abs(2.0 * work), 1e-300});
    rep.relative_residual = std::abs(rep.residual) / scale;
    rep.sup_u_l2 = sup;
    return rep;
}

}  // namespace nse
