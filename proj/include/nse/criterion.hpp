#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "nse/assimilation.hpp"
#include "nse/observers.hpp"

namespace nse {

/// W_h^2 = c |f|^2 / (nu^2 lambda_1) + M_h^2
inline double compute_Wh(double M_h, double f_norm, double nu, double lambda1, double c) {
    return std::sqrt(c * f_norm * f_norm / (nu * nu * lambda1) + M_h * M_h);
}

struct MuWindow {
    double lower = 0.0;
    double upper = 0.0;
    bool empty() const { return lower > upper; }
    double midpoint() const { return 0.5 * (lower + upper); }
};

/// Admissible nudging window [max{nu l1, c W^4/nu^3, c W |f|/nu^2}, nu/(4 c h^2)].
inline MuWindow mu_window(double W_h, double nu, double lambda1, double f_norm, double c,
                          double h) {
    MuWindow w;
    w.lower = std::max({nu * lambda1, c * W_h * W_h * W_h * W_h / (nu * nu * nu),
                        c * W_h * f_norm / (nu * nu)});
    w.upper = nu / (4.0 * c * h * h);
    return w;
}

struct CriterionReport {
    double h = 0.0;
    double M_h = 0.0;
    double W_h = 0.0;
    double lhs_nu_lambda1 = 0.0;
    double lhs_W4 = 0.0;        // c W_h^4 / nu^3
    double lhs_Wf = 0.0;        // c W_h |f| / nu^2
    double rhs = 0.0;           // nu / (4 c h^2)
    MuWindow window;
    bool satisfied = false;
    double c_used = 1.0;

    // diagnostic cross-check against the simulation, when available
    std::optional<double> measured_sup_h1;
    std::optional<bool> sup_h1_within_Wh;

    double lhs_max() const { return std::max({lhs_nu_lambda1, lhs_W4, lhs_Wf}); }
};

inline CriterionReport make_report(double h, double M_h, double f_norm, const DomainSpec& d,
                                   double c) {
    CriterionReport r;
    r.h = h;
    r.M_h = M_h;
    r.c_used = c;
    r.W_h = compute_Wh(M_h, f_norm, d.nu, d.lambda1(), c);
    r.lhs_nu_lambda1 = d.nu * d.lambda1();
    r.lhs_W4 = c * std::pow(r.W_h, 4) / std::pow(d.nu, 3);
    r.lhs_Wf = c * r.W_h * f_norm / (d.nu * d.nu);
    r.rhs = d.nu / (4.0 * c * h * h);
    r.window = mu_window(r.W_h, d.nu, d.lambda1(), f_norm, c, h);
    r.satisfied = r.lhs_max() <= r.rhs;
    return r;
}

/// Evaluate the finite-observation regularity criterion on an observation
/// series from a single h. When a measured sup ||u|| is supplied, the
/// theorem's conclusion ||u|| <= W_h is cross-checked as a diagnostic.
inline CriterionReport check_criterion(const std::vector<ObservationSet>& series, double f_norm,
                                       const DomainSpec& domain, double c, double C_mh = 1.0,
                                       std::optional<double> measured_sup_h1 = std::nullopt) {
    if (series.empty()) throw std::invalid_argument("check_criterion: empty series");
    const double M_h = compute_Mh(series, C_mh);
    CriterionReport r = make_report(series.front().h(), M_h, f_norm, domain, c);
    if (measured_sup_h1) {
        r.measured_sup_h1 = measured_sup_h1;
        r.sup_h1_within_Wh = *measured_sup_h1 <= r.W_h;
    }
    return r;
}

struct AdmissibleSearch {
    std::vector<CriterionReport> curve;   // one report per candidate, in input order
    std::optional<std::size_t> found;     // index of first satisfying candidate
};

/// Scan candidates in the given (decreasing-h) order and return the first
/// satisfying one. Each candidate supplies its h and measured M_h.
inline AdmissibleSearch find_admissible_h(const std::vector<std::pair<double, double>>& h_and_Mh,
                                          double f_norm, const DomainSpec& domain, double c) {
    AdmissibleSearch out;
    for (std::size_t i = 0; i < h_and_Mh.size(); ++i) {
        out.curve.push_back(make_report(h_and_Mh[i].first, h_and_Mh[i].second, f_norm, domain, c));
        if (!out.found && out.curve.back().satisfied) out.found = i;
    }
    return out;
}

struct DeterminingRecord {
    double t;
    double obs_diff_l2;    // |I~(u1 - u2)|
    double full_diff_l2;   // |u1 - u2|
};

struct DeterminingSeries {
    std::vector<DeterminingRecord> records;
    bool aborted = false;
    std::string abort_reason;
};

/// Two truth runs from different seeds under the same forcing; logs the
/// observed-difference and full-difference norms over time.
inline DeterminingSeries determining_nodes_experiment(const SpectralVelocity& u1_0,
                                                      const SpectralVelocity& u2_0,
                                                      const SpectralVelocity& f,
                                                      const NudgingConfig& cfg,
                                                      int sample_every) {
    const DomainSpec& d = u1_0.domain;
    Observer observer(cfg, d);
    SpectralVelocity u1 = leray_project(u1_0);
    SpectralVelocity u2 = leray_project(u2_0);
    dealias(u1);
    dealias(u2);
    symmetrize(u1);
    symmetrize(u2);

    DeterminingSeries series;
    const double blowup = 1e6 * std::max({l2_norm(u1), l2_norm(u2), 1.0});
    double t = 0.0;

    auto record = [&]() {
        SpectralVelocity diff = u1;
        for (std::size_t m = 0; m < diff.coeffs.size(); ++m) diff.coeffs[m] -= u2.coeffs[m];
        DeterminingRecord r;
        r.t = t;
        r.full_diff_l2 = l2_norm(diff);
        r.obs_diff_l2 = observer.interpolant_l2(observer.observe(diff));
        series.records.push_back(r);
    };

    record();
    const long nsteps = static_cast<long>(std::llround(cfg.T / cfg.dt));
    for (long step = 1; step <= nsteps; ++step) {
        StepDiag d1, d2;
        u1 = step_nse(u1, f, cfg.dt, &d1);
        u2 = step_nse(u2, f, cfg.dt, &d2);
        t = step * cfg.dt;
        const double n1 = l2_norm(u1), n2 = l2_norm(u2);
        if (!d1.finite || !d2.finite || !std::isfinite(n1 + n2) || std::max(n1, n2) > blowup) {
            series.aborted = true;
            series.abort_reason = "instability at step " + std::to_string(step);
            record();
            return series;
        }
        if (sample_every > 0 && (step % sample_every == 0 || step == nsteps)) record();
    }
    return series;
}

}  // namespace nse
