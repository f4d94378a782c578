#pragma once

#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nse/config.hpp"
#include "nse/criterion.hpp"
#include "nse/inequality_lab.hpp"
#include "nse/io.hpp"

namespace nse {

inline const char* code_version() { return "0.1.0"; }

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

struct HarnessOptions {
    std::filesystem::path out_dir;
    std::optional<std::uint64_t> seed_override;
    bool quiet = false;
};

struct RunOutcome {
    bool instability = false;
    std::string message;
    std::vector<std::filesystem::path> files;   // everything written, manifest included
};

namespace detail {

inline void emit(const HarnessOptions& opt, RunOutcome& out, const std::string& name,
                 const std::string& content) {
    const std::filesystem::path p = opt.out_dir / name;
    atomic_write(p, content);
    out.files.push_back(p);
}

inline void emit_json(const HarnessOptions& opt, RunOutcome& out, const std::string& name,
                      const nlohmann::json& j) {
    emit(opt, out, name, j.dump(2) + "\n");
}

inline void write_manifest(const HarnessOptions& opt, RunOutcome& out, const std::string& command,
                           const KeyValueConfig& kv, std::uint64_t seed) {
    nlohmann::json j;
    j["command"] = command;
    j["seed"] = seed;
    j["config_hash"] = hex64(fnv1a64(kv.text()));
    j["code_version"] = code_version();
    j["config"] = kv.text();
    emit_json(opt, out, "manifest.json", j);
}

inline ExperimentConfig resolve(const KeyValueConfig& kv, const HarnessOptions& opt) {
    ExperimentConfig cfg = ExperimentConfig::from(kv);
    if (opt.seed_override) cfg.seed = *opt.seed_override;
    return cfg;
}

}  // namespace detail

// ---- decay-slope fit -------------------------------------------------------

struct DecayFit {
    double slope = 0.0;     // d/dt log |u - w|
    double t_begin = 0.0;   // transient cutoff
    double t_end = 0.0;
    long points = 0;
    bool ok = false;
};

/// Least-squares slope of log err_l2 over the post-transient window: records
/// after the error has fallen to a tenth of its initial value, stopping at
/// the noise floor.
inline DecayFit fit_decay_slope(const TwinSeries& s, double transient_fraction = 0.1,
                                double floor_val = 1e-12) {
    DecayFit fit;
    if (s.records.empty()) return fit;
    const double err0 = s.records.front().err_l2;
    double st = 0, sl = 0, stt = 0, stl = 0;
    for (const auto& r : s.records) {
        if (r.t <= 0.0 || r.err_l2 <= floor_val) continue;
        if (err0 > 0.0 && r.err_l2 > transient_fraction * err0) continue;
        const double lt = std::log(r.err_l2);
        if (fit.points == 0) fit.t_begin = r.t;
        fit.t_end = r.t;
        st += r.t;
        sl += lt;
        stt += r.t * r.t;
        stl += r.t * lt;
        ++fit.points;
    }
    const double det = fit.points * stt - st * st;
    if (fit.points >= 3 && det > 0.0) {
        fit.slope = (fit.points * stl - st * sl) / det;
        fit.ok = true;
    }
    return fit;
}

// ---- subcommands -----------------------------------------------------------

inline RunOutcome run_truth_cmd(const KeyValueConfig& kv, const HarnessOptions& opt) {
    RunOutcome out;
    const ExperimentConfig cfg = detail::resolve(kv, opt);
    const SpectralVelocity u0 = cfg.initial_data();
    const SpectralVelocity f = cfg.forcing_field();

    long step = 0;
    RunHooks hooks;
    if (cfg.snapshot_every > 0) {
        hooks.on_step = [&](double t, const SpectralVelocity& u, const SpectralVelocity&) {
            ++step;
            if (step % cfg.snapshot_every == 0) {
                char name[40];
                std::snprintf(name, sizeof(name), "snapshot_%06ld.bin", step);
                write_snapshot(opt.out_dir / name, u, t);
                out.files.push_back(opt.out_dir / name);
            }
        };
    }
    TwinSeries series = run_truth(u0, f, cfg.nudging.dt, cfg.nudging.T,
                                  static_cast<int>(cfg.sample_every),
                                  cfg.snapshot_every > 0 ? &hooks : nullptr);
    detail::emit(opt, out, "truth.csv", twin_series_csv(series, /*truth_only=*/true));

    nlohmann::json j;
    j["aborted"] = series.aborted;
    if (series.aborted) j["abort_reason"] = series.abort_reason;
    j["max_cfl"] = series.max_cfl;
    j["cfl_violation"] = series.cfl_violation;
    if (series.records.size() >= 2 && !series.aborted) {
        const EnergyBudgetReport b =
            energy_budget(series, 0, series.records.size() - 1, cfg.domain.nu);
        j["energy_budget"] = {{"residual", b.residual},
                              {"relative_residual", b.relative_residual},
                              {"sup_u_l2", b.sup_u_l2}};
    }
    detail::emit_json(opt, out, "energy_budget.json", j);
    detail::write_manifest(opt, out, "truth", kv, cfg.seed);
    if (series.aborted) {
        out.instability = true;
        out.message = series.abort_reason;
    }
    return out;
}

/// Resolve mu = "auto" to the midpoint of the admissible window, measured
/// from a truth pre-run over the same horizon.
inline double resolve_auto_mu(const ExperimentConfig& cfg, const SpectralVelocity& u0,
                              const SpectralVelocity& f, MuWindow* window_out = nullptr) {
    Observer observer(cfg.nudging, cfg.domain);
    MhAccumulator acc;
    acc.C = cfg.obs_C;
    acc.add(observer.observe(leray_project(u0)));
    RunHooks hooks;
    hooks.on_step = [&](double, const SpectralVelocity& u, const SpectralVelocity&) {
        acc.add(observer.observe(u));
    };
    TwinSeries pre = run_truth(u0, f, cfg.nudging.dt, cfg.nudging.T, 0, &hooks);
    if (pre.aborted) throw std::runtime_error("auto mu pre-run unstable: " + pre.abort_reason);

    const double f_norm = l2_norm(f);
    ObservationSet probe = observer.observe(leray_project(u0));
    const double W_h = compute_Wh(acc.value(), f_norm, cfg.domain.nu, cfg.domain.lambda1(),
                                  cfg.criterion_c);
    const MuWindow w = mu_window(W_h, cfg.domain.nu, cfg.domain.lambda1(), f_norm,
                                 cfg.criterion_c, probe.h());
    if (window_out) *window_out = w;
    if (w.empty())
        throw ConfigError("nudging.mu = auto: admissible window is empty at h = " +
                          fmt(probe.h()));
    return w.midpoint();
}

inline RunOutcome run_twin_cmd(const KeyValueConfig& kv, const HarnessOptions& opt) {
    RunOutcome out;
    ExperimentConfig cfg = detail::resolve(kv, opt);
    const SpectralVelocity u0 = cfg.initial_data();
    const SpectralVelocity f = cfg.forcing_field();

    std::optional<MuWindow> window;
    if (cfg.mu_auto) {
        MuWindow w;
        cfg.nudging.mu = resolve_auto_mu(cfg, u0, f, &w);
        window = w;
    }

    TwinSeries series = run_twin(u0, cfg.nudging, f, static_cast<int>(cfg.sample_every));
    detail::emit(opt, out, "twin.csv", twin_series_csv(series));

    const DecayFit fit = fit_decay_slope(series);
    nlohmann::json j;
    j["mu"] = cfg.nudging.mu;
    j["mu_auto"] = cfg.mu_auto;
    if (window) j["mu_window"] = to_json(*window);
    j["target_slope"] = -cfg.nudging.mu / 2.0;
    j["fitted_slope"] = fit.ok ? nlohmann::json(fit.slope) : nlohmann::json();
    j["transient_cutoff"] = fit.t_begin;
    j["fit_window"] = {fit.t_begin, fit.t_end};
    j["fit_points"] = fit.points;
    if (!series.records.empty()) {
        j["final_err_l2"] = series.records.back().err_l2;
        j["final_err_h1"] = series.records.back().err_h1;
    }
    j["max_cfl"] = series.max_cfl;
    j["aborted"] = series.aborted;
    if (series.aborted) j["abort_reason"] = series.abort_reason;
    detail::emit_json(opt, out, "sync_summary.json", j);
    detail::write_manifest(opt, out, "twin", kv, cfg.seed);
    if (series.aborted) {
        out.instability = true;
        out.message = series.abort_reason;
    }
    return out;
}

/// One truth run observed at every sample point by each candidate operator;
/// returns the admissible-h scan plus the measured sup ||u||.
struct CriterionRun {
    AdmissibleSearch search;
    double sup_h1 = 0.0;
    std::vector<double> h_values;
    bool aborted = false;
    std::string abort_reason;
};

inline CriterionRun run_criterion_scan(const ExperimentConfig& cfg, const SpectralVelocity& u0,
                                       const SpectralVelocity& f) {
    CriterionRun run;
    const bool modal = cfg.nudging.kind == ObsKind::Modal;
    if (cfg.candidates.empty())
        throw ConfigError("missing config field: criterion.candidates");

    std::vector<MhAccumulator> accs(cfg.candidates.size());
    std::vector<ObservationGrid> grids;
    for (std::size_t i = 0; i < cfg.candidates.size(); ++i) {
        accs[i].C = cfg.obs_C;
        if (modal) {
            run.h_values.push_back(cfg.domain.L / (2.0 * pi * cfg.candidates[i]));
        } else {
            grids.emplace_back(static_cast<int>(cfg.candidates[i]), cfg.domain.L);
            run.h_values.push_back(grids.back().h());
        }
    }

    auto observe_all = [&](const SpectralVelocity& u) {
        run.sup_h1 = std::max(run.sup_h1, h1_norm(u));
        for (std::size_t i = 0; i < accs.size(); ++i) {
            if (modal)
                accs[i].add(observe_modal(u, static_cast<int>(cfg.candidates[i])));
            else if (cfg.nudging.kind == ObsKind::Volume)
                accs[i].add(observe_volume(u, grids[i]));
            else
                accs[i].add(observe_nodal(u, grids[i]));
        }
    };

    observe_all(leray_project(u0));
    long step = 0;
    RunHooks hooks;
    hooks.on_step = [&](double, const SpectralVelocity& u, const SpectralVelocity&) {
        ++step;
        if (cfg.sample_every > 0 && step % cfg.sample_every == 0) observe_all(u);
    };
    TwinSeries series = run_truth(u0, f, cfg.nudging.dt, cfg.nudging.T, 0, &hooks);
    run.aborted = series.aborted;
    run.abort_reason = series.abort_reason;

    std::vector<std::pair<double, double>> h_and_Mh;
    for (std::size_t i = 0; i < accs.size(); ++i)
        h_and_Mh.emplace_back(run.h_values[i], accs[i].value());
    run.search = find_admissible_h(h_and_Mh, l2_norm(f), cfg.domain, cfg.criterion_c);
    for (auto& r : run.search.curve) {
        r.measured_sup_h1 = run.sup_h1;
        r.sup_h1_within_Wh = run.sup_h1 <= r.W_h;
    }
    return run;
}

inline RunOutcome run_criterion_cmd(const KeyValueConfig& kv, const HarnessOptions& opt) {
    RunOutcome out;
    const ExperimentConfig cfg = detail::resolve(kv, opt);
    const SpectralVelocity u0 = cfg.initial_data();
    const SpectralVelocity f = cfg.forcing_field();
    const CriterionRun run = run_criterion_scan(cfg, u0, f);

    nlohmann::json j;
    j["kind"] = to_string(cfg.nudging.kind);
    j["c"] = cfg.criterion_c;
    j["f_l2"] = l2_norm(f);
    j["sup_h1"] = run.sup_h1;
    j["found"] = run.search.found ? nlohmann::json(*run.search.found) : nlohmann::json();
    if (run.search.found) j["admissible_h"] = run.search.curve[*run.search.found].h;
    nlohmann::json curve = nlohmann::json::array();
    for (const auto& r : run.search.curve) curve.push_back(to_json(r));
    j["curve"] = curve;
    j["aborted"] = run.aborted;
    if (run.aborted) j["abort_reason"] = run.abort_reason;
    detail::emit_json(opt, out, "criterion_report.json", j);
    detail::emit(opt, out, "mh_curve.csv", mh_curve_csv(run.search));
    detail::write_manifest(opt, out, "criterion", kv, cfg.seed);
    if (run.aborted) {
        out.instability = true;
        out.message = run.abort_reason;
    }
    return out;
}

inline RunOutcome run_determining_cmd(const KeyValueConfig& kv, const HarnessOptions& opt) {
    RunOutcome out;
    const ExperimentConfig cfg = detail::resolve(kv, opt);
    const SpectralVelocity u1 = cfg.initial_data();
    const SpectralVelocity u2 = random_divfree_field(cfg.seed2, cfg.spectrum, cfg.domain);
    const SpectralVelocity f = cfg.forcing_field();

    DeterminingSeries series = determining_nodes_experiment(
        u1, u2, f, cfg.nudging, static_cast<int>(cfg.sample_every));
    detail::emit(opt, out, "determining.csv", determining_csv(series));

    nlohmann::json j;
    j["aborted"] = series.aborted;
    if (series.aborted) j["abort_reason"] = series.abort_reason;
    if (!series.records.empty()) {
        j["final_obs_diff_l2"] = series.records.back().obs_diff_l2;
        j["final_full_diff_l2"] = series.records.back().full_diff_l2;
    }
    detail::emit_json(opt, out, "determining_summary.json", j);
    detail::write_manifest(opt, out, "determining", kv, cfg.seed);
    if (series.aborted) {
        out.instability = true;
        out.message = series.abort_reason;
    }
    return out;
}

inline RunOutcome run_lab_cmd(const KeyValueConfig& kv, const HarnessOptions& opt) {
    RunOutcome out;
    const ExperimentConfig cfg = detail::resolve(kv, opt);
    EnsembleSpec spec;
    spec.domain = cfg.domain;
    spec.fields_per_h = static_cast<int>(cfg.lab_fields_per_h);
    spec.seed = cfg.lab_seed;
    spec.slope = cfg.spectrum.slope;
    spec.k0 = cfg.spectrum.k0;
    spec.n_cells.clear();
    for (long n : cfg.lab_n_cells) spec.n_cells.push_back(static_cast<int>(n));

    std::vector<ConstantEstimate> ests;
    ests.push_back(estimate_type1(ObsKind::Modal, spec));
    ests.push_back(estimate_type1(ObsKind::Volume, spec));
    ests.push_back(estimate_type2(spec));
    ests.push_back(verify_osc_lemma(spec));
    ests.push_back(verify_smooth_gap(spec));
    ests.push_back(verify_modib(spec));
    ests.push_back(verify_bilinear_estimates(spec, static_cast<int>(cfg.lab_triples)));
    ests.push_back(verify_nodal_sum_bound(spec));

    for (const auto& e : ests) {
        detail::emit_json(opt, out, "lab_" + e.name + ".json", to_json(e));
        detail::emit(opt, out, "lab_" + e.name + "_ratios.csv", ratios_csv(e));
    }
    detail::write_manifest(opt, out, "lab", kv, cfg.seed);
    return out;
}

// ---- dispatch and replay ---------------------------------------------------

inline RunOutcome dispatch(const std::string& command, const KeyValueConfig& kv,
                           const HarnessOptions& opt) {
    std::filesystem::create_directories(opt.out_dir);
    if (command == "truth") return run_truth_cmd(kv, opt);
    if (command == "twin") return run_twin_cmd(kv, opt);
    if (command == "criterion") return run_criterion_cmd(kv, opt);
    if (command == "determining") return run_determining_cmd(kv, opt);
    if (command == "lab") return run_lab_cmd(kv, opt);
    throw ConfigError("unknown subcommand: " + command);
}

struct ReplayResult {
    RunOutcome outcome;
    bool compared = false;
    bool identical = false;
    std::vector<std::string> mismatches;
};

/// Re-execute a run from its manifest into out_dir; when the manifest lives
/// in a different directory, every regular file there is compared byte-wise
/// against the replay.
inline ReplayResult replay_run(const std::filesystem::path& manifest_path,
                               const HarnessOptions& opt) {
    nlohmann::json m = nlohmann::json::parse(read_file(manifest_path));
    const std::string command = m.at("command").get<std::string>();
    const KeyValueConfig kv = KeyValueConfig::parse(m.at("config").get<std::string>());

    HarnessOptions ropt = opt;
    ropt.seed_override = m.at("seed").get<std::uint64_t>();

    ReplayResult res;
    res.outcome = dispatch(command, kv, ropt);

    const std::filesystem::path orig = manifest_path.parent_path();
    if (std::filesystem::canonical(orig) != std::filesystem::canonical(opt.out_dir)) {
        res.compared = true;
        res.identical = true;
        for (const auto& entry : std::filesystem::directory_iterator(orig)) {
            if (!entry.is_regular_file()) continue;
            const auto name = entry.path().filename();
            const std::filesystem::path replayed = opt.out_dir / name;
            if (!std::filesystem::exists(replayed) ||
                read_file(entry.path()) != read_file(replayed)) {
                res.identical = false;
                res.mismatches.push_back(name.string());
            }
        }
    }
    return res;
}

/// Worker-count request, from the environment. The kernels are run serially
/// for determinism; the variable is validated and capped here so configs stay
/// portable to parallel builds.
inline int requested_threads() {
    const char* env = std::getenv("NSE_THREADS");
    if (env == nullptr || *env == '\0') return 1;
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == nullptr || *end != '\0' || v < 1 || v > 1024)
        throw ConfigError(std::string("NSE_THREADS: expected integer in [1,1024], got '") + env +
                          "'");
    return static_cast<int>(v);
}

}  // namespace nse
