#pragma once

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "nse/assimilation.hpp"
#include "nse/criterion.hpp"
#include "nse/inequality_lab.hpp"

namespace nse {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Round-trip-exact decimal formatting.
inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Write-then-rename so failures never leave partial files.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw IoError("cannot open " + tmp.string());
        f << content;
        if (!f) throw IoError("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

// ---- TwinSeries CSV ------------------------------------------------------

inline std::string twin_series_csv(const TwinSeries& series, bool truth_only = false) {
    std::ostringstream out;
    out << "t,err_l2,err_h1,u_h1,w_h1,u_h2,w_h2,energy_residual\n";
    for (const auto& r : series.records) {
        out << fmt(r.t) << ',';
        if (truth_only)
            out << ",,";
        else
            out << fmt(r.err_l2) << ',' << fmt(r.err_h1) << ',';
        out << fmt(r.u_h1) << ',';
        if (truth_only)
            out << ',';
        else
            out << fmt(r.w_h1) << ',';
        out << fmt(r.u_h2) << ',';
        if (truth_only)
            out << ',';
        else
            out << fmt(r.w_h2) << ',';
        out << fmt(r.energy_residual) << '\n';
    }
    return out.str();
}

// ---- ObservationSet CSV --------------------------------------------------

inline void observation_csv_header(std::ostream& out) {
    out << "t,kind,k1,k2,k3,vx_re,vx_im,vy_re,vy_im,vz_re,vz_im\n";
}

inline void observation_csv_rows(std::ostream& out, double t, const ObservationSet& obs) {
    if (obs.kind == ObsKind::Modal) {
        for (std::size_t m = 0; m < obs.modes.size(); ++m) {
            out << fmt(t) << ",modal," << obs.modes[m][0] << ',' << obs.modes[m][1] << ','
                << obs.modes[m][2];
            for (int c = 0; c < 3; ++c) {
                const complexd z = obs.mode_vals[3 * m + c];
                out << ',' << fmt(z.real()) << ',' << fmt(z.imag());
            }
            out << '\n';
        }
        return;
    }
    const int n = obs.grid.n_cells;
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            for (int c = 0; c < n; ++c) {
                const std::size_t cell = flat_index(n, a, b, c);
                out << fmt(t) << ',' << to_string(obs.kind) << ',' << a << ',' << b << ',' << c;
                for (int q = 0; q < 3; ++q) out << ',' << fmt(obs.values[3 * cell + q]) << ",0";
                out << '\n';
            }
}

// ---- Snapshot binary format ---------------------------------------------
// magic "NSE3", uint32 version, int32 N, double L, double nu, double t,
// then 3 blocks of N^3 coefficients in fixed (i,j,k) row-major order as
// little-endian interleaved (re, im) doubles.

inline void write_snapshot(const std::filesystem::path& path, const SpectralVelocity& u,
                           double t) {
    std::string buf;
    buf.reserve(32 + u.coeffs.size() * 16);
    auto put = [&buf](const void* p, std::size_t n) {
        buf.append(reinterpret_cast<const char*>(p), n);
    };
    put("NSE3", 4);
    const std::uint32_t version = 1;
    put(&version, 4);
    const std::int32_t N = u.domain.N;
    put(&N, 4);
    put(&u.domain.L, 8);
    put(&u.domain.nu, 8);
    put(&t, 8);
    for (int c = 0; c < 3; ++c)
        for (int m = 0; m < u.domain.modes(); ++m) {
            const complexd z = u.component(c)[m];
            const double re = z.real(), im = z.imag();
            put(&re, 8);
            put(&im, 8);
        }
    atomic_write(path, buf);
}

inline SpectralVelocity read_snapshot(const std::filesystem::path& path, double* t_out = nullptr) {
    const std::string buf = read_file(path);
    if (buf.size() < 36 || std::memcmp(buf.data(), "NSE3", 4) != 0)
        throw IoError("read_snapshot: bad magic in " + path.string());
    std::size_t pos = 4;
    auto get = [&](void* p, std::size_t n) {
        if (pos + n > buf.size()) throw IoError("read_snapshot: truncated file");
        std::memcpy(p, buf.data() + pos, n);
        pos += n;
    };
    std::uint32_t version;
    get(&version, 4);
    if (version != 1) throw IoError("read_snapshot: unsupported version");
    std::int32_t N;
    get(&N, 4);
    double L, nu, t;
    get(&L, 8);
    get(&nu, 8);
    get(&t, 8);
    DomainSpec d(L, N, nu);
    SpectralVelocity u(d);
    for (int c = 0; c < 3; ++c)
        for (int m = 0; m < d.modes(); ++m) {
            double re, im;
            get(&re, 8);
            get(&im, 8);
            u.component(c)[m] = complexd(re, im);
        }
    if (t_out) *t_out = t;
    return u;
}

// ---- JSON conversions ----------------------------------------------------

inline nlohmann::json to_json(const MuWindow& w) {
    if (w.empty()) return nlohmann::json::array();
    return nlohmann::json::array({w.lower, w.upper});
}

inline nlohmann::json to_json(const CriterionReport& r) {
    nlohmann::json j;
    j["h"] = r.h;
    j["M_h"] = r.M_h;
    j["W_h"] = r.W_h;
    j["lhs"] = {{"nu_lambda1", r.lhs_nu_lambda1},
                {"c_Wh4_nu3", r.lhs_W4},
                {"c_Wh_f_nu2", r.lhs_Wf}};
    j["rhs"] = r.rhs;
    j["mu_window"] = to_json(r.window);
    j["satisfied"] = r.satisfied;
    j["c_used"] = r.c_used;
    if (r.measured_sup_h1) {
        j["measured_sup_h1"] = *r.measured_sup_h1;
        j["sup_h1_within_Wh"] = *r.sup_h1_within_Wh;
    }
    return j;
}

inline nlohmann::json to_json(const ConstantEstimate& e) {
    nlohmann::json j;
    j["name"] = e.name;
    j["samples"] = e.samples;
    j["skipped"] = e.skipped;
    j["max_ratio"] = e.max_ratio;
    j["mean_ratio"] = e.mean_ratio;
    j["stable"] = e.stable;
    j["stability_threshold"] = e.stability_threshold;
    nlohmann::json per_h = nlohmann::json::array();
    for (const auto& s : e.per_h)
        per_h.push_back({{"h", s.h},
                         {"max_ratio", s.max_ratio},
                         {"mean_ratio", s.mean_ratio},
                         {"count", s.count}});
    j["per_h"] = per_h;
    for (const auto& [k, v] : e.extras) j["extras"][k] = v;
    return j;
}

inline std::string ratios_csv(const ConstantEstimate& e) {
    std::ostringstream out;
    out << "h,ratio\n";
    for (const auto& [h, r] : e.ratios) out << fmt(h) << ',' << fmt(r) << '\n';
    return out.str();
}

inline std::string mh_curve_csv(const AdmissibleSearch& search) {
    std::ostringstream out;
    out << "h,M_h,W_h,lhs_max,rhs,satisfied\n";
    for (const auto& r : search.curve)
        out << fmt(r.h) << ',' << fmt(r.M_h) << ',' << fmt(r.W_h) << ',' << fmt(r.lhs_max())
            << ',' << fmt(r.rhs) << ',' << (r.satisfied ? 1 : 0) << '\n';
    return out.str();
}

inline std::string determining_csv(const DeterminingSeries& s) {
    std::ostringstream out;
    out << "t,obs_diff_l2,full_diff_l2\n";
    for (const auto& r : s.records)
        out << fmt(r.t) << ',' << fmt(r.obs_diff_l2) << ',' << fmt(r.full_diff_l2) << '\n';
    return out.str();
}

}  // namespace nse
