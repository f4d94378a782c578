#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "nse/assimilation.hpp"

namespace nse {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Flat "key.path = value" configuration text; '#' starts a comment.
class KeyValueConfig {
public:
    static KeyValueConfig parse(const std::string& text) {
        KeyValueConfig cfg;
        cfg.text_ = text;
        std::istringstream in(text);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const std::string trimmed = trim(line);
            if (trimmed.empty()) continue;
            const auto eq = trimmed.find('=');
            if (eq == std::string::npos)
                throw ConfigError("config line " + std::to_string(lineno) +
                                  ": expected 'key = value'");
            const std::string key = trim(trimmed.substr(0, eq));
            const std::string val = trim(trimmed.substr(eq + 1));
            if (key.empty())
                throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
            cfg.map_[key] = val;
        }
        return cfg;
    }

    bool has(const std::string& key) const { return map_.count(key) > 0; }

    std::string require(const std::string& key) const {
        auto it = map_.find(key);
        if (it == map_.end()) throw ConfigError("missing config field: " + key);
        return it->second;
    }

    std::string get(const std::string& key, const std::string& def) const {
        auto it = map_.find(key);
        return it == map_.end() ? def : it->second;
    }

    double get_double(const std::string& key, std::optional<double> def = std::nullopt) const {
        const std::string s = def && !has(key) ? "" : require_or(key, def.has_value());
        if (s.empty()) return *def;
        try {
            std::size_t pos = 0;
            const double v = std::stod(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (...) {
            throw ConfigError("config field " + key + ": not a number: '" + s + "'");
        }
    }

    long get_int(const std::string& key, std::optional<long> def = std::nullopt) const {
        const std::string s = def && !has(key) ? "" : require_or(key, def.has_value());
        if (s.empty()) return *def;
        try {
            std::size_t pos = 0;
            const long v = std::stol(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (...) {
            throw ConfigError("config field " + key + ": not an integer: '" + s + "'");
        }
    }

    bool get_bool(const std::string& key, std::optional<bool> def = std::nullopt) const {
        if (def && !has(key)) return *def;
        const std::string s = require(key);
        if (s == "true" || s == "1" || s == "yes") return true;
        if (s == "false" || s == "0" || s == "no") return false;
        throw ConfigError("config field " + key + ": not a boolean: '" + s + "'");
    }

    std::vector<long> get_int_list(const std::string& key) const {
        const std::string s = require(key);
        std::vector<long> out;
        std::istringstream in(s);
        std::string tok;
        while (std::getline(in, tok, ',')) {
            tok = trim(tok);
            if (tok.empty()) continue;
            try {
                out.push_back(std::stol(tok));
            } catch (...) {
                throw ConfigError("config field " + key + ": bad list entry '" + tok + "'");
            }
        }
        if (out.empty()) throw ConfigError("config field " + key + ": empty list");
        return out;
    }

    const std::string& text() const { return text_; }

private:
    std::string require_or(const std::string& key, bool has_default) const {
        if (!has_default) return require(key);
        auto it = map_.find(key);
        return it == map_.end() ? empty_ : it->second;
    }

    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return "";
        const auto e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    }

    std::map<std::string, std::string> map_;
    std::string text_;
    inline static const std::string empty_;
};

/// Resolved experiment inputs shared by the CLI subcommands.
struct ExperimentConfig {
    DomainSpec domain;
    ForcingSpec forcing;
    std::uint64_t seed = 1;
    SpectrumSpec spectrum;
    NudgingConfig nudging;
    double obs_C = 1.0;           // constant C in M_h
    double criterion_c = 1.0;     // dimensionless criterion constant
    std::vector<long> candidates; // n_cells or N_obs candidates for h search
    bool mu_auto = false;
    long sample_every = 1;
    long snapshot_every = 0;      // 0 = no snapshots
    std::uint64_t seed2 = 2;      // determining-nodes second seed
    // lab knobs
    long lab_fields_per_h = 50;
    long lab_triples = 40;
    std::uint64_t lab_seed = 7001;
    std::vector<long> lab_n_cells = {4, 8, 16, 32};

    static ObsKind parse_kind(const std::string& s) {
        if (s == "modal") return ObsKind::Modal;
        if (s == "volume") return ObsKind::Volume;
        if (s == "nodal") return ObsKind::Nodal;
        throw ConfigError("config field observer.kind: expected modal|volume|nodal, got '" + s +
                          "'");
    }

    static ExperimentConfig from(const KeyValueConfig& kv) {
        ExperimentConfig c;
        c.domain = DomainSpec(kv.get_double("domain.L"), static_cast<int>(kv.get_int("domain.N")),
                              kv.get_double("domain.nu"),
                              kv.get_double("domain.dealias_fraction", 2.0 / 3.0));
        c.forcing.pattern = kv.get("forcing.pattern", "taylor-green");
        c.forcing.amplitude = kv.get_double("forcing.amplitude");
        c.seed = static_cast<std::uint64_t>(kv.get_int("init.seed"));
        c.spectrum.k0 = kv.get_double("init.k0", c.domain.N / 8.0);
        c.spectrum.slope = kv.get_double("init.slope", 4.0);
        c.spectrum.energy = kv.get_double("init.energy", 1.0);

        c.nudging.kind = parse_kind(kv.get("observer.kind", "nodal"));
        c.nudging.n_cells = static_cast<int>(kv.get_int("observer.n_cells", 8));
        c.nudging.n_obs = static_cast<int>(kv.get_int("observer.n_obs", 4));
        c.nudging.smoothed = kv.get_bool("observer.smoothed", true);
        c.obs_C = kv.get_double("observer.C", 1.0);

        const std::string mu = kv.get("nudging.mu", "0");
        if (mu == "auto")
            c.mu_auto = true;
        else
            c.nudging.mu = kv.get_double("nudging.mu", 0.0);
        c.nudging.dt = kv.get_double("nudging.dt");
        c.nudging.T = kv.get_double("nudging.T");
        if (kv.has("nudging.galerkin_ksq"))
            c.nudging.galerkin_ksq = static_cast<int>(kv.get_int("nudging.galerkin_ksq"));
        c.sample_every = kv.get_int("nudging.sample_every", 1);
        c.snapshot_every = kv.get_int("output.snapshot_every", 0);

        c.criterion_c = kv.get_double("criterion.c", 1.0);
        if (kv.has("criterion.candidates")) c.candidates = kv.get_int_list("criterion.candidates");
        c.seed2 = static_cast<std::uint64_t>(kv.get_int("determining.seed2", 2));

        c.lab_fields_per_h = kv.get_int("lab.fields_per_h", 50);
        c.lab_triples = kv.get_int("lab.triples", 40);
        c.lab_seed = static_cast<std::uint64_t>(kv.get_int("lab.seed", 7001));
        if (kv.has("lab.n_cells")) c.lab_n_cells = kv.get_int_list("lab.n_cells");
        return c;
    }

    SpectralVelocity initial_data() const {
        return random_divfree_field(seed, spectrum, domain);
    }
    SpectralVelocity forcing_field() const { return make_forcing(forcing, domain); }
};

}  // namespace nse
