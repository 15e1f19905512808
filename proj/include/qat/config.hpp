#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "qat/core_model.hpp"
#include "qat/error.hpp"

namespace qat {

struct PhysicalSpec {
    double hbar = 1.0;
    double mass = 1.0;
    std::optional<double> D;
    std::optional<double> gamma;
    std::optional<double> kT;

    bool operator==(const PhysicalSpec&) const = default;

    PhysParams params() const {
        const double g = gamma.value_or(0.0);
        if (D) return PhysParams(hbar, mass, *D, g);
        return PhysParams::from_temperature(hbar, mass, g, kT.value_or(0.0));
    }
};

struct GaussianSpec {
    double x0 = 0.0, p0 = 0.0, sigma = 1.0;
    bool operator==(const GaussianSpec&) const = default;
};

struct CatSpec {
    double separation = 0.0, p0 = 0.0, sigma = 1.0, center = 0.0;
    bool operator==(const CatSpec&) const = default;
};

struct TwoMomentumSpec {
    double p1 = 0.0, p2 = 0.0, ratio = 1.0, x0 = 0.0, sigma = 1.0;
    std::optional<double> theta;  // absent: tuned for the most negative unitary current
    bool operator==(const TwoMomentumSpec&) const = default;
};

using StateSpec = std::variant<GaussianSpec, CatSpec, TwoMomentumSpec>;

struct GridSpec {
    int n = 256;
    std::optional<double> q_min, q_max, p_min, p_max;  // absent: fitted to the state
    bool operator==(const GridSpec&) const = default;
};

struct TimeSpec {
    double t1 = 0.0;
    std::optional<double> t2;  // absent means "inf": the arrival horizon
    int n_t = 201;
    double eps = 0.02;
    std::optional<double> t_ref;
    bool operator==(const TimeSpec&) const = default;
};

struct ScenarioThresholds {
    double much_less = 0.1;
    double much_greater = 10.0;
    double normalization_tol = 0.01;
    double povm_tol = 0.05;
    double stochastic_tol = 0.05;
    double continuity_ratio = 3.5;
    double delta_max = 0.01;
    double offdiag_ratio = 0.1;
    double energy_interval = 10.0;
    double t1_over_tau_l = 5.0;
    bool operator==(const ScenarioThresholds&) const = default;
};

inline const std::vector<std::string>& known_analyses() {
    static const std::vector<std::string> v{"current", "povm", "stochastic", "histories", "continuity"};
    return v;
}

struct ScenarioConfig {
    std::string name = "scenario";
    PhysicalSpec physical;
    StateSpec state = GaussianSpec{};
    GridSpec grid;
    TimeSpec time;
    std::vector<std::string> analyses{"current"};
    ScenarioThresholds thresholds;
    std::string output_dir = "out";

    bool operator==(const ScenarioConfig&) const = default;
};

struct Diagnostic {
    std::string key;
    std::string reason;

    // "physical.mass required", "time.t2: interval inverted"
    std::string str() const { return reason.rfind("required", 0) == 0 ? key + " " + reason : key + ": " + reason; }
};

/// Config could not be turned into a ScenarioConfig; carries every offending key.
class ConfigError : public Error {
public:
    explicit ConfigError(std::vector<Diagnostic> d) : Error("config", join(d)), diagnostics_(std::move(d)) {}
    const std::vector<Diagnostic>& diagnostics() const noexcept { return diagnostics_; }

private:
    static std::string join(const std::vector<Diagnostic>& d) {
        std::string s;
        for (const auto& x : d) s += (s.empty() ? "" : "; ") + x.str();
        return s;
    }
    std::vector<Diagnostic> diagnostics_;
};

namespace detail {

using nlohmann::json;

class Reader {
public:
    std::vector<Diagnostic> diags;

    void unknown_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
        if (!j.is_object()) return;
        std::set<std::string> ok(allowed.begin(), allowed.end());
        for (auto it = j.begin(); it != j.end(); ++it)
            if (!ok.count(it.key())) diags.push_back({key(path, it.key()), "unknown key"});
    }

    std::optional<double> number(const json& j, const std::string& path, const char* k, bool required) {
        if (!j.contains(k)) {
            if (required) diags.push_back({key(path, k), "required"});
            return std::nullopt;
        }
        if (!j[k].is_number()) {
            diags.push_back({key(path, k), "must be a number"});
            return std::nullopt;
        }
        const double v = j[k].get<double>();
        if (!std::isfinite(v)) diags.push_back({key(path, k), "must be finite"});
        return v;
    }

    void positive(const std::optional<double>& v, const std::string& path, const char* k) {
        if (v && !(*v > 0.0)) diags.push_back({key(path, k), "must be > 0"});
    }

    static std::string key(const std::string& path, const std::string& k) { return path.empty() ? k : path + "." + k; }
};

inline PhysicalSpec read_physical(Reader& r, const json& j) {
    PhysicalSpec p;
    if (!j.is_object()) {
        r.diags.push_back({"physical", "required object"});
        return p;
    }
    r.unknown_keys(j, "physical", {"hbar", "mass", "D", "gamma", "kT"});
    if (auto v = r.number(j, "physical", "hbar", false)) p.hbar = *v;
    if (auto v = r.number(j, "physical", "mass", true)) p.mass = *v;
    r.positive(p.hbar, "physical", "hbar");
    r.positive(p.mass, "physical", "mass");
    p.D = r.number(j, "physical", "D", false);
    p.gamma = r.number(j, "physical", "gamma", false);
    p.kT = r.number(j, "physical", "kT", false);
    if (p.D && *p.D < 0.0) r.diags.push_back({"physical.D", "must be >= 0"});
    if (p.gamma && *p.gamma < 0.0) r.diags.push_back({"physical.gamma", "must be >= 0"});
    if (p.kT && *p.kT < 0.0) r.diags.push_back({"physical.kT", "must be >= 0"});
    if (p.kT && !p.gamma) r.diags.push_back({"physical.gamma", "required with kT"});
    if (!p.D && !p.kT) r.diags.push_back({"physical.D", "required (or gamma and kT)"});
    if (p.D && p.kT && p.gamma) {
        const double implied = 2.0 * p.mass * *p.gamma * *p.kT;
        if (std::abs(*p.D - implied) > 1e-9 * std::max(std::abs(*p.D), std::abs(implied))) {
            std::ostringstream os;
            os.precision(12);
            os << "inconsistent with D = 2 m gamma kT = " << implied;
            r.diags.push_back({"physical.D", os.str()});
        }
    }
    if (p.D && *p.D == 0.0 && p.gamma && *p.gamma > 0.0)
        r.diags.push_back({"physical.gamma", "damping needs D > 0"});
    return p;
}

inline StateSpec read_state(Reader& r, const json& j) {
    if (!j.is_object() || j.size() != 1) {
        r.diags.push_back({"state", "exactly one of gaussian, cat, two_momentum required"});
        return GaussianSpec{};
    }
    const std::string kind = j.begin().key();
    const json& s = j.begin().value();
    const std::string path = "state." + kind;
    if (!s.is_object()) {
        r.diags.push_back({path, "must be an object"});
        return GaussianSpec{};
    }
    if (kind == "gaussian") {
        r.unknown_keys(s, path, {"x0", "p0", "sigma"});
        GaussianSpec g;
        g.x0 = r.number(s, path, "x0", true).value_or(0.0);
        g.p0 = r.number(s, path, "p0", true).value_or(0.0);
        const auto sg = r.number(s, path, "sigma", true);
        r.positive(sg, path, "sigma");
        g.sigma = sg.value_or(1.0);
        return g;
    }
    if (kind == "cat") {
        r.unknown_keys(s, path, {"separation", "p0", "sigma", "center"});
        CatSpec c;
        c.separation = r.number(s, path, "separation", true).value_or(0.0);
        c.p0 = r.number(s, path, "p0", true).value_or(0.0);
        const auto sg = r.number(s, path, "sigma", true);
        r.positive(sg, path, "sigma");
        c.sigma = sg.value_or(1.0);
        c.center = r.number(s, path, "center", false).value_or(0.0);
        return c;
    }
    if (kind == "two_momentum") {
        r.unknown_keys(s, path, {"p1", "p2", "ratio", "x0", "sigma", "theta"});
        TwoMomentumSpec t;
        t.p1 = r.number(s, path, "p1", true).value_or(0.0);
        t.p2 = r.number(s, path, "p2", true).value_or(0.0);
        t.ratio = r.number(s, path, "ratio", true).value_or(1.0);
        t.x0 = r.number(s, path, "x0", true).value_or(0.0);
        const auto sg = r.number(s, path, "sigma", true);
        r.positive(sg, path, "sigma");
        t.sigma = sg.value_or(1.0);
        t.theta = r.number(s, path, "theta", false);
        return t;
    }
    r.diags.push_back({"state", "unknown variant '" + kind + "'"});
    return GaussianSpec{};
}

inline GridSpec read_grid(Reader& r, const json& j) {
    GridSpec g;
    if (j.is_null()) return g;
    r.unknown_keys(j, "grid", {"n", "q_min", "q_max", "p_min", "p_max"});
    if (j.contains("n")) {
        if (!j["n"].is_number_integer() || j["n"].get<long>() < 16 || j["n"].get<long>() % 2 != 0)
            r.diags.push_back({"grid.n", "must be an even integer >= 16"});
        else
            g.n = j["n"].get<int>();
    }
    g.q_min = r.number(j, "grid", "q_min", false);
    g.q_max = r.number(j, "grid", "q_max", false);
    g.p_min = r.number(j, "grid", "p_min", false);
    g.p_max = r.number(j, "grid", "p_max", false);
    if (g.q_min.has_value() != g.q_max.has_value()) r.diags.push_back({"grid.q_min", "q_min and q_max go together"});
    if (g.p_min.has_value() != g.p_max.has_value()) r.diags.push_back({"grid.p_min", "p_min and p_max go together"});
    if (g.q_min && g.q_max && !(*g.q_max > *g.q_min)) r.diags.push_back({"grid.q_max", "must exceed q_min"});
    if (g.p_min && g.p_max && !(*g.p_max > *g.p_min)) r.diags.push_back({"grid.p_max", "must exceed p_min"});
    return g;
}

inline TimeSpec read_time(Reader& r, const json& j) {
    TimeSpec t;
    if (!j.is_object()) {
        r.diags.push_back({"time", "required object"});
        return t;
    }
    r.unknown_keys(j, "time", {"t1", "t2", "n_t", "eps", "t_ref"});
    t.t1 = r.number(j, "time", "t1", false).value_or(0.0);
    if (t.t1 < 0.0) r.diags.push_back({"time.t1", "must be >= 0"});
    if (!j.contains("t2")) {
        r.diags.push_back({"time.t2", "required (number or \"inf\")"});
    } else if (j["t2"].is_string()) {
        if (j["t2"].get<std::string>() != "inf") r.diags.push_back({"time.t2", "string value must be \"inf\""});
    } else {
        t.t2 = r.number(j, "time", "t2", true);
        if (t.t2 && !(*t.t2 > t.t1)) r.diags.push_back({"time.t2", "interval inverted"});
    }
    if (j.contains("n_t")) {
        if (!j["n_t"].is_number_integer() || j["n_t"].get<long>() < 2)
            r.diags.push_back({"time.n_t", "must be an integer >= 2"});
        else
            t.n_t = j["n_t"].get<int>();
    }
    if (auto v = r.number(j, "time", "eps", false)) t.eps = *v;
    r.positive(t.eps, "time", "eps");
    t.t_ref = r.number(j, "time", "t_ref", false);
    return t;
}

inline ScenarioThresholds read_thresholds(Reader& r, const json& j) {
    ScenarioThresholds th;
    if (j.is_null()) return th;
    r.unknown_keys(j, "thresholds",
                   {"much_less", "much_greater", "normalization_tol", "povm_tol", "stochastic_tol", "continuity_ratio",
                    "delta_max", "offdiag_ratio", "energy_interval", "t1_over_tau_l"});
    auto set = [&](const char* k, double& dst) {
        if (auto v = r.number(j, "thresholds", k, false)) {
            dst = *v;
            r.positive(v, "thresholds", k);
        }
    };
    set("much_less", th.much_less);
    set("much_greater", th.much_greater);
    set("normalization_tol", th.normalization_tol);
    set("povm_tol", th.povm_tol);
    set("stochastic_tol", th.stochastic_tol);
    set("continuity_ratio", th.continuity_ratio);
    set("delta_max", th.delta_max);
    set("offdiag_ratio", th.offdiag_ratio);
    set("energy_interval", th.energy_interval);
    set("t1_over_tau_l", th.t1_over_tau_l);
    return th;
}

inline void cross_checks(Reader& r, const ScenarioConfig& c) {
    const auto& an = known_analyses();
    std::set<std::string> seen;
    for (const auto& a : c.analyses) {
        if (std::find(an.begin(), an.end(), a) == an.end()) r.diags.push_back({"analyses", "unknown analysis '" + a + "'"});
        if (!seen.insert(a).second) r.diags.push_back({"analyses", "duplicate analysis '" + a + "'"});
        if (a != "current" && !c.time.t2) r.diags.push_back({"time.t2", "analysis '" + a + "' needs a finite t2"});
    }
    const bool diffusive = c.physical.D ? *c.physical.D > 0.0
                                        : c.physical.kT && c.physical.gamma && *c.physical.kT * *c.physical.gamma > 0.0;
    if (seen.count("povm") && !diffusive) r.diags.push_back({"analyses", "povm needs D > 0"});
    if (c.time.t_ref && !(*c.time.t_ref > 0.0)) r.diags.push_back({"time.t_ref", "must be > 0"});
    if (seen.count("stochastic") && c.time.t2) {
        const double steps = (*c.time.t2 - c.time.t1) / c.time.eps;
        if (std::abs(steps - std::round(steps)) > 1e-6 * std::max(1.0, steps))
            r.diags.push_back({"time.eps", "must divide t2 - t1"});
    }
    if (c.name.empty()) r.diags.push_back({"name", "must be non-empty"});
}

}  // namespace detail

/// Parses and validates; the diagnostics list is empty iff the config is usable.
inline std::pair<ScenarioConfig, std::vector<Diagnostic>> parse_config(const nlohmann::json& j) {
    detail::Reader r;
    ScenarioConfig c;
    if (!j.is_object()) return {c, {{"", "top level must be an object"}}};
    r.unknown_keys(j, "", {"name", "physical", "state", "grid", "time", "analyses", "thresholds", "output"});
    if (j.contains("name")) {
        if (j["name"].is_string())
            c.name = j["name"].get<std::string>();
        else
            r.diags.push_back({"name", "must be a string"});
    }
    c.physical = detail::read_physical(r, j.value("physical", nlohmann::json()));
    c.state = detail::read_state(r, j.value("state", nlohmann::json()));
    c.grid = detail::read_grid(r, j.value("grid", nlohmann::json()));
    c.time = detail::read_time(r, j.value("time", nlohmann::json()));
    if (j.contains("analyses")) {
        if (!j["analyses"].is_array()) {
            r.diags.push_back({"analyses", "must be a list"});
        } else {
            c.analyses.clear();
            for (const auto& a : j["analyses"]) {
                if (a.is_string())
                    c.analyses.push_back(a.get<std::string>());
                else
                    r.diags.push_back({"analyses", "entries must be strings"});
            }
            if (c.analyses.empty()) r.diags.push_back({"analyses", "must not be empty"});
        }
    }
    c.thresholds = detail::read_thresholds(r, j.value("thresholds", nlohmann::json()));
    if (j.contains("output")) {
        const auto& o = j["output"];
        r.unknown_keys(o, "output", {"dir"});
        if (o.is_object() && o.contains("dir") && o["dir"].is_string())
            c.output_dir = o["dir"].get<std::string>();
        else
            r.diags.push_back({"output.dir", "must be a string"});
    }
    detail::cross_checks(r, c);
    return {c, r.diags};
}

inline nlohmann::json to_json(const ScenarioConfig& c) {
    using nlohmann::json;
    json j;
    j["name"] = c.name;
    json& p = j["physical"];
    p["hbar"] = c.physical.hbar;
    p["mass"] = c.physical.mass;
    if (c.physical.D) p["D"] = *c.physical.D;
    if (c.physical.gamma) p["gamma"] = *c.physical.gamma;
    if (c.physical.kT) p["kT"] = *c.physical.kT;
    std::visit(
        [&](const auto& s) {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, GaussianSpec>) {
                j["state"]["gaussian"] = {{"x0", s.x0}, {"p0", s.p0}, {"sigma", s.sigma}};
            } else if constexpr (std::is_same_v<S, CatSpec>) {
                j["state"]["cat"] = {{"separation", s.separation}, {"p0", s.p0}, {"sigma", s.sigma}, {"center", s.center}};
            } else {
                json t = {{"p1", s.p1}, {"p2", s.p2}, {"ratio", s.ratio}, {"x0", s.x0}, {"sigma", s.sigma}};
                if (s.theta) t["theta"] = *s.theta;
                j["state"]["two_momentum"] = t;
            }
        },
        c.state);
    json& g = j["grid"];
    g["n"] = c.grid.n;
    if (c.grid.q_min) g["q_min"] = *c.grid.q_min;
    if (c.grid.q_max) g["q_max"] = *c.grid.q_max;
    if (c.grid.p_min) g["p_min"] = *c.grid.p_min;
    if (c.grid.p_max) g["p_max"] = *c.grid.p_max;
    json& t = j["time"];
    t["t1"] = c.time.t1;
    if (c.time.t2)
        t["t2"] = *c.time.t2;
    else
        t["t2"] = "inf";
    t["n_t"] = c.time.n_t;
    t["eps"] = c.time.eps;
    if (c.time.t_ref) t["t_ref"] = *c.time.t_ref;
    j["analyses"] = c.analyses;
    const auto& th = c.thresholds;
    j["thresholds"] = {{"much_less", th.much_less},
                       {"much_greater", th.much_greater},
                       {"normalization_tol", th.normalization_tol},
                       {"povm_tol", th.povm_tol},
                       {"stochastic_tol", th.stochastic_tol},
                       {"continuity_ratio", th.continuity_ratio},
                       {"delta_max", th.delta_max},
                       {"offdiag_ratio", th.offdiag_ratio},
                       {"energy_interval", th.energy_interval},
                       {"t1_over_tau_l", th.t1_over_tau_l}};
    j["output"]["dir"] = c.output_dir;
    return j;
}

inline ScenarioConfig config_from_json(const nlohmann::json& j) {
    auto [c, d] = parse_config(j);
    if (!d.empty()) throw ConfigError(std::move(d));
    return c;
}

inline nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("config", "cannot read " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError({{"", std::string("parse error: ") + e.what()}});
    }
}

/// Diagnostics for the file at `path`; empty iff valid. Throws only when the
/// file cannot be read.
inline std::vector<Diagnostic> validate_config(const std::string& path) {
    nlohmann::json j;
    try {
        j = read_json_file(path);
    } catch (const ConfigError& e) {
        return e.diagnostics();
    }
    return parse_config(j).second;
}

inline ScenarioConfig load_config(const std::string& path) { return config_from_json(read_json_file(path)); }

}  // namespace qat
