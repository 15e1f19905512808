#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qat/arrival.hpp"
#include "qat/config.hpp"
#include "qat/histories.hpp"
#include "qat/lindblad_dynamics.hpp"

namespace qat {

/// Nothing in the pipeline draws random numbers; --seedless checks this.
inline constexpr bool kPipelineUsesRng = false;

struct AnalysisSummary {
    std::string name;
    std::string status = "ok";  // ok | invariant-failed | error
    std::string message;
    std::vector<std::pair<std::string, double>> scalars;
    double seconds = 0.0;

    void set(std::string k, double v) { scalars.emplace_back(std::move(k), v); }
    std::optional<double> get(const std::string& k) const {
        for (const auto& [key, v] : scalars)
            if (key == k) return v;
        return std::nullopt;
    }
};

struct RunSummary {
    std::string name;
    std::vector<AnalysisSummary> analyses;
    std::vector<std::string> manifest;  // relative to the output directory
    std::vector<std::pair<std::string, double>> stage_seconds;

    bool ok() const {
        for (const auto& a : analyses)
            if (a.status != "ok") return false;
        return true;
    }
    const AnalysisSummary* find(const std::string& n) const {
        for (const auto& a : analyses)
            if (a.name == n) return &a;
        return nullptr;
    }
};

struct RunOptions {
    std::optional<std::string> out_dir;  // overrides output.dir
    std::optional<int> grid_n;           // overrides grid.n
};

// ---------------------------------------------------------------------------
// Building blocks

inline GaussianMixtureState build_state(const ScenarioConfig& c, const PhysParams& params, double* tuned_theta = nullptr) {
    return std::visit(
        [&](const auto& s) -> GaussianMixtureState {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, GaussianSpec>) {
                return make_gaussian_state(s.x0, s.p0, s.sigma, params);
            } else if constexpr (std::is_same_v<S, CatSpec>) {
                return make_cat_state(s.separation, s.p0, s.sigma, params, s.center);
            } else {
                double theta = 0.0;
                if (s.theta) {
                    theta = *s.theta;
                } else {
                    // tune where backflow can survive: before the positivity time if D > 0
                    double t_end = c.time.t2.value_or(c.time.t1 + 1.0);
                    if (params.D() > 0.0)
                        t_end = std::min(t_end, positivity_ratio() * std::sqrt(2.0 * params.mass() * params.hbar() / params.D()));
                    theta = tune_backflow_phase(s.p1, s.p2, s.ratio, s.x0, s.sigma, params,
                                                Interval(c.time.t1, std::max(t_end, c.time.t1 + 1e-3)), 64, 200);
                }
                if (tuned_theta) *tuned_theta = theta;
                return two_momentum_packet(s.p1, s.p2, s.ratio, theta, s.x0, s.sigma, params).to_mixture().normalized();
            }
        },
        c.state);
}

struct GridBox {
    double q_min, q_max, p_min, p_max;
};

/// Covers the state over [t_a, t_b] with eight standard deviations, and
/// always contains q = 0.
inline GridBox fit_box(const GaussianMixtureState& s0, double t_a, double t_b, const GridSpec& g) {
    const auto ma = moments(propagate_mixture(s0, t_a)), mb = moments(propagate_mixture(s0, t_b));
    const double sq = std::sqrt(std::max(ma.cov.qq, mb.cov.qq)), sp = std::sqrt(std::max(ma.cov.pp, mb.cov.pp));
    GridBox b;
    b.q_min = std::min({ma.mean.q, mb.mean.q, 0.0}) - 8.0 * sq;
    b.q_max = std::max({ma.mean.q, mb.mean.q, 0.0}) + 8.0 * sq;
    b.p_min = std::min(ma.mean.p, mb.mean.p) - 8.0 * sp;
    b.p_max = std::max(ma.mean.p, mb.mean.p) + 8.0 * sp;
    if (g.q_min) {
        b.q_min = *g.q_min;
        b.q_max = *g.q_max;
    }
    if (g.p_min) {
        b.p_min = *g.p_min;
        b.p_max = *g.p_max;
    }
    return b;
}

namespace detail {

class OutputDir {
public:
    OutputDir(std::filesystem::path root, RunSummary& s) : root_(std::move(root)), summary_(s) {
        std::filesystem::create_directories(root_);
    }

    void write(const std::string& file, const std::function<void(std::ostream&)>& body) {
        std::ofstream os(root_ / file, std::ios::binary);
        if (!os) throw Error("output", "cannot write " + (root_ / file).string());
        os.imbue(std::locale::classic());
        body(os);
        if (!os) throw Error("output", "write failed for " + file);
        summary_.manifest.push_back(file);
    }

    const std::filesystem::path& root() const noexcept { return root_; }

private:
    std::filesystem::path root_;
    RunSummary& summary_;
};

inline void write_current_csv(std::ostream& os, const ArrivalResult& r) {
    os.precision(12);
    os << "t[T],J[1/T],cumulative_p[1]\n";
    const auto c = r.cumulative();
    for (std::size_t k = 0; k < r.times.size(); ++k) os << r.times[k] << ',' << r.J[k] << ',' << c[k] << '\n';
}

struct Context {
    const ScenarioConfig& cfg;
    PhysParams params;
    GaussianMixtureState s0;
    Interval iv;  // finite interval; the horizon replaces "inf"
    int n;
    Thresholds th;
    HistoryThresholds hth;
};

inline void run_current(Context& cx, AnalysisSummary& a, OutputDir& out) {
    const auto r = arrival_probability(cx.s0, cx.iv, cx.cfg.time.n_t, false, cx.th);
    const auto scan = std::min_element(r.J.begin(), r.J.end());
    a.set("p_interval", r.p_interval);
    a.set("t1", cx.iv.t1);
    a.set("t2", cx.iv.t2);
    a.set("min_J", *scan);
    a.set("argmin_t", r.times[scan - r.J.begin()]);
    a.set("max_abs_J", r.max_abs_J());
    if (r.positivity) a.set("positivity_time", *r.positivity);
    if (cx.params.D() > 0.0) {
        const double tau_l = std::sqrt(2.0 * cx.params.mass() * cx.params.hbar() / cx.params.D());
        a.set("tau_l", tau_l);
        a.set("t_positive", positivity_ratio() * tau_l);
        const double dt = cx.iv.length() / (cx.cfg.time.n_t - 1);
        const double tol = 1e-6 * r.max_abs_J();
        bool late_negative = false;
        for (std::size_t k = 0; k < r.J.size(); ++k)
            late_negative |= r.times[k] > positivity_ratio() * tau_l + dt && r.J[k] < -tol;
        if (late_negative) {
            a.status = "invariant-failed";
            a.message = "current negative after the positivity time";
        }
    }
    if (!cx.cfg.time.t2) {
        a.set("normalization", r.p_interval);
        if (std::abs(r.p_interval - 1.0) > cx.cfg.thresholds.normalization_tol) {
            a.status = "invariant-failed";
            a.message = "p(t1, inf) differs from 1 by more than normalization_tol";
        }
    }
    out.write("current.csv", [&](std::ostream& os) { write_current_csv(os, r); });
    out.write("current.gp", [&](std::ostream& os) { write_plot_script(os, "current.csv", cx.cfg.name); });
}

inline void run_povm(Context& cx, AnalysisSummary& a, OutputDir& out) {
    const double t_ref = cx.cfg.time.t_ref.value_or(cx.iv.t1);
    const auto E = build_povm_E(cx.iv, t_ref, 0.0, cx.params);
    const double tr = E.expectation(cx.s0);
    const double pj = arrival_probability(cx.s0, cx.iv, cx.cfg.time.n_t).p_interval;
    const double gap = std::abs(tr - pj) / std::max(std::abs(pj), 1e-300);
    a.set("tr_E_rho", tr);
    a.set("p_current", pj);
    a.set("relative_gap", gap);
    a.set("smearing_s", E.s());

    const auto box = fit_box(cx.s0, 0.0, 0.0, cx.cfg.grid);
    constexpr int ns = 100;
    const double p_lo = std::min(box.p_min, -1e-3);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    out.write("povm_symbol.csv", [&](std::ostream& os) {
        os.precision(12);
        os << "p[P],q[L],symbol[1]\n";
        for (int i = 0; i < ns; ++i) {
            const double p = p_lo * (i + 0.5) / ns;
            for (int k = 0; k < ns; ++k) {
                const double q = box.q_min + (box.q_max - box.q_min) * (k + 0.5) / ns;
                const double v = E.symbol(PhaseSpacePoint{p, q});
                lo = std::min(lo, v);
                hi = std::max(hi, v);
                os << p << ',' << q << ',' << v << '\n';
            }
        }
    });
    a.set("symbol_min", lo);
    a.set("symbol_max", hi);
    if (gap > cx.cfg.thresholds.povm_tol) {
        a.status = "invariant-failed";
        a.message = "Tr(E rho) and the current integral disagree beyond povm_tol";
    }
}

inline void run_stochastic(Context& cx, AnalysisSummary& a, OutputDir& out) {
    // sampled at t1 so the box only has to cover [t1, t2]
    const auto s1 = propagate_mixture(cx.s0, cx.iv.t1);
    const auto box = fit_box(s1, 0.0, cx.iv.length(), cx.cfg.grid);
    const Axis qa(box.q_min, box.q_max, cx.n);
    const auto w1 = sample_mixture(s1, Axis(box.p_min, box.p_max, cx.n), qa);
    // the truncation edge is resolved only when the grid is finer than one restriction step of travel
    const double step = std::abs(moments(s1).mean.p) / cx.params.mass() * cx.cfg.time.eps;
    a.set("q_spacing_over_step", qa.spacing() / step);
    if (qa.spacing() > step)
        throw GridError("scenario", "q spacing exceeds the travel per restriction step; raise grid.n or eps");
    const auto r = arrival_probability_stochastic(w1, Interval(0.0, cx.iv.length()), cx.cfg.time.eps, cx.params);
    const double pj = arrival_probability(cx.s0, cx.iv, cx.cfg.time.n_t).p_interval;
    const double gap = std::abs(r.p_flux - pj) / std::max(std::abs(pj), 1e-300);
    a.set("p_flux", r.p_flux);
    a.set("p_norm", r.p_norm);
    a.set("p_current", pj);
    a.set("relative_gap", gap);
    a.set("route_gap", r.route_gap());
    out.write("stochastic.csv", [&](std::ostream& os) {
        os.precision(12);
        os << "t[T],norm[1],flux[1/T]\n";
        for (std::size_t k = 0; k < r.evolution.times.size(); ++k)
            os << cx.iv.t1 + r.evolution.times[k] << ',' << r.evolution.norms[k] << ',' << r.evolution.flux[k] << '\n';
    });
    if (gap > cx.cfg.thresholds.stochastic_tol) {
        a.status = "invariant-failed";
        a.message = "restricted-propagator probability differs from the current route beyond stochastic_tol";
    }
}

inline void run_histories(Context& cx, AnalysisSummary& a, OutputDir& out) {
    const auto rep = decoherence_verdict(cx.s0, cx.iv, cx.hth, 384);
    a.set("delta_exact", rep.delta_exact);
    a.set("delta_formula", rep.delta_formula);
    a.set("decoherent", rep.decoherent ? 1.0 : 0.0);
    a.set("E_dt_over_hbar", rep.E_dt_over_hbar);
    a.set("t1_over_tau_l", rep.t1_over_tau_l);
    a.message = std::string("regime ") + to_string(rep.regime) +
                (rep.decoherent ? ", decoherent" : ", not decoherent (" + rep.failed_gate + ")");
    out.write("histories.csv", [&](std::ostream& os) { write_csv(os, rep); });
}

inline void run_continuity(Context& cx, AnalysisSummary& a, OutputDir& out) {
    const double tc = 0.5 * (cx.iv.t1 + cx.iv.t2);
    const auto box = fit_box(cx.s0, tc, tc, cx.cfg.grid);
    const auto m = moments(cx.s0);
    const double speed = (std::abs(m.mean.p) + 4.0 * std::sqrt(m.cov.pp)) / cx.params.mass();
    // the mixture kernel has no damping; with gamma > 0 a single Gaussian is
    // carried by its moment equations instead
    const bool damped = cx.params.gamma() > 0.0;
    if (damped && cx.s0.terms().size() != 1)
        throw RegimeError("scenario", "continuity with damping needs a single Gaussian state");
    auto state_at = [&](double t) {
        if (!damped) return propagate_mixture(cx.s0, t);
        const auto mt = evolve_gaussian_moments(moments(cx.s0), t, cx.params, 4000);
        return GaussianMixtureState({GaussianTerm{1.0, mt.mean, mt.cov, {}, 0.0}}, cx.params);
    };
    auto residual = [&](int n, double dt) {
        const Axis xa(box.q_min, box.q_max, n);
        std::vector<DensityMatrixGrid> traj;
        for (int k = -1; k <= 1; ++k) traj.push_back(density_from_mixture(state_at(tc + k * dt), xa));
        return continuity_residual(traj, dt, cx.params, tc - dt);
    };
    const double dt = (box.q_max - box.q_min) / (cx.n - 1) / speed;
    const auto coarse = residual(cx.n, dt);
    const auto fine = residual(2 * cx.n, 0.5 * dt);
    const double ratio = coarse.max_residual / std::max(fine.max_residual, 1e-300);
    a.set("t", tc);
    a.set("residual_coarse", coarse.max_residual);
    a.set("residual_fine", fine.max_residual);
    a.set("convergence_ratio", ratio);
    out.write("continuity.csv", [&](std::ostream& os) { write_csv(os, fine); });
    if (ratio < cx.cfg.thresholds.continuity_ratio) {
        a.status = "invariant-failed";
        a.message = "continuity residual does not converge at second order";
    }
}

inline void write_summary_json(std::ostream& os, const RunSummary& s) {
    nlohmann::ordered_json j;
    j["name"] = s.name;
    j["ok"] = s.ok();
    j["rng"] = kPipelineUsesRng ? "used" : "none";
    for (const auto& a : s.analyses) {
        nlohmann::ordered_json x;
        x["name"] = a.name;
        x["status"] = a.status;
        if (!a.message.empty()) x["message"] = a.message;
        for (const auto& [k, v] : a.scalars) x["scalars"][k] = v;
        x["seconds"] = a.seconds;
        j["analyses"].push_back(x);
    }
    j["manifest"] = s.manifest;
    for (const auto& [k, v] : s.stage_seconds) j["stage_seconds"][k] = v;
    os << j.dump(2) << '\n';
}

}  // namespace detail

/// Runs every analysis of a validated config. Numerical failures are caught
/// per analysis and reported with their stage; config errors propagate.
inline RunSummary run_scenario(const ScenarioConfig& cfg, const RunOptions& opt = {}) {
    using clock = std::chrono::steady_clock;
    auto seconds_since = [](clock::time_point t0) { return std::chrono::duration<double>(clock::now() - t0).count(); };

    RunSummary summary;
    summary.name = cfg.name;
    const auto t_setup = clock::now();
    const PhysParams params = cfg.physical.params();
    double theta = 0.0;
    auto s0 = build_state(cfg, params, &theta);
    const Interval iv = cfg.time.t2 ? Interval(cfg.time.t1, *cfg.time.t2)
                                    : Interval(cfg.time.t1, arrival_horizon(s0).t2);
    const auto& t = cfg.thresholds;
    detail::Context cx{cfg,
                       params,
                       std::move(s0),
                       iv,
                       opt.grid_n.value_or(cfg.grid.n),
                       Thresholds{t.much_less, t.much_greater},
                       HistoryThresholds{t.delta_max, t.offdiag_ratio, t.energy_interval, t.t1_over_tau_l}};
    detail::OutputDir out(opt.out_dir.value_or(cfg.output_dir), summary);
    out.write("config.json", [&](std::ostream& os) { os << to_json(cfg).dump(2) << '\n'; });
    summary.stage_seconds.emplace_back("setup", seconds_since(t_setup));

    for (const auto& name : cfg.analyses) {
        AnalysisSummary a;
        a.name = name;
        if (name == "current" && std::holds_alternative<TwoMomentumSpec>(cfg.state)) a.set("theta", theta);
        const auto t0 = clock::now();
        try {
            if (name == "current") detail::run_current(cx, a, out);
            else if (name == "povm") detail::run_povm(cx, a, out);
            else if (name == "stochastic") detail::run_stochastic(cx, a, out);
            else if (name == "histories") detail::run_histories(cx, a, out);
            else if (name == "continuity") detail::run_continuity(cx, a, out);
            else throw InvalidArgument("scenario", "unknown analysis " + name);
        } catch (const std::exception& e) {
            a.status = "error";
            a.message = name + "/" + e.what();
        }
        a.seconds = seconds_since(t0);
        summary.stage_seconds.emplace_back(name, a.seconds);
        summary.analyses.push_back(std::move(a));
    }
    summary.manifest.push_back("summary.json");
    std::ofstream js(out.root() / "summary.json");
    detail::write_summary_json(js, summary);
    return summary;
}

}  // namespace qat
