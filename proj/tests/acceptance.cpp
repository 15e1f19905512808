// Runs the eleven acceptance criteria and prints one PASS/FAIL line each.
// Exit status is the number of failures.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "qat/qat.hpp"

using namespace qat;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

GaussianMixtureState backflow_state(const PhysParams& p) {
    const double theta = tune_backflow_phase(-20, -40, 0.7, 8.0, 2.0, p, Interval(0.0, 0.658), 64, 300);
    return two_momentum_packet(-20, -40, 0.7, theta, 8.0, 2.0, p).to_mixture().normalized();
}

Outcome positivity_threshold() {
    const PhysParams diffusive(1.0, 1.0, 2.0), unitary(1.0, 1.0, 0.0);
    const auto s = backflow_state(diffusive);

    // unitary current from 256^2 samples of W_t (q = 0 is a node) across the
    // narrow dip, and from the closed form over the whole window
    const Axis pa(-56, -4, 256), qa(-12.8, 12.7, 256);
    double grid_min = 1e300;
    for (int k = 0; k <= 40; ++k) {
        const double t = 0.27 + 0.01 * k / 40;
        const auto w = sample_mixture(propagate_mixture(s.with_params(unitary), t), pa, qa);
        grid_min = std::min(grid_min, current_from_wigner(w, unitary));
    }
    const auto exact_scan = backflow_scan(s.with_params(unitary), Interval(0.0, 0.658), 2000);
    const bool negative = grid_min < 0.0 && exact_scan.min_J < 0.0 && exact_scan.argmin_t < 0.658;

    const auto r = arrival_probability(s, Interval(0.658, 5.0), 1000);
    double worst = 0.0;
    for (double j : r.J) worst = std::min(worst, j / r.max_abs_J());
    const bool positive = worst >= -1e-6;
    return {negative && positive,
            fmt("D=0 min J %.4g at t=%.3g (grid %.4g); D=2 min J/max|J| on [0.658,5] = %.3g", exact_scan.min_J,
                exact_scan.argmin_t, grid_min, worst)};
}

Outcome admissibility_switch() {
    double worst = 0.0;
    for (double D : {0.5, 2.0, 7.0}) {
        const PhysParams p(1.0, 1.0, D);
        const double expected = std::pow(3.0 / 16.0, 0.25) * std::sqrt(2.0 / D);
        double lo = 0.0, hi = 10.0 * expected;
        for (int k = 0; k < 200 && hi - lo > 1e-15 * hi; ++k) {
            const double mid = 0.5 * (lo + hi);
            (is_wigner_admissible(qbm_covariance(mid, p), p) ? hi : lo) = mid;
        }
        worst = std::max(worst, std::abs(hi - expected) / expected);
    }
    return {worst <= 1e-10, fmt("max relative offset of the flip from (3/16)^(1/4) tau_l: %.2e", worst)};
}

Outcome determinant_law() {
    std::mt19937_64 rng(20261015);
    std::uniform_real_distribution<double> logu(-3.0, 3.0);
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
        const double D = std::pow(10.0, logu(rng)), t = std::pow(10.0, logu(rng)), m = std::pow(10.0, logu(rng));
        const double det = qbm_covariance(t, PhysParams(1.0, m, D)).det();
        const double law = D * D * std::pow(t, 4) / (3.0 * m * m);
        worst = std::max(worst, std::abs(det - law) / law);
    }
    return {worst <= 1e-12, fmt("max relative error over 100 draws: %.2e", worst)};
}

Outcome momentum_diffusion() {
    const PhysParams p(1.0, 1.0, 1.0);
    const double tau_l = std::sqrt(2.0);
    const auto s = make_gaussian_state(0.0, -2.0, 0.7, p);
    const auto w0 = sample_mixture(s, Axis(-26, 22, 256), Axis(-70, 50, 512));
    const double v0 = grid_moments(w0).var_p;
    double lo = 1e300, hi = 0.0;
    for (double f : {0.2, 0.5, 1.0, 1.5, 2.0, 3.0}) {
        const double t = f * tau_l;
        const double ratio = (grid_moments(propagate_wigner_qbm(w0, t, p)).var_p - v0) / (p.D() * t);
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
    }
    const bool pass = std::abs(lo - 1.0) <= 0.01 && std::abs(hi - 1.0) <= 0.01;
    return {pass, fmt("growth / (D t) in [%.5f, %.5f] over t in [0.2, 3] tau_l", lo, hi)};
}

Outcome normalization() {
    std::string detail;
    bool pass = true;
    for (double D : {0.0, 0.5}) {
        const auto s = make_gaussian_state(20.0, -10.0, 1.0, PhysParams(1.0, 1.0, D));
        const double pr = arrival_probability(s, arrival_horizon(s), 2001).p_interval;
        pass &= std::abs(pr - 1.0) <= 0.01;
        detail += fmt("%sD=%.1f: p(0,inf)=%.6f", detail.empty() ? "" : "; ", D, pr);
    }
    return {pass, detail};
}

Outcome povm_consistency() {
    const PhysParams p(1.0, 1.0, 0.5);
    const double tl = derive_timescales(p, -3.0).tau_l;
    const auto s = make_gaussian_state(6.0 * tl, -3.0, 1.0, p);
    std::string detail;
    bool pass = true;
    double sym_lo = 1e300, sym_hi = -1e300;
    for (auto [frac, tol] : {std::pair{0.01, 0.01}, std::pair{0.1, 0.05}}) {
        const Interval iv(2 * tl, (2 + frac) * tl);
        const auto E = build_povm_E(iv, iv.t1, 0.0, p);
        const double pj = arrival_probability(s, iv, 401).p_interval;
        const double gap = std::abs(E.expectation(s) - pj) / pj;
        pass &= gap <= tol;
        detail += fmt("T=%.2f tau_l gap %.2e; ", frac, gap);
        for (int i = 0; i < 100; ++i)
            for (int k = 0; k < 100; ++k) {
                const double pm = -8.0 * (i + 0.5) / 100.0;
                const double q = 6.0 * tl - 10.0 + 20.0 * (k + 0.5) / 100.0;
                const double v = E.symbol(PhaseSpacePoint{pm, q});
                sym_lo = std::min(sym_lo, v);
                sym_hi = std::max(sym_hi, v);
            }
    }
    pass &= sym_lo >= -1e-6 && sym_hi <= 1.0 + 1e-6;
    return {pass, detail + fmt("symbol range on p<0 [%.3g, %.3g]", sym_lo, sym_hi)};
}

Outcome continuity() {
    const PhysParams p(1.0, 1.0, 2.0, 0.5);
    const Moments m0{{-1.0, 1.0}, Cov2::diag(1.0 / (4.0 * 0.64), 0.64)};
    auto residual = [&](int n, double dt) {
        const Axis xa(-10, 10, n);
        std::vector<DensityMatrixGrid> traj;
        for (int k = -1; k <= 1; ++k) {
            const auto m = evolve_gaussian_moments(m0, 0.4 + k * dt, p, 4000);
            traj.push_back(density_from_mixture(GaussianMixtureState({GaussianTerm{1.0, m.mean, m.cov, {}, 0.0}}, p), xa));
        }
        return continuity_residual(traj, dt, p).max_residual;
    };
    const double r1 = residual(128, 0.02), r2 = residual(256, 0.01);
    return {r1 / r2 >= 3.5, fmt("residual %.3e -> %.3e, ratio %.3f", r1, r2, r1 / r2)};
}

Outcome delta_asymptotics() {
    const PhysParams free(1.0, 1.0, 0.0);
    const Interval iv(0.0, 1.0);
    const double closed = delta_free_asymptotic(1.0, 0.0, -10.0, 0.0, iv, free).value;
    const double target = std::sqrt(std::numbers::pi / 2.0) / 80.0;
    const bool formula_ok = std::abs(closed - target) <= 1e-12 * target;
    const double numeric = delta_free(make_gaussian_state(0.0, -10.0, 1.0, free), iv, 512).value;
    const bool agree = std::abs(numeric - closed) <= 0.3 * closed;

    const PhysParams p(1.0, 1.0, 2.0);
    struct S { double p0, t1, sigma; };
    bool bound_ok = true;
    std::string battery;
    for (const S& b : {S{-10, 5, 1}, S{-10, 10, 1}, S{-20, 5, 1}, S{-20, 10, 1}, S{-10, 10, 2}}) {
        const auto s0 = make_gaussian_state(-b.p0 * b.t1, b.p0, b.sigma, p);
        const auto r = delta_intermediate(s0, Interval(b.t1, b.t1 + 0.05), {}, 192);
        bound_ok &= r.estimate.value < r.upper_bound;
        battery += fmt(" %.2g<%.2g", r.estimate.value, r.upper_bound);
    }
    return {formula_ok && agree && bound_ok,
            fmt("closed form %.5f (target %.5f); quadrature %.5f, ratio %.3f; bound battery:", closed, target, numeric,
                numeric / closed) +
                battery};
}

Outcome decoherence_chain() {
    const PhysParams p(1.0, 1.0, 2.0);
    std::string detail;
    bool pass = true;
    for (double sigma : {1.0, 1.5}) {
        // centre reaches x = 10 at t1 = 5 and crosses during the four intervals
        const double t1 = 5.0;
        const auto st1 = propagate_mixture(make_gaussian_state(110.0, -20.0, sigma, p), t1);
        const int n = 2048;
        const double L = 150.0, h = L / n;
        const auto rho = density_from_mixture(st1, Axis(-L / 2 + h / 2 - 8, L / 2 - h / 2 - 8, n));
        std::vector<Interval> ivs;
        for (int k = 0; k < 4; ++k) ivs.emplace_back(t1 + 0.25 * k, t1 + 0.25 * (k + 1));
        const double edt = 200.0 * 0.25;
        const auto r = class_operator_probability(rho, t1, ivs, p, 0.25, 0.05, {1e-6, false});
        const bool ok = edt >= 10.0 && r.max_linear_squared_gap() < 0.05 * r.max_p() && r.offdiag_max < 0.1 * r.max_p();
        pass &= ok;
        detail += fmt("sigma=%.1f gap/max %.2e offdiag/max %.2e; ", sigma, r.max_linear_squared_gap() / r.max_p(),
                      r.offdiag_max / r.max_p());
    }
    const PhysParams unitary(1.0, 1.0, 0.0);
    const auto cat = make_cat_state(2.0, -1.0, 0.5, unitary, 1.0);
    const int n = 1024;
    const double L = 80.0, h = L / n;
    const auto rho = density_from_mixture(cat, Axis(-L / 2 + h / 2, L / 2 - h / 2, n));
    std::vector<Interval> ivs;
    for (int k = 0; k < 6; ++k) ivs.emplace_back(0.25 * k, 0.25 * (k + 1));
    const auto c = class_operator_probability(rho, 0.0, ivs, unitary, 0.25, 0.0, {1e-6, false});
    pass &= c.offdiag_max > 0.3 * c.max_p();
    return {pass, detail + fmt("D=0 cat offdiag/max %.3f", c.offdiag_max / c.max_p())};
}

Outcome stochastic_route() {
    const PhysParams p(1.0, 1.0, 0.5);
    const auto ts = derive_timescales(p, -10.0);
    const auto w = validity_window(ts);
    const auto s = make_gaussian_state(30.0, -10.0, 1.0, p);
    const auto w0 = sample_mixture(s, Axis(-16, -4, 128), Axis(-12, 40, 512));
    const Interval iv(2.0, 3.0);
    const auto st = arrival_probability_stochastic(w0, iv, 0.02, p, {1e-6, false});
    const double pj = arrival_probability(s, iv, 401).p_interval;
    const double gap = std::abs(st.p_flux - pj) / pj;
    const bool inside = w.contains(iv.t1) && w.contains(iv.t2);
    return {inside && gap <= 0.05,
            fmt("window [%.3g, %.3g]; restricted %.5f vs current %.5f, gap %.2e", w.t_min, w.t_max, st.p_flux, pj, gap)};
}

Outcome f_function() {
    const bool half = f_integral(0.0) == 0.5;
    double sym = 0.0;
    for (double u = 1e-3; u < 200.0; u *= 1.07) sym = std::max(sym, std::abs(f_integral(u) + f_integral(-u) - 1.0));
    const double h = 1e-4;
    const double slope = (f_integral(h) - f_integral(-h)) / (2.0 * h);
    const double slope_err = std::abs(slope + 1.0 / std::numbers::pi);
    return {half && sym <= 1e-10 && slope_err <= 1e-6,
            fmt("f(0)=%.17g; max |f(u)+f(-u)-1| = %.1e; slope %.9f (err %.1e)", f_integral(0.0), sym, slope, slope_err)};
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<int> only;
    for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
    const std::vector<Criterion> criteria{
        {1, "positivity threshold", 60, positivity_threshold},
        {2, "gaussian admissibility switch", 1, admissibility_switch},
        {3, "determinant law", 1, determinant_law},
        {4, "momentum diffusion law", 120, momentum_diffusion},
        {5, "normalization", 60, normalization},
        {6, "povm consistency", 120, povm_consistency},
        {7, "continuity with diffusive current", 120, continuity},
        {8, "delta asymptotics", 120, delta_asymptotics},
        {9, "decoherence chain", 300, decoherence_chain},
        {10, "stochastic vs current route", 300, stochastic_route},
        {11, "f-function", 1, f_function},
    };
    int failures = 0;
    int ran = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
        ++ran;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs < c.budget_s;
        const bool pass = o.pass && in_time;
        failures += pass ? 0 : 1;
        std::printf("[%2d] %s  %s: %s (%.2f s of %.0f s%s)\n", c.id, pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), secs,
                    c.budget_s, in_time ? "" : ", over budget");
        std::fflush(stdout);
    }
    std::printf("%d of %d criteria passed\n", ran - failures, ran);
    return failures;
}
