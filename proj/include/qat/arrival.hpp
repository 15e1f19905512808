#pragma once
// Arrival-time distributions at x = 0 for a particle arriving from the right:
// the current, its Q-function and POVM forms, the restricted-propagator route
// and backflow scans.

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "qat/core_model.hpp"
#include "qat/error.hpp"
#include "qat/gaussian_engine.hpp"
#include "qat/grid_engine.hpp"
#include "qat/parallel.hpp"

namespace qat {

// ---------------------------------------------------------------------------
// Current

/// Arrival current of an already-evolved state:
/// \int dp (-p/m) W(p, 0), plus (hbar^2 b^2/2) \int dp dW/dq (p, 0) if corrected.
inline double current_at_origin(const GaussianMixtureState& state_t, bool corrected = false) {
    const auto& p = state_t.params();
    double j = -state_t.momentum_moment_q(0.0) / p.mass();
    if (corrected) j += 0.5 * p.hbar() * p.hbar() * p.b() * p.b() * state_t.marginal_q_derivative(0.0);
    return j;
}

/// J(t) for the state s0 given at time 0.
inline double current_from_wigner(const GaussianMixtureState& s0, double t, bool corrected = false) {
    return current_at_origin(propagate_mixture(s0, t), corrected);
}

/// Same quantity from a sampled W_t; the q = 0 slice is interpolated.
inline double current_from_wigner(const PhaseSpaceGrid& w_t, const PhysParams& params, bool corrected = false) {
    const auto slice = slice_at_q0(w_t);
    double j = 0.0;
    for (int i = 0; i < w_t.p_axis.size(); ++i) j += w_t.p_axis.weight(i) * (-w_t.p_axis[i] / params.mass()) * slice[i];
    const double cb = 0.5 * params.hbar() * params.hbar() * params.b() * params.b();
    if (corrected && cb != 0.0) {
        const double h = w_t.q_axis.spacing();
        const auto plus = slice_at_q(w_t, h), minus = slice_at_q(w_t, -h);
        double d = 0.0;
        for (int i = 0; i < w_t.p_axis.size(); ++i) d += w_t.p_axis.weight(i) * (plus[i] - minus[i]) / (2.0 * h);
        j += cb * d;
    }
    return j;
}

struct ArrivalResult {
    std::vector<double> times;
    std::vector<double> J;
    double p_interval = 0.0;
    bool corrected = false;
    std::optional<double> positivity;  // earliest sample from which J >= -1e-6 max|J| holds
    std::optional<ValidityWindow> validity;
    bool outside_validity = false;

    double max_abs_J() const {
        double m = 0.0;
        for (double v : J) m = std::max(m, std::abs(v));
        return m;
    }

    std::vector<double> cumulative() const {
        std::vector<double> c(times.size(), 0.0);
        for (std::size_t k = 1; k < times.size(); ++k) c[k] = c[k - 1] + 0.5 * (times[k] - times[k - 1]) * (J[k] + J[k - 1]);
        return c;
    }
};

namespace detail {

inline std::vector<double> sample_times(const Interval& iv, int n_t) {
    if (n_t < 2) throw InvalidArgument("arrival", "need at least 2 time samples");
    std::vector<double> t(n_t);
    for (int k = 0; k < n_t; ++k) t[k] = iv.t1 + iv.length() * k / (n_t - 1);
    return t;
}

inline void finish_result(ArrivalResult& r, const PhysParams& params, double p_ref, const Thresholds& th) {
    r.p_interval = r.cumulative().back();
    const double tol = 1e-6 * r.max_abs_J();
    for (int k = static_cast<int>(r.J.size()) - 1; k >= 0; --k) {
        if (r.J[k] < -tol) break;
        r.positivity = r.times[k];
    }
    if (params.D() > 0.0 && p_ref != 0.0) {
        try {
            r.validity = validity_window(derive_timescales(params, p_ref), th);
            r.outside_validity = !(r.validity->contains(r.times.front()) && r.validity->contains(r.times.back()));
        } catch (const RegimeError&) {
            r.outside_validity = true;
        }
    } else {
        r.outside_validity = true;
    }
}

}  // namespace detail

/// Trapezoid integral of the closed-form current over the interval.
inline ArrivalResult arrival_probability(const GaussianMixtureState& s0, const Interval& iv, int n_t,
                                         bool corrected = false, const Thresholds& th = {}) {
    ArrivalResult r;
    r.corrected = corrected;
    r.times = detail::sample_times(iv, n_t);
    r.J.resize(n_t);
    parallel_for(n_t, [&](int k) { r.J[k] = current_from_wigner(s0, r.times[k], corrected); });
    detail::finish_result(r, s0.params(), moments(s0).mean.p, th);
    return r;
}

/// Grid route: W0 is propagated to every sample time independently.
inline ArrivalResult arrival_probability(const PhaseSpaceGrid& w0, const Interval& iv, const PhysParams& params, int n_t,
                                         bool corrected = false, const Thresholds& th = {}) {
    ArrivalResult r;
    r.corrected = corrected;
    r.times = detail::sample_times(iv, n_t);
    r.J.resize(n_t);
    parallel_for(n_t, [&](int k) {
        r.J[k] = current_from_wigner(propagate_wigner_qbm(w0, r.times[k], params), params, corrected);
    });
    detail::finish_result(r, params, grid_moments(w0).mean.p, th);
    return r;
}

/// Practical "t -> infinity": mid crossing time plus six crossing widths.
/// Requires a state on the right moving left.
inline Interval arrival_horizon(const GaussianMixtureState& s0, double n_widths = 6.0) {
    const auto m = moments(s0);
    const double v = m.mean.p / s0.params().mass();
    if (!(v < 0.0) || !(m.mean.q > 0.0))
        throw InvalidArgument("arrival", "state must start at q > 0 with negative mean momentum");
    const double tc = m.mean.q / -v;
    const double width = std::sqrt(moments(propagate_mixture(s0, tc)).cov.qq) / -v;
    return Interval(0.0, tc + n_widths * width);
}

// ---------------------------------------------------------------------------
// Backflow

struct BackflowScan {
    double min_J = 0.0;
    double argmin_t = 0.0;
    double max_abs_J = 0.0;
};

inline BackflowScan backflow_scan(const GaussianMixtureState& s0, const Interval& window, int n_t) {
    const auto t = detail::sample_times(window, n_t);
    std::vector<double> j(n_t);
    parallel_for(n_t, [&](int k) { j[k] = current_from_wigner(s0, t[k]); });
    BackflowScan out{std::numeric_limits<double>::infinity(), 0.0, 0.0};
    for (int k = 0; k < n_t; ++k) {
        if (j[k] < out.min_J) {
            out.min_J = j[k];
            out.argmin_t = t[k];
        }
        out.max_abs_J = std::max(out.max_abs_J, std::abs(j[k]));
    }
    return out;
}

inline BackflowScan backflow_scan(const PhaseSpaceGrid& w0, const Interval& window, const PhysParams& params, int n_t) {
    const auto r = arrival_probability(w0, window, params, n_t);
    BackflowScan out{std::numeric_limits<double>::infinity(), 0.0, r.max_abs_J()};
    for (int k = 0; k < n_t; ++k)
        if (r.J[k] < out.min_J) {
            out.min_J = r.J[k];
            out.argmin_t = r.times[k];
        }
    return out;
}

/// Relative phase of the second momentum component that makes the
/// unitary current most negative over the window.
inline double tune_backflow_phase(double p1, double p2, double ratio, double x0, double sigma, const PhysParams& params,
                                  const Interval& window, int n_theta = 72, int n_t = 200) {
    const PhysParams unitary = params.with_D(0.0);
    double best = std::numeric_limits<double>::infinity(), best_theta = 0.0;
    for (int k = 0; k < n_theta; ++k) {
        const double theta = 2.0 * std::numbers::pi * k / n_theta;
        const auto s = two_momentum_packet(p1, p2, ratio, theta, x0, sigma, unitary).to_mixture();
        const double m = backflow_scan(s, window, n_t).min_J;
        if (m < best) {
            best = m;
            best_theta = theta;
        }
    }
    return best_theta;
}

// ---------------------------------------------------------------------------
// Q-function and POVM forms

/// \int dp (-p/m) Q0(p, -p t/m): the current of the freely sheared Q-function
/// of the initial state.
inline double q_function_current(const GaussianMixtureState& s0, double t, double s) {
    const auto& params = s0.params();
    const auto q0 = smooth_mixture(s0, husimi_covariance(s, params)).with_params(params.with_D(0.0));
    return current_at_origin(propagate_mixture(q0, t));
}

/// Grid form: interpolated line integral of a sampled Q0 along q = -p t/m.
inline double q_function_current(const PhaseSpaceGrid& q0, double t, const PhysParams& params) {
    const double peak = q0.max_abs();
    const int nq = q0.q_axis.size();
    double j = 0.0;
    for (int i = 0; i < q0.p_axis.size(); ++i) {
        const double p = q0.p_axis[i];
        const double q = -p * t / params.mass();
        const double* row = q0.values.row(i).data();
        if (!q0.q_axis.contains(q)) {
            const double row_max = Eigen::Map<const Eigen::VectorXd>(row, nq).cwiseAbs().maxCoeff();
            if (row_max > 1e-8 * peak) throw GridError("arrival", "Q-function line q = -p t/m exits the grid");
            continue;
        }
        j += q0.p_axis.weight(i) * (-p / params.mass()) * detail::interp_cubic(row, nq, q0.q_axis.locate(q));
    }
    return j;
}

/// Phi_C(y) = \int dv (-v_p/m) delta(v_q + v_p t/m) g(v - y; C), closed form.
inline double smeared_line_kernel(PhaseSpacePoint y, double t, const Cov2& c, double mass) {
    const Cov2 ci = c.inverse();
    const PhaseSpacePoint e{1.0, -t / mass};
    const double alpha = ci.quad(e);
    const PhaseSpacePoint ciy = ci.apply(y);
    const double beta = e.p * ciy.p + e.q * ciy.q;
    const double gamma = ci.quad(y);
    const double gauss = std::sqrt(2.0 * std::numbers::pi / alpha) * std::exp(-0.5 * (gamma - beta * beta / alpha));
    return -(beta / alpha) / mass * gauss / (2.0 * std::numbers::pi * std::sqrt(c.det()));
}

/// Remainder B'(t) = A'(t) - A0 in initial-frame variables.
inline Cov2 povm_remainder(double t, double s, const PhysParams& params) {
    return qbm_covariance_initial_frame(t, params) - husimi_covariance(s, params);
}

/// Smearing width s with s^4 = A_pp / (4 A_qq) of A(t_ref); falls back to a
/// scan for the width maximising the smallest eigenvalue of the remainder.
inline double default_povm_smearing(double t_ref, const PhysParams& params) {
    const double tp = params.D() > 0.0 ? positivity_ratio() * std::sqrt(2.0 * params.mass() * params.hbar() / params.D())
                                       : std::numeric_limits<double>::infinity();
    if (!(t_ref >= tp)) throw RegimeError("arrival", "too early for POVM construction");
    const Cov2 a = qbm_covariance(t_ref, params);
    const double s0 = std::pow(a.pp / (4.0 * a.qq), 0.25);
    if (povm_remainder(t_ref, s0, params).min_eigenvalue() >= 0.0) return s0;
    double best = -std::numeric_limits<double>::infinity(), best_s = s0;
    for (int k = -600; k <= 600; ++k) {
        const double s = s0 * std::pow(10.0, k / 200.0);
        const double ev = povm_remainder(t_ref, s, params).min_eigenvalue();
        if (ev > best) {
            best = ev;
            best_s = s;
        }
    }
    if (best < 0.0) throw RegimeError("arrival", "too early for POVM construction");
    return best_s;
}

namespace detail {

inline PhaseSpaceGrid sample_q_function(const GaussianMixtureState& s0, double s, int n) {
    const auto q0 = smooth_mixture(s0, husimi_covariance(s, s0.params()));
    const auto box = q0.bounding_box(9.0);
    return sample_mixture(q0, Axis(box[0], box[1], n), Axis(box[2], box[3], n));
}

inline double integrate_against(const PhaseSpaceGrid& q0, const std::function<double(PhaseSpacePoint)>& f) {
    double acc = 0.0;
    for (int i = 0; i < q0.p_axis.size(); ++i)
        for (int j = 0; j < q0.q_axis.size(); ++j)
            acc += q0.p_axis.weight(i) * q0.q_axis.weight(j) * q0.values(i, j) * f({q0.p_axis[i], q0.q_axis[j]});
    return acc;
}

}  // namespace detail

/// J(t) = \int dy Q0(y) Phi_{B'}(y): the current written as Tr(F rho) with F
/// built from the remainder B' = A'(t) - A0. Quadrature on a sampled Q0.
inline double povm_F_expectation(const PhaseSpaceGrid& q0, double t, const Cov2& remainder, const PhysParams& params) {
    if (!remainder.is_positive_definite(0.0)) throw RegimeError("arrival", "too early for POVM construction");
    return detail::integrate_against(q0, [&](PhaseSpacePoint y) { return smeared_line_kernel(y, t, remainder, params.mass()); });
}

inline double povm_F_expectation(const GaussianMixtureState& s0, double t, double s, int n = 384) {
    const auto& params = s0.params();
    const Cov2 b = povm_remainder(t, s, params);
    if (!b.is_positive_definite(0.0)) throw RegimeError("arrival", "too early for POVM construction");
    return povm_F_expectation(detail::sample_q_function(s0, s, n), t, b, params);
}

/// Arrival in [t1, t2] as a Gaussian-smeared wedge in initial-frame phase
/// space. The remainder covariance is frozen at t_ref.
class PovmE {
public:
    PovmE(Interval iv, double t_ref, double s, const PhysParams& params) : iv_(iv), t_ref_(t_ref), params_(params) {
        s_ = s > 0.0 ? s : default_povm_smearing(t_ref, params);
        if (!(t_ref >= positivity_ratio() * std::sqrt(2.0 * params.mass() * params.hbar() / params.D())))
            throw RegimeError("arrival", "too early for POVM construction");
        b_ = povm_remainder(t_ref, s_, params);
        if (!b_.is_positive_semidefinite(1e-12 * b_.trace())) throw RegimeError("arrival", "too early for POVM construction");
        sigma1_ = width(iv.t1);
        sigma2_ = width(iv.t2);
    }

    const Interval& interval() const noexcept { return iv_; }
    double s() const noexcept { return s_; }
    const Cov2& B() const noexcept { return b_; }
    double t_ref() const noexcept { return t_ref_; }

    /// Anti-normal-ordered symbol: Tr(E rho) = \int dy Q0(y) symbol(y).
    double symbol(PhaseSpacePoint y) const {
        const double tau1 = iv_.t1 / params_.mass(), tau2 = iv_.t2 / params_.mass();
        return cdf((y.q + y.p * tau1) / sigma1_) - cdf((y.q + y.p * tau2) / sigma2_);
    }

    double expectation(const PhaseSpaceGrid& q0) const {
        return detail::integrate_against(q0, [&](PhaseSpacePoint y) { return symbol(y); });
    }

    double expectation(const GaussianMixtureState& s0, int n = 384) const {
        return expectation(detail::sample_q_function(s0, s_, n));
    }

private:
    double width(double t) const {
        const double tau = t / params_.mass();
        return std::sqrt(b_.pp * tau * tau + 2.0 * b_.pq * tau + b_.qq);
    }
    static double cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

    Interval iv_;
    double t_ref_;
    PhysParams params_;
    double s_ = 0.0;
    Cov2 b_;
    double sigma1_ = 1.0, sigma2_ = 1.0;
};

inline PovmE build_povm_E(const Interval& iv, double t_ref, double s, const PhysParams& params) {
    if (params.D() == 0.0) throw RegimeError("arrival", "too early for POVM construction");
    return PovmE(iv, t_ref, s, params);
}

// ---------------------------------------------------------------------------
// Restricted-propagator route

struct StochasticArrival {
    double p_flux = 0.0;  // \int dt \int_{p<0} dp (-p/m) W^r(p, 0)
    double p_norm = 0.0;  // mass on q > 0 at t1 minus surviving mass at t2
    RestrictedEvolution evolution;

    double route_gap() const { return std::abs(p_flux - p_norm) / std::max(std::abs(p_norm), 1e-300); }
};

inline StochasticArrival arrival_probability_stochastic(const PhaseSpaceGrid& w0, const Interval& iv, double eps,
                                                        const PhysParams& params, LeakPolicy leak = {}) {
    const PhaseSpaceGrid w1 = iv.t1 > 0.0 ? propagate_wigner_qbm(w0, iv.t1, params, leak) : w0;
    StochasticArrival out;
    out.evolution = restricted_evolution(w1, iv.length(), eps, params, leak);
    const double mass_right = integrate(truncate_q(w1, 0.0, true));
    out.p_norm = mass_right - out.evolution.norms.back();
    const auto slice = slice_at_q0(w1);
    double f0 = 0.0;
    for (int i = 0; i < w1.p_axis.size(); ++i)
        if (w1.p_axis[i] < 0.0) f0 += w1.p_axis.weight(i) * (-w1.p_axis[i] / params.mass()) * slice[i];
    const auto& f = out.evolution.flux;
    double acc = 0.5 * f0;
    for (std::size_t k = 0; k + 1 < f.size(); ++k) acc += f[k];
    acc += 0.5 * f.back();
    out.p_flux = eps * acc;
    return out;
}

// ---------------------------------------------------------------------------
// Output

inline void write_csv(std::ostream& os, const ArrivalResult& r) {
    os.precision(12);
    os << "t,J,cumulative_p\n";
    const auto c = r.cumulative();
    for (std::size_t k = 0; k < r.times.size(); ++k) os << r.times[k] << ',' << r.J[k] << ',' << c[k] << '\n';
}

/// gnuplot script plotting J(t) and the cumulative probability from `csv`.
inline void write_plot_script(std::ostream& os, const std::string& csv, const std::string& title) {
    os << "set datafile separator ','\n"
       << "set key autotitle columnhead\n"
       << "set title '" << title << "'\n"
       << "set xlabel 't'\n"
       << "set ylabel 'J(t)'\n"
       << "set y2label 'cumulative p'\n"
       << "set y2tics\n"
       << "plot '" << csv << "' using 1:2 with lines, '' using 1:3 axes x1y2 with lines\n";
}

}  // namespace qat
