#pragma once
// Decoherent-histories diagnostics for arrival at x = 0 from the right:
// Delta = Tr(P(t2) Pbar(t1) rho Pbar(t1)) in several regimes, class-operator
// probabilities and the verdict that licenses the current.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "qat/arrival.hpp"
#include "qat/core_model.hpp"
#include "qat/error.hpp"
#include "qat/gaussian_engine.hpp"
#include "qat/grid_engine.hpp"
#include "qat/parallel.hpp"
#include "qat/special_functions.hpp"

namespace qat {

struct HistoryThresholds {
    double delta_max = 0.01;        // "Delta << 1"
    double offdiag_ratio = 0.1;     // off-diagonal / max diagonal
    double energy_interval = 10.0;  // E dt / hbar must exceed this
    double t1_over_tau_l = 5.0;     // non-Gaussian states must have t1 beyond this many tau_l
};

struct DeltaEstimate {
    double value = 0.0;
    double abs_error = 0.0;
    bool converged = true;
    std::optional<std::string> warning;
};

namespace detail {

// Gauss-Legendre 8-point nodes/weights on [-1, 1].
inline constexpr double kGL8x[4] = {0.1834346424956498, 0.5255324099163290, 0.7966664774136267, 0.9602898564975363};
inline constexpr double kGL8w[4] = {0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};

// \int_0^L sin(a xi)/xi exp(-c xi^2) dxi on `panels` equal panels.
inline double damped_sine_integral(double a, double c, double L, int panels) {
    const double h = L / panels;
    double acc = 0.0;
    for (int k = 0; k < panels; ++k) {
        const double mid = (k + 0.5) * h, half = 0.5 * h;
        for (int i = 0; i < 4; ++i)
            for (double sgn : {-1.0, 1.0}) {
                const double x = mid + sgn * half * kGL8x[i];
                acc += half * kGL8w[i] * std::sin(a * x) / x * std::exp(-c * x * x);
            }
    }
    return acc;
}

struct KernelValue {
    double value;
    double error;
};

// Weight of a phase-space point (X < 0, p) in Delta: the probability that the
// x,y < 0 part of the chord at X ends up in x > 0 after time T.
//   K = 1/2 + (1/pi) \int_0^{2|X|} dxi sin(xi u/hbar)/xi exp(-D T xi^2 / 3 hbar^2),  u = m X/T + p
inline KernelValue delta_kernel(double X, double p, double T, const PhysParams& params) {
    const double hbar = params.hbar();
    const double a = (params.mass() * X / T + p) / hbar;
    const double L = -2.0 * X;
    const double c = params.D() * T / (3.0 * hbar * hbar);
    if (L <= 0.0) return {0.5, 0.0};
    if (c == 0.0) return {0.5 + sine_integral(a * L) / std::numbers::pi, 0.0};
    if (L * std::sqrt(c) >= 8.0) return {0.5 + 0.5 * std::erf(a / (2.0 * std::sqrt(c))), 0.0};
    const int panels = 1 + static_cast<int>(std::ceil(std::abs(a) * L / 6.0));
    const double fine = damped_sine_integral(a, c, L, 2 * panels);
    const double coarse = damped_sine_integral(a, c, L, panels);
    return {0.5 + fine / std::numbers::pi, std::abs(fine - coarse) / std::numbers::pi};
}

// Shape of a Delta kernel K(X, p) for the adaptive X march.
struct KernelShape {
    double T;              // t2 - t1
    double mass, hbar;
    double c;              // D T / 3 hbar^2; 0 means a sharp classical edge
    bool oscillatory;      // K - K_inf oscillates with phase u = 2|X| (m X/T + p)/hbar
    double phase_cutoff;   // beyond |u| > cutoff, K is replaced by K_inf

    double a(double X, double p) const { return (mass * X / T + p) / hbar; }
    // classical limit: 1/2 Erfc(-a / 2 sqrt c), a step when c = 0
    double k_inf(double X, double p) const {
        const double av = a(X, p);
        if (c == 0.0) return av > 0.0 ? 1.0 : (av == 0.0 ? 0.5 : 0.0);
        return 0.5 * std::erfc(-av / (2.0 * std::sqrt(c)));
    }
    // X-width of the Erfc edge
    double edge_width() const { return c > 0.0 ? 2.0 * std::sqrt(c) * hbar * T / mass : 0.0; }
};

// \int_{X_lo}^0 dX W(X) K(X, p) for one momentum p. Marches from X = 0 down
// with 4-point Gauss-Legendre steps no longer than h_w, a quarter of the local
// kernel phase period and a quarter of the Erfc edge. Stops once the kernel has
// settled to K_inf = 0.
template <class WFn, class KFn>
KernelValue march_row(double p, double x_lo, double h_w, const KernelShape& ks, WFn&& w, KFn&& kernel) {
    static constexpr double gx[2] = {0.3399810435848563, 0.8611363115940526};
    static constexpr double gw[2] = {0.6521451548625461, 0.3478548451374538};
    const double edge = -p * ks.T / ks.mass;  // classical crossing line X = -p T/m
    const double width = ks.edge_width();
    double value = 0.0, error = 0.0;
    double x = 0.0;
    while (x > x_lo) {
        const double av = ks.a(x, p), L = -2.0 * x;
        const double phase = std::abs(av * L);
        const bool near_edge = std::abs(x - edge) < 10.0 * width + 1e-300 || (width == 0.0 && std::abs(x - edge) < h_w);
        const bool resolved = ks.oscillatory && phase <= ks.phase_cutoff;
        if (!resolved && !near_edge && x < edge - 10.0 * width && ks.k_inf(x, p) < 1e-15) break;
        double step = h_w;
        if (resolved) {
            const double rate = (2.0 * ks.mass * L / ks.T + 2.0 * std::abs(av) * ks.hbar) / ks.hbar;
            step = std::min(step, 0.25 * std::numbers::pi / std::max(rate, 1e-300));
        }
        if (width > 0.0 && std::abs(x - edge) < 12.0 * width) step = std::min(step, 0.25 * width);
        // land exactly on a sharp edge
        if (width == 0.0 && edge < x && edge > x - step) step = x - edge;
        step = std::min(step, x - x_lo);
        if (step <= 0.0) break;
        const double mid = x - 0.5 * step, half = 0.5 * step;
        for (int i = 0; i < 2; ++i)
            for (double sgn : {-1.0, 1.0}) {
                const double xn = mid + sgn * half * gx[i];
                const double wv = w(xn);
                if (wv == 0.0) continue;
                const double aL = std::abs(ks.a(xn, p) * 2.0 * xn);
                const KernelValue k = (ks.oscillatory && aL <= ks.phase_cutoff) ? kernel(xn, p)
                                                                               : KernelValue{ks.k_inf(xn, p), 0.0};
                value += half * gw[i] * wv * k.value;
                error += half * gw[i] * std::abs(wv) * k.error;
            }
        x -= step;
    }
    return {value, error};
}

// Delta-type integral over a set of momentum nodes with trapezoid weights.
template <class WRow, class KFn>
DeltaEstimate integrate_left_half(const Axis& p_axis, double x_lo, double h_w, const KernelShape& ks, WRow&& w_row,
                                  KFn&& kernel) {
    const int np = p_axis.size();
    std::vector<KernelValue> rows(np, KernelValue{0.0, 0.0});
    parallel_for(np, [&](int i) {
        rows[i] = march_row(p_axis[i], x_lo, h_w, ks, [&](double x) { return w_row(i, x); }, kernel);
    });
    DeltaEstimate out;
    for (int i = 0; i < np; ++i) {
        out.value += p_axis.weight(i) * rows[i].value;
        out.abs_error += p_axis.weight(i) * rows[i].error;
    }
    return out;
}

// Analytic W: momentum nodes over the 9-sigma box, X resolution box / n.
template <class KFn>
DeltaEstimate integrate_left_half(const GaussianMixtureState& s, int n, const KernelShape& ks, KFn&& kernel) {
    const auto box = s.bounding_box(9.0);
    if (box[2] >= 0.0) return {};
    const Axis p_axis(box[0], box[1], n);
    const double h_w = (box[3] - box[2]) / n;
    return integrate_left_half(p_axis, box[2], h_w, ks, [&](int i, double x) { return s.eval({p_axis[i], x}); },
                               kernel);
}

// Sampled W: rows of the grid, cubic interpolation along q, zero outside.
template <class KFn>
DeltaEstimate integrate_left_half(const PhaseSpaceGrid& w, const KernelShape& ks, KFn&& kernel) {
    if (w.q_axis.min() >= 0.0) return {};
    const int nq = w.q_axis.size();
    return integrate_left_half(
        w.p_axis, w.q_axis.min(), w.q_axis.spacing(), ks,
        [&](int i, double x) {
            if (!w.q_axis.contains(x)) return 0.0;
            return interp_cubic(w.values.row(i).data(), nq, w.q_axis.locate(x));
        },
        kernel);
}

inline KernelShape exact_shape(const Interval& iv, const PhysParams& params, double cutoff) {
    return {iv.length(), params.mass(), params.hbar(), params.D() * iv.length() / (3.0 * params.hbar() * params.hbar()),
            true, cutoff};
}

inline KernelShape free_shape(const Interval& iv, const PhysParams& params, double cutoff) {
    return {iv.length(), params.mass(), params.hbar(), 0.0, true, cutoff};
}

inline KernelShape strong_shape(const Interval& iv, const PhysParams& params) {
    return {iv.length(), params.mass(), params.hbar(), params.D() * iv.length() / (3.0 * params.hbar() * params.hbar()),
            false, 0.0};
}

}  // namespace detail

/// Kernel phases beyond this are replaced by the classical limit; the
/// neglected tail oscillates with amplitude below 1/(pi cutoff).
inline constexpr double kDeltaPhaseCutoff = 200.0;

/// Delta from W at t1. The xi integral over |xi| <= 2|X| is composite
/// Gauss-Legendre; coarse/fine disagreement is reported as abs_error.
inline DeltaEstimate delta_exact(const PhaseSpaceGrid& w_t1, const Interval& iv, const PhysParams& params,
                                 double tolerance = 1e-6) {
    const double T = iv.length();
    auto out = detail::integrate_left_half(w_t1, detail::exact_shape(iv, params, kDeltaPhaseCutoff),
                                           [&](double X, double p) { return detail::delta_kernel(X, p, T, params); });
    out.converged = out.abs_error <= tolerance;
    if (!out.converged) out.warning = "xi quadrature not converged";
    return out;
}

inline DeltaEstimate delta_exact(const GaussianMixtureState& s_t1, const Interval& iv, int n = 384,
                                 double tolerance = 1e-6) {
    const auto& params = s_t1.params();
    const double T = iv.length();
    auto out = detail::integrate_left_half(s_t1, n, detail::exact_shape(iv, params, kDeltaPhaseCutoff),
                                           [&](double X, double p) { return detail::delta_kernel(X, p, T, params); });
    out.converged = out.abs_error <= tolerance;
    if (!out.converged) out.warning = "xi quadrature not converged";
    return out;
}

/// Same quantity by brute force: project rho(t1) onto x, y < 0, propagate by
/// t2 - t1, trace over x > 0. Converges fastest when x = 0 sits midway
/// between grid nodes.
inline double delta_exact_projected(const DensityMatrixGrid& rho_t1, const Interval& iv, const PhysParams& params,
                                    double max_step = 0.0, LeakPolicy leak = {}) {
    const auto left = project_density(rho_t1, false);
    return trace_side(propagate_density_qbm(left, iv.length(), params, max_step, leak), true).real();
}

namespace detail {
inline auto free_kernel(const Interval& iv, const PhysParams& params) {
    return [T = iv.length(), params](double X, double p) {
        return KernelValue{f_integral(2.0 * X / params.hbar() * (params.mass() * X / T + p)), 0.0};
    };
}
}  // namespace detail

/// Delta with the environment switched off over [t1, t2]:
/// \int_{X<0} dX \int dp W_t1 f[2 (X/hbar)(m X/T + p)].
inline DeltaEstimate delta_free(const PhaseSpaceGrid& w_t1, const Interval& iv, const PhysParams& params) {
    return detail::integrate_left_half(w_t1, detail::free_shape(iv, params, kDeltaPhaseCutoff),
                                       detail::free_kernel(iv, params));
}

inline DeltaEstimate delta_free(const GaussianMixtureState& s_t1, const Interval& iv, int n = 384) {
    return detail::integrate_left_half(s_t1, n, detail::free_shape(iv, s_t1.params(), kDeltaPhaseCutoff),
                                       detail::free_kernel(iv, s_t1.params()));
}

/// Large-E T asymptotics for a Gaussian of width sigma centred at X0 + p0 t1/m.
inline DeltaEstimate delta_free_asymptotic(double sigma, double X0, double p0, double t1, const Interval& iv,
                                           const PhysParams& params, const HistoryThresholds& th = {}) {
    if (!(sigma > 0.0) || p0 == 0.0) throw InvalidArgument("histories", "need sigma > 0 and p0 != 0");
    const double c = X0 + p0 * t1 / params.mass();
    DeltaEstimate out;
    out.value = std::sqrt(std::numbers::pi / 2.0) * params.hbar() / (8.0 * sigma * std::abs(p0)) *
                std::exp(-c * c / (2.0 * sigma * sigma));
    const double edt = p0 * p0 / (2.0 * params.mass()) * iv.length() / params.hbar();
    if (edt < th.energy_interval) out.warning = "E (t2 - t1) / hbar below threshold; asymptotic form unreliable";
    return out;
}

struct IntermediateDelta {
    DeltaEstimate estimate;
    double upper_bound = 0.0;
};

/// t1 >> tau_l, t2 - t1 << tau_l: W0 is carried to t1 by the full QBM kernel,
/// then the free kernel acts over [t1, t2]. Bound uses the mean momentum of W0.
inline IntermediateDelta delta_intermediate(const GaussianMixtureState& s0, const Interval& iv,
                                            const Thresholds& th = {}, int n = 384) {
    const auto& params = s0.params();
    const double p0 = moments(s0).mean.p;
    const auto ts = derive_timescales(params, p0);
    IntermediateDelta out;
    out.estimate = delta_free(propagate_mixture(s0, iv.t1), iv, n);
    out.upper_bound = std::sqrt(2.0 * params.mass() * params.hbar() / (p0 * p0 * iv.t1)) * (ts.tau_l / iv.t1) / 16.0;
    if (iv.t1 < th.much_greater * ts.tau_l || iv.length() > th.much_less * ts.tau_l)
        out.estimate.warning = "outside the intermediate regime (t1 >> tau_l, t2 - t1 << tau_l)";
    return out;
}

/// (t2 - t1) >> tau_l: the xi integral runs to infinity and gives
/// 1/2 Erfc[-sqrt(3 m^2 / 4 D T^3) (X + p T/m)].
inline DeltaEstimate delta_strong(const PhaseSpaceGrid& w_t1, const Interval& iv, const PhysParams& params,
                                  const Thresholds& th = {}) {
    if (params.D() <= 0.0) throw RegimeError("histories", "strong-decoherence form needs D > 0");
    const auto shape = detail::strong_shape(iv, params);
    auto out = detail::integrate_left_half(w_t1, shape, [&](double X, double p) {
        return detail::KernelValue{shape.k_inf(X, p), 0.0};
    });
    const double tau_l = std::sqrt(2.0 * params.mass() * params.hbar() / params.D());
    if (iv.length() < th.much_greater * tau_l) out.warning = "t2 - t1 not >> tau_l; strong-decoherence form unreliable";
    return out;
}

inline DeltaEstimate delta_strong(const GaussianMixtureState& s_t1, const Interval& iv, const Thresholds& th = {},
                                  int n = 384) {
    const auto& params = s_t1.params();
    if (params.D() <= 0.0) throw RegimeError("histories", "strong-decoherence form needs D > 0");
    const auto shape = detail::strong_shape(iv, params);
    auto out = detail::integrate_left_half(s_t1, n, shape, [&](double X, double p) {
        return detail::KernelValue{shape.k_inf(X, p), 0.0};
    });
    const double tau_l = std::sqrt(2.0 * params.mass() * params.hbar() / params.D());
    if (iv.length() < th.much_greater * tau_l) out.warning = "t2 - t1 not >> tau_l; strong-decoherence form unreliable";
    return out;
}

/// Probability of the class operator P(t2) Pbar(t1): the right-moving part of
/// the current over [t1, t2]. Identical to Delta_{1,2}.
inline double right_current_probability(const DensityMatrixGrid& rho_t1, const Interval& iv, const PhysParams& params,
                                        double max_step = 0.0, LeakPolicy leak = {}) {
    return delta_exact_projected(rho_t1, iv, params, max_step, leak);
}

inline double right_current_probability(const GaussianMixtureState& s_t1, const Interval& iv, int n = 384) {
    return delta_exact(s_t1, iv, n).value;
}

// ---------------------------------------------------------------------------
// Class operators

struct ClassOperatorResult {
    std::vector<double> p_linear;   // Tr(P(a_k) rho) - Tr(P(b_k) rho)
    std::vector<double> p_squared;  // Tr(C_k rho C_k^dagger), C_k = P(a_k) - P(b_k)
    std::vector<double> p_string;   // first-crossing strings Pbar(b_k) P(a_k) ... P(a_0 + eps) P(a_0)
    ComplexMatrix functional;       // Tr(C_k rho C_m^dagger)
    double offdiag_max = 0.0;
    double right_initial = 0.0;     // Tr(P rho) at the first time
    double right_final = 0.0;       // Tr(P rho) at the last time (never crossed)

    double max_p() const {
        double m = 0.0;
        for (double v : p_linear) m = std::max(m, std::abs(v));
        return m;
    }
    double max_linear_squared_gap() const {
        double m = 0.0;
        for (std::size_t k = 0; k < p_linear.size(); ++k) m = std::max(m, std::abs(p_linear[k] - p_squared[k]));
        return m;
    }
};

/// rho0 is the state at time t0 <= intervals[0].t1. Two-time projector traces
/// Tr(P(b) P(a) rho) are obtained by projecting on one side at a and evolving
/// the resulting operator to b. eps is the projector spacing of the
/// first-crossing strings and must tile every [a_0, a_k].
inline ClassOperatorResult class_operator_probability(const DensityMatrixGrid& rho0, double t0,
                                                      const std::vector<Interval>& intervals, const PhysParams& params,
                                                      double eps, double max_step = 0.0, LeakPolicy leak = {}) {
    if (intervals.empty()) throw InvalidArgument("histories", "need at least one interval");
    for (std::size_t k = 1; k < intervals.size(); ++k)
        if (intervals[k].t1 < intervals[k - 1].t2 - 1e-12)
            throw InvalidArgument("histories", "intervals must be ordered and non-overlapping");
    if (t0 > intervals.front().t1) throw InvalidArgument("histories", "initial time after first interval");
    if (!(eps > 0.0)) throw InvalidArgument("histories", "projector spacing eps must be > 0");

    std::vector<double> times;
    for (const auto& iv : intervals) {
        times.push_back(iv.t1);
        times.push_back(iv.t2);
    }
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end(), [](double a, double b) { return std::abs(a - b) < 1e-12; }),
                times.end());
    const int nt = static_cast<int>(times.size());
    auto index_of = [&](double t) {
        for (int i = 0; i < nt; ++i)
            if (std::abs(times[i] - t) < 1e-12) return i;
        return -1;
    };

    // states at every projector time
    std::vector<DensityMatrixGrid> rho(nt);
    rho[0] = propagate_density_qbm(rho0, times[0] - t0, params, max_step, leak);
    for (int i = 1; i < nt; ++i) rho[i] = propagate_density_qbm(rho[i - 1], times[i] - times[i - 1], params, max_step, leak);

    // G(a, b) = Tr(P(b) P(a) rho) for a <= b
    ComplexMatrix G = ComplexMatrix::Zero(nt, nt);
    parallel_for(nt, [&](int a) {
        G(a, a) = trace_side(rho[a], true);
        DensityMatrixGrid x = project_left_only(rho[a], true);
        for (int b = a + 1; b < nt; ++b) {
            x = propagate_operator(x, times[b] - times[b - 1], params, max_step, {leak.relative_tolerance, false});
            G(a, b) = trace_side(x, true);
        }
    });
    // Tr(P(x) rho P(y))
    auto two_time = [&](int x, int y) { return x <= y ? G(x, y) : std::conj(G(y, x)); };

    const int n = static_cast<int>(intervals.size());
    ClassOperatorResult out;
    out.functional = ComplexMatrix::Zero(n, n);
    for (int k = 0; k < n; ++k)
        for (int m = 0; m < n; ++m) {
            const int ak = index_of(intervals[k].t1), bk = index_of(intervals[k].t2);
            const int am = index_of(intervals[m].t1), bm = index_of(intervals[m].t2);
            out.functional(k, m) = two_time(ak, am) - two_time(ak, bm) - two_time(bk, am) + two_time(bk, bm);
        }
    for (int k = 0; k < n; ++k) {
        out.p_linear.push_back(G(index_of(intervals[k].t1), index_of(intervals[k].t1)).real() -
                               G(index_of(intervals[k].t2), index_of(intervals[k].t2)).real());
        out.p_squared.push_back(out.functional(k, k).real());
        for (int m = 0; m < n; ++m)
            if (m != k) out.offdiag_max = std::max(out.offdiag_max, std::abs(out.functional(k, m)));
    }
    out.right_initial = G(0, 0).real();
    out.right_final = G(nt - 1, nt - 1).real();

    // first-crossing strings on the eps lattice
    DensityMatrixGrid restricted = project_density(rho[0], true);
    double t_now = times[0];
    for (int k = 0; k < n; ++k) {
        const double steps = (intervals[k].t1 - t_now) / eps;
        const long ns = std::lround(steps);
        if (std::abs(steps - ns) > 1e-6) throw InvalidArgument("histories", "eps must tile the projection lattice");
        for (long s = 0; s < ns; ++s)
            restricted = project_density(propagate_operator(restricted, eps, params, max_step, leak), true);
        t_now = intervals[k].t1;
        const auto branch = propagate_operator(restricted, intervals[k].length(), params, max_step, leak);
        out.p_string.push_back(trace_side(branch, false).real());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Verdict

enum class DeltaRegime { free, intermediate, strong };

inline const char* to_string(DeltaRegime r) {
    switch (r) {
        case DeltaRegime::free: return "free";
        case DeltaRegime::intermediate: return "intermediate";
        case DeltaRegime::strong: return "strong";
    }
    return "?";
}

/// Nearest of the three cases: strong once t2 - t1 reaches tau_l, otherwise
/// intermediate once t1 reaches tau_l, otherwise free.
inline DeltaRegime classify_regime(const Interval& iv, const PhysParams& params) {
    if (params.D() == 0.0) return DeltaRegime::free;
    const double tau_l = std::sqrt(2.0 * params.mass() * params.hbar() / params.D());
    if (iv.length() >= tau_l) return DeltaRegime::strong;
    if (iv.t1 >= tau_l) return DeltaRegime::intermediate;
    return DeltaRegime::free;
}

struct DecoherenceReport {
    double delta_exact = 0.0;
    double delta_formula = 0.0;
    DeltaRegime regime = DeltaRegime::free;
    bool decoherent = false;
    double E_dt_over_hbar = 0.0;
    double t1_over_tau_l = 0.0;
    HistoryThresholds thresholds;
    std::string failed_gate;  // empty when decoherent
};

struct VerdictInputs {
    double delta_exact;
    double delta_formula;
    Interval interval;
    double p0;       // reference momentum for E = p0^2/2m
    bool gaussian;   // single Gaussian term: the t1 gate is waived
};

inline DecoherenceReport decoherence_verdict(const VerdictInputs& in, const PhysParams& params,
                                             const HistoryThresholds& th = {}) {
    DecoherenceReport r;
    r.delta_exact = in.delta_exact;
    r.delta_formula = in.delta_formula;
    r.regime = classify_regime(in.interval, params);
    r.thresholds = th;
    r.E_dt_over_hbar = in.p0 * in.p0 / (2.0 * params.mass()) * in.interval.length() / params.hbar();
    r.t1_over_tau_l = params.D() > 0.0 ? in.interval.t1 / std::sqrt(2.0 * params.mass() * params.hbar() / params.D()) : 0.0;
    if (r.E_dt_over_hbar <= th.energy_interval)
        r.failed_gate = "interval too fine";
    else if (!in.gaussian && r.t1_over_tau_l <= th.t1_over_tau_l)
        r.failed_gate = "t1 too small";
    else if (!(in.delta_exact < th.delta_max))
        r.failed_gate = "delta too large";
    r.decoherent = r.failed_gate.empty();
    return r;
}

/// Full pipeline on a mixture given at t = 0.
inline DecoherenceReport decoherence_verdict(const GaussianMixtureState& s0, const Interval& iv,
                                             const HistoryThresholds& th = {}, int n = 384) {
    const auto& params = s0.params();
    const auto st1 = propagate_mixture(s0, iv.t1);
    const double exact = delta_exact(st1, iv, n).value;
    double formula = exact;
    switch (classify_regime(iv, params)) {
        case DeltaRegime::free: formula = delta_free(st1, iv, n).value; break;
        case DeltaRegime::intermediate: formula = delta_intermediate(s0, iv, {}, n).estimate.value; break;
        case DeltaRegime::strong: formula = delta_strong(st1, iv, {}, n).value; break;
    }
    return decoherence_verdict(VerdictInputs{exact, formula, iv, moments(s0).mean.p, s0.terms().size() == 1}, params,
                               th);
}

inline void write_csv(std::ostream& os, const DecoherenceReport& r) {
    os.precision(12);
    os << "delta_exact,delta_formula,regime,decoherent,E_dt_over_hbar,t1_over_tau_l,failed_gate\n"
       << r.delta_exact << ',' << r.delta_formula << ',' << to_string(r.regime) << ',' << (r.decoherent ? 1 : 0) << ','
       << r.E_dt_over_hbar << ',' << r.t1_over_tau_l << ',' << r.failed_gate << '\n';
}

inline void write_summary(std::ostream& os, const DecoherenceReport& r) {
    os << "regime: " << to_string(r.regime) << '\n'
       << "delta (exact): " << r.delta_exact << '\n'
       << "delta (regime formula): " << r.delta_formula << '\n'
       << "E dt / hbar: " << r.E_dt_over_hbar << '\n'
       << "t1 / tau_l: " << r.t1_over_tau_l << '\n'
       << "decoherent: " << (r.decoherent ? "yes" : "no");
    if (!r.decoherent) os << " (" << r.failed_gate << ')';
    os << '\n';
}

inline void write_csv(std::ostream& os, const ClassOperatorResult& r) {
    os.precision(12);
    os << "k,p_linear,p_squared,p_string\n";
    for (std::size_t k = 0; k < r.p_linear.size(); ++k)
        os << k << ',' << r.p_linear[k] << ',' << r.p_squared[k] << ',' << r.p_string[k] << '\n';
}

}  // namespace qat
