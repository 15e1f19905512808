#pragma once
// Grid representations and the brute-force propagators used to cross-check
// the closed-form engine.

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <vector>

#include "qat/core_model.hpp"
#include "qat/error.hpp"
#include "qat/gaussian_engine.hpp"
#include "qat/grid.hpp"

namespace qat {

namespace detail {

// 4-point Lagrange interpolation at fractional index s, zero outside [0, n).
inline double interp_cubic(const double* f, int n, double s) {
    const int j = static_cast<int>(std::floor(s));
    const double u = s - j;
    if (j < -2 || j > n) return 0.0;
    const double w[4] = {-u * (u - 1.0) * (u - 2.0) / 6.0, (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0,
                         -(u + 1.0) * u * (u - 2.0) / 2.0, (u + 1.0) * u * (u - 1.0) / 6.0};
    double acc = 0.0;
    for (int k = 0; k < 4; ++k) {
        const int idx = j - 1 + k;
        if (idx >= 0 && idx < n) acc += w[k] * f[idx];
    }
    return acc;
}

inline double normal_pdf(double x, double var) {
    return std::exp(-0.5 * x * x / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

}  // namespace detail

/// Husimi smoothing covariance for a coherent-state width s:
/// hbar * diag(s^2, 1/(4 s^2)) in (p, q) order, |A0| = hbar^2/4.
inline Cov2 husimi_covariance(double s, const PhysParams& params) {
    if (!(s > 0.0)) throw InvalidArgument("grid_engine", "smoothing width must be > 0");
    return Cov2::diag(params.hbar() * s * s, params.hbar() / (4.0 * s * s));
}

/// Discrete Gaussian convolution of variance `var` along an axis. Sampled
/// kernel when the width is resolved; otherwise a 5-point stencil matching
/// the second and fourth moments.
inline RealMatrix gaussian_smoothing_matrix(const Axis& axis, double var) {
    const int n = axis.size();
    const double h = axis.spacing();
    if (var <= 0.0) return RealMatrix::Identity(n, n);
    RealMatrix k = RealMatrix::Zero(n, n);
    if (var >= h * h) {
        const int reach = static_cast<int>(std::ceil(12.0 * std::sqrt(var) / h));
        for (int i = 0; i < n; ++i)
            for (int j = std::max(0, i - reach); j <= std::min(n - 1, i + reach); ++j)
                k(i, j) = h * detail::normal_pdf((i - j) * h, var);
        return k;
    }
    const double a = var / (h * h);
    const double w2 = a * (3.0 * a - 1.0) / 24.0;
    const double w1 = 0.5 * (a - 8.0 * w2);
    const double w0 = 1.0 - 2.0 * w1 - 2.0 * w2;
    for (int i = 0; i < n; ++i) {
        k(i, i) = w0;
        if (i >= 1) k(i, i - 1) = w1;
        if (i + 1 < n) k(i, i + 1) = w1;
        if (i >= 2) k(i, i - 2) = w2;
        if (i + 2 < n) k(i, i + 2) = w2;
    }
    return k;
}

/// W'(p, q) = W(p, q - slope * p), same axes.
inline PhaseSpaceGrid shear_grid(const PhaseSpaceGrid& w, double slope) {
    if (slope == 0.0) return w;
    PhaseSpaceGrid out(w.p_axis, w.q_axis);
    const int nq = w.q_axis.size();
    const double hq = w.q_axis.spacing();
    for (int i = 0; i < w.p_axis.size(); ++i) {
        const double shift = slope * w.p_axis[i] / hq;
        const double* row = w.values.row(i).data();
        for (int j = 0; j < nq; ++j) out.values(i, j) = detail::interp_cubic(row, nq, j - shift);
    }
    return out;
}

inline PhaseSpaceGrid sample_mixture(const GaussianMixtureState& state, const Axis& p_axis, const Axis& q_axis) {
    PhaseSpaceGrid w(p_axis, q_axis);
    for (int i = 0; i < p_axis.size(); ++i)
        for (int j = 0; j < q_axis.size(); ++j) w.values(i, j) = state.eval({p_axis[i], q_axis[j]});
    return w;
}

inline PhaseSpaceGrid sample_function(const std::function<double(PhaseSpacePoint)>& f, const Axis& p_axis,
                                      const Axis& q_axis) {
    PhaseSpaceGrid w(p_axis, q_axis);
    for (int i = 0; i < p_axis.size(); ++i)
        for (int j = 0; j < q_axis.size(); ++j) w.values(i, j) = f({p_axis[i], q_axis[j]});
    return w;
}

struct LeakPolicy {
    double relative_tolerance = 1e-6;
    bool enabled = true;
};

/// Relative size of the border values and of the mass change; throws
/// GridError when either exceeds the tolerance.
inline void check_leak(const PhaseSpaceGrid& before, const PhaseSpaceGrid& after, const LeakPolicy& policy) {
    if (!policy.enabled) return;
    const double peak = after.max_abs();
    if (peak == 0.0) return;
    const int np = after.p_axis.size(), nq = after.q_axis.size();
    double border = 0.0;
    for (int i = 0; i < np; ++i)
        border = std::max({border, std::abs(after.values(i, 0)), std::abs(after.values(i, nq - 1))});
    for (int j = 0; j < nq; ++j)
        border = std::max({border, std::abs(after.values(0, j)), std::abs(after.values(np - 1, j))});
    const double m0 = integrate(before), m1 = integrate(after);
    const double scale = std::max(std::abs(m0), 1e-300);
    if (border > policy.relative_tolerance * peak || std::abs(m1 - m0) > policy.relative_tolerance * scale)
        throw GridError("grid_engine", "grid too small for requested time");
}

/// Grid propagator for the negligible-dissipation QBM kernel over a fixed
/// time step. The kernel covariance A is factored as L diag(A_pp, s_u) L^T
/// with L a shear, so the 4-D convolution becomes two 1-D shears and two
/// 1-D smoothings on the same axes.
class WignerPropagator {
public:
    WignerPropagator(const Axis& p_axis, const Axis& q_axis, double t, const PhysParams& params,
                     LeakPolicy leak = {})
        : p_axis_(p_axis), q_axis_(q_axis), leak_(leak) {
        if (t < 0.0) throw InvalidArgument("grid_engine", "negative propagation time");
        const double tau = t / params.mass();
        const Cov2 a = qbm_covariance(t, params);
        if (a.pp == 0.0) {
            pre_slope_ = tau;
            post_slope_ = 0.0;
            kp_ = RealMatrix::Identity(p_axis.size(), p_axis.size());
            kq_ = RealMatrix::Identity(q_axis.size(), q_axis.size());
            return;
        }
        const double c = a.pq / a.pp;
        pre_slope_ = tau - c;
        post_slope_ = c;
        kp_ = gaussian_smoothing_matrix(p_axis, a.pp);
        kq_ = gaussian_smoothing_matrix(q_axis, a.qq - a.pq * a.pq / a.pp);
    }

    PhaseSpaceGrid apply(const PhaseSpaceGrid& w) const {
        if (!(w.p_axis == p_axis_) || !(w.q_axis == q_axis_))
            throw InvalidArgument("grid_engine", "grid axes differ from propagator axes");
        PhaseSpaceGrid h = shear_grid(w, pre_slope_);
        h.values = (kp_ * h.values * kq_.transpose()).eval();
        PhaseSpaceGrid out = shear_grid(h, post_slope_);
        check_leak(w, out, leak_);
        return out;
    }

private:
    Axis p_axis_, q_axis_;
    LeakPolicy leak_;
    double pre_slope_ = 0.0;
    double post_slope_ = 0.0;
    RealMatrix kp_, kq_;
};

inline PhaseSpaceGrid propagate_wigner_qbm(const PhaseSpaceGrid& w, double t, const PhysParams& params,
                                           LeakPolicy leak = {}) {
    return WignerPropagator(w.p_axis, w.q_axis, t, params, leak).apply(w);
}

/// Direct trapezoid quadrature of the kernel integral, O(n^4). Only for
/// small grids; requires D > 0 and t > 0.
inline PhaseSpaceGrid propagate_wigner_qbm_direct(const PhaseSpaceGrid& w, double t, const PhysParams& params) {
    if (!(t > 0.0) || params.D() == 0.0)
        throw RegimeError("grid_engine", "direct kernel quadrature needs t > 0 and D > 0");
    const Cov2 a = qbm_covariance(t, params);
    const Cov2 ainv = a.inverse();
    const double norm = 1.0 / (2.0 * std::numbers::pi * std::sqrt(a.det()));
    const double tau = t / params.mass();
    const auto& pa = w.p_axis;
    const auto& qa = w.q_axis;
    PhaseSpaceGrid out(pa, qa);
    for (int i = 0; i < pa.size(); ++i)
        for (int j = 0; j < qa.size(); ++j) {
            double acc = 0.0;
            for (int k = 0; k < pa.size(); ++k) {
                const double dp = pa[i] - pa[k];
                for (int l = 0; l < qa.size(); ++l) {
                    const double dq = qa[j] - (qa[l] + tau * pa[k]);
                    acc += pa.weight(k) * qa.weight(l) * w.values(k, l) * std::exp(-0.5 * ainv.quad({dp, dq}));
                }
            }
            out.values(i, j) = norm * acc;
        }
    return out;
}

/// Keeps q > boundary: multiplies nodes by 1 (q > b), 1/2 (q == b), 0 (q < b).
inline PhaseSpaceGrid truncate_q(const PhaseSpaceGrid& w, double boundary = 0.0, bool keep_right = true) {
    PhaseSpaceGrid out = w;
    for (int j = 0; j < w.q_axis.size(); ++j) {
        const double q = w.q_axis[j];
        double f = q == boundary ? 0.5 : ((q > boundary) == keep_right ? 1.0 : 0.0);
        if (f != 1.0) out.values.col(j) *= f;
    }
    return out;
}

struct RestrictedEvolution {
    PhaseSpaceGrid final;
    std::vector<double> times;  // end of each step
    std::vector<double> norms;  // mass remaining after truncation
    std::vector<double> flux;   // \int_{p<0} (-p/m) W(p, 0) dp before truncation
};

/// Propagation interleaved with restriction to q > 0 (the region not yet
/// crossed by a left-moving particle) every eps; eps must divide t.
inline RestrictedEvolution restricted_evolution(const PhaseSpaceGrid& w, double t, double eps,
                                                const PhysParams& params, LeakPolicy leak = {}) {
    if (!(eps > 0.0)) throw InvalidArgument("grid_engine", "restriction spacing must be > 0");
    const double ratio = t / eps;
    const long steps = std::lround(ratio);
    if (steps < 1 || std::abs(ratio - steps) > 1e-9 * std::max(1.0, ratio))
        throw InvalidArgument("grid_engine", "restriction spacing must divide the propagation time");
    const WignerPropagator prop(w.p_axis, w.q_axis, eps, params, leak);
    RestrictedEvolution r;
    PhaseSpaceGrid cur = truncate_q(w, 0.0, true);
    for (long s = 1; s <= steps; ++s) {
        cur = prop.apply(cur);
        const auto slice = slice_at_q0(cur);
        double fl = 0.0;
        for (int i = 0; i < cur.p_axis.size(); ++i)
            if (cur.p_axis[i] < 0.0) fl += cur.p_axis.weight(i) * (-cur.p_axis[i] / params.mass()) * slice[i];
        cur = truncate_q(cur, 0.0, true);
        r.times.push_back(s * eps);
        r.norms.push_back(integrate(cur));
        r.flux.push_back(fl);
    }
    r.final = cur;
    return r;
}

inline PhaseSpaceGrid propagate_wigner_restricted(const PhaseSpaceGrid& w, double t, double eps,
                                                  const PhysParams& params, LeakPolicy leak = {}) {
    return restricted_evolution(w, t, eps, params, leak).final;
}

/// Husimi function: Wigner smoothed by husimi_covariance(s).
inline PhaseSpaceGrid q_function_from_wigner(const PhaseSpaceGrid& w, double s, const PhysParams& params) {
    const Cov2 a0 = husimi_covariance(s, params);
    PhaseSpaceGrid out = w;
    out.values = (gaussian_smoothing_matrix(w.p_axis, a0.pp) * w.values *
                  gaussian_smoothing_matrix(w.q_axis, a0.qq).transpose())
                     .eval();
    return out;
}

// ---------------------------------------------------------------------------
// Position representation

/// rho(x, y) from the closed-form Wigner mixture. With X = (x+y)/2 and
/// xi = x - y, rho = \int dp e^{i p xi / hbar} W(p, X), done term by term.
inline DensityMatrixGrid density_from_mixture(const GaussianMixtureState& state, const Axis& x_axis) {
    using C = std::complex<double>;
    const double hbar = state.params().hbar();
    DensityMatrixGrid rho(x_axis);
    const int n = x_axis.size();
    for (const auto& t : state.terms()) {
        const double v = t.cov.pp - t.cov.pq * t.cov.pq / t.cov.qq;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const double X = 0.5 * (x_axis[i] + x_axis[j]);
                const double xi = (x_axis[i] - x_axis[j]) / hbar;
                const double dq = X - t.center.q;
                const double dens = detail::normal_pdf(dq, t.cov.qq);
                const double mu = t.center.p + t.cov.pq / t.cov.qq * dq;
                C acc = 0.0;
                if (t.k.is_zero()) {
                    acc = std::cos(t.phase) * std::exp(C(-0.5 * v * xi * xi, mu * xi));
                } else {
                    for (int s : {1, -1}) {
                        const double kappa = xi + s * t.k.kp;
                        acc += 0.5 * std::exp(C(-0.5 * v * kappa * kappa, mu * kappa + s * (t.k.kq * X + t.phase)));
                    }
                }
                rho.values(i, j) += t.weight * dens * acc;
            }
    }
    return rho;
}

inline DensityMatrixGrid density_from_wavefunction(const std::function<std::complex<double>(double)>& psi,
                                                   const Axis& x_axis) {
    DensityMatrixGrid rho(x_axis);
    std::vector<std::complex<double>> v(x_axis.size());
    for (int i = 0; i < x_axis.size(); ++i) v[i] = psi(x_axis[i]);
    for (int i = 0; i < x_axis.size(); ++i)
        for (int j = 0; j < x_axis.size(); ++j) rho.values(i, j) = v[i] * std::conj(v[j]);
    return rho;
}

/// W(p, x_c) = (1/pi hbar) sum_k h e^{-2 i p k h / hbar} rho(x_{c+k}, x_{c-k}).
/// The q axis of the result is the position axis; p must stay below the
/// Nyquist momentum pi hbar / (2h).
inline PhaseSpaceGrid wigner_from_density(const DensityMatrixGrid& rho, const Axis& p_axis, double hbar) {
    const Axis& xa = rho.x_axis;
    const int n = xa.size();
    const double h = xa.spacing();
    const double nyquist = std::numbers::pi * hbar / (2.0 * h);
    if (std::max(std::abs(p_axis.min()), std::abs(p_axis.max())) > nyquist)
        throw GridError("grid_engine", "momentum axis exceeds the position-grid Nyquist limit");
    PhaseSpaceGrid w(p_axis, xa);
    for (int c = 0; c < n; ++c) {
        const int kmax = std::min(c, n - 1 - c);
        for (int i = 0; i < p_axis.size(); ++i) {
            const double arg = -2.0 * p_axis[i] * h / hbar;
            double acc = rho.values(c, c).real();
            for (int k = 1; k <= kmax; ++k) {
                const auto z = rho.values(c + k, c - k);
                // k and -k pair up into 2 Re[e^{i k arg} z]
                acc += 2.0 * (std::cos(k * arg) * z.real() - std::sin(k * arg) * z.imag());
            }
            w.values(i, c) = acc * h / (std::numbers::pi * hbar);
        }
    }
    return w;
}

/// rho(x_i, x_j) = \int dp e^{i p (x_i - x_j)/hbar} W(p, (x_i + x_j)/2), with
/// W interpolated along q.
inline DensityMatrixGrid density_from_wigner(const PhaseSpaceGrid& w, const Axis& x_axis, double hbar) {
    DensityMatrixGrid rho(x_axis);
    const int n = x_axis.size();
    const int nq = w.q_axis.size();
    std::vector<double> col(w.p_axis.size());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double X = 0.5 * (x_axis[i] + x_axis[j]);
            const double xi = (x_axis[i] - x_axis[j]) / hbar;
            const double s = w.q_axis.locate(X);
            std::complex<double> acc = 0.0;
            for (int k = 0; k < w.p_axis.size(); ++k) {
                const double wv = detail::interp_cubic(w.values.row(k).data(), nq, s);
                acc += w.p_axis.weight(k) * wv * std::polar(1.0, w.p_axis[k] * xi);
            }
            rho.values(i, j) = acc;
        }
    return rho;
}

/// Sharp projector onto one side of x = boundary; a node exactly on the
/// boundary gets weight 1/2.
inline std::vector<double> side_weights(const Axis& x_axis, double boundary, bool right) {
    std::vector<double> f(x_axis.size());
    for (int i = 0; i < x_axis.size(); ++i) {
        const double x = x_axis[i];
        f[i] = x == boundary ? 0.5 : ((x > boundary) == right ? 1.0 : 0.0);
    }
    return f;
}

/// P rho P with P the projector onto x > boundary (right) or x < boundary.
inline DensityMatrixGrid project_density(const DensityMatrixGrid& rho, bool right, double boundary = 0.0) {
    const auto f = side_weights(rho.x_axis, boundary, right);
    DensityMatrixGrid out = rho;
    for (int i = 0; i < rho.x_axis.size(); ++i)
        for (int j = 0; j < rho.x_axis.size(); ++j) out.values(i, j) *= f[i] * f[j];
    return out;
}

/// P M (left multiplication only), for building class-operator strings.
inline DensityMatrixGrid project_left_only(const DensityMatrixGrid& m, bool right, double boundary = 0.0) {
    const auto f = side_weights(m.x_axis, boundary, right);
    DensityMatrixGrid out = m;
    for (int i = 0; i < m.x_axis.size(); ++i) out.values.row(i) *= f[i];
    return out;
}

/// Tr(P rho) over one side.
inline std::complex<double> trace_side(const DensityMatrixGrid& rho, bool right, double boundary = 0.0) {
    const auto f = side_weights(rho.x_axis, boundary, right);
    std::complex<double> s = 0.0;
    for (int i = 0; i < rho.x_axis.size(); ++i) s += rho.x_axis.weight(i) * f[i] * rho.values(i, i);
    return s;
}

/// Strang-split propagator for the negligible-dissipation master equation in
/// the position representation: half decoherence step, exact band-limited
/// free evolution U rho U^dagger, half decoherence step. Works on any
/// operator kernel, Hermitian or not.
class DensityPropagator {
public:
    DensityPropagator(const Axis& x_axis, double dt, const PhysParams& params)
        : axis_(x_axis), dt_(dt), params_(params) {
        if (!(dt > 0.0)) throw InvalidArgument("grid_engine", "time step must be > 0");
        const int n = x_axis.size();
        const double L = n * x_axis.spacing();
        const double hbar = params.hbar(), m = params.mass();
        // FFT bin j carries wavenumber 2 pi j / L folded into [-n/2, n/2)
        phase_.resize(n);
        for (int j = 0; j < n; ++j) {
            const int jj = j < n / 2 ? j : j - n;
            const double k = 2.0 * std::numbers::pi * jj / L;
            phase_[j] = std::polar(1.0, -hbar * k * k * dt / (2.0 * m));
        }
        half_decoherence_.resize(n, n);
        const double rate = params.D() / (hbar * hbar);
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) {
                const double d = x_axis[a] - x_axis[b];
                half_decoherence_(a, b) = std::exp(-rate * d * d * 0.5 * dt);
            }
    }

    double dt() const noexcept { return dt_; }

    /// `steps` full steps.
    ComplexMatrix evolve(ComplexMatrix m, long steps) const {
        const bool decohere = params_.D() != 0.0;
        for (long s = 0; s < steps; ++s) {
            if (decohere) m = m.cwiseProduct(half_decoherence_);
            free_step(m);
            if (decohere) m = m.cwiseProduct(half_decoherence_);
        }
        return m;
    }

private:
    // M -> U M U^dagger with U diagonal in the discrete Fourier basis.
    void free_step(ComplexMatrix& m) const {
        const int n = axis_.size();
        Eigen::FFT<double> fft;
        std::vector<std::complex<double>> in(n), out(n);
        ComplexMatrix t = m.transpose();  // columns of m become contiguous rows
        for (int c = 0; c < n; ++c) {
            std::copy_n(t.row(c).data(), n, in.begin());
            fft.fwd(out, in);
            for (int j = 0; j < n; ++j) out[j] *= phase_[j];
            fft.inv(in, out);
            std::copy_n(in.begin(), n, t.row(c).data());
        }
        m = t.transpose();
        for (int r = 0; r < n; ++r) {
            std::copy_n(m.row(r).data(), n, in.begin());
            fft.fwd(out, in);
            for (int j = 0; j < n; ++j) out[j] *= std::conj(phase_[j]);
            fft.inv(in, out);
            std::copy_n(in.begin(), n, m.row(r).data());
        }
    }

    Axis axis_;
    double dt_;
    PhysParams params_;
    std::vector<std::complex<double>> phase_;
    Eigen::MatrixXd half_decoherence_;
};

/// Default time step of the splitting: a small fraction of the localisation
/// time, or the whole interval when D = 0 (the free part is exact).
inline double default_density_step(double t, const PhysParams& params) {
    if (params.D() == 0.0) return t;
    const double tau_l = std::sqrt(2.0 * params.mass() * params.hbar() / params.D());
    return std::min(t, 0.02 * tau_l);
}

inline void check_density_leak(const DensityMatrixGrid& rho, const LeakPolicy& policy) {
    if (!policy.enabled) return;
    const double peak = rho.values.cwiseAbs().maxCoeff();
    if (peak == 0.0) return;
    const int n = rho.x_axis.size();
    double border = 0.0;
    for (int i = 0; i < n; ++i)
        border = std::max({border, std::abs(rho.values(i, 0)), std::abs(rho.values(i, n - 1)),
                           std::abs(rho.values(0, i)), std::abs(rho.values(n - 1, i))});
    if (border > policy.relative_tolerance * peak)
        throw GridError("grid_engine", "grid too small for requested time");
}

/// Evolve an operator kernel by t (any operator; no Hermiticity assumed).
inline DensityMatrixGrid propagate_operator(const DensityMatrixGrid& m, double t, const PhysParams& params,
                                            double max_step = 0.0, LeakPolicy leak = {}) {
    if (t < 0.0) throw InvalidArgument("grid_engine", "negative propagation time");
    if (t == 0.0) return m;
    const double step = max_step > 0.0 ? std::min(max_step, t) : default_density_step(t, params);
    const long steps = static_cast<long>(std::ceil(t / step - 1e-12));
    const DensityPropagator prop(m.x_axis, t / steps, params);
    DensityMatrixGrid out(m.x_axis);
    out.values = prop.evolve(m.values, steps);
    check_density_leak(out, leak);
    return out;
}

inline DensityMatrixGrid propagate_density_qbm(const DensityMatrixGrid& rho, double t, const PhysParams& params,
                                               double max_step = 0.0, LeakPolicy leak = {}) {
    return propagate_operator(rho, t, params, max_step, leak);
}

}  // namespace qat
