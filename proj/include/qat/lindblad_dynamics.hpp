#pragma once
// Master-equation right-hand sides for L = a x + i b p, current terms and the
// continuity-equation residual. All derivatives are second-order central
// differences; boundary cells are left at zero and excluded from maxima.

#include <array>
#include <cmath>
#include <complex>
#include <ostream>
#include <span>
#include <vector>

#include "qat/core_model.hpp"
#include "qat/error.hpp"
#include "qat/gaussian_engine.hpp"
#include "qat/grid.hpp"

namespace qat {

namespace detail {

inline void require_fd_grid(int n) {
    if (n < 32) throw GridError("lindblad_dynamics", "grid too coarse for finite differences (need >= 32 points)");
}

inline int origin_index(const Axis& axis) {
    const double s = axis.locate(0.0);
    const int i = static_cast<int>(std::lround(s));
    if (i < 1 || i > axis.size() - 2 || std::abs(s - i) > 1e-9)
        throw GridError("lindblad_dynamics", "x = 0 is not an interior grid node");
    return i;
}

}  // namespace detail

/// d rho / dt for
///   -(i/hbar)[p^2/2m, rho] - i a b [x, {rho, p}] - (a^2/2)[x,[x,rho]] - (b^2/2)[p,[p,rho]]
/// i.e. (i hbar/2m)(dxx - dyy) rho - hbar a b (x - y)(dx - dy) rho
///      - (a^2/2)(x - y)^2 rho + (hbar^2 b^2/2)(dx + dy)^2 rho.
/// The last operator is differenced along the diagonal direction so that the
/// trace of the result telescopes to zero.
inline DensityMatrixGrid master_rhs_position(const DensityMatrixGrid& rho, const PhysParams& params) {
    const Axis& xa = rho.x_axis;
    const int n = xa.size();
    detail::require_fd_grid(n);
    const double h = xa.spacing();
    const double hbar = params.hbar(), m = params.mass();
    const double a = params.a(), b = params.b();
    const std::complex<double> ukin(0.0, hbar / (2.0 * m * h * h));
    const double cab = hbar * a * b / (2.0 * h);
    const double ca2 = 0.5 * a * a;
    const double cb2 = 0.5 * hbar * hbar * b * b / (h * h);
    const auto& r = rho.values;
    DensityMatrixGrid out(xa);
    for (int i = 1; i < n - 1; ++i)
        for (int j = 1; j < n - 1; ++j) {
            const auto dxx = r(i + 1, j) + r(i - 1, j) - 2.0 * r(i, j);
            const auto dyy = r(i, j + 1) + r(i, j - 1) - 2.0 * r(i, j);
            const double d = xa[i] - xa[j];
            std::complex<double> v = ukin * (dxx - dyy);
            if (cab != 0.0) v -= cab * d * ((r(i + 1, j) - r(i - 1, j)) - (r(i, j + 1) - r(i, j - 1)));
            v -= ca2 * d * d * r(i, j);
            if (cb2 != 0.0) v += cb2 * (r(i + 1, j + 1) + r(i - 1, j - 1) - 2.0 * r(i, j));
            out.values(i, j) = v;
        }
    return out;
}

/// dW/dt = -(p/m) dW/dq + 2 hbar a b d(pW)/dp + (hbar^2 a^2/2) d2W/dp2 + (hbar^2 b^2/2) d2W/dq2.
inline PhaseSpaceGrid master_rhs_wigner(const PhaseSpaceGrid& w, const PhysParams& params) {
    const int np = w.p_axis.size(), nq = w.q_axis.size();
    detail::require_fd_grid(np);
    detail::require_fd_grid(nq);
    const double hp = w.p_axis.spacing(), hq = w.q_axis.spacing();
    const double hbar = params.hbar(), m = params.mass();
    const double fr = 2.0 * hbar * params.a() * params.b();
    const double dp = 0.5 * hbar * hbar * params.a() * params.a();
    const double dq = 0.5 * hbar * hbar * params.b() * params.b();
    const auto& v = w.values;
    PhaseSpaceGrid out(w.p_axis, w.q_axis);
    for (int i = 1; i < np - 1; ++i) {
        const double p = w.p_axis[i];
        for (int j = 1; j < nq - 1; ++j) {
            double r = -(p / m) * (v(i, j + 1) - v(i, j - 1)) / (2.0 * hq);
            if (fr != 0.0)
                r += fr * (w.p_axis[i + 1] * v(i + 1, j) - w.p_axis[i - 1] * v(i - 1, j)) / (2.0 * hp);
            r += dp * (v(i + 1, j) + v(i - 1, j) - 2.0 * v(i, j)) / (hp * hp);
            if (dq != 0.0) r += dq * (v(i, j + 1) + v(i, j - 1) - 2.0 * v(i, j)) / (hq * hq);
            out.values(i, j) = r;
        }
    }
    return out;
}

/// Probability flux (hbar/m) Im d_x rho(x, y)|_{y=x} at every interior node.
inline std::vector<double> probability_flux(const DensityMatrixGrid& rho, const PhysParams& params) {
    const int n = rho.x_axis.size();
    const double h = rho.x_axis.spacing();
    std::vector<double> j(n, 0.0);
    for (int i = 1; i < n - 1; ++i)
        j[i] = params.hbar() / params.mass() * ((rho.values(i + 1, i) - rho.values(i - 1, i)) / (2.0 * h)).imag();
    return j;
}

/// J_D(x) = -(hbar^2 b^2/2) d_x rho(x, x), at every interior node.
inline std::vector<double> diffusive_current_profile(const DensityMatrixGrid& rho, const PhysParams& params) {
    const int n = rho.x_axis.size();
    const double h = rho.x_axis.spacing();
    const double c = 0.5 * params.hbar() * params.hbar() * params.b() * params.b();
    std::vector<double> j(n, 0.0);
    if (c == 0.0) return j;
    for (int i = 1; i < n - 1; ++i)
        j[i] = -c * (rho.values(i + 1, i + 1).real() - rho.values(i - 1, i - 1).real()) / (2.0 * h);
    return j;
}

/// J_D at an interior point, linear interpolation between nodes.
inline double diffusive_current(const DensityMatrixGrid& rho, const PhysParams& params, double x) {
    const auto prof = diffusive_current_profile(rho, params);
    const double s = rho.x_axis.locate(x);
    const int i = static_cast<int>(std::floor(s));
    if (i < 1 || i + 1 > rho.x_axis.size() - 2)
        throw GridError("lindblad_dynamics", "diffusive current requested outside the interior");
    const double f = s - i;
    return (1.0 - f) * prof[i] + f * prof[i + 1];
}

struct CurrentTerms {
    double standard = 0.0;     // -(1/2m) Tr([p delta(x) + delta(x) p] rho)
    double environment = 0.0;  // diffusive correction, arrival sign
    double total() const noexcept { return standard + environment; }
};

/// Leftward arrival current at x = 0 split into its unitary part and the
/// environment correction. J_env = (hbar^2 b^2/2) d_x rho(x,x)|_0 = -J_D(0),
/// matching the Wigner-space correction (hbar^2 b^2/2) \int dp dW/dq (p, 0).
inline CurrentTerms current_terms(const DensityMatrixGrid& rho, const PhysParams& params) {
    const int c = detail::origin_index(rho.x_axis);
    CurrentTerms out;
    const double h = rho.x_axis.spacing();
    out.standard = -params.hbar() / params.mass() * ((rho.values(c + 1, c) - rho.values(c - 1, c)) / (2.0 * h)).imag();
    const double cb = 0.5 * params.hbar() * params.hbar() * params.b() * params.b();
    out.environment = cb * (rho.values(c + 1, c + 1).real() - rho.values(c - 1, c - 1).real()) / (2.0 * h);
    return out;
}

struct ContinuityReport {
    double max_residual = 0.0;
    double t = 0.0;  // time of the sample where the maximum occurs
    std::vector<double> x;
    std::vector<double> J;
    std::vector<double> J_D;
    std::vector<double> residual;
    double tolerance = 0.0;
    bool passed() const noexcept { return max_residual <= tolerance; }
};

/// max over interior (x, t) of |d_t rho(x,x) + d_x (J + J_D)| with central
/// differences in both. `margin` boundary nodes are excluded.
inline ContinuityReport continuity_residual(std::span<const DensityMatrixGrid> traj, double dt, const PhysParams& params,
                                            double t0 = 0.0, int margin = 2, double tolerance = 0.0) {
    if (traj.size() < 3) throw InvalidArgument("lindblad_dynamics", "continuity check needs at least 3 time samples");
    if (!(dt > 0.0)) throw InvalidArgument("lindblad_dynamics", "time step must be > 0");
    const Axis& xa = traj[0].x_axis;
    for (const auto& r : traj)
        if (!(r.x_axis == xa)) throw GridError("lindblad_dynamics", "mismatched grids across time samples");
    const int n = xa.size();
    detail::require_fd_grid(n);
    const double h = xa.spacing();
    ContinuityReport rep;
    rep.tolerance = tolerance;
    rep.max_residual = -1.0;
    for (std::size_t k = 1; k + 1 < traj.size(); ++k) {
        const auto J = probability_flux(traj[k], params);
        const auto JD = diffusive_current_profile(traj[k], params);
        std::vector<double> res(n, 0.0);
        double local = 0.0;
        for (int i = std::max(margin, 2); i < n - std::max(margin, 2); ++i) {
            const double drho = (traj[k + 1].values(i, i).real() - traj[k - 1].values(i, i).real()) / (2.0 * dt);
            const double div = ((J[i + 1] + JD[i + 1]) - (J[i - 1] + JD[i - 1])) / (2.0 * h);
            res[i] = drho + div;
            local = std::max(local, std::abs(res[i]));
        }
        if (local > rep.max_residual) {
            rep.max_residual = local;
            rep.t = t0 + k * dt;
            rep.J = J;
            rep.J_D = JD;
            rep.residual = res;
        }
    }
    rep.x.resize(n);
    for (int i = 0; i < n; ++i) rep.x[i] = xa[i];
    return rep;
}

inline void write_csv(std::ostream& os, const ContinuityReport& rep) {
    os.precision(12);
    os << "x,J,J_D,residual\n";
    for (std::size_t i = 0; i < rep.x.size(); ++i)
        os << rep.x[i] << ',' << rep.J[i] << ',' << rep.J_D[i] << ',' << rep.residual[i] << '\n';
}

/// Exact first and second moments of a Gaussian Wigner function evolving
/// under master_rhs_wigner: drift F = [[-2 hbar a b, 0], [1/m, 0]] and
/// diffusion 2 diag(hbar^2 a^2/2, hbar^2 b^2/2). Integrated with RK4 on a
/// fine internal step.
inline Moments evolve_gaussian_moments(const Moments& m0, double t, const PhysParams& params, int steps = 2000) {
    if (t < 0.0) throw InvalidArgument("lindblad_dynamics", "negative evolution time");
    const double g = 2.0 * params.hbar() * params.a() * params.b();
    const double im = 1.0 / params.mass();
    const double qp = params.hbar() * params.hbar() * params.a() * params.a();
    const double qq = params.hbar() * params.hbar() * params.b() * params.b();
    using State = std::array<double, 5>;  // mp, mq, cpp, cpq, cqq
    auto f = [&](const State& s) -> State {
        return {-g * s[0], im * s[0], -2.0 * g * s[2] + qp, im * s[2] - g * s[3], 2.0 * im * s[3] + qq};
    };
    State s{m0.mean.p, m0.mean.q, m0.cov.pp, m0.cov.pq, m0.cov.qq};
    if (t == 0.0) return m0;
    const double h = t / steps;
    for (int k = 0; k < steps; ++k) {
        const State k1 = f(s);
        State tmp;
        for (int i = 0; i < 5; ++i) tmp[i] = s[i] + 0.5 * h * k1[i];
        const State k2 = f(tmp);
        for (int i = 0; i < 5; ++i) tmp[i] = s[i] + 0.5 * h * k2[i];
        const State k3 = f(tmp);
        for (int i = 0; i < 5; ++i) tmp[i] = s[i] + h * k3[i];
        const State k4 = f(tmp);
        for (int i = 0; i < 5; ++i) s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    return {{s[0], s[1]}, {s[2], s[3], s[4]}};
}

}  // namespace qat
