#pragma once
// Exact phase-space algebra for Wigner functions that are finite sums of
// (possibly cosine-modulated) Gaussians. This class is closed under the
// negligible-dissipation QBM propagator, so every quantity below is exact
// up to floating point.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

#include "qat/core_model.hpp"
#include "qat/error.hpp"

namespace qat {

/// Symmetric 2x2 matrix of phase-space second moments, ordered (p, q).
struct Cov2 {
    double pp = 0.0;
    double pq = 0.0;
    double qq = 0.0;

    static Cov2 diag(double p, double q) { return {p, 0.0, q}; }

    double det() const noexcept { return pp * qq - pq * pq; }
    double trace() const noexcept { return pp + qq; }

    double min_eigenvalue() const noexcept {
        const double half_tr = 0.5 * (pp + qq);
        const double disc = std::sqrt(0.25 * (pp - qq) * (pp - qq) + pq * pq);
        return half_tr - disc;
    }

    bool is_positive_definite(double floor = 1e-12) const noexcept { return min_eigenvalue() > floor; }
    bool is_positive_semidefinite(double tol = 0.0) const noexcept { return min_eigenvalue() >= -tol; }

    Cov2 inverse() const {
        const double d = det();
        if (d == 0.0) throw InvalidArgument("gaussian_engine", "singular covariance");
        return {qq / d, -pq / d, pp / d};
    }

    /// z^T M z
    double quad(PhaseSpacePoint z) const noexcept { return pp * z.p * z.p + 2.0 * pq * z.p * z.q + qq * z.q * z.q; }

    /// M z
    PhaseSpacePoint apply(PhaseSpacePoint z) const noexcept { return {pp * z.p + pq * z.q, pq * z.p + qq * z.q}; }

    friend Cov2 operator+(Cov2 a, Cov2 b) { return {a.pp + b.pp, a.pq + b.pq, a.qq + b.qq}; }
    friend Cov2 operator-(Cov2 a, Cov2 b) { return {a.pp - b.pp, a.pq - b.pq, a.qq - b.qq}; }
    friend Cov2 operator*(double s, Cov2 a) { return {s * a.pp, s * a.pq, s * a.qq}; }
};

/// Phase-space covector (k_p, k_q); pairs with z = (p, q) as k.z.
struct Covector {
    double kp = 0.0;
    double kq = 0.0;

    double dot(PhaseSpacePoint z) const noexcept { return kp * z.p + kq * z.q; }
    bool is_zero() const noexcept { return kp == 0.0 && kq == 0.0; }
};

inline PhaseSpacePoint as_point(Covector k) { return {k.kp, k.kq}; }

/// Shear z -> (p, q + tau p) applied to a covariance: S A S^T.
inline Cov2 shear(const Cov2& a, double tau) {
    return {a.pp, a.pq + tau * a.pp, a.qq + 2.0 * tau * a.pq + tau * tau * a.pp};
}

inline PhaseSpacePoint shear(PhaseSpacePoint z, double tau) { return {z.p, z.q + tau * z.p}; }

/// g(z; A) = exp(-z^T A^{-1} z / 2) / (2 pi |A|^{1/2}).
inline double gaussian_eval(PhaseSpacePoint z, const Cov2& a) {
    if (!a.is_positive_definite(0.0))
        throw InvalidArgument("gaussian_engine", "covariance is singular or indefinite");
    const double d = a.det();
    return std::exp(-0.5 * a.inverse().quad(z)) / (2.0 * std::numbers::pi * std::sqrt(d));
}

struct GaussianComponent {
    PhaseSpacePoint center;
    Cov2 cov;
};

/// \int g(z1 - z; A) g(z - z2; B) d^2z = g(z1 - z2; A + B). B may be the zero
/// matrix (the delta-function limit); A must be positive definite.
inline GaussianComponent convolve(const GaussianComponent& a, const GaussianComponent& b) {
    if (!a.cov.is_positive_definite(0.0) && !b.cov.is_positive_definite(0.0))
        throw InvalidArgument("gaussian_engine", "convolution needs at least one non-degenerate covariance");
    if (!a.cov.is_positive_semidefinite(1e-14) || !b.cov.is_positive_semidefinite(1e-14))
        throw InvalidArgument("gaussian_engine", "convolution of indefinite covariance");
    return {a.center + b.center, a.cov + b.cov};
}

inline GaussianComponent convolve(const Cov2& a, const Cov2& b, PhaseSpacePoint offset) {
    return convolve(GaussianComponent{{}, a}, GaussianComponent{offset, b});
}

/// g(z; A) is a Wigner function iff |A| >= hbar^2/4 (boundary inclusive).
inline bool is_wigner_admissible(const Cov2& a, const PhysParams& params) {
    const double bound = 0.25 * params.hbar() * params.hbar();
    return a.pp >= 0.0 && a.qq >= 0.0 && a.det() >= bound * (1.0 - 1e-12);
}

/// Covariance of the QBM Wigner propagator after time t:
/// A = D t [[2, t/m], [t/m, 2 t^2 / 3 m^2]], |A| = D^2 t^4 / 3 m^2.
inline Cov2 qbm_covariance(double t, const PhysParams& params) {
    if (t < 0.0) throw InvalidArgument("gaussian_engine", "time must be >= 0");
    const double m = params.mass();
    const double dt = params.D() * t;
    return {2.0 * dt, dt * t / m, dt * 2.0 * t * t / (3.0 * m * m)};
}

/// Same covariance seen in initial-time phase-space variables, S^{-1} A S^{-T}:
/// the off-diagonal entry changes sign.
inline Cov2 qbm_covariance_initial_frame(double t, const PhysParams& params) {
    Cov2 a = qbm_covariance(t, params);
    a.pq = -a.pq;
    return a;
}

/// weight * g(z - center; cov) * cos(k.z + phase)
struct GaussianTerm {
    double weight = 1.0;
    PhaseSpacePoint center;
    Cov2 cov;
    Covector k;
    double phase = 0.0;

    double eval(PhaseSpacePoint z) const {
        const double c = k.is_zero() ? std::cos(phase) : std::cos(k.dot(z) + phase);
        return weight * gaussian_eval(z - center, cov) * c;
    }

    /// Integral over phase space.
    double integral() const noexcept {
        return weight * std::exp(-0.5 * cov.quad(as_point(k))) * std::cos(k.dot(center) + phase);
    }

    /// \int dp W(p, q) at fixed q.
    double marginal_q(double q) const noexcept {
        const auto c = conditional(q);
        return weight * c.density * std::exp(-0.5 * k.kp * k.kp * c.var) * std::cos(c.theta);
    }

    /// d/dq of marginal_q.
    double marginal_q_derivative(double q) const noexcept {
        const auto c = conditional(q);
        const double damp = std::exp(-0.5 * k.kp * k.kp * c.var);
        const double dtheta = k.kp * cov.pq / cov.qq + k.kq;
        const double ddens = -(q - center.q) / cov.qq * c.density;
        return weight * damp * (ddens * std::cos(c.theta) - c.density * dtheta * std::sin(c.theta));
    }

    /// \int dp p W(p, q) at fixed q.
    double momentum_moment_q(double q) const noexcept {
        const auto c = conditional(q);
        const double damp = std::exp(-0.5 * k.kp * k.kp * c.var);
        return weight * c.density * damp * (c.mean * std::cos(c.theta) - c.var * k.kp * std::sin(c.theta));
    }

    /// \int dq W(p, q) at fixed p.
    double marginal_p(double p) const noexcept {
        const double dens = std::exp(-0.5 * (p - center.p) * (p - center.p) / cov.pp) /
                            std::sqrt(2.0 * std::numbers::pi * cov.pp);
        const double mean = center.q + cov.pq / cov.pp * (p - center.p);
        const double var = cov.qq - cov.pq * cov.pq / cov.pp;
        return weight * dens * std::exp(-0.5 * k.kq * k.kq * var) * std::cos(k.kp * p + k.kq * mean + phase);
    }

private:
    struct Conditional {
        double density;  // N(q; center.q, cov.qq)
        double mean;     // E[p | q]
        double var;      // Var[p | q]
        double theta;    // phase evaluated at the conditional mean
    };

    Conditional conditional(double q) const noexcept {
        const double dq = q - center.q;
        const double density = std::exp(-0.5 * dq * dq / cov.qq) / std::sqrt(2.0 * std::numbers::pi * cov.qq);
        const double mean = center.p + cov.pq / cov.qq * dq;
        const double var = cov.pp - cov.pq * cov.pq / cov.qq;
        return {density, mean, var, k.kp * mean + k.kq * q + phase};
    }
};

struct Moments {
    PhaseSpacePoint mean;
    Cov2 cov;
};

/// Wigner function represented as a finite sum of GaussianTerms.
class GaussianMixtureState {
public:
    GaussianMixtureState() = default;
    GaussianMixtureState(std::vector<GaussianTerm> terms, PhysParams params)
        : terms_(std::move(terms)), params_(params) {}

    std::span<const GaussianTerm> terms() const noexcept { return terms_; }
    const PhysParams& params() const noexcept { return params_; }

    double eval(PhaseSpacePoint z) const {
        double s = 0.0;
        for (const auto& t : terms_) s += t.eval(z);
        return s;
    }

    double integral() const noexcept {
        double s = 0.0;
        for (const auto& t : terms_) s += t.integral();
        return s;
    }

    double marginal_q(double q) const noexcept {
        double s = 0.0;
        for (const auto& t : terms_) s += t.marginal_q(q);
        return s;
    }

    double marginal_q_derivative(double q) const noexcept {
        double s = 0.0;
        for (const auto& t : terms_) s += t.marginal_q_derivative(q);
        return s;
    }

    double momentum_moment_q(double q) const noexcept {
        double s = 0.0;
        for (const auto& t : terms_) s += t.momentum_moment_q(q);
        return s;
    }

    double marginal_p(double p) const noexcept {
        double s = 0.0;
        for (const auto& t : terms_) s += t.marginal_p(p);
        return s;
    }

    /// Every weight divided by the total integral.
    GaussianMixtureState normalized() const {
        const double total = integral();
        if (!(total > 0.0)) throw InvalidArgument("gaussian_engine", "state is not normalizable");
        auto out = *this;
        for (auto& t : out.terms_) t.weight /= total;
        return out;
    }

    GaussianMixtureState translated(PhaseSpacePoint dz) const {
        auto out = *this;
        for (auto& t : out.terms_) {
            t.phase -= t.k.dot(dz);
            t.center = t.center + dz;
        }
        return out;
    }

    GaussianMixtureState scaled(double s) const {
        auto out = *this;
        for (auto& t : out.terms_) t.weight *= s;
        return out;
    }

    GaussianMixtureState with_params(const PhysParams& p) const { return {terms_, p}; }

    /// Linear combination a*this + b*other (same physical parameters assumed).
    GaussianMixtureState combined(double a, const GaussianMixtureState& other, double b) const {
        std::vector<GaussianTerm> terms;
        for (auto t : terms_) { t.weight *= a; terms.push_back(t); }
        for (auto t : other.terms_) { t.weight *= b; terms.push_back(t); }
        return {std::move(terms), params_};
    }

    /// Bounding box (p_lo, p_hi, q_lo, q_hi) covering nsigma widths of every term.
    std::array<double, 4> bounding_box(double nsigma) const {
        std::array<double, 4> box{1e300, -1e300, 1e300, -1e300};
        for (const auto& t : terms_) {
            box[0] = std::min(box[0], t.center.p - nsigma * std::sqrt(t.cov.pp));
            box[1] = std::max(box[1], t.center.p + nsigma * std::sqrt(t.cov.pp));
            box[2] = std::min(box[2], t.center.q - nsigma * std::sqrt(t.cov.qq));
            box[3] = std::max(box[3], t.center.q + nsigma * std::sqrt(t.cov.qq));
        }
        return box;
    }

private:
    std::vector<GaussianTerm> terms_;
    PhysParams params_;
};

/// Exact first and second moments by term-wise integration.
inline Moments moments(const GaussianMixtureState& state) {
    const double total = state.integral();
    if (!(total > 0.0)) throw InvalidArgument("gaussian_engine", "non-normalizable state");
    double mp = 0.0, mq = 0.0, spp = 0.0, spq = 0.0, sqq = 0.0;
    for (const auto& t : state.terms()) {
        const PhaseSpacePoint v = t.cov.apply(as_point(t.k));  // Sigma k
        const double amp = t.weight * std::exp(-0.5 * t.cov.quad(as_point(t.k)));
        const double th = t.k.dot(t.center) + t.phase;
        const double c = std::cos(th), s = std::sin(th);
        const PhaseSpacePoint cc = t.center;
        mp += amp * (cc.p * c - v.p * s);
        mq += amp * (cc.q * c - v.q * s);
        spp += amp * (c * (t.cov.pp + cc.p * cc.p - v.p * v.p) - s * 2.0 * cc.p * v.p);
        spq += amp * (c * (t.cov.pq + cc.p * cc.q - v.p * v.q) - s * (cc.p * v.q + v.p * cc.q));
        sqq += amp * (c * (t.cov.qq + cc.q * cc.q - v.q * v.q) - s * 2.0 * cc.q * v.q);
    }
    mp /= total;
    mq /= total;
    return {{mp, mq}, {spp / total - mp * mp, spq / total - mp * mq, sqq / total - mq * mq}};
}

/// Exact QBM evolution (negligible dissipation) of a single term: free shear
/// along classical trajectories followed by convolution with g(.; A(t)).
///
/// For a modulated term the convolution is done by completing the square with
/// a complex centre. With Sigma the sheared covariance and M = Sigma + A:
///   cov -> M, k -> M^{-1} Sigma k, phase -> phase + (k - k').c,
///   weight -> weight * exp(-k^T (Sigma - Sigma M^{-1} Sigma) k / 2).
inline GaussianTerm propagate_term(const GaussianTerm& term, double t, const PhysParams& params) {
    const double tau = t / params.mass();
    GaussianTerm out = term;
    out.center = shear(term.center, tau);
    out.cov = shear(term.cov, tau);
    out.k = {term.k.kp - tau * term.k.kq, term.k.kq};  // S^{-T} k

    const Cov2 a = qbm_covariance(t, params);
    if (a.pp == 0.0) return out;
    const Cov2 sigma = out.cov;
    const Cov2 m = sigma + a;
    if (!out.k.is_zero()) {
        const Cov2 minv = m.inverse();
        const PhaseSpacePoint sk = sigma.apply(as_point(out.k));
        const PhaseSpacePoint knew = minv.apply(sk);
        // k^T Sigma k - (Sigma k)^T M^{-1} (Sigma k)
        const double expo = out.k.dot(sk) - (sk.p * knew.p + sk.q * knew.q);
        out.weight *= std::exp(-0.5 * expo);
        out.phase += (out.k.kp - knew.p) * out.center.p + (out.k.kq - knew.q) * out.center.q;
        out.k = {knew.p, knew.q};
    }
    out.cov = m;
    return out;
}

inline GaussianMixtureState propagate_mixture(const GaussianMixtureState& state, double t) {
    if (t < 0.0) throw InvalidArgument("gaussian_engine", "negative propagation time");
    std::vector<GaussianTerm> terms;
    terms.reserve(state.terms().size());
    for (const auto& term : state.terms()) terms.push_back(propagate_term(term, t, state.params()));
    return {std::move(terms), state.params()};
}

/// Smooth by an additional Gaussian of covariance `extra` (e.g. the Q-function
/// kernel). Uses the same complete-the-square update as propagation.
inline GaussianMixtureState smooth_mixture(const GaussianMixtureState& state, const Cov2& extra) {
    std::vector<GaussianTerm> terms;
    for (auto t : state.terms()) {
        const Cov2 m = t.cov + extra;
        if (!t.k.is_zero()) {
            const PhaseSpacePoint sk = t.cov.apply(as_point(t.k));
            const PhaseSpacePoint knew = m.inverse().apply(sk);
            t.weight *= std::exp(-0.5 * (t.k.dot(sk) - (sk.p * knew.p + sk.q * knew.q)));
            t.phase += (t.k.kp - knew.p) * t.center.p + (t.k.kq - knew.q) * t.center.q;
            t.k = {knew.p, knew.q};
        }
        t.cov = m;
        terms.push_back(t);
    }
    return {std::move(terms), state.params()};
}

/// One Gaussian wavepacket amplitude * (2 pi sigma^2)^{-1/4}
/// exp(-(x - x0)^2 / 4 sigma^2 + i p x / hbar) inside a superposition.
struct WavepacketComponent {
    std::complex<double> amplitude{1.0, 0.0};
    double x0 = 0.0;
    double p0 = 0.0;
};

/// Pure state psi(x) = sum_j a_j phi_j(x) with a common position width sigma.
class WavepacketSuperposition {
public:
    WavepacketSuperposition(std::vector<WavepacketComponent> comps, double sigma, PhysParams params)
        : comps_(std::move(comps)), sigma_(sigma), params_(params) {
        if (!(sigma > 0.0)) throw InvalidArgument("gaussian_engine", "sigma must be > 0");
        if (comps_.empty()) throw InvalidArgument("gaussian_engine", "empty superposition");
        // normalize using the exact overlaps
        double norm2 = 0.0;
        for (const auto& a : comps_)
            for (const auto& b : comps_) norm2 += std::real(std::conj(b.amplitude) * a.amplitude * overlap(b, a));
        const double s = 1.0 / std::sqrt(norm2);
        for (auto& c : comps_) c.amplitude *= s;
    }

    std::complex<double> psi(double x) const {
        const double hbar = params_.hbar();
        const double pre = std::pow(2.0 * std::numbers::pi * sigma_ * sigma_, -0.25);
        std::complex<double> s = 0.0;
        for (const auto& c : comps_) {
            const double d = x - c.x0;
            s += c.amplitude * pre * std::exp(std::complex<double>(-d * d / (4.0 * sigma_ * sigma_), c.p0 * x / hbar));
        }
        return s;
    }

    std::complex<double> dpsi(double x) const {
        const double hbar = params_.hbar();
        const double pre = std::pow(2.0 * std::numbers::pi * sigma_ * sigma_, -0.25);
        std::complex<double> s = 0.0;
        for (const auto& c : comps_) {
            const double d = x - c.x0;
            const auto e = std::exp(std::complex<double>(-d * d / (4.0 * sigma_ * sigma_), c.p0 * x / hbar));
            s += c.amplitude * pre * e * std::complex<double>(-d / (2.0 * sigma_ * sigma_), c.p0 / hbar);
        }
        return s;
    }

    /// Probability current (hbar/m) Im(psi^* psi') at x.
    double flux(double x) const {
        return params_.hbar() / params_.mass() * std::imag(std::conj(psi(x)) * dpsi(x));
    }

    /// Wigner function as a Gaussian mixture. Diagonal pairs give plain lobes;
    /// each pair j<l gives 2|a_j a_l| g(z - (pbar, xbar); Sigma0) cos(k.z + phi)
    /// with k = (-(x_j - x_l), p_j - p_l)/hbar and
    /// phi = pbar (x_j - x_l)/hbar + arg(a_j a_l^*).
    GaussianMixtureState to_mixture() const {
        const double hbar = params_.hbar();
        const Cov2 sigma0 = Cov2::diag(hbar * hbar / (4.0 * sigma_ * sigma_), sigma_ * sigma_);
        std::vector<GaussianTerm> terms;
        for (std::size_t j = 0; j < comps_.size(); ++j) {
            const auto& a = comps_[j];
            terms.push_back({std::norm(a.amplitude), {a.p0, a.x0}, sigma0, {}, 0.0});
            for (std::size_t l = j + 1; l < comps_.size(); ++l) {
                const auto& b = comps_[l];
                const auto prod = a.amplitude * std::conj(b.amplitude);
                const double pbar = 0.5 * (a.p0 + b.p0);
                const double xbar = 0.5 * (a.x0 + b.x0);
                const double dx = a.x0 - b.x0;
                const double dp = a.p0 - b.p0;
                GaussianTerm cross{2.0 * std::abs(prod), {pbar, xbar}, sigma0, {-dx / hbar, dp / hbar},
                                   pbar * dx / hbar + std::arg(prod)};
                if (cross.weight > 0.0) terms.push_back(cross);
            }
        }
        return GaussianMixtureState(std::move(terms), params_);
    }

    double sigma() const noexcept { return sigma_; }
    const PhysParams& params() const noexcept { return params_; }
    std::span<const WavepacketComponent> components() const noexcept { return comps_; }

private:
    // <phi_b | phi_a> for unit-amplitude packets
    std::complex<double> overlap(const WavepacketComponent& b, const WavepacketComponent& a) const {
        const double hbar = params_.hbar();
        const double dx = a.x0 - b.x0;
        const double dp = a.p0 - b.p0;
        const double xbar = 0.5 * (a.x0 + b.x0);
        const double mag = std::exp(-dx * dx / (8.0 * sigma_ * sigma_) - sigma_ * sigma_ * dp * dp / (2.0 * hbar * hbar));
        return std::polar(mag, dp * xbar / hbar);
    }

    std::vector<WavepacketComponent> comps_;
    double sigma_;
    PhysParams params_;
};

inline WavepacketSuperposition gaussian_packet(double x0, double p0, double sigma, const PhysParams& params) {
    return WavepacketSuperposition({{1.0, x0, p0}}, sigma, params);
}

/// Two lobes at q_center -/+ separation/2 sharing momentum p0. Reduces to a
/// single Gaussian when separation = 0.
inline WavepacketSuperposition cat_packet(double separation, double p0, double sigma, const PhysParams& params,
                                          double q_center = 0.0) {
    if (separation == 0.0) return gaussian_packet(q_center, p0, sigma, params);
    return WavepacketSuperposition(
        {{1.0, q_center - 0.5 * separation, p0}, {1.0, q_center + 0.5 * separation, p0}}, sigma, params);
}

/// Two momentum components at the same position: psi = phi(p1) + r e^{i theta} phi(p2).
inline WavepacketSuperposition two_momentum_packet(double p1, double p2, double ratio, double theta, double x0,
                                                   double sigma, const PhysParams& params) {
    return WavepacketSuperposition({{1.0, x0, p1}, {std::polar(ratio, theta), x0, p2}}, sigma, params);
}

inline GaussianMixtureState make_cat_state(double separation, double p0, double sigma, const PhysParams& params,
                                           double q_center = 0.0) {
    return cat_packet(separation, p0, sigma, params, q_center).to_mixture().normalized();
}

inline GaussianMixtureState make_gaussian_state(double x0, double p0, double sigma, const PhysParams& params) {
    return gaussian_packet(x0, p0, sigma, params).to_mixture().normalized();
}

}  // namespace qat
