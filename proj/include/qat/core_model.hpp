#pragma once
// Physical parameters, derived timescales and the validity window shared by
// every other module. Natural units (hbar = m = 1) are the default but all
// formulas carry hbar and mass explicitly.

#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "qat/error.hpp"

namespace qat {

/// Thresholds standing in for "much less than" / "much greater than".
struct Thresholds {
    double much_less = 0.1;
    double much_greater = 10.0;
};

/// Environment and particle constants. Immutable once constructed.
class PhysParams {
public:
    PhysParams() = default;

    PhysParams(double hbar, double mass, double D, double gamma = 0.0)
        : hbar_(hbar), mass_(mass), D_(D), gamma_(gamma) {
        if (!(hbar > 0.0)) throw InvalidArgument("core_model", "hbar must be > 0");
        if (!(mass > 0.0)) throw InvalidArgument("core_model", "mass must be > 0");
        if (!(D >= 0.0)) throw InvalidArgument("core_model", "D must be >= 0");
        if (!(gamma >= 0.0)) throw InvalidArgument("core_model", "gamma must be >= 0");
    }

    /// D = 2 m gamma kT.
    static PhysParams from_temperature(double hbar, double mass, double gamma, double kT) {
        if (!(kT >= 0.0)) throw InvalidArgument("core_model", "kT must be >= 0");
        return PhysParams(hbar, mass, 2.0 * mass * gamma * kT, gamma);
    }

    double hbar() const noexcept { return hbar_; }
    double mass() const noexcept { return mass_; }
    double D() const noexcept { return D_; }
    double gamma() const noexcept { return gamma_; }

    /// Lindblad coefficient of x: a = sqrt(2D/hbar^2).
    double a() const noexcept { return std::sqrt(2.0 * D_ / (hbar_ * hbar_)); }

    /// Lindblad coefficient of p: b = gamma/sqrt(2D). Zero when gamma = 0.
    double b() const {
        if (gamma_ == 0.0) return 0.0;
        if (D_ == 0.0) throw InvalidArgument("core_model", "b undefined for D = 0 with gamma > 0");
        return gamma_ / std::sqrt(2.0 * D_);
    }

    PhysParams with_D(double D) const { return PhysParams(hbar_, mass_, D, gamma_); }
    PhysParams with_gamma(double gamma) const { return PhysParams(hbar_, mass_, D_, gamma); }

private:
    double hbar_ = 1.0;
    double mass_ = 1.0;
    double D_ = 0.0;
    double gamma_ = 0.0;
};

struct TimeScales {
    double tau_l = 0.0;       // localisation time sqrt(2 m hbar / D)
    double tau_s = 0.0;       // stochastic time p0^2 / D
    double t_positive = 0.0;  // (3/16)^{1/4} tau_l
    double relaxation = std::numeric_limits<double>::infinity();  // 1/gamma
    double energy = 0.0;      // E = p0^2 / 2m
    double hbar = 1.0;

    /// E tau_l / hbar, which equals tau_s / tau_l identically.
    double energy_ratio() const noexcept { return energy * tau_l / hbar; }
};

/// (3/16)^{1/4}: ratio of the positivity time to the localisation time.
inline double positivity_ratio() { return std::pow(3.0 / 16.0, 0.25); }

inline TimeScales derive_timescales(const PhysParams& params, double p0) {
    if (params.D() == 0.0)
        throw RegimeError("core_model", "unitary regime: localisation/stochastic times undefined");
    if (p0 == 0.0) throw InvalidArgument("core_model", "reference momentum p0 must be nonzero");
    TimeScales ts;
    ts.tau_l = std::sqrt(2.0 * params.mass() * params.hbar() / params.D());
    ts.tau_s = p0 * p0 / params.D();
    ts.t_positive = positivity_ratio() * ts.tau_l;
    ts.relaxation = params.gamma() > 0.0 ? 1.0 / params.gamma()
                                         : std::numeric_limits<double>::infinity();
    ts.energy = p0 * p0 / (2.0 * params.mass());
    ts.hbar = params.hbar();
    return ts;
}

struct ValidityWindow {
    double t_min = 0.0;
    double t_max = 0.0;

    bool contains(double t) const noexcept { return t >= t_min && t <= t_max; }
};

/// (t_positive, c * tau_s) with c the "much less than" factor.
inline ValidityWindow validity_window(const TimeScales& ts, const Thresholds& th = {}) {
    ValidityWindow w{ts.t_positive, th.much_less * ts.tau_s};
    if (!(w.t_min < w.t_max))
        throw RegimeError("core_model", "no near-deterministic validity window for these parameters");
    return w;
}

/// E tau_l / hbar >> 1, i.e. the window spans many localisation times.
inline bool has_wide_window(const TimeScales& ts, const Thresholds& th = {}) {
    return ts.energy_ratio() > th.much_greater;
}

struct Interval {
    double t1 = 0.0;
    double t2 = 1.0;

    Interval() = default;
    Interval(double a, double b) : t1(a), t2(b) {
        if (!(a >= 0.0)) throw InvalidArgument("core_model", "interval start must be >= 0");
        if (!(b > a)) throw InvalidArgument("core_model", "interval inverted: t2 must exceed t1");
    }

    double length() const noexcept { return t2 - t1; }
};

/// Phase-space point z = (p, q).
struct PhaseSpacePoint {
    double p = 0.0;
    double q = 0.0;

    friend PhaseSpacePoint operator+(PhaseSpacePoint a, PhaseSpacePoint b) { return {a.p + b.p, a.q + b.q}; }
    friend PhaseSpacePoint operator-(PhaseSpacePoint a, PhaseSpacePoint b) { return {a.p - b.p, a.q - b.q}; }
    friend PhaseSpacePoint operator*(double s, PhaseSpacePoint a) { return {s * a.p, s * a.q}; }
};

}  // namespace qat
