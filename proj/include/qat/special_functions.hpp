#pragma once

#include <cmath>
#include <complex>
#include <numbers>

namespace qat {

/// Sine integral Si(x) = \int_0^x sin(y)/y dy.
///
/// |x| < 4 uses the Taylor series (terms never exceed ~10 so no cancellation).
/// |x| >= 4 uses the continued fraction for E1(ix), Si(x) = pi/2 + Im[e^{-ix} h],
/// which converges to machine precision in a few dozen iterations.
inline double sine_integral(double x) {
    if (x < 0.0) return -sine_integral(-x);
    if (x == 0.0) return 0.0;
    if (x < 4.0) {
        const double x2 = x * x;
        double term = x;  // x^{2n+1}/(2n+1)!
        double sum = x;
        for (int n = 1; n < 60; ++n) {
            term *= -x2 / ((2.0 * n) * (2.0 * n + 1.0));
            const double add = term / (2.0 * n + 1.0);
            sum += add;
            if (std::abs(add) < 1e-17 * std::abs(sum)) break;
        }
        return sum;
    }
    using C = std::complex<double>;
    constexpr double tiny = 1e-300;
    C b(1.0, x);
    C c(1.0 / tiny, 0.0);
    C d = 1.0 / b;
    C h = d;
    for (int i = 2; i < 500; ++i) {
        const double a = -static_cast<double>((i - 1) * (i - 1));
        b += 2.0;
        d = 1.0 / (a * d + b);
        c = b + a / c;
        const C del = c * d;
        h *= del;
        if (std::abs(del.real() - 1.0) + std::abs(del.imag()) < 1e-16) break;
    }
    h *= C(std::cos(x), -std::sin(x));
    return std::numbers::pi / 2.0 + h.imag();
}

/// f(u) = (1/pi) \int_u^\infty sin(y)/y dy = 1/2 - Si(u)/pi.
/// f(-inf) = 1, f(0) = 1/2, f(+inf) = 0.
inline double f_integral(double u) { return 0.5 - sine_integral(u) / std::numbers::pi; }

}  // namespace qat
