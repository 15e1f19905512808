#pragma once
// Sampled phase-space and position-space representations. These are the
// oracle side of every cross-check: uniform grids and trapezoid quadrature,
// nothing clever.

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <ostream>
#include <span>
#include <vector>

#include "qat/core_model.hpp"
#include "qat/error.hpp"

namespace qat {

using RealMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ComplexMatrix = Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Uniform axis with n points including both end points.
class Axis {
public:
    Axis() = default;
    Axis(double min, double max, int n) : min_(min), max_(max), n_(n) {
        if (n < 16) throw InvalidArgument("grid_engine", "axis needs at least 16 points");
        if (n % 2 != 0) throw InvalidArgument("grid_engine", "axis point count must be even");
        if (!(max > min)) throw InvalidArgument("grid_engine", "axis max must exceed min");
    }

    /// Axis symmetric about `center`.
    static Axis centered(double center, double half_width, int n) {
        return Axis(center - half_width, center + half_width, n);
    }

    double min() const noexcept { return min_; }
    double max() const noexcept { return max_; }
    int size() const noexcept { return n_; }
    double spacing() const noexcept { return (max_ - min_) / (n_ - 1); }
    double operator[](int i) const noexcept { return min_ + i * spacing(); }
    bool contains(double x) const noexcept { return x >= min_ && x <= max_; }

    /// Fractional index of x.
    double locate(double x) const noexcept { return (x - min_) / spacing(); }

    /// Trapezoid weight of node i.
    double weight(int i) const noexcept { return (i == 0 || i == n_ - 1) ? 0.5 * spacing() : spacing(); }

    friend bool operator==(const Axis& a, const Axis& b) {
        return a.n_ == b.n_ && a.min_ == b.min_ && a.max_ == b.max_;
    }

private:
    double min_ = -1.0;
    double max_ = 1.0;
    int n_ = 16;
};

/// W(p, q) sampled on p_axis x q_axis; rows index p, columns index q.
struct PhaseSpaceGrid {
    Axis p_axis;
    Axis q_axis;
    RealMatrix values;

    PhaseSpaceGrid() = default;
    PhaseSpaceGrid(Axis p, Axis q) : p_axis(p), q_axis(q), values(RealMatrix::Zero(p.size(), q.size())) {}

    double max_abs() const { return values.cwiseAbs().maxCoeff(); }
    double min_value() const { return values.minCoeff(); }

    friend PhaseSpaceGrid operator+(PhaseSpaceGrid a, const PhaseSpaceGrid& b) {
        a.values += b.values;
        return a;
    }
    friend PhaseSpaceGrid operator*(double s, PhaseSpaceGrid a) {
        a.values *= s;
        return a;
    }
};

/// rho(x, y) on a square position grid; rows index x, columns index y.
struct DensityMatrixGrid {
    Axis x_axis;
    ComplexMatrix values;

    DensityMatrixGrid() = default;
    explicit DensityMatrixGrid(Axis x) : x_axis(x), values(ComplexMatrix::Zero(x.size(), x.size())) {}

    const Axis& y_axis() const noexcept { return x_axis; }

    /// Trapezoid quadrature of the diagonal.
    std::complex<double> trace() const {
        std::complex<double> s = 0.0;
        for (int i = 0; i < x_axis.size(); ++i) s += x_axis.weight(i) * values(i, i);
        return s;
    }

    /// max |rho(x,y) - rho*(y,x)|
    double hermiticity_error() const { return (values - values.adjoint()).cwiseAbs().maxCoeff(); }

    std::vector<double> diagonal() const {
        std::vector<double> d(x_axis.size());
        for (int i = 0; i < x_axis.size(); ++i) d[i] = values(i, i).real();
        return d;
    }
};

/// Trapezoid rule over the whole grid.
inline double integrate(const PhaseSpaceGrid& w) {
    double s = 0.0;
    for (int i = 0; i < w.p_axis.size(); ++i) {
        double row = 0.0;
        for (int j = 0; j < w.q_axis.size(); ++j) row += w.q_axis.weight(j) * w.values(i, j);
        s += w.p_axis.weight(i) * row;
    }
    return s;
}

inline double integrate(std::span<const double> f, const Axis& axis) {
    double s = 0.0;
    for (int i = 0; i < axis.size(); ++i) s += axis.weight(i) * f[i];
    return s;
}

/// Momentum profile W(p, 0) by linear interpolation between the columns
/// bracketing q = 0.
inline std::vector<double> slice_at_q(const PhaseSpaceGrid& w, double q) {
    if (!w.q_axis.contains(q)) throw GridError("grid_engine", "slice position outside the q axis");
    const double s = w.q_axis.locate(q);
    int j = static_cast<int>(std::floor(s));
    if (j >= w.q_axis.size() - 1) j = w.q_axis.size() - 2;
    const double f = s - j;
    std::vector<double> out(w.p_axis.size());
    for (int i = 0; i < w.p_axis.size(); ++i) out[i] = (1.0 - f) * w.values(i, j) + f * w.values(i, j + 1);
    return out;
}

inline std::vector<double> slice_at_q0(const PhaseSpaceGrid& w) { return slice_at_q(w, 0.0); }

inline std::vector<double> marginal_q(const PhaseSpaceGrid& w) {
    std::vector<double> out(w.q_axis.size(), 0.0);
    for (int i = 0; i < w.p_axis.size(); ++i)
        for (int j = 0; j < w.q_axis.size(); ++j) out[j] += w.p_axis.weight(i) * w.values(i, j);
    return out;
}

inline std::vector<double> marginal_p(const PhaseSpaceGrid& w) {
    std::vector<double> out(w.p_axis.size(), 0.0);
    for (int i = 0; i < w.p_axis.size(); ++i)
        for (int j = 0; j < w.q_axis.size(); ++j) out[i] += w.q_axis.weight(j) * w.values(i, j);
    return out;
}

struct GridMoments {
    PhaseSpacePoint mean;
    double var_p = 0.0;
    double cov_pq = 0.0;
    double var_q = 0.0;
    double norm = 0.0;
};

inline GridMoments grid_moments(const PhaseSpaceGrid& w) {
    double n = 0, sp = 0, sq = 0, spp = 0, spq = 0, sqq = 0;
    for (int i = 0; i < w.p_axis.size(); ++i) {
        const double p = w.p_axis[i];
        for (int j = 0; j < w.q_axis.size(); ++j) {
            const double q = w.q_axis[j];
            const double v = w.p_axis.weight(i) * w.q_axis.weight(j) * w.values(i, j);
            n += v;
            sp += v * p;
            sq += v * q;
            spp += v * p * p;
            spq += v * p * q;
            sqq += v * q * q;
        }
    }
    GridMoments m;
    m.norm = n;
    m.mean = {sp / n, sq / n};
    m.var_p = spp / n - m.mean.p * m.mean.p;
    m.cov_pq = spq / n - m.mean.p * m.mean.q;
    m.var_q = sqq / n - m.mean.q * m.mean.q;
    return m;
}

/// Header line with axis metadata, then one row per p value.
inline void write_csv(std::ostream& os, const PhaseSpaceGrid& w) {
    os.precision(12);
    os << "# p_min=" << w.p_axis.min() << ",p_max=" << w.p_axis.max() << ",n_p=" << w.p_axis.size()
       << ",q_min=" << w.q_axis.min() << ",q_max=" << w.q_axis.max() << ",n_q=" << w.q_axis.size() << '\n';
    for (int i = 0; i < w.p_axis.size(); ++i) {
        for (int j = 0; j < w.q_axis.size(); ++j) os << (j ? "," : "") << w.values(i, j);
        os << '\n';
    }
}

inline void write_csv(std::ostream& os, const DensityMatrixGrid& rho) {
    os.precision(12);
    os << "# x_min=" << rho.x_axis.min() << ",x_max=" << rho.x_axis.max() << ",n_x=" << rho.x_axis.size()
       << ",layout=re_im_pairs\n";
    for (int i = 0; i < rho.x_axis.size(); ++i) {
        for (int j = 0; j < rho.x_axis.size(); ++j)
            os << (j ? "," : "") << rho.values(i, j).real() << ',' << rho.values(i, j).imag();
        os << '\n';
    }
}

}  // namespace qat
