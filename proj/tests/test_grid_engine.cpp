#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "qat/gaussian_engine.hpp"
#include "qat/grid_engine.hpp"

using namespace qat;

namespace {

const PhysParams kUnit(1.0, 1.0, 2.0);
const PhysParams kFree(1.0, 1.0, 0.0);

double max_abs_diff(const PhaseSpaceGrid& a, const PhaseSpaceGrid& b) {
    return (a.values - b.values).cwiseAbs().maxCoeff();
}

// axis with a node exactly at 0
Axis axis_with_origin(double lo, int n, double h) { return Axis(lo, lo + (n - 1) * h, n); }

}  // namespace

TEST(Axis, Validation) {
    EXPECT_THROW(Axis(0, 1, 8), InvalidArgument);
    EXPECT_THROW(Axis(0, 1, 17), InvalidArgument);
    EXPECT_THROW(Axis(1, 0, 16), InvalidArgument);
    const Axis a(-1, 2, 16);
    EXPECT_DOUBLE_EQ(a.spacing(), 0.2);
    EXPECT_DOUBLE_EQ(a[15], 2.0);
}

TEST(Integrate, NormalizedGaussian) {
    const auto s = make_gaussian_state(0.3, -1.0, 0.7, kUnit);
    const auto w = sample_mixture(s, Axis(-8, 6, 256), Axis(-6, 6, 256));
    EXPECT_NEAR(integrate(w), 1.0, 1e-6);
}

TEST(Slice, PeakColumnForCenteredGaussian) {
    const auto s = make_gaussian_state(0.0, 0.0, 1.0, kUnit);
    const Axis qa = axis_with_origin(-8.0, 256, 0.0625);
    const auto w = sample_mixture(s, Axis(-4, 4, 64), qa);
    const auto sl = slice_at_q0(w);
    for (int i = 0; i < w.p_axis.size(); ++i) EXPECT_DOUBLE_EQ(sl[i], w.values(i, 128));
}

TEST(Slice, Linearity) {
    const Axis pa(-4, 4, 64), qa(-5, 5, 64);
    const auto w1 = sample_mixture(make_gaussian_state(0.4, 1.0, 0.8, kUnit), pa, qa);
    const auto w2 = sample_mixture(make_cat_state(2.0, -1.0, 0.5, kUnit), pa, qa);
    const auto comb = 0.3 * w1 + (-1.7) * w2;
    const auto s = slice_at_q0(comb), s1 = slice_at_q0(w1), s2 = slice_at_q0(w2);
    for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(s[i], 0.3 * s1[i] - 1.7 * s2[i], 1e-15);
    EXPECT_THROW(slice_at_q0(PhaseSpaceGrid(pa, Axis(1, 5, 16))), GridError);
}

TEST(WignerFromDensity, GroundStateIsMinimumUncertainty) {
    const double sigma = 0.8;
    const auto pk = gaussian_packet(0.0, 0.0, sigma, kUnit);
    const Axis xa(-8, 8, 256);
    const auto rho = density_from_wavefunction([&](double x) { return pk.psi(x); }, xa);
    const auto w = wigner_from_density(rho, Axis(-6, 6, 128), 1.0);
    const auto m = grid_moments(w);
    EXPECT_NEAR(m.norm, 1.0, 1e-6);
    EXPECT_NEAR(m.var_p * m.var_q - m.cov_pq * m.cov_pq, 0.25, 1e-6);
    // position marginal equals the density diagonal
    const auto mq = marginal_q(w);
    const auto diag = rho.diagonal();
    for (int j = 0; j < xa.size(); ++j) EXPECT_NEAR(mq[j], diag[j], 1e-8);
}

TEST(WignerFromDensity, ThermalMixtureNonNegative) {
    const Axis xa(-13, 13, 256);
    const auto a = gaussian_packet(-2.0, 1.0, 0.7, kUnit);
    const auto b = gaussian_packet(2.5, -0.5, 0.9, kUnit);
    auto rho = density_from_wavefunction([&](double x) { return a.psi(x); }, xa);
    const auto rb = density_from_wavefunction([&](double x) { return b.psi(x); }, xa);
    rho.values = 0.4 * rho.values + 0.6 * rb.values;
    const auto w = wigner_from_density(rho, Axis(-5, 5, 128), 1.0);
    EXPECT_GE(w.min_value(), -1e-10);
}

TEST(WignerFromDensity, NyquistGuard) {
    const DensityMatrixGrid rho(Axis(-8, 8, 64));
    EXPECT_THROW(wigner_from_density(rho, Axis(-20, 20, 64), 1.0), GridError);
}

TEST(DensityFromMixture, MatchesWavefunctionForCat) {
    const auto pk = cat_packet(3.0, -1.0, 0.6, kUnit, 0.5);
    const Axis xa(-6, 6, 128);
    const auto ref = density_from_wavefunction([&](double x) { return pk.psi(x); }, xa);
    const auto rho = density_from_mixture(pk.to_mixture(), xa);
    EXPECT_LT((rho.values - ref.values).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(DensityFromWigner, RoundTrip) {
    const auto s = make_gaussian_state(0.5, -1.0, 0.8, kUnit);
    const Axis xa(-6, 6, 96);
    const auto w = sample_mixture(s, Axis(-8, 6, 256), Axis(-7, 7, 512));
    const auto rho = density_from_wigner(w, xa, 1.0);
    const auto ref = density_from_mixture(s, xa);
    EXPECT_LT((rho.values - ref.values).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(QFunction, GaussianCovarianceAddsA0) {
    const auto s = make_gaussian_state(0.0, 0.5, 0.6, kUnit);
    const Axis pa(-8, 8, 200), qa(-8, 8, 200);
    const double sw = 0.9;
    const auto q = q_function_from_wigner(sample_mixture(s, pa, qa), sw, kUnit);
    const auto ref = sample_mixture(smooth_mixture(s, husimi_covariance(sw, kUnit)), pa, qa);
    EXPECT_LT(max_abs_diff(q, ref), 1e-8);
    const auto m = grid_moments(q);
    const auto a0 = husimi_covariance(sw, kUnit);
    const auto m0 = moments(s);
    EXPECT_NEAR(m.var_p, m0.cov.pp + a0.pp, 1e-6);
    EXPECT_NEAR(m.var_q, m0.cov.qq + a0.qq, 1e-6);
}

TEST(QFunction, CatStateNonNegative) {
    const auto s = make_cat_state(5.0, 0.0, 0.5, kUnit);
    const Axis pa(-8, 8, 160), qa(-8, 8, 160);
    const auto w = sample_mixture(s, pa, qa);
    ASSERT_LT(w.min_value(), -0.01);
    for (double sw : {0.3, 0.5, 1.0}) EXPECT_GE(q_function_from_wigner(w, sw, kUnit).min_value(), -1e-9) << sw;
}

TEST(PropagateDensity, FreeGaussianSpreading) {
    const double sigma = 0.6, t = 1.5, p0 = 0.8;
    const auto pk = gaussian_packet(-1.0, p0, sigma, kFree);
    const Axis xa(-12, 12, 256);
    const auto rho0 = density_from_wavefunction([&](double x) { return pk.psi(x); }, xa);
    const auto rho = propagate_density_qbm(rho0, t, kFree);
    // analytic: Gaussian with mean -1 + p0 t and variance sigma^2 + (t / 2 sigma)^2
    const double var = sigma * sigma + std::pow(t / (2.0 * sigma), 2);
    const double mean = -1.0 + p0 * t;
    for (int i = 0; i < xa.size(); ++i) {
        const double ref = std::exp(-0.5 * std::pow(xa[i] - mean, 2) / var) / std::sqrt(2.0 * std::numbers::pi * var);
        EXPECT_NEAR(rho.values(i, i).real(), ref, 1e-10);
    }
    EXPECT_LT(rho.hermiticity_error(), 1e-10);
}

TEST(PropagateDensity, MatchesEngineWithDecoherence) {
    const auto s = make_gaussian_state(-1.0, 1.0, 0.7, kUnit);
    const Axis xa(-14, 14, 256);
    const auto rho = propagate_density_qbm(density_from_mixture(s, xa), 1.0, kUnit);
    EXPECT_LT(rho.hermiticity_error(), 1e-10);
    EXPECT_NEAR(rho.trace().real(), 1.0, 1e-6);
    const Axis pa(-10, 10, 128);
    const auto w = wigner_from_density(rho, pa, 1.0);
    const auto ref = sample_mixture(propagate_mixture(s, 1.0), pa, xa);
    EXPECT_LT(max_abs_diff(w, ref), 1e-3 * ref.max_abs());
}

TEST(PropagateDensity, CoherenceDecayAcrossDistance) {
    // broad mixed state: X-dependence slow, decay set by exp(-D t d^2 / hbar^2)
    const Axis xa(-20, 20, 256);
    DensityMatrixGrid rho(xa);
    const double L = 5.0, s = 0.7;
    for (int i = 0; i < xa.size(); ++i)
        for (int j = 0; j < xa.size(); ++j) {
            const double X = 0.5 * (xa[i] + xa[j]), xi = xa[i] - xa[j];
            rho.values(i, j) = std::exp(-X * X / (2 * L * L) - xi * xi / (8 * s * s));
        }
    const double t = 0.05;
    const auto out = propagate_density_qbm(rho, t, kUnit, 0.0, {1e-6, false});
    const int c = xa.size() / 2;
    for (int k : {2, 4, 6}) {
        const double d = xa[c + k] - xa[c - k - 1];
        const double ratio = std::abs(out.values(c + k, c - k - 1)) / std::abs(rho.values(c + k, c - k - 1));
        EXPECT_NEAR(ratio, std::exp(-kUnit.D() * t * d * d), 2e-3) << d;
    }
}

TEST(PropagateDensity, LeakDetection) {
    const auto pk = gaussian_packet(0.0, 3.0, 0.5, kUnit);
    const Axis xa(-4, 4, 64);
    const auto rho = density_from_wavefunction([&](double x) { return pk.psi(x); }, xa);
    EXPECT_THROW(propagate_density_qbm(rho, 2.0, kUnit), GridError);
}

TEST(PropagateWigner, ZeroTimeAndNormalization) {
    const auto s = make_cat_state(4.0, -1.0, 0.7, kUnit);
    const auto box = propagate_mixture(s, 1.2).bounding_box(8.0);
    const Axis pa(box[0], box[1], 256), qa(std::min(box[2], -8.0), std::max(box[3], 8.0), 256);
    const auto w = sample_mixture(s, pa, qa);
    EXPECT_EQ(max_abs_diff(propagate_wigner_qbm(w, 0.0, kUnit), w), 0.0);
    EXPECT_NEAR(integrate(propagate_wigner_qbm(w, 1.2, kUnit)), integrate(w), 1e-6);
}

TEST(PropagateWigner, MatchesEngineAcrossTimes) {
    const auto s = make_cat_state(4.0, -1.0, 0.8, kUnit);
    for (double t : {0.1, 0.5, 1.0, 2.0, 3.0}) {
        const auto st = propagate_mixture(s, t);
        const auto box = st.bounding_box(8.0);
        const auto box0 = s.bounding_box(8.0);
        const Axis pa(std::min(box[0], box0[0]), std::max(box[1], box0[1]), 256);
        const Axis qa(std::min(box[2], box0[2]), std::max(box[3], box0[3]), 256);
        const auto w = propagate_wigner_qbm(sample_mixture(s, pa, qa), t, kUnit);
        const auto ref = sample_mixture(st, pa, qa);
        EXPECT_LT(max_abs_diff(w, ref), 1e-3 * ref.max_abs()) << t;
    }
}

TEST(PropagateWigner, FactoredAgreesWithDirectQuadrature) {
    const auto s = make_gaussian_state(0.0, -0.5, 0.8, kUnit);
    const Axis pa(-7, 6, 40), qa(-9, 8, 40);
    const auto w = sample_mixture(s, pa, qa);
    const double t = 0.8;
    const auto direct = propagate_wigner_qbm_direct(w, t, kUnit);
    const auto fact = propagate_wigner_qbm(w, t, kUnit, {1e-3, false});
    EXPECT_LT(max_abs_diff(direct, fact), 5e-3 * direct.max_abs());
    EXPECT_THROW(propagate_wigner_qbm_direct(w, t, kFree), RegimeError);
}

TEST(PropagateWigner, MomentumVarianceGrowth) {
    const auto s = make_gaussian_state(0.0, -2.0, 0.7, kUnit);
    const Axis pa(-18, 14, 256), qa(-40, 32, 256);
    const auto w0 = sample_mixture(s, pa, qa);
    const double v0 = grid_moments(w0).var_p;
    for (double t : {0.5, 1.5}) {
        const double vt = grid_moments(propagate_wigner_qbm(w0, t, kUnit)).var_p;
        EXPECT_NEAR((vt - v0) / (2.0 * kUnit.D() * t), 1.0, 1e-3) << t;
    }
}

TEST(PropagateWigner, LeakDetection) {
    const auto s = make_gaussian_state(0.0, -2.0, 0.7, kUnit);
    const Axis pa(-6, 2, 64), qa(-4, 4, 64);
    EXPECT_THROW(propagate_wigner_qbm(sample_mixture(s, pa, qa), 2.0, kUnit), GridError);
}

namespace {

struct RestrictedSetup {
    Axis pa{-24, 6, 256};
    Axis qa{-10, 16, 256};
    GaussianMixtureState state = make_gaussian_state(5.0, -10.0, 1.0, kUnit);
};

}  // namespace

TEST(Restricted, FarStateLosesNoNorm) {
    const RestrictedSetup r;
    const auto w = sample_mixture(r.state.translated({0.0, 3.0}), r.pa, r.qa);
    const auto out = propagate_wigner_restricted(w, 0.2, 0.05, kUnit);
    EXPECT_LT(std::abs(integrate(out) - integrate(w)), 1e-6);
}

TEST(Restricted, EpsRefinementConverges) {
    const RestrictedSetup r;
    const auto w = sample_mixture(r.state, r.pa, r.qa);
    const double n1 = integrate(propagate_wigner_restricted(w, 0.5, 0.05, kUnit));
    const double n2 = integrate(propagate_wigner_restricted(w, 0.5, 0.025, kUnit));
    EXPECT_LT(std::abs(n1 - n2) / n2, 0.02);
}

TEST(Restricted, BoundaryConditionAndMonotoneNorm) {
    const RestrictedSetup r;
    const auto w = sample_mixture(propagate_mixture(r.state, 0.3), r.pa, r.qa);
    const auto ev = restricted_evolution(w, 0.3, 0.02, kUnit);
    for (std::size_t k = 1; k < ev.norms.size(); ++k) EXPECT_LE(ev.norms[k], ev.norms[k - 1] + 1e-12);
    // just inside the boundary, right-moving momenta are nearly empty
    const auto slice = slice_at_q(ev.final, 0.3);
    const double peak = ev.final.max_abs();
    for (int i = 0; i < ev.final.p_axis.size(); ++i)
        if (ev.final.p_axis[i] > 0.5) EXPECT_LT(std::abs(slice[i]), 1e-3 * peak);
}

TEST(Restricted, StepValidation) {
    const RestrictedSetup r;
    const auto w = sample_mixture(r.state, r.pa, r.qa);
    EXPECT_THROW(propagate_wigner_restricted(w, 0.5, 0.0, kUnit), InvalidArgument);
    EXPECT_THROW(propagate_wigner_restricted(w, 0.5, 0.03, kUnit), InvalidArgument);
}

TEST(Csv, HeaderCarriesAxisMetadata) {
    PhaseSpaceGrid w(Axis(-1, 1, 16), Axis(0, 3, 16));
    std::ostringstream os;
    write_csv(os, w);
    const auto text = os.str();
    EXPECT_EQ(text.rfind("# p_min=-1,p_max=1,n_p=16,q_min=0,q_max=3,n_q=16\n", 0), 0u);
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 17);
}
