#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "samg/geometry.hpp"
#include "samg/schedule.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>

using namespace samg;

namespace {

Eigen::VectorXd basis(int dim, int axis, double scale = 1.0) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
    v[axis] = scale;
    return v;
}

std::vector<double> log_spaced(double lo, double hi, int n) {
    std::vector<double> out;
    for (int i = 0; i < n; ++i)
        out.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1)));
    return out;
}

PixelGMM random_gmm_2d(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> mean_dist(-2.0, 2.0);
    std::uniform_real_distribution<double> sigma_dist(0.3, 1.0);
    const int k = 1 + static_cast<int>(rng() % 3);
    Eigen::MatrixXd means(2, k);
    for (int j = 0; j < k; ++j) {
        means(0, j) = mean_dist(rng);
        means(1, j) = mean_dist(rng);
    }
    Eigen::VectorXd w(k);
    std::uniform_real_distribution<double> wd(0.2, 1.0);
    for (int j = 0; j < k; ++j) w[j] = wd(rng);
    w /= w.sum();
    return PixelGMM(means, sigma_dist(rng), w);
}

}  // namespace

TEST_CASE("sphere_exp") {
    SphereManifold circle(1.0, 2);

    SUBCASE("zero step returns the start point") {
        Eigen::VectorXd p = basis(2, 0);
        Eigen::VectorXd v = basis(2, 1);
        CHECK((sphere_exp(circle, p, v, 0.0) - p).norm() == 0.0);
    }
    SUBCASE("quarter circle") {
        Eigen::VectorXd out = sphere_exp(circle, basis(2, 0), basis(2, 1),
                                         3.14159265358979323846 / 2.0);
        CHECK(out[0] == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(out[1] == doctest::Approx(1.0));
    }
    SUBCASE("stays on the sphere for random tangents") {
        std::mt19937_64 rng(61);
        std::normal_distribution<double> normal;
        for (double radius : {0.5, 1.0, 3.0}) {
            for (int d : {2, 3, 8}) {
                SphereManifold m(radius, d);
                Eigen::VectorXd p(d), dir(d);
                for (int i = 0; i < d; ++i) p[i] = normal(rng);
                p *= radius / p.norm();
                for (int i = 0; i < d; ++i) dir[i] = normal(rng);
                Eigen::VectorXd v = dir - dir.dot(p) / p.squaredNorm() * p;
                v.normalize();
                const double s = 0.3 * radius;
                CHECK(sphere_exp(m, p, v, s).norm() == doctest::Approx(radius).epsilon(1e-12));
            }
        }
    }
    SUBCASE("preconditions are enforced") {
        Eigen::VectorXd off_sphere = basis(2, 0, 1.5);
        Eigen::VectorXd v = basis(2, 1);
        CHECK_THROWS_AS(sphere_exp(circle, off_sphere, v, 0.1), std::invalid_argument);
        Eigen::VectorXd p = basis(2, 0);
        Eigen::VectorXd not_tangent = basis(2, 0);
        CHECK_THROWS_AS(sphere_exp(circle, p, not_tangent, 0.1), std::invalid_argument);
        Eigen::VectorXd not_unit = basis(2, 1, 2.0);
        CHECK_THROWS_AS(sphere_exp(circle, p, not_unit, 0.1), std::invalid_argument);
    }
}

TEST_CASE("linear_vs_geodesic_deviation") {
    SphereManifold circle(1.0, 2);
    Eigen::VectorXd p = basis(2, 0);
    Eigen::VectorXd v = basis(2, 1);

    SUBCASE("unit circle hand value at s = 0.1") {
        const double dev = linear_vs_geodesic_deviation(circle, p, v, 0.1);
        const double expected = std::sqrt(std::pow(1.0 - std::cos(0.1), 2) +
                                          std::pow(0.1 - std::sin(0.1), 2));
        CHECK(dev == doctest::Approx(expected).epsilon(1e-14));
        CHECK(dev == doctest::Approx(0.0049986).epsilon(1e-4));
        CHECK(dev == doctest::Approx(0.005).epsilon(2e-3));  // half kappa s^2
    }
    SUBCASE("zero step gives zero deviation") {
        CHECK(linear_vs_geodesic_deviation(circle, p, v, 0.0) == 0.0);
    }
    SUBCASE("doubling the radius halves the deviation at fixed s") {
        SphereManifold big(2.0, 2);
        Eigen::VectorXd p2 = basis(2, 0, 2.0);
        const double small_dev = linear_vs_geodesic_deviation(circle, p, v, 0.05);
        const double big_dev = linear_vs_geodesic_deviation(big, p2, v, 0.05);
        CHECK(small_dev / big_dev == doctest::Approx(2.0).epsilon(1e-3));
    }
}

TEST_CASE("fit_deviation_law recovers the quadratic small-step law") {
    for (double radius : {0.5, 1.0, 2.0}) {
        for (int d : {2, 3, 8}) {
            SphereManifold m(radius, d);
            const auto report =
                fit_deviation_law(m, log_spaced(1e-3 * radius, 1e-1 * radius, 24));
            CHECK(report.exponent == doctest::Approx(2.0).epsilon(0.01));
            CHECK(report.coefficient ==
                  doctest::Approx(1.0 / (2.0 * radius)).epsilon(0.01));
            CHECK(report.kappa_half_reference == doctest::Approx(1.0 / (2.0 * radius)));
        }
    }
    SUBCASE("input validation") {
        SphereManifold m(1.0, 2);
        CHECK_THROWS_AS(fit_deviation_law(m, {0.01, 0.1}), std::invalid_argument);
        CHECK_THROWS_AS(fit_deviation_law(m, {0.01, 0.02, 0.03}), std::invalid_argument);
    }
}

TEST_CASE("ideal_omega") {
    CHECK(ideal_omega(0.005, 1.0, 0.01, 1.0) == doctest::Approx(1.0));
    CHECK(ideal_omega(0.005, 1.0, 1.0, 0.01) == doctest::Approx(1.0));
    SUBCASE("quadrupling the energy halves the scale") {
        const double base = ideal_omega(0.01, 2.0, 0.5, 1.0);
        CHECK(ideal_omega(0.01, 2.0, 0.5, 4.0) == doctest::Approx(base / 2.0));
    }
    SUBCASE("zero-tolerance limit") {
        CHECK(ideal_omega(1e-12, 1.0, 1.0, 1.0) == doctest::Approx(0.0).epsilon(1e-5));
    }
    CHECK_THROWS_AS(ideal_omega(0.0, 1.0, 1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(ideal_omega(0.1, -1.0, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("gronwall bound and recursion") {
    SUBCASE("worked example") {
        CHECK(gronwall_bound(0.01, 1.0, 0.1, 10) == doctest::Approx(0.171828).epsilon(1e-5));
        CHECK(simulate_error_recursion(0.01, 1.0, 0.1, 10) ==
              doctest::Approx(0.15937).epsilon(1e-4));
    }
    SUBCASE("degenerate step counts") {
        CHECK(gronwall_bound(0.01, 1.0, 0.1, 0) == 0.0);
        CHECK(simulate_error_recursion(0.01, 1.0, 0.1, 0) == 0.0);
        CHECK(simulate_error_recursion(0.5, 2.0, 0.3, 1) == doctest::Approx(0.5));
    }
    SUBCASE("recursion never exceeds the closed form over random parameters") {
        std::mt19937_64 rng(1234);
        std::uniform_real_distribution<double> delta_dist(1e-6, 1.0);
        std::uniform_real_distribution<double> l_dist(0.01, 5.0);
        std::uniform_real_distribution<double> h_dist(1e-4, 0.5);
        for (int trial = 0; trial < 1000; ++trial) {
            const double delta = delta_dist(rng);
            const double lipschitz = l_dist(rng);
            const double h = h_dist(rng);
            const int n = static_cast<int>(rng() % 1000) + 1;
            const double rec = simulate_error_recursion(delta, lipschitz, h, n);
            const double bound = gronwall_bound(delta, lipschitz, h, n);
            REQUIRE(rec <= bound * (1.0 + 1e-12));
        }
    }
}

TEST_CASE("level_set_curvature") {
    SUBCASE("isotropic Gaussian level sets are circles of curvature 1/r") {
        const double s2 = 0.49, r = 1.7;
        Eigen::VectorXd z = basis(2, 0, r);
        Eigen::VectorXd grad = -z / s2;
        Eigen::MatrixXd hess = -Eigen::MatrixXd::Identity(2, 2) / s2;
        Eigen::VectorXd v = basis(2, 1);
        CHECK(level_set_curvature(grad, hess, v) == doctest::Approx(1.0 / r).epsilon(1e-12));
    }
    SUBCASE("linear in the Hessian, inverse in the gradient") {
        Eigen::VectorXd grad = basis(3, 0, 2.0);
        Eigen::MatrixXd hess = Eigen::MatrixXd::Identity(3, 3) * -0.8;
        Eigen::VectorXd v = basis(3, 1);
        const double kappa = level_set_curvature(grad, hess, v);
        CHECK(level_set_curvature(grad, Eigen::MatrixXd(3.0 * hess), v) ==
              doctest::Approx(3.0 * kappa));
        CHECK(level_set_curvature(Eigen::VectorXd(5.0 * grad), hess, v) ==
              doctest::Approx(kappa / 5.0));
    }
    SUBCASE("preconditions") {
        Eigen::VectorXd zero = Eigen::VectorXd::Zero(2);
        Eigen::MatrixXd hess = Eigen::MatrixXd::Identity(2, 2);
        CHECK_THROWS_AS(level_set_curvature(zero, hess, basis(2, 1)), std::invalid_argument);
        CHECK_THROWS_AS(level_set_curvature(basis(2, 0), hess, basis(2, 0)),
                        std::invalid_argument);  // not tangent
        CHECK_THROWS_AS(level_set_curvature(basis(2, 0), hess, basis(2, 1, 0.5)),
                        std::invalid_argument);  // not unit
    }
}

namespace {

/// Random symmetric matrix with a controlled relative gap between the top two
/// |eigenvalues|, so the fixed power-iteration budget provably converges.
Eigen::MatrixXd gapped_symmetric(std::mt19937_64& rng, int n, double gap = 0.1) {
    std::normal_distribution<double> normal;
    Eigen::MatrixXd a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = normal(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ();
    Eigen::VectorXd eig(n);
    eig[0] = ((rng() % 2 == 0) ? 1.0 : -1.0) * (1.0 + normal(rng) * normal(rng));
    for (int i = 1; i < n; ++i) {
        std::uniform_real_distribution<double> frac(-1.0 + gap, 1.0 - gap);
        eig[i] = std::abs(eig[0]) * frac(rng);
    }
    return q * eig.asDiagonal() * q.transpose();
}

}  // namespace

TEST_CASE("power iteration matches the dense eigensolver") {
    std::mt19937_64 rng(99);
    SUBCASE("gap-controlled spectra converge to full precision") {
        for (int trial = 0; trial < 200; ++trial) {
            const int n = 2 + static_cast<int>(rng() % 7);
            Eigen::MatrixXd sym = gapped_symmetric(rng, n);
            const double rho = power_iteration_spectral_norm(sym);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
            const double expected = es.eigenvalues().cwiseAbs().maxCoeff();
            CHECK(rho == doctest::Approx(expected).epsilon(1e-6));
        }
    }
    SUBCASE("arbitrary spectra stay within the cluster envelope") {
        std::normal_distribution<double> normal;
        for (int trial = 0; trial < 200; ++trial) {
            const int n = 2 + static_cast<int>(rng() % 7);
            Eigen::MatrixXd a(n, n);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) a(i, j) = normal(rng);
            Eigen::MatrixXd sym = 0.5 * (a + a.transpose());
            const double rho = power_iteration_spectral_norm(sym);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
            const double expected = es.eigenvalues().cwiseAbs().maxCoeff();
            CHECK(rho <= expected * (1.0 + 1e-9));
            CHECK(rho >= expected * (1.0 - 1e-2));
        }
    }
    SUBCASE("zero matrix") {
        CHECK(power_iteration_spectral_norm(Eigen::MatrixXd(Eigen::MatrixXd::Zero(3, 3))) ==
              0.0);
    }
}

TEST_CASE("Rayleigh extremum: top eigenvector direction attains the spectral bound") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 2 + static_cast<int>(rng() % 3);
        Eigen::MatrixXd sym = gapped_symmetric(rng, n);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
        int top = 0;
        for (int i = 1; i < n; ++i)
            if (std::abs(es.eigenvalues()[i]) > std::abs(es.eigenvalues()[top])) top = i;
        Eigen::VectorXd v = es.eigenvectors().col(top);
        // any gradient orthogonal to v keeps v tangent
        Eigen::VectorXd grad = es.eigenvectors().col((top + 1) % n) * 2.3;
        const double kappa = level_set_curvature(grad, sym, v);
        const double bound = power_iteration_spectral_norm(sym) / grad.norm();
        CHECK(kappa == doctest::Approx(bound).epsilon(1e-6));
    }
}

TEST_CASE("verify_spectral_bound") {
    auto schedule = linear_beta_schedule(100, 1e-3, 0.05);

    SUBCASE("isotropic Gaussian: the bound is tight") {
        Eigen::MatrixXd means(2, 1);
        means.setZero();
        PixelGMM m(means, 0.7, Eigen::VectorXd::Ones(1));
        std::vector<Eigen::VectorXd> points;
        std::mt19937_64 rng(3);
        std::normal_distribution<double> normal;
        for (int i = 0; i < 100; ++i) {
            Eigen::VectorXd z(2);
            z << normal(rng), normal(rng);
            if (z.norm() > 0.1) points.push_back(z);
        }
        const auto report = verify_spectral_bound(m, points, schedule, 50);
        CHECK(report.violations == 0);
        // single component: delta score vanishes, so every point is skipped
        // for lack of a tangent unless we widen the direction; equality is
        // exercised through the level-set route below.
        CHECK(report.points_tested + report.skipped_small_tangent +
                  report.skipped_small_score ==
              report.points_requested);
    }

    SUBCASE("random 2D mixtures: zero violations over 1000 points") {
        std::mt19937_64 rng(2718);
        std::normal_distribution<double> normal;
        long tested = 0, violations = 0;
        while (tested < 1000) {
            PixelGMM m = random_gmm_2d(rng);
            std::vector<Eigen::VectorXd> points;
            for (int i = 0; i < 50; ++i) {
                Eigen::VectorXd z(2);
                z << 1.5 * normal(rng), 1.5 * normal(rng);
                points.push_back(z);
            }
            const int t = 1 + static_cast<int>(rng() % 100);
            const auto report = verify_spectral_bound(m, points, schedule, t);
            tested += report.points_tested;
            violations += report.violations;
        }
        CHECK(violations == 0);
    }

    SUBCASE("corrupted curvature-side Hessian breaks the bound") {
        std::mt19937_64 rng(555);
        std::normal_distribution<double> normal;
        Eigen::MatrixXd means(2, 2);
        means << 1.5, -1.5, 0.0, 0.0;
        Eigen::VectorXd w(2);
        w << 0.5, 0.5;
        PixelGMM m(means, 0.4, w);
        std::vector<Eigen::VectorXd> points;
        for (int i = 0; i < 200; ++i) {
            Eigen::VectorXd z(2);
            z << 1.5 * normal(rng), 1.5 * normal(rng);
            points.push_back(z);
        }
        SpectralBoundOptions corrupt;
        corrupt.corrupt_hessian_sign = true;
        const auto report = verify_spectral_bound(m, points, schedule, 60, corrupt);
        CHECK(report.violations > 0);
    }
}

TEST_CASE("jensen_smoothing_check") {
    SUBCASE("1-D spike") {
        EnergyMap e(1, 3);
        e(0, 0) = 0.0;
        e(0, 1) = 10.0;
        e(0, 2) = 0.0;
        const auto report = jensen_smoothing_check(e, 3);
        CHECK(report.maxima_checked == 1);
        CHECK(report.energy_violations == 0);
        CHECK(report.scale_violations == 0);
        // the hand values behind the report
        const EnergyMap smoothed = box_smooth(e, 3);
        CHECK(smoothed(0, 1) == doctest::Approx(10.0 / 3.0));
        CHECK(1.0 / std::sqrt(smoothed(0, 1)) == doctest::Approx(0.5477).epsilon(1e-3));
        CHECK(1.0 / std::sqrt(e(0, 1)) == doctest::Approx(0.3162).epsilon(1e-3));
    }
    SUBCASE("constant map passes vacuously") {
        EnergyMap e(4, 4);
        e.array().setConstant(1.0);
        const auto report = jensen_smoothing_check(e, 3);
        CHECK(report.maxima_checked == 0);
        CHECK(report.energy_violations == 0);
    }
    SUBCASE("500 random maps with planted spikes") {
        std::mt19937_64 rng(424242);
        std::uniform_real_distribution<double> base_dist(0.0, 1.0);
        long maxima = 0;
        for (int trial = 0; trial < 500; ++trial) {
            const Eigen::Index h = 5 + static_cast<Eigen::Index>(rng() % 8);
            const Eigen::Index w = 5 + static_cast<Eigen::Index>(rng() % 8);
            EnergyMap e(h, w);
            for (Eigen::Index y = 0; y < h; ++y)
                for (Eigen::Index x = 0; x < w; ++x) e(y, x) = base_dist(rng);
            const Eigen::Index sy = 1 + static_cast<Eigen::Index>(rng() % (h - 2));
            const Eigen::Index sx = 1 + static_cast<Eigen::Index>(rng() % (w - 2));
            e(sy, sx) = 2.0 + base_dist(rng);  // dominates every neighbor
            const auto report = jensen_smoothing_check(e, 3);
            maxima += report.maxima_checked;
            REQUIRE(report.maxima_checked >= 1);
            REQUIRE(report.energy_violations == 0);
            REQUIRE(report.scale_violations == 0);
        }
        CHECK(maxima >= 500);
    }
    SUBCASE("kernel validation") {
        EnergyMap e(3, 3);
        CHECK_THROWS_AS(jensen_smoothing_check(e, 1), std::invalid_argument);
        CHECK_THROWS_AS(jensen_smoothing_check(e, 4), std::invalid_argument);
    }
}

TEST_CASE("flow truncation bound and its inverse") {
    CHECK(flow_truncation_bound(1.0, 1.0, 0.1, 1, 1.0) == doctest::Approx(0.005));
    SUBCASE("halving dt quarters the bound") {
        const double full = flow_truncation_bound(2.0, 3.0, 0.2, 4, 0.7);
        const double half = flow_truncation_bound(2.0, 3.0, 0.1, 4, 0.7);
        CHECK(full / half == doctest::Approx(4.0));
    }
    SUBCASE("omega limit is consistent with the direct bound") {
        const double omega = flow_omega_limit(0.005, 1.0, 0.1, 1, 1.0);
        CHECK(omega == doctest::Approx(1.0));
        CHECK(flow_truncation_bound(1.0, omega, 0.1, 1, 1.0) == doctest::Approx(0.005));
    }
    CHECK_THROWS_AS(flow_truncation_bound(0.0, 1.0, 0.1, 1, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(flow_omega_limit(0.005, 1.0, 0.0, 1, 1.0), std::invalid_argument);
}
