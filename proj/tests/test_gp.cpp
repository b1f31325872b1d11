#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ledro/errors.hpp"
#include "ledro/gp.hpp"

using namespace ledro;

namespace {

GpHyper make_hyper(int d, double ls, double sf2, double sn2) {
    GpHyper h;
    h.log_ls = Eigen::VectorXd::Constant(d, std::log(ls));
    h.log_sf2 = std::log(sf2);
    h.log_sn2 = std::log(sn2);
    return h;
}

} // namespace

TEST_CASE("log marginal likelihood matches a hand computation on 3 points") {
    // 1-d fixture, worked by cofactor expansion instead of a factorization:
    // lml = -1/2 y^T K^-1 y - 1/2 log det K - (3/2) log 2pi.
    const double x0 = 0.10, x1 = 0.35, x2 = 0.80;
    const double y0 = 0.3, y1 = -0.2, y2 = 0.6;
    const double ls = 0.25, sf2 = 1.3, sn2 = 0.05;

    auto kf = [&](double a, double b) {
        const double s = std::sqrt(5.0) * std::abs(a - b) / ls;
        return sf2 * (1.0 + s + s * s / 3.0) * std::exp(-s);
    };
    const double d = sf2 + sn2;
    const double k01 = kf(x0, x1), k02 = kf(x0, x2), k12 = kf(x1, x2);
    // Sarrus determinant of the symmetric 3x3.
    const double det = d * (d * d - k12 * k12) - k01 * (k01 * d - k12 * k02)
                       + k02 * (k01 * k12 - d * k02);
    // Adjugate entries (inverse = adj / det).
    const double c00 = d * d - k12 * k12;
    const double c01 = -(k01 * d - k12 * k02);
    const double c02 = k01 * k12 - d * k02;
    const double c11 = d * d - k02 * k02;
    const double c12 = -(d * k12 - k01 * k02);
    const double c22 = d * d - k01 * k01;
    const double quad = (y0 * (c00 * y0 + c01 * y1 + c02 * y2)
                         + y1 * (c01 * y0 + c11 * y1 + c12 * y2)
                         + y2 * (c02 * y0 + c12 * y1 + c22 * y2))
                        / det;
    const double expected = -0.5 * quad - 0.5 * std::log(det)
                            - 1.5 * std::log(2.0 * M_PI);

    Eigen::MatrixXd x(3, 1);
    x << x0, x1, x2;
    Eigen::VectorXd y(3);
    y << y0, y1, y2;
    const double got = gp_log_marginal(x, y, make_hyper(1, ls, sf2, sn2));
    CHECK(got == doctest::Approx(expected).epsilon(1e-8));
}

TEST_CASE("log marginal gradient matches central finite differences") {
    Eigen::MatrixXd x(7, 2);
    x << 0.12, 0.90, 0.48, 0.33, 0.77, 0.61, 0.05, 0.18,
         0.95, 0.52, 0.30, 0.74, 0.66, 0.09;
    Eigen::VectorXd y(7);
    y << 0.4, -0.3, 0.9, 0.1, -0.7, 0.5, 0.2;
    GpHyper h = make_hyper(2, 0.35, 1.2, 0.02);
    h.log_ls[1] = std::log(0.6);

    GpHyper grad;
    gp_log_marginal(x, y, h, &grad);

    const double fd_h = 1e-5;
    auto check = [&](double got, double* slot) {
        const double saved = *slot;
        *slot = saved + fd_h;
        const double up = gp_log_marginal(x, y, h);
        *slot = saved - fd_h;
        const double dn = gp_log_marginal(x, y, h);
        *slot = saved;
        const double fd = (up - dn) / (2.0 * fd_h);
        CHECK(got == doctest::Approx(fd).epsilon(1e-4));
    };
    check(grad.log_ls[0], &h.log_ls[0]);
    check(grad.log_ls[1], &h.log_ls[1]);
    check(grad.log_sf2, &h.log_sf2);
    check(grad.log_sn2, &h.log_sn2);
}

TEST_CASE("posterior mean interpolates training data at the noise floor") {
    Eigen::MatrixXd x(8, 1);
    x << 0.05, 0.18, 0.31, 0.44, 0.57, 0.70, 0.83, 0.96;
    Eigen::VectorXd y(8);
    for (int i = 0; i < 8; ++i) y[i] = std::sin(3.0 * x(i, 0)) + 0.5 * x(i, 0);

    GaussianProcess gp;
    gp.set_hyper(make_hyper(1, 0.3, 1.0, 1e-8));
    gp.condition(x, y);
    for (int i = 0; i < 8; ++i) {
        CHECK(gp.posterior_mean(x.row(i)) == doctest::Approx(y[i]).epsilon(1e-6));
    }
}

TEST_CASE("posterior mean gradient matches central finite differences") {
    Eigen::MatrixXd x(10, 2);
    Rng rng(42u);
    Eigen::VectorXd y(10);
    for (int i = 0; i < 10; ++i) {
        x(i, 0) = rng.uniform();
        x(i, 1) = rng.uniform();
        y[i] = std::cos(2.0 * x(i, 0)) * (1.0 + x(i, 1)) + 0.1 * x(i, 1);
    }
    GaussianProcess gp;
    gp.set_hyper(make_hyper(2, 0.4, 1.0, 1e-6));
    gp.condition(x, y);

    for (double qx : {0.25, 0.6}) {
        Eigen::VectorXd q(2);
        q << qx, 0.45;
        const Eigen::VectorXd grad = gp.posterior_mean_grad(q);
        for (int j = 0; j < 2; ++j) {
            Eigen::VectorXd up = q, dn = q;
            up[j] += 1e-6;
            dn[j] -= 1e-6;
            const double fd = (gp.posterior_mean(up) - gp.posterior_mean(dn)) / 2e-6;
            CHECK(grad[j] == doctest::Approx(fd).epsilon(1e-4));
        }
    }
}

TEST_CASE("all-equal values fall back to prior hyperparameters") {
    Eigen::MatrixXd x(5, 2);
    x << 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.1;
    Eigen::VectorXd y = Eigen::VectorXd::Constant(5, 1.7);

    GaussianProcess gp;
    gp.fit(x, y, 99u);
    CHECK(gp.prior_fallback());
    Eigen::VectorXd q(2);
    q << 0.55, 0.55;
    CHECK(gp.posterior_mean(q) == doctest::Approx(1.7).epsilon(1e-9));
}

TEST_CASE("fit is deterministic for a fixed seed") {
    Rng rng(7u);
    const int n = 40;
    Eigen::MatrixXd x(n, 2);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        x(i, 0) = rng.uniform();
        x(i, 1) = rng.uniform();
        y[i] = -std::pow(x(i, 0) - 0.3, 2) - 2.0 * std::pow(x(i, 1) - 0.7, 2)
               + 0.01 * rng.normal();
    }
    GpConfig cfg;
    cfg.hyperfit_subsample = 24;  // force the subsample path
    GaussianProcess a(cfg), b(cfg);
    a.fit(x, y, 1234u);
    b.fit(x, y, 1234u);
    CHECK(a.hyper().log_ls == b.hyper().log_ls);
    CHECK(a.hyper().log_sf2 == b.hyper().log_sf2);
    CHECK(a.hyper().log_sn2 == b.hyper().log_sn2);
    CHECK_FALSE(a.prior_fallback());

    Eigen::VectorXd q(2);
    q << 0.3, 0.7;
    CHECK(a.posterior_mean(q) == b.posterior_mean(q));
}

TEST_CASE("fitted model tracks a smooth target") {
    // Fit on a clean quadratic; the posterior mean should predict held-out
    // points far better than the constant-mean baseline.
    Rng rng(11u);
    const int n = 60;
    Eigen::MatrixXd x(n, 1);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        x(i, 0) = rng.uniform();
        y[i] = -4.0 * std::pow(x(i, 0) - 0.4, 2);
    }
    GaussianProcess gp;
    gp.fit(x, y, 5u);

    double err = 0.0, base = 0.0;
    const double mean_y = y.mean();
    for (int i = 0; i < 50; ++i) {
        Eigen::VectorXd q(1);
        q << (i + 0.5) / 50.0;
        const double truth = -4.0 * std::pow(q[0] - 0.4, 2);
        err += std::abs(gp.posterior_mean(q) - truth);
        base += std::abs(mean_y - truth);
    }
    CHECK(err < 0.05 * base);
}

TEST_CASE("joint samples are deterministic per rng stream and track the data") {
    Eigen::MatrixXd x(6, 1);
    x << 0.0, 0.2, 0.4, 0.6, 0.8, 1.0;
    Eigen::VectorXd y(6);
    y << 0.0, 0.5, 0.8, 0.7, 0.3, -0.1;
    GaussianProcess gp;
    gp.set_hyper(make_hyper(1, 0.3, 1.0, 1e-7));
    gp.condition(x, y);

    Rng r1(21u), r2(21u), r3(22u);
    const Eigen::VectorXd s1 = gp.sample_joint(x, r1);
    const Eigen::VectorXd s2 = gp.sample_joint(x, r2);
    const Eigen::VectorXd s3 = gp.sample_joint(x, r3);
    CHECK(s1 == s2);
    CHECK(s1 != s3);
    // At the training inputs with near-zero noise the posterior is pinned.
    for (int i = 0; i < 6; ++i) {
        CHECK(s1[i] == doctest::Approx(y[i]).epsilon(1e-2));
    }
}

TEST_CASE("conditioning cap keeps the model usable on large histories") {
    Rng rng(3u);
    const int n = 900;
    Eigen::MatrixXd x(n, 1);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        x(i, 0) = rng.uniform();
        y[i] = std::sin(6.0 * x(i, 0));
    }
    GpConfig cfg;
    cfg.conditioning_cap = 128;
    GaussianProcess gp(cfg);
    gp.set_hyper(make_hyper(1, 0.2, 1.0, 1e-4));
    gp.condition(x, y);

    double err = 0.0;
    for (int i = 0; i < 40; ++i) {
        Eigen::VectorXd q(1);
        q << (i + 0.5) / 40.0;
        err = std::max(err, std::abs(gp.posterior_mean(q) - std::sin(6.0 * q[0])));
    }
    CHECK(err < 0.05);
}

TEST_CASE("shape and precondition errors") {
    GaussianProcess gp;
    Eigen::MatrixXd x(1, 1);
    x << 0.5;
    Eigen::VectorXd y(1);
    y << 1.0;
    CHECK_THROWS_AS(gp.fit(x, y, 0u), ConfigError);

    Eigen::VectorXd q(1);
    q << 0.5;
    CHECK_THROWS_AS(gp.posterior_mean(q), ConfigError);

    Eigen::MatrixXd x2(3, 2);
    x2.setConstant(0.25);
    Eigen::VectorXd y2(2);
    y2 << 0.0, 1.0;
    CHECK_THROWS_AS(gp.fit(x2, y2, 0u), ConfigError);
}
