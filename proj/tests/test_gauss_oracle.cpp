#include "doctest.h"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "bbdm/bridge.hpp"
#include "bbdm/gauss_oracle.hpp"
#include "bbdm/rng.hpp"

using namespace bbdm;

namespace {

StateVector scalar(double v) { return StateVector::Constant(1, v); }

struct Moments {
    double mean, var, se_mean, se_var;
};

Moments summarize(const std::vector<double>& xs) {
    const double n = static_cast<double>(xs.size());
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= n;
    double m2 = 0.0, m4 = 0.0;
    for (double x : xs) {
        const double d = (x - mean) * (x - mean);
        m2 += d;
        m4 += d * d;
    }
    m2 /= n;
    m4 /= n;
    return {mean, m2 * n / (n - 1.0), std::sqrt(m2 / n), std::sqrt((m4 - m2 * m2) / n)};
}

std::vector<double> run_chains(const JointGaussianSpec& spec, const BridgeSchedule& sch, double y, int n,
                               std::uint64_t seed) {
    std::vector<double> out(static_cast<std::size_t>(n));
    std::vector<double> noise(static_cast<std::size_t>(sch.num_steps() - 1));
    for (int i = 0; i < n; ++i) {
        Rng rng(seed, "chain", static_cast<std::uint64_t>(i));
        for (auto& z : noise) z = rng.normal();
        out[i] = exact_reverse_chain(spec, sch, y, noise);
    }
    return out;
}

}  // namespace

TEST_CASE("grid posterior reproduces the hand example") {
    const BridgeSchedule sch(4, 1.0);
    const auto g = grid_bayes_posterior(sch, 2, 0.6, 0.0, 1.0, -5.0, 5.0, 20001);
    CHECK(std::abs(g.mean - 0.3) < 1e-8);
    CHECK(std::abs(g.var - 0.25) < 1e-8);
}

TEST_CASE("grid posterior agrees with the closed form on randomized cases") {
    Rng rng(42);
    int cases = 0;
    double worst = 0.0;
    for (int T : {4, 10, 50}) {
        for (double s : {0.5, 1.0, 2.0}) {
            const BridgeSchedule sch(T, s);
            for (int k = 0; k < 15; ++k) {
                const int t = static_cast<int>(rng.uniform_int(2, T - 1));
                const double x0 = 2.0 * rng.normal(), y = 2.0 * rng.normal();
                const double x_t = forward_sample(sch, scalar(x0), scalar(y), t, scalar(rng.normal()))[0];
                const auto grid = grid_bayes_posterior_auto(sch, t, x_t, x0, y);
                const auto exact = posterior(sch, scalar(x_t), scalar(x0), scalar(y), t);
                worst = std::max({worst, std::abs(grid.mean - exact.mean[0]), std::abs(grid.var - exact.var)});
                ++cases;
            }
        }
    }
    CHECK(cases >= 100);
    CHECK(worst < 1e-6);
}

TEST_CASE("grid refinement converges") {
    const BridgeSchedule sch(10, 1.0);
    const auto coarse = grid_bayes_posterior(sch, 4, 0.2, -1.0, 1.5, -6.0, 6.0, 2001);
    const auto fine = grid_bayes_posterior(sch, 4, 0.2, -1.0, 1.5, -6.0, 6.0, 20001);
    CHECK(std::abs(coarse.mean - fine.mean) < 1e-8);
}

TEST_CASE("grid posterior is affine-equivariant") {
    const BridgeSchedule sch(10, 2.0);
    const auto base = grid_bayes_posterior_auto(sch, 6, 0.4, -0.3, 1.1);
    const auto mirrored = grid_bayes_posterior_auto(sch, 6, -0.4, 0.3, -1.1);
    CHECK(std::abs(base.mean + mirrored.mean) < 1e-9);
    CHECK(std::abs(base.var - mirrored.var) < 1e-9);
    const auto shifted = grid_bayes_posterior_auto(sch, 6, 0.4 + 3.0, -0.3 + 3.0, 1.1 + 3.0);
    CHECK(std::abs(shifted.mean - (base.mean + 3.0)) < 1e-9);
}

TEST_CASE("grid posterior errors") {
    const BridgeSchedule sch(10, 1.0);
    CHECK_THROWS_AS(grid_bayes_posterior(sch, 4, 0.0, 0.0, 1.0, -5.0, 5.0, 10), std::invalid_argument);
    CHECK_THROWS_AS(grid_bayes_posterior(sch, 4, 0.0, 0.0, 1.0, 5.0, -5.0, 2000), std::invalid_argument);
    CHECK_THROWS_AS(grid_bayes_posterior(sch, 4, 0.0, 0.0, 1.0, 0.0, 0.01, 2000), std::invalid_argument);
    CHECK_THROWS_AS(grid_bayes_posterior(sch, 1, 0.0, 0.0, 1.0, -5.0, 5.0, 2000), std::out_of_range);
    CHECK_THROWS_AS(grid_bayes_posterior(sch, 10, 0.0, 0.0, 1.0, -5.0, 5.0, 2000), std::out_of_range);
}

TEST_CASE("optimal_eps hand example") {
    const BridgeSchedule sch(4, 1.0);
    const JointGaussianSpec spec{0.0, 0.0, 1.0, 1.0, 0.0};
    CHECK(optimal_eps(spec, sch, 2, 1.0) == doctest::Approx(0.5).epsilon(1e-14));
    // At t = 0, x_t is x0 itself.
    CHECK(std::abs(optimal_eps(spec, sch, 0, 0.37)) < 1e-15);
}

TEST_CASE("optimal_eps matches Monte-Carlo least squares") {
    const BridgeSchedule sch(100, 1.0);
    struct Case {
        JointGaussianSpec spec;
        int t;
        double x;
    };
    const Case cases[] = {
        {{0.0, 0.0, 1.0, 1.0, 0.8}, 30, 0.7},
        {{0.5, -1.0, 2.0, 0.5, -0.3}, 75, -0.2},
        {{1.0, 1.0, 1.0, 1.0, 1.0}, 50, 1.4},
    };
    for (const auto& c : cases) {
        Rng rng(1234, "mc-regression", static_cast<std::uint64_t>(c.t));
        const int n = 1000000;
        const double sd0 = std::sqrt(c.spec.var0), sdy = std::sqrt(c.spec.vary);
        const double m = sch.m(c.t), sd_t = std::sqrt(sch.delta(c.t));
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        std::vector<double> xs(n), ys(n);
        for (int i = 0; i < n; ++i) {
            const double z1 = rng.normal(), z2 = rng.normal();
            const double x0 = c.spec.mean0 + sd0 * z1;
            const double y = c.spec.meany + sdy * (c.spec.corr * z1 + std::sqrt(1.0 - c.spec.corr * c.spec.corr) * z2);
            const double x_t = (1.0 - m) * x0 + m * y + sd_t * rng.normal();
            xs[i] = x_t;
            ys[i] = x_t - x0;
            sx += x_t;
            sy += ys[i];
        }
        const double mx = sx / n, my = sy / n;
        for (int i = 0; i < n; ++i) {
            sxx += (xs[i] - mx) * (xs[i] - mx);
            sxy += (xs[i] - mx) * (ys[i] - my);
        }
        const double slope = sxy / sxx, icpt = my - slope * mx;
        double rss = 0;
        for (int i = 0; i < n; ++i) {
            const double r = ys[i] - (icpt + slope * xs[i]);
            rss += r * r;
        }
        const double sigma = std::sqrt(rss / (n - 2));
        const double se = sigma * std::sqrt(1.0 / n + (c.x - mx) * (c.x - mx) / sxx);
        const double fitted = icpt + slope * c.x;
        CAPTURE(c.t);
        CHECK(std::abs(fitted - optimal_eps(c.spec, sch, c.t, c.x)) < 3.0 * se + 1e-12);
    }
}

TEST_CASE("optimal_eps rejects zero variance") {
    const BridgeSchedule sch(4, 1.0);
    JointGaussianSpec spec{0.0, 0.0, 0.0, 1.0, 0.0};
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    CHECK_THROWS_AS(optimal_eps(spec, sch, 0, 0.0), std::domain_error);
    spec = {0.0, 0.0, 1.0, 1.0, 1.5};
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}

TEST_CASE("exact reverse chain is deterministic with zero noise") {
    const BridgeSchedule sch(50, 1.0);
    const JointGaussianSpec spec{0.3, 0.3, 1.0, 1.0, 1.0};
    const std::vector<double> zeros(49, 0.0);
    const double a = exact_reverse_chain(spec, sch, 1.7, zeros);
    const double b = exact_reverse_chain(spec, sch, 1.7, zeros);
    CHECK(a == b);
    CHECK(std::isfinite(a));
}

TEST_CASE("exact reverse chain with T=2 uses only the endpoint step") {
    const BridgeSchedule sch(2, 1.0);
    const JointGaussianSpec spec{0.0, 0.0, 1.0, 1.0, 0.5};
    const double y = 0.8, z = -1.3;
    const std::vector<double> noise{z};
    // Hand recursion: x1 drawn around the x0 estimate at t=2, then x0 = x1 - eps*(x1, 1).
    const double x0_hat = y - optimal_eps(spec, sch, 2, y);
    const double x1 = 0.5 * x0_hat + 0.5 * y + std::sqrt(sch.delta(1)) * z;
    const double expected = x1 - optimal_eps(spec, sch, 1, x1);
    CHECK(exact_reverse_chain(spec, sch, y, noise) == doctest::Approx(expected).epsilon(1e-14));
    CHECK_THROWS_AS(exact_reverse_chain(spec, sch, y, std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("exact reverse chain is robust to discretization") {
    const JointGaussianSpec spec{0.0, 0.0, 1.0, 1.0, 0.8};
    const BridgeSchedule fine(1000, 1.0), coarse(100, 1.0);
    const int n = 4000;
    const auto a = summarize(run_chains(spec, fine, 1.0, n, 1));
    const auto b = summarize(run_chains(spec, coarse, 1.0, n, 2));
    CHECK(std::abs(a.mean - b.mean) < 3.0 * std::hypot(a.se_mean, b.se_mean));
    CHECK(std::abs(a.var - b.var) < 3.0 * std::hypot(a.se_var, b.se_var));
}

TEST_CASE("oracle model applies optimal_eps per coordinate") {
    const BridgeSchedule sch(20, 1.0);
    const JointGaussianSpec spec{0.0, 1.0, 1.0, 2.0, 0.4};
    const OracleEpsModel model(spec, sch, 2);
    Eigen::MatrixXd x(3, 2);
    x << 0.1, 0.2, -1.0, 3.0, 0.5, 0.5;
    const auto p = model.predict(x, 7, 20);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 2; ++j) CHECK(p(i, j) == optimal_eps(spec, sch, 7, x(i, j)));
    CHECK_THROWS_AS(model.predict(Eigen::MatrixXd(1, 3), 7, 20), std::invalid_argument);
}
